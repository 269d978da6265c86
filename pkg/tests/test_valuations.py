"""Valuation kinds: values, gradients, homogeneity, JSON round trips."""

import numpy as np
import pytest

from cesmarket import (
    BadParameter,
    BoundaryGradient,
    CesForm,
    CobbDouglas,
    DimensionMismatch,
    Leontief,
    Linear,
    NotDifferentiable,
    Power,
    euler_residual,
)
from cesmarket.valuations import as_bundle, from_json

from conftest import random_valuation


def fd_gradient(v, x, h=1e-6):
    """Central-difference gradient oracle (interior points only)."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (v.value(x + e) - v.value(x - e)) / (2 * h)
    return g


# -- values -------------------------------------------------------------------


def test_linear_value():
    assert Linear([6.0]).value([1.0]) == 6.0
    assert Linear([1.0, 2.0]).value([0.5, 0.25]) == 1.0


def test_cobb_douglas_value():
    v = CobbDouglas([0.5, 0.5])
    assert v.value([0.25, 1.0]) == pytest.approx(0.5, abs=1e-12)
    assert v.value([0.0, 1.0]) == 0.0


def test_leontief_value():
    v = Leontief([1.0, 2.0])
    assert v.value([0.5, 0.6]) == pytest.approx(0.3, abs=1e-12)
    # zero-weight goods are ignored by the min
    assert Leontief([1.0, 0.0]).value([0.5, 0.0]) == 0.5


def test_power_value():
    v = Power(2.0, 0.5)
    assert v.value([0.25]) == pytest.approx(1.0, abs=1e-12)
    assert v.value([0.0]) == 0.0


def test_ces_value():
    v = CesForm([1.0, 1.0], 0.5, 1.0)
    assert v.value([0.25, 0.25]) == pytest.approx(1.0, abs=1e-12)
    # sigma = degree = 1 reduces to linear
    w = CesForm([2.0, 3.0], 1.0, 1.0)
    assert w.value([1.0, 1.0]) == pytest.approx(5.0, abs=1e-12)


def test_value_zero_bundle_is_zero(rng):
    for _ in range(20):
        m = int(rng.integers(1, 4))
        v = random_valuation(rng, m, float(rng.choice([1.0, 0.5, 0.75])))
        assert v.value(np.zeros(m)) == 0.0


# -- gradients ----------------------------------------------------------------


def test_linear_gradient_constant():
    v = Linear([1.0, 2.0])
    np.testing.assert_allclose(v.gradient([0.3, 0.9]), [1.0, 2.0])
    np.testing.assert_allclose(v.gradient([0.0, 0.0]), [1.0, 2.0])


def test_power_gradient():
    v = Power(2.0, 0.5)
    assert v.gradient([0.25])[0] == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(BoundaryGradient):
        v.gradient([0.0])
    # degree 1 stays differentiable at zero
    assert Power(3.0, 1.0).gradient([0.0])[0] == 3.0


def test_cobb_douglas_boundary_gradient():
    v = CobbDouglas([0.5, 0.5])
    with pytest.raises(BoundaryGradient):
        v.gradient([0.0, 1.0])


def test_ces_boundary_gradient_only_when_sigma_below_one():
    curved = CesForm([1.0, 1.0], 0.5, 1.0)
    with pytest.raises(BoundaryGradient):
        curved.gradient([0.0, 0.5])
    smooth = CesForm([1.0, 2.0], 1.0, 0.5)
    g = smooth.gradient([0.0, 0.5])
    assert np.all(np.isfinite(g))


def test_leontief_not_differentiable():
    with pytest.raises(NotDifferentiable):
        Leontief([1.0, 2.0]).gradient([0.5, 0.5])
    with pytest.raises(NotDifferentiable):
        euler_residual(Leontief([1.0]), [0.5])


def test_gradient_matches_finite_differences(rng):
    for _ in range(60):
        m = int(rng.integers(1, 4))
        v = random_valuation(rng, m, float(rng.choice([1.0, 0.5, 0.75])))
        x = rng.uniform(0.1, 1.0, m)
        np.testing.assert_allclose(v.gradient(x), fd_gradient(v, x), atol=1e-4)


# -- structural properties ----------------------------------------------------


def test_euler_residual_examples():
    assert euler_residual(Linear([1.0, 2.0]), [0.2, 0.3]) == 0.0
    r = euler_residual(CobbDouglas([0.5, 0.5]), [0.5, 0.5])
    assert r <= 1e-8


def test_euler_residual_random(rng):
    for _ in range(100):
        m = int(rng.integers(1, 4))
        v = random_valuation(rng, m, float(rng.choice([1.0, 0.5, 0.75])))
        x = rng.uniform(0.05, 1.0, m)
        assert euler_residual(v, x) <= 1e-8 * max(1.0, v.value(x))


def test_homogeneity(rng):
    for _ in range(40):
        m = int(rng.integers(1, 4))
        v = random_valuation(rng, m, float(rng.choice([1.0, 0.5, 0.75])))
        x = rng.uniform(0.1, 0.5, m)
        base = v.value(x)
        for lam in (0.25, 0.5, 2.0):
            expected = lam**v.degree * base
            assert v.value(lam * x) == pytest.approx(expected, rel=1e-10)


def test_monotone_and_concave(rng):
    for _ in range(40):
        m = int(rng.integers(1, 4))
        kind = ["linear", "ces", "cobb-douglas", "leontief"][int(rng.integers(0, 4))]
        deg = 1.0 if kind in ("linear", "leontief") else 0.75
        v = (
            Leontief(rng.uniform(0.5, 2.0, m))
            if kind == "leontief"
            else random_valuation(rng, m, deg, kind=kind)
        )
        x = rng.uniform(0.0, 1.0, m)
        y = x * rng.uniform(0.0, 1.0, m)
        assert v.value(x) >= v.value(y) - 1e-12
        z = rng.uniform(0.0, 1.0, m)
        mid = v.value(0.5 * x + 0.5 * z)
        assert mid >= 0.5 * v.value(x) + 0.5 * v.value(z) - 1e-10


def test_divergent_at_zero_masks():
    assert not Linear([1.0, 2.0]).divergent_at_zero().any()
    assert Power(1.0, 0.5).divergent_at_zero().all()
    assert not Power(1.0, 1.0).divergent_at_zero().any()
    np.testing.assert_array_equal(
        CobbDouglas([0.5, 0.0, 0.5]).divergent_at_zero(), [True, False, True]
    )
    assert CesForm([1.0, 1.0], 0.5, 1.0).divergent_at_zero().all()
    assert not CesForm([1.0, 1.0], 1.0, 1.0).divergent_at_zero().any()


def test_valued_goods():
    np.testing.assert_array_equal(Linear([0.0, 3.0]).valued_goods(), [False, True])
    np.testing.assert_array_equal(Leontief([2.0, 0.0]).valued_goods(), [True, False])


# -- construction and bundle validation ----------------------------------------


def test_constructor_rejections():
    with pytest.raises(BadParameter):
        Linear([0.0, 0.0])
    with pytest.raises(BadParameter):
        Linear([-1.0, 2.0])
    with pytest.raises(BadParameter):
        Power(1.0, 1.5)
    with pytest.raises(BadParameter):
        Power(0.0, 0.5)
    with pytest.raises(BadParameter):
        CobbDouglas([0.7, 0.7])  # exponent sum 1.4 > 1
    with pytest.raises(BadParameter):
        CobbDouglas([0.5, 0.5], scale=-1.0)
    with pytest.raises(BadParameter):
        CesForm([1.0, 1.0], 1.5, 1.0)
    with pytest.raises(BadParameter):
        CesForm([1.0, 1.0], 0.5, 0.0)
    with pytest.raises(BadParameter):
        Leontief([0.0, 0.0])


def test_bundle_validation():
    v = Linear([1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        v.value([1.0])
    with pytest.raises(BadParameter):
        v.value([-0.1, 0.5])
    with pytest.raises(BadParameter):
        v.value([np.nan, 0.5])
    with pytest.raises(DimensionMismatch):
        as_bundle([[1.0, 2.0]])


# -- JSON ----------------------------------------------------------------------


def test_json_round_trips(rng):
    for _ in range(30):
        m = int(rng.integers(1, 4))
        deg = float(rng.choice([1.0, 0.5, 0.75]))
        v = random_valuation(rng, m, deg)
        w = from_json(v.to_json())
        assert type(w) is type(v)
        x = rng.uniform(0.05, 1.0, m)
        assert w.value(x) == pytest.approx(v.value(x), rel=1e-12)
    leo = Leontief([1.0, 2.0])
    again = from_json(leo.to_json())
    assert again.value([0.5, 0.6]) == leo.value([0.5, 0.6])


def test_from_json_errors():
    with pytest.raises(BadParameter):
        from_json({"kind": "mystery", "weights": [1.0]})
    with pytest.raises(BadParameter):
        from_json({"kind": "linear"})
    with pytest.raises(DimensionMismatch):
        from_json({"kind": "power", "weights": [1.0, 2.0], "degree": 0.5})
    with pytest.raises(BadParameter):
        from_json({"kind": "ces", "weights": [1.0]})
    with pytest.raises(BadParameter):
        from_json({"kind": "cobb-douglas", "weights": [0.5, 0.5], "degree": 0.8})
    with pytest.raises(BadParameter):
        from_json("linear")
