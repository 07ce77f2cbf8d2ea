"""Ordered-group axioms, group actions, and direction statistics."""

import numpy as np
import pytest

from guidedmh.errors import DegenerateStatisticError
from guidedmh.groups import (
    Direction,
    centered_scaling_group,
    componentwise_group,
    delta_prod,
    delta_quadform,
    delta_sum,
    mlex_leq,
    scaling_group,
)
from guidedmh.primitives import CholFactor, RngStream


def test_direction_two_values_and_involution():
    assert {int(d) for d in Direction} == {-1, 1}
    for d in Direction:
        assert d.flipped().flipped() is d
        assert d.flipped() is not d


def test_scaling_group_identity_and_inverse():
    g = scaling_group()
    rng = RngStream(101).generator()
    for v in rng.gamma(2.0, 1.0, size=50):
        assert g.compose(g.identity, v) == v
        assert g.compose(v, g.inverse(v)) == pytest.approx(1.0, rel=1e-14)


def test_scaling_group_order_axioms():
    # reflexive, total, transitive, translation invariant on 1e4 random triples
    g = scaling_group()
    rng = RngStream(102).generator()
    a, b, c = rng.gamma(2.0, 1.0, size=(3, 10_000))
    for ai, bi, ci in zip(a, b, c):
        assert g.leq(ai, ai)
        assert g.leq(ai, bi) or g.leq(bi, ai)
        lo, mid, hi = sorted((ai, bi, ci))
        assert g.leq(lo, mid) and g.leq(mid, hi) and g.leq(lo, hi)
        if g.leq(ai, bi):
            assert g.leq(g.compose(ci, ai), g.compose(ci, bi))
            assert g.leq(g.compose(ai, ci), g.compose(bi, ci))


def test_componentwise_group_order_axioms():
    g = componentwise_group(3)
    rng = RngStream(103).generator()
    trips = rng.gamma(2.0, 1.0, size=(10_000, 3, 3))
    for a, b, c in trips:
        assert g.leq(a, a)
        fwd = g.leq(a, b)
        assert fwd or g.leq(b, a)
        # antisymmetry: both directions only on bit-equal partial products
        if fwd and g.leq(b, a):
            assert np.array_equal(np.cumsum(np.log(a)[::-1]), np.cumsum(np.log(b)[::-1]))
        # translation invariance on both sides (componentwise product commutes)
        if fwd:
            assert g.leq(g.compose(c, a), g.compose(c, b))


def test_componentwise_group_transitivity():
    g = componentwise_group(2)
    rng = RngStream(104).generator()
    trips = rng.gamma(2.0, 1.0, size=(2_000, 3, 2))
    for a, b, c in trips:
        xs = [a, b, c]
        # sort by the group order, then check the chain
        if not g.leq(xs[0], xs[1]):
            xs[0], xs[1] = xs[1], xs[0]
        if not g.leq(xs[1], xs[2]):
            xs[1], xs[2] = xs[2], xs[1]
        if not g.leq(xs[0], xs[1]):
            xs[0], xs[1] = xs[1], xs[0]
        assert g.leq(xs[0], xs[1]) and g.leq(xs[1], xs[2]) and g.leq(xs[0], xs[2])


def test_action_compatibility():
    rng = RngStream(105).generator()
    x = rng.normal(size=4)
    xp = rng.gamma(2.0, 1.0, size=4)
    x0 = rng.normal(size=4)

    sg = scaling_group()
    cg = centered_scaling_group(x0)
    pg = componentwise_group(4)
    for _ in range(200):
        g, h = rng.gamma(2.0, 1.0, size=2)
        gv, hv = rng.gamma(2.0, 1.0, size=(2, 4))
        np.testing.assert_allclose(sg.act(g, sg.act(h, xp)),
                                   sg.act(sg.compose(g, h), xp), rtol=1e-12)
        np.testing.assert_allclose(cg.act(g, cg.act(h, x)),
                                   cg.act(cg.compose(g, h), x), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(pg.act(gv, pg.act(hv, xp)),
                                   pg.act(pg.compose(gv, hv), xp), rtol=1e-12)


def test_mlex_spec_examples():
    assert mlex_leq((2.0, 3.0), (2.0, 3.0))
    # tail products s(a) = (6, 2), s(b) = (6, 3); first difference at the tail
    assert mlex_leq((3.0, 2.0), (2.0, 3.0))
    assert not mlex_leq((2.0, 3.0), (3.0, 2.0))


def test_mlex_translation_invariance():
    g = np.array([5.0, 7.0])
    rng = RngStream(106).generator()
    for _ in range(2_000):
        a, b = rng.gamma(2.0, 1.0, size=(2, 2))
        assert mlex_leq(a, b) == mlex_leq(g * a, g * b)


def test_mlex_errors():
    with pytest.raises(ValueError):
        mlex_leq((1.0, 2.0), (1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        mlex_leq((1.0, -2.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        mlex_leq((0.0, 2.0), (1.0, 2.0))


def test_mlex_agrees_with_product_order_off_ties():
    # the first tail partial product is the full product, so any product
    # difference is decided at index 0 and the two orders coincide
    rng = RngStream(107).generator()
    for _ in range(5_000):
        a, b = rng.gamma(2.0, 1.0, size=(2, 3))
        pa, pb = delta_prod(a), delta_prod(b)
        if pa == pb:
            continue
        assert mlex_leq(a, b) == (pa < pb)


def test_delta_quadform_examples():
    chol = CholFactor.identity(2)
    assert delta_quadform((3.0, 4.0), (0.0, 0.0), chol) == pytest.approx(25.0)
    with pytest.raises(DegenerateStatisticError):
        delta_quadform((1.0, 2.0), (1.0, 2.0), chol)


def test_delta_quadform_general_matrix():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    chol = CholFactor.from_covariance(cov)
    x = np.array([1.2, -0.7])
    expect = x @ np.linalg.solve(cov, x)
    assert delta_quadform(x, np.zeros(2), chol) == pytest.approx(expect, rel=1e-12)


def test_delta_sum_prod_examples():
    assert delta_sum((1.0, 2.0, 3.0)) == 6.0
    assert delta_prod(np.ones(7)) == pytest.approx(1.0)
    for bad in [(-1.0, 2.0), (0.0, 1.0)]:
        with pytest.raises(ValueError):
            delta_sum(bad)
        with pytest.raises(ValueError):
            delta_prod(bad)


def test_statistic_equivariance():
    # delta(act(g, x)) == compose(g, delta(x)) for the three pairings in use
    rng = RngStream(108).generator()
    x0 = rng.normal(size=3)
    chol = CholFactor.from_covariance(np.diag([1.0, 2.0, 0.5]))
    cg = centered_scaling_group(x0)
    sg = scaling_group()
    pg = componentwise_group(3)
    for _ in range(500):
        x = rng.normal(size=3) + x0
        xp = rng.gamma(2.0, 1.0, size=3)
        g = float(rng.gamma(2.0, 1.0))
        gv = rng.gamma(2.0, 1.0, size=3)

        # quad-form with the centered scaling action
        lhs = delta_quadform(cg.act(g, x), x0, chol)
        assert lhs == pytest.approx(g * delta_quadform(x, x0, chol), rel=1e-10)

        # coordinate sum with scalar scaling
        assert delta_sum(sg.act(g, xp)) == pytest.approx(g * delta_sum(xp), rel=1e-10)

        # identity-vector statistic with the componentwise action
        np.testing.assert_allclose(pg.act(gv, xp), pg.compose(gv, xp), rtol=1e-10)


def test_spec_scaling_equivariance_value():
    # g = 2.5 against a random state, 1e-12 relative
    rng = RngStream(109).generator()
    x0 = np.zeros(4)
    chol = CholFactor.identity(4)
    cg = centered_scaling_group(x0)
    x = rng.normal(size=4)
    assert delta_quadform(cg.act(2.5, x), x0, chol) == pytest.approx(
        2.5 * delta_quadform(x, x0, chol), rel=1e-12)
