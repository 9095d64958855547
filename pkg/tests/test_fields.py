import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from metricbundles.errors import NotAFrame, NotAProjection, NotHermitian, SizeMismatch
from metricbundles.fields import (
    Frame,
    MatrixField,
    ProjectionField,
    direct_sum,
    field_from_json,
    field_to_json,
    frame_to_projection,
    key_lemma_slack,
    lipschitz_constant,
    lipschitz_values,
    rank1_field,
    restrict,
)
from metricbundles.metric import FiniteMetricSpace, couple_by_correspondence
from metricbundles.zoo import (
    circle_space,
    constant_projection,
    mobius_frame,
    mobius_projection,
    nearest_correspondence,
    torus_frame,
    torus_space,
)
from metricbundles.extension import lift_projection

seeds = st.integers(0, 2**32 - 1)


def random_field(rng, space, n=2):
    return MatrixField(space, np.stack([oracles.random_hermitian(rng, n) for _ in range(len(space))]))


def test_constant_field_has_zero_L():
    S = circle_space(9)
    rep = lipschitz_constant(constant_projection(S, np.diag([1, 0])))
    assert rep.L == 0.0
    assert rep.sup_norm == 1.0


def test_mobius_m4():
    rep = lipschitz_constant(mobius_projection(4))
    assert rep.L == pytest.approx(2 * np.sqrt(2), abs=1e-12)
    i, j = rep.argmax_pair
    assert circle_space(4).distance(i, j) == 0.25


def test_two_point_space():
    S = FiniteMetricSpace(["a", "b"], [[0, 0.5], [0.5, 0]])
    p = ProjectionField(S, [np.zeros((2, 2)), np.diag([1, 0])])
    rep = lipschitz_constant(p)
    assert rep.L == 2.0
    assert rep.argmax_pair == ("a", "b")


def test_lipschitz_matches_brute_force(rng):
    for n in (1, 2, 3):
        for _ in range(3):
            d = oracles.random_metric(rng, 15)
            S = FiniteMetricSpace(range(15), d)
            f = random_field(rng, S, n)
            assert lipschitz_constant(f).L == pytest.approx(oracles.lipschitz(d, f.values), rel=1e-12)


def test_argmax_realizes_L():
    S = circle_space(16)
    p = mobius_projection(space=S)
    rep = lipschitz_constant(p)
    i, j = rep.argmax_index
    assert oracles.svd_norm(p.values[i] - p.values[j]) / S.dist[i, j] == pytest.approx(rep.L, rel=1e-12)


@pytest.mark.parametrize("threads", [1, 3])
def test_exact_ties_break_to_first_pair(threads):
    from metricbundles._parallel import set_threads
    n = 600
    d = np.ones((n, n)) - np.eye(n)
    S = FiniteMetricSpace(range(n), d, validate=False)
    vals = np.zeros((n, 1, 1))
    vals[3::2] = 1.0  # points 0, 1, 2 share the value 0
    try:
        set_threads(threads)
        L, ij = lipschitz_values(S, vals)
    finally:
        set_threads(None)
    assert (L, ij) == (1.0, (0, 3))


def test_lipschitz_independent_of_threads(rng):
    from metricbundles._parallel import set_threads
    S = circle_space(700)
    f = random_field(rng, S, 3)
    try:
        set_threads(1)
        a = lipschitz_values(S, f.values)
        set_threads(4)
        b = lipschitz_values(S, f.values)
    finally:
        set_threads(None)
    assert a == b


def test_field_validation():
    S = circle_space(3)
    with pytest.raises(NotHermitian):
        MatrixField(S, np.array([[[0, 1], [0, 0]]] * 3))
    with pytest.raises(SizeMismatch):
        MatrixField(S, np.zeros((2, 2, 2)))
    with pytest.raises(NotAProjection):
        ProjectionField(S, np.array([np.diag([0.5, 0.0])] * 3))


@given(seeds)
def test_seminorm_axioms(seed):
    rng = np.random.default_rng(seed)
    S = circle_space(10)
    a, b = random_field(rng, S), random_field(rng, S)
    La, Lb = lipschitz_constant(a).L, lipschitz_constant(b).L
    s = MatrixField(S, a.values + b.values)
    assert lipschitz_constant(s).L <= La + Lb + 1e-9
    lam = float(rng.normal())
    assert lipschitz_constant(MatrixField(S, lam * a.values)).L == pytest.approx(abs(lam) * La, rel=1e-9)


@given(seeds)
def test_leibniz_inequality(seed):
    rng = np.random.default_rng(seed)
    d = oracles.random_metric(rng, 10)
    S = FiniteMetricSpace(range(10), d)
    a, b = random_field(rng, S), random_field(rng, S)
    ab = a.values @ b.values
    # the product of self-adjoint fields is not self-adjoint, so use the general norm
    L_ab = oracles.lipschitz(d, ab)
    bound = lipschitz_constant(a).L * b.sup_norm() + a.sup_norm() * lipschitz_constant(b).L
    assert L_ab <= bound + 1e-9


@given(seeds)
def test_strong_leibniz_for_inverses(seed):
    rng = np.random.default_rng(seed)
    d = oracles.random_metric(rng, 8)
    S = FiniteMetricSpace(range(8), d)
    base = random_field(rng, S).values
    a = MatrixField(S, base + 5 * np.eye(2))  # spectrum away from 0
    inv = np.linalg.inv(a.values)
    inv = 0.5 * (inv + np.conj(np.swapaxes(inv, 1, 2)))
    inv_norm = max(oracles.svd_norm(m) for m in inv)
    assert oracles.lipschitz(d, inv) <= lipschitz_constant(a).L * inv_norm ** 2 + 1e-9


def test_frames():
    S = circle_space(8)
    p = frame_to_projection(mobius_frame(S))
    np.testing.assert_allclose(p.values[0], np.diag([1, 0]), atol=1e-15)
    basis = Frame(S, np.stack([np.tile([1, 0], (8, 1)), np.tile([0, 1], (8, 1))]))
    np.testing.assert_array_equal(frame_to_projection(basis).values, np.tile(np.eye(2), (8, 1, 1)))
    T = torus_space(4, 4)
    q = frame_to_projection(torus_frame(1, T))
    np.testing.assert_allclose(q.values[1], np.full((2, 2), 0.5), atol=1e-15)  # (r, s) = (0, 1/4)
    with pytest.raises(NotAFrame):
        frame_to_projection(Frame(S, np.ones((2, 8, 1))))


def test_rank1_field_examples():
    S = circle_space(12)
    assert lipschitz_constant(rank1_field(S, np.tile([0, 1], (12, 1)))).L == 0
    r = S.coords
    u = np.stack([np.cos(np.pi * r), np.sin(np.pi * r)], axis=1)
    L = lipschitz_constant(rank1_field(S, u)).L
    assert L == pytest.approx(12 * np.sin(np.pi / 12), abs=1e-12)
    assert L <= lipschitz_values(S, u)[0] + 1e-12


@given(seeds)
def test_rank1_contracts_lipschitz(seed):
    rng = np.random.default_rng(seed)
    d = oracles.random_metric(rng, 12)
    S = FiniteMetricSpace(range(12), d)
    u = np.stack([oracles.random_unit(rng, 3) for _ in range(12)])
    Lp = oracles.lipschitz(d, rank1_field(S, u).values)
    Lu = max(np.linalg.norm(u[i] - u[j]) / d[i, j] for i in range(12) for j in range(i + 1, 12))
    assert Lp <= Lu + 1e-12


def test_restrict():
    S = circle_space(16)
    p = mobius_projection(space=S)
    assert np.array_equal(restrict(p, range(16)).values, p.values)
    half = restrict(p, range(0, 16, 2))
    direct = mobius_projection(8)
    np.testing.assert_allclose(half.values, direct.values, atol=1e-15)
    assert lipschitz_constant(half).L == pytest.approx(8 * np.sin(np.pi / 8), abs=1e-12)
    assert isinstance(half, ProjectionField)


@given(seeds)
def test_restriction_never_increases_L(seed):
    rng = np.random.default_rng(seed)
    S = circle_space(20)
    f = random_field(rng, S)
    sub = sorted(rng.choice(20, size=int(rng.integers(2, 20)), replace=False).tolist())
    assert lipschitz_constant(restrict(f, sub)).L <= lipschitz_constant(f).L


def test_direct_sum():
    X = circle_space(4)
    c = couple_by_correspondence(X, X, [(i, i) for i in range(4)], 0.01)
    p = mobius_projection(space=X)
    assert lipschitz_constant(direct_sum(p, p, c)).L == pytest.approx(lipschitz_constant(p).L)
    a = constant_projection(X, np.diag([1, 0]))
    b = constant_projection(X, np.diag([0, 1]))
    assert lipschitz_constant(direct_sum(a, b, c)).L == pytest.approx(100.0)


def test_direct_sum_of_mobius_and_lift():
    X, Y = circle_space(64), circle_space(128)
    R = nearest_correspondence(X, Y)
    c = couple_by_correspondence(X, Y, R, 1 / 256)
    p = mobius_projection(space=X)
    q = lift_projection(p, Y, range(0, 128, 2)).q
    L = lipschitz_constant(direct_sum(p, q, c)).L
    assert np.isfinite(L)
    assert L >= max(lipschitz_constant(p).L, lipschitz_constant(q).L) - 1e-12


def test_key_lemma_examples():
    S = circle_space(8)
    assert key_lemma_slack(S, constant_projection(S, np.diag([1, 0])), [0, 2, 4, 6]) == 0
    # tent vanishing on even points: ||b|| = eps L(b)
    vals = np.zeros((8, 1, 1))
    vals[1::2] = 0.125
    assert key_lemma_slack(S, MatrixField(S, vals), range(0, 8, 2)) == pytest.approx(0, abs=1e-15)


def test_key_lemma_random(rng):
    S = circle_space(32)
    for _ in range(50):
        assert key_lemma_slack(S, random_field(rng, S), range(0, 32, 2)) >= -1e-10


def test_field_json_roundtrip(rng):
    S = circle_space(5)
    f = random_field(rng, S, 3)
    data = json.loads(json.dumps(field_to_json(f)))
    g = field_from_json(data, S)
    assert np.array_equal(g.values, f.values)
    p = mobius_projection(space=S)
    q = field_from_json(json.loads(json.dumps(field_to_json(p))), S)
    assert isinstance(q, ProjectionField) and np.array_equal(q.values, p.values)
