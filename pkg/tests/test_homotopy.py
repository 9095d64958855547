import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from metricbundles.certificates import verify
from metricbundles.errors import BadParams, NoGap, RestrictionMismatch, SizeMismatch, SpacingViolation
from metricbundles.extension import lift_projection
from metricbundles.fields import ProjectionField, lipschitz_constant, restrict, sup_distance
from metricbundles.homotopy import (
    UniquenessCertificate,
    chained_join,
    component_graph,
    extension_uniqueness,
    fiberwise_join,
    join_projections,
    transport,
)
from metricbundles.metric import couple_by_correspondence
from metricbundles.zoo import circle_space, constant_projection, mobius_projection, nearest_correspondence

EVEN_256 = range(0, 256, 2)


@pytest.fixture(scope="module")
def circle32_pair():
    S = circle_space(32)
    return mobius_projection(space=S), mobius_projection(space=S, phase=np.pi / 32)


@pytest.fixture(scope="module")
def two_lifts():
    p = mobius_projection(128)
    Z = circle_space(256)
    a = lift_projection(p, Z, EVEN_256)
    b = lift_projection(p, Z, EVEN_256, shared_slope=True)
    return p, a.q, b.q


def test_join_identical_is_constant():
    q = mobius_projection(16)
    path = join_projections(q, q, steps=5)
    assert all(np.array_equal(f.values, q.values) for f in path.fields)
    assert path.L_max == lipschitz_constant(q).L
    assert path.delta == 0


def test_join_rotation_on_circle32(circle32_pair):
    q0, q1 = circle32_pair
    path = join_projections(q0, q1, steps=50)
    assert path.delta == pytest.approx(np.sin(np.pi / 32), abs=1e-12)
    assert len(path.fields) == 51 and path.grid[0] == 0 and path.grid[-1] == 1
    assert np.array_equal(path.fields[0].values, q0.values)
    assert np.array_equal(path.fields[-1].values, q1.values)
    for f in path.fields:
        v = np.asarray(f.values)
        assert max(oracles.svd_norm(m @ m - m) for m in v) < 1e-10
    bound = max(lipschitz_constant(q0).L, lipschitz_constant(q1).L) / (1 - path.delta)
    assert path.bound == bound
    assert path.L_max <= bound + 1e-6
    assert verify(path.to_json())


def test_join_orthogonal_fibers_has_no_gap():
    S = circle_space(16)
    with pytest.raises(NoGap):
        join_projections(mobius_projection(space=S), constant_projection(S, np.diag([1, 0])))


def test_join_rejects_different_spaces():
    with pytest.raises(SizeMismatch):
        join_projections(mobius_projection(8), mobius_projection(16))


def test_join_is_time_symmetric(circle32_pair):
    q0, q1 = circle32_pair
    fwd = join_projections(q0, q1, steps=20)
    back = join_projections(q1, q0, steps=20)
    rev = fwd.reversed()
    for a, b in zip(rev.fields, back.fields):
        assert np.array_equal(a.values, b.values)
    assert fwd.L_max == back.L_max


@given(st.floats(0.0, 0.4), st.integers(2, 12))
@settings(max_examples=15)
def test_join_bound_holds(phase, steps):
    S = circle_space(24)
    q0, q1 = mobius_projection(space=S), mobius_projection(space=S, phase=phase)
    if sup_distance(q0, q1) >= 1:
        return
    path = join_projections(q0, q1, steps=steps)
    assert path.L_max <= path.bound + 1e-6
    for f in path.fields:
        assert isinstance(f, ProjectionField)


def test_step_norms_refine(circle32_pair):
    q0, q1 = circle32_pair
    prev = None
    for steps in (5, 10, 20, 40):
        cur = max(join_projections(q0, q1, steps=steps).step_norms)
        if prev is not None:
            # each coarse step splits into two, so refining can at most halve the largest step
            assert prev / 2 - 1e-9 <= cur <= prev + 1e-9
        prev = cur


def test_fiberwise_identical_is_constant():
    q = mobius_projection(32)
    path = fiberwise_join(q, q, range(0, 32, 2), steps=4)
    assert all(np.array_equal(f.values, q.values) for f in path.fields)


def test_fiberwise_two_lifts(two_lifts):
    p, qa, qb = two_lifts
    assert not np.array_equal(qa.values, qb.values)
    path = fiberwise_join(qa, qb, EVEN_256, steps=20)
    for f in path.fields:
        assert np.array_equal(restrict(f, EVEN_256).values, p.values)
    assert np.array_equal(path.fields[0].values, qa.values)
    assert np.array_equal(path.fields[-1].values, qb.values)
    assert path.L_max <= path.bound + 1e-6


def test_fiberwise_coarse_has_no_gap():
    q = mobius_projection(64)
    with pytest.raises(NoGap):
        fiberwise_join(q, q, [0, 32])


def test_fiberwise_requires_equal_restrictions(circle32_pair):
    with pytest.raises(RestrictionMismatch):
        fiberwise_join(*circle32_pair, range(0, 32, 2))


def rotation_samples(phases):
    X, Z = circle_space(128), circle_space(256)
    ps = [mobius_projection(space=X, phase=t) for t in phases]
    qs = [lift_projection(p, Z, EVEN_256).q for p in ps]
    return ps, qs


def test_chain_single_segment_matches_join(two_lifts):
    ps, qs = rotation_samples([0.0, np.pi / 128])
    chain = chained_join(ps, qs, EVEN_256, delta=0.2, steps=10)
    join = join_projections(qs[0], qs[1], steps=10)
    for a, b in zip(chain.fields, join.fields):
        assert np.array_equal(a.values, b.values)


def test_chain_rotation_path():
    ps, qs = rotation_samples([t * np.pi / 128 for t in range(8)])
    path = chained_join(ps, qs, EVEN_256, delta=0.1, steps=5)
    N = max(lipschitz_constant(q).L for q in qs)
    assert path.N == N and path.bound == N / 0.9
    assert len(path.fields) == 7 * 5 + 1
    assert all(a < b for a, b in zip(path.grid, path.grid[1:]))
    assert path.L_max <= path.bound + 1e-6
    assert verify(path.to_json())


def test_chain_spacing_violation_reports_index():
    phases = [t * np.pi / 128 for t in range(4)] + [(t + 30) * np.pi / 128 for t in range(4, 6)]
    ps, qs = rotation_samples(phases)
    with pytest.raises(SpacingViolation) as info:
        chained_join(ps, qs, EVEN_256, delta=0.1)
    assert info.value.index == 3
    assert info.value.gap > info.value.allowed


def test_chain_preconditions():
    ps, qs = rotation_samples([0.0])
    with pytest.raises(NoGap):
        chained_join(ps, qs, EVEN_256, delta=1.0)
    with pytest.raises(BadParams):
        chained_join(ps, qs, EVEN_256, delta=0.01)


def test_uniqueness_arithmetic():
    c = UniquenessCertificate.from_terms(0.2, 0.01, 3.0, 3.0)
    assert c.delta == pytest.approx(0.26, abs=1e-15)
    assert c.certified and c.bound == pytest.approx(3 / 0.74)
    assert verify(c.to_json())
    assert UniquenessCertificate.from_terms(0.9, 0.1, 1.0, 1.0).decision == "no-certificate"


def test_uniqueness_identical_fields():
    q = mobius_projection(64)
    cert, path = extension_uniqueness(q, q, range(0, 64, 2))
    assert cert.delta == pytest.approx(2 * (1 / 64) * lipschitz_constant(q).L, rel=1e-12)
    assert cert.certified and path is not None


def test_uniqueness_mobius_vs_trivial():
    X, Z = circle_space(64), circle_space(128)
    sub = range(0, 128, 2)
    qm = lift_projection(mobius_projection(space=X), Z, sub).q
    qt = lift_projection(constant_projection(X, np.diag([1, 0])), Z, sub).q
    cert, path = extension_uniqueness(qm, qt, sub)
    assert cert.delta >= 1 and cert.decision == "no-certificate" and path is None
    assert verify(cert.to_json())


def test_components_examples():
    S = circle_space(64)
    ps = [mobius_projection(space=S), mobius_projection(space=S, phase=np.pi / 64),
          constant_projection(S, np.diag([1, 0]))]
    comp = component_graph(ps, budget=4.0)
    assert comp.components == [[0, 1], [2]]
    assert verify(comp.to_json())
    assert component_graph([ps[0]] * 3, budget=4.0).components == [[0, 1, 2]]
    assert component_graph([], budget=4.0).components == []
    with pytest.raises(BadParams):
        component_graph(ps, budget=0)


def test_components_budget_too_small():
    S = circle_space(64)
    ps = [mobius_projection(space=S), mobius_projection(space=S, phase=np.pi / 64)]
    assert component_graph(ps, budget=1.0).components == [[0], [1]]


def test_transport_certificate():
    X, Y = circle_space(64), circle_space(128)
    c = couple_by_correspondence(X, Y, nearest_correspondence(X, Y), 1 / 256)
    res = transport(mobius_projection(space=X), c)
    cert = res.certificate
    assert len(res.p_y) == 128
    assert np.array_equal(np.asarray(res.q.values)[list(c.x_ids)], mobius_projection(space=X).values)
    assert cert["uniqueness"]["decision"] == "certified"
    assert cert["fiberwise_path"] is not None
    assert cert["s_lower"] < cert["s_upper"]
    assert verify(cert)
