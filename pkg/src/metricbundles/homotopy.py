"""Lipschitz-controlled paths between projection fields.

A path between q0 and q1 with ||q0 - q1|| = delta < 1 is built pointwise:
the straight segment a_t = (1 - t) q0 + t q1 has defect t (1 - t) ||q0 - q1||^2,
so its spectrum never meets 1/2 and cutting there gives projections q_t with
L(q_t) <= max(L(q0), L(q1)) / (1 - delta).

Absence of a certificate never proves that two fields are not homotopic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import (
    BadParams,
    NoGap,
    RestrictionMismatch,
    SizeMismatch,
    SpacingViolation,
    SpectralGapViolation,
)
from .extension import DEFAULT_GAP_TOL, lift_projection, lambda_lift_bound, lambda_star
from .fields import ProjectionField, lipschitz_constant, restrict, sup_distance
from .hermitian import spectral_cut_batch
from ._parallel import ordered_map
from .metric import CoupledSpace, FiniteMetricSpace, _as_subset, eps_density

DEFAULT_STEPS = 50


def same_space(a: FiniteMetricSpace, b: FiniteMetricSpace) -> bool:
    if a is b:
        return True
    if len(a) != len(b) or a.point_ids != b.point_ids or a.kind != b.kind:
        return False
    if a.coords is not None:
        return bool(np.array_equal(a.coords, b.coords))
    return bool(np.array_equal(a.dist, b.dist))


def _check_pair(q0: ProjectionField, q1: ProjectionField) -> None:
    if q0.n != q1.n or not same_space(q0.space, q1.space):
        raise SizeMismatch("fields live on different spaces or have different sizes")


@dataclass(frozen=True)
class HomotopyPath:
    grid: tuple[float, ...]
    fields: tuple[ProjectionField, ...]
    L_values: tuple[float, ...]
    step_norms: tuple[float, ...]
    delta: float
    bound: float
    N: float | None = None

    @property
    def L_max(self) -> float:
        return max(self.L_values)

    def reversed(self) -> "HomotopyPath":
        return HomotopyPath(
            tuple(1.0 - t for t in reversed(self.grid)),
            tuple(reversed(self.fields)),
            tuple(reversed(self.L_values)),
            tuple(reversed(self.step_norms)),
            self.delta,
            self.bound,
            self.N,
        )

    def to_json(self) -> dict[str, Any]:
        out = {
            "type": "homotopy",
            "steps": len(self.grid) - 1,
            "grid": list(self.grid),
            "delta": self.delta,
            "L_endpoints": [self.L_values[0], self.L_values[-1]],
            "L_per_step": list(self.L_values),
            "L_max": self.L_max,
            "bound": self.bound,
            "step_norms": list(self.step_norms),
        }
        if self.N is not None:
            out["N"] = self.N
        return out


def _cut_segment(q0: ProjectionField, q1: ProjectionField, steps: int, gap_tol: float
                 ) -> list[ProjectionField]:
    v0, v1 = np.asarray(q0.values), np.asarray(q1.values)
    # where the ends agree the segment is constant and the cut fixes it
    fixed = np.flatnonzero(np.all(v0 == v1, axis=(1, 2)))

    def one(i: int) -> ProjectionField:
        if i == 0:
            return q0
        if i == steps:
            return q1
        # weights written so that swapping q0 and q1 reverses the path bit for bit
        a = ((steps - i) / steps) * v0 + (i / steps) * v1
        try:
            vals, _ = spectral_cut_batch(a, 0.5, gap_tol)
        except SpectralGapViolation as exc:
            err = SpectralGapViolation(f"at t = {i / steps:g}, point {exc.index}: {exc}")
            err.index, err.t = exc.index, i / steps
            raise err from exc
        vals[fixed] = v0[fixed]
        return ProjectionField(q0.space, vals, proj_tol=q0.proj_tol)

    return ordered_map(one, range(steps + 1))


def _path(fields: list[ProjectionField], grid: Sequence[float], delta: float, bound: float,
          N: float | None = None) -> HomotopyPath:
    Ls = [lipschitz_constant(f).L for f in fields]
    steps = [sup_distance(a, b) for a, b in zip(fields, fields[1:])]
    return HomotopyPath(tuple(grid), tuple(fields), tuple(Ls), tuple(steps), delta, bound, N)


def join_projections(q0: ProjectionField, q1: ProjectionField, steps: int = DEFAULT_STEPS,
                     gap_tol: float = DEFAULT_GAP_TOL) -> HomotopyPath:
    """Path q_t from q0 to q1 on a uniform grid of ``steps`` intervals."""
    _check_pair(q0, q1)
    if steps < 1:
        raise BadParams("steps must be positive")
    delta = sup_distance(q0, q1)
    if delta >= 1.0:
        raise NoGap(f"||q0 - q1|| = {delta:.6g} is not below 1")
    # eigenvalues of a_t satisfy |l - 1/2| >= sqrt(1 - delta^2)/2 >= (1 - delta)/2
    tol = max(gap_tol, 0.5 * (1.0 - delta) * (1.0 - 1e-9))
    fields = _cut_segment(q0, q1, steps, tol)
    bound = max(lipschitz_constant(q0).L, lipschitz_constant(q1).L) / (1.0 - delta)
    return _path(fields, [i / steps for i in range(steps + 1)], delta, bound)


def fiberwise_join(q0: ProjectionField, q1: ProjectionField, subset: Sequence[int],
                   steps: int = DEFAULT_STEPS, gap_tol: float = DEFAULT_GAP_TOL) -> HomotopyPath:
    """Path between two lifts of the same field on ``subset`` that never moves on ``subset``."""
    _check_pair(q0, q1)
    idx = _as_subset(subset, len(q0.space))
    if not np.array_equal(np.asarray(q0.values)[idx], np.asarray(q1.values)[idx]):
        raise RestrictionMismatch("the two fields differ on the subset")
    eps = eps_density(q0.space, idx)
    L0, L1 = lipschitz_constant(q0).L, lipschitz_constant(q1).L
    fiber_delta = eps * (L0 + L1)
    if fiber_delta >= 1.0:
        raise NoGap(f"eps (L(q0) + L(q1)) = {fiber_delta:.6g} is not below 1")
    delta = sup_distance(q0, q1)
    tol = max(gap_tol, 0.5 * (1.0 - delta) * (1.0 - 1e-9))
    fields = _cut_segment(q0, q1, steps, tol)
    return _path(fields, [i / steps for i in range(steps + 1)], delta, max(L0, L1) / (1.0 - delta))


def chained_join(ps: Sequence[ProjectionField], qs: Sequence[ProjectionField],
                 subset: Sequence[int], delta: float, steps: int = DEFAULT_STEPS,
                 N: float | None = None) -> HomotopyPath:
    """Concatenate joins between consecutive lifts q_i of samples p_i of a path on ``subset``.

    Needs 2 eps N < delta < 1 and ||p_{i+1} - p_i|| <= delta - 2 eps N, which
    forces ||q_{i+1} - q_i|| <= delta; the result obeys L <= N / (1 - delta).
    """
    if len(ps) != len(qs) or not qs:
        raise BadParams("need one lift per sample and at least one sample")
    if not delta < 1.0:
        raise NoGap(f"delta = {delta} is not below 1")
    idx = _as_subset(subset, len(qs[0].space))
    for i, (p, q) in enumerate(zip(ps, qs)):
        _check_pair(qs[0], q)
        if not np.array_equal(np.asarray(q.values)[idx], np.asarray(p.values)):
            raise RestrictionMismatch(f"lift {i} does not restrict to its sample")
    eps = eps_density(qs[0].space, idx)
    Ls = [lipschitz_constant(q).L for q in qs]
    if N is None:
        N = max(Ls)
    elif max(Ls) > N:
        raise BadParams(f"a lift has L = {max(Ls):.6g} above N = {N:.6g}")
    allowed = delta - 2.0 * eps * N
    if allowed <= 0:
        raise BadParams(f"delta = {delta} does not exceed 2 eps N = {2 * eps * N:.6g}")
    for i in range(len(ps) - 1):
        gap = sup_distance(ps[i], ps[i + 1])
        if gap > allowed:
            raise SpacingViolation(i, gap, allowed)
    if len(qs) == 1:
        return _path([qs[0]], [0.0], delta, N / (1.0 - delta), N)
    segs = len(qs) - 1
    fields: list[ProjectionField] = [qs[0]]
    grid = [0.0]
    for i in range(segs):
        seg = join_projections(qs[i], qs[i + 1], steps)
        fields.extend(seg.fields[1:])
        grid.extend((i + j / steps) / segs for j in range(1, steps + 1))
    return _path(fields, grid, delta, N / (1.0 - delta), N)


@dataclass(frozen=True)
class UniquenessCertificate:
    norm_p_diff: float
    eps: float
    L_q0: float
    L_q1: float
    delta: float
    decision: str
    bound: float | None
    path_L_max: float | None = None

    @classmethod
    def from_terms(cls, norm_p_diff: float, eps: float, L_q0: float, L_q1: float,
                   path_L_max: float | None = None) -> "UniquenessCertificate":
        delta = norm_p_diff + eps * (L_q0 + L_q1)
        if delta < 1.0:
            return cls(norm_p_diff, eps, L_q0, L_q1, delta, "certified",
                       max(L_q0, L_q1) / (1.0 - delta), path_L_max)
        return cls(norm_p_diff, eps, L_q0, L_q1, delta, "no-certificate", None, None)

    @property
    def certified(self) -> bool:
        return self.decision == "certified"

    def to_json(self) -> dict[str, Any]:
        return {
            "type": "uniqueness",
            "formula_terms": {
                "norm_p_diff": self.norm_p_diff,
                "eps": self.eps,
                "L_q0": self.L_q0,
                "L_q1": self.L_q1,
            },
            "delta": self.delta,
            "decision": self.decision,
            "bound": self.bound,
            "path_L_max": self.path_L_max,
        }


def extension_uniqueness(q0: ProjectionField, q1: ProjectionField, subset: Sequence[int],
                         steps: int = DEFAULT_STEPS, build_path: bool = True
                         ) -> tuple[UniquenessCertificate, HomotopyPath | None]:
    """Certify that two fields on Z are joined by a controlled path, judged from their restrictions."""
    _check_pair(q0, q1)
    idx = _as_subset(subset, len(q0.space))
    eps = eps_density(q0.space, idx)
    norm_p = sup_distance(restrict(q0, idx), restrict(q1, idx))
    L0, L1 = lipschitz_constant(q0).L, lipschitz_constant(q1).L
    cert = UniquenessCertificate.from_terms(norm_p, eps, L0, L1)
    if not cert.certified or not build_path:
        return cert, None
    path = join_projections(q0, q1, steps)
    cert = UniquenessCertificate.from_terms(norm_p, eps, L0, L1, path.L_max)
    return cert, path


@dataclass(frozen=True)
class Components:
    components: list[list[int]]
    edges: list[tuple[int, int, float]]
    budget: float

    def to_json(self) -> dict[str, Any]:
        return {
            "type": "components",
            "budget": self.budget,
            "components": self.components,
            "edges": [{"i": i, "j": j, "L_max": L} for i, j, L in self.edges],
            "note": "components bound equivalence classes from above; a missing edge certifies nothing",
        }


def component_graph(projections: Sequence[ProjectionField], budget: float,
                    subset: Sequence[int] | None = None, steps: int = DEFAULT_STEPS) -> Components:
    """Connected components of the graph whose edges are certified paths with L_max <= budget."""
    if budget <= 0:
        raise BadParams("budget must be positive")
    k = len(projections)
    for p in projections[1:]:
        _check_pair(projections[0], p)
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]

    def test(pair: tuple[int, int]) -> float | None:
        a, b = projections[pair[0]], projections[pair[1]]
        try:
            if subset is None:
                path = join_projections(a, b, steps)
            else:
                cert, path = extension_uniqueness(a, b, subset, steps)
                if path is None:
                    return None
        except (NoGap, SpectralGapViolation):
            return None
        return path.L_max if path.L_max <= budget else None

    results = ordered_map(test, pairs)
    parent = list(range(k))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    edges = []
    for (i, j), L in zip(pairs, results):
        if L is not None:
            edges.append((i, j, L))
            ri, rj = find(i), find(j)
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    return Components(sorted(groups.values()), edges, budget)


@dataclass(frozen=True)
class TransportResult:
    q: ProjectionField
    q_alt: ProjectionField
    p_y: ProjectionField
    certificate: dict[str, Any]


def transport(p: ProjectionField, coupled: CoupledSpace, steps: int = DEFAULT_STEPS
              ) -> TransportResult:
    """Carry a projection field on X across a coupling to Y.

    Lifts p from X to X ⊔ Y twice (per-coordinate and shared slopes),
    restricts to Y, and certifies that the two lifts are joined by a path
    fixed on X.  Reports s = lam L(p) / (1 - 12 eps lam L(p)) for both ends
    of the range of the extension constant.
    """
    Z = coupled.space
    x = np.asarray(coupled.x_ids, dtype=np.intp)
    y = np.asarray(coupled.y_ids, dtype=np.intp)
    lift = lift_projection(p, Z, x)
    alt = lift_projection(p, Z, x, shared_slope=True)
    unique, path = extension_uniqueness(lift.q, alt.q, x, steps)
    fiber = fiberwise_join(lift.q, alt.q, x, steps) if unique.certified else None
    p_y = ProjectionField(Z.subspace(y), np.asarray(lift.q.values)[y], proj_tol=p.proj_tol)
    r = lift.certificate.L_p
    eps = coupled.eps
    lam = lambda_star(p.n)
    cert = {
        "type": "transport",
        "eps": eps,
        "r": r,
        "L_p_y": lipschitz_constant(p_y).L,
        "L_q": lift.certificate.L_q,
        "s_lower": lambda_lift_bound(lam, r, eps),
        "s_upper": lambda_lift_bound(2 * lam, r, eps),
        "lift": lift.certificate.to_json(),
        "lift_shared_slope": alt.certificate.to_json(),
        "uniqueness": unique.to_json(),
        "fiberwise_path": fiber.to_json() if fiber is not None else None,
    }
    return TransportResult(lift.q, alt.q, p_y, cert)
