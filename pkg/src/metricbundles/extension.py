"""Extending fields from a dense subset, and lifting projections.

The lift of a projection field p on X to a superspace Z runs in three steps:

1. extend every real coordinate of p (diagonal entries, real and imaginary
   parts of the upper triangle) with a McShane extension;
2. measure the defect ||b^2 - b|| of the extended field b, which must stay
   below 1/4 so that the spectrum splits into two clusters around 0 and 1;
3. cut the spectrum of b(z) at 1/2 pointwise.

The result agrees with p on X exactly, and its Lipschitz constant is
controlled by L(b) / (1 - 4 delta).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .errors import (
    BadParams,
    BundleError,
    DefectTooLarge,
    RestrictionMismatch,
    SizeMismatch,
    SlopeTooSmall,
    StepFailure,
)
from .fields import (
    MatrixField,
    ProjectionField,
    lipschitz_constant,
    lipschitz_values,
    restrict,
    sup_distance,
)
from .hermitian import defects, spectral_cut_batch
from .metric import METRIC_TOL, FiniteMetricSpace, _as_subset, eps_density

DEFAULT_GAP_TOL = 1e-6


def lambda_star(n: int) -> float:
    """2n (n/(n+1))^(n-1) - 1, evaluated exactly and rounded once."""
    if n < 1:
        raise BadParams("n must be a positive integer")
    return float(2 * n * Fraction(n, n + 1) ** (n - 1) - 1)


def mcshane_extend(space: FiniteMetricSpace, subset: Sequence[int], f, N: float | None = None
                   ) -> np.ndarray:
    """Extend the real function ``f`` on ``subset`` to all of ``space``.

    G(z) = max(max_x [f(x) - N d(z, x)], -||f||_inf).  With N >= L(f) the
    extension agrees with f on the subset, has Lipschitz constant at most N,
    and the same sup norm.  ``N`` defaults to L(f).
    """
    idx = _as_subset(subset, len(space))
    f = np.asarray(f, dtype=float)
    if f.shape != (idx.size,):
        raise SizeMismatch(f"function has {f.shape} values for {idx.size} subset points")
    sub = space.subspace(idx)
    Lf, _ = lipschitz_values(sub, f[:, None, None])
    if N is None:
        N = Lf
    if N < Lf:
        raise SlopeTooSmall(f"slope {N:.6g} is below the Lipschitz constant {Lf:.6g}")
    return _mcshane(space.block(np.arange(len(space)), idx), idx, f, N)


def _mcshane(dist_to_subset: np.ndarray, idx: np.ndarray, f: np.ndarray, N: float) -> np.ndarray:
    g = np.max(f[None, :] - N * dist_to_subset, axis=1)
    g = np.maximum(g, -np.max(np.abs(f)))
    g[idx] = f
    return g


def _coordinates(values: np.ndarray) -> list[tuple[tuple[int, int], str, np.ndarray]]:
    n = values.shape[-1]
    coords = []
    for j in range(n):
        coords.append(((j, j), "re", values[:, j, j].real))
        for k in range(j + 1, n):
            coords.append(((j, k), "re", values[:, j, k].real))
            coords.append(((j, k), "im", values[:, j, k].imag))
    return coords


def _check_subspace(p: MatrixField, space: FiniteMetricSpace, idx: np.ndarray) -> None:
    if len(p) != idx.size:
        raise SizeMismatch(f"field has {len(p)} points but the subset has {idx.size}")
    if len(p) > 1:
        err = np.abs(space.block(idx, idx) - p.space.dist).max()
        if err > METRIC_TOL:
            raise RestrictionMismatch(
                f"subset distances differ from the field's space by {err:.3g}"
            )


@dataclass(frozen=True)
class Extension:
    field: MatrixField
    achieved_L: float
    source_L: float
    slopes: tuple[float, ...]

    @property
    def ratio(self) -> float:
        return self.achieved_L / self.source_L if self.source_L > 0 else 0.0


def extend_hermitian(p: MatrixField, space: FiniteMetricSpace, subset: Sequence[int], *,
                     shared_slope: bool = False) -> Extension:
    """Coordinatewise McShane extension of a self-adjoint field from ``subset`` to ``space``.

    Each real coordinate uses its own scalar Lipschitz constant as slope,
    or L(p) for every coordinate when ``shared_slope`` is set.
    """
    idx = _as_subset(subset, len(space))
    _check_subspace(p, space, idx)
    Lp = lipschitz_constant(p).L
    dist = space.block(np.arange(len(space)), idx)
    n = p.n
    out = np.zeros((len(space), n, n), dtype=complex)
    slopes = []
    for (j, k), part, f in _coordinates(p.values):
        f = np.ascontiguousarray(f)
        N = Lp if shared_slope else lipschitz_values(p.space, f[:, None, None])[0]
        slopes.append(N)
        g = _mcshane(dist, idx, f, N)
        if j == k:
            out[:, j, j] = g
        elif part == "re":
            out[:, j, k] += g
            out[:, k, j] += g
        else:
            out[:, j, k] += 1j * g
            out[:, k, j] -= 1j * g
    out[idx] = p.values
    b = MatrixField(space, out)
    return Extension(b, lipschitz_constant(b).L, Lp, tuple(slopes))


@dataclass
class LiftCertificate:
    n: int
    eps: float
    L_p: float
    L_b: float
    delta_actual: float
    spectral_gap_min: float
    gap_tol: float
    L_q: float
    bound_li: float
    sup_b: float
    defect_chain_bound: float
    lambda_star: float
    bound_paper_lower: float | None
    bound_paper_upper: float | None
    preconditions_met: dict[str, bool] = field(default_factory=dict)
    shared_slope: bool = False

    @property
    def extension_ratio(self) -> float:
        return self.L_b / self.L_p if self.L_p > 0 else 0.0

    def to_json(self) -> dict[str, Any]:
        out = {"type": "lift"}
        out.update(asdict(self))
        out["extension_ratio"] = self.extension_ratio
        return out


def lambda_lift_bound(lam: float, L: float, eps: float) -> float | None:
    """lam L / (1 - 12 eps lam L), or None when the denominator is not positive."""
    den = 1.0 - 12.0 * eps * lam * L
    return lam * L / den if den > 0 else None


@dataclass(frozen=True)
class LiftResult:
    q: ProjectionField
    b: MatrixField
    certificate: LiftCertificate


def lift_projection(p: ProjectionField, space: FiniteMetricSpace, subset: Sequence[int], *,
                    shared_slope: bool = False, gap_tol: float = DEFAULT_GAP_TOL,
                    certify: bool = True) -> LiftResult:
    """Lift a projection field on ``subset`` to a projection field on all of ``space``.

    Raises :class:`DefectTooLarge` when the extension is too far from being a
    projection (the subset is too coarse relative to L(p)).  The measured
    defect only sees the sample points; with ``certify`` the a priori bound
    eps (2 ||b|| + 1) L(b), valid at every point within eps of the subset,
    must also stay below 1/4.
    """
    idx = _as_subset(subset, len(space))
    eps = eps_density(space, idx)
    ext = extend_hermitian(p, space, idx, shared_slope=shared_slope)
    b = ext.field
    delta = float(defects(b.values).max())
    sup_b = b.sup_norm()
    chain = eps * (2.0 * sup_b + 1.0) * ext.achieved_L
    if delta >= 0.25 - gap_tol or (certify and chain >= 0.25):
        raise DefectTooLarge(
            f"extension defect {delta:.4g} (a priori bound {chain:.4g}) is not below 1/4; "
            f"the subset is too coarse (eps = {eps:.4g}, L(p) = {ext.source_L:.4g})"
        )
    cut_tol = max(gap_tol, 0.25 - 2.0 * delta)
    qv, gaps = spectral_cut_batch(np.asarray(b.values), 0.5, cut_tol)
    qv[idx] = p.values
    q = ProjectionField(space, qv, proj_tol=p.proj_tol)
    L_q = lipschitz_constant(q).L
    lam = lambda_star(p.n)
    lower = lambda_lift_bound(lam, ext.source_L, eps)
    upper = lambda_lift_bound(2 * lam, ext.source_L, eps)
    cert = LiftCertificate(
        n=p.n,
        eps=eps,
        L_p=ext.source_L,
        L_b=ext.achieved_L,
        delta_actual=delta,
        spectral_gap_min=float(gaps.min()),
        gap_tol=cut_tol,
        L_q=L_q,
        bound_li=ext.achieved_L / (1.0 - 4.0 * delta),
        sup_b=sup_b,
        defect_chain_bound=chain,
        lambda_star=lam,
        bound_paper_lower=lower,
        bound_paper_upper=upper,
        preconditions_met={
            "delta_below_quarter": delta < 0.25,
            "defect_chain_below_quarter": chain < 0.25,
            "eps_lambda_L_below_1_12_lower": eps * lam * ext.source_L < 1 / 12,
            "eps_lambda_L_below_1_12_upper": eps * 2 * lam * ext.source_L < 1 / 12,
        },
        shared_slope=shared_slope,
    )
    return LiftResult(q, b, cert)


@dataclass(frozen=True)
class PathLift:
    lifts: list[LiftResult]
    source_steps: list[float]
    lifted_steps: list[float]

    @property
    def L_max(self) -> float:
        return max(r.certificate.L_q for r in self.lifts)

    @property
    def N(self) -> float:
        return max(r.certificate.L_p for r in self.lifts)

    def to_json(self) -> dict[str, Any]:
        N = self.N
        first = self.lifts[0].certificate
        lam = first.lambda_star
        return {
            "type": "lift_path",
            "steps": len(self.lifts),
            "N": N,
            "L_q_max": self.L_max,
            "bound_paper_lower": lambda_lift_bound(lam, N, first.eps),
            "bound_paper_upper": lambda_lift_bound(2 * lam, N, first.eps),
            "source_step_norms": self.source_steps,
            "lifted_step_norms": self.lifted_steps,
            "certificates": [r.certificate.to_json() for r in self.lifts],
        }


def lift_path(path: Sequence[ProjectionField], space: FiniteMetricSpace, subset: Sequence[int],
              **kwargs) -> PathLift:
    """Lift each projection of a path; failures are reported with their step index."""
    if not path:
        raise BadParams("empty path")
    lifts = []
    for t, p in enumerate(path):
        try:
            lifts.append(lift_projection(p, space, subset, **kwargs))
        except BundleError as exc:
            raise StepFailure(t, exc) from exc
    src = [sup_distance(a, b) for a, b in zip(path, path[1:])]
    lifted = [sup_distance(a.q, b.q) for a, b in zip(lifts, lifts[1:])]
    return PathLift(lifts, src, lifted)


def check_restriction(q: MatrixField, p: MatrixField, subset: Sequence[int]) -> bool:
    """True when q restricted to ``subset`` equals p bit for bit."""
    return bool(np.array_equal(restrict(q, subset).values, p.values))
