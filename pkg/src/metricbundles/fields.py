"""Matrix- and projection-valued fields on finite metric spaces.

The Lipschitz seminorm is computed exactly as a maximum over all unordered
pairs of points.  Pairs are processed in row blocks (optionally on a thread
pool); ties in the maximum resolve to the lexicographically smallest index
pair, so the reported argmax does not depend on blocking or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Hashable, Sequence

import numpy as np

from ._parallel import ordered_map
from .errors import NotAFrame, NotAProjection, SizeMismatch
from .hermitian import HERMITIAN_TOL, as_hermitian, defects, hermitian_norms, rank1_batch
from .metric import CoupledSpace, FiniteMetricSpace, _as_subset, eps_density

PROJ_TOL = 1e-9
# complex entries per block of pair differences
_BLOCK_BUDGET = 1 << 21


@dataclass(frozen=True)
class LipschitzReport:
    L: float
    argmax_pair: tuple[Hashable, Hashable] | None
    sup_norm: float
    argmax_index: tuple[int, int] | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "L": self.L,
            "argmax_pair": list(self.argmax_pair) if self.argmax_pair else None,
            "sup_norm": self.sup_norm,
        }


def _pair_norms_factory(values: np.ndarray, hermitian: bool
                        ) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Return f(rows, cols) giving the operator norm of values[i] - values[j]."""
    if values.ndim == 2:  # vector-valued: Euclidean norm
        def vec(rows, cols):
            d = values[rows][:, None, :] - values[cols][None, :, :]
            return np.sqrt(np.sum(np.abs(d) ** 2, axis=-1))
        return vec
    n = values.shape[-1]
    if hermitian and n == 1:
        v = values[:, 0, 0].real.copy()
        return lambda rows, cols: np.abs(v[rows][:, None] - v[cols][None, :])
    if hermitian and n == 2:
        d0 = values[:, 0, 0].real.copy()
        d1 = values[:, 1, 1].real.copy()
        off = values[:, 0, 1].copy()

        def two(rows, cols):
            a = d0[rows][:, None] - d0[cols][None, :]
            b = d1[rows][:, None] - d1[cols][None, :]
            c = off[rows][:, None] - off[cols][None, :]
            half = 0.5 * (a - b)
            return 0.5 * np.abs(a + b) + np.sqrt(half * half + (c.real * c.real + c.imag * c.imag))
        return two

    def general(rows, cols):
        d = values[rows][:, None] - values[cols][None, :]
        if hermitian:
            return hermitian_norms(d)
        return np.linalg.norm(d, ord=2, axis=(-2, -1))
    return general


def lipschitz_values(space: FiniteMetricSpace, values: np.ndarray, *,
                     hermitian: bool = True) -> tuple[float, tuple[int, int] | None]:
    """Exact sup of ||v(x) - v(y)|| / d(x, y) over pairs; returns (L, (i, j)).

    ``values`` may be a stack of matrices ``(N, n, n)`` (operator norm) or of
    vectors ``(N, m)`` (Euclidean norm).  Non-self-adjoint matrices are
    accepted with ``hermitian=False``.
    """
    values = np.asarray(values)
    npts = len(space)
    if values.shape[0] != npts:
        raise SizeMismatch(f"{values.shape[0]} values for {npts} points")
    if npts < 2:
        return 0.0, None
    norms = _pair_norms_factory(values, hermitian)
    fast = values.ndim == 2 or (hermitian and values.shape[-1] <= 2)
    per_pair = 1 if fast else int(np.prod(values.shape[1:]))
    bsize = max(1, min(256, _BLOCK_BUDGET // (npts * per_pair)))
    starts = list(range(0, npts - 1, bsize))

    def work(s: int) -> tuple[float, int, int]:
        rows = np.arange(s, min(s + bsize, npts - 1))
        cols = np.arange(s + 1, npts)
        num = norms(rows, cols)
        den = space.block(rows, cols)
        upper = cols[None, :] > rows[:, None]
        ratio = np.zeros_like(num, dtype=float)
        np.divide(num, den, out=ratio, where=upper)
        ratio[~upper] = -np.inf
        k = int(np.argmax(ratio))
        i, j = divmod(k, ratio.shape[1])
        return float(ratio[i, j]), int(rows[i]), int(cols[j])

    best = (-np.inf, -1, -1)
    for val, i, j in ordered_map(work, starts):
        if val > best[0]:
            best = (val, i, j)
    return max(best[0], 0.0), (best[1], best[2])


class MatrixField:
    """Self-adjoint n x n matrices indexed by the points of a finite metric space."""

    def __init__(self, space: FiniteMetricSpace, values, *, tol: float = HERMITIAN_TOL):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 3 or values.shape[1] != values.shape[2]:
            raise SizeMismatch(f"values must have shape (N, n, n), got {values.shape}")
        if values.shape[0] != len(space):
            raise SizeMismatch(f"{values.shape[0]} values for a space of {len(space)} points")
        as_hermitian(values, tol)
        values = 0.5 * (values + np.conj(np.swapaxes(values, -1, -2)))
        values.flags.writeable = False
        self.space = space
        self.values = values

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    def __len__(self) -> int:
        return self.values.shape[0]

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, points={len(self)}, space={self.space.kind})"

    def at(self, pid: Hashable) -> np.ndarray:
        return self.values[self.space.index_of(pid)]

    def sup_norm(self) -> float:
        return float(hermitian_norms(self.values).max()) if len(self) else 0.0

    def lipschitz(self) -> LipschitzReport:
        return lipschitz_constant(self)

    def _rebuild(self, space: FiniteMetricSpace, values: np.ndarray) -> "MatrixField":
        return MatrixField(space, values)


class ProjectionField(MatrixField):
    """A field whose values are orthogonal projections (up to ``proj_tol``)."""

    def __init__(self, space: FiniteMetricSpace, values, *, proj_tol: float = PROJ_TOL):
        super().__init__(space, values)
        self.proj_tol = proj_tol
        if len(self):
            dfc = defects(self.values)
            if dfc.max() > proj_tol:
                i = int(np.argmax(dfc))
                raise NotAProjection(
                    f"defect {dfc[i]:.3g} at point {space.point_ids[i]!r} exceeds {proj_tol:g}"
                )
            tr = np.trace(self.values, axis1=1, axis2=2).real
            if np.abs(tr - np.round(tr)).max() > max(proj_tol, 1e-12) * self.n:
                raise NotAProjection("pointwise trace is not an integer")

    def ranks(self) -> np.ndarray:
        return np.round(np.trace(self.values, axis1=1, axis2=2).real).astype(int)

    def _rebuild(self, space, values):
        return ProjectionField(space, values, proj_tol=self.proj_tol)


def lipschitz_constant(field: MatrixField) -> LipschitzReport:
    L, ij = lipschitz_values(field.space, field.values)
    pair = None if ij is None else (field.space.point_ids[ij[0]], field.space.point_ids[ij[1]])
    return LipschitzReport(L, pair, field.sup_norm(), ij)


def sup_distance(a: MatrixField | np.ndarray, b: MatrixField | np.ndarray) -> float:
    """max over points of ||a(x) - b(x)||."""
    va = a.values if isinstance(a, MatrixField) else np.asarray(a)
    vb = b.values if isinstance(b, MatrixField) else np.asarray(b)
    if va.shape != vb.shape:
        raise SizeMismatch(f"shape {va.shape} vs {vb.shape}")
    if va.shape[0] == 0:
        return 0.0
    return float(hermitian_norms(va - vb).max())


@dataclass(frozen=True)
class Frame:
    """Frame elements eta_j sampled at every point: ``vectors[j, x]`` is a vector in C^m."""

    space: FiniteMetricSpace
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3 or v.shape[1] != len(self.space):
            raise SizeMismatch(f"frame vectors must have shape (k, N, m), got {v.shape}")
        object.__setattr__(self, "vectors", v)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]


def frame_to_projection(frame: Frame, proj_tol: float = PROJ_TOL) -> ProjectionField:
    """Gram field p_jk(x) = <eta_j(x), eta_k(x)>, inner product linear in the second slot."""
    gram = np.einsum("jxl,kxl->xjk", np.conj(frame.vectors), frame.vectors)
    gram = 0.5 * (gram + np.conj(np.swapaxes(gram, -1, -2)))
    dfc = defects(gram)
    if dfc.size and dfc.max() > proj_tol:
        i = int(np.argmax(dfc))
        raise NotAFrame(
            f"Gram matrix defect {dfc[i]:.3g} at point {frame.space.point_ids[i]!r}; "
            "reconstruction formula fails"
        )
    return ProjectionField(frame.space, gram, proj_tol=proj_tol)


def rank1_field(space: FiniteMetricSpace, u, proj_tol: float = PROJ_TOL) -> ProjectionField:
    """Pointwise projection onto the line spanned by the unit vector u(x)."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != len(space):
        raise SizeMismatch(f"unit-vector field must have shape (N, m), got {u.shape}")
    return ProjectionField(space, rank1_batch(u), proj_tol=proj_tol)


def restrict(field: MatrixField, subset: Sequence[int]) -> MatrixField:
    """Restriction to ``subset``; values are copied exactly."""
    idx = _as_subset(subset, len(field.space))
    return field._rebuild(field.space.subspace(idx), field.values[idx])


def direct_sum(p: MatrixField, q: MatrixField, coupled: CoupledSpace) -> MatrixField:
    """The field on X ⊔ Y equal to p on the X part and q on the Y part."""
    if p.n != q.n:
        raise SizeMismatch(f"matrix sizes differ: {p.n} vs {q.n}")
    if len(p) != len(coupled.x_ids) or len(q) != len(coupled.y_ids):
        raise SizeMismatch("fields do not match the parts of the coupled space")
    values = np.empty((len(coupled.space), p.n, p.n), dtype=complex)
    values[list(coupled.x_ids)] = p.values
    values[list(coupled.y_ids)] = q.values
    if isinstance(p, ProjectionField) and isinstance(q, ProjectionField):
        return ProjectionField(coupled.space, values, proj_tol=max(p.proj_tol, q.proj_tol))
    return MatrixField(coupled.space, values)


def key_lemma_slack(space: FiniteMetricSpace, b: MatrixField, subset: Sequence[int]) -> float:
    """||b|_X|| + eps L(b) - ||b|| with eps the density of X; never negative up to rounding."""
    idx = _as_subset(subset, len(space))
    if b.space is not space and len(b.space) != len(space):
        raise SizeMismatch("field does not live on the given space")
    eps = eps_density(space, idx)
    norms = hermitian_norms(b.values)
    return float(norms[idx].max() + eps * lipschitz_constant(b).L - norms.max())


def field_to_json(field: MatrixField, space_ref: Any = None) -> dict[str, Any]:
    values = {
        str(pid): [[[float(z.real), float(z.imag)] for z in row] for row in field.values[i]]
        for i, pid in enumerate(field.space.point_ids)
    }
    out: dict[str, Any] = {
        "space": field.space.to_json() if space_ref is None else space_ref,
        "n": field.n,
        "kind": "projection" if isinstance(field, ProjectionField) else "matrix",
    }
    if isinstance(field, ProjectionField):
        out["proj_tol"] = field.proj_tol
    out["values"] = values
    return out


def field_from_json(data: dict[str, Any], space: FiniteMetricSpace) -> MatrixField:
    n = int(data["n"])
    raw = data["values"]
    values = np.empty((len(space), n, n), dtype=complex)
    for i, pid in enumerate(space.point_ids):
        key = str(pid)
        if key not in raw:
            raise SizeMismatch(f"no value for point {key!r}")
        arr = np.asarray(raw[key], dtype=float)
        if arr.shape != (n, n, 2):
            raise SizeMismatch(f"value at {key!r} has shape {arr.shape}, expected ({n}, {n}, 2)")
        values[i] = arr[..., 0] + 1j * arr[..., 1]
    if data.get("kind", "projection") == "projection":
        return ProjectionField(space, values, proj_tol=float(data.get("proj_tol", PROJ_TOL)))
    return MatrixField(space, values)
