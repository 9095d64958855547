"""Finite metric spaces, density and Hausdorff computations, couplings, quotients.

Spaces are stored either as an explicit distance matrix or as coordinates
on one of the model geometries (circle, flat torus, round sphere).  The
coordinate form computes distance blocks on demand, which keeps large grids
(a 128x128 torus has 2^28 ordered pairs) out of memory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Hashable, Sequence

import numpy as np

from ._parallel import ordered_map
from .errors import (
    BadParams,
    CorrespondenceDistortion,
    EmptySubset,
    MetricAxiomViolation,
    NonFinite,
    ZeroDistanceDistinctBlocks,
)

METRIC_TOL = 1e-12
ROW_BLOCK = 256


class _Geometry:
    kind = "abstract"

    def __len__(self) -> int:  # pragma: no cover - interface
        raise NotImplementedError

    def block(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def take(self, idx: np.ndarray) -> "_Geometry":  # pragma: no cover
        raise NotImplementedError

    def payload(self) -> dict[str, Any]:  # pragma: no cover
        raise NotImplementedError


class _Explicit(_Geometry):
    kind = "explicit"

    def __init__(self, dist: np.ndarray):
        self.dist = dist

    def __len__(self):
        return self.dist.shape[0]

    def block(self, rows, cols):
        return self.dist[np.ix_(rows, cols)]

    def take(self, idx):
        return _Explicit(self.dist[np.ix_(idx, idx)].copy())

    def payload(self):
        return {"dist": self.dist.tolist()}


class _Circle(_Geometry):
    """Points of R/Z with the arc metric min |r - s - n|."""

    kind = "circle"

    def __init__(self, coords: np.ndarray):
        self.coords = np.asarray(coords, dtype=float)

    def __len__(self):
        return self.coords.shape[0]

    def block(self, rows, cols):
        d = np.abs(self.coords[rows][:, None] - self.coords[cols][None, :])
        d = d - np.floor(d)
        return np.minimum(d, 1.0 - d)

    def take(self, idx):
        return _Circle(self.coords[idx])

    def payload(self):
        return {"coords": self.coords.tolist()}


class _Torus(_Geometry):
    """Points of R^2/Z^2 with the flat quotient metric."""

    kind = "torus"

    def __init__(self, coords: np.ndarray):
        self.coords = np.asarray(coords, dtype=float).reshape(-1, 2)

    def __len__(self):
        return self.coords.shape[0]

    def block(self, rows, cols):
        a = self.coords[rows]
        b = self.coords[cols]
        out = None
        for ax in range(2):
            d = np.abs(a[:, ax][:, None] - b[:, ax][None, :])
            d = d - np.floor(d)
            d = np.minimum(d, 1.0 - d)
            out = d * d if out is None else out + d * d
        return np.sqrt(out)

    def take(self, idx):
        return _Torus(self.coords[idx])

    def payload(self):
        return {"coords": self.coords.tolist()}


class _Sphere(_Geometry):
    """Unit vectors in R^3; distance is half the great-circle angle.

    The factor 1/2 makes this the quotient metric on SU(2)/U(1) for the
    inner product <X, Y> = tr(X Y*)/2 on su(2).
    """

    kind = "sphere"

    def __init__(self, vectors: np.ndarray):
        self.vectors = np.asarray(vectors, dtype=float).reshape(-1, 3)

    def __len__(self):
        return self.vectors.shape[0]

    def block(self, rows, cols):
        a = self.vectors[rows]
        b = self.vectors[cols]
        dot = a @ b.T
        cross = np.sqrt(np.maximum(
            (a[:, None, 1] * b[None, :, 2] - a[:, None, 2] * b[None, :, 1]) ** 2
            + (a[:, None, 2] * b[None, :, 0] - a[:, None, 0] * b[None, :, 2]) ** 2
            + (a[:, None, 0] * b[None, :, 1] - a[:, None, 1] * b[None, :, 0]) ** 2,
            0.0,
        ))
        return 0.5 * np.arctan2(cross, dot)

    def take(self, idx):
        return _Sphere(self.vectors[idx])

    def payload(self):
        return {"vectors": self.vectors.tolist()}


_GEOMETRIES = {"circle": _Circle, "torus": _Torus, "sphere": _Sphere}


def _check_metric(dist: np.ndarray, tol: float = METRIC_TOL) -> None:
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise MetricAxiomViolation(f"distance matrix must be square, got {dist.shape}")
    if not np.all(np.isfinite(dist)):
        raise NonFinite("distance matrix has non-finite entries")
    n = dist.shape[0]
    if np.any(np.diag(dist) != 0):
        raise MetricAxiomViolation("nonzero diagonal")
    if np.any(dist != dist.T):
        i, j = np.argwhere(dist != dist.T)[0]
        raise MetricAxiomViolation(f"asymmetric at ({i}, {j})")
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] <= 0):
        i, j = np.argwhere((dist <= 0) & off)[0]
        raise MetricAxiomViolation(f"non-positive distance between distinct points ({i}, {j})")
    for j in range(n):
        bad = dist > dist[:, j:j + 1] + dist[j:j + 1, :] + tol
        if bad.any():
            i, k = np.argwhere(bad)[0]
            raise MetricAxiomViolation(
                f"triangle inequality fails: d({i},{k}) > d({i},{j}) + d({j},{k})"
            )


class FiniteMetricSpace:
    """A finite metric space with ordered, opaque point identifiers."""

    def __init__(self, point_ids: Sequence[Hashable], dist, *, validate: bool = True,
                 tol: float = METRIC_TOL):
        dist = np.array(dist, dtype=float)
        if validate:
            _check_metric(dist, tol)
        self._init(tuple(point_ids), _Explicit(dist))

    def _init(self, point_ids: tuple, geometry: _Geometry) -> None:
        if len(point_ids) != len(geometry):
            raise BadParams(f"{len(point_ids)} point ids for {len(geometry)} points")
        if len(set(point_ids)) != len(point_ids):
            raise BadParams("point ids must be distinct")
        self.point_ids = point_ids
        self._geometry = geometry
        self._dist_cache: np.ndarray | None = None
        self._index = {pid: i for i, pid in enumerate(point_ids)}

    @classmethod
    def from_geometry(cls, kind: str, coords, point_ids: Sequence[Hashable] | None = None
                      ) -> "FiniteMetricSpace":
        if kind not in _GEOMETRIES:
            raise BadParams(f"unknown geometry kind {kind!r}")
        geom = _GEOMETRIES[kind](np.asarray(coords, dtype=float))
        if point_ids is None:
            point_ids = range(len(geom))
        obj = cls.__new__(cls)
        obj._init(tuple(point_ids), geom)
        return obj

    @property
    def kind(self) -> str:
        return self._geometry.kind

    @property
    def coords(self) -> np.ndarray | None:
        g = self._geometry
        for attr in ("coords", "vectors"):
            if hasattr(g, attr):
                return getattr(g, attr)
        return None

    def __len__(self) -> int:
        return len(self.point_ids)

    def __repr__(self) -> str:
        return f"FiniteMetricSpace(kind={self.kind!r}, size={len(self)})"

    def index_of(self, pid: Hashable) -> int:
        return self._index[pid]

    def block(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        if self._dist_cache is not None:
            return self._dist_cache[np.ix_(rows, cols)]
        return self._geometry.block(rows, cols)

    @property
    def dist(self) -> np.ndarray:
        """Full distance matrix (materialized once and cached)."""
        if self._dist_cache is None:
            if isinstance(self._geometry, _Explicit):
                d = self._geometry.dist
            else:
                idx = np.arange(len(self))
                d = self._geometry.block(idx, idx)
                np.fill_diagonal(d, 0.0)
            d = d.view()
            d.flags.writeable = False
            self._dist_cache = d
        return self._dist_cache

    def distance(self, a: Hashable, b: Hashable) -> float:
        i, j = self._index[a], self._index[b]
        if i == j:
            return 0.0
        return float(self.block([i], [j])[0, 0])

    def subspace(self, subset: Sequence[int]) -> "FiniteMetricSpace":
        idx = _as_subset(subset, len(self))
        obj = FiniteMetricSpace.__new__(FiniteMetricSpace)
        obj._init(tuple(self.point_ids[i] for i in idx), self._geometry.take(idx))
        return obj

    def diameter(self) -> float:
        n = len(self)
        if n < 2:
            return 0.0
        return max(float(self.block(rows, np.arange(n)).max()) for rows in _row_blocks(n))

    def validate(self, tol: float = METRIC_TOL) -> None:
        d = np.array(self.dist)
        np.fill_diagonal(d, 0.0)
        _check_metric(d, tol)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "point_ids": list(self.point_ids)}
        out.update(self._geometry.payload())
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "FiniteMetricSpace":
        kind = data.get("kind", "explicit")
        ids = data.get("point_ids")
        if ids is not None:
            ids = [_as_id(i) for i in ids]
        if kind == "explicit":
            return cls(ids, data["dist"])
        key = "vectors" if kind == "sphere" else "coords"
        return cls.from_geometry(kind, data[key], ids)


def _as_id(x):
    # JSON turns tuple ids (quotient blocks) into lists
    return tuple(_as_id(i) for i in x) if isinstance(x, list) else x


def _row_blocks(n: int, size: int = ROW_BLOCK) -> list[np.ndarray]:
    return [np.arange(s, min(s + size, n)) for s in range(0, n, size)]


def _as_subset(subset, n: int) -> np.ndarray:
    idx = np.asarray(list(subset), dtype=np.intp)
    if idx.size == 0:
        raise EmptySubset("subset is empty")
    if idx.min() < 0 or idx.max() >= n:
        raise EmptySubset(f"subset index out of range for a space of {n} points")
    if len(np.unique(idx)) != idx.size:
        raise BadParams("subset has repeated indices")
    return idx


def eps_density(space: FiniteMetricSpace, subset: Sequence[int]) -> float:
    """Smallest eps such that every point lies within eps of ``subset``."""
    idx = _as_subset(subset, len(space))
    worst = ordered_map(lambda rows: float(space.block(rows, idx).min(axis=1).max()),
                        _row_blocks(len(space)))
    return max(worst)


@dataclass(frozen=True)
class CoupledSpace:
    """A metric on X ⊔ Y restricting exactly to the given metrics on X and Y."""

    space: FiniteMetricSpace
    x_ids: tuple[int, ...]
    y_ids: tuple[int, ...]
    eps: float

    def to_json(self) -> dict[str, Any]:
        out = self.space.to_json()
        out.update(x_ids=list(self.x_ids), y_ids=list(self.y_ids), eps=self.eps)
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "CoupledSpace":
        space = FiniteMetricSpace.from_json(data)
        coupled = cls(space, tuple(data["x_ids"]), tuple(data["y_ids"]), float(data["eps"]))
        check_coupled(coupled)
        return coupled


def check_coupled(coupled: CoupledSpace, tol: float = METRIC_TOL) -> None:
    x, y = set(coupled.x_ids), set(coupled.y_ids)
    if x & y or len(x | y) != len(coupled.space) or not x or not y:
        raise BadParams("x_ids and y_ids must partition the points into two nonempty parts")
    h = hausdorff_between(coupled)
    if abs(h - coupled.eps) > tol:
        raise BadParams(f"recorded eps {coupled.eps} differs from Hausdorff distance {h}")


def correspondence_distortion(X: FiniteMetricSpace, Y: FiniteMetricSpace,
                              pairs: Sequence[tuple[int, int]]) -> float:
    xs = np.array([a for a, _ in pairs], dtype=np.intp)
    ys = np.array([b for _, b in pairs], dtype=np.intp)
    return float(np.abs(X.dist[np.ix_(xs, xs)] - Y.dist[np.ix_(ys, ys)]).max())


def couple_by_correspondence(X: FiniteMetricSpace, Y: FiniteMetricSpace,
                             pairs: Sequence[tuple[int, int]], eps0: float) -> CoupledSpace:
    """Glue X and Y along a correspondence with slack ``eps0``.

    Cross distances are min over (x', y') in ``pairs`` of
    d_X(x, x') + eps0 + d_Y(y', y).  Distances inside each part are copied
    unchanged.  Points of the union are X's points followed by Y's; ids are
    the strings ``"x:<pid>"`` and ``"y:<pid>"``.
    """
    pairs = [(int(a), int(b)) for a, b in pairs]
    if not pairs:
        raise BadParams("correspondence is empty")
    if not eps0 > 0:
        raise BadParams("eps0 must be positive")
    nx, ny = len(X), len(Y)
    for a, b in pairs:
        if not (0 <= a < nx and 0 <= b < ny):
            raise BadParams(f"pair ({a}, {b}) out of range")
    dis = correspondence_distortion(X, Y, pairs)
    if dis / 2 > eps0:
        raise CorrespondenceDistortion(
            f"distortion {dis:.6g} exceeds 2*eps0 = {2 * eps0:.6g}; restrictions would not be exact"
        )
    dx, dy = X.dist, Y.dist
    cross = np.full((nx, ny), np.inf)
    for a, b in pairs:
        np.minimum(cross, dx[:, a][:, None] + eps0 + dy[b, :][None, :], out=cross)
    dist = np.empty((nx + ny, nx + ny))
    dist[:nx, :nx] = dx
    dist[nx:, nx:] = dy
    dist[:nx, nx:] = cross
    dist[nx:, :nx] = cross.T
    ids = [("x", p) for p in X.point_ids] + [("y", p) for p in Y.point_ids]
    ids = [f"{t}:{p}" for t, p in ids]
    space = FiniteMetricSpace(ids, dist)
    x_ids = tuple(range(nx))
    y_ids = tuple(range(nx, nx + ny))
    eps = _hausdorff(space, x_ids, y_ids)
    return CoupledSpace(space, x_ids, y_ids, eps)


def _hausdorff(space: FiniteMetricSpace, x_ids, y_ids) -> float:
    d = space.block(np.asarray(x_ids), np.asarray(y_ids))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def hausdorff_between(coupled: CoupledSpace) -> float:
    """Two-sided Hausdorff distance between the X and Y parts."""
    return _hausdorff(coupled.space, coupled.x_ids, coupled.y_ids)


def quotient_metric(space: FiniteMetricSpace, partition: Sequence[Sequence[int]],
                    tol: float = METRIC_TOL) -> FiniteMetricSpace:
    """Metric on blocks: min distance over representatives, then validated.

    The min-over-representatives formula is a metric when the blocks are
    orbits of an isometric action; otherwise the triangle inequality can
    fail, which is reported rather than repaired.
    """
    blocks = [list(map(int, b)) for b in partition]
    flat = [i for b in blocks for i in b]
    if any(len(b) == 0 for b in blocks):
        raise EmptySubset("empty block in partition")
    if sorted(flat) != list(range(len(space))):
        raise BadParams("partition must cover every point exactly once")
    d = space.dist
    k = len(blocks)
    q = np.zeros((k, k))
    for a in range(k):
        for b in range(a + 1, k):
            v = d[np.ix_(blocks[a], blocks[b])].min()
            if v <= 0:
                raise ZeroDistanceDistinctBlocks(f"blocks {a} and {b} are at distance 0")
            q[a, b] = q[b, a] = v
    _check_metric(q, tol)
    ids = [tuple(space.point_ids[i] for i in b) if len(b) > 1 else space.point_ids[b[0]]
           for b in blocks]
    return FiniteMetricSpace(ids, q, validate=False)
