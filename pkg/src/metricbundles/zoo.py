"""Generators for the worked examples: circle, torus and sphere samples, and
the Möbius, torus line and monopole bundles on them, with analytic oracles.

Conventions
-----------
* Circle points are r in [0, 1) with the arc metric.
* Torus points are (r, s) in [0, 1)^2, flattened row-major with r slowest;
  the clutching phase e(k r) = exp(2 pi i k r) depends on r.
* An element of SU(2) is stored as its first column (z1, z2); a point of the
  sphere is the coset, represented through the Hopf map
  (z1, z2) -> (2 Re z1 conj(z2), 2 Im z1 conj(z2), |z1|^2 - |z2|^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadGrid, BadParams, NotOnSphere, NotPeriodicGrid
from .fields import Frame, ProjectionField, frame_to_projection, rank1_field
from .metric import FiniteMetricSpace

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
SPHERE_TOL = 1e-12
# orientation of (d/dr, d/ds) relative to the complex structure; fixed so that
# the torus line bundle with twist k has Chern number +k
CHERN_SIGN = 1.0


def e(t):
    return np.exp(2j * np.pi * np.asarray(t))


# --- spaces ---------------------------------------------------------------

def circle_space(m: int) -> FiniteMetricSpace:
    if m < 2:
        raise BadParams("circle needs m >= 2")
    return FiniteMetricSpace.from_geometry("circle", np.arange(m) / m)


def torus_space(m1: int, m2: int, offset: bool = False) -> FiniteMetricSpace:
    """Grid ((i + o)/m1, (j + o)/m2) with o = 1/2 when ``offset`` is set."""
    if m1 < 2 or m2 < 2:
        raise BadParams("torus needs m1, m2 >= 2")
    o = 0.5 if offset else 0.0
    r = (np.arange(m1) + o) / m1
    s = (np.arange(m2) + o) / m2
    rr, ss = np.meshgrid(r, s, indexing="ij")
    return FiniteMetricSpace.from_geometry("torus", np.stack([rr.ravel(), ss.ravel()], axis=1))


def fibonacci_sphere(N: int) -> np.ndarray:
    """N nearly uniform unit vectors (Fibonacci lattice)."""
    i = np.arange(N)
    z = 1.0 - (2.0 * i + 1.0) / N
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    phi = GOLDEN_ANGLE * i
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def sphere_space(N: int | None = None, vectors=None) -> FiniteMetricSpace:
    if vectors is None:
        if N is None or N < 4:
            raise BadParams("sphere needs N >= 4")
        vectors = fibonacci_sphere(N)
    vectors = np.asarray(vectors, dtype=float)
    if np.abs(np.linalg.norm(vectors, axis=1) - 1.0).max() > SPHERE_TOL:
        raise NotOnSphere("sphere points must be unit vectors")
    return FiniteMetricSpace.from_geometry("sphere", vectors)


def make_space(kind: str, **params) -> FiniteMetricSpace:
    if kind == "circle":
        return circle_space(int(params["m"]))
    if kind == "torus":
        return torus_space(int(params["m1"]), int(params["m2"]), bool(params.get("offset", False)))
    if kind == "sphere":
        return sphere_space(int(params["N"]))
    raise BadParams(f"unknown space kind {kind!r}")


def nearest_correspondence(X: FiniteMetricSpace, Y: FiniteMetricSpace,
                           tie_tol: float = 1e-12) -> list[tuple[int, int]]:
    """Correspondence pairing each point with its nearest point of the other space.

    Both spaces must be samples of the same model geometry.  On the circle
    and torus, ties go to the partner that puts y at the smallest forward
    offset from x, so every pair leans the same way and the distortion stays
    at one grid spacing; on the sphere ties go to the smaller index.
    """
    if X.kind != Y.kind or X.coords is None:
        raise BadParams("nearest correspondence needs two samples of the same model geometry")
    both = FiniteMetricSpace.from_geometry(X.kind, np.concatenate([X.coords, Y.coords]))
    nx, ny = len(X), len(Y)
    d = both.block(np.arange(nx), np.arange(nx, nx + ny))
    if X.kind in ("circle", "torus"):
        off = np.mod(Y.coords[None, :] - X.coords[:, None], 1.0)
        off = off.reshape(nx, ny, -1)
    else:
        off = np.zeros((nx, ny, 1))

    def pick(dists, keys):
        cand = np.flatnonzero(dists <= dists.min() + tie_tol)
        # lexsort treats its last key as primary
        return int(cand[np.lexsort(keys[cand].T[::-1])[0]])

    pairs = {(i, pick(d[i], off[i])) for i in range(nx)}
    pairs |= {(pick(d[:, j], off[:, j]), j) for j in range(ny)}
    return sorted(pairs)


# --- circle ---------------------------------------------------------------

def mobius_frame(space: FiniteMetricSpace, phase: float = 0.0) -> Frame:
    """Frame (cos(pi r + phase), sin(pi r + phase)) of the Möbius line bundle."""
    if space.kind != "circle":
        raise BadParams("Möbius frame needs a circle space")
    r = space.coords
    ang = np.pi * r + phase
    return Frame(space, np.stack([np.cos(ang), np.sin(ang)])[:, :, None])


def mobius_projection(m: int | None = None, *, space: FiniteMetricSpace | None = None,
                      phase: float = 0.0) -> ProjectionField:
    """Rank-one projection onto (cos(pi r + phase), sin(pi r + phase)).

    On the m-point circle its Lipschitz constant is m sin(pi/m).  ``phase``
    rotates the whole field; phase = pi/m equals the field shifted by one
    grid step.
    """
    if space is None:
        if m is None:
            raise BadParams("give m or space")
        space = circle_space(m)
    if space.kind != "circle":
        raise BadParams("Möbius projection needs a circle space")
    ang = np.pi * space.coords + phase
    return rank1_field(space, np.stack([np.cos(ang), np.sin(ang)], axis=1))


def constant_projection(space: FiniteMetricSpace, matrix) -> ProjectionField:
    matrix = np.asarray(matrix, dtype=complex)
    return ProjectionField(space, np.broadcast_to(matrix, (len(space),) + matrix.shape).copy())


# --- torus ----------------------------------------------------------------

def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0)


def plateau_angle(s, sigma: float | None = None) -> np.ndarray:
    """Angle profile theta(s) on [0, 1) with cos/sin replacing cos(pi s)/sin(pi s).

    Unsmoothed it is pi s.  With plateau half-width ``sigma`` it is flat at
    0 on [0, sigma], at pi/2 on [1/2 - sigma, 1/2 + sigma] and at pi on
    [1 - sigma, 1), and joins these with a quintic smoothstep.
    """
    s = np.mod(np.asarray(s, dtype=float), 1.0)
    if sigma is None:
        return np.pi * s
    if not 0.0 < sigma < 0.25:
        raise BadParams("plateau half-width must lie in (0, 1/4)")
    w = 0.5 - 2.0 * sigma
    lo = 0.5 * np.pi * _smoothstep((s - sigma) / w)
    hi = 0.5 * np.pi + 0.5 * np.pi * _smoothstep((s - 0.5 - sigma) / w)
    return np.where(s < 0.5, lo, hi)


def torus_frame(k: int, space: FiniteMetricSpace, sigma: float | None = None) -> Frame:
    """Two-element frame eta_1 = J_1 cos(theta), eta_2 = J_2 sin(theta) for twist k.

    J_2 = 1 and J_1 = 1 for s < 1/2, -e(k r) for s >= 1/2 (period 1 in s).
    """
    if space.kind != "torus":
        raise BadParams("torus frame needs a torus space")
    r = space.coords[:, 0]
    s = np.mod(space.coords[:, 1], 1.0)
    theta = plateau_angle(s, sigma)
    j1 = np.where(s < 0.5, 1.0 + 0j, -e(k * r))
    eta1 = j1 * np.cos(theta)
    eta2 = np.sin(theta) + 0j
    return Frame(space, np.stack([eta1, eta2])[:, :, None])


def torus_line_projection(k: int, m1: int, m2: int, sigma: float | None = None,
                          offset: bool = False) -> ProjectionField:
    """Projection p_jk = <eta_j, eta_k> for the line bundle of twist k on an m1 x m2 grid.

    Entries: [[cos^2, conj(H) cos sin], [H cos sin, sin^2]] of theta(s),
    with H = 1 for s < 1/2 and -e(k r) for s >= 1/2.
    """
    if m1 < 4 or m2 < 4:
        raise BadParams("torus grid must be at least 4 x 4")
    space = torus_space(m1, m2, offset)
    return frame_to_projection(torus_frame(k, space, sigma))


def _torus_grid(space: FiniteMetricSpace, tol: float = 1e-12) -> tuple[int, int]:
    if space.kind != "torus":
        raise NotPeriodicGrid("Chern number needs a torus grid")
    c = space.coords
    r_vals = np.unique(np.round(c[:, 0], 12))
    s_vals = np.unique(np.round(c[:, 1], 12))
    m1, m2 = r_vals.size, s_vals.size
    if m1 * m2 != len(space) or m1 < 3 or m2 < 3:
        raise NotPeriodicGrid("points do not form a full product grid")
    rr = c[:, 0].reshape(m1, m2)
    ss = c[:, 1].reshape(m1, m2)
    if np.abs(rr - rr[:, :1]).max() > tol or np.abs(ss - ss[:1, :]).max() > tol:
        raise NotPeriodicGrid("points are not ordered row-major with r slowest")
    for vals, m in ((rr[:, 0], m1), (ss[0, :], m2)):
        steps = np.diff(vals)
        if np.abs(steps - 1.0 / m).max() > tol or abs(vals[0] + 1.0 - vals[-1] - 1.0 / m) > tol:
            raise NotPeriodicGrid("grid spacing is not uniform 1/m")
    return m1, m2


@dataclass(frozen=True)
class ChernResult:
    c_normalized: float
    c_raw: complex
    imag_part: float
    trace_mean: float

    def to_json(self):
        return {
            "c_normalized": self.c_normalized,
            "c_raw": [self.c_raw.real, self.c_raw.imag],
            "imag_part": self.imag_part,
            "trace_mean": self.trace_mean,
        }


def chern_number_torus(field: ProjectionField, imag_tol: float = 1e-6) -> ChernResult:
    """First Chern number from tau(p [d1 p, d2 p]) with periodic central differences.

    ``c_raw`` is the grid mean of tr(p (d1p d2p - d2p d1p)); the normalized
    value is c_raw / (2 pi i) with the orientation fixed by ``CHERN_SIGN``.
    """
    m1, m2 = _torus_grid(field.space)
    n = field.n
    P = np.asarray(field.values).reshape(m1, m2, n, n)
    d1 = (np.roll(P, -1, axis=0) - np.roll(P, 1, axis=0)) * (m1 / 2.0)
    d2 = (np.roll(P, -1, axis=1) - np.roll(P, 1, axis=1)) * (m2 / 2.0)
    curv = P @ (d1 @ d2 - d2 @ d1)
    c_raw = complex(np.trace(curv, axis1=-2, axis2=-1).mean())
    c = CHERN_SIGN * c_raw / (2j * np.pi)
    if abs(c.imag) >= imag_tol:
        raise NotPeriodicGrid(f"Chern integral has imaginary part {c.imag:.3g}; field not smooth enough")
    trace_mean = float(np.trace(P, axis1=-2, axis2=-1).real.mean())
    return ChernResult(float(c.real), c_raw, float(c.imag), trace_mean)


def chern_lower_bound(c_abs: float, trace_mean: float) -> float:
    """sqrt(|c| / (2 tau(p))): the Chern lower bound on L(p)."""
    if trace_mean <= 0 or c_abs < 0:
        raise BadParams("need trace_mean > 0 and c_abs >= 0")
    return math.sqrt(c_abs / (2.0 * trace_mean))


# --- SU(2) and the sphere -------------------------------------------------

@dataclass(frozen=True)
class Su2Element:
    """x = [[z1, -conj(z2)], [z2, conj(z1)]]."""

    z1: complex
    z2: complex

    def __post_init__(self):
        if abs(abs(self.z1) ** 2 + abs(self.z2) ** 2 - 1.0) > SPHERE_TOL:
            raise NotOnSphere("|z1|^2 + |z2|^2 must be 1")

    def matrix(self) -> np.ndarray:
        z1, z2 = self.z1, self.z2
        return np.array([[z1, -np.conj(z2)], [z2, np.conj(z1)]])

    def hopf(self) -> np.ndarray:
        return hopf_image(np.array([[self.z1, self.z2]]))[0]


@dataclass(frozen=True)
class Su2Tangent:
    """X = [[i r, -conj(w)], [w, -i r]] in su(2); norm^2 = tr(X X*)/2 = r^2 + |w|^2."""

    r: float
    w: complex

    def matrix(self) -> np.ndarray:
        return np.array([[1j * self.r, -np.conj(self.w)], [self.w, -1j * self.r]])

    def norm(self) -> float:
        X = self.matrix()
        return math.sqrt(0.5 * np.trace(X @ X.conj().T).real)

    def exp(self, t: float) -> Su2Element:
        """exp(tX) = cos(t|X|) I + sin(t|X|)/|X| X, returned through its first column."""
        nx = self.norm()
        if nx == 0:
            return Su2Element(1.0 + 0j, 0j)
        c, s = math.cos(t * nx), math.sin(t * nx) / nx
        return Su2Element(c + 1j * self.r * s, self.w * s)


def hopf_image(z: np.ndarray) -> np.ndarray:
    z1, z2 = z[:, 0], z[:, 1]
    w = z1 * np.conj(z2)
    return np.stack([2 * w.real, 2 * w.imag, np.abs(z1) ** 2 - np.abs(z2) ** 2], axis=1)


def coset_representatives(vectors) -> np.ndarray:
    """First columns (z1, z2) whose Hopf images are the given unit vectors."""
    v = np.asarray(vectors, dtype=float).reshape(-1, 3)
    if np.abs(np.linalg.norm(v, axis=1) - 1.0).max() > SPHERE_TOL:
        raise NotOnSphere("points must be unit vectors")
    a, b, c = v[:, 0], v[:, 1], v[:, 2]
    north = c >= 0
    z = np.empty((v.shape[0], 2), dtype=complex)
    r1 = np.sqrt((1.0 + c[north]) / 2.0)
    z[north, 0] = r1
    z[north, 1] = (a[north] - 1j * b[north]) / (2.0 * r1)
    r2 = np.sqrt((1.0 - c[~north]) / 2.0)
    z[~north, 1] = r2
    z[~north, 0] = (a[~north] + 1j * b[~north]) / (2.0 * r2)
    return z


def _reps(space: FiniteMetricSpace, reps) -> np.ndarray:
    if reps is None:
        if space.kind != "sphere":
            raise BadParams("monopole fields need a sphere space or explicit representatives")
        reps = coset_representatives(space.coords)
    reps = np.asarray(reps, dtype=complex).reshape(-1, 2)
    if reps.shape[0] != len(space):
        raise BadParams("one representative per point is required")
    if np.abs(np.sum(np.abs(reps) ** 2, axis=1) - 1.0).max() > SPHERE_TOL:
        raise NotOnSphere("representatives must satisfy |z1|^2 + |z2|^2 = 1")
    return reps


def rank2_vector(n: int, z: np.ndarray) -> np.ndarray:
    """u = h (z1^n, z2^n) (conjugated for n < 0), h = (|z1|^2n + |z2|^2n)^(-1/2)."""
    if n == 0:
        raise BadParams("charge must be nonzero")
    m = abs(n)
    u = np.stack([z[:, 0] ** m, z[:, 1] ** m], axis=1)
    u = u / np.linalg.norm(u, axis=1, keepdims=True)
    return u if n > 0 else np.conj(u)


def irrep_vector(n: int, z: np.ndarray) -> np.ndarray:
    """u_{n,k} = sqrt(C(n,k)) (-conj z2)^k conj(z1)^(n-k), k = 0..n (conjugated for n < 0).

    This is U_x v0^n for the lowest weight vector v0 = (0, 1) of the
    symmetric power representation, written in the normalized monomial basis.
    """
    if n == 0:
        raise BadParams("charge must be nonzero")
    m = abs(n)
    a = -np.conj(z[:, 1])
    b = np.conj(z[:, 0])
    coef = np.sqrt([math.comb(m, k) for k in range(m + 1)])
    u = np.stack([coef[k] * a ** k * b ** (m - k) for k in range(m + 1)], axis=1)
    return u if n > 0 else np.conj(u)


def monopole_rank2(n: int, space: FiniteMetricSpace, reps=None) -> ProjectionField:
    """p_jk = z_j^n conj(z_k)^n / (|z1|^2n + |z2|^2n) on a sphere sample."""
    return rank1_field(space, rank2_vector(n, _reps(space, reps)))


def monopole_irrep(n: int, space: FiniteMetricSpace, reps=None) -> ProjectionField:
    """(|n|+1)-dimensional projection U_x P_n U_x^* onto the lowest weight line."""
    return rank1_field(space, irrep_vector(n, _reps(space, reps)))


def tangent_grid(n_alpha: int = 33, n_beta: int = 32) -> list[Su2Tangent]:
    """Unit tangents r = cos(a), w = sin(a) e^{i b}; a = pi/2 is on the grid when n_alpha is odd."""
    out = []
    for a in np.linspace(0.0, np.pi, n_alpha):
        for b in 2 * np.pi * np.arange(n_beta) / n_beta:
            out.append(Su2Tangent(float(np.cos(a)), complex(np.sin(a) * np.exp(1j * b))))
    return out


def induced_lipschitz_exact(n: int, grid=None, h: float = 1e-5) -> float:
    """max over unit tangents X of ||(I - P_n) d/dt u_n(exp(tX))|_{t=0}||.

    The derivative is a central difference of step ``h``; the maximum equals
    sqrt(n) for the lowest weight vector of the (n+1)-dimensional irrep.
    """
    if n < 1:
        raise BadParams("n must be a positive integer")
    grid = tangent_grid() if grid is None else list(grid)
    if not grid:
        raise BadGrid("empty tangent grid")
    v0 = irrep_vector(n, np.array([[1.0 + 0j, 0j]]))[0]
    best = 0.0
    for X in grid:
        if abs(X.norm() - 1.0) > 1e-12:
            raise BadGrid(f"tangent {X} is not a unit vector")
        zp, zm = X.exp(h), X.exp(-h)
        up = irrep_vector(n, np.array([[zp.z1, zp.z2]]))[0]
        um = irrep_vector(n, np.array([[zm.z1, zm.z2]]))[0]
        d = (up - um) / (2 * h)
        w = d - v0 * np.vdot(v0, d)
        best = max(best, float(np.linalg.norm(w)))
    return best
