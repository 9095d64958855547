"""Dense self-adjoint matrix kernel.

Matrices are plain complex numpy arrays.  Spectral work goes through
LAPACK (``numpy.linalg.eigh``); :func:`jacobi_eigh` is a self-contained
cyclic Jacobi solver kept as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, NonFinite, NotHermitian, NotUnit, SpectralGapViolation

HERMITIAN_TOL = 1e-12
UNIT_TOL = 1e-10
JACOBI_TOL = 1e-13


def as_hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate and return ``a`` as a complex self-adjoint array (batched over leading axes)."""
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise NotHermitian(f"expected square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix has non-finite entries")
    err = np.abs(a - np.conj(np.swapaxes(a, -1, -2)))
    if err.size and err.max() > tol:
        raise NotHermitian(f"self-adjointness error {err.max():.3g} exceeds {tol:g}")
    return a


def hermitian_norms(a: np.ndarray) -> np.ndarray:
    """Operator norms of a batch of self-adjoint matrices (shape ``(..., n, n)``)."""
    n = a.shape[-1]
    if n == 1:
        return np.abs(a[..., 0, 0].real)
    if n == 2:
        return _norm2x2(a[..., 0, 0].real, a[..., 1, 1].real, a[..., 0, 1])
    ev = np.linalg.eigvalsh(a)
    return np.maximum(np.abs(ev[..., 0]), np.abs(ev[..., -1]))


def _norm2x2(d0, d1, off):
    """Operator norm of [[d0, off], [conj(off), d1]] with real d0, d1."""
    half = 0.5 * (d0 - d1)
    return 0.5 * np.abs(d0 + d1) + np.sqrt(half * half + np.abs(off) ** 2)


def op_norm(a) -> float:
    """Largest singular value."""
    a = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix has non-finite entries")
    if a.size == 0:
        return 0.0
    if a.ndim == 1:
        return float(np.linalg.norm(a))
    if a.shape[0] == a.shape[1] and np.allclose(a, a.conj().T, atol=0, rtol=0):
        return float(hermitian_norms(a))
    return float(np.linalg.norm(a, 2))


def spectrum(a) -> np.ndarray:
    """Eigenvalues in ascending order."""
    a = as_hermitian(a)
    try:
        return np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(str(exc)) from exc


def eigh(a) -> tuple[np.ndarray, np.ndarray]:
    a = as_hermitian(a)
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise ConvergenceFailure(str(exc)) from exc


def jacobi_eigh(a, tol: float = JACOBI_TOL, max_sweeps: int = 100
                ) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a complex self-adjoint matrix.

    Sweeps visit (p, q) pairs in row-major order.  Each rotation first
    removes the phase of a[p, q] and then applies the real symmetric Jacobi
    rotation.  Stops when the off-diagonal Frobenius mass falls below
    ``tol * max(1, ||a||_F)``.
    """
    a = as_hermitian(a).copy()
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(a)))
    offmask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a[offmask]))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                zeta = (aqq - app) / (2.0 * mag)
                if zeta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # U = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                u = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                cols = [p, q]
                a[:, cols] = a[:, cols] @ u
                a[cols, :] = u.conj().T @ a[cols, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, cols] = v[:, cols] @ u
    else:
        raise ConvergenceFailure(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    q, r = np.linalg.qr(v)
    # keep QR from flipping eigenvector phases
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return w, q


@dataclass(frozen=True)
class SpectralCutResult:
    projection: np.ndarray
    gap: float
    eigenvalues: np.ndarray


def spectral_cut(a, cut: float = 0.5, gap_tol: float = 1e-6) -> SpectralCutResult:
    """Projection onto the eigenvectors of ``a`` with eigenvalue above ``cut``."""
    w, v = eigh(a)
    gap = float(np.min(np.abs(w - cut)))
    if gap < gap_tol:
        raise SpectralGapViolation(
            f"eigenvalue within {gap:.3g} of cut level {cut} (gap_tol {gap_tol:g})"
        )
    hi = v[:, w > cut]
    proj = hi @ hi.conj().T
    proj = 0.5 * (proj + proj.conj().T)
    return SpectralCutResult(proj, gap, w)


def spectral_cut_batch(a: np.ndarray, cut: float = 0.5, gap_tol: float = 1e-6
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise spectral cut of a stack ``(N, n, n)``; returns projections and per-point gaps.

    Raises :class:`SpectralGapViolation` naming the first offending index.
    """
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise ConvergenceFailure(str(exc)) from exc
    gaps = np.min(np.abs(w - cut), axis=-1)
    bad = np.flatnonzero(gaps < gap_tol)
    if bad.size:
        i = int(bad[0])
        exc = SpectralGapViolation(
            f"eigenvalue within {gaps[i]:.3g} of cut level {cut} at index {i}"
        )
        exc.index = i
        raise exc
    vh = v * (w > cut)[..., None, :]
    proj = vh @ np.conj(np.swapaxes(v, -1, -2))
    proj = 0.5 * (proj + np.conj(np.swapaxes(proj, -1, -2)))
    return proj, gaps


def rank1(v, tol: float = UNIT_TOL) -> np.ndarray:
    """Orthogonal projection v v* onto the span of a unit vector."""
    v = np.asarray(v, dtype=complex).ravel()
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > tol:
        raise NotUnit(f"vector norm {norm:.15g} is not 1")
    return np.outer(v, v.conj())


def rank1_batch(u: np.ndarray, tol: float = UNIT_TOL) -> np.ndarray:
    """Stack of v v* for unit vectors ``u`` of shape ``(N, m)``."""
    u = np.asarray(u, dtype=complex)
    norms = np.linalg.norm(u, axis=-1)
    err = np.abs(norms - 1.0)
    if err.size and err.max() > tol:
        i = int(np.argmax(err))
        raise NotUnit(f"vector {i} has norm {norms[i]:.15g}")
    return u[..., :, None] * np.conj(u[..., None, :])


def defect(a) -> float:
    """||a^2 - a||: distance from being idempotent."""
    a = np.asarray(a, dtype=complex)
    return op_norm(a @ a - a)


def defects(a: np.ndarray) -> np.ndarray:
    """Batched :func:`defect` for self-adjoint stacks."""
    d = a @ a - a
    d = 0.5 * (d + np.conj(np.swapaxes(d, -1, -2)))
    return hermitian_norms(d)
