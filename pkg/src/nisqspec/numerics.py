"""Dense complex linear algebra and random-matrix sampling.

Matrices are plain ``numpy`` complex128 arrays. Vectorization is column
stacking throughout: ``vec(A X B) = (B.T kron A) vec(X)``, so a channel
``X -> K X K^dag`` has superoperator ``conj(K) kron K``.

Randomness never touches global state. Every sampler takes ``seed``, which is
either an integer or a ``numpy.random.Generator``; :func:`derive_rng` builds
independent child streams from ``(seed, key, ...)``.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NoConvergence, RankDeficient, ShapeMismatch

RANK_TOL = 1e-12


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Child stream for ``(seed, *keys)``; identical inputs give identical streams."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def ginibre(m: int, n: int, seed) -> np.ndarray:
    """m x n matrix of i.i.d. complex Gaussians with standard normal real and imaginary parts."""
    if m < 1 or n < 1:
        raise ShapeMismatch(f"ginibre dimensions must be positive, got {m}x{n}")
    rng = as_rng(seed)
    return rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))


def qr_positive(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with ``R`` upper triangular and real positive diagonal."""
    g = np.asarray(g, dtype=np.complex128)
    if g.ndim != 2 or g.shape[0] < g.shape[1]:
        raise ShapeMismatch(f"qr_positive needs a tall matrix, got shape {g.shape}")
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r)
    mag = np.abs(diag)
    scale = np.linalg.norm(g)
    if scale == 0.0 or np.any(mag < RANK_TOL * scale):
        raise RankDeficient("QR input is numerically rank deficient")
    phase = diag / mag
    q = q * phase[None, :]
    r = np.conj(phase)[:, None] * r
    # exact zeros below the diagonal, exact real diagonal
    r = np.triu(r)
    r[np.diag_indices_from(r)] = mag
    return q, r


def haar_unitary(d: int, seed) -> np.ndarray:
    q, _ = qr_positive(ginibre(d, d, seed))
    return q


def eig_general(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of a general square matrix and the residual of each eigenpair.

    Returns ``(values, residuals)`` with ``residuals[k] = |M v - lambda v| / |v|``.
    """
    m = np.asarray(m, dtype=np.complex128)
    _require_square(m)
    try:
        vals, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    res = np.linalg.norm(m @ vecs - vecs * vals[None, :], axis=0) / np.linalg.norm(vecs, axis=0)
    return vals, res


def eigvals(m: np.ndarray) -> np.ndarray:
    """Eigenvalues only (real-arithmetic LAPACK path when ``m`` is real)."""
    m = np.asarray(m)
    _require_square(m)
    try:
        return np.linalg.eigvals(m).astype(np.complex128)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if np.ndim(a) != 2 or np.ndim(b) != 2:
        raise ShapeMismatch("kron expects two matrices")
    return np.kron(a, b)


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def trace(a: np.ndarray) -> complex:
    _require_square(a)
    return complex(np.trace(a))


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


def partial_trace_B(m: np.ndarray, d: int) -> np.ndarray:
    """Trace out the second tensor factor of a ``d^2 x d^2`` matrix."""
    m = _require_bipartite(m, d)
    return np.trace(m.reshape(d, d, d, d), axis1=1, axis2=3)


def reshuffle(m: np.ndarray, d: int) -> np.ndarray:
    """Choi matrix -> superoperator.

    The Choi matrix of ``X -> sum K X K^dag`` is taken as ``sum conj(vec K) vec(K)^T``,
    which is positive semidefinite and satisfies ``partial_trace_B(J) = sum K^dag K``.
    This index permutation maps it to ``sum conj(K) kron K``; its inverse is
    :func:`unreshuffle`. (With these two conventions fixed the permutation is a
    4-cycle on tensor legs, so it is not its own inverse.)
    """
    m = _require_bipartite(m, d)
    return m.reshape(d, d, d, d).transpose(1, 3, 0, 2).reshape(d * d, d * d)


def unreshuffle(m: np.ndarray, d: int) -> np.ndarray:
    """Superoperator -> Choi matrix; inverse of :func:`reshuffle`."""
    m = _require_bipartite(m, d)
    return m.reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d * d, d * d)


def realign(m: np.ndarray, d: int) -> np.ndarray:
    """Involutive realignment ``M[(a,b),(c,e)] -> M[(a,c),(b,e)]``."""
    m = _require_bipartite(m, d)
    return m.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def matrix_exp(m: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    _require_square(np.asarray(m))
    out = scipy.linalg.expm(np.asarray(m))
    if not np.all(np.isfinite(out)):
        raise NoConvergence("matrix exponential overflowed")
    return out


def hermitian_basis_transform(s: np.ndarray, d: int) -> np.ndarray:
    """Express a superoperator in an orthonormal basis of Hermitian matrices.

    For a Hermiticity-preserving map the result is real (up to rounding), and
    it is unitarily similar to ``s``. Eigenvalues can then come from real
    LAPACK, which is faster and returns exact conjugate pairs.
    """
    s = _require_bipartite(s, d)
    iu, ju = np.triu_indices(d, 1)
    diag = np.arange(d) * (d + 1)
    ij = iu + ju * d  # vec index of E_ij (row i, column j)
    ji = ju + iu * d
    h = 1.0 / np.sqrt(2.0)
    # columns: S B
    cols = np.concatenate(
        [s[:, diag], (s[:, ij] + s[:, ji]) * h, (s[:, ij] - s[:, ji]) * (1j * h)], axis=1
    )
    rows = np.concatenate(
        [cols[diag, :], (cols[ij, :] + cols[ji, :]) * h, (cols[ij, :] - cols[ji, :]) * (-1j * h)],
        axis=0,
    )
    return rows


def superop_eigvals(s: np.ndarray, d: int, imag_tol: float = 1e-10) -> np.ndarray:
    """Eigenvalues of a superoperator, using the real Hermitian-basis form when it is real."""
    t = hermitian_basis_transform(s, d)
    scale = max(1.0, float(np.abs(t).max()))
    if np.abs(t.imag).max() <= imag_tol * scale:
        return eigvals(np.ascontiguousarray(t.real))
    return eigvals(s)


def sqrtm_psd(a: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian PSD matrix (negative rounding eigenvalues clipped)."""
    w, v = np.linalg.eigh(0.5 * (a + dagger(a)))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ dagger(v)


def _require_square(m):
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {m.shape}")


def _require_bipartite(m, d):
    m = np.asarray(m)
    if m.shape != (d * d, d * d):
        raise ShapeMismatch(f"expected a {d * d}x{d * d} matrix, got shape {m.shape}")
    return m
