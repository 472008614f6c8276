"""CPTP maps in Kraus form and their QR-based real parameterization.

A rank-``r`` map on ``d``-dimensional states is stored as an ``(r, d, d)``
array of Kraus operators. The parameter vector ``theta`` (length ``2 r d^2``)
holds the real parts of a complex ``rd x d`` matrix ``G`` (row-major)
followed by its imaginary parts. The Kraus operators are the ``d x d`` blocks
of the isometry ``Q`` in ``G = QR``, so every ``theta`` gives a
trace-preserving map.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .errors import NoConvergence, NotTracePreserving, NotUnitary, ShapeMismatch

TP_ATOL = 1e-10


@dataclass(frozen=True)
class KrausMap:
    kraus: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        k = np.asarray(self.kraus, dtype=np.complex128)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3 or k.shape[1] != k.shape[2]:
            raise ShapeMismatch(f"Kraus operators must have shape (r, d, d), got {k.shape}")
        k.setflags(write=False)
        object.__setattr__(self, "kraus", k)
        if self.check:
            err = self.tp_error()
            if err >= TP_ATOL:
                raise NotTracePreserving(f"sum K^dag K deviates from identity by {err:.3e}")

    @property
    def d(self) -> int:
        return self.kraus.shape[1]

    @property
    def r(self) -> int:
        return self.kraus.shape[0]

    def tp_error(self) -> float:
        m = np.einsum("kji,kjl->il", self.kraus.conj(), self.kraus)
        return float(np.abs(m - np.eye(self.d)).max())


@dataclass(frozen=True)
class ParamVector:
    theta: np.ndarray
    d: int
    r: int

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=np.float64).ravel()
        if t.size != theta_size(self.d, self.r):
            raise ShapeMismatch(
                f"theta must have length 2*r*d^2 = {theta_size(self.d, self.r)}, got {t.size}"
            )
        object.__setattr__(self, "theta", t)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by modulus, then real part, then imaginary part (all descending)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128).ravel()
        object.__setattr__(self, "values", sort_eigenvalues(v))

    def __len__(self):
        return self.values.size

    @property
    def bulk(self) -> np.ndarray:
        """Everything except the leading eigenvalue."""
        return self.values[1:]


def sort_eigenvalues(v: np.ndarray) -> np.ndarray:
    # round the keys so conjugate pairs with rounding noise in |z| stay adjacent
    mod = np.round(np.abs(v), 12)
    re = np.round(v.real, 12)
    order = np.lexsort((-v.imag, -re, -mod))
    return v[order]


def theta_size(d: int, r: int) -> int:
    return 2 * r * d * d


def theta_to_g(theta: np.ndarray, d: int, r: int) -> np.ndarray:
    half = r * d * d
    theta = np.asarray(theta, dtype=np.float64)
    return (theta[:half] + 1j * theta[half:]).reshape(r * d, d)


def g_to_theta(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=np.complex128)
    return np.concatenate([g.real.ravel(), g.imag.ravel()])


def params_to_kraus(p: ParamVector) -> KrausMap:
    q, _ = nx.qr_positive(theta_to_g(p.theta, p.d, p.r))
    return KrausMap(q.reshape(p.r, p.d, p.d))


def kraus_to_params(m: KrausMap) -> ParamVector:
    """A parameter vector reproducing ``m`` exactly (``G`` = stacked Kraus operators)."""
    return ParamVector(g_to_theta(m.kraus.reshape(m.r * m.d, m.d)), m.d, m.r)


def identity_map(d: int) -> KrausMap:
    return KrausMap(np.eye(d)[None])


def unitary_channel(u: np.ndarray) -> KrausMap:
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ShapeMismatch(f"unitary must be square, got {u.shape}")
    if np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() >= 1e-10:
        raise NotUnitary("U^dag U deviates from identity by more than 1e-10")
    return KrausMap(u[None])


def depolarizing(p: float, n: int = 1) -> KrausMap:
    """Single-qubit depolarizing channel ``rho -> (1-p) rho + p I/2`` on each of ``n`` qubits."""
    paulis = [
        np.eye(2),
        np.array([[0, 1], [1, 0]]),
        np.array([[0, -1j], [1j, 0]]),
        np.array([[1, 0], [0, -1]]),
    ]
    weights = [np.sqrt(1 - 3 * p / 4)] + [np.sqrt(p / 4)] * 3
    single = np.array([w * s for w, s in zip(weights, paulis)], dtype=np.complex128)
    out = single
    for _ in range(n - 1):
        out = np.array([np.kron(a, b) for a in out for b in single])
    return KrausMap(out)


def apply(m: KrausMap, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (m.d, m.d):
        raise ShapeMismatch(f"state must be {m.d}x{m.d}, got {rho.shape}")
    return np.einsum("kij,jl,kml->im", m.kraus, rho, m.kraus.conj())


def to_superop(m: KrausMap) -> np.ndarray:
    """``sum conj(K) kron K`` (column-stacking convention)."""
    d = m.d
    k = m.kraus
    return np.einsum("kac,kbe->abce", k.conj(), k).reshape(d * d, d * d)


def to_choi(m: KrausMap) -> np.ndarray:
    v = m.kraus.transpose(0, 2, 1).reshape(m.r, -1)  # rows are vec(K), column-stacked
    return v.conj().T @ v


def from_choi(j: np.ndarray, d: int, tol: float = 1e-12, neg_tol: float | None = None) -> KrausMap:
    """Kraus form from a Choi matrix (eigenvectors with eigenvalue above ``tol * max``).

    Negative eigenvalues above ``-neg_tol`` are treated as rounding and dropped.
    """
    from .errors import NotCP

    j = 0.5 * (j + j.conj().T)
    w, v = np.linalg.eigh(j)
    top = max(float(w.max()), 0.0)
    if neg_tol is not None and w.min() < -neg_tol:
        raise NotCP(f"Choi matrix has eigenvalue {w.min():.3e}")
    keep = w > tol * max(top, 1.0)
    vecs = np.sqrt(w[keep])[None, :] * v[:, keep].conj()
    kraus = vecs.T.reshape(-1, d, d).transpose(0, 2, 1)
    return KrausMap(kraus[::-1].copy(), check=False)


def compose(first: KrausMap, second: KrausMap) -> KrausMap:
    """Map ``rho -> second(first(rho))``; rank capped at ``d^2`` via the Choi form."""
    if first.d != second.d:
        raise ShapeMismatch("cannot compose maps of different dimension")
    d = first.d
    prod = np.einsum("jab,ibc->jiac", second.kraus, first.kraus).reshape(-1, d, d)
    out = KrausMap(prod, check=False)
    if out.r > d * d:
        out = from_choi(to_choi(out), d)
    return KrausMap(out.kraus, check=True) if out.tp_error() < TP_ATOL else _renormalize(out)


def _renormalize(m: KrausMap) -> KrausMap:
    """Undo rounding drift in ``sum K^dag K`` by right-multiplying with its inverse square root."""
    s = np.einsum("kji,kjl->il", m.kraus.conj(), m.kraus)
    w, v = np.linalg.eigh(0.5 * (s + s.conj().T))
    inv_sqrt = (v / np.sqrt(w)[None, :]) @ v.conj().T
    return KrausMap(m.kraus @ inv_sqrt)


def superop_spectrum(s: np.ndarray, d: int, check: bool = True) -> Spectrum:
    spec = Spectrum(nx.superop_eigvals(s, d))
    if check:
        check_spectrum(spec)
    return spec


def spectrum(m: KrausMap, check: bool = True) -> Spectrum:
    return superop_spectrum(to_superop(m), m.d, check=check)


def check_spectrum(spec: Spectrum, one_tol: float = 1e-8, pair_tol: float = 1e-8,
                   modulus_tol: float = 1e-6) -> None:
    """Raise if the spectrum of a CPTP map violates its structural invariants."""
    v = spec.values
    if np.abs(v).max() > 1.0 + modulus_tol:
        raise NoConvergence(f"eigenvalue modulus {np.abs(v).max():.6f} exceeds 1")
    if np.abs(v - 1.0).min() >= one_tol:
        raise NoConvergence("spectrum does not contain 1")
    if conjugation_mismatch(v) >= pair_tol:
        raise NoConvergence("spectrum is not closed under complex conjugation")


def conjugation_mismatch(v: np.ndarray) -> float:
    """Largest distance in an optimal pairing between ``v`` and ``conj(v)``.

    Matching is done on values sorted by (rounded real part, |imag|), which is
    exact for spectra that come in exact conjugate pairs and a tight upper
    bound otherwise.
    """
    a = np.sort_complex(np.round(v, 14))
    b = np.sort_complex(np.round(np.conj(v), 14))
    direct = np.abs(a - b).max()
    if direct < 1e-8:
        return float(direct)
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(v[:, None] - np.conj(v)[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())
