"""Ground-truth map generators: random Lindbladian semigroups and diluted unitaries."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics as nx
from .channels import KrausMap, from_choi, _renormalize, TP_ATOL
from .errors import NotCP

# parameter sets of the three-qubit Lindblad benchmark: (alpha, beta, rank)
BENCHMARK_SETS = ((1.0, 0.1, 1), (1e4, 1e-3, 16), (1e2, 1e-3, 16), (1.0, 1e-2, 8))


@dataclass(frozen=True)
class LindbladParams:
    d: int
    r: int
    alpha: float
    beta: float
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.r <= self.d ** 2:
            raise ValueError("rank must lie in [1, d^2]")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")


@dataclass(frozen=True)
class DUParams:
    d: int
    p: float
    r: int

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if not 1 <= self.r <= self.d ** 2:
            raise ValueError("rank must lie in [1, d^2]")


def gue(d: int, seed) -> np.ndarray:
    g = nx.ginibre(d, d, seed)
    return 0.5 * (g + g.conj().T)


def lindbladian_from_parts(h: np.ndarray, phi: np.ndarray, alpha: float) -> np.ndarray:
    """Generator from a Hamiltonian and a Choi-form dissipator ``phi`` (both column-stacked)."""
    d = h.shape[0]
    eye = np.eye(d)
    m = nx.partial_trace_B(phi, d)
    ham = -1j * alpha * (np.kron(eye, h) - np.kron(h.T, eye))
    return ham + nx.reshuffle(phi, d) - 0.5 * (np.kron(m.T, eye) + np.kron(eye, m))


def random_lindbladian(params: LindbladParams) -> np.ndarray:
    d = params.d
    rng = nx.as_rng(params.seed)
    h = gue(d, rng)
    g_phi = nx.ginibre(d * d, params.r, rng)
    return lindbladian_from_parts(h, g_phi @ g_phi.conj().T, params.alpha)


def trace_annihilation_error(lind: np.ndarray) -> float:
    d = int(round(np.sqrt(lind.shape[0])))
    return float(np.abs(nx.vec(np.eye(d)).conj() @ lind).max())


def lindblad_map(lind: np.ndarray, beta: float, clip_tol: float = 1e-9,
                 cp_tol: float = 1e-6) -> tuple[np.ndarray, KrausMap]:
    """``exp(beta L)`` as a superoperator and in Kraus form."""
    d = int(round(np.sqrt(lind.shape[0])))
    s = nx.matrix_exp(beta * lind)
    choi = nx.unreshuffle(s, d)
    choi = 0.5 * (choi + choi.conj().T)
    w = np.linalg.eigvalsh(choi)
    if w.min() < -cp_tol:
        raise NotCP(f"Choi matrix of exp(beta L) has eigenvalue {w.min():.3e}")
    m = from_choi(choi, d, tol=clip_tol)
    if m.tp_error() >= TP_ATOL:
        m = _renormalize(m)
    return s, KrausMap(m.kraus)


def du_radii(p: float, r: int) -> tuple[Optional[float], float]:
    """Inner and outer radii of the asymptotic support; inner is ``None`` for a disc."""
    if not 0.0 <= p <= 1.0 or r < 1:
        raise ValueError("need 0 <= p <= 1 and r >= 1")
    a, b = (1 - p) ** 2, p * p / r
    return (np.sqrt(a - b) if a >= b else None), float(np.sqrt(a + b))


def random_kraus(d: int, r: int, seed) -> np.ndarray:
    """Rank-``r`` Kraus set from the QR isometry of an ``rd x d`` Ginibre matrix."""
    q, _ = nx.qr_positive(nx.ginibre(r * d, d, seed))
    return q.reshape(r, d, d)


def _du_draw(d: int, r: int, seed):
    rng = nx.as_rng(seed)
    return nx.haar_unitary(d, rng), random_kraus(d, r, rng)


def sample_diluted_unitary(params: DUParams, seed) -> KrausMap:
    u, k = _du_draw(params.d, params.r, seed)
    kraus = np.concatenate([np.sqrt(1 - params.p) * u[None], np.sqrt(params.p) * k])
    return KrausMap(kraus)


def du_superop_parts(d: int, r: int, seed, hermitian_basis: bool = True):
    """Unitary and dissipative superoperators of one DU draw.

    ``(1 - p) * a + p * b`` is the superoperator of ``sample_diluted_unitary``
    with the same ``seed``, for every ``p``. In the Hermitian basis both parts
    are real.
    """
    u, k = _du_draw(d, r, seed)
    a = np.kron(u.conj(), u)
    b = np.einsum("kac,kbe->abce", k.conj(), k).reshape(d * d, d * d)
    if hermitian_basis:
        a = nx.hermitian_basis_transform(a, d).real
        b = nx.hermitian_basis_transform(b, d).real
    return a, b
