"""State-preparation and measurement (SPAM) error models.

A :class:`SpamModel` holds the prepared density operator ``rho0`` and a
column-stochastic corruption matrix ``C`` (``C[j, l]`` is the probability of
reading outcome ``j`` when the register is in basis state ``l``). It may also
carry a full POVM; when present the POVM takes precedence when probabilities
are computed and ``C`` is its diagonal part.

The real SPAM parameter vector ``omega`` has length ``3 d^2``:
``[Re A_rho (row-major), Im A_rho, A_C]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import numerics as nx
from .errors import ShapeMismatch, SingularD, ZeroColumn, ZeroMatrix

ATOL = 1e-10


@dataclass(frozen=True)
class PovmSet:
    elements: np.ndarray  # (d, d, d): elements[j] is E_j

    def __post_init__(self):
        e = np.asarray(self.elements, dtype=np.complex128)
        if e.ndim != 3 or e.shape[1] != e.shape[2] or e.shape[0] != e.shape[1]:
            raise ShapeMismatch(f"POVM must have shape (d, d, d), got {e.shape}")
        object.__setattr__(self, "elements", e)

    @property
    def d(self) -> int:
        return self.elements.shape[0]

    def completeness_error(self) -> float:
        return float(np.abs(self.elements.sum(axis=0) - np.eye(self.d)).max())

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.elements + nx.dagger(self.elements))
        return float(np.linalg.eigvalsh(herm).min())


@dataclass(frozen=True)
class SpamModel:
    rho0: np.ndarray
    corruption: np.ndarray
    povm: Optional[PovmSet] = None

    def __post_init__(self):
        rho = np.asarray(self.rho0, dtype=np.complex128)
        c = np.asarray(self.corruption, dtype=np.float64)
        d = rho.shape[0]
        if rho.shape != (d, d) or c.shape != (d, d):
            raise ShapeMismatch("rho0 and corruption must both be d x d")
        if self.povm is not None and self.povm.d != d:
            raise ShapeMismatch("POVM dimension does not match rho0")
        object.__setattr__(self, "rho0", rho)
        object.__setattr__(self, "corruption", c)

    @property
    def d(self) -> int:
        return self.rho0.shape[0]

    def effects(self) -> np.ndarray:
        """Measurement operators ``E_j`` as a (d, d, d) array."""
        if self.povm is not None:
            return self.povm.elements
        return corruption_to_povm(self.corruption).elements


def ideal_spam(d: int) -> SpamModel:
    rho = np.zeros((d, d), dtype=np.complex128)
    rho[0, 0] = 1.0
    return SpamModel(rho, np.eye(d))


def omega_size(d: int) -> int:
    return 3 * d * d


def split_omega(omega: np.ndarray, d: int):
    omega = np.asarray(omega, dtype=np.float64)
    if omega.size != omega_size(d):
        raise ShapeMismatch(f"SPAM vector must have length 3 d^2 = {omega_size(d)}")
    dd = d * d
    return (
        omega[:dd].reshape(d, d),
        omega[dd:2 * dd].reshape(d, d),
        omega[2 * dd:].reshape(d, d),
    )


def params_to_state(a_rho_re: np.ndarray, a_rho_im: np.ndarray) -> np.ndarray:
    a = np.asarray(a_rho_re) + 1j * np.asarray(a_rho_im)
    aa = a @ a.conj().T
    tr = np.trace(aa).real
    if tr <= 0.0:
        raise ZeroMatrix("A_rho must be nonzero")
    return aa / tr


def params_to_corruption(a_c: np.ndarray) -> np.ndarray:
    a = np.abs(np.asarray(a_c, dtype=np.float64))
    col = a.sum(axis=0)
    if np.any(col == 0.0):
        raise ZeroColumn("A_C has an all-zero column")
    return a / col[None, :]


def omega_to_spam(omega: np.ndarray, d: int) -> SpamModel:
    re, im, ac = split_omega(omega, d)
    return SpamModel(params_to_state(re, im), params_to_corruption(ac))


def povm_from_params(g: np.ndarray) -> PovmSet:
    """POVM ``E_j = D^{-1/2} G_j G_j^dag D^{-1/2}`` with ``D = sum_j G_j G_j^dag``."""
    g = np.asarray(g, dtype=np.complex128)
    h = g @ nx.dagger(g)
    dmat = h.sum(axis=0)
    w, v = np.linalg.eigh(dmat)
    if w.min() <= 1e-14 * max(w.max(), 1.0):
        raise SingularD("normalizing matrix D is singular")
    inv_sqrt = (v / np.sqrt(w)[None, :]) @ v.conj().T
    return PovmSet(inv_sqrt[None] @ h @ inv_sqrt[None])


def povm_from_ginibre(d: int, seed) -> PovmSet:
    if d < 2:
        raise ShapeMismatch("POVM dimension must be at least 2")
    rng = nx.as_rng(seed)
    g = np.stack([nx.ginibre(d, d, rng) for _ in range(d)])
    return povm_from_params(g)


def povm_to_corruption(povm: PovmSet) -> np.ndarray:
    """``C[i, k] = (E_i)_{kk}``."""
    return np.real(np.diagonal(povm.elements, axis1=1, axis2=2)).copy()


def corruption_to_povm(c: np.ndarray) -> PovmSet:
    d = c.shape[0]
    e = np.zeros((d, d, d), dtype=np.complex128)
    idx = np.arange(d)
    e[:, idx, idx] = c
    return PovmSet(e)


def projector_povm(d: int) -> PovmSet:
    return corruption_to_povm(np.eye(d))


def povm_fidelity(truth: PovmSet, candidate: PovmSet) -> float:
    """``(1/d) sum_j Tr sqrt(sqrt(E_j^true) E_j sqrt(E_j^true))``."""
    if truth.d != candidate.d:
        raise ShapeMismatch("POVMs act on different dimensions")
    total = 0.0
    for et, ec in zip(truth.elements, candidate.elements):
        st = nx.sqrtm_psd(et)
        inner = st @ ec @ st
        w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
        total += float(np.sqrt(np.clip(w, 0.0, None)).sum())
    return total / truth.d


def state_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Root fidelity ``Tr sqrt(sqrt(rho) sigma sqrt(rho))``, the per-element form used by :func:`povm_fidelity`."""
    sr = nx.sqrtm_psd(rho)
    inner = sr @ sigma @ sr
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sqrt(np.clip(w, 0.0, None)).sum())


def random_state(d: int, seed) -> np.ndarray:
    g = nx.ginibre(d, d, seed)
    gg = g @ g.conj().T
    return gg / np.trace(gg).real


def synthetic_spam(d: int, c1: float, c2: float, seed) -> SpamModel:
    """Convex mixture of ideal SPAM with a random state and a random POVM."""
    if not (0.0 <= c1 <= 1.0 and 0.0 <= c2 <= 1.0):
        raise ValueError("c1 and c2 must lie in [0, 1]")
    rng = nx.as_rng(seed)
    d_rho = random_state(d, rng)
    d_povm = povm_from_ginibre(d, rng)
    rho = (1 - c1) * d_rho
    rho[0, 0] += c1
    elements = c2 * projector_povm(d).elements + (1 - c2) * d_povm.elements
    povm = PovmSet(elements)
    return SpamModel(rho, povm_to_corruption(povm), povm)


def permute_spam(model: SpamModel, perm) -> SpamModel:
    """Relabel the computational basis: state ``|l>`` becomes ``|perm[l]>``.

    ``rho0 -> P rho0 P^T`` and ``C -> C P^T`` (observed outcome labels stay fixed),
    which leaves the identity-channel, z-basis probabilities of every
    computational-basis preparation invariant up to the same relabeling.
    """
    d = model.d
    p = np.zeros((d, d))
    p[np.asarray(perm), np.arange(d)] = 1.0
    rho = p @ model.rho0 @ p.T
    c = model.corruption @ p.T
    povm = None
    if model.povm is not None:
        povm = PovmSet(p[None] @ model.povm.elements @ p.T[None])
    return SpamModel(rho, c, povm)


def _spam_cost(model: SpamModel) -> float:
    d = model.d
    ideal = np.zeros((d, d))
    ideal[0, 0] = 1.0
    return float(np.linalg.norm(model.rho0 - ideal) + np.linalg.norm(model.corruption - np.eye(d)))


EXHAUSTIVE_MAX_D = 8


def canonicalize_spam(model: SpamModel) -> SpamModel:
    """Pick the basis relabeling closest to ideal SPAM.

    Exhaustive over all ``d!`` relabelings for ``d <= 8``; beyond that the
    squared-norm version of the cost is linear in the permutation matrix and
    is minimized exactly with the Hungarian algorithm.
    """
    d = model.d
    if d <= EXHAUSTIVE_MAX_D:
        best, best_cost = model, _spam_cost(model)
        for perm in itertools.permutations(range(d)):
            cand = permute_spam(model, perm)
            cost = _spam_cost(cand)
            if cost < best_cost - 1e-15:
                best, best_cost = cand, cost
        return best
    # gain[l, k]: moving old state k to label l puts C[l, k] on the diagonal and,
    # for l = 0, rho[k, k] on the ideal-state entry
    gain = model.corruption.copy()
    gain[0, :] += np.real(np.diagonal(model.rho0))
    rows, cols = linear_sum_assignment(-gain)
    perm = np.empty(d, dtype=int)
    perm[cols] = rows
    return permute_spam(model, perm)
