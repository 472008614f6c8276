"""Layered hardware-efficient circuit and its expressibility.

Each block applies ``R_y`` on every qubit, then ``R_z`` on every qubit, then a
ladder of CNOTs (control ``q`` -> target ``q+1``, ascending). Qubit 0 is the
most significant bit of a basis-state index. ``rot_order`` and ``ladder``
switch the two conventions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .kernels import circuit_zero_fidelities

ROT_ORDERS = {"yz": 0, "zy": 1}
LADDERS = {"up": 0, "down": 1}
N_BINS = 75


@dataclass(frozen=True)
class CircuitSpec:
    n: int
    depth: int
    angles: np.ndarray  # (depth, 2n): R_y angles then R_z angles per block
    rot_order: str = "yz"
    ladder: str = "up"

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=np.float64)
        if a.shape != (self.depth, 2 * self.n):
            raise ValueError(f"expected {self.depth}x{2 * self.n} angles, got {a.shape}")
        if self.rot_order not in ROT_ORDERS or self.ladder not in LADDERS:
            raise ValueError("unknown rot_order or ladder")
        object.__setattr__(self, "angles", a)


def sample_angles(n: int, depth: int, seed, **conventions) -> CircuitSpec:
    if n < 1 or depth < 1:
        raise ValueError("n and depth must be positive")
    rng = nx.as_rng(seed)
    return CircuitSpec(n, depth, rng.uniform(0.0, 2 * np.pi, size=(depth, 2 * n)), **conventions)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def cnot(n: int, control: int, target: int) -> np.ndarray:
    d = 2 ** n
    cm, tm = 1 << (n - 1 - control), 1 << (n - 1 - target)
    perm = np.array([k ^ tm if k & cm else k for k in range(d)])
    u = np.zeros((d, d))
    u[perm, np.arange(d)] = 1.0
    return u


def _layer(gates) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for g in gates:
        out = np.kron(out, g)
    return out


def ladder_pairs(n: int, ladder: str = "up"):
    if ladder == "up":
        return [(i, i + 1) for i in range(n - 1)]
    return [(n - 1 - i, n - 2 - i) for i in range(n - 1)]


def build_unitary(spec: CircuitSpec) -> np.ndarray:
    n = spec.n
    u = np.eye(2 ** n, dtype=np.complex128)
    cx = np.eye(2 ** n)
    for c, t in ladder_pairs(n, spec.ladder):
        cx = cnot(n, c, t) @ cx
    for block in spec.angles:
        ylayer = _layer([ry(a) for a in block[:n]])
        zlayer = _layer([rz(a) for a in block[n:]])
        rot = zlayer @ ylayer if spec.rot_order == "yz" else ylayer @ zlayer
        u = cx @ rot @ u
    return u


def fidelity_samples(n: int, depth: int, n_samples: int, seed, rot_order: str = "yz",
                     ladder: str = "up") -> np.ndarray:
    """``|<0|U|0>|^2`` over independent uniform angle draws."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = nx.as_rng(seed)
    angles = rng.uniform(0.0, 2 * np.pi, size=(n_samples, depth, 2 * n))
    return circuit_zero_fidelities(angles, n, ROT_ORDERS[rot_order], LADDERS[ladder])


def haar_fidelity_pdf(d: int, f):
    """Density of ``|<0|U|0>|^2`` for Haar-random ``U``: ``(d-1)(1-F)^(d-2)``."""
    f = np.asarray(f, dtype=np.float64)
    return (d - 1) * (1.0 - f) ** (d - 2)


def haar_fidelity_cdf(d: int, f):
    return 1.0 - (1.0 - np.asarray(f, dtype=np.float64)) ** (d - 1)


def haar_fidelity_samples(d: int, n_samples: int, seed) -> np.ndarray:
    u = nx.as_rng(seed).random(n_samples)
    return 1.0 - (1.0 - u) ** (1.0 / (d - 1))


def _counts(samples, n_bins):
    counts, _ = np.histogram(np.clip(samples, 0.0, 1.0), bins=n_bins, range=(0.0, 1.0))
    return counts.astype(np.float64)


def kl_from_counts(p_counts, q_counts) -> float:
    """KL divergence of two histograms after adding one pseudo-count to every bin."""
    p = np.asarray(p_counts, dtype=np.float64) + 1.0
    q = np.asarray(q_counts, dtype=np.float64) + 1.0
    p /= p.sum()
    q /= q.sum()
    return float(np.sum(p * np.log(p / q)))


def kl_histograms(samples_p, samples_q, n_bins: int = N_BINS) -> float:
    return kl_from_counts(_counts(samples_p, n_bins), _counts(samples_q, n_bins))


def haar_bin_counts(d: int, n_samples: int, n_bins: int = N_BINS) -> np.ndarray:
    """Expected Haar histogram counts (bin-integrated analytic density)."""
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    return n_samples * np.diff(haar_fidelity_cdf(d, edges))


def expressibility(n: int, depth: int, n_samples: int, n_bins: int = N_BINS, seed=0,
                   baseline: str = "sampled", **conventions) -> float:
    """KL divergence between circuit fidelities and the Haar fidelity distribution.

    ``baseline="sampled"`` compares against ``n_samples`` Haar draws (finite-size
    comparison); ``"analytic"`` against bin-integrated expected counts.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be positive")
    rng = nx.as_rng(seed)
    d = 2 ** n
    circ = _counts(fidelity_samples(n, depth, n_samples, rng, **conventions), n_bins)
    if baseline == "sampled":
        ref = _counts(haar_fidelity_samples(d, n_samples, rng), n_bins)
    elif baseline == "analytic":
        ref = haar_bin_counts(d, n_samples, n_bins)
    else:
        raise ValueError(f"unknown baseline {baseline!r}")
    return kl_from_counts(circ, ref)


def haar_baseline(n: int, n_samples: int, n_bins: int = N_BINS, seed=0) -> float:
    """Expressibility of genuine Haar sampling against an independent Haar sample set."""
    rng = nx.as_rng(seed)
    d = 2 ** n
    a = haar_fidelity_samples(d, n_samples, rng)
    b = haar_fidelity_samples(d, n_samples, rng)
    return kl_histograms(a, b, n_bins)
