"""Pauli-string tomography: modes, the probability model and synthetic shots.

A mode pairs a product preparation ``s`` (each qubit in one of the six Pauli
eigenstates) with a product measurement basis ``b`` (x, y or z per qubit).
Modes are addressed by an integer ``prep_index * 3**n + basis_index`` where
both indices are base-6 / base-3 numbers with qubit 0 as the most significant
digit.

Gate conventions ("v1"): ``V`` maps ``|0>`` to the named eigenstate and ``M``
maps eigenstates of ``sigma_b`` to computational states::

    V(+z)=I  V(-z)=X  V(+x)=H  V(-x)=H X  V(+y)=S H  V(-y)=S H X
    M(z)=I   M(x)=H   M(y)=H S^dag
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import numerics as nx
from .channels import KrausMap, to_superop
from .errors import BadDataset, InvalidProbabilities, ShapeMismatch, TooMany
from .spam import SpamModel

GATE_CONVENTION = "v1"
QUBIT_ORDER = "msb-first"
PREP_LABELS = ("+x", "-x", "+y", "-y", "+z", "-z")
BASIS_LABELS = ("x", "y", "z")

_I = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_S = np.diag([1, 1j])

PREP_GATES = {
    "+z": _I,
    "-z": _X,
    "+x": _H,
    "-x": _H @ _X,
    "+y": _S @ _H,
    "-y": _S @ _H @ _X,
}
MEAS_GATES = {"z": _I, "x": _H, "y": _H @ _S.conj().T}


@dataclass(frozen=True)
class PauliMode:
    prep: tuple
    basis: tuple

    def __post_init__(self):
        prep, basis = tuple(self.prep), tuple(self.basis)
        if len(prep) != len(basis):
            raise ShapeMismatch("prep and basis strings must have equal length")
        if any(s not in PREP_GATES for s in prep) or any(b not in MEAS_GATES for b in basis):
            raise ValueError(f"invalid mode labels {prep}, {basis}")
        object.__setattr__(self, "prep", prep)
        object.__setattr__(self, "basis", basis)

    @property
    def n(self) -> int:
        return len(self.prep)

    @classmethod
    def parse(cls, prep: str, basis: str) -> "PauliMode":
        if len(prep) % 2:
            raise ValueError(f"bad preparation string {prep!r}")
        return cls(tuple(prep[i:i + 2] for i in range(0, len(prep), 2)), tuple(basis))

    def encode(self) -> tuple[str, str]:
        return "".join(self.prep), "".join(self.basis)

    def index(self) -> int:
        return encode_mode(self)


def mode_count(n: int) -> int:
    if n < 1:
        raise ValueError("n must be positive")
    return 18 ** n


def _digits(value: int, base: int, n: int):
    out = []
    for _ in range(n):
        value, rem = divmod(value, base)
        out.append(rem)
    return out[::-1]


def decode_mode(index: int, n: int) -> PauliMode:
    p_idx, b_idx = divmod(int(index), 3 ** n)
    prep = tuple(PREP_LABELS[k] for k in _digits(p_idx, 6, n))
    basis = tuple(BASIS_LABELS[k] for k in _digits(b_idx, 3, n))
    return PauliMode(prep, basis)


def encode_mode(mode: PauliMode) -> int:
    p_idx = 0
    for s in mode.prep:
        p_idx = 6 * p_idx + PREP_LABELS.index(s)
    b_idx = 0
    for b in mode.basis:
        b_idx = 3 * b_idx + BASIS_LABELS.index(b)
    return p_idx * 3 ** mode.n + b_idx


def sample_modes(n: int, n_modes: int, seed) -> list[PauliMode]:
    """``n_modes`` distinct modes drawn uniformly without replacement."""
    total = mode_count(n)
    if n_modes > total:
        raise TooMany(f"only {total} modes exist for n={n}")
    idx = nx.as_rng(seed).choice(total, size=n_modes, replace=False)
    return [decode_mode(i, n) for i in idx]


def all_modes(n: int) -> list[PauliMode]:
    return [decode_mode(i, n) for i in range(mode_count(n))]


def spam_modes(n: int) -> list[PauliMode]:
    """All ``6^n`` preparations with every qubit measured in z."""
    return [PauliMode(decode_mode(p * 3 ** n, n).prep, ("z",) * n) for p in range(6 ** n)]


def _kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = np.kron(out, m)
    return out


def prep_unitary(s) -> np.ndarray:
    return _kron_all(PREP_GATES[x] for x in s)


def meas_unitary(b) -> np.ndarray:
    return _kron_all(MEAS_GATES[x] for x in b)


@lru_cache(maxsize=64)
def _prep_table(n: int) -> np.ndarray:
    return np.stack([prep_unitary(decode_mode(p * 3 ** n, n).prep) for p in range(6 ** n)])


@lru_cache(maxsize=64)
def _meas_table(n: int) -> np.ndarray:
    return np.stack([meas_unitary(decode_mode(b, n).basis) for b in range(3 ** n)])


def prep_unitaries(n: int) -> np.ndarray:
    """All ``6^n`` preparation unitaries indexed by prep index (read-only)."""
    t = _prep_table(n)
    t.setflags(write=False)
    return t


def meas_unitaries(n: int) -> np.ndarray:
    t = _meas_table(n)
    t.setflags(write=False)
    return t


def n_qubits(d: int) -> int:
    n = int(round(np.log2(d)))
    if 2 ** n != d:
        raise ShapeMismatch(f"dimension {d} is not a power of two")
    return n


def _as_superop(channel, d: int) -> np.ndarray:
    if isinstance(channel, KrausMap):
        if channel.d != d:
            raise ShapeMismatch("channel and SPAM dimensions differ")
        return to_superop(channel)
    s = np.asarray(channel, dtype=np.complex128)
    if s.shape != (d * d, d * d):
        raise ShapeMismatch(f"superoperator must be {d * d}x{d * d}")
    return s


def probabilities(channel, spam: SpamModel, prep_idx, basis_idx) -> np.ndarray:
    """Outcome probabilities for modes given as index arrays; shape (N, d).

    ``channel`` is a :class:`KrausMap` or a ``d^2 x d^2`` superoperator.
    ``p[m, j] = Tr[E_j  P_b  T(P_s rho0 P_s^dag)  P_b^dag]`` with ``E_j`` the
    model's POVM, or ``diag(C[j, :])`` for a corruption-matrix model.
    """
    d = spam.d
    n = n_qubits(d)
    s = _as_superop(channel, d)
    prep_idx = np.asarray(prep_idx, dtype=np.int64)
    basis_idx = np.asarray(basis_idx, dtype=np.int64)
    pu = prep_unitaries(n)
    mu = meas_unitaries(n)
    used_p, p_inv = np.unique(prep_idx, return_inverse=True)
    rho_in = pu[used_p] @ spam.rho0[None] @ nx.dagger(pu[used_p])
    out_vec = s @ rho_in.transpose(0, 2, 1).reshape(len(used_p), -1).T  # columns vec(T(rho))
    sigma = out_vec.T.reshape(-1, d, d).transpose(0, 2, 1)
    effects = spam.effects()
    probs = np.empty((prep_idx.size, d))
    for b in np.unique(basis_idx):
        sel = np.nonzero(basis_idx == b)[0]
        # effects seen before the basis rotation: P_b^dag E_j P_b
        eff = nx.dagger(mu[b])[None] @ effects @ mu[b][None]
        probs[sel] = np.einsum("jxy,kyx->kj", eff, sigma[p_inv[sel]]).real
    return probs


def predict_probs(channel, spam: SpamModel, mode: PauliMode) -> np.ndarray:
    idx = encode_mode(mode)
    p, b = divmod(idx, 3 ** mode.n)
    if 2 ** mode.n != spam.d:
        raise ShapeMismatch("mode length does not match SPAM dimension")
    return probabilities(channel, spam, [p], [b])[0]


@dataclass
class TomographyDataset:
    n: int
    shots: int
    prep_idx: np.ndarray
    basis_idx: np.ndarray
    freqs: np.ndarray  # (N_m, d)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.prep_idx = np.asarray(self.prep_idx, dtype=np.int64).ravel()
        self.basis_idx = np.asarray(self.basis_idx, dtype=np.int64).ravel()
        self.freqs = np.asarray(self.freqs, dtype=np.float64)
        d = 2 ** self.n
        if self.freqs.shape != (self.prep_idx.size, d) or self.basis_idx.size != self.prep_idx.size:
            raise BadDataset("dataset arrays have inconsistent shapes")

    @property
    def d(self) -> int:
        return 2 ** self.n

    def __len__(self):
        return self.prep_idx.size

    @property
    def modes(self) -> list[PauliMode]:
        return [decode_mode(p * 3 ** self.n + b, self.n) for p, b in zip(self.prep_idx, self.basis_idx)]

    def subset(self, rows) -> "TomographyDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return TomographyDataset(self.n, self.shots, self.prep_idx[rows], self.basis_idx[rows],
                                 self.freqs[rows], dict(self.meta))

    def validate(self, atol: float = 1e-9) -> None:
        if np.any(self.freqs < 0) or np.abs(self.freqs.sum(axis=1) - 1.0).max() > atol:
            raise BadDataset("frequencies must be nonnegative and sum to one")
        counts = self.freqs * self.shots
        if np.abs(counts - np.round(counts)).max() > 1e-6:
            raise BadDataset("frequencies are not multiples of 1/shots")


def mode_indices(modes) -> tuple[np.ndarray, np.ndarray]:
    n = modes[0].n
    idx = np.array([encode_mode(m) for m in modes], dtype=np.int64)
    return idx // 3 ** n, idx % 3 ** n


def simulate_frequencies(truth_channel, spam_truth: SpamModel, modes, shots: int, seed: int,
                         exact: bool = False) -> TomographyDataset:
    """Multinomial shot frequencies for each mode.

    Mode ``k`` draws from its own stream derived from ``(seed, k)``, so the
    result does not depend on how the modes are batched. ``exact=True``
    stores the probabilities themselves (infinite-shot limit).
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    n = n_qubits(spam_truth.d)
    prep_idx, basis_idx = mode_indices(list(modes))
    probs = probabilities(truth_channel, spam_truth, prep_idx, basis_idx)
    if probs.min() < -1e-9 or probs.max() > 1 + 1e-9:
        raise InvalidProbabilities(f"probabilities outside [0, 1]: [{probs.min()}, {probs.max()}]")
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum(axis=1, keepdims=True)
    if exact:
        freqs = probs
    else:
        freqs = np.empty_like(probs)
        for k in range(probs.shape[0]):
            counts = nx.derive_rng(seed, k).multinomial(shots, probs[k])
            freqs[k] = counts / shots
    return TomographyDataset(n, shots, prep_idx, basis_idx, freqs)


def split(ds: TomographyDataset, train_fraction: float, seed) -> tuple[TomographyDataset, TomographyDataset]:
    """Random disjoint train/test split with ``floor(fraction * N_m)`` training modes."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n_train = int(np.floor(train_fraction * len(ds)))
    order = nx.as_rng(seed).permutation(len(ds))
    return ds.subset(np.sort(order[:n_train])), ds.subset(np.sort(order[n_train:]))
