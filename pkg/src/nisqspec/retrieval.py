"""Gradient-based retrieval of SPAM models and CPTP maps from tomography data.

Both stages minimize the quadratic loss
``L = sum_{modes, outcomes} (p_hat - f)^2`` with Adam. Gradients are analytic
(adjoint) all the way through the superoperator, the Kraus blocks and the
QR factorization; the finite-difference suite in the tests is the contract.

Complex gradients use the convention ``dL = Re Tr(Gbar^dag dZ)``, so
``Gbar = dL/dRe Z + i dL/dIm Z``.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse

from . import numerics as nx
from .channels import KrausMap, ParamVector, g_to_theta, theta_size, theta_to_g, to_superop
from .errors import BadDataset, ShapeMismatch
from .spam import (
    PovmSet,
    SpamModel,
    canonicalize_spam,
    params_to_corruption,
    params_to_state,
    povm_from_params,
    povm_to_corruption,
    projector_povm,
)
from .tomography import TomographyDataset, meas_unitaries, prep_unitaries


class NoProgress(UserWarning):
    """The loss stopped improving while still above the configured threshold."""


@dataclass
class FitConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iters: int = 5000
    batch: Optional[int] = None  # None = full batch, else modes per step
    seed: int = 0
    init_scale: float = 0.1
    patience: int = 500  # stop when the best loss improved by < rtol over this many steps
    rtol: float = 1e-7
    stall_threshold: float = np.inf  # NoProgress is reported when stalling above this loss
    refine_spam: bool = False

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.eps <= 0 or self.lr <= 0:
            raise ValueError("lr and eps must be positive")


@dataclass
class FitReport:
    final_loss: float
    initial_loss: float
    loss_trace: list
    iterations: int
    wall_time: float
    status: str = "ok"

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    def __init__(self, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, x: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(x)
            self.v = np.zeros_like(x)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        return x - self.lr * mhat / (np.sqrt(vhat) + self.eps)


# -- QR adjoint ----------------------------------------------------------------


def qr_backward(q: np.ndarray, r: np.ndarray, q_bar: np.ndarray) -> np.ndarray:
    """Adjoint of ``G -> Q`` for the thin QR with real positive ``diag(R)``."""
    b = q_bar.conj().T @ q
    low = np.tril(b, -1)
    sym = low + low.conj().T + np.diag(np.real(np.diagonal(b)))
    rhs = q_bar - q @ sym
    # rhs @ R^{-H}: solve R X^H = rhs^H
    return np.linalg.solve(r, rhs.conj().T).conj().T


def _inv_sqrt_divided_differences(w: np.ndarray) -> np.ndarray:
    sw = np.sqrt(w)
    return -1.0 / (sw[:, None] * sw[None, :] * (sw[:, None] + sw[None, :]))


# -- shared mode bookkeeping -----------------------------------------------------


class _ModeTables:
    def __init__(self, ds: TomographyDataset):
        n, d = ds.n, ds.d
        self.n, self.d = n, d
        self.freqs = ds.freqs
        self.used_p, self.p_inv = np.unique(ds.prep_idx, return_inverse=True)
        self.used_b, self.b_inv = np.unique(ds.basis_idx, return_inverse=True)
        self.prep_u = prep_unitaries(n)[self.used_p]
        self.meas_u = meas_unitaries(n)[self.used_b]
        self.groups = [np.nonzero(self.b_inv == k)[0] for k in range(len(self.used_b))]
        m = len(ds)
        self.incidence = scipy.sparse.csr_matrix(
            (np.ones(m), (np.arange(m), self.p_inv)), shape=(m, len(self.used_p))
        )

    def prepared(self, rho0: np.ndarray) -> np.ndarray:
        return self.prep_u @ rho0[None] @ nx.dagger(self.prep_u)


def _vecs(mats: np.ndarray) -> np.ndarray:
    """Columns are ``vec`` of each matrix in a (k, d, d) stack."""
    return mats.transpose(0, 2, 1).reshape(mats.shape[0], -1).T


class MapObjective:
    """Loss and gradient of the map parameters for frozen (or refined) SPAM."""

    def __init__(self, ds: TomographyDataset, spam: SpamModel, r: int):
        if spam.d != ds.d:
            raise ShapeMismatch("SPAM model and dataset dimensions differ")
        if not 1 <= r <= ds.d ** 2:
            raise ValueError("rank must lie in [1, d^2]")
        self.ds, self.r, self.d = ds, r, ds.d
        self.tab = _ModeTables(ds)
        self.set_spam(spam)

    def set_spam(self, spam: SpamModel):
        d = self.d
        self.spam = spam
        if spam.povm is not None:
            effects, self.corr = spam.povm.elements, np.eye(d)
        else:
            effects, self.corr = projector_povm(d).elements, spam.corruption
        # w[b, j] = vec((P_b^dag E_j P_b)^T), so q = Re(w . vec(sigma))
        rot = nx.dagger(self.tab.meas_u)[:, None] @ effects[None] @ self.tab.meas_u[:, None]
        self.w = rot.transpose(0, 1, 2, 3).reshape(len(self.tab.used_b), d, d * d)
        self.v = _vecs(self.tab.prepared(spam.rho0))

    def kraus(self, theta: np.ndarray):
        q, r = nx.qr_positive(theta_to_g(theta, self.d, self.r))
        return q, r

    def _q(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = s @ self.v
        q = np.empty((len(self.ds), self.d))
        for k, rows in enumerate(self.tab.groups):
            q[rows] = np.real(self.w[k] @ x[:, self.tab.p_inv[rows]]).T
        return q, x

    def probabilities(self, theta: np.ndarray) -> np.ndarray:
        q_mat, _ = self.kraus(theta)
        s = to_superop(KrausMap(q_mat.reshape(self.r, self.d, self.d), check=False))
        return self._q(s)[0] @ self.corr.T

    def loss(self, theta: np.ndarray) -> float:
        e = self.probabilities(theta) - self.ds.freqs
        return float(np.sum(e * e))

    def loss_and_grad(self, theta: np.ndarray, rows=None, spam_grad: bool = False):
        d, r = self.d, self.r
        qm, rm = self.kraus(theta)
        k = qm.reshape(r, d, d)
        s = np.einsum("kac,kbe->abce", k.conj(), k).reshape(d * d, d * d)
        q, x = self._q(s)
        p = q @ self.corr.T
        e = p - self.ds.freqs
        if rows is not None:
            mask = np.zeros(len(self.ds), dtype=bool)
            mask[rows] = True
            e = np.where(mask[:, None], e, 0.0)
        loss = float(np.sum(e * e))
        g_p = 2.0 * e
        g_q = g_p @ self.corr
        # u_m = W_b^T g_q[m]; S_bar = sum_m conj(u_m) v_m^dag
        u = np.empty((d * d, len(self.ds)), dtype=np.complex128)
        for kk, sel in enumerate(self.tab.groups):
            u[:, sel] = self.w[kk].T @ g_q[sel].T
        y = (self.tab.incidence.T @ u.T).T  # (d^2, P): per-preparation sums
        s_bar = y.conj() @ self.v.conj().T
        s4 = s_bar.reshape(d, d, d, d)
        k_bar = np.einsum("abce,kac->kbe", s4, k) + np.einsum("abce,kbe->kac", s4.conj(), k)
        g_bar = qr_backward(qm, rm, k_bar.reshape(r * d, d))
        grad = g_to_theta(g_bar)
        if not spam_grad:
            return loss, grad
        # SPAM adjoints (corruption model only)
        c_bar = g_p.T @ q
        x_p = s.T @ y  # column p: vec(X_p^T) with Tr-pairing X_p for rho_p
        xp = x_p.T.reshape(-1, d, d)  # (P, d, d) = X_p (unvec gives X_p^T, reshape transposes back)
        pu = self.tab.prep_u
        omega = np.einsum("pxa,pxy,pyb->ab", pu.conj(), xp, pu)
        omega = 0.5 * (omega + omega.conj().T)
        return loss, grad, omega, c_bar


def _rho_grad(a: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Adjoint of ``A -> A A^dag / Tr(A A^dag)`` for a Hermitian Tr-pairing cotangent ``omega``."""
    t = np.trace(a @ a.conj().T).real
    rho = a @ a.conj().T / t
    c = np.trace(omega @ rho).real
    return 2.0 * (omega @ a) / t - 2.0 * c * a / t


def _corruption_grad(a_c: np.ndarray, c: np.ndarray, c_bar: np.ndarray) -> np.ndarray:
    col = np.abs(a_c).sum(axis=0)
    inner = c_bar - np.sum(c_bar * c, axis=0, keepdims=True)
    return np.sign(a_c) * inner / col[None, :]


# -- map loss API ------------------------------------------------------------------


def _theta_of(theta, d: int, r: int) -> np.ndarray:
    if isinstance(theta, ParamVector):
        return theta.theta
    t = np.asarray(theta, dtype=np.float64).ravel()
    if t.size != theta_size(d, r):
        raise ShapeMismatch("theta length does not match (d, r)")
    return t


def _rank_of(theta, d: int) -> int:
    if isinstance(theta, ParamVector):
        return theta.r
    return int(np.asarray(theta).size // (2 * d * d))


def loss(theta, spam: SpamModel, ds: TomographyDataset) -> float:
    r = _rank_of(theta, ds.d)
    return MapObjective(ds, spam, r).loss(_theta_of(theta, ds.d, r))


def grad_loss(theta, spam: SpamModel, ds: TomographyDataset) -> np.ndarray:
    r = _rank_of(theta, ds.d)
    return MapObjective(ds, spam, r).loss_and_grad(_theta_of(theta, ds.d, r))[1]


def initial_theta(d: int, r: int, init_scale: float, seed) -> np.ndarray:
    g = np.zeros((r * d, d), dtype=np.complex128)
    g[:d] = np.eye(d)
    g += init_scale * nx.ginibre(r * d, d, seed)
    return g_to_theta(g)


def _run_adam(fun, x0, cfg: FitConfig, n_rows: int):
    """Minimize with Adam; ``fun(x, rows)`` returns ``(loss, grad)``. Returns best iterate."""
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    rng = nx.derive_rng(cfg.seed, 1)
    x = x0.copy()
    best_x, best_loss = x.copy(), np.inf
    trace = []
    start = time.perf_counter()
    last_improve_loss, last_improve_it = np.inf, 0
    status = "ok"
    initial = None
    for it in range(cfg.max_iters):
        rows = None
        if cfg.batch is not None and cfg.batch < n_rows:
            rows = rng.choice(n_rows, size=cfg.batch, replace=False)
        full_loss, grad = fun(x, None)
        if rows is not None:
            _, grad = fun(x, rows)
        if initial is None:
            initial = full_loss
        trace.append(full_loss)
        if full_loss < best_loss:
            best_loss, best_x = full_loss, x.copy()
        if it == 0 or best_loss < last_improve_loss * (1 - cfg.rtol):
            last_improve_loss, last_improve_it = best_loss, it
        if it - last_improve_it >= cfg.patience:
            status = "converged" if best_loss <= cfg.stall_threshold else "no_progress"
            break
        x = opt.step(x, grad)
    else:
        status = "max_iters"
    if status == "no_progress":
        warnings.warn(f"loss stalled at {best_loss:.4g}", NoProgress, stacklevel=3)
    report = FitReport(float(best_loss), float(initial), trace, len(trace),
                       time.perf_counter() - start, status)
    return best_x, report


def fit_map(ds: TomographyDataset, spam: SpamModel, r: int, cfg: FitConfig | None = None,
            theta0=None):
    """Retrieve a rank-``r`` map. Returns ``(KrausMap, FitReport)`` (or a third item,
    the refined SPAM model, when ``cfg.refine_spam`` is set)."""
    cfg = cfg or FitConfig()
    d = ds.d
    if not 1 <= r <= d * d:
        raise ValueError("rank must lie in [1, d^2]")
    obj = MapObjective(ds, spam, r)
    x0 = initial_theta(d, r, cfg.init_scale, nx.derive_rng(cfg.seed, 0)) if theta0 is None \
        else _theta_of(theta0, d, r).copy()
    if not cfg.refine_spam:
        theta, report = _run_adam(lambda x, rows: obj.loss_and_grad(x, rows), x0, cfg, len(ds))
        q, _ = obj.kraus(theta)
        return KrausMap(q.reshape(r, d, d)), report
    if spam.povm is not None:
        raise ValueError("joint SPAM refinement supports corruption-matrix models only")
    nt = x0.size
    a_rho = nx.sqrtm_psd(spam.rho0)
    z0 = np.concatenate([x0, a_rho.real.ravel(), a_rho.imag.ravel(), spam.corruption.ravel()])

    def unpack(z):
        re = z[nt:nt + d * d].reshape(d, d)
        im = z[nt + d * d:nt + 2 * d * d].reshape(d, d)
        return z[:nt], re + 1j * im, z[nt + 2 * d * d:].reshape(d, d)

    def fun(z, rows):
        th, a, ac = unpack(z)
        obj.set_spam(SpamModel(params_to_state(a.real, a.imag), params_to_corruption(ac)))
        loss_v, g_th, omega, c_bar = obj.loss_and_grad(th, rows, spam_grad=True)
        ga = _rho_grad(a, omega)
        gc = _corruption_grad(ac, obj.corr, c_bar)
        return loss_v, np.concatenate([g_th, ga.real.ravel(), ga.imag.ravel(), gc.ravel()])

    z, report = _run_adam(fun, z0, cfg, len(ds))
    th, a, ac = unpack(z)
    refined = SpamModel(params_to_state(a.real, a.imag), params_to_corruption(ac))
    q, _ = nx.qr_positive(theta_to_g(th, d, r))
    return KrausMap(q.reshape(r, d, d)), report, refined


# -- SPAM stage --------------------------------------------------------------------


class SpamObjective:
    """Loss of the SPAM parameters with the identity channel and z-basis readout."""

    def __init__(self, ds: TomographyDataset, model: str = "corruption"):
        if np.any(ds.basis_idx != 3 ** ds.n - 1):
            raise BadDataset("SPAM fitting needs modes measured in the all-z basis")
        if model not in ("corruption", "povm"):
            raise ValueError(f"unknown SPAM model {model!r}")
        self.ds, self.model, self.d = ds, model, ds.d
        self.tab = _ModeTables(ds)

    @property
    def size(self) -> int:
        d = self.d
        return 3 * d * d if self.model == "corruption" else 2 * d * d + 2 * d ** 3

    def unpack(self, x: np.ndarray):
        d = self.d
        a = (x[:d * d] + 1j * x[d * d:2 * d * d]).reshape(d, d)
        rest = x[2 * d * d:]
        if self.model == "corruption":
            return a, rest.reshape(d, d)
        half = d ** 3
        return a, (rest[:half] + 1j * rest[half:]).reshape(d, d, d)

    def spam_model(self, x: np.ndarray) -> SpamModel:
        a, m = self.unpack(x)
        rho = params_to_state(a.real, a.imag)
        if self.model == "corruption":
            return SpamModel(rho, params_to_corruption(m))
        povm = povm_from_params(m)
        return SpamModel(rho, povm_to_corruption(povm), povm)

    def loss_and_grad(self, x: np.ndarray, rows=None):
        d = self.d
        a, m = self.unpack(x)
        t = np.trace(a @ a.conj().T).real
        rho0 = a @ a.conj().T / t
        rho = self.tab.prepared(rho0)[self.tab.p_inv]  # (M, d, d)
        if self.model == "corruption":
            col = np.abs(m).sum(axis=0)
            c = np.abs(m) / col[None, :]
            pops = np.real(np.diagonal(rho, axis1=1, axis2=2))
            p = pops @ c.T
        else:
            h = m @ nx.dagger(m)
            w, vv = np.linalg.eigh(h.sum(axis=0))
            wmat = (vv / np.sqrt(w)[None, :]) @ vv.conj().T
            e_ops = wmat[None] @ h @ wmat[None]
            p = np.einsum("jxy,myx->mj", e_ops, rho).real
        err = p - self.ds.freqs
        if rows is not None:
            mask = np.zeros(len(self.ds), dtype=bool)
            mask[rows] = True
            err = np.where(mask[:, None], err, 0.0)
        loss_v = float(np.sum(err * err))
        g = 2.0 * err
        if self.model == "corruption":
            c_bar = g.T @ pops
            g_m = _corruption_grad(m, c, c_bar)
            eff = np.zeros((d, d, d))
            eff[:, np.arange(d), np.arange(d)] = c
            g_rest = g_m.ravel()
        else:
            eff = e_ops
            e_bar = np.einsum("mj,mxy->jxy", g, rho)  # Tr-pairing cotangent of each E_j
            w_bar = np.einsum("jab,bc,jcd->ad", h, wmat, e_bar) + np.einsum("jab,bc,jcd->ad", e_bar, wmat, h)
            h_bar = wmat[None] @ e_bar @ wmat[None]
            fdd = _inv_sqrt_divided_differences(w)
            d_bar = vv @ (fdd * (vv.conj().T @ w_bar @ vv)) @ vv.conj().T
            h_bar = h_bar + d_bar[None]
            g_g = (h_bar + nx.dagger(h_bar)) @ m
            g_rest = np.concatenate([g_g.real.ravel(), g_g.imag.ravel()])
        # cotangent of rho_m is sum_j g_mj E_j; pull back through P_s
        weighted = np.einsum("mj,jxy->mxy", g, eff)
        per_prep = np.zeros((len(self.tab.used_p), d, d), dtype=np.complex128)
        np.add.at(per_prep, self.tab.p_inv, weighted)
        pu = self.tab.prep_u
        omega = np.einsum("pxa,pxy,pyb->ab", pu.conj(), per_prep, pu)
        omega = 0.5 * (omega + omega.conj().T)
        g_a = _rho_grad(a, omega)
        return loss_v, np.concatenate([g_a.real.ravel(), g_a.imag.ravel(), g_rest])

    def initial(self, init_scale: float, seed) -> np.ndarray:
        d = self.d
        rng = nx.as_rng(seed)
        a = np.zeros((d, d), dtype=np.complex128)
        a[0, 0] = 1.0
        a += init_scale * nx.ginibre(d, d, rng)
        head = [a.real.ravel(), a.imag.ravel()]
        if self.model == "corruption":
            ac = np.eye(d) + init_scale * rng.standard_normal((d, d))
            return np.concatenate(head + [ac.ravel()])
        g = np.zeros((d, d, d), dtype=np.complex128)
        g[np.arange(d), np.arange(d), np.arange(d)] = 1.0
        g += init_scale * np.stack([nx.ginibre(d, d, rng) for _ in range(d)])
        return np.concatenate(head + [g.real.ravel(), g.imag.ravel()])


def fit_spam(ds_identity: TomographyDataset, cfg: FitConfig | None = None,
             model: str = "corruption", return_report: bool = False):
    """Fit ``rho0`` and the readout model with the circuit replaced by the identity."""
    cfg = cfg or FitConfig()
    obj = SpamObjective(ds_identity, model)
    x0 = obj.initial(cfg.init_scale, nx.derive_rng(cfg.seed, 0))
    x, report = _run_adam(obj.loss_and_grad, x0, cfg, len(ds_identity))
    fitted = canonicalize_spam(obj.spam_model(x))
    return (fitted, report) if return_report else fitted


# -- evaluation ----------------------------------------------------------------------


def kl_divergence(f: np.ndarray, p: np.ndarray, pseudo: float) -> np.ndarray:
    """Row-wise ``sum_j f_j ln(f_j / p_j)`` after adding ``pseudo`` to every entry and renormalizing."""
    f = np.atleast_2d(np.asarray(f, dtype=np.float64)) + pseudo
    p = np.atleast_2d(np.clip(np.asarray(p, dtype=np.float64), 0.0, None)) + pseudo
    f /= f.sum(axis=1, keepdims=True)
    p /= p.sum(axis=1, keepdims=True)
    return np.sum(f * np.log(f / p), axis=1)


def kl_eval(channel, spam: SpamModel, ds_test: TomographyDataset) -> float:
    """Mean KL divergence between test frequencies and model probabilities."""
    from .tomography import probabilities

    if len(ds_test) == 0:
        raise BadDataset("empty test set")
    p = probabilities(channel, spam, ds_test.prep_idx, ds_test.basis_idx)
    return float(kl_divergence(ds_test.freqs, p, 1.0 / (2 * ds_test.shots)).mean())
