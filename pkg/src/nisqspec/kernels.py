"""Hot inner loops, each in a numba flavour and a pure-numpy flavour.

The public names (``gauss_pair_sum``, ``nn_mean_distance``,
``circuit_zero_fidelities``) dispatch to one flavour at import time, see
:mod:`nisqspec._accel`. Both flavours are importable directly as
``_nb_<name>`` / ``_np_<name>`` so they can be compared in tests and
benchmarks.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# Pairwise Gaussian sums ------------------------------------------------------


@njit
def _nb_gauss_pair_sum(ax, ay, bx, by, coef):
    total = 0.0
    for i in range(ax.shape[0]):
        xi = ax[i]
        yi = ay[i]
        row = 0.0
        for j in range(bx.shape[0]):
            dx = xi - bx[j]
            dy = yi - by[j]
            row += np.exp(-coef * (dx * dx + dy * dy))
        total += row
    return total


def _np_gauss_pair_sum(ax, ay, bx, by, coef, block=2048):
    total = 0.0
    for start in range(0, ax.shape[0], block):
        dx = ax[start:start + block, None] - bx[None, :]
        dy = ay[start:start + block, None] - by[None, :]
        total += float(np.exp(-coef * (dx * dx + dy * dy)).sum())
    return total


def gauss_pair_sum(a, b, coef):
    """Sum of ``exp(-coef * |a_i - b_j|**2)`` over all pairs of complex points."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    b = np.ascontiguousarray(b, dtype=np.complex128)
    impl = _nb_gauss_pair_sum if USE_NUMBA else _np_gauss_pair_sum
    return float(impl(a.real.copy(), a.imag.copy(), b.real.copy(), b.imag.copy(), float(coef)))


# Nearest-neighbour distances -------------------------------------------------


@njit
def _nb_nn_mean_distance(x, y):
    n = x.shape[0]
    acc = 0.0
    for i in range(n):
        best = np.inf
        for j in range(n):
            if j == i:
                continue
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            d2 = dx * dx + dy * dy
            if d2 < best:
                best = d2
        acc += np.sqrt(best)
    return acc / n


def _np_nn_mean_distance(x, y):
    z = x + 1j * y
    dist = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(dist, np.inf)
    return float(dist.min(axis=1).mean())


def nn_mean_distance(z):
    """Mean distance from each complex point to its nearest other point."""
    z = np.ascontiguousarray(z, dtype=np.complex128)
    if z.shape[0] < 2:
        raise ValueError("need at least two points")
    impl = _nb_nn_mean_distance if USE_NUMBA else _np_nn_mean_distance
    return float(impl(z.real.copy(), z.imag.copy()))


# Circuit statevector fidelities ---------------------------------------------
# angles: (N, depth, 2n); per block the first n entries drive R_y, the last n R_z.
# rot_order 0 = R_y layer first, 1 = R_z layer first.
# ladder 0 = control q -> target q+1 ascending, 1 = control q+1 -> target q descending.


@njit
def _nb_circuit_zero_fidelities(angles, n, rot_order, ladder):
    n_samples = angles.shape[0]
    depth = angles.shape[1]
    d = 1 << n
    out = np.empty(n_samples)
    psi = np.empty(d, dtype=np.complex128)
    for s in range(n_samples):
        psi[:] = 0.0
        psi[0] = 1.0
        for blk in range(depth):
            for layer in range(2):
                use_y = (layer == 0) == (rot_order == 0)
                for q in range(n):
                    mask = 1 << (n - 1 - q)
                    if use_y:
                        theta = angles[s, blk, q]
                        c = np.cos(0.5 * theta)
                        sn = np.sin(0.5 * theta)
                        for k in range(d):
                            if k & mask == 0:
                                a0 = psi[k]
                                a1 = psi[k | mask]
                                psi[k] = c * a0 - sn * a1
                                psi[k | mask] = sn * a0 + c * a1
                    else:
                        theta = angles[s, blk, n + q]
                        ph0 = np.cos(0.5 * theta) - 1j * np.sin(0.5 * theta)
                        ph1 = np.conj(ph0)
                        for k in range(d):
                            if k & mask == 0:
                                psi[k] *= ph0
                            else:
                                psi[k] *= ph1
            for i in range(n - 1):
                if ladder == 0:
                    ctrl = i
                    tgt = i + 1
                else:
                    ctrl = n - 1 - i
                    tgt = n - 2 - i
                cm = 1 << (n - 1 - ctrl)
                tm = 1 << (n - 1 - tgt)
                for k in range(d):
                    if (k & cm) != 0 and (k & tm) == 0:
                        tmp = psi[k]
                        psi[k] = psi[k | tm]
                        psi[k | tm] = tmp
        out[s] = psi[0].real ** 2 + psi[0].imag ** 2
    return out


def _np_circuit_zero_fidelities(angles, n, rot_order, ladder):
    n_samples, depth, _ = angles.shape
    psi = np.zeros((n_samples,) + (2,) * n, dtype=np.complex128)
    psi[(slice(None),) + (0,) * n] = 1.0
    for blk in range(depth):
        for layer in range(2):
            use_y = (layer == 0) == (rot_order == 0)
            for q in range(n):
                ax = q + 1
                a0 = np.take(psi, 0, axis=ax)
                a1 = np.take(psi, 1, axis=ax)
                shape = (n_samples,) + (1,) * (n - 1)
                if use_y:
                    theta = angles[:, blk, q].reshape(shape)
                    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
                    new0, new1 = c * a0 - s * a1, s * a0 + c * a1
                else:
                    theta = angles[:, blk, n + q].reshape(shape)
                    ph = np.exp(-0.5j * theta)
                    new0, new1 = ph * a0, np.conj(ph) * a1
                psi = np.stack([new0, new1], axis=ax)
        for i in range(n - 1):
            ctrl, tgt = (i, i + 1) if ladder == 0 else (n - 1 - i, n - 2 - i)
            idx = [slice(None)] * (n + 1)
            idx[ctrl + 1] = 1
            sub = psi[tuple(idx)]
            t_ax = tgt + 1 - (1 if tgt > ctrl else 0)
            psi[tuple(idx)] = np.flip(sub, axis=t_ax)
    flat = psi.reshape(n_samples, -1)
    return np.abs(flat[:, 0]) ** 2


def circuit_zero_fidelities(angles, n, rot_order=0, ladder=0):
    """``|<0|U(angles)|0>|**2`` for a batch of angle tensors of shape (N, depth, 2n)."""
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    if angles.ndim != 3 or angles.shape[2] != 2 * n:
        raise ValueError(f"angles must have shape (N, depth, {2 * n}), got {angles.shape}")
    impl = _nb_circuit_zero_fidelities if USE_NUMBA else _np_circuit_zero_fidelities
    return np.asarray(impl(angles, int(n), int(rot_order), int(ladder)))
