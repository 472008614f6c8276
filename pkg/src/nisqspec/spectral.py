"""Distances between eigenvalue clouds and diluted-unitary ensemble fits.

The spectral distance is the squared L2 distance between Gaussian kernel
density estimates of two clouds. Its integral has a closed form: the overlap
of two width-``sigma`` kernels is one kernel of width ``sqrt(2) sigma``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import numerics as nx
from .channels import Spectrum
from .ensembles import du_radii, du_superop_parts
from .errors import DegenerateSpectrum, SizeMismatch
from .kernels import gauss_pair_sum, nn_mean_distance

DEFAULT_GRID_P = tuple(np.round(np.arange(1, 50) * 0.02, 2))
COARSE_R = (1, 2, 3, 4, 6, 8, 11, 16, 23, 32, 45, 64, 91, 128, 181, 256)


@dataclass
class DUFit:
    p_star: float
    r_star: int
    sd_star: float
    sigma: float
    samples_per_point: int
    grid: dict
    metric: str = "sd"
    table: list = field(default_factory=list, repr=False)  # (p, r, value) of every evaluated cell

    @property
    def radii(self):
        return du_radii(self.p_star, self.r_star)

    def to_dict(self, with_table: bool = False) -> dict:
        out = asdict(self)
        if not with_table:
            out.pop("table")
        r_minus, r_plus = self.radii
        out["r_minus"], out["r_plus"] = r_minus, r_plus
        out["support"] = classify_support(self)
        return out


def _cloud(spec) -> np.ndarray:
    """Spectrum objects contribute their bulk (leading eigenvalue dropped); raw arrays are used as given."""
    if isinstance(spec, Spectrum):
        return spec.bulk
    return np.asarray(spec, dtype=np.complex128).ravel()


def kde_sigma(spec) -> float:
    z = _cloud(spec)
    if z.size < 2:
        raise DegenerateSpectrum("need at least two eigenvalues")
    s = nn_mean_distance(z)
    if s <= 0.0:
        raise DegenerateSpectrum("all eigenvalues coincide; pass sigma explicitly")
    return s


def _kernel_mean(a, b, sigma: float) -> float:
    # 2-D Gaussian density of width sqrt(2) sigma, averaged over all pairs
    coef = 1.0 / (4.0 * sigma * sigma)
    return gauss_pair_sum(a, b, coef) / (4.0 * np.pi * sigma * sigma) / (a.size * b.size)


def spectral_distance(sa, sb, sigma: float) -> float:
    a, b = _cloud(sa), _cloud(sb)
    if a.size != b.size:
        raise SizeMismatch(f"clouds have {a.size} and {b.size} points")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if a.tobytes() > b.tobytes():
        a, b = b, a  # fixed argument order makes the result exactly symmetric
    aa = _kernel_mean(a, a, sigma)
    bb = _kernel_mean(b, b, sigma)
    ab = _kernel_mean(a, b, sigma)
    return max(aa + bb - 2.0 * ab, 0.0)


def wasserstein2(sa, sb) -> float:
    """2-Wasserstein distance between equal-size clouds (optimal assignment)."""
    a, b = _cloud(sa), _cloud(sb)
    if a.size != b.size:
        raise SizeMismatch(f"clouds have {a.size} and {b.size} points")
    cost = np.abs(a[:, None] - b[None, :]) ** 2
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


def radii_empirical(spec) -> tuple[float, float]:
    z = np.abs(_cloud(spec))
    if z.size < 1:
        raise DegenerateSpectrum("need at least two eigenvalues")
    return float(z.min()), float(z.max())


def classify_support(fit) -> str:
    r_minus, _ = du_radii(fit.p_star, fit.r_star)
    return "disc" if r_minus is None else "annulus"


class DUSpectraCache:
    """Bulk spectra of DU draws keyed by ``(d, r, sample, seed, p)``.

    The two superoperator parts of a draw are kept as well, so a new ``p``
    costs one real eigendecomposition.
    """

    def __init__(self, max_parts: int = 64):
        self.spectra = {}
        self.parts = {}
        self.max_parts = max_parts

    def bulk(self, d: int, p: float, r: int, sample: int, seed: int) -> np.ndarray:
        key = (d, r, sample, seed, round(float(p), 12))
        hit = self.spectra.get(key)
        if hit is not None:
            return hit
        pkey = key[:4]
        parts = self.parts.get(pkey)
        if parts is None:
            if len(self.parts) >= self.max_parts:
                self.parts.pop(next(iter(self.parts)))
            parts = du_superop_parts(d, r, nx.derive_rng(seed, r, sample))
            self.parts[pkey] = parts
        a, b = parts
        vals = Spectrum(nx.eigvals((1 - p) * a + p * b)).bulk
        self.spectra[key] = vals
        return vals


def _score(target, d, p, r, m_samples, seed, sigma, metric, cache) -> float:
    total = 0.0
    for k in range(m_samples):
        cloud = cache.bulk(d, p, r, k, seed)
        if metric == "sd":
            total += spectral_distance(target, cloud, sigma)
        else:
            total += wasserstein2(target, cloud)
    return total / m_samples


def _nearest_subset(values, anchors):
    values = np.asarray(values)
    picked = sorted({values[np.abs(values - a).argmin()] for a in anchors})
    return picked


def fit_du(spec, d: int, grid_p=None, grid_r=None, m_samples: int = 5, seed: int = 0,
           sigma: Optional[float] = None, metric: str = "sd", search: str = "grid",
           cache: Optional[DUSpectraCache] = None) -> DUFit:
    """Diluted-unitary ensemble whose spectra best match ``spec``.

    ``search="grid"`` scores every (p, r) cell. ``search="refine"`` scores a
    coarse sub-grid (p every 0.1, r roughly geometric) and then every grid
    cell in the box spanned by the best coarse cell's neighbours.

    Draw ``k`` at rank ``r`` uses the stream ``(seed, r, k)`` for every ``p``
    (common random numbers), so SD differences along ``p`` are not masked by
    sampling noise.
    """
    grid_p = np.array(DEFAULT_GRID_P if grid_p is None else grid_p, dtype=np.float64)
    grid_r = np.array(range(1, d * d + 1) if grid_r is None else grid_r, dtype=np.int64)
    if grid_p.size == 0 or grid_r.size == 0 or m_samples < 1:
        raise ValueError("grids must be nonempty and m_samples >= 1")
    if metric not in ("sd", "w2"):
        raise ValueError(f"unknown metric {metric!r}")
    target = _cloud(spec)
    if target.size != d * d - 1:
        raise SizeMismatch(f"spectrum bulk has {target.size} points, expected {d * d - 1}")
    if sigma is None:
        sigma = kde_sigma(target)
    cache = cache if cache is not None else DUSpectraCache()
    grid_p, grid_r = np.unique(grid_p), np.unique(grid_r)
    scored = {}

    def evaluate(ps, rs):
        for r in rs:
            for p in ps:
                key = (float(p), int(r))
                if key not in scored:
                    scored[key] = _score(target, d, float(p), int(r), m_samples, seed, sigma, metric, cache)

    if search == "grid":
        evaluate(grid_p, grid_r)
    elif search == "refine":
        cp = _nearest_subset(grid_p, np.arange(0.1, 1.0, 0.1))
        cr = _nearest_subset(grid_r, [c for c in COARSE_R if c <= grid_r.max()] + [grid_r.max()])
        evaluate(cp, cr)
        p0, r0 = min(scored, key=lambda k: (scored[k], k[1], k[0]))
        ip, ir = cp.index(p0), cr.index(r0)
        # the box reaches the grid edge when the best coarse cell sits on the boundary
        p_lo = cp[ip - 1] if ip > 0 else grid_p.min()
        p_hi = cp[ip + 1] if ip + 1 < len(cp) else grid_p.max()
        r_lo = cr[ir - 1] if ir > 0 else grid_r.min()
        r_hi = cr[ir + 1] if ir + 1 < len(cr) else grid_r.max()
        evaluate(grid_p[(grid_p >= p_lo) & (grid_p <= p_hi)], grid_r[(grid_r >= r_lo) & (grid_r <= r_hi)])
    else:
        raise ValueError(f"unknown search {search!r}")
    (p_star, r_star) = min(scored, key=lambda k: (scored[k], k[1], k[0]))
    grid = {
        "p": [float(grid_p.min()), float(grid_p.max()), int(grid_p.size)],
        "r": [int(grid_r.min()), int(grid_r.max()), int(grid_r.size)],
        "search": search,
        "evaluated": len(scored),
    }
    table = [(p, r, v) for (p, r), v in sorted(scored.items(), key=lambda kv: (kv[0][1], kv[0][0]))]
    return DUFit(p_star, r_star, float(scored[(p_star, r_star)]), float(sigma), m_samples, grid,
                 metric, table)
