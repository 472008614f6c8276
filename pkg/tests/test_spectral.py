import numpy as np
import pytest
from hypothesis import given, strategies as st

from nisqspec import channels as ch
from nisqspec import ensembles as en
from nisqspec import numerics as nx
from nisqspec import spectral as sd
from nisqspec.errors import DegenerateSpectrum, SizeMismatch


def brute_nn(z):
    dist = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(dist, np.inf)
    return dist.min(axis=1).mean()


def kde_on_grid(cloud, sigma, xx, yy):
    # sum of width-sigma Gaussians, each integrating to 1/N
    out = np.zeros_like(xx)
    for z in cloud:
        out += np.exp(-((xx - z.real) ** 2 + (yy - z.imag) ** 2) / (2 * sigma ** 2))
    return out / (2 * np.pi * sigma ** 2 * cloud.size)


def quadrature_sd(a, b, sigma):
    pts = np.concatenate([a, b])
    lo = min(pts.real.min(), pts.imag.min()) - 9 * sigma
    hi = max(pts.real.max(), pts.imag.max()) + 9 * sigma
    x = np.linspace(lo, hi, 1201)
    xx, yy = np.meshgrid(x, x)
    diff = kde_on_grid(a, sigma, xx, yy) - kde_on_grid(b, sigma, xx, yy)
    h = x[1] - x[0]
    return float(np.sum(diff ** 2) * h * h)


def test_kde_sigma_examples():
    assert sd.kde_sigma(np.array([0, 0.1])) == pytest.approx(0.1)
    grid = np.array([complex(i, j) * 0.05 for i in range(4) for j in range(3)])
    assert sd.kde_sigma(grid) == pytest.approx(0.05)
    z = nx.ginibre(15, 1, 3).ravel()
    assert sd.kde_sigma(z) == pytest.approx(brute_nn(z), rel=1e-14)
    with pytest.raises(DegenerateSpectrum):
        sd.kde_sigma(np.array([0.3, 0.3]))
    with pytest.raises(DegenerateSpectrum):
        sd.kde_sigma(np.array([0.3]))


def test_kde_sigma_excludes_leading_eigenvalue():
    spec = ch.Spectrum(np.array([1.0, 0.5, 0.4, 0.2]))
    assert sd.kde_sigma(spec) == pytest.approx(brute_nn(np.array([0.5, 0.4, 0.2])))


@given(st.integers(0, 10**6), st.integers(2, 40))
def test_kde_sigma_matches_brute_force(seed, n):
    z = nx.ginibre(n, 1, seed).ravel()
    assert sd.kde_sigma(z) == pytest.approx(brute_nn(z), rel=1e-12)


def test_singleton_closed_form():
    sigma, x = 0.3, 0.4 + 0.2j
    s2 = 2 * sigma ** 2  # sigma' squared
    want = 2 * (1 - np.exp(-abs(x) ** 2 / (2 * s2))) / (2 * np.pi * s2)
    got = sd.spectral_distance(np.array([0]), np.array([x]), sigma)
    assert got == pytest.approx(want, rel=1e-12)
    assert quadrature_sd(np.array([0j]), np.array([x]), sigma) == pytest.approx(want, abs=1e-8)


def test_matches_quadrature_on_random_clouds():
    rng = np.random.default_rng(0)
    for k in range(5):
        n = int(rng.integers(2, 6))
        a, b = nx.ginibre(n, 1, rng).ravel() * 0.3, nx.ginibre(n, 1, rng).ravel() * 0.3
        sigma = float(rng.uniform(0.1, 0.3))
        assert abs(sd.spectral_distance(a, b, sigma) - quadrature_sd(a, b, sigma)) < 1e-6


@given(st.integers(0, 10**6), st.integers(1, 12), st.floats(0.01, 2.0))
def test_sd_properties(seed, n, sigma):
    a, b = nx.ginibre(n, 1, seed).ravel(), nx.ginibre(n, 1, seed + 1).ravel()
    assert sd.spectral_distance(a, a, sigma) == pytest.approx(0.0, abs=1e-12 / sigma ** 2)
    assert sd.spectral_distance(a, b, sigma) == sd.spectral_distance(b, a, sigma)
    assert sd.spectral_distance(a, b, sigma) >= 0.0
    # permutation invariance of the multiset
    assert sd.spectral_distance(a[::-1], b, sigma) == pytest.approx(sd.spectral_distance(a, b, sigma), abs=1e-12)


def test_sd_errors():
    with pytest.raises(SizeMismatch):
        sd.spectral_distance(np.zeros(2), np.zeros(3), 0.1)
    with pytest.raises(ValueError):
        sd.spectral_distance(np.zeros(2), np.zeros(2), 0.0)


def test_wasserstein():
    a = np.array([0, 1j, 1])
    assert sd.wasserstein2(a, a[::-1]) == 0.0
    assert sd.wasserstein2(a, a + 0.5) == pytest.approx(0.5)


def test_radii_and_classification():
    assert sd.radii_empirical(ch.spectrum(ch.identity_map(2))) == pytest.approx((1, 1))
    assert sd.radii_empirical(ch.spectrum(ch.depolarizing(0.4))) == pytest.approx((0.6, 0.6))
    fit = sd.DUFit(0.71, 23, 0.0, 0.1, 1, {})
    assert sd.classify_support(fit) == "annulus"
    assert sd.classify_support(sd.DUFit(0.9, 1, 0.0, 0.1, 1, {})) == "disc"
    assert sd.classify_support(sd.DUFit(0.0, 1, 0.0, 0.1, 1, {})) == "annulus"
    out = fit.to_dict()
    assert out["support"] == "annulus" and out["r_minus"] == pytest.approx(0.2494, abs=1e-4)


def test_cache_matches_direct_spectra():
    cache = sd.DUSpectraCache()
    d, p, r = 4, 0.4, 3
    got = np.sort_complex(np.round(cache.bulk(d, p, r, 0, 11), 9))
    m = en.sample_diluted_unitary(en.DUParams(d, p, r), nx.derive_rng(11, r, 0))
    want = np.sort_complex(np.round(ch.spectrum(m).bulk, 9))
    assert np.allclose(got, want, atol=1e-8)
    assert cache.bulk(d, p, r, 0, 11) is cache.bulk(d, p, r, 0, 11)


def test_fit_du_unitary_spectrum_picks_smallest_p():
    spec = ch.spectrum(ch.unitary_channel(nx.haar_unitary(4, 1)))
    fit = sd.fit_du(spec, 4, grid_p=[0.05, 0.2, 0.5, 0.8], grid_r=[1, 4, 16], m_samples=2, seed=1)
    assert fit.p_star == 0.05
    assert fit.grid["evaluated"] == 12 and len(fit.table) == 12


def test_fit_du_recovers_small_instance_and_is_deterministic():
    truth = en.sample_diluted_unitary(en.DUParams(8, 0.5, 4), 123)
    spec = ch.spectrum(truth)
    kw = dict(grid_p=np.arange(0.1, 1.0, 0.1), grid_r=[1, 2, 4, 8, 16, 32], m_samples=1, seed=5)
    a = sd.fit_du(spec, 8, **kw)
    b = sd.fit_du(spec, 8, **kw)
    assert (a.p_star, a.r_star, a.sd_star) == (b.p_star, b.r_star, b.sd_star)
    assert abs(a.p_star - 0.5) <= 0.1 + 1e-9
    refine = sd.fit_du(spec, 8, search="refine", **kw)
    assert refine.grid["evaluated"] <= a.grid["evaluated"]
    w2 = sd.fit_du(spec, 8, metric="w2", **kw)
    assert w2.metric == "w2" and abs(w2.p_star - 0.5) <= 0.2 + 1e-9


def test_fit_du_errors():
    spec = ch.spectrum(ch.identity_map(2))
    with pytest.raises(SizeMismatch):
        sd.fit_du(spec, 4)
    with pytest.raises(ValueError):
        sd.fit_du(ch.spectrum(ch.depolarizing(0.3)), 2, metric="kl")
    with pytest.raises(ValueError):
        sd.fit_du(ch.spectrum(ch.depolarizing(0.3)), 2, search="anneal", sigma=0.1)
