import numpy as np
import pytest

from nisqspec import channels as ch
from nisqspec import ensembles as en
from nisqspec import numerics as nx
from nisqspec.errors import NotCP

SZ = np.diag([1.0, -1.0]).astype(complex)


def dephasing_generator(gamma):
    # L(rho) = gamma (Z rho Z - rho), column-stacked
    return gamma * (np.kron(SZ.conj(), SZ) - np.eye(4))


def choi_of_jump(k):
    v = nx.vec(k)
    return np.outer(v.conj(), v)


def test_dephasing_generator_matches_closed_form():
    gamma = 0.35
    lind = en.lindbladian_from_parts(np.zeros((2, 2)), choi_of_jump(np.sqrt(gamma) * SZ), 0.0)
    assert np.allclose(lind, dephasing_generator(gamma), atol=1e-14)
    s, m = en.lindblad_map(lind, 1.0)
    want = np.sort([1, 1, np.exp(-2 * gamma), np.exp(-2 * gamma)])
    assert np.allclose(np.sort(np.linalg.eigvals(s).real), want)
    rho = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])
    out = ch.apply(m, rho)
    assert np.allclose(np.diag(out), np.diag(rho))
    assert np.isclose(out[0, 1], rho[0, 1] * np.exp(-2 * gamma))


def test_amplitude_damping_generator():
    # jump sigma_minus: the excited population decays as exp(-gamma t)
    gamma = 0.8
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    lind = en.lindbladian_from_parts(np.zeros((2, 2)), choi_of_jump(np.sqrt(gamma) * lower), 0.0)
    _, m = en.lindblad_map(lind, 1.0)
    out = ch.apply(m, np.diag([0.0, 1.0]))
    assert np.isclose(out[1, 1].real, np.exp(-gamma))


def test_hamiltonian_generator_is_unitary():
    h = en.gue(3, 1)
    lind = en.lindbladian_from_parts(h, np.zeros((9, 9)), 1.0)
    s, m = en.lindblad_map(lind, 0.7)
    assert np.allclose(np.abs(np.linalg.eigvals(s)), 1.0)
    u = nx.matrix_exp(-0.7j * h)
    rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
    assert np.allclose(ch.apply(m, rho), u @ rho @ u.conj().T)


def test_beta_zero_is_identity():
    lind = en.random_lindbladian(en.LindbladParams(4, 3, 1.0, 0.1, 2))
    s, m = en.lindblad_map(lind, 0.0)
    assert np.allclose(s, np.eye(16))
    assert np.allclose(ch.to_superop(m), np.eye(16))


def test_minus_sign_would_break_trace_annihilation():
    d = 2
    g = nx.ginibre(4, 2, 3)
    phi = g @ g.conj().T
    m = nx.partial_trace_B(phi, d)
    eye = np.eye(d)
    minus = nx.reshuffle(phi, d) - 0.5 * (np.kron(m.T, eye) - np.kron(eye, m))
    assert en.trace_annihilation_error(minus) > 1e-3
    assert en.trace_annihilation_error(en.lindbladian_from_parts(np.zeros((2, 2)), phi, 0.0)) < 1e-12


def test_random_lindbladians_are_valid():
    sets = [(8,) + (r, a, b) for a, b, r in en.BENCHMARK_SETS]
    rng = np.random.default_rng(0)
    for k in range(100):
        if k < len(sets):
            d, r, a, b = sets[k]
        else:
            d = int(rng.choice([2, 4]))
            r = int(rng.integers(1, d * d + 1))
            a, b = float(10 ** rng.uniform(-1, 2)), float(10 ** rng.uniform(-3, 0))
        lind = en.random_lindbladian(en.LindbladParams(d, r, a, b, k))
        assert en.trace_annihilation_error(lind) < 1e-10 * max(1.0, a)
        s, m = en.lindblad_map(lind, b)
        assert np.linalg.eigvalsh(nx.unreshuffle(s, d)).min() > -1e-6
        assert m.tp_error() < 1e-9
        spec = ch.spectrum(m)
        assert abs(spec.values[0] - 1) < 1e-8


def test_lindblad_map_rejects_non_cp():
    # a generator with a negative dissipator is not completely positive
    g = nx.ginibre(4, 1, 1)
    lind = en.lindbladian_from_parts(np.zeros((2, 2)), -(g @ g.conj().T), 0.0)
    with pytest.raises(NotCP):
        en.lindblad_map(lind, 1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        en.LindbladParams(2, 5, 1.0, 0.1)
    with pytest.raises(ValueError):
        en.DUParams(4, 1.0, 2)
    with pytest.raises(ValueError):
        en.DUParams(4, 0.5, 17)


def test_du_radii_examples():
    assert en.du_radii(0.0, 3) == (1.0, 1.0)
    r_minus, r_plus = en.du_radii(0.71, 23)
    assert r_plus == pytest.approx(0.3256, abs=1e-4) and r_minus == pytest.approx(0.2494, abs=1e-4)
    r_minus, r_plus = en.du_radii(0.9, 1)
    assert r_minus is None and r_plus == pytest.approx(0.9055, abs=1e-4)
    assert en.du_radii(0.5, 1)[0] == 0.0


def test_du_sample_structure():
    m = en.sample_diluted_unitary(en.DUParams(4, 0.3, 3), 5)
    assert m.r == 4 and m.tp_error() < 1e-10
    spec = ch.spectrum(m)
    assert abs(spec.values[0] - 1) < 1e-8 and ch.conjugation_mismatch(spec.values) < 1e-8
    tiny = en.sample_diluted_unitary(en.DUParams(4, 1e-9, 2), 6)
    assert np.allclose(np.abs(ch.spectrum(tiny).values), 1.0, atol=1e-6)


def test_du_parts_reproduce_sample():
    d, r, p = 4, 3, 0.37
    a, b = en.du_superop_parts(d, r, 9)
    direct = ch.to_superop(en.sample_diluted_unitary(en.DUParams(d, p, r), 9))
    got = np.sort_complex(np.round(np.linalg.eigvals((1 - p) * a + p * b), 9))
    want = np.sort_complex(np.round(np.linalg.eigvals(direct), 9))
    assert np.allclose(got, want, atol=1e-8)
    a_c, b_c = en.du_superop_parts(d, r, 9, hermitian_basis=False)
    assert np.allclose((1 - p) * a_c + p * b_c, direct)


def test_du_radii_empirical_d16():
    p, r = 0.3, 4
    r_minus, r_plus = en.du_radii(p, r)
    mx, mn = [], []
    for seed in range(5):
        bulk = ch.spectrum(en.sample_diluted_unitary(en.DUParams(16, p, r), seed)).bulk
        mx.append(np.abs(bulk).max())
        mn.append(np.abs(bulk).min())
    assert abs(np.mean(mx) / r_plus - 1) < 0.1
    assert abs(np.mean(mn) / r_minus - 1) < 0.2
