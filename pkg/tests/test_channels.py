import numpy as np
import pytest
from hypothesis import given, strategies as st

from nisqspec import channels as ch
from nisqspec import numerics as nx
from nisqspec.errors import NotTracePreserving, NotUnitary, ShapeMismatch

from conftest import random_density, random_kraus


def random_params(d, r, seed):
    return ch.ParamVector(nx.as_rng(seed).standard_normal(ch.theta_size(d, r)), d, r)


@given(st.integers(0, 10**6), st.sampled_from([(2, 1), (2, 4), (4, 1), (4, 3), (4, 16)]))
def test_params_give_trace_preserving_maps(seed, dr):
    d, r = dr
    m = ch.params_to_kraus(random_params(d, r, seed))
    assert m.tp_error() < 1e-10
    rho = random_density(d, seed)
    out = ch.apply(m, rho)
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.linalg.eigvalsh(out).min() > -1e-12
    assert np.allclose(out, out.conj().T)


def test_param_vector_length_checked():
    with pytest.raises(ShapeMismatch):
        ch.ParamVector(np.zeros(5), 2, 1)


def test_kraus_to_params_roundtrip():
    m = ch.KrausMap(random_kraus(4, 3, 1))
    back = ch.params_to_kraus(ch.kraus_to_params(m))
    assert np.allclose(back.kraus, m.kraus, atol=1e-12)


def test_non_tp_rejected():
    with pytest.raises(NotTracePreserving):
        ch.KrausMap(2 * np.eye(2)[None])
    with pytest.raises(NotUnitary):
        ch.unitary_channel(np.array([[1, 1], [0, 1]]))


def test_identity_and_unitary_action():
    rho = random_density(3, 0)
    assert np.allclose(ch.apply(ch.identity_map(3), rho), rho)
    u = nx.haar_unitary(3, 1)
    assert np.allclose(ch.apply(ch.unitary_channel(u), rho), u @ rho @ u.conj().T)


@pytest.mark.parametrize("p", [0.0, 0.4, 1.0])
def test_depolarizing_action_and_spectrum(p):
    m = ch.depolarizing(p)
    rho = random_density(2, 3)
    assert np.allclose(ch.apply(m, rho), (1 - p) * rho + p * np.eye(2) / 2)
    spec = ch.spectrum(m)
    assert np.allclose(spec.values, [1, 1 - p, 1 - p, 1 - p], atol=1e-12)


def test_two_qubit_depolarizing_is_product():
    spec = np.sort(ch.spectrum(ch.depolarizing(0.3, 2)).values.real)
    assert np.allclose(spec, np.sort(np.kron([1, 0.7, 0.7, 0.7], [1, 0.7, 0.7, 0.7])))


def test_superop_matches_action():
    m = ch.KrausMap(random_kraus(3, 2, 5))
    rho = random_density(3, 6)
    assert np.allclose(ch.to_superop(m) @ nx.vec(rho), nx.vec(ch.apply(m, rho)))


def test_choi_is_psd_and_roundtrips():
    m = ch.KrausMap(random_kraus(4, 3, 2))
    j = ch.to_choi(m)
    assert np.linalg.eigvalsh(j).min() > -1e-12
    back = ch.from_choi(j, 4)
    assert back.r == 3
    assert np.allclose(ch.to_superop(back), ch.to_superop(m))


def test_compose_matches_superop_product():
    a = ch.KrausMap(random_kraus(2, 3, 7))
    b = ch.KrausMap(random_kraus(2, 4, 8))
    ab = ch.compose(a, b)
    assert ab.r <= 4 and ab.tp_error() < 1e-10
    assert np.allclose(ch.to_superop(ab), ch.to_superop(b) @ ch.to_superop(a))
    rho = random_density(2, 9)
    assert np.allclose(ch.apply(ab, rho), ch.apply(b, ch.apply(a, rho)))


def test_left_unitary_gauge_mixes_kraus_but_keeps_channel():
    d, r = 2, 3
    theta = random_params(d, r, 11)
    g = ch.theta_to_g(theta.theta, d, r)
    v = nx.haar_unitary(r, 12)
    g2 = np.kron(v, np.eye(d)) @ g
    m1 = ch.params_to_kraus(theta)
    m2 = ch.params_to_kraus(ch.ParamVector(ch.g_to_theta(g2), d, r))
    assert not np.allclose(m1.kraus, m2.kraus)
    assert np.abs(ch.to_superop(m1) - ch.to_superop(m2)).max() < 1e-12


def test_right_triangular_gauge_keeps_kraus():
    d, r = 4, 2
    theta = random_params(d, r, 13)
    g = ch.theta_to_g(theta.theta, d, r)
    t = np.triu(nx.ginibre(d, d, 14))
    t[np.diag_indices(d)] = np.abs(np.diag(t)) + 0.5
    m1 = ch.params_to_kraus(theta)
    m2 = ch.params_to_kraus(ch.ParamVector(ch.g_to_theta(g @ t), d, r))
    assert np.abs(m1.kraus - m2.kraus).max() < 1e-12


def test_right_unitary_changes_the_channel():
    # G -> G V precomposes the channel with a unitary, so it is not a gauge
    d, r = 2, 2
    theta = random_params(d, r, 15)
    g = ch.theta_to_g(theta.theta, d, r)
    v = nx.haar_unitary(d, 16)
    m1 = ch.params_to_kraus(theta)
    m2 = ch.params_to_kraus(ch.ParamVector(ch.g_to_theta(g @ v), d, r))
    assert np.abs(ch.to_superop(m1) - ch.to_superop(m2)).max() > 1e-3
    # the extra factor is a unitary acting first
    _, rr = nx.qr_positive(g)
    q, _ = nx.qr_positive(rr @ v)
    pre = ch.unitary_channel(q)
    assert np.allclose(ch.to_superop(m2), ch.to_superop(ch.compose(pre, m1)))


def test_spectrum_ordering():
    s = ch.Spectrum(np.array([0.5, 1.0, 0.2 + 0.3j, 0.2 - 0.3j, -0.5]))
    assert s.values[0] == 1.0
    assert s.values[1] == 0.5 and s.values[2] == -0.5
    assert s.values[3] == 0.2 + 0.3j and s.values[4] == 0.2 - 0.3j
    assert np.array_equal(s.bulk, s.values[1:])
    assert len(s) == 5


@pytest.mark.parametrize("d,r", [(2, 1), (4, 4), (8, 2)])
def test_spectrum_structure(d, r):
    for seed in range(10):
        spec = ch.spectrum(ch.KrausMap(random_kraus(d, r, seed)))
        v = spec.values
        assert abs(v[0] - 1) < 1e-8
        assert np.abs(v).max() <= 1 + 1e-8
        assert ch.conjugation_mismatch(v) < 1e-8


def test_conjugation_mismatch_detects_asymmetry():
    assert ch.conjugation_mismatch(np.array([1, 0.5j, -0.5j])) < 1e-14
    assert ch.conjugation_mismatch(np.array([1, 0.5j, 0.3])) > 0.1
