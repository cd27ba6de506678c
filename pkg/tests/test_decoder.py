from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from haarqec.codes import CodeSample, read_matrix, sample_haar_isometry, shifted_basis_matrix
from haarqec.decoder import (
    NondegenerateRankError,
    build_decoder,
    decode_density,
    decode_pure_with_syndrome,
    write_decoder,
)
from haarqec.errorsets import from_operators, gen_erasure_set, gen_weight_set
from haarqec.operators import MonomialOperator, to_dense

PAULI_IX = from_operators([MonomialOperator.identity(2), MonomialOperator(np.array([1, 0]), np.ones(2))])


def exact_code():
    """Exactly nondegenerate two-dimensional code for Paulis on qubit 0 of 4.

    Codeword ``j`` is a Bell pair on qubits (0, 1), ``|j>`` on qubit 2 and
    ``|0>`` on qubit 3; the four Paulis on qubit 0 send the Bell pair to the
    four Bell states, so the shifted basis spans the qubit-3 = 0 half.
    """
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    V = np.stack([np.kron(bell, [1, 0, 0, 0]), np.kron(bell, [0, 0, 1, 0])], axis=1).astype(complex)
    return CodeSample(16, 2, V), gen_erasure_set(4, [0])


def test_toy_decoder_maps_shifted_basis():
    s = CodeSample(2, 1, np.array([[1.0], [0.0]], dtype=complex))
    dec = build_decoder(s, PAULI_IX)
    # E_i|v_j> -> |j>|i>: |0> -> row 0, |1> = X|0> -> row 1
    np.testing.assert_allclose(dec.D, np.eye(2), atol=1e-15)
    assert dec.delta_cert == 0.0
    assert dec.dims == (2, 1, 2)


def test_identity_set_decoder_is_V_dagger():
    s = sample_haar_isometry(12, 3, 0)
    dec = build_decoder(s, from_operators([np.eye(12)]))
    np.testing.assert_allclose(dec.D, s.V.conj().T, atol=1e-12)


def test_degenerate_code_raises():
    s = CodeSample(2, 1, (np.array([[1.0], [1.0]]) / np.sqrt(2)).astype(complex))
    with pytest.raises(NondegenerateRankError):
        build_decoder(s, PAULI_IX)
    with pytest.raises(NondegenerateRankError):
        build_decoder(sample_haar_isometry(8, 1, 0), gen_weight_set(3, 1, 2))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(1, 3), t=st.integers(0, 1))
def test_decoder_invariants(seed, K, t):
    es = gen_erasure_set(7, range(t))
    s = sample_haar_isometry(128, K, seed)
    dec = build_decoder(s, es)
    Km = K * es.m
    np.testing.assert_allclose(dec.D @ dec.D.conj().T, np.eye(Km), atol=1e-8)
    P = dec.domain_projector
    np.testing.assert_allclose(P, P.conj().T, atol=1e-12)
    np.testing.assert_allclose(P @ P, P, atol=1e-8)
    assert np.trace(P).real == pytest.approx(Km, abs=1e-8)
    D_hat = shifted_basis_matrix(s, es).conj().T
    np.testing.assert_allclose(dec.D_hat, D_hat)
    ref, r = oracles.svd_round(D_hat)
    assert r == Km
    np.testing.assert_allclose(dec.D, ref, atol=1e-10)
    assert np.linalg.norm(dec.D_hat - dec.D, 2) <= dec.delta_cert + 1e-8


def test_decode_density_exact_code(rng):
    s, es = exact_code()
    dec = build_decoder(s, es)
    assert dec.delta_cert <= 1e-15
    phi = oracles.random_state(2, rng)
    enc = s.V @ phi
    for E in es:
        psi = to_dense(E) @ enc
        out = decode_density(dec, np.outer(psi, psi.conj()))
        np.testing.assert_allclose(out, np.outer(phi, phi.conj()), atol=1e-10)


def test_decode_outside_image_gives_maximally_mixed():
    s, es = exact_code()
    dec = build_decoder(s, es)
    P = dec.domain_projector
    w, U = np.linalg.eigh(np.eye(16) - P)
    u = U[:, -1]
    out = decode_density(dec, np.outer(u, u.conj()))
    np.testing.assert_allclose(out, np.eye(2) / 2, atol=1e-12)


def test_decode_density_is_cptp(rng):
    s = sample_haar_isometry(64, 2, 5)
    dec = build_decoder(s, gen_erasure_set(6, [0]))
    for _ in range(10):
        rho = oracles.random_density(64, rng, rank=int(rng.integers(1, 64)))
        out = decode_density(dec, rho)
        assert np.trace(out).real == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(out, out.conj().T, atol=1e-12)
        assert np.linalg.eigvalsh(out)[0] >= -1e-10
        np.testing.assert_allclose(out, oracles.decode_map_linear(dec.D, 2, 4, rho), atol=1e-12)
    # complete positivity: the Choi matrix of the linear map is PSD
    choi = np.zeros((2 * 64, 2 * 64), dtype=complex)
    for a in range(64):
        for b in range(64):
            Eab = np.zeros((64, 64))
            Eab[a, b] = 1
            choi += np.kron(oracles.decode_map_linear(dec.D, 2, 4, Eab), Eab)
    assert np.linalg.eigvalsh(choi)[0] >= -1e-10


def test_decode_density_rejects_bad_input():
    s, es = exact_code()
    dec = build_decoder(s, es)
    with pytest.raises(ValueError):
        decode_density(dec, np.eye(16))
    with pytest.raises(ValueError):
        decode_density(dec, np.diag([1.5, -0.5] + [0] * 14))
    with pytest.raises(ValueError):
        decode_density(dec, np.eye(4) / 4)


def test_pure_decoding_with_syndrome(rng):
    s, es = exact_code()
    dec = build_decoder(s, es)
    phi = oracles.random_state(2, rng)
    out = decode_pure_with_syndrome(dec, to_dense(es[1]) @ (s.V @ phi))
    expect = np.zeros((2, 4, 1), dtype=complex)
    expect[:, 1, 0] = phi
    np.testing.assert_allclose(out, expect, atol=1e-12)
    u = np.zeros(16)
    u[1] = 1  # qubit 3 set: orthogonal to every E_i V
    assert np.linalg.norm(decode_pure_with_syndrome(dec, u)) <= 1e-12


def test_pure_decoding_norm_band(rng):
    s = sample_haar_isometry(256, 2, 3)
    es = gen_erasure_set(8, [0, 1])
    dec = build_decoder(s, es)
    delta = dec.delta_cert
    assert 0 < delta < 1
    for _ in range(10):
        phi = oracles.random_state(2 * 3, rng).reshape(2, 3)
        i = int(rng.integers(es.m))
        psi = (to_dense(es[i]) @ s.V @ phi).ravel()
        nrm = np.linalg.norm(decode_pure_with_syndrome(dec, psi))
        assert 1 - delta - 1e-12 <= nrm <= 1 + 1e-12
    with pytest.raises(ValueError):
        decode_pure_with_syndrome(dec, np.ones(256))


def test_write_decoder(tmp_path):
    s, es = exact_code()
    dec = build_decoder(s, es)
    write_decoder(dec, tmp_path / "d.bin")
    np.testing.assert_array_equal(read_matrix(tmp_path / "d.bin"), dec.D)
