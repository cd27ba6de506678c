from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from haarqec.codes import CodeSample, sample_haar_isometry
from haarqec.decoder import build_decoder
from haarqec.errorsets import gen_erasure_set
from haarqec.metrics import (
    disturbance_report,
    entangled_disturbance,
    entangled_output,
    lemma_residual,
    partial_trace,
    pure_state_trace_norm,
    random_bipartite_state,
    trace_norm,
)
from haarqec.noise import depolarizing_erasure, identity_channel, mixture_channel, random_local_channel
from haarqec.operators import to_dense


def exact_code():
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    V = np.stack([np.kron(bell, [1, 0, 0, 0]), np.kron(bell, [0, 0, 1, 0])], axis=1).astype(complex)
    return CodeSample(16, 2, V), gen_erasure_set(4, [0])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 12))
def test_pure_state_trace_norm_formula(seed, N):
    r = np.random.default_rng(seed)
    u, v = oracles.random_state(N, r), oracles.random_state(N, r)
    got = pure_state_trace_norm(u, v)
    dense = np.sum(np.abs(np.linalg.eigvalsh(np.outer(u, u.conj()) - np.outer(v, v.conj()))))
    assert got == pytest.approx(dense, abs=1e-10)
    overlap = abs(np.vdot(u, v)) ** 2
    if overlap < 1 - 1e-6:  # the closed form cancels catastrophically beyond this
        assert got == pytest.approx(2 * np.sqrt(1 - overlap), abs=1e-10)
    w = u * np.exp(0.3j)
    assert pure_state_trace_norm(u, w) <= 1e-12
    assert pure_state_trace_norm(u, v) <= 2 * np.linalg.norm(u - v) + 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dA=st.integers(1, 4), dB=st.integers(1, 4))
def test_partial_trace_and_monotonicity(seed, dA, dB):
    r = np.random.default_rng(seed)
    rho = oracles.random_density(dA * dB, r)
    sigma = oracles.random_density(dA * dB, r)
    np.testing.assert_allclose(partial_trace(rho, (dA, dB), (0,)), oracles.partial_trace_loops(rho, dA, dB, "A"), atol=1e-14)
    np.testing.assert_allclose(partial_trace(rho, (dA, dB), (1,)), oracles.partial_trace_loops(rho, dA, dB, "B"), atol=1e-14)
    diff = rho - sigma
    assert trace_norm(partial_trace(diff, (dA, dB), (0,))) <= trace_norm(diff) + 1e-12
    assert trace_norm(diff) == pytest.approx(np.sum(np.linalg.svd(diff, compute_uv=False)), abs=1e-12)


def test_partial_trace_three_parties(rng):
    rho = oracles.random_density(2 * 3 * 2, rng)
    keep02 = partial_trace(rho, (2, 3, 2), (0, 2))
    t = rho.reshape(2, 3, 2, 2, 3, 2)
    np.testing.assert_allclose(keep02, np.einsum("abcdbf->acdf", t).reshape(4, 4), atol=1e-14)
    assert partial_trace(rho, (2, 3, 2), ()).item() == pytest.approx(1.0)


@pytest.mark.parametrize("kind", ["identity", "mixture", "local"])
def test_exact_code_zero_residual(kind, rng):
    s, es = exact_code()
    dec = build_decoder(s, es)
    if kind == "identity":
        ch = identity_channel(es)
    elif kind == "mixture":
        ch = mixture_channel(es, rng.dirichlet(np.ones(4)))
    else:
        ch = random_local_channel(4, [0], 2, 3, seed=5)
    for _ in range(5):
        phi = random_bipartite_state(2, 3, rng)
        assert lemma_residual(s, dec, ch, phi) <= 1e-10
    assert entangled_disturbance(s, dec, ch) <= 1e-10


def test_residual_register_order(rng):
    s, es = exact_code()
    dec = build_decoder(s, es)
    ch = mixture_channel(es, [0, 0, 1, 0])
    phi = random_bipartite_state(2, 2, rng)
    # a single error E_3 with coefficient 1 must land on syndrome 2, environment 0
    assert lemma_residual(s, dec, ch, phi) <= 1e-12
    assert lemma_residual(s, dec, ch, phi.ravel()) <= 1e-12


def haar_instance(seed=11):
    s = sample_haar_isometry(256, 2, seed)
    es = gen_erasure_set(8, [0, 1])
    return s, es, build_decoder(s, es)


def test_haar_residuals_below_delta():
    s, es, dec = haar_instance()
    delta = dec.delta_cert
    assert 0 < delta < 0.5
    r = np.random.default_rng(3)
    worst = 0.0
    for k in range(100):
        ch = random_local_channel(8, [0, 1], 2, int(r.integers(1, 17)), seed=k) if k % 2 else mixture_channel(
            es, r.dirichlet(np.ones(es.m))
        )
        phi = random_bipartite_state(2, 2, r)
        worst = max(worst, lemma_residual(s, dec, ch, phi))
    assert worst <= delta + 1e-8


@pytest.mark.parametrize("kind", ["mixture", "local", "depolarize"])
def test_entangled_output_matches_choi_oracle(kind, rng):
    s = sample_haar_isometry(64, 2, 8)
    es = gen_erasure_set(6, [0])
    dec = build_decoder(s, es)
    if kind == "mixture":
        ch = mixture_channel(es, rng.dirichlet(np.ones(4)))
    elif kind == "local":
        ch = random_local_channel(6, [0], 2, 2, seed=1)
    else:
        ch = depolarizing_erasure(6, [0])
    ref = oracles.entangled_output_choi(s.V, [to_dense(K) for K in ch.kraus], dec.D, es.m)
    out = entangled_output(s, dec, ch)
    np.testing.assert_allclose(out, ref, atol=1e-12)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
    target = np.eye(2).ravel() / np.sqrt(2)
    dist = entangled_disturbance(s, dec, ch)
    assert dist == pytest.approx(oracles.half_trace_distance(ref, np.outer(target, target)), abs=1e-10)
    assert dist <= dec.delta_cert + 1e-8


def test_report_exact_code_all_zero():
    s, es = exact_code()
    dec = build_decoder(s, es)
    rep = disturbance_report(s, dec, identity_channel(es), 10, seed=0)
    assert rep.lemma_residual_max <= 1e-12
    assert rep.entangled_trace_dist <= 1e-12
    assert rep.upper_bound <= 1e-15
    assert rep.num_states == 11
    assert not rep.clamped


def test_report_ordering_and_determinism():
    s, es, dec = haar_instance(4)
    ch = depolarizing_erasure(8, [0, 1])
    a = disturbance_report(s, dec, ch, 20, seed=5, provenance={"seed": 4})
    b = disturbance_report(s, dec, ch, 20, seed=5, provenance={"seed": 4})
    assert a == b
    assert a.entangled_trace_dist <= a.upper_bound + 1e-8
    assert a.lemma_residual_max <= a.upper_bound + 1e-8
    assert 0 <= a.entangled_trace_dist <= 1
    assert a.to_dict()["provenance"] == {"seed": 4}


def test_mismatched_inputs_rejected():
    s, es, dec = haar_instance()
    other = identity_channel(gen_erasure_set(8, [0]))
    with pytest.raises(ValueError):
        lemma_residual(s, dec, other, np.eye(2) / np.sqrt(2))
    with pytest.raises(ValueError):
        lemma_residual(s, dec, identity_channel(es), np.ones(3) / np.sqrt(3))
