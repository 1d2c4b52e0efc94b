"""Smoke tests for the permfl extension module."""

import numpy as np
import pytest

import permfl


def test_problem_and_gradient():
    p = permfl.generate_problem(seed=1, d=20, n=2, n_i=3, l_target=10.0)
    assert p.d == 20 and p.n == 2
    assert p.l_smooth == pytest.approx(10.0)
    xf = p.x_fixed
    assert xf is not None
    f, gn = permfl.objective_and_gradnorm(p, xf)
    assert f == 0.0 and gn == 0.0
    g = permfl.gradient(p, 0, np.zeros(20))
    assert g.shape == (20,)
    assert np.linalg.norm(g) > 0


def test_permk_round_trip_is_owner_scatter():
    d, n = 12, 4
    a = permfl.sample_assignment(d, n, seed=7, round=0)
    owners = a.owners()
    rng = np.random.default_rng(0)
    vs = [rng.standard_normal(d) for _ in range(n)]
    chunks = [permfl.compress_permk(vs[i], a, i) for i in range(n)]
    est = permfl.assemble(chunks, d, n, require_disjoint=True)
    expect = np.array([vs[owners[j]][j] for j in range(d)])
    assert est == pytest.approx(expect, rel=1e-15)


def test_envelope_round_trip_and_tamper():
    key = permfl.keygen(seed=5)
    env = permfl.seal(key, round=3, client=1, payload=b"hello gradients")
    assert env.round == 3 and env.client == 1
    assert permfl.open(key, env) == b"hello gradients"
    other = permfl.keygen(seed=6)
    assert permfl.open(other, env) is None


def test_run_experiment_converges():
    p = permfl.generate_problem(seed=1, d=40, n=4, n_i=3, l_target=10.0, spectrum="exact")
    r = permfl.run_experiment(p, algorithm="dcgd_permk_aes", gamma=0.03, rounds=1500,
                              key_seed=9)
    assert not r["diverged"]
    assert r["replicas_identical"]
    assert r["grad_norm_sq"][-1] < 1e-12
    assert r["up_bytes_total"][0] > 0


def test_byte_model_matches_reported_sizes():
    assert permfl.nominal_message_bytes(11181642, "fp32", False) == 44726568
    assert permfl.nominal_message_bytes(1118165, "fp32", True) == 4472692
    assert permfl.ckks_key_size_bytes() == 430080
    assert permfl.ckks_ciphertext_bytes(1000) == 860160
    assert permfl.aes_envelope_bytes(1000) == 8032


def test_schedule_scenario_ordering():
    gd = permfl.schedule_scenario("gd", rounds=2)
    pk = permfl.schedule_scenario("dcgd_permk_aes", rounds=2)
    assert gd["refined_makespan_s"] < gd["naive_makespan_s"]
    assert pk["refined_makespan_s"] < pk["naive_makespan_s"]
    assert pk["dot_naive"].startswith("digraph")
