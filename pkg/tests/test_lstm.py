import math

import numpy as np
import pytest

from intercom.lstm import (
    NanError,
    bptt,
    finite_difference_gradients,
    gradient_check,
    init_params,
    lstm_forward,
    max_relative_error,
    mean_hidden,
    predict_prob,
)


def scalar_reference_forward(seq, params):
    """Independent step-by-step scalar implementation of the same cell."""
    w = params.weights
    d, h = params.input_dim, params.hidden_dim

    def sig(z):
        return 1.0 / (1.0 + math.exp(-z))

    hs = []
    h_prev = [0.0] * h
    c_prev = [0.0] * h
    for t in range(len(seq)):
        x = seq[t]
        h_new, c_new = [0.0] * h, [0.0] * h
        for r in range(h):
            zi = sum(w["w_i"][r][k] * x[k] for k in range(d)) \
                + sum(w["u_i"][r][k] * h_prev[k] for k in range(h)) + w["b_i"][r]
            zf = sum(w["w_f"][r][k] * x[k] for k in range(d)) \
                + sum(w["u_f"][r][k] * h_prev[k] for k in range(h)) + w["b_f"][r]
            zo = sum(w["w_o"][r][k] * x[k] for k in range(d)) \
                + sum(w["u_o"][r][k] * h_prev[k] for k in range(h)) + w["b_o"][r]
            zg = sum(w["w_g"][r][k] * x[k] for k in range(d)) \
                + sum(w["u_g"][r][k] * h_prev[k] for k in range(h)) + w["b_g"][r]
            c_new[r] = sig(zf) * c_prev[r] + sig(zi) * math.tanh(zg)
            h_new[r] = sig(zo) * math.tanh(c_new[r])
        hs.append(list(h_new))
        h_prev, c_prev = h_new, c_new
    return hs


def scalar_reference_prob(seq, params):
    hs = scalar_reference_forward(seq, params)
    T, h = len(hs), params.hidden_dim
    pooled = [sum(hs[t][r] for t in range(T)) / T for r in range(h)]
    z = sum(params.weights["theta"][r] * pooled[r] for r in range(h))
    return 1.0 / (1.0 + math.exp(-z))


def test_all_zero_params_zero_states():
    params = init_params(4, 3, seed=0)
    for key in params.weights:
        params.weights[key] = np.zeros_like(params.weights[key])
    hs = lstm_forward(np.ones((5, 4)), params)
    assert np.all(hs == 0.0)
    assert predict_prob(np.ones((5, 4)), params) == pytest.approx(0.5)


def test_causality_prefix():
    params = init_params(4, 3, seed=1)
    rng = np.random.default_rng(0)
    x1 = rng.normal(size=(1, 4))
    x2 = np.vstack([x1, rng.normal(size=(1, 4))])
    h_one = lstm_forward(x1, params)
    h_two = lstm_forward(x2, params)
    assert np.array_equal(h_one[0], h_two[0])


def test_forward_matches_scalar_reference():
    rng = np.random.default_rng(7)
    params = init_params(5, 4, seed=7)
    seq = rng.normal(size=(3, 5))
    ours = lstm_forward(seq, params)
    reference = scalar_reference_forward(seq.tolist(), params)
    assert np.max(np.abs(ours - np.array(reference))) < 1e-12


def test_predict_prob_matches_scalar_reference():
    rng = np.random.default_rng(8)
    params = init_params(4, 6, seed=8)
    seq = rng.normal(size=(5, 4))
    assert predict_prob(seq, params) == pytest.approx(
        scalar_reference_prob(seq.tolist(), params), abs=1e-12)


def test_theta_zero_gives_half():
    params = init_params(3, 4, seed=2)
    params.weights["theta"] = np.zeros(4)
    assert predict_prob(np.random.default_rng(0).normal(size=(4, 3)), params) == 0.5


def test_hidden_permutation_invariance():
    # permuting hidden units consistently across all parameters leaves y fixed
    rng = np.random.default_rng(3)
    params = init_params(3, 5, seed=3)
    seq = rng.normal(size=(4, 3))
    y = predict_prob(seq, params)
    perm = rng.permutation(5)
    permuted = params.copy()
    for gate in "ifog":
        permuted.weights[f"w_{gate}"] = params.weights[f"w_{gate}"][perm]
        permuted.weights[f"u_{gate}"] = params.weights[f"u_{gate}"][perm][:, perm]
        permuted.weights[f"b_{gate}"] = params.weights[f"b_{gate}"][perm]
    permuted.weights["theta"] = params.weights["theta"][perm]
    assert predict_prob(seq, permuted) == pytest.approx(y, abs=1e-14)


def test_palindrome_reversal_invariance():
    rng = np.random.default_rng(4)
    params = init_params(3, 4, seed=4)
    a, b = rng.normal(size=3), rng.normal(size=3)
    seq = np.vstack([a, b, a])
    reversed_seq = seq[::-1].copy()
    assert predict_prob(seq, params) == pytest.approx(
        predict_prob(reversed_seq, params), abs=1e-14)


def test_nan_input_raises_with_step():
    params = init_params(3, 3, seed=5)
    seq = np.zeros((4, 3))
    seq[2, 0] = np.nan
    with pytest.raises(NanError) as err:
        lstm_forward(seq, params)
    assert err.value.step == 2


def test_shape_mismatch_raises():
    params = init_params(3, 3, seed=0)
    with pytest.raises(ValueError):
        lstm_forward(np.zeros((4, 5)), params)


def test_gradient_check_small():
    rng = np.random.default_rng(11)
    for seed in (0, 1):
        params = init_params(4, 3, seed=seed)
        seq = rng.normal(size=(4, 4))
        assert gradient_check(params, (seq, 1)) < 1e-4
        assert gradient_check(params, (seq, 0)) < 1e-4


def test_gradient_check_minimal_sequence():
    params = init_params(3, 3, seed=9)
    seq = np.random.default_rng(9).normal(size=(3, 3))
    assert gradient_check(params, (seq, 1)) < 1e-4


def test_corrupted_forget_gate_detected():
    params = init_params(4, 3, seed=10)
    seq = np.random.default_rng(10).normal(size=(4, 4))
    _, analytic, _ = bptt(seq, 1, params)
    numeric = finite_difference_gradients(seq, 1, params)
    assert max_relative_error(analytic, numeric) < 1e-4
    analytic["w_f"] = analytic["w_f"] + 0.05
    assert max_relative_error(analytic, numeric) > 1e-2


def test_mean_hidden_matches_forward():
    params = init_params(3, 4, seed=6)
    seq = np.random.default_rng(6).normal(size=(5, 3))
    assert np.allclose(mean_hidden(seq, params), lstm_forward(seq, params).mean(axis=0))


def test_params_copy_independent():
    params = init_params(3, 3, seed=0)
    clone = params.copy()
    clone.weights["theta"][0] += 1.0
    assert params.weights["theta"][0] != clone.weights["theta"][0]
