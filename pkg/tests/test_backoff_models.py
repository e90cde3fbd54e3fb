import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import cwlearn.backoff_models as bm
from cwlearn import QuantScheme, aba_cw, clamp_cw, quantize, r_squared
from cwlearn.backoff_models import (ModelCoefficients, NoBackoffRegime,
                                    TrainingSample, dnn_fit, dnn_gradients,
                                    dnn_init, dnn_loss, dnn_predict,
                                    dnn_train_epoch, expected_throughput_share,
                                    lr_fit, lr_predict, nb_fit, nb_predict,
                                    percentile_boundaries, snapshot_to_json,
                                    theory_attempt_probability)


# --- closed-form rule -----------------------------------------------------

def test_aba_closed_form_values():
    assert [aba_cw(15, a) for a in range(2, 9)] == [14, 21, 29, 36, 44, 51, 59]


def test_aba_no_backoff_below_two():
    with pytest.raises(NoBackoffRegime):
        aba_cw(15, 1)
    with pytest.raises(NoBackoffRegime):
        aba_cw(15, 0)


def test_aba_validates_and_clamps():
    with pytest.raises(ValueError):
        aba_cw(1, 4)
    assert aba_cw(15, 1000) == 1023


# --- saturation theory ----------------------------------------------------

def test_theory_attempt_probability():
    assert theory_attempt_probability(15) == 2.0 / 16
    assert theory_attempt_probability(1) == 1.0
    with pytest.raises(ValueError):
        theory_attempt_probability(0)


def test_expected_throughput_share_product_form():
    p = [0.5, 0.25, 0.1]
    assert expected_throughput_share(p, 0) == pytest.approx(0.5 * 0.75 * 0.9)
    assert expected_throughput_share(p, 2) == pytest.approx(0.1 * 0.5 * 0.75)
    with pytest.raises(ValueError):
        expected_throughput_share(p, 3)
    with pytest.raises(ValueError):
        expected_throughput_share([1.5], 0)


def test_r_squared_hand_values():
    assert r_squared([1, 2, 3], [1, 2, 3]) == 1.0
    assert r_squared([1, 2, 3, 4], [2, 2, 3, 3]) == pytest.approx(0.6)
    assert r_squared([1, 2, 3], [2, 2, 2]) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        r_squared([5, 5], [4, 6])


def test_clamp_cw():
    assert clamp_cw(0) == 1
    assert clamp_cw(-3) == 1
    assert clamp_cw(3.6) == 4
    assert clamp_cw(1024) == 1023
    assert clamp_cw(float("inf")) == 1023
    assert clamp_cw(float("-inf")) == 1
    assert clamp_cw(float("nan")) == 1


# --- quantization ---------------------------------------------------------

def test_quantize_alevel_boundaries():
    scheme = QuantScheme(alevel_boundaries=(3, 8))
    assert quantize(2, 0.0, scheme)[0] == 1
    assert quantize(3, 0.0, scheme)[0] == 1
    assert quantize(5, 0.0, scheme)[0] == 2
    assert quantize(9, 0.0, scheme)[0] == 2   # overflow clamps to top level
    assert quantize(0, 0.0, scheme)[0] == 1


def test_quantize_tlevels():
    scheme = QuantScheme().with_tlevels((10.0, 20.0, 30.0))
    assert quantize(1, 5.0, scheme)[1] == 1
    assert quantize(1, 10.0, scheme)[1] == 1   # boundary belongs below
    assert quantize(1, 15.0, scheme)[1] == 2
    assert quantize(1, 99.0, scheme)[1] == 4
    with pytest.raises(ValueError):
        quantize(-1, 0.0, scheme)
    with pytest.raises(ValueError):
        quantize(1, -0.5, scheme)


def test_quant_scheme_validation():
    with pytest.raises(ValueError):
        QuantScheme(alevel_boundaries=())
    with pytest.raises(ValueError):
        QuantScheme(alevel_boundaries=(5, 5))
    with pytest.raises(ValueError):
        QuantScheme(tlevel_count=0)
    with pytest.raises(ValueError):
        QuantScheme(tlevel_boundaries=(2.0, 1.0))


def test_percentile_boundaries():
    assert percentile_boundaries([1, 2, 3], 1) == ()
    cuts = percentile_boundaries(list(range(100)), 4)
    assert len(cuts) == 3
    assert list(cuts) == sorted(cuts)
    # heavy ties collapse duplicate cuts
    assert len(percentile_boundaries([7.0] * 50, 5)) <= 1


# --- training samples -----------------------------------------------------

def test_training_sample_range_check():
    with pytest.raises(ValueError):
        TrainingSample(1, 1, 0)
    with pytest.raises(ValueError):
        TrainingSample(1, 1, 1024)
    assert TrainingSample(1, 1, 31).ln_target == pytest.approx(math.log(31))


# --- least squares --------------------------------------------------------

def test_lr_recovers_noiseless_coefficients():
    t0, t1, t2 = 0.5, 0.3, 0.1
    samples = [TrainingSample(f1, f2, math.exp(t0 + t1 * f1 + t2 * f2))
               for f1 in (1, 2) for f2 in range(1, 6)]
    coef = lr_fit(samples)
    assert not coef.degenerate
    assert coef.theta0 == pytest.approx(t0, abs=1e-9)
    assert coef.theta1 == pytest.approx(t1, abs=1e-9)
    assert coef.theta2 == pytest.approx(t2, abs=1e-9)


def test_lr_degenerate_design_falls_back_to_intercept():
    samples = [TrainingSample(2, 3, 15), TrainingSample(2, 3, 31)]
    coef = lr_fit(samples)
    assert coef.degenerate
    assert (coef.theta1, coef.theta2) == (0.0, 0.0)
    expected = round(math.exp((math.log(15) + math.log(31)) / 2))
    assert lr_predict(coef, 2, 3) == expected
    assert lr_predict(coef, 99, -4) == expected


def test_lr_fit_requires_samples():
    with pytest.raises(ValueError):
        lr_fit([])


def test_lr_predict_clamps_overflow():
    coef = ModelCoefficients(1000.0, 0.0, 0.0)
    assert lr_predict(coef, 0, 0) == 1023
    coef = ModelCoefficients(-1000.0, 0.0, 0.0)
    assert lr_predict(coef, 0, 0) == 1


# --- naive Bayes ----------------------------------------------------------

def test_nb_majority_hand_example():
    samples = [TrainingSample(1, 1, 15)] * 3 + [TrainingSample(2, 2, 31)]
    model = nb_fit(samples)
    assert nb_predict(model, 1, 1) == 15
    assert nb_predict(model, 2, 2) == 31


def test_nb_tie_goes_to_smaller_cw():
    samples = [TrainingSample(1, 1, 15), TrainingSample(1, 1, 31)]
    model = nb_fit(samples)
    assert nb_predict(model, 1, 1) == 15


def test_nb_class_superset_keeps_hand_example():
    samples = [TrainingSample(1, 1, 15)] * 3 + [TrainingSample(2, 2, 31)]
    model = nb_fit(samples, classes=(1, 3, 7, 15, 31, 63))
    assert nb_predict(model, 1, 1) == 15


def test_nb_rejects_target_outside_classes():
    with pytest.raises(ValueError):
        nb_fit([TrainingSample(1, 1, 15)], classes=(1, 3))
    with pytest.raises(ValueError):
        nb_fit([])


def _nb_bayes_oracle(samples, classes, alpha, f1, f2):
    """Exact-fraction enumeration of the smoothed posterior argmax."""
    classes = sorted(classes)
    n = len(samples)
    k = len(classes)
    by_class = {c: [s for s in samples if s.cwopt == c] for c in classes}
    f1_dom = {s.f1 for s in samples}
    f2_dom = {s.f2 for s in samples}
    best, best_score = None, None
    a = Fraction(alpha).limit_denominator(10**6)
    for c in classes:
        rows = by_class[c]
        nc = len(rows)
        score = Fraction(nc + a, n + a * k)
        for value, domain, feat in ((f1, f1_dom, "f1"), (f2, f2_dom, "f2")):
            cnt = sum(1 for s in rows if getattr(s, feat) == value)
            score *= Fraction(cnt + a, nc + a * max(len(domain), 1))
        if best_score is None or score > best_score:
            best, best_score = c, score
    return best


def test_nb_matches_bayes_enumeration_randomized():
    rng = np.random.default_rng(17)
    classes = (1, 3, 7, 15, 31)
    for _ in range(60):
        n = int(rng.integers(1, 25))
        samples = [TrainingSample(int(rng.integers(1, 4)), int(rng.integers(1, 6)),
                                  int(rng.choice(classes)))
                   for _ in range(n)]
        model = nb_fit(samples, classes=classes)
        f1 = int(rng.integers(1, 4))
        f2 = int(rng.integers(1, 6))
        assert nb_predict(model, f1, f2) == _nb_bayes_oracle(samples, classes, 1.0, f1, f2)


# --- feed-forward net -----------------------------------------------------

def test_dnn_zero_weights_bias_only():
    params = dnn_init(seed=0)
    for key in params.PARAM_KEYS:
        getattr(params, key)[:] = 0.0
    params.b3[0] = math.log(31)
    assert dnn_predict(params, 1, 1) == 31
    assert dnn_predict(params, 7, 2) == 31


def test_dnn_init_validates_layer_sizes():
    with pytest.raises(ValueError):
        dnn_init(layer_sizes=(3, 10, 10, 1))
    with pytest.raises(ValueError):
        dnn_init(layer_sizes=(2, 10, 1))


def test_dnn_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    params = dnn_init(seed=1)
    samples = [TrainingSample(float(rng.integers(1, 9)), float(rng.integers(1, 6)),
                              int(rng.integers(2, 200)))
               for _ in range(12)]
    params.set_standardization(samples)
    X = [[s.f1, s.f2] for s in samples]
    y = [s.ln_target for s in samples]
    _, grads = dnn_gradients(params, X, y)
    delta = 1e-5
    checked = 0
    for key in params.PARAM_KEYS:
        arr = getattr(params, key)
        flat = arr.reshape(-1)
        for _ in range(3):
            j = int(rng.integers(flat.size))
            keep = flat[j]
            flat[j] = keep + delta
            up = dnn_loss(params, X, y)
            flat[j] = keep - delta
            down = dnn_loss(params, X, y)
            flat[j] = keep
            fd = (up - down) / (2 * delta)
            an = grads[key].reshape(-1)[j]
            denom = max(abs(fd), abs(an), 1e-8)
            assert abs(fd - an) / denom < 1e-4, (key, j, fd, an)
            checked += 1
    assert checked == 18


def test_dnn_capacity_on_noiseless_grid():
    t0, t1, t2 = 0.5, 0.3, 0.1
    samples = [TrainingSample(f1, f2, math.exp(t0 + t1 * f1 + t2 * f2))
               for f1 in (1, 2) for f2 in range(1, 6)]
    params = dnn_fit(samples, seed=0)
    X = [[s.f1, s.f2] for s in samples]
    y = [s.ln_target for s in samples]
    assert dnn_loss(params, X, y) < 1e-3


def test_dnn_fit_deterministic():
    samples = [TrainingSample(a, t, 15 * a + t) for a in (1, 2, 3) for t in (1, 2)]
    p1 = dnn_fit(samples, epochs=20, seed=4)
    p2 = dnn_fit(samples, epochs=20, seed=4)
    p3 = dnn_fit(samples, epochs=20, seed=5)
    for key in p1.PARAM_KEYS:
        np.testing.assert_array_equal(getattr(p1, key), getattr(p2, key))
    assert any(not np.array_equal(getattr(p1, k), getattr(p3, k))
               for k in p1.PARAM_KEYS)


def test_dnn_nan_epoch_restores_and_halves_lr():
    samples = [TrainingSample(1, 1, 15), TrainingSample(2, 2, 31)]
    params = dnn_init(seed=0, learning_rate=1e-3)
    params.set_standardization(samples)
    params.b3[0] = 1e200   # forces an overflowing squared error
    before = params.clone_params()
    with np.errstate(over="ignore"):
        out = dnn_train_epoch(params, samples)
    assert math.isnan(out)
    assert params.nan_recoveries == 1
    assert params.learning_rate == pytest.approx(5e-4)
    for key in params.PARAM_KEYS:
        np.testing.assert_array_equal(getattr(params, key), before[key])


def test_dnn_zero_variance_feature_is_ignored():
    samples = [TrainingSample(2, t, 10 * t) for t in (1, 2, 3, 4)]
    params = dnn_fit(samples, epochs=50, seed=0)
    assert params.feat_live.tolist() == [0.0, 1.0]
    assert dnn_predict(params, 2, 3) == dnn_predict(params, 500, 3)


def test_dnn_warm_start_bias_seeds_output_at_mean_log_target():
    samples = [TrainingSample(1, 1, 15), TrainingSample(2, 2, 31)]
    params = dnn_fit(samples, epochs=0, warm_start_bias=True)
    assert params.b3[0] == pytest.approx((math.log(15) + math.log(31)) / 2)
    cold = dnn_fit(samples, epochs=0, warm_start_bias=False)
    assert cold.b3[0] == 0.0


def test_dnn_train_epoch_validation():
    params = dnn_init()
    with pytest.raises(ValueError):
        dnn_train_epoch(params, [])
    with pytest.raises(ValueError):
        dnn_train_epoch(params, [TrainingSample(1, 1, 15)], batch_size=0)


# --- snapshots ------------------------------------------------------------

def test_snapshot_round_trip_all_kinds():
    scheme = QuantScheme().with_tlevels((1e6, 2e6))
    samples = [TrainingSample(1, 1, 15), TrainingSample(2, 2, 31)]
    cases = {
        "none": None,
        "lr": lr_fit(samples),
        "nb": nb_fit(samples),
        "dnn": dnn_fit(samples, epochs=2),
    }
    for kind, model in cases.items():
        doc = json.loads(snapshot_to_json(model, scheme))
        assert doc["kind"] == kind
        assert doc["version"] == bm.SNAPSHOT_VERSION
        assert doc["quant"]["alevel_boundaries"] == [3, 8]
    with pytest.raises(TypeError):
        snapshot_to_json(object())


def test_snapshot_deterministic_string():
    samples = [TrainingSample(1, 1, 15), TrainingSample(2, 2, 31)]
    a = snapshot_to_json(lr_fit(samples))
    b = snapshot_to_json(lr_fit(samples))
    assert a == b


# --- property tests -------------------------------------------------------

@given(st.integers(min_value=2, max_value=64), st.integers(min_value=2, max_value=100))
def test_aba_monotone_in_actives(cw_min, a):
    assert aba_cw(cw_min, a + 1) >= aba_cw(cw_min, a)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(min_value=0, max_value=10),
                          st.integers(min_value=0, max_value=10),
                          st.integers(min_value=1, max_value=1023)),
                min_size=1, max_size=30))
def test_lr_prediction_always_in_range(rows):
    samples = [TrainingSample(f1, f2, cw) for f1, f2, cw in rows]
    coef = lr_fit(samples)
    for f1 in range(0, 11, 5):
        for f2 in range(0, 11, 5):
            assert 1 <= lr_predict(coef, f1, f2) <= 1023
