"""Contention-window predictors.

Three families:

  * a closed-form rule linear in the number of active transmitters
    (cw = floor(cw_min_default/2 * a - 1), no backoff below 2 actives)
  * a log-linear regression ln(cw_opt) = t0 + t1*f1 + t2*f2 fit by ordinary
    least squares, where the features are either quantized (alevel, tlevel)
    or raw (actives, throughput)
  * the same response learned by a naive-Bayes classifier over the discrete
    CW grid and by a small feed-forward net (2-10-10-1, ReLU, adam on MSE
    of the log target)

plus the saturation-theory helpers used by the simulator checks.
All predictors emit integer CW values clamped to [1, 1023].
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .mac_sim import CW_CEIL, CW_FLOOR

SNAPSHOT_VERSION = 1


class NoBackoffRegime(Exception):
    """Raised when fewer than 2 stations contend: collisions are impossible
    and the caller should use cw=1 instead of the closed form."""


def clamp_cw(value):
    if not math.isfinite(value):
        return CW_CEIL if value > 0 else CW_FLOOR
    v = int(round(value))
    return min(max(v, CW_FLOOR), CW_CEIL)


def aba_cw(cw_min_default, a):
    """Closed-form window for a active transmitters: floor(cw_min/2 * a - 1).

    Integer arithmetic keeps the half-integer cases exact (15/2*3-1 = 21.5
    truncates to 21).
    """
    if cw_min_default < 2:
        raise ValueError("cw_min_default must be >= 2")
    if a < 2:
        raise NoBackoffRegime("a=%d: no contention, use cw=1" % a)
    return clamp_cw((cw_min_default * a - 2) // 2)


def theory_attempt_probability(cw):
    """Saturated per-slot attempt probability for a fixed window, 2/(cw+1)."""
    if cw < 1:
        raise ValueError("cw must be >= 1")
    return 2.0 / (cw + 1)


def expected_throughput_share(p, i):
    """Share of successes for station i given per-slot attempt probs p:
    p_i * prod_{j != i} (1 - p_j), unnormalized."""
    if not (0 <= i < len(p)):
        raise ValueError("station index %d out of range" % i)
    for v in p:
        if not (0.0 <= v <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
    out = p[i]
    for j, v in enumerate(p):
        if j != i:
            out *= 1.0 - v
    return out


def r_squared(targets, predictions):
    y = np.asarray(targets, dtype=np.float64)
    f = np.asarray(predictions, dtype=np.float64)
    ss_res = float(np.sum((y - f) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r_squared undefined for a constant target")
    return 1.0 - ss_res / ss_tot


# ---------------------------------------------------------------------------
# state quantization

@dataclass
class QuantScheme:
    """Buckets for (actives, throughput) pairs.

    alevel is the 1-based index of the first actives boundary >= the value
    (overflow clamps to the top level); tlevel is the 1-based percentile
    bucket of throughput under tlevel_boundaries.
    """
    alevel_boundaries: tuple = (3, 8)
    tlevel_count: int = 5
    tlevel_boundaries: tuple = ()

    def __post_init__(self):
        bounds = tuple(int(b) for b in self.alevel_boundaries)
        if not bounds or any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            raise ValueError("alevel boundaries must be strictly increasing and nonempty")
        self.alevel_boundaries = bounds
        if self.tlevel_count < 1:
            raise ValueError("tlevel_count must be >= 1")
        tb = tuple(float(b) for b in self.tlevel_boundaries)
        if any(b2 <= b1 for b1, b2 in zip(tb, tb[1:])):
            raise ValueError("tlevel boundaries must be strictly increasing")
        self.tlevel_boundaries = tb

    def with_tlevels(self, boundaries):
        return QuantScheme(self.alevel_boundaries, self.tlevel_count, tuple(boundaries))


def percentile_boundaries(values, count):
    """Percentile cut points splitting values into `count` buckets.

    Duplicate cut points (heavily tied data) are collapsed, so the scheme
    may end up with fewer effective buckets; that is fine for bucketing.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0 or count == 1:
        return ()
    qs = [100.0 * k / count for k in range(1, count)]
    cuts = np.percentile(vals, qs)
    out = []
    for c in cuts:
        if not out or c > out[-1]:
            out.append(float(c))
    return tuple(out)


def quantize(actives, tp, scheme):
    """Map (actives, throughput) to 1-based (alevel, tlevel)."""
    if actives < 0 or tp < 0:
        raise ValueError("actives and tp must be non-negative")
    alevel = len(scheme.alevel_boundaries)
    for idx, bound in enumerate(scheme.alevel_boundaries, start=1):
        if actives <= bound:
            alevel = idx
            break
    tlevel = 1
    for bound in scheme.tlevel_boundaries:
        if tp > bound:
            tlevel += 1
    return alevel, tlevel


# ---------------------------------------------------------------------------
# least-squares estimator

@dataclass
class TrainingSample:
    """One (features, target) row; f1/f2 are (alevel, tlevel) in quantized
    mode or raw (actives, throughput) in raw mode."""
    f1: float
    f2: float
    cwopt: int

    def __post_init__(self):
        if not (CW_FLOOR <= self.cwopt <= CW_CEIL):
            raise ValueError("cwopt %r outside [%d, %d]" % (self.cwopt, CW_FLOOR, CW_CEIL))

    @property
    def ln_target(self):
        return math.log(self.cwopt)


@dataclass
class ModelCoefficients:
    theta0: float
    theta1: float
    theta2: float
    degenerate: bool = False

    def __post_init__(self):
        for v in (self.theta0, self.theta1, self.theta2):
            if not math.isfinite(v):
                raise ValueError("coefficients must be finite")


def lr_fit(samples):
    """Least squares of ln(cwopt) on (f1, f2).

    A rank-deficient design (constant features, too few rows) degrades to
    the intercept-only model with the degenerate flag set.
    """
    if not samples:
        raise ValueError("need at least one sample")
    y = np.array([s.ln_target for s in samples])
    X = np.column_stack([
        np.ones(len(samples)),
        np.array([s.f1 for s in samples], dtype=np.float64),
        np.array([s.f2 for s in samples], dtype=np.float64),
    ])
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 3:
        return ModelCoefficients(float(y.mean()), 0.0, 0.0, degenerate=True)
    return ModelCoefficients(float(coef[0]), float(coef[1]), float(coef[2]))


def lr_predict(coeffs, f1, f2):
    """round(exp(t0 + t1*f1 + t2*f2)) clamped to [1, 1023]."""
    z = coeffs.theta0 + coeffs.theta1 * f1 + coeffs.theta2 * f2
    try:
        value = math.exp(z)
    except OverflowError:
        return CW_CEIL
    return clamp_cw(value)


# ---------------------------------------------------------------------------
# naive-Bayes estimator

@dataclass
class NbModel:
    """Class-conditional independence model over (f1, f2) with Laplace
    smoothing; classes are the discrete CW values themselves."""
    classes: tuple
    priors: dict
    f1_counts: dict          # class -> {value: count}
    f2_counts: dict
    f1_domain: tuple
    f2_domain: tuple
    class_counts: dict
    alpha: float = 1.0


def nb_fit(samples, classes=None, alpha=1.0):
    if not samples:
        raise ValueError("need at least one sample")
    if classes is None:
        classes = sorted({s.cwopt for s in samples})
    classes = tuple(int(c) for c in classes)
    for s in samples:
        if s.cwopt not in classes:
            raise ValueError("sample target %d not in class set" % s.cwopt)
    class_counts = {c: 0 for c in classes}
    f1_counts = {c: {} for c in classes}
    f2_counts = {c: {} for c in classes}
    for s in samples:
        class_counts[s.cwopt] += 1
        f1_counts[s.cwopt][s.f1] = f1_counts[s.cwopt].get(s.f1, 0) + 1
        f2_counts[s.cwopt][s.f2] = f2_counts[s.cwopt].get(s.f2, 0) + 1
    total = len(samples)
    priors = {c: (class_counts[c] + alpha) / (total + alpha * len(classes))
              for c in classes}
    f1_domain = tuple(sorted({s.f1 for s in samples}))
    f2_domain = tuple(sorted({s.f2 for s in samples}))
    return NbModel(classes, priors, f1_counts, f2_counts,
                   f1_domain, f2_domain, class_counts, alpha)


def _nb_log_likelihood(model, c, value, counts, domain):
    n_c = model.class_counts[c]
    k = len(domain) if domain else 1
    count = counts[c].get(value, 0)
    return math.log((count + model.alpha) / (n_c + model.alpha * k))


def nb_predict(model, f1, f2):
    """argmax over every class of P(class) * P(f1|class) * P(f2|class),
    with Laplace-smoothed priors and likelihoods; ties go to the smaller
    CW."""
    best, best_score = None, None
    for c in sorted(model.classes):
        score = math.log(model.priors[c])
        score += _nb_log_likelihood(model, c, f1, model.f1_counts, model.f1_domain)
        score += _nb_log_likelihood(model, c, f2, model.f2_counts, model.f2_domain)
        if best_score is None or score > best_score + 1e-12:
            best, best_score = c, score
    return int(best)


# ---------------------------------------------------------------------------
# feed-forward estimator

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class DnnParams:
    """Weights, adam state and the feature standardization of the net
    ln(cw) = b3 + w3 . relu(b2 + W2 relu(b1 + W1 x))."""

    def __init__(self, layer_sizes=(2, 10, 10, 1), seed=0, learning_rate=1e-3):
        if len(layer_sizes) != 4 or layer_sizes[0] != 2 or layer_sizes[3] != 1:
            raise ValueError("layer sizes must be (2, H1, H2, 1)")
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.seed = int(seed)
        self.learning_rate = float(learning_rate)
        self.step = 0
        self.nan_recoveries = 0
        h1, h2 = self.layer_sizes[1], self.layer_sizes[2]
        rng = np.random.default_rng(seed)
        self.W1 = rng.normal(0.0, math.sqrt(2.0 / 2), (h1, 2))
        self.b1 = np.zeros(h1)
        self.W2 = rng.normal(0.0, math.sqrt(2.0 / h1), (h2, h1))
        self.b2 = np.zeros(h2)
        self.w3 = rng.normal(0.0, math.sqrt(2.0 / h2), (1, h2))
        self.b3 = np.zeros(1)
        self.feat_mean = np.zeros(2)
        self.feat_std = np.ones(2)
        self.feat_live = np.ones(2)
        self._shuffle_rng = np.random.default_rng(seed + 1)
        self._adam_m = {k: np.zeros_like(getattr(self, k)) for k in self.PARAM_KEYS}
        self._adam_v = {k: np.zeros_like(getattr(self, k)) for k in self.PARAM_KEYS}

    PARAM_KEYS = ("W1", "b1", "W2", "b2", "w3", "b3")

    def set_standardization(self, samples):
        feats = np.array([[s.f1, s.f2] for s in samples], dtype=np.float64)
        self.feat_mean = feats.mean(axis=0)
        std = feats.std(axis=0)
        self.feat_std = np.where(std > 0, std, 1.0)
        # a zero-variance feature carries no signal and its weights get no
        # gradient, so it is nulled at prediction time as well
        self.feat_live = (std > 0).astype(np.float64)

    def _standardize(self, X):
        return self.feat_live * (X - self.feat_mean) / self.feat_std

    def clone_params(self):
        return {k: getattr(self, k).copy() for k in self.PARAM_KEYS}

    def restore_params(self, snap):
        for k in self.PARAM_KEYS:
            setattr(self, k, snap[k].copy())


def dnn_init(layer_sizes=(2, 10, 10, 1), seed=0, learning_rate=1e-3):
    return DnnParams(layer_sizes, seed, learning_rate)


def _forward_batch(params, X):
    """Returns (output column, hidden activations) for standardized X."""
    z1 = X @ params.W1.T + params.b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ params.W2.T + params.b2
    h2 = np.maximum(z2, 0.0)
    out = h2 @ params.w3.T + params.b3
    return out[:, 0], (z1, h1, z2, h2)


def dnn_forward(params, f1, f2):
    """Network output (predicted ln cw) for one raw feature pair."""
    X = params._standardize(np.array([[f1, f2]], dtype=np.float64))
    out, _ = _forward_batch(params, X)
    return float(out[0])


def dnn_gradients(params, X_raw, y):
    """Mean-squared-error gradients for a raw-feature batch.

    Returns (loss, dict over PARAM_KEYS); used by the training step and by
    the finite-difference checks.
    """
    X = params._standardize(np.asarray(X_raw, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    out, (z1, h1, z2, h2) = _forward_batch(params, X)
    err = out - y
    loss = float(np.mean(err ** 2))
    d_out = (2.0 / n) * err[:, None]
    g_w3 = d_out.T @ h2
    g_b3 = d_out.sum(axis=0)
    d_h2 = d_out @ params.w3
    d_z2 = d_h2 * (z2 > 0)
    g_W2 = d_z2.T @ h1
    g_b2 = d_z2.sum(axis=0)
    d_h1 = d_z2 @ params.W2
    d_z1 = d_h1 * (z1 > 0)
    g_W1 = d_z1.T @ X
    g_b1 = d_z1.sum(axis=0)
    return loss, {"W1": g_W1, "b1": g_b1, "W2": g_W2, "b2": g_b2,
                  "w3": g_w3, "b3": g_b3}


def dnn_loss(params, X_raw, y):
    X = params._standardize(np.asarray(X_raw, dtype=np.float64))
    out, _ = _forward_batch(params, X)
    return float(np.mean((out - np.asarray(y, dtype=np.float64)) ** 2))


def _adam_update(params, grads):
    params.step += 1
    t = params.step
    lr = params.learning_rate
    for k in params.PARAM_KEYS:
        g = grads[k]
        m = params._adam_m[k]
        v = params._adam_v[k]
        m[:] = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
        v[:] = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
        m_hat = m / (1 - ADAM_BETA1 ** t)
        v_hat = v / (1 - ADAM_BETA2 ** t)
        setattr(params, k, getattr(params, k) - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS))


def dnn_train_epoch(params, samples, batch_size=16):
    """One shuffled pass of adam minibatch updates on ln(cwopt) MSE.

    A non-finite loss aborts the epoch: parameters are restored to their
    pre-epoch values, the learning rate halves and nan_recoveries is bumped.
    Returns the mean batch loss (nan on an aborted epoch).
    """
    if not samples:
        raise ValueError("need samples to train on")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    X = np.array([[s.f1, s.f2] for s in samples], dtype=np.float64)
    y = np.array([s.ln_target for s in samples])
    order = params._shuffle_rng.permutation(len(samples))
    snap = params.clone_params()
    losses = []
    for start in range(0, len(samples), batch_size):
        idx = order[start:start + batch_size]
        loss, grads = dnn_gradients(params, X[idx], y[idx])
        if not math.isfinite(loss):
            params.restore_params(snap)
            params.learning_rate *= 0.5
            params.nan_recoveries += 1
            return math.nan
        _adam_update(params, grads)
        losses.append(loss)
    return float(np.mean(losses))


def dnn_fit(samples, epochs=300, batch_size=4, seed=0, learning_rate=2e-2,
            layer_sizes=(2, 10, 10, 1), warm_start_bias=False):
    """Fresh deterministic fit: init from seed, standardize on the sample
    window, train a fixed epoch budget.

    With warm_start_bias the output bias starts at the mean log target, so
    a short epoch budget shrinks predictions toward the geometric-mean CW
    instead of toward 1."""
    params = dnn_init(layer_sizes, seed, learning_rate)
    params.set_standardization(samples)
    if warm_start_bias:
        params.b3[0] = float(np.mean([s.ln_target for s in samples]))
    for _ in range(epochs):
        dnn_train_epoch(params, samples, batch_size)
    return params


def dnn_predict(params, f1, f2):
    return clamp_cw(math.exp(min(dnn_forward(params, f1, f2), 50.0)))


# ---------------------------------------------------------------------------
# snapshot serialization

def snapshot_to_json(model, scheme=None):
    """Versioned JSON document for run logs and the status endpoint."""
    doc = {"version": SNAPSHOT_VERSION}
    if scheme is not None:
        doc["quant"] = {
            "alevel_boundaries": list(scheme.alevel_boundaries),
            "tlevel_count": scheme.tlevel_count,
            "tlevel_boundaries": list(scheme.tlevel_boundaries),
        }
    if model is None:
        doc["kind"] = "none"
    elif isinstance(model, ModelCoefficients):
        doc["kind"] = "lr"
        doc["theta"] = [model.theta0, model.theta1, model.theta2]
        doc["degenerate"] = model.degenerate
    elif isinstance(model, NbModel):
        doc["kind"] = "nb"
        doc["classes"] = list(model.classes)
        doc["alpha"] = model.alpha
        doc["class_counts"] = {str(c): model.class_counts[c] for c in model.classes}
        doc["f1_counts"] = {str(c): {str(k): v for k, v in model.f1_counts[c].items()}
                            for c in model.classes}
        doc["f2_counts"] = {str(c): {str(k): v for k, v in model.f2_counts[c].items()}
                            for c in model.classes}
        doc["f1_domain"] = list(model.f1_domain)
        doc["f2_domain"] = list(model.f2_domain)
    elif isinstance(model, DnnParams):
        doc["kind"] = "dnn"
        doc["layer_sizes"] = list(model.layer_sizes)
        doc["learning_rate"] = model.learning_rate
        doc["feat_mean"] = model.feat_mean.tolist()
        doc["feat_std"] = model.feat_std.tolist()
        for k in model.PARAM_KEYS:
            doc[k] = getattr(model, k).tolist()
    else:
        raise TypeError("unknown model type %r" % type(model))
    return json.dumps(doc, sort_keys=True)
