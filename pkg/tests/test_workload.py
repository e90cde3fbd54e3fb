import math

import numpy as np
import pytest

from cwlearn import GenParams, Trace, generate_trace, load_trace, save_trace
from cwlearn.workload import acf, active_count, active_count_series


# --- Trace container ------------------------------------------------------

def test_trace_validation():
    with pytest.raises(ValueError):
        Trace(["a"], np.zeros(3))                 # not 2-D
    with pytest.raises(ValueError):
        Trace(["a", "b"], np.zeros((3, 1)))       # id/column mismatch
    with pytest.raises(ValueError):
        Trace(["a"], np.array([[1.0], [-2.0]]))   # negative volume


def test_trace_activity_and_counts():
    tr = Trace(["a", "b", "c"], np.array([[5.0, 0.0, 1.0],
                                          [0.0, 0.0, 0.0],
                                          [2.0, 2.0, 2.0]]))
    assert tr.seconds == 3
    assert tr.n_stations == 3
    assert tr.activity.tolist() == [[True, False, True],
                                    [False, False, False],
                                    [True, True, True]]
    assert active_count(tr, 0) == 2
    assert active_count(tr, 1) == 0
    assert active_count_series(tr).tolist() == [2, 0, 3]
    with pytest.raises(ValueError):
        active_count(tr, 3)


def test_trace_slice():
    tr = Trace(["a"], np.arange(10, dtype=float).reshape(10, 1) + 1)
    sub = tr.slice(2, 5)
    assert sub.seconds == 3
    assert sub.volumes[:, 0].tolist() == [3.0, 4.0, 5.0]
    with pytest.raises(ValueError):
        tr.slice(5, 5)
    with pytest.raises(ValueError):
        tr.slice(0, 11)


# --- generator ------------------------------------------------------------

def test_gen_params_validation():
    with pytest.raises(ValueError):
        GenParams(n_stations=0)
    with pytest.raises(ValueError):
        GenParams(duration_s=0)
    with pytest.raises(ValueError):
        GenParams(p_on_to_off=0.0)
    with pytest.raises(ValueError):
        GenParams(p_off_to_on=1.5)
    with pytest.raises(ValueError):
        GenParams(n_stations=3, p_on_to_off=[0.1, 0.1])
    with pytest.raises(ValueError):
        GenParams(volume_log_sigma=-1)


def test_generate_trace_deterministic():
    a = generate_trace(GenParams(duration_s=50, seed=5))
    b = generate_trace(GenParams(duration_s=50, seed=5))
    c = generate_trace(GenParams(duration_s=50, seed=6))
    np.testing.assert_array_equal(a.volumes, b.volumes)
    assert not np.array_equal(a.volumes, c.volumes)


def test_chain_transition_frequencies_match_nominal():
    """Empirical on->off and off->on frequencies agree with the configured
    transition probabilities (binomial 4-sigma bands over a long run)."""
    p10, p01 = 0.04, 0.06
    tr = generate_trace(GenParams(n_stations=4, duration_s=50000, seed=3,
                                  p_on_to_off=p10, p_off_to_on=p01))
    on = tr.activity
    prev, cur = on[:-1], on[1:]
    for nominal, frm, to in ((p10, True, False), (p01, False, True)):
        n_from = int(np.count_nonzero(prev == frm))
        n_trans = int(np.count_nonzero((prev == frm) & (cur == to)))
        est = n_trans / n_from
        sigma = math.sqrt(nominal * (1 - nominal) / n_from)
        assert abs(est - nominal) < 4 * sigma, (nominal, est)


def test_stationary_on_fraction():
    p10, p01 = 0.04, 0.06
    tr = generate_trace(GenParams(n_stations=8, duration_s=30000, seed=4))
    frac = float(np.mean(tr.activity))
    assert frac == pytest.approx(p01 / (p01 + p10), abs=0.03)


def test_activity_count_lag1_autocorrelation():
    # each chain has lag-1 autocorrelation 1 - p10 - p01 = 0.90; the sum of
    # independent chains keeps the same coefficient
    tr = generate_trace(GenParams(n_stations=8, duration_s=30000, seed=7))
    rho = acf(active_count_series(tr), 1)[1]
    assert rho == pytest.approx(0.90, abs=0.03)


def test_on_volume_lognormal_location():
    params = GenParams(n_stations=8, duration_s=20000, seed=9)
    tr = generate_trace(params)
    logs = np.log(tr.volumes[tr.volumes > 0])
    n = logs.size
    assert abs(logs.mean() - params.volume_log_mean) < 4 * params.volume_log_sigma / math.sqrt(n)
    assert logs.std() == pytest.approx(params.volume_log_sigma, rel=0.05)


# --- CSV round trip and errors --------------------------------------------

def test_save_load_round_trip(tmp_path):
    tr = generate_trace(GenParams(n_stations=3, duration_s=20, seed=2))
    path = tmp_path / "trace.csv"
    save_trace(tr, path)
    back = load_trace(path)
    assert back.station_ids == tr.station_ids
    np.testing.assert_array_equal(back.volumes, tr.volumes)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_errors_name_file_and_line(tmp_path):
    cases = {
        "empty.csv": ("", "empty trace file"),
        "header.csv": ("x,station_0\n1,2\n", "header"),
        "fields.csv": ("t,station_0\n0,1.0,9\n", "line 2"),
        "nonnum.csv": ("t,station_0\n0,abc\n", "line 2"),
        "order.csv": ("t,station_0\n1,1.0\n1,2.0\n", "line 3"),
        "negative.csv": ("t,station_0\n0,-5\n", "line 2"),
        "nodata.csv": ("t,station_0\n", "no data rows"),
    }
    for name, (text, needle) in cases.items():
        path = _write(tmp_path / name, text)
        with pytest.raises(ValueError) as err:
            load_trace(path)
        assert needle in str(err.value), name
        assert name in str(err.value), name


# --- acf helper -----------------------------------------------------------

def test_acf_alternating_series():
    n = 100
    series = [1, 0] * (n // 2)
    got = acf(series, 1)
    assert got[0] == 1.0
    assert got[1] == pytest.approx(-(n - 1) / n)


def test_acf_validation():
    with pytest.raises(ValueError):
        acf([1, 2, 3], 0)
    with pytest.raises(ValueError):
        acf([1, 2], 5)
    with pytest.raises(ValueError):
        acf([2, 2, 2, 2], 1)
