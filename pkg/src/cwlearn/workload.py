"""Per-second per-station traffic traces.

A trace is a T x N matrix of download volumes in bytes per second; a station
is "active" in a second when its volume is strictly positive.  Synthetic
traces come from a two-state (on/off) Markov chain per station with
log-normal volumes in the on state, which gives the positively
autocorrelated activity counts the online learner relies on.
"""

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Trace:
    station_ids: list
    volumes: np.ndarray  # T x N, bytes per second, float64

    def __post_init__(self):
        self.volumes = np.asarray(self.volumes, dtype=np.float64)
        if self.volumes.ndim != 2:
            raise ValueError("volumes must be a T x N matrix")
        if self.volumes.shape[1] != len(self.station_ids):
            raise ValueError("one volume column per station id")
        if np.any(self.volumes < 0):
            raise ValueError("volumes must be non-negative")

    @property
    def seconds(self):
        return self.volumes.shape[0]

    @property
    def n_stations(self):
        return self.volumes.shape[1]

    @property
    def activity(self):
        return self.volumes > 0

    def slice(self, start, stop):
        """Sub-trace covering seconds [start, stop)."""
        if not (0 <= start < stop <= self.seconds):
            raise ValueError("bad slice [%d, %d) for %d seconds" % (start, stop, self.seconds))
        return Trace(self.station_ids, self.volumes[start:stop].copy())


@dataclass
class GenParams:
    """Two-state Markov on/off traffic with log-normal on-volumes.

    Transition probabilities may be scalars (shared) or per-station lists.
    Defaults keep 4 to 8 stations simultaneously active in busy stretches
    and give the activity-count series strong positive lag-1 autocorrelation
    at both 1 s and 10 s grain.
    """
    n_stations: int = 8
    duration_s: int = 3600
    p_on_to_off: float | list = 0.04
    p_off_to_on: float | list = 0.06
    volume_log_mean: float = 14.0   # ln(bytes/s) in the on state
    volume_log_sigma: float = 1.2
    seed: int = 1

    def _per_station(self, value):
        if np.isscalar(value):
            out = [float(value)] * self.n_stations
        else:
            out = [float(v) for v in value]
            if len(out) != self.n_stations:
                raise ValueError("need one transition probability per station")
        for v in out:
            if not (0.0 < v <= 1.0):
                raise ValueError("transition probabilities must be in (0, 1]")
        return out

    def __post_init__(self):
        if self.n_stations < 1:
            raise ValueError("need at least one station")
        if self.duration_s < 1:
            raise ValueError("duration_s must be >= 1")
        if not np.isfinite(self.volume_log_mean):
            raise ValueError("volume_log_mean must be finite")
        if not (np.isfinite(self.volume_log_sigma) and self.volume_log_sigma >= 0):
            raise ValueError("volume_log_sigma must be finite and >= 0")
        self.p_on_to_off = self._per_station(self.p_on_to_off)
        self.p_off_to_on = self._per_station(self.p_off_to_on)


def generate_trace(params):
    """Synthesize a Trace from GenParams; same params -> identical trace."""
    rng = np.random.default_rng(params.seed)
    T, N = params.duration_s, params.n_stations
    p10 = np.array(params.p_on_to_off)
    p01 = np.array(params.p_off_to_on)
    # start each chain from its stationary distribution
    stationary_on = p01 / (p01 + p10)
    on = rng.random(N) < stationary_on
    volumes = np.zeros((T, N))
    for t in range(T):
        flip = rng.random(N)
        on = np.where(on, flip >= p10, flip < p01)
        draws = rng.lognormal(params.volume_log_mean, params.volume_log_sigma, N)
        volumes[t] = np.where(on, draws, 0.0)
    ids = ["station_%d" % i for i in range(N)]
    return Trace(ids, volumes)


def save_trace(trace, path):
    """Write the CSV form: header t,station_0,...; one row per second."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + list(trace.station_ids))
        for t in range(trace.seconds):
            writer.writerow([t] + [repr(float(v)) for v in trace.volumes[t]])


def load_trace(path):
    """Parse a trace CSV; malformed input raises ValueError naming the line."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("%s: empty trace file" % path)
        if len(header) < 2 or header[0] != "t":
            raise ValueError("%s: header must be t,station_0,..." % path)
        ids = header[1:]
        rows = []
        last_t = -1
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError("%s line %d: expected %d fields, got %d"
                                 % (path, lineno, len(header), len(row)))
            try:
                t = int(row[0])
                vols = [float(x) for x in row[1:]]
            except ValueError:
                raise ValueError("%s line %d: non-numeric field" % (path, lineno))
            if t <= last_t:
                raise ValueError("%s line %d: timestamps must increase" % (path, lineno))
            last_t = t
            for col, v in enumerate(vols):
                if v < 0:
                    raise ValueError("%s line %d: negative volume in column %s"
                                     % (path, lineno, ids[col]))
            rows.append(vols)
    if not rows:
        raise ValueError("%s: no data rows" % path)
    return Trace(ids, np.array(rows))


def active_count(trace, t):
    """Number of stations with positive volume in second t."""
    if not (0 <= t < trace.seconds):
        raise ValueError("second %d outside trace of length %d" % (t, trace.seconds))
    return int(np.count_nonzero(trace.volumes[t] > 0))


def active_count_series(trace):
    return np.count_nonzero(trace.volumes > 0, axis=1)


def acf(series, max_lag):
    """Sample autocorrelation for lags 0..max_lag; acf[0] is 1 by definition."""
    x = np.asarray(series, dtype=np.float64)
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if len(x) <= max_lag:
        raise ValueError("series must be longer than max_lag")
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0:
        raise ValueError("autocorrelation undefined for a zero-variance series")
    out = [1.0]
    for lag in range(1, max_lag + 1):
        out.append(float(np.dot(x[:-lag], x[lag:]) / denom))
    return out
