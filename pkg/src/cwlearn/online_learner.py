"""Online contention-window learning loop.

Each period the learner either cycles the calibration grid, explores a
random grid value, or predicts with the fitted estimator.  Outcomes land in
a pair of bounded FIFO queues (calibration rows vs predicted rows); the
queues fold into a per-(alevel, tlevel) table of the best throughput seen
and the window that achieved it, and the estimator refits on that table.
"""

import math
from collections import deque
from dataclasses import dataclass, field

from . import backoff_models as bm
from .mac_sim import CW_CEIL, CW_FLOOR

DEFAULT_CW_GRID = (1, 3, 7, 15, 31, 63, 127, 255, 511, 1023)

KIND_CALIBRATION = "calibration"
KIND_EXPLORE = "explore"
KIND_PREDICT = "predict"


@dataclass
class Observation:
    """One enforced-window outcome: the features the decision was based on
    (tplast, actives), the window enforced, and the throughput obtained."""
    tplast: float
    actives: int
    cwenf: int
    tp: float
    kind: str = KIND_CALIBRATION
    seq: int = 0              # period index, drives the history bound

    def __post_init__(self):
        if not (CW_FLOOR <= self.cwenf <= CW_CEIL):
            raise ValueError("cwenf %r outside [%d, %d]" % (self.cwenf, CW_FLOOR, CW_CEIL))
        if self.tplast < 0 or self.tp < 0:
            raise ValueError("throughputs must be non-negative")
        if self.kind not in (KIND_CALIBRATION, "predicted"):
            raise ValueError("observation kind must be calibration or predicted")


class CwObsQueue:
    """Two bounded FIFOs (calibration rows, predicted rows).

    Capacity bounds each sub-queue; on top of that, observations older than
    `max_age` periods are evicted whenever the clock advances, so slowly
    filling sub-queues cannot smuggle stale rows into the fit.
    """

    def __init__(self, capacity, max_age=None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.max_age = capacity if max_age is None else max_age
        self.calib = deque()
        self.pred = deque()

    def record(self, obs):
        fifo = self.calib if obs.kind == KIND_CALIBRATION else self.pred
        fifo.append(obs)
        if len(fifo) > self.capacity:
            fifo.popleft()

    def expire(self, now_seq):
        for fifo in (self.calib, self.pred):
            while fifo and fifo[0].seq <= now_seq - self.max_age:
                fifo.popleft()

    def __len__(self):
        return len(self.calib) + len(self.pred)

    def __iter__(self):
        yield from self.calib
        yield from self.pred

    def distinct_cw_count(self):
        return len({o.cwenf for o in self})


@dataclass
class CwMaxEntry:
    alevel: int
    tlevel: int
    mtp: float
    cwopt: int


def rebuild_cwmax(queue, scheme):
    """Fold the queue into {(alevel, tlevel): CwMaxEntry}, keeping for each
    key the max throughput and the window that got it (ties: smaller cw).
    Keys quantize the observation's (actives, tplast) feature pair.
    """
    table = {}
    for obs in queue:
        key = bm.quantize(obs.actives, obs.tplast, scheme)
        cur = table.get(key)
        if (cur is None or obs.tp > cur.mtp
                or (obs.tp == cur.mtp and obs.cwenf < cur.cwopt)):
            table[key] = CwMaxEntry(key[0], key[1], obs.tp, obs.cwenf)
    return table


@dataclass
class LearnerConfig:
    history_s: int = 600
    explore_prob: float = 0.01
    calibration_period_s: int = 30
    period_s: int = 1
    cw_grid: tuple = DEFAULT_CW_GRID
    estimator: str = "lr"                   # lr | nb | dnn
    alevel_boundaries: tuple = (3, 8)
    tlevel_count: int = 5
    dnn_epochs: int = 100
    dnn_learning_rate: float = 1e-2
    dnn_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.explore_prob <= 1.0):
            raise ValueError("explore_prob must be in [0, 1]")
        grid = tuple(int(c) for c in self.cw_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("cw_grid must be strictly increasing")
        if grid[0] < CW_FLOOR or grid[-1] > CW_CEIL:
            raise ValueError("cw_grid must lie within [%d, %d]" % (CW_FLOOR, CW_CEIL))
        self.cw_grid = grid
        if self.estimator not in ("lr", "nb", "dnn"):
            raise ValueError("estimator must be lr, nb or dnn")
        if self.history_s < 1 or self.calibration_period_s < 0 or self.period_s < 1:
            raise ValueError("history_s/calibration_period_s/period_s out of range")


class OnlineLearner:
    """Decision state machine: next_cw() picks a window for the coming
    period, observe() files the outcome, refit() rebuilds table and model.
    """

    def __init__(self, config=None):
        self.config = config or LearnerConfig()
        cfg = self.config
        self.queue = CwObsQueue(cfg.history_s, max_age=cfg.history_s)
        self.scheme = bm.QuantScheme(cfg.alevel_boundaries, cfg.tlevel_count, ())
        self.table = {}
        self.model = None
        self.seq = 0
        self._calib_idx = 0
        self.fallbacks = 0          # predictions requested while unfit
        self.degenerate_fits = 0
        self.last_kind = None

    # -- decision ----------------------------------------------------------
    def _calibration_cw(self):
        cw = self.config.cw_grid[self._calib_idx % len(self.config.cw_grid)]
        self._calib_idx += 1
        return cw

    def _in_bootstrap(self):
        calib_periods = self.config.calibration_period_s // self.config.period_s
        return self.seq < calib_periods

    def next_cw(self, observed_actives, observed_tp, rng):
        """Pick the window for the next period from last period's stats.

        Returns (cw, kind) with kind calibration | explore | predict.
        """
        self.seq += 1
        if self._in_bootstrap() or self.queue.distinct_cw_count() < 2:
            self.last_kind = KIND_CALIBRATION
            return self._calibration_cw(), KIND_CALIBRATION
        if self.config.explore_prob > 0 and rng.uniform() < self.config.explore_prob:
            cw = self.config.cw_grid[rng.randint_below(len(self.config.cw_grid))]
            self.last_kind = KIND_EXPLORE
            return cw, KIND_EXPLORE
        if self.model is None:
            self.fallbacks += 1
            self.last_kind = KIND_CALIBRATION
            return self._calibration_cw(), KIND_CALIBRATION
        alevel, tlevel = bm.quantize(observed_actives, observed_tp, self.scheme)
        cw = self._predict(alevel, tlevel)
        self.last_kind = KIND_PREDICT
        return cw, KIND_PREDICT

    def _predict(self, alevel, tlevel):
        cfg = self.config
        if cfg.estimator == "lr":
            return bm.lr_predict(self.model, alevel, tlevel)
        if cfg.estimator == "nb":
            return bm.nb_predict(self.model, alevel, tlevel)
        return bm.dnn_predict(self.model, alevel, tlevel)

    # -- bookkeeping -------------------------------------------------------
    def observe(self, tplast, actives, cwenf, tp, kind):
        """File the outcome of an enforced window.  Explore outcomes land in
        the calibration FIFO so exploration keeps replenishing it."""
        stored = KIND_CALIBRATION if kind in (KIND_CALIBRATION, KIND_EXPLORE) else "predicted"
        self.queue.record(Observation(tplast, actives, cwenf, tp, stored, self.seq))
        self.queue.expire(self.seq)

    def refit(self):
        """Recompute tlevel boundaries, rebuild the table, refit the model."""
        if not len(self.queue):
            return
        tplasts = [o.tplast for o in self.queue]
        self.scheme = self.scheme.with_tlevels(
            bm.percentile_boundaries(tplasts, self.config.tlevel_count))
        self.table = rebuild_cwmax(self.queue, self.scheme)
        samples = [bm.TrainingSample(e.alevel, e.tlevel, e.cwopt)
                   for e in sorted(self.table.values(), key=lambda e: (e.alevel, e.tlevel))]
        if not samples:
            return
        cfg = self.config
        if cfg.estimator == "lr":
            self.model = bm.lr_fit(samples)
            if self.model.degenerate:
                self.degenerate_fits += 1
        elif cfg.estimator == "nb":
            # externally forced windows may fall off the grid; widen the
            # class set so fitting never rejects an observed target
            classes = sorted(set(cfg.cw_grid) | {s.cwopt for s in samples})
            self.model = bm.nb_fit(samples, classes=classes)
        else:
            self.model = bm.dnn_fit(samples, epochs=cfg.dnn_epochs,
                                    seed=cfg.dnn_seed,
                                    learning_rate=cfg.dnn_learning_rate,
                                    warm_start_bias=True)

    # -- reporting ---------------------------------------------------------
    def snapshot(self):
        """Immutable status view for logs and the HTTP surface."""
        return {
            "seq": self.seq,
            "estimator": self.config.estimator,
            "queue_sizes": {"calibration": len(self.queue.calib),
                            "predicted": len(self.queue.pred)},
            "table_size": len(self.table),
            "last_kind": self.last_kind,
            "fallbacks": self.fallbacks,
            "degenerate_fits": self.degenerate_fits,
            "model": bm.snapshot_to_json(self.model, self.scheme),
        }
