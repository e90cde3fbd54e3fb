"""Slotted CSMA/CA contention simulator.

One station per AP, saturated unless given a finite frame budget.  The slot
dynamics live in the kernel (see kernel.py); this module owns configuration,
station state and the per-period metric assembly.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .rng import SplitMix64, mix64

CW_FLOOR = 1
CW_CEIL = 1023


def _check_cw(cw):
    if not isinstance(cw, (int, np.integer)):
        raise ValueError("cw must be an integer, got %r" % (cw,))
    if cw < CW_FLOOR or cw > CW_CEIL:
        raise ValueError("cw must be in [%d, %d], got %d" % (CW_FLOOR, CW_CEIL, cw))
    return int(cw)


def sample_backoff(cw, rng):
    """Uniform draw on the integer range [0, cw]."""
    _check_cw(cw)
    return rng.randint_below(cw + 1)


def beb_next_cw(cur_cw, cw_min, cw_max, success):
    """Binary exponential backoff step: reset on success, else double.

    Doubling is 2*cw+1 so the usual 15 -> 31 -> 63 ladder is preserved.
    """
    _check_cw(cur_cw)
    if success:
        return cw_min
    nxt = 2 * cur_cw + 1
    return nxt if nxt <= cw_max else cw_max


@dataclass
class BackoffPolicy:
    """Per-station backoff behaviour, reduced to a (cw_min, cw_max) pair.

    A fixed window is the degenerate pair (w, w); BEB doubles between the
    bounds and resets to cw_min on success.
    """
    cw_min: int = 15
    cw_max: int = 63

    def __post_init__(self):
        self.cw_min = _check_cw(self.cw_min)
        self.cw_max = _check_cw(self.cw_max)
        if self.cw_min > self.cw_max:
            raise ValueError("cw_min %d > cw_max %d" % (self.cw_min, self.cw_max))

    @classmethod
    def beb(cls, cw_min=15, cw_max=63):
        return cls(cw_min, cw_max)

    @classmethod
    def fixed(cls, w):
        return cls(w, w)

    @property
    def is_fixed(self):
        return self.cw_min == self.cw_max


@dataclass
class SimConfig:
    """Medium and timing parameters.

    Collision costs are calibration knobs for a desk-scale model: they fold
    the recovery overhead a real collision drags along (timeouts, EIFS, rate
    control fallout) into a single busy stretch, which is what lets default
    BEB's collision load actually hurt aggregate throughput here.
    """
    n_stations: int = 8
    slot_us: float = 9.0
    frame_slots: int = 50
    success_overhead_slots: int = 9
    collision_slots_rtscts: int = 200
    collision_slots_basic: int = 240
    rtscts_enabled: bool = True
    payload_bits_per_frame: int = 131072
    max_retries: int = 7
    guard_slots: int = 3
    seed: int = 1

    def __post_init__(self):
        if self.n_stations < 1:
            raise ValueError("need at least one station")
        if self.slot_us <= 0:
            raise ValueError("slot_us must be positive")
        for name in ("frame_slots", "success_overhead_slots",
                     "collision_slots_rtscts", "collision_slots_basic",
                     "payload_bits_per_frame"):
            if getattr(self, name) < 1:
                raise ValueError("%s must be >= 1" % name)
        if self.collision_slots_rtscts > self.collision_slots_basic:
            raise ValueError("rts/cts collision cost cannot exceed basic cost")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.guard_slots < 0:
            raise ValueError("guard_slots must be >= 0")

    @property
    def collision_slots(self):
        return self.collision_slots_rtscts if self.rtscts_enabled else self.collision_slots_basic

    def slots_for_seconds(self, seconds):
        return int(round(seconds * 1e6 / self.slot_us))


@dataclass
class StationState:
    """Mutable per-station contention state (functional API)."""
    policy: BackoffPolicy = field(default_factory=BackoffPolicy.beb)
    active: bool = True
    budget: int = -1          # frames remaining; -1 = saturated
    cur_cw: int = -1          # -1 = not yet drawn
    counter: int = -1
    retries: int = 0
    hol_birth: int = 0        # slot (relative to period start) the head frame arrived


@dataclass
class PeriodMetrics:
    duration_slots: int
    slot_us: float
    per_station_tp_bps: list
    aggregate_tp_bps: float
    median_latency_us: float | None
    retry_fraction: float
    attempts: int
    collisions: int
    busy_slots: int
    idle_slots: int
    frames_dropped: int
    attempts_by_station: list
    retry_attempts_by_station: list
    frames_ok_by_station: list
    frames_collided_by_station: list
    decrements_by_station: list
    latency_samples_us: list


class ContentionSim:
    """Persistent array-state simulator; survives across period boundaries."""

    def __init__(self, config, policies=None):
        self.config = config
        n = config.n_stations
        if policies is None:
            policies = [BackoffPolicy.beb() for _ in range(n)]
        if len(policies) != n:
            raise ValueError("need one policy per station")
        self.active = np.zeros(n, dtype=np.uint8)
        self.budget = np.full(n, -1, dtype=np.int64)
        self.counter = np.zeros(n, dtype=np.int64)
        self.cur_cw = np.ones(n, dtype=np.int64)
        self.cw_min = np.ones(n, dtype=np.int64)
        self.cw_max = np.ones(n, dtype=np.int64)
        self.retries = np.zeros(n, dtype=np.int64)
        self.hol_birth = np.zeros(n, dtype=np.int64)
        self.rng_state = np.array([mix64(config.seed)], dtype=np.uint64)
        self.carry_busy = 0
        self.pending_guard = 0
        self._att = np.zeros(n, dtype=np.int64)
        self._ratt = np.zeros(n, dtype=np.int64)
        self._fok = np.zeros(n, dtype=np.int64)
        self._fcol = np.zeros(n, dtype=np.int64)
        self._fdrp = np.zeros(n, dtype=np.int64)
        self._dec = np.zeros(n, dtype=np.int64)
        self._rng = SplitMix64(0)  # state is swapped in around python-side draws
        for i, pol in enumerate(policies):
            self.set_policy(i, pol)
            self.activate(i)

    def _draw(self, cw):
        self._rng.state = int(self.rng_state[0])
        value = self._rng.randint_below(cw + 1)
        self.rng_state[0] = self._rng.state
        return value

    def set_policy(self, i, policy):
        """Install a policy; takes effect now (callers do this on period edges)."""
        self.cw_min[i] = policy.cw_min
        self.cw_max[i] = policy.cw_max
        self.cur_cw[i] = policy.cw_min
        self.retries[i] = 0
        self.counter[i] = self._draw(policy.cw_min)

    def activate(self, i, budget=-1):
        if not self.active[i]:
            self.active[i] = 1
            self.retries[i] = 0
            self.cur_cw[i] = self.cw_min[i]
            self.counter[i] = self._draw(int(self.cur_cw[i]))
            self.hol_birth[i] = 0
        self.budget[i] = budget

    def deactivate(self, i):
        self.active[i] = 0

    _STATE_ARRAYS = ("active", "budget", "counter", "cur_cw", "cw_min",
                     "cw_max", "retries", "hol_birth", "rng_state")

    def save_state(self):
        """Copy of everything that persists across periods; use with
        load_state to branch counterfactual periods from a common point."""
        state = {name: getattr(self, name).copy() for name in self._STATE_ARRAYS}
        state["carry_busy"] = self.carry_busy
        state["pending_guard"] = self.pending_guard
        return state

    def load_state(self, state):
        for name in self._STATE_ARRAYS:
            np.copyto(getattr(self, name), state[name])
        self.carry_busy = state["carry_busy"]
        self.pending_guard = state["pending_guard"]

    def run_period(self, duration_slots):
        cfg = self.config
        if duration_slots < 1:
            raise ValueError("duration_slots must be >= 1")
        lat_cap = duration_slots // (cfg.frame_slots + cfg.success_overhead_slots) + 2
        lat_buf = np.zeros(lat_cap, dtype=np.int64)
        idle, busy, coll, n_lat, carry, guard = kernel.run_period(
            duration_slots, cfg.frame_slots, cfg.success_overhead_slots,
            cfg.collision_slots, cfg.payload_bits_per_frame, cfg.max_retries,
            cfg.guard_slots, self.carry_busy, self.pending_guard,
            self.active, self.budget, self.counter, self.cur_cw,
            self.cw_min, self.cw_max, self.retries, self.hol_birth,
            self.rng_state,
            self._att, self._ratt, self._fok, self._fcol, self._fdrp,
            self._dec, lat_buf)
        self.carry_busy = carry
        self.pending_guard = int(guard)
        period_s = duration_slots * cfg.slot_us * 1e-6
        bits = self._fok * cfg.payload_bits_per_frame
        per_tp = [float(b) / period_s for b in bits]
        samples = lat_buf[:n_lat] * cfg.slot_us
        att_total = int(self._att.sum())
        retry_total = int(self._ratt.sum())
        return PeriodMetrics(
            duration_slots=duration_slots,
            slot_us=cfg.slot_us,
            per_station_tp_bps=per_tp,
            aggregate_tp_bps=float(sum(per_tp)),
            median_latency_us=float(np.median(samples)) if n_lat else None,
            retry_fraction=(retry_total / att_total) if att_total else 0.0,
            attempts=att_total,
            collisions=int(coll),
            busy_slots=int(busy),
            idle_slots=int(idle),
            frames_dropped=int(self._fdrp.sum()),
            attempts_by_station=[int(x) for x in self._att],
            retry_attempts_by_station=[int(x) for x in self._ratt],
            frames_ok_by_station=[int(x) for x in self._fok],
            frames_collided_by_station=[int(x) for x in self._fcol],
            decrements_by_station=[int(x) for x in self._dec],
            latency_samples_us=[float(x) for x in samples],
        )


def simulate_period(config, stations, duration_slots):
    """Run one period for an explicit list of StationState (functional API).

    Station state is mutated in place so consecutive calls chain naturally.
    """
    if len(stations) != config.n_stations:
        raise ValueError("need one StationState per configured station")
    sim = ContentionSim(config, [s.policy for s in stations])
    for i, s in enumerate(stations):
        if not s.active:
            sim.deactivate(i)
        sim.budget[i] = s.budget
        if s.cur_cw >= CW_FLOOR:
            sim.cur_cw[i] = s.cur_cw
            sim.counter[i] = s.counter
            sim.retries[i] = s.retries
            sim.hol_birth[i] = s.hol_birth
    metrics = sim.run_period(duration_slots)
    for i, s in enumerate(stations):
        s.budget = int(sim.budget[i])
        s.cur_cw = int(sim.cur_cw[i])
        s.counter = int(sim.counter[i])
        s.retries = int(sim.retries[i])
        s.hol_birth = int(sim.hol_birth[i])
    return metrics


def measured_attempt_probability(metrics, station):
    """Attempt probability per contention-eligible slot for one station.

    Eligible time is the idle slots the station spent counting down plus half
    of each slot in which it fired: the transmission replaces the remainder of
    that slot, so on average half of it was contention.
    """
    att = metrics.attempts_by_station[station]
    dec = metrics.decrements_by_station[station]
    eligible = dec + 0.5 * att
    if eligible <= 0:
        raise ValueError("station %d was never in contention this period" % station)
    return att / eligible
