"""Replay controller and control surface.

Drives period-by-period replays of a traffic trace through the contention
simulator: read last period's stats, let the policy (static, closed-form or
learned) pick the next window, enforce it on the controlled APs, log the
outcome.  A small stdlib HTTP server exposes status/load/metrics reads and
a window override that takes effect at the next period boundary.
"""

import json
import math
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import backoff_models as bm
from .mac_sim import (CW_CEIL, CW_FLOOR, BackoffPolicy, ContentionSim,
                      SimConfig)
from .online_learner import LearnerConfig, OnlineLearner
from .rng import SplitMix64, derive_seed, mix64
from .workload import active_count

SCHEMA_VERSION = 1

DEFAULT_BEB = BackoffPolicy.beb(15, 63)

POLICY_NAMES = ("beb", "aba", "mlba-lr", "mlba-nb", "mlba-dnn")


def parse_policy(name):
    """Policy strings: beb | fixed:<w> | aba | mlba-lr | mlba-nb | mlba-dnn."""
    if name in POLICY_NAMES:
        return name, None
    if name.startswith("fixed:"):
        w = int(name.split(":", 1)[1])
        if not (CW_FLOOR <= w <= CW_CEIL):
            raise ValueError("fixed window %d outside [%d, %d]" % (w, CW_FLOOR, CW_CEIL))
        return "fixed", w
    raise ValueError("unknown policy %r" % name)


@dataclass
class SimulatedAp:
    """One simulated access point bound to a station slot."""
    id: str
    station_index: int
    controlled: bool = True
    cw_min: int = 15
    cw_max: int = 63

    @property
    def policy(self):
        return BackoffPolicy(self.cw_min, self.cw_max)


def make_aps(n, controlled_fraction=1.0):
    n_controlled = int(round(n * controlled_fraction))
    aps = []
    for i in range(n):
        aps.append(SimulatedAp("ap%d" % i, i, controlled=i < n_controlled))
    return aps


def set_cw_all(aps, cw):
    """Force (cw, cw) on every controlled AP; out-of-range values are
    rejected before any AP changes."""
    if not (CW_FLOOR <= cw <= CW_CEIL):
        raise ValueError("cw %d outside [%d, %d]" % (cw, CW_FLOOR, CW_CEIL))
    changed = []
    for ap in aps:
        if ap.controlled:
            ap.cw_min = ap.cw_max = cw
            changed.append(ap.id)
    return changed


def collect_stats(aps, metrics, period_s):
    """(actives, aggregate bps, per-AP bps) for the last completed period.

    An AP counts as active when it delivered any bits in the period.
    """
    if metrics is None:
        raise ValueError("no completed period to collect stats from")
    per_ap = []
    actives = 0
    aggregate = 0.0
    for ap in aps:
        bits = metrics.frames_ok_by_station[ap.station_index]
        tp = metrics.per_station_tp_bps[ap.station_index]
        per_ap.append({"id": ap.id, "tp_bps": tp, "active": bits > 0})
        if bits > 0:
            actives += 1
        aggregate += tp
    return actives, aggregate, per_ap


@dataclass
class ControllerConfig:
    policy: str = "beb"
    period_s: int = 1
    controlled_fraction: float = 1.0
    seed: int = 1
    queue_cap_s: float = 0.5
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if not (1 <= self.period_s <= 10):
            raise ValueError("period_s must be in [1, 10]")
        if not (0.0 <= self.controlled_fraction <= 1.0):
            raise ValueError("controlled_fraction must be in [0, 1]")
        if not (0.0 < self.queue_cap_s <= 60.0):
            raise ValueError("queue_cap_s must be in (0, 60]")
        parse_policy(self.policy)


@dataclass
class RunLog:
    header: dict
    records: list
    model_snapshot: dict | None = None

    def throughput_series(self):
        return [r["aggregate_tp_bps"] for r in self.records]

    def to_ndjson(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(self.header, sort_keys=True) + "\n")
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
            if self.model_snapshot is not None:
                fh.write(json.dumps(self.model_snapshot, sort_keys=True) + "\n")

    @classmethod
    def from_ndjson(cls, path):
        header, records, snap = None, [], None
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                doc = json.loads(line)
                kind = doc.get("record")
                if kind == "header":
                    header = doc
                elif kind == "period":
                    records.append(doc)
                elif kind == "model_snapshot":
                    snap = doc
                else:
                    raise ValueError("unknown record type %r" % kind)
        if header is None:
            raise ValueError("run log missing header record")
        return cls(header, records, snap)


def _config_doc(config, trace, window_id):
    sim = config.sim
    return {
        "record": "header",
        "schema_version": SCHEMA_VERSION,
        "policy": config.policy,
        "period_s": config.period_s,
        "controlled_fraction": config.controlled_fraction,
        "seed": config.seed,
        "queue_cap_s": config.queue_cap_s,
        "window_id": window_id,
        "trace_seconds": trace.seconds,
        "n_stations": trace.n_stations,
        "sim": {
            "slot_us": sim.slot_us,
            "frame_slots": sim.frame_slots,
            "success_overhead_slots": sim.success_overhead_slots,
            "collision_slots_rtscts": sim.collision_slots_rtscts,
            "collision_slots_basic": sim.collision_slots_basic,
            "rtscts_enabled": sim.rtscts_enabled,
            "payload_bits_per_frame": sim.payload_bits_per_frame,
            "max_retries": sim.max_retries,
            "guard_slots": sim.guard_slots,
        },
        "learner": {
            "history_s": config.learner.history_s,
            "explore_prob": config.learner.explore_prob,
            "calibration_period_s": config.learner.calibration_period_s,
            "cw_grid": list(config.learner.cw_grid),
            "estimator": config.learner.estimator,
        },
    }


class ControlSurface:
    """Thread-safe snapshot store plus the pending window override box."""

    def __init__(self):
        self._lock = threading.Lock()
        self._status = {}
        self._load = {"aps": []}
        self._metrics = {}
        self._pending_cw = None

    def publish(self, status, load, metrics):
        with self._lock:
            self._status = status
            self._load = load
            self._metrics = metrics

    def status(self):
        with self._lock:
            return dict(self._status)

    def load(self):
        with self._lock:
            return dict(self._load)

    def metrics(self):
        with self._lock:
            return dict(self._metrics)

    def request_cw(self, cw):
        if not (CW_FLOOR <= cw <= CW_CEIL):
            raise ValueError("cw %d outside [%d, %d]" % (cw, CW_FLOOR, CW_CEIL))
        with self._lock:
            self._pending_cw = int(cw)

    def take_override(self):
        with self._lock:
            cw, self._pending_cw = self._pending_cw, None
            return cw


def run_replay(config, trace, window_id=0, surface=None, realtime=False):
    """Replay a trace under one policy; returns the RunLog.

    Each period: apply the window decided last period, activate stations
    with frame budgets from their traced volumes, simulate, collect stats,
    hand them to the policy for the next decision.  Deterministic given
    (config.seed, window_id); per-period seeds are derived so that runs
    with different policies see identical medium randomness streams.
    """
    import time as _time

    kind, fixed_w = parse_policy(config.policy)
    n = trace.n_stations
    sim_cfg = SimConfig(**{**config.sim.__dict__, "n_stations": n})
    aps = make_aps(n, config.controlled_fraction)
    sim = ContentionSim(sim_cfg, [DEFAULT_BEB] * n)
    period_slots = sim_cfg.slots_for_seconds(config.period_s)
    payload = sim_cfg.payload_bits_per_frame

    learner = None
    decision_rng = SplitMix64(derive_seed(config.seed, window_id, 0xDEC1))
    if kind.startswith("mlba"):
        lcfg = config.learner
        if lcfg.estimator != kind.split("-", 1)[1]:
            lcfg = LearnerConfig(**{**lcfg.__dict__, "estimator": kind.split("-", 1)[1]})
        learner = OnlineLearner(lcfg)

    records = []
    n_periods = trace.seconds // config.period_s
    # window currently in force on the controlled APs (None = untouched BEB)
    current_cw = None
    current_kind = "default"
    pending = None             # cw to enforce at the next boundary
    pending_kind = None
    pending_obs = None         # (tplast, actives, cwenf, kind) awaiting outcome
    backlog = [0] * n
    # finite queue: leftover offered frames carry over, bounded by a fixed
    # number of seconds of sole-channel capacity; overflow is tail-dropped
    backlog_cap = int(sim_cfg.slots_for_seconds(config.queue_cap_s)
                      // (sim_cfg.frame_slots + sim_cfg.success_overhead_slots))

    if kind == "fixed":
        pending, pending_kind = fixed_w, "static"
    elif kind.startswith("mlba"):
        cw, dkind = learner.next_cw(0, 0.0, decision_rng)
        pending, pending_kind = cw, dkind
        pending_obs = (0.0, 0, cw, dkind)

    for t in range(n_periods):
        if surface is not None:
            override = surface.take_override()
            if override is not None:
                pending, pending_kind = override, "override"
                pending_obs = None

        # decorrelate periods but keep them matched across policies
        sim.rng_state[0] = mix64(derive_seed(config.seed, window_id, t))

        if pending is not None:
            if pending != current_cw:
                set_cw_all(aps, pending)
                for ap in aps:
                    if ap.controlled:
                        sim.set_policy(ap.station_index, ap.policy)
            current_cw, current_kind = pending, pending_kind
            pending, pending_kind = None, None

        base = t * config.period_s
        for i in range(n):
            volume = float(trace.volumes[base:base + config.period_s, i].sum())
            offered = int(math.ceil(volume * 8.0 / payload)) if volume > 0 else 0
            budget = min(offered + backlog[i], backlog_cap)
            if budget > 0:
                sim.activate(i, budget)
            else:
                sim.deactivate(i)
            backlog[i] = budget

        metrics = sim.run_period(period_slots)
        for i in range(n):
            # the kernel decrements budgets in place; what is left is backlog
            backlog[i] = max(0, int(sim.budget[i]))
        actives, aggregate, per_ap = collect_stats(aps, metrics, config.period_s)

        records.append({
            "record": "period",
            "t": t,
            "actives": actives,
            "offered_actives": active_count(trace, base),
            "aggregate_tp_bps": aggregate,
            "per_ap_tp_bps": [p["tp_bps"] for p in per_ap],
            "median_latency_us": metrics.median_latency_us,
            "retry_fraction": metrics.retry_fraction,
            "frames_dropped": metrics.frames_dropped,
            "backlog_frames": sum(backlog),
            "cwenf": current_cw,
            "kind": current_kind,
        })

        # policy decision for the next period, from this period's stats
        if kind == "aba":
            # the closed-form rule is defined in terms of the number of
            # contending stations; the controller's best proxy is the count
            # of APs with queued traffic at the end of the period, which is
            # one period stale by construction (the rule trusts it anyway)
            n_pending = sum(1 for b in backlog if b > 0)
            try:
                pending = bm.aba_cw(15, n_pending)
            except bm.NoBackoffRegime:
                pending = 1
            pending_kind = "aba"
        elif kind.startswith("mlba"):
            if pending_obs is not None:
                learner.observe(pending_obs[0], pending_obs[1], pending_obs[2],
                                aggregate, pending_obs[3])
                learner.refit()
            cw, dk = learner.next_cw(actives, aggregate, decision_rng)
            pending, pending_kind = cw, dk
            pending_obs = (aggregate, actives, cw, dk)

        if surface is not None:
            status = {
                "t": t,
                "policy": config.policy,
                "cwenf": current_cw,
                "kind": current_kind,
                "learner": learner.snapshot() if learner is not None else None,
            }
            load = {"aps": per_ap}
            mdoc = {
                "aggregate_tp_bps": aggregate,
                "actives": actives,
                "median_latency_us": metrics.median_latency_us,
                "retry_fraction": metrics.retry_fraction,
                "frames_dropped": metrics.frames_dropped,
            }
            surface.publish(status, load, mdoc)
        if realtime:
            _time.sleep(config.period_s)

    snap = None
    header = _config_doc(config, trace, window_id)
    if learner is not None:
        snap = {"record": "model_snapshot", "snapshot": learner.snapshot()}
        header["calibration_only"] = (
            trace.seconds <= config.learner.calibration_period_s)
    return RunLog(header, records, snap)


# ---------------------------------------------------------------------------
# HTTP surface

class _Handler(BaseHTTPRequestHandler):
    surface = None

    def _send(self, code, doc):
        body = json.dumps(doc, sort_keys=True).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/status":
            self._send(200, self.surface.status())
        elif self.path == "/load":
            self._send(200, self.surface.load())
        elif self.path == "/metrics":
            self._send(200, self.surface.metrics())
        else:
            self._send(404, {"error": "unknown path %s" % self.path})

    def do_POST(self):
        if self.path != "/cw":
            self._send(404, {"error": "unknown path %s" % self.path})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            doc = json.loads(self.rfile.read(length) or b"{}")
            cw = doc["cw"]
            if not isinstance(cw, int):
                raise ValueError("cw must be an integer")
            self.surface.request_cw(cw)
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            self._send(400, {"error": str(exc)})
            return
        self._send(200, {"ok": True, "cw": cw, "effective": "next period"})

    def log_message(self, fmt, *args):
        pass


def serve_status(bind, surface):
    """Start the HTTP surface on `bind` ("host:port"); returns the server
    (already running on a daemon thread; call .shutdown() to stop)."""
    host, port = bind.rsplit(":", 1)
    handler = type("BoundHandler", (_Handler,), {"surface": surface})
    server = ThreadingHTTPServer((host, int(port)), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server
