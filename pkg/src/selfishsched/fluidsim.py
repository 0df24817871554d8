"""Event-driven fluid simulation of selfish flooding schedulers.

Every application keeps each worker busy on its behalf: it starts a new
transfer as soon as the previous one has finished and fewer than ``Q`` of its
tasks are waiting or computing there, and it computes one task at a time.
Links and CPUs are shared equally among the requests in progress. Between two
events all rates are constant, so remaining volumes are updated exactly.

The per-worker event loop is the hot path. A compiled version is used when the
extension is built; otherwise the pure-Python twin runs, with bit-identical
results.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import _simkernel_py
from .equilibrium import system_equilibrium
from .errors import EmptyWindow
from .model import System

try:
    from . import _simkernel as _compiled
except ImportError:  # extension not built
    _compiled = None

KIND_NAMES = {
    _simkernel_py.TRANSFER_END: "transfer_end",
    _simkernel_py.COMPUTE_END: "compute_end",
    _simkernel_py.COMPUTE_START: "compute_start",
    _simkernel_py.TRANSFER_START: "transfer_start",
}

EVENT_DTYPE = np.dtype([("time", "f8"), ("kind", "i1"), ("app", "i4"), ("worker", "i4")])


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _compiled is not None else ("python",)


DEFAULT_BACKEND = available_backends()[0]


def _kernel(backend):
    backend = backend or DEFAULT_BACKEND
    if backend == "python":
        return _simkernel_py.simulate_worker
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled simulation kernel is not built (pip install -e . builds it)")
        return _compiled.simulate_worker
    raise ValueError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class SimConfig:
    horizon: float = 2000.0
    warmup: float | None = None  # defaults to 10% of the horizon
    buffer_cap: int = 2
    measure_window: float = 50.0

    def __post_init__(self):
        if self.warmup is None:
            object.__setattr__(self, "warmup", 0.1 * self.horizon)
        if not (self.horizon >= 0.0 and np.isfinite(self.horizon)):
            raise ValueError(f"horizon must be finite and non-negative, got {self.horizon}")
        if not 0.0 <= self.warmup <= self.horizon:
            raise ValueError(f"warmup must lie in [0, horizon], got {self.warmup}")
        if int(self.buffer_cap) != self.buffer_cap or self.buffer_cap < 1:
            raise ValueError(f"buffer_cap must be an integer >= 1, got {self.buffer_cap}")
        if not self.measure_window > 0.0:
            raise ValueError(f"measure_window must be positive, got {self.measure_window}")

    @property
    def window_length(self) -> float:
        return self.horizon - self.warmup


@dataclass(frozen=True)
class WorkerFinalState:
    transferred: np.ndarray  # Mb moved per application, including the transfer in progress
    transfers: np.ndarray
    completions: np.ndarray
    buffered: np.ndarray
    computing: np.ndarray
    transfer_remaining: np.ndarray  # nan when no transfer is in progress


@dataclass(frozen=True)
class SimTrace:
    config: SimConfig
    K: int
    N: int
    events: np.ndarray = field(repr=False)
    window_starts: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)  # (windows, K) throughputs
    final_estimate: np.ndarray | None
    final_states: tuple[WorkerFinalState, ...] = field(repr=False)
    backend: str = "python"

    @property
    def has_window(self) -> bool:
        return self.final_estimate is not None


def run(s: System, cfg: SimConfig | None = None, backend: str | None = None) -> SimTrace:
    cfg = cfg or SimConfig()
    kernel = _kernel(backend)
    b = [a.b for a in s.apps]
    w = [a.w for a in s.apps]
    chunks = []
    finals = []
    for n, p in enumerate(s.workers):
        times, kinds, apps, final = kernel(p.bandwidth, p.power, b, w, int(cfg.buffer_cap), float(cfg.horizon))
        ev = np.empty(times.size, dtype=EVENT_DTYPE)
        ev["time"] = times
        ev["kind"] = kinds
        ev["app"] = apps
        ev["worker"] = n
        chunks.append(ev)
        finals.append(WorkerFinalState(**final))
    events = np.concatenate(chunks) if chunks else np.empty(0, dtype=EVENT_DTYPE)
    events = events[np.lexsort((events["kind"], events["app"], events["worker"], events["time"]))]

    done = events[events["kind"] == _simkernel_py.COMPUTE_END]
    length = cfg.window_length
    if length > 0.0:
        in_window = done[(done["time"] > cfg.warmup) & (done["time"] <= cfg.horizon)]
        final_estimate = np.bincount(in_window["app"], minlength=s.K) / length
        n_windows = int(np.floor(length / cfg.measure_window + 1e-9))
    else:
        final_estimate = None
        n_windows = 0
    starts = cfg.warmup + cfg.measure_window * np.arange(n_windows)
    samples = np.zeros((n_windows, s.K))
    for i, t0 in enumerate(starts):
        sel = done[(done["time"] > t0) & (done["time"] <= t0 + cfg.measure_window)]
        samples[i] = np.bincount(sel["app"], minlength=s.K) / cfg.measure_window
    return SimTrace(
        config=cfg,
        K=s.K,
        N=s.N,
        events=events,
        window_starts=starts,
        samples=samples,
        final_estimate=final_estimate,
        final_states=tuple(finals),
        backend=backend or DEFAULT_BACKEND,
    )


def _busy_time(events, start_kind, end_kind, lo, hi):
    """Total time inside [lo, hi] during which the activity is in progress."""
    total = 0.0
    opened = None
    for t, kind in zip(events["time"], events["kind"]):
        if kind == start_kind:
            opened = t
        elif kind == end_kind and opened is not None:
            total += max(0.0, min(t, hi) - max(opened, lo))
            opened = None
    if opened is not None:
        total += max(0.0, hi - max(opened, lo))
    return total


@dataclass(frozen=True)
class ObservedPartition:
    transfer_busy: np.ndarray
    compute_busy: np.ndarray
    comm_set: tuple[int, ...]
    comp_set: tuple[int, ...]


def busy_fractions(trace: SimTrace) -> tuple[np.ndarray, np.ndarray]:
    """Per (worker, application) fraction of the window spent transferring / computing."""
    cfg = trace.config
    if cfg.window_length <= 0.0:
        raise EmptyWindow("trace has an empty measurement window")
    lo, hi = cfg.warmup, cfg.horizon
    tr = np.zeros((trace.N, trace.K))
    cp = np.zeros((trace.N, trace.K))
    ev = trace.events
    for n in range(trace.N):
        for k in range(trace.K):
            sel = ev[(ev["worker"] == n) & (ev["app"] == k)]
            tr[n, k] = _busy_time(sel, _simkernel_py.TRANSFER_START, _simkernel_py.TRANSFER_END, lo, hi)
            cp[n, k] = _busy_time(sel, _simkernel_py.COMPUTE_START, _simkernel_py.COMPUTE_END, lo, hi)
    return tr / (hi - lo), cp / (hi - lo)


def empirical_partition(trace: SimTrace, s: System, eps: float = 0.02) -> list[ObservedPartition]:
    """Observed saturation sets: applications busy on a resource more than ``1 - eps`` of the time."""
    if (trace.N, trace.K) != (s.N, s.K):
        raise ValueError("trace does not belong to this system")
    tr, cp = busy_fractions(trace)
    out = []
    for n in range(s.N):
        comm = tuple(int(k) for k in np.flatnonzero(tr[n] > 1.0 - eps))
        comp = tuple(int(k) for k in np.flatnonzero(cp[n] > 1.0 - eps))
        out.append(ObservedPartition(tr[n], cp[n], comm, comp))
    return out


def compare_to_closed_form(trace: SimTrace, s: System) -> np.ndarray:
    """Relative error of the simulated throughputs against the closed-form equilibrium."""
    if not trace.has_window:
        raise EmptyWindow("trace has an empty measurement window")
    expected = system_equilibrium(s).totals
    return np.abs(trace.final_estimate - expected) / expected


def _fmt(x) -> str:
    return f"{x:.12g}"


def events_csv(trace: SimTrace, out=None) -> str | None:
    """Write ``time,kind,app,worker`` rows (1-based indices). Returns the text when ``out`` is None."""
    buf = out if out is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time", "kind", "app", "worker"])
    for t, kind, k, n in trace.events.tolist():
        writer.writerow([_fmt(t), KIND_NAMES[kind], k + 1, n + 1])
    return buf.getvalue() if out is None else None


def samples_csv(trace: SimTrace, out=None) -> str | None:
    buf = out if out is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["window_start", "app", "throughput"])
    for t0, row in zip(trace.window_starts, trace.samples):
        for k, v in enumerate(row):
            writer.writerow([_fmt(t0), k + 1, _fmt(v)])
    return buf.getvalue() if out is None else None
