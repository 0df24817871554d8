"""Problem instances: applications, workers, allocations and the utility polytope.

Indices are 0-based in code. Everything that leaves the package (reports,
CSV, CLI messages) numbers applications and workers from 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple

import numpy as np

from .errors import MalformedInstance, NonPositiveParameter, ShapeMismatch

CONSTRAINT_TOL = 1e-9
IDENTITY_TOL = 1e-12


def _positive(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise MalformedInstance(f"expected a number, got {value!r}", field=name)
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise NonPositiveParameter(f"must be positive and finite, got {value!r}", field=name)
    return value


@dataclass(frozen=True)
class Application:
    """A bag of identical tasks: ``b`` Mb of input data and ``w`` Mflop each."""

    b: float
    w: float

    def __post_init__(self):
        object.__setattr__(self, "b", _positive(self.b, "b"))
        object.__setattr__(self, "w", _positive(self.w, "w"))

    @property
    def c(self) -> float:
        return self.b / self.w


@dataclass(frozen=True)
class Worker:
    """Link capacity ``bandwidth`` (Mb/s) and compute capacity ``power`` (Mflop/s)."""

    bandwidth: float
    power: float

    def __post_init__(self):
        object.__setattr__(self, "bandwidth", _positive(self.bandwidth, "bandwidth"))
        object.__setattr__(self, "power", _positive(self.power, "power"))

    @property
    def C(self) -> float:
        return self.bandwidth / self.power


@dataclass(frozen=True)
class System:
    apps: tuple[Application, ...]
    workers: tuple[Worker, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "apps", tuple(self.apps))
        object.__setattr__(self, "workers", tuple(self.workers))
        if not self.apps:
            raise MalformedInstance("at least one application is required", field="apps")
        if not self.workers:
            raise MalformedInstance("at least one worker is required", field="workers")

    @classmethod
    def from_vectors(cls, b, w, B, W, label=""):
        """Build a system from the four parameter vectors (task sizes, then capacities)."""
        b, w, B, W = (list(np.atleast_1d(np.asarray(v, dtype=float))) for v in (b, w, B, W))
        if len(b) != len(w):
            raise MalformedInstance(f"len(b)={len(b)} but len(w)={len(w)}", field="w")
        if len(B) != len(W):
            raise MalformedInstance(f"len(B)={len(B)} but len(W)={len(W)}", field="W")
        apps = []
        for k, (bk, wk) in enumerate(zip(b, w)):
            _positive(bk, f"b[{k + 1}]")
            _positive(wk, f"w[{k + 1}]")
            apps.append(Application(bk, wk))
        workers = []
        for n, (Bn, Wn) in enumerate(zip(B, W)):
            _positive(Bn, f"B[{n + 1}]")
            _positive(Wn, f"W[{n + 1}]")
            workers.append(Worker(Bn, Wn))
        return cls(tuple(apps), tuple(workers), label)

    @property
    def K(self) -> int:
        return len(self.apps)

    @property
    def N(self) -> int:
        return len(self.workers)

    @property
    def b(self) -> np.ndarray:
        return np.array([a.b for a in self.apps])

    @property
    def w(self) -> np.ndarray:
        return np.array([a.w for a in self.apps])

    @property
    def c(self) -> np.ndarray:
        return np.array([a.c for a in self.apps])

    @property
    def bandwidth(self) -> np.ndarray:
        return np.array([p.bandwidth for p in self.workers])

    @property
    def power(self) -> np.ndarray:
        return np.array([p.power for p in self.workers])

    @property
    def C(self) -> np.ndarray:
        return np.array([p.C for p in self.workers])

    def with_workers(self, workers, label=None) -> "System":
        return System(self.apps, tuple(workers), self.label if label is None else label)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "apps": [{"b": a.b, "w": a.w} for a in self.apps],
            "workers": [{"bandwidth": p.bandwidth, "power": p.power} for p in self.workers],
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


_TOP_KEYS = {"label", "apps", "workers"}
_APP_KEYS = {"b", "w"}
_WORKER_KEYS = {"bandwidth", "power"}


def _check_keys(obj, allowed, path):
    if not isinstance(obj, Mapping):
        raise MalformedInstance(f"expected an object, got {type(obj).__name__}", field=path)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise MalformedInstance(f"unknown key(s) {', '.join(unknown)}", field=path)
    missing = sorted(allowed - set(obj) - {"label"})
    if missing:
        raise MalformedInstance(f"missing key(s) {', '.join(missing)}", field=path)


def validate_system(raw: Mapping) -> System:
    """Validate a parsed instance description and return the :class:`System`.

    ``raw`` follows the instance-file layout::

        {"label": str, "apps": [{"b": .., "w": ..}, ...],
         "workers": [{"bandwidth": .., "power": ..}, ...]}

    Field paths in error messages use JSON indexing, e.g. ``$.apps[1].b``.
    """
    _check_keys(raw, _TOP_KEYS, "$")
    label = raw.get("label", "")
    if not isinstance(label, str):
        raise MalformedInstance("expected a string", field="$.label")
    for key in ("apps", "workers"):
        if not isinstance(raw[key], list) or not raw[key]:
            raise MalformedInstance("expected a non-empty list", field=f"$.{key}")
    apps = []
    for i, item in enumerate(raw["apps"]):
        path = f"$.apps[{i}]"
        _check_keys(item, _APP_KEYS, path)
        apps.append(Application(_positive(item["b"], f"{path}.b"), _positive(item["w"], f"{path}.w")))
    workers = []
    for i, item in enumerate(raw["workers"]):
        path = f"$.workers[{i}]"
        _check_keys(item, _WORKER_KEYS, path)
        workers.append(
            Worker(_positive(item["bandwidth"], f"{path}.bandwidth"), _positive(item["power"], f"{path}.power"))
        )
    return System(tuple(apps), tuple(workers), label)


def load_system(path) -> System:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInstance(f"invalid JSON ({exc.msg} at line {exc.lineno})", field="$") from exc
    return validate_system(raw)


def random_system(rng: np.random.Generator, K: int, N: int, lo=1e-2, hi=1e2, label="random") -> System:
    """Draw every size and capacity log-uniformly in ``[lo, hi]``."""
    lo, hi = math.log(lo), math.log(hi)
    b, w = np.exp(rng.uniform(lo, hi, size=(2, K)))
    B, W = np.exp(rng.uniform(lo, hi, size=(2, N)))
    return System.from_vectors(b, w, B, W, label=label)


class AllocationMatrix:
    """Task throughputs ``rates[n, k]`` of application k on worker n (tasks/s)."""

    __slots__ = ("_rates", "_totals")

    def __init__(self, rates):
        rates = np.array(rates, dtype=float, ndmin=2)
        if rates.ndim != 2:
            raise ShapeMismatch(f"allocation must be 2-D (workers x apps), got shape {rates.shape}")
        rates.setflags(write=False)
        self._rates = rates
        totals = rates.sum(axis=0)
        totals.setflags(write=False)
        self._totals = totals

    @property
    def rates(self) -> np.ndarray:
        return self._rates

    @property
    def totals(self) -> np.ndarray:
        return self._totals

    @property
    def shape(self):
        return self._rates.shape

    def __repr__(self):
        return f"AllocationMatrix({self._rates.tolist()!r})"


def aggregate(a) -> np.ndarray:
    """Per-application throughput: sum of the rates over all workers."""
    if not isinstance(a, AllocationMatrix):
        a = AllocationMatrix(a)
    return a.totals.copy()


class Violation(NamedTuple):
    worker: int  # 1-based
    kind: str  # "communication" | "computation" | "nonnegativity"
    load: float
    capacity: float


def is_feasible(s: System, a, tol: float = CONSTRAINT_TOL) -> tuple[bool, Violation | None]:
    """Check the per-worker link and CPU constraints for an allocation.

    Returns ``(True, None)`` or ``(False, first_violation)``. Workers are
    scanned in order; on each worker the link is checked before the CPU.
    """
    rates = a.rates if isinstance(a, AllocationMatrix) else np.asarray(a, dtype=float)
    if rates.shape != (s.N, s.K):
        raise ShapeMismatch(f"expected shape ({s.N}, {s.K}), got {rates.shape}")
    b, w = s.b, s.w
    for n, p in enumerate(s.workers):
        row = rates[n]
        neg = np.flatnonzero(row < -tol)
        if neg.size:
            return False, Violation(n + 1, "nonnegativity", float(row[neg[0]]), 0.0)
        data = float(row @ b)
        if data > p.bandwidth * (1.0 + tol):
            return False, Violation(n + 1, "communication", data, p.bandwidth)
        flops = float(row @ w)
        if flops > p.power * (1.0 + tol):
            return False, Violation(n + 1, "computation", flops, p.power)
    return True, None


@dataclass(frozen=True)
class UtilityPolytope:
    """Feasible allocations as ``A @ x <= bound, x >= 0``.

    ``x`` is the flattened allocation, entry ``n * K + k``. Rows ``2n`` and
    ``2n + 1`` are the link and CPU constraints of worker n. ``totals_map @ x``
    gives the per-application throughputs.
    """

    N: int
    K: int
    A: np.ndarray = field(repr=False)
    bound: np.ndarray = field(repr=False)
    totals_map: np.ndarray = field(repr=False)

    @property
    def n_vars(self) -> int:
        return self.N * self.K

    @property
    def n_constraints(self) -> int:
        return self.A.shape[0]

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        if np.any(x < -tol):
            return False
        return bool(np.all(self.A @ x <= self.bound * (1.0 + tol)))

    def to_matrix(self, x) -> AllocationMatrix:
        return AllocationMatrix(np.asarray(x, dtype=float).reshape(self.N, self.K))


def build_polytope(s: System) -> UtilityPolytope:
    N, K = s.N, s.K
    A = np.zeros((2 * N, N * K))
    bound = np.empty(2 * N)
    for n, p in enumerate(s.workers):
        A[2 * n, n * K:(n + 1) * K] = s.b
        A[2 * n + 1, n * K:(n + 1) * K] = s.w
        bound[2 * n] = p.bandwidth
        bound[2 * n + 1] = p.power
    totals_map = np.tile(np.eye(K), N)
    for arr in (A, bound, totals_map):
        arr.setflags(write=False)
    return UtilityPolytope(N, K, A, bound, totals_map)


def describe(s: System) -> str:
    lines = [f"system {s.label!r}: K={s.K} applications, N={s.N} workers"]
    for k, a in enumerate(s.apps, 1):
        lines.append(f"  app {k}: b={a.b:.6g} Mb  w={a.w:.6g} Mflop  c={a.c:.6g}")
    for n, p in enumerate(s.workers, 1):
        lines.append(f"  worker {n}: B={p.bandwidth:.6g} Mb/s  W={p.power:.6g} Mflop/s  C={p.C:.6g}")
    return "\n".join(lines)


def same_user_system(s1: System, s2: System) -> bool:
    return s1.K == s2.K and s1.N == s2.N and all(
        a1 == a2 for a1, a2 in zip(s1.apps, s2.apps)
    )

