"""Closed-form Nash equilibrium of flooding schedulers on master-worker platforms.

Under the multi-port model workers never interact, so the equilibrium is
computed worker by worker. On one worker every application is either
communication-saturated (it transfers at every instant) or
computation-saturated (it computes at every instant). Sorting applications by
their communication-to-computation ratio ``c_k`` splits them at a single index
``m``: the first ``m`` are computation-saturated, the rest
communication-saturated. The rates then follow from a 2x2 linear system.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfeasibleRates, PartitionNotFound
from .model import Application, AllocationMatrix, System, Worker

CASE_TOL = 1e-12
SATURATION_TOL = 1e-9


class Case(str, enum.Enum):
    ALL_COMM = "AllCommSaturated"
    ALL_COMP = "AllCompSaturated"
    MIXED = "Mixed"


@dataclass(frozen=True)
class SaturationPartition:
    """Which applications saturate which resource on one worker.

    ``comp_set`` and ``comm_set`` hold original 0-based application indices.
    ``m`` is the number of computation-saturated applications in ratio-sorted
    order (``None`` outside the mixed case).
    """

    case: Case
    m: int | None
    comp_set: tuple[int, ...]
    comm_set: tuple[int, ...]
    order: tuple[int, ...]


@dataclass(frozen=True)
class WorkerEquilibrium:
    rates: np.ndarray
    partition: SaturationPartition
    seq_comm: np.ndarray
    seq_comp: np.ndarray
    par_comm: np.ndarray
    par_comp: np.ndarray
    t_comm: float  # common sequential link share of the comm-saturated apps (nan if none)
    t_comp: float  # common sequential CPU share of the comp-saturated apps (nan if none)

    @property
    def link_saturated(self) -> tuple[int, ...]:
        """Applications that use the link at every instant (parallel ratio 1).

        Equals ``partition.comm_set`` except on a case boundary, where an
        application can saturate both resources at once.
        """
        return tuple(int(k) for k in np.flatnonzero(self.par_comm >= 1.0 - SATURATION_TOL))

    @property
    def cpu_saturated(self) -> tuple[int, ...]:
        return tuple(int(k) for k in np.flatnonzero(self.par_comp >= 1.0 - SATURATION_TOL))


@dataclass(frozen=True)
class SystemEquilibrium:
    allocation: AllocationMatrix
    workers: tuple[WorkerEquilibrium, ...]

    @property
    def totals(self) -> np.ndarray:
        return self.allocation.totals

    @property
    def partitions(self) -> tuple[SaturationPartition, ...]:
        return tuple(we.partition for we in self.workers)


@dataclass(frozen=True)
class SaturationThresholds:
    lower: float
    upper: float


@dataclass(frozen=True)
class DegradationBounds:
    per_app: np.ndarray
    max_throughput: float
    min_throughput: float
    avg_throughput: float


def _ratios(apps) -> np.ndarray:
    if isinstance(apps, System):
        return apps.c
    return np.array([a.c if isinstance(a, Application) else float(a) for a in apps], dtype=float)


def single_app_optimum(worker: Worker, app: Application) -> float:
    """Throughput of an application alone on ``worker``: it saturates the tighter resource."""
    return min(worker.power / app.w, worker.bandwidth / app.b)


def ratio_sort(apps) -> tuple[int, ...]:
    """Indices ordering ``c_k`` non-decreasingly; ties keep the original order.

    Accepts applications or the ratios themselves.
    """
    c = _ratios(apps)
    return tuple(int(k) for k in np.argsort(c, kind="stable"))


def _split_value(gamma: np.ndarray, m: int) -> float:
    # gamma sorted, m = number of computation-saturated apps (1..K-1)
    num = float(np.sum(1.0 - gamma[:m]))
    den = float(np.sum(1.0 - 1.0 / gamma[m:]))
    if num <= 0.0 or den <= 0.0:
        return math.nan
    return num / den


def find_partition(worker: Worker, apps: Sequence[Application]) -> SaturationPartition:
    """Saturation sets of the equilibrium on ``worker``.

    ``apps`` may come in any order; the partition is computed on the
    ratio-sorted list and reported with original indices.
    """
    K = len(apps)
    order = ratio_sort(apps)
    gamma = _ratios(apps)[list(order)] / worker.C
    everyone = tuple(sorted(order))
    if np.sum(1.0 / gamma) <= K * (1.0 + CASE_TOL):
        return SaturationPartition(Case.ALL_COMM, None, (), everyone, order)
    if np.sum(gamma) <= K * (1.0 + CASE_TOL):
        return SaturationPartition(Case.ALL_COMP, None, everyone, (), order)

    strict, loose = [], []
    for m in range(1, K):
        x = _split_value(gamma, m)
        if math.isnan(x):
            continue
        if gamma[m - 1] < x < gamma[m]:
            strict.append(m)
        elif gamma[m - 1] * (1.0 - CASE_TOL) <= x <= gamma[m] * (1.0 + CASE_TOL):
            loose.append(m)
    if len(strict) > 1:
        raise PartitionNotFound(f"several split indices satisfy the partition test: {strict}")
    if strict:
        m = strict[0]
    elif loose:
        # measure-zero boundary: both neighbouring formulas agree here
        m = loose[0]
    else:
        raise PartitionNotFound(f"no split index found for gamma={gamma.tolist()}")
    if math.isclose(gamma[m - 1], gamma[m], rel_tol=CASE_TOL) and strict:
        raise PartitionNotFound(f"split index {m} separates applications with equal ratios")
    comp = tuple(sorted(order[:m]))
    comm = tuple(sorted(order[m:]))
    return SaturationPartition(Case.MIXED, m, comp, comm, order)


def sequential_ratios(rates, worker: Worker, apps) -> tuple[np.ndarray, np.ndarray]:
    """Fractions of time each application would need the link / CPU alone."""
    rates = np.asarray(rates, dtype=float)
    b = np.array([a.b for a in apps])
    w = np.array([a.w for a in apps])
    mu = rates * b / worker.bandwidth
    nu = rates * w / worker.power
    c = b / w
    # mu * C == nu * c, up to rounding
    lhs, rhs = mu * worker.C, nu * c
    if not np.allclose(lhs, rhs, rtol=1e-12, atol=0.0):
        raise AssertionError(f"sequential ratios break mu*C == nu*c: {lhs} vs {rhs}")
    return mu, nu


def _nested_ratios(demand: np.ndarray, capacity: float) -> np.ndarray:
    K = demand.size
    order = np.argsort(demand, kind="stable")
    out = np.empty(K)
    prev_demand = 0.0
    acc = 0.0
    for j, k in enumerate(order):
        acc += (demand[k] - prev_demand) * (K - j) / capacity
        prev_demand = demand[k]
        out[k] = acc
    return out


def parallel_ratios(rates, worker: Worker, apps) -> tuple[np.ndarray, np.ndarray]:
    """Activity fractions when every resource is shared as much as possible.

    For each resource, applications are ordered by demand; the smallest one is
    active during the shortest prefix of time, so active sets shrink as
    ``{all} ⊇ {all but the smallest} ⊇ ...``.
    """
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < -SATURATION_TOL):
        raise InfeasibleRates(f"negative rate in {rates.tolist()}")
    b = np.array([a.b for a in apps])
    w = np.array([a.w for a in apps])
    mu = _nested_ratios(rates * b, worker.bandwidth)
    nu = _nested_ratios(rates * w, worker.power)
    for name, r in (("link", mu), ("cpu", nu)):
        if r.size and r.max() > 1.0 + SATURATION_TOL:
            raise InfeasibleRates(f"{name} activity ratio {r.max():.12g} exceeds 1")
    return mu, nu


def worker_equilibrium(worker: Worker, apps: Sequence[Application]) -> WorkerEquilibrium:
    apps = list(apps)
    K = len(apps)
    part = find_partition(worker, apps)
    b = np.array([a.b for a in apps])
    w = np.array([a.w for a in apps])
    c = b / w
    B, W, C = worker.bandwidth, worker.power, worker.C
    rates = np.empty(K)
    t_comm = t_comp = math.nan
    if part.case is Case.ALL_COMM:
        rates[:] = B / (K * b)
        t_comm = 1.0 / K
    elif part.case is Case.ALL_COMP:
        rates[:] = W / (K * w)
        t_comp = 1.0 / K
    else:
        Wset, Bset = list(part.comp_set), list(part.comm_set)
        denom = len(Wset) * len(Bset) - np.sum(c[Wset]) * np.sum(1.0 / c[Bset])
        t_comm = (len(Wset) - np.sum(c[Wset] / C)) / denom
        t_comp = (len(Bset) - np.sum(C / c[Bset])) / denom
        rates[Bset] = B / b[Bset] * t_comm
        rates[Wset] = W / w[Wset] * t_comp
    seq_comm, seq_comp = sequential_ratios(rates, worker, apps)
    par_comm, par_comp = parallel_ratios(rates, worker, apps)
    for arr in (rates, seq_comm, seq_comp, par_comm, par_comp):
        arr.setflags(write=False)
    return WorkerEquilibrium(rates, part, seq_comm, seq_comp, par_comm, par_comp, float(t_comm), float(t_comp))


def system_equilibrium(s: System) -> SystemEquilibrium:
    """Unique equilibrium of the whole system, one worker at a time."""
    per_worker = tuple(worker_equilibrium(p, s.apps) for p in s.workers)
    alloc = AllocationMatrix(np.vstack([we.rates for we in per_worker]))
    return SystemEquilibrium(alloc, per_worker)


def saturation_thresholds(power: float, apps) -> SaturationThresholds:
    """Link capacities bounding the mixed regime of a single worker.

    Below ``lower`` every application is communication-saturated and its
    throughput grows linearly with the bandwidth; above ``upper`` every
    application is computation-saturated and bandwidth no longer matters.
    """
    c = _ratios(apps)
    K = c.size
    return SaturationThresholds(power * K / float(np.sum(1.0 / c)), power / K * float(np.sum(c)))


def degradation_bounds(apps, power: float | None = None) -> DegradationBounds:
    """Throughput ratios between the two saturation thresholds of one worker.

    ``per_app[k]`` is the throughput of application k at the lower threshold
    divided by its throughput at the upper one. The three bounds compare the
    largest, smallest and summed throughputs in the same way. ``power``
    cancels out and is accepted only for symmetry with
    :func:`saturation_thresholds`.
    """
    apps = list(apps)
    if len(apps) < 2:
        raise ValueError("degradation bounds need at least two applications")
    b = np.array([a.b for a in apps])
    w = np.array([a.w for a in apps])
    c = b / w
    K = len(apps)
    scale = K / float(np.sum(1.0 / c))
    per_app = scale / c
    per_app.setflags(write=False)
    return DegradationBounds(
        per_app=per_app,
        max_throughput=scale * float(w.min() / b.min()),
        min_throughput=scale * float(w.max() / b.max()),
        avg_throughput=scale * (float(np.sum(1.0 / b)) / float(np.sum(1.0 / w))),
    )
