"""Cooperative reference allocations and inefficiency measures of the equilibrium.

All reference points are optimized over the utility polytope with the in-repo
simplex. The flattened allocation ``x`` has one entry per (worker, application)
pair, ``x[n * K + k]``; programs that need an extra scalar append it last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibrium import Case, system_equilibrium
from .errors import DegenerateInstance, NotAnAugmentation, NumericalBreakdown, SubsystemViolation, ZeroBaseline
from .lp import LinearProgram, LPStatus, simplex_solve
from .model import AllocationMatrix, System, Worker, build_polytope, random_system, same_user_system

PARADOX_TOL = 1e-9
SUBSYSTEM_SLACK = 1e-12
SUBSYSTEM_RATE_TOL = 1e-9


@dataclass(frozen=True)
class InefficiencyReport:
    metric: str
    optimal_value: float
    nash_value: float
    ratio: float


@dataclass(frozen=True)
class SdfReport:
    value: float
    witness: AllocationMatrix


@dataclass(frozen=True)
class BraessVerdict:
    paradox: bool
    rho_ini_over_aug: float
    rho_aug_over_ini: float
    initial_totals: np.ndarray
    augmented_totals: np.ndarray


@dataclass(frozen=True)
class SearchResult:
    """Best instance found by a randomized search; its value is only a lower bound."""

    lower_bound: float
    system: System
    evaluations: int
    seed: int


def _solve(lp: LinearProgram, what: str):
    res = simplex_solve(lp)
    if res.status is not LPStatus.OPTIMAL:
        raise NumericalBreakdown(f"{what}: linear program reported {res.status.value}")
    return res


def _base_rows(s: System, extra: int = 0):
    """Polytope rows padded with ``extra`` trailing zero columns."""
    poly = build_polytope(s)
    A = np.hstack([poly.A, np.zeros((poly.n_constraints, extra))])
    return poly, A, poly.bound.copy()


def max_sum_throughput(s: System) -> AllocationMatrix:
    """Some allocation maximizing the summed throughput (any optimal vertex)."""
    poly, A, bound = _base_rows(s)
    res = _solve(LinearProgram(np.ones(poly.n_vars), A, bound), "max-sum")
    return poly.to_matrix(res.x)


FLOOR_SLACKS = (0.0, 1e-12, 1e-10)


def _solve_with_floors(build, what):
    """Solve with exact throughput floors, relaxing them slightly only if rounding makes them infeasible."""
    for slack in FLOOR_SLACKS:
        res = simplex_solve(build(1.0 - slack))
        if res.status is LPStatus.OPTIMAL:
            return res
    raise NumericalBreakdown(f"{what}: linear program reported {res.status.value}")


def _max_min_level(s, frozen):
    poly, A, bound = _base_rows(s, extra=1)
    nv = poly.n_vars
    obj = np.zeros(nv + 1)
    obj[nv] = 1.0

    def build(keep):
        rows, rhs = [A], [bound]
        for k in range(s.K):
            row = np.zeros(nv + 1)
            row[:nv] = -poly.totals_map[k]
            if k in frozen:
                rhs.append([-frozen[k] * keep])
            else:
                row[nv] = 1.0
                rhs.append([0.0])
            rows.append(row[None])
        return LinearProgram(obj, np.vstack(rows), np.concatenate(rhs))

    return _solve_with_floors(build, "max-min level").value


def _max_single(s, k, frozen, level):
    poly, A, bound = _base_rows(s)

    def build(keep):
        rows, rhs = [A], [bound]
        for j in range(s.K):
            rows.append(-poly.totals_map[j][None])
            rhs.append([-frozen.get(j, level) * keep])
        return LinearProgram(poly.totals_map[k], np.vstack(rows), np.concatenate(rhs))

    return _solve_with_floors(build, "max-min probe").value


def max_min_fair(s: System, tol: float = 1e-9) -> AllocationMatrix:
    """Lexicographic max-min fair allocation of the per-application throughputs.

    Repeatedly raises a common level ``t`` for the unfrozen applications, then
    freezes every application that cannot exceed ``t`` while the others keep
    their current floors. Floors are exact when possible: a relative slack
    gets amplified by badly scaled coefficients and lets frozen levels drift.
    """
    frozen: dict[int, float] = {}
    while len(frozen) < s.K:
        level = _max_min_level(s, frozen)
        probes = {}
        for k in range(s.K):
            if k not in frozen:
                probes[k] = _max_single(s, k, frozen, level)
        stuck = [k for k, v in probes.items() if v <= level * (1.0 + tol) + tol]
        if not stuck:
            lowest = min(probes.values())
            stuck = [k for k, v in probes.items() if v <= lowest * (1.0 + tol) + tol]
        for k in stuck:
            frozen[k] = level

    poly, A, bound = _base_rows(s)

    def build(keep):
        rows, rhs = [A], [bound]
        for k in range(s.K):
            rows.append(-poly.totals_map[k][None])
            rhs.append([-frozen[k] * keep])
            rows.append(poly.totals_map[k][None])
            rhs.append([frozen[k]])
        return LinearProgram(np.ones(poly.n_vars), np.vstack(rows), np.concatenate(rhs))

    res = _solve_with_floors(build, "max-min witness")
    return poly.to_matrix(res.x)


def _line_search(tot, dtot, gamma_max, iters=200):
    """Maximize sum(log(tot + g * dtot)) over g in [0, gamma_max]."""

    def slope(g):
        new = tot + g * dtot
        # a total driven to zero (or just below, by rounding) is never optimal
        if np.any((new <= 0.0) & (dtot < 0.0)):
            return -np.inf
        return float(np.sum(dtot / new))

    if slope(gamma_max) >= 0.0:
        return gamma_max
    lo, hi = 0.0, gamma_max
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return lo


def proportional_fair(s: System, tol: float = 1e-10, max_iters: int = 10_000) -> AllocationMatrix:
    """Maximize ``sum_k log(alpha_k)`` over the polytope with pairwise Frank-Wolfe.

    The simplex is the linear minimization oracle. The iterate is stored as a
    convex combination of oracle vertices so that weight can be moved directly
    from a bad vertex to a good one, which converges linearly on polytopes.
    Stops once the Frank-Wolfe duality gap drops below ``tol``.
    """
    poly, A, bound = _base_rows(s)
    M = poly.totals_map

    def oracle(direction):
        return np.array(_solve(LinearProgram(direction, A, bound), "proportional-fair oracle").x)

    active: dict[bytes, list] = {}
    for k in range(s.K):
        v = oracle(M[k])
        if (M[k] @ v) <= 0.0:
            raise DegenerateInstance(f"application {k + 1} cannot reach a positive throughput")
        key = v.tobytes()
        if key in active:
            active[key][1] += 1.0 / s.K
        else:
            active[key] = [v, 1.0 / s.K]
    x = sum(v * wgt for v, wgt in active.values())

    for _ in range(max_iters):
        tot = M @ x
        grad = M.T @ (1.0 / tot)
        s_vertex = oracle(grad)
        gap = float(grad @ (s_vertex - x))
        if gap <= tol:
            break
        away_key = min(active, key=lambda key: float(grad @ active[key][0]))
        v_away, w_away = active[away_key]
        d = s_vertex - v_away
        gamma = _line_search(tot, M @ d, w_away)
        if gamma <= 0.0:
            break
        x = x + gamma * d
        s_key = s_vertex.tobytes()
        if s_key in active:
            active[s_key][1] += gamma
        else:
            active[s_key] = [s_vertex, gamma]
        active[away_key][1] -= gamma
        if active[away_key][1] <= 1e-15:
            del active[away_key]
    return poly.to_matrix(np.maximum(x, 0.0))


def pareto_comparison(alpha, beta) -> float:
    """``min_k alpha_k / beta_k``; alpha is strictly better for everyone iff this exceeds 1."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if alpha.shape != beta.shape:
        raise ValueError(f"shape mismatch: {alpha.shape} vs {beta.shape}")
    if np.any(beta <= 0.0):
        raise ZeroBaseline(f"baseline has a non-positive component: {beta.tolist()}")
    return float(np.min(alpha / beta))


def price_of_anarchy_instance(s: System) -> InefficiencyReport:
    nash = float(np.sum(system_equilibrium(s).totals))
    if nash <= 0.0:
        raise ZeroBaseline("equilibrium throughput is zero")
    best = float(np.sum(max_sum_throughput(s).totals))
    return InefficiencyReport("sum", best, nash, best / nash)


def sdf_instance(s: System) -> SdfReport:
    """Largest uniform factor by which every equilibrium throughput can be scaled up."""
    nash = system_equilibrium(s).totals
    if np.any(nash <= 0.0):
        raise ZeroBaseline("some equilibrium throughput is zero")
    poly, A, bound = _base_rows(s, extra=1)
    nv = poly.n_vars
    extra = np.hstack([-poly.totals_map, nash[:, None]])
    obj = np.zeros(nv + 1)
    obj[nv] = 1.0
    res = _solve(LinearProgram(obj, np.vstack([A, extra]), np.concatenate([bound, np.zeros(s.K)])), "sdf")
    return SdfReport(res.value, poly.to_matrix(res.x[:nv]))


def _identical_apps(s: System) -> bool:
    c = s.c
    return bool(np.max(c) - np.min(c) <= 1e-12 * np.max(c))


def pareto_inefficiency_predicate(s: System) -> tuple[bool, tuple[int, int] | None]:
    """Whether the equilibrium is Pareto-inefficient, with a witnessing worker pair.

    Inefficient exactly when applications differ and some worker leaves its
    CPU partly idle while another leaves its link partly idle. Returns 1-based
    ``(n1, n2)``: worker n1 has no CPU-saturated application, n2 no
    link-saturated one.
    """
    if s.K < 2 or _identical_apps(s):
        return False, None
    eq = system_equilibrium(s)
    n1 = next((n for n, we in enumerate(eq.workers) if not we.cpu_saturated), None)
    n2 = next((n for n, we in enumerate(eq.workers) if not we.link_saturated), None)
    if n1 is None or n2 is None:
        return False, None
    return True, (n1 + 1, n2 + 1)


def equivalent_subsystem(s: System) -> System:
    """Shrink each worker to the capacities its equilibrium actually uses.

    A worker whose applications all saturate the link gets just enough CPU to
    stay that way; symmetrically for an all-CPU-saturated worker. The result
    has the same equilibrium as ``s`` and that equilibrium is Pareto-optimal.
    """
    K = s.K
    c = s.c
    eq = system_equilibrium(s)
    workers = []
    for p, we in zip(s.workers, eq.workers):
        bandwidth, power = p.bandwidth, p.power
        if we.partition.case is Case.ALL_COMM:
            power = float(np.sum(p.bandwidth / (K * c)))
        elif we.partition.case is Case.ALL_COMP:
            bandwidth = float(np.sum(p.power * c / K))
        if bandwidth > p.bandwidth * (1.0 + SUBSYSTEM_SLACK) or power > p.power * (1.0 + SUBSYSTEM_SLACK):
            raise SubsystemViolation(f"capacity grew: {p} -> ({bandwidth}, {power})")
        workers.append(Worker(min(bandwidth, p.bandwidth), min(power, p.power)))
    sub = s.with_workers(workers, label=f"{s.label} (equivalent subsystem)" if s.label else "equivalent subsystem")
    before = eq.allocation.rates
    after = system_equilibrium(sub).allocation.rates
    if not np.allclose(before, after, rtol=SUBSYSTEM_RATE_TOL, atol=0.0):
        raise SubsystemViolation(f"equilibrium changed: {before.tolist()} -> {after.tolist()}")
    return sub


def braess_check(initial: System, augmented: System) -> BraessVerdict:
    """Compare equilibria before and after adding capacity.

    A paradox would be every application losing throughput. Theory rules it
    out; this exists to try to falsify that.
    """
    if not same_user_system(initial, augmented):
        raise NotAnAugmentation("systems differ in applications or worker count")
    for n, (p, q) in enumerate(zip(initial.workers, augmented.workers), 1):
        if q.bandwidth < p.bandwidth or q.power < p.power:
            raise NotAnAugmentation(f"worker {n} lost capacity: {p} -> {q}")
    ini = system_equilibrium(initial).totals
    aug = system_equilibrium(augmented).totals
    rho = pareto_comparison(ini, aug)
    return BraessVerdict(rho > 1.0 + PARADOX_TOL, rho, pareto_comparison(aug, ini), ini, aug)


def random_augmentation(rng: np.random.Generator, s: System, max_factor: float = 10.0) -> System:
    """Add capacity to one resource, or to a random subset of resources."""
    bandwidth, power = s.bandwidth, s.power
    caps = np.concatenate([bandwidth, power])
    if rng.random() < 0.5:
        mask = np.zeros(caps.size, dtype=bool)
        mask[rng.integers(caps.size)] = True
    else:
        mask = rng.random(caps.size) < 0.5
        mask[rng.integers(caps.size)] = True
    factors = np.exp(rng.uniform(0.0, math.log(max_factor), size=caps.size))
    caps = np.where(mask, caps * factors, caps)
    N = s.N
    return s.with_workers([Worker(caps[n], caps[N + n]) for n in range(N)], label=f"{s.label} (augmented)")


def search_sdf_lower_bound(seed: int, iterations: int = 200, K: int = 3, N: int = 2, step: float = 0.5) -> SearchResult:
    """Randomized hill-climbing on log-parameters to find instances with a large I(S).

    The reported value is attained by the returned instance, so it is a valid
    lower bound on the supremum; nothing more is claimed.
    """
    rng = np.random.default_rng(seed)
    current = random_system(rng, K, N, label="search")
    best_val = sdf_instance(current).value
    evaluations = 1
    for _ in range(iterations):
        logs = np.log(np.concatenate([current.b, current.w, current.bandwidth, current.power]))
        logs = np.clip(logs + rng.normal(0.0, step, size=logs.size), math.log(1e-3), math.log(1e3))
        vals = np.exp(logs)
        cand = System.from_vectors(vals[:K], vals[K:2 * K], vals[2 * K:2 * K + N], vals[2 * K + N:], label="search")
        val = sdf_instance(cand).value
        evaluations += 1
        if val > best_val:
            current, best_val = cand, val
    return SearchResult(best_val, current, evaluations, seed)


def reference_allocations(s: System) -> dict[str, AllocationMatrix]:
    return {
        "max_sum": max_sum_throughput(s),
        "max_min": max_min_fair(s),
        "proportional_fair": proportional_fair(s),
    }

