"""Acceptance criteria, one test each.

Run with ``pytest tests/test_acceptance.py`` (a PASS/FAIL line per criterion is
printed in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

import itertools
import time

import numpy as np
import pytest

from selfishsched import load_bundled
from selfishsched.allocations import (
    braess_check,
    equivalent_subsystem,
    max_min_fair,
    max_sum_throughput,
    pareto_inefficiency_predicate,
    price_of_anarchy_instance,
    proportional_fair,
    random_augmentation,
    sdf_instance,
)
from selfishsched.equilibrium import (
    Case,
    degradation_bounds,
    saturation_thresholds,
    system_equilibrium,
)
from selfishsched.fluidsim import SimConfig, compare_to_closed_form, empirical_partition, run
from selfishsched.lp import LinearProgram, LPStatus, simplex_solve
from selfishsched.model import System, Worker, is_feasible, random_system

pytestmark = pytest.mark.acceptance


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.1f} s, limit {self.limit} s"


def _random_shape(rng, k_max, n_max, k_min=1):
    return int(rng.integers(k_min, k_max + 1)), int(rng.integers(1, n_max + 1))


def test_criterion_1_two_by_two_example():
    """1: two-application, two-worker example reproduced exactly"""
    with Timer(1.0):
        s = load_bundled("example-2x2")
        totals = system_equilibrium(s).totals
        np.testing.assert_allclose(totals, [0.75, 0.75], rtol=0, atol=1e-12)
        ok, _ = is_feasible(s, [[1.0, 0.0], [0.0, 1.0]])
        assert ok
        assert abs(sdf_instance(s).value - 4.0 / 3.0) <= 1e-9


def test_criterion_2_smk_family():
    """2: S_{M,K} allocations and price of anarchy"""
    with Timer(5.0):
        s = load_bundled("smk")
        nash = system_equilibrium(s).totals
        np.testing.assert_allclose(nash, [2 / 3, 1 / 3, 1 / 3], rtol=0, atol=1e-12)
        np.testing.assert_allclose(max_min_fair(s).totals, [0.4, 0.4, 0.4], rtol=0, atol=1e-9)
        assert abs(max_sum_throughput(s).totals.sum() - 2.0) <= 1e-9
        np.testing.assert_allclose(proportional_fair(s).totals, nash, rtol=0, atol=1e-4)
        assert abs(price_of_anarchy_instance(s).ratio - 1.5) <= 1e-9
        M = 1e6
        big = System.from_vectors([1 / M, 1, 1], [1 / M, 1, 1], [1.0], [1.0])
        ratio = price_of_anarchy_instance(big).ratio
        assert 2.999 <= ratio <= 3.0


def test_criterion_3_degradation_figure():
    """3: bandwidth thresholds and degradation bounds of the four-application example"""
    with Timer(1.0):
        s = load_bundled("fig-degradation")
        th = saturation_thresholds(s.workers[0].power, s.apps)
        assert abs(th.lower - 560 / 73) <= 1e-12
        assert abs(th.upper - 245 / 24) <= 1e-12
        db = degradation_bounds(s.apps)
        assert abs(db.max_throughput - 112 / 73) <= 1e-12
        assert abs(db.min_throughput - 84 / 73) <= 1e-12
        assert abs(db.avg_throughput - 2466 / 2263) <= 1e-12

        def totals_at(B):
            return system_equilibrium(s.with_workers([Worker(B, s.workers[0].power)])).totals

        low, high = totals_at(560 / 73), totals_at(245 / 24)
        assert high.max() < low.max()
        assert high.min() < low.min()
        assert high.mean() < low.mean()


def _strict_splits(gamma):
    K = gamma.size
    found = []
    for m in range(1, K):
        num = np.sum(1 - gamma[:m])
        den = np.sum(1 - 1 / gamma[m:])
        if den > 0 and gamma[m - 1] < num / den < gamma[m]:
            found.append(m)
    return found


def test_criterion_4_equilibrium_properties():
    """4: case trichotomy, saturation sums, orderings, feasibility, ratio identity"""
    rng = np.random.default_rng(4)
    with Timer(30.0):
        for _ in range(10_000):
            K, N = _random_shape(rng, 6, 4)
            s = random_system(rng, K, N)
            eq = system_equilibrium(s)
            ok, viol = is_feasible(s, eq.allocation, tol=1e-9)
            assert ok, viol
            for p, we in zip(s.workers, eq.workers):
                part = we.partition
                gamma = np.sort(s.c) / p.C
                # exactly one case
                cases = [np.sum(1 / gamma) <= K * (1 + 1e-12), np.sum(gamma) <= K * (1 + 1e-12)]
                if part.case is Case.ALL_COMM:
                    assert cases[0]
                elif part.case is Case.ALL_COMP:
                    assert not cases[0] and cases[1]
                else:
                    assert not any(cases)
                    assert _strict_splits(gamma) == [part.m]
                    assert set(part.comp_set) | set(part.comm_set) == set(range(K))
                    assert not set(part.comp_set) & set(part.comm_set)
                # constraint tightness
                if part.comm_set:
                    assert abs(we.seq_comm.sum() - 1) <= 1e-9
                if part.comp_set:
                    assert abs(we.seq_comp.sum() - 1) <= 1e-9
                # orderings in ratio-sorted order
                order = list(part.order)
                mu, nu = we.seq_comm[order], we.seq_comp[order]
                slack = 1e-12
                assert np.all(np.diff(mu) >= -slack * mu.max())
                assert np.all(np.diff(nu) <= slack * nu.max())
                comm = [k for k in order if k in part.comm_set]
                comp = [k for k in order if k in part.comp_set]
                if comm:
                    np.testing.assert_allclose(we.seq_comm[comm], we.seq_comm[comm][0], rtol=1e-9)
                    np.testing.assert_allclose(we.par_comm[comm], 1.0, atol=1e-9)
                if comp:
                    np.testing.assert_allclose(we.seq_comp[comp], we.seq_comp[comp][0], rtol=1e-9)
                    np.testing.assert_allclose(we.par_comp[comp], 1.0, atol=1e-9)
                # the labelled sets saturate; on a case boundary more applications may
                assert set(we.link_saturated) >= set(part.comm_set)
                assert set(we.cpu_saturated) >= set(part.comp_set)
                # ratio identity
                np.testing.assert_allclose(we.seq_comm * p.C, we.seq_comp * s.c, rtol=1e-12, atol=0)


def test_criterion_5_pareto_characterization():
    """5: Pareto-inefficiency predicate agrees with the selfishness-factor LP"""
    rng = np.random.default_rng(5)
    with Timer(60.0):
        for i in range(2_000):
            K, N = _random_shape(rng, 4, 3)
            s = random_system(rng, K, N)
            predicted, _ = pareto_inefficiency_predicate(s)
            measured = sdf_instance(s).value > 1 + 1e-6
            assert predicted == measured, (i, s.to_dict())


def test_criterion_6_no_braess_paradox():
    """6: adding capacity never hurts every application"""
    rng = np.random.default_rng(6)
    with Timer(60.0):
        s = load_bundled("example-2x2")
        aug = s.with_workers([Worker(2.0, s.workers[0].power), s.workers[1]])
        verdict = braess_check(s, aug)
        assert not verdict.paradox
        np.testing.assert_allclose(verdict.augmented_totals, [11 / 12, 7 / 6], rtol=0, atol=1e-9)
        for _ in range(10_000):
            K, N = _random_shape(rng, 5, 4)
            s = random_system(rng, K, N)
            assert not braess_check(s, random_augmentation(rng, s)).paradox


def test_criterion_7_equivalent_subsystem():
    """7: equivalent subsystems are smaller, keep the equilibrium, are Pareto optimal and monotone"""
    rng = np.random.default_rng(7)
    with Timer(60.0):
        for _ in range(2_000):
            K, N = _random_shape(rng, 4, 3)
            s = random_system(rng, K, N)
            sub = equivalent_subsystem(s)
            assert np.all(sub.bandwidth <= s.bandwidth * (1 + 1e-12))
            assert np.all(sub.power <= s.power * (1 + 1e-12))
            np.testing.assert_allclose(
                system_equilibrium(sub).allocation.rates, system_equilibrium(s).allocation.rates, rtol=1e-9, atol=0
            )
            assert pareto_inefficiency_predicate(sub) == (False, None)
        for _ in range(1_000):
            K, N = _random_shape(rng, 4, 3)
            s = random_system(rng, K, N)
            big = random_augmentation(rng, s)
            sub, sub_big = equivalent_subsystem(s), equivalent_subsystem(big)
            assert np.all(sub_big.bandwidth >= sub.bandwidth * (1 - 1e-9))
            assert np.all(sub_big.power >= sub.power * (1 - 1e-9))


@pytest.mark.parametrize("name", ["example-2x2", "smk", "mixed-1x2"])
def test_criterion_8_simulator_convergence(name):
    """8: fluid simulation converges to the closed-form equilibrium"""
    with Timer(30.0):
        s = load_bundled(name)
        eq = system_equilibrium(s)
        trace = run(s, SimConfig())
        err = compare_to_closed_form(trace, s)
        assert np.all(err <= 0.02), err
        longer = compare_to_closed_form(run(s, SimConfig(horizon=4000.0)), s)
        assert np.all(longer <= err + 1e-12), (err, longer)
        for we, obs in zip(eq.workers, empirical_partition(trace, s)):
            # on a case boundary an application saturates both resources;
            # the simulator observes the physical saturation, not the label
            assert obs.comm_set == we.link_saturated
            assert obs.comp_set == we.cpu_saturated
            if set(we.link_saturated).isdisjoint(we.cpu_saturated):
                assert obs.comm_set == we.partition.comm_set
                assert obs.comp_set == we.partition.comp_set


def brute_force_lp(lp: LinearProgram, cap: float):
    """Best objective over all vertices of the program boxed by ``x <= lower + cap``."""
    A, b = lp.inequality_form()
    n = lp.n_vars
    rows = np.vstack([A, -np.eye(n), np.eye(n)])
    rhs = np.concatenate([b, -lp.lower, lp.lower + cap])
    combos = np.array(list(itertools.combinations(range(rows.shape[0]), n)))
    M = rows[combos]
    ok = np.abs(np.linalg.det(M)) > 1e-12
    if not ok.any():
        return -np.inf
    x = np.linalg.solve(M[ok], rhs[combos[ok]][..., None])[..., 0]
    feasible = np.all(x @ rows.T <= rhs + 1e-9 * (1 + np.abs(rhs)), axis=1)
    if not feasible.any():
        return -np.inf
    return float(np.max(x[feasible] @ lp.objective))


def _random_lp(rng):
    n = int(rng.integers(1, 6))
    m = int(rng.integers(1, 7))
    A = rng.normal(size=(m, n))
    if rng.random() < 0.5:
        A = np.abs(A)  # bounded on the non-negative orthant
    b = rng.uniform(-0.5, 2.0, size=m)
    c = rng.normal(size=n)
    lower = rng.uniform(-1.0, 1.0, size=n) if rng.random() < 0.3 else None
    return LinearProgram(c, A, b, lower=lower)


def test_criterion_9_simplex_oracle():
    """9: simplex matches brute-force vertex enumeration"""
    rng = np.random.default_rng(9)
    statuses = set()
    with Timer(10.0):
        for i in range(500):
            lp = _random_lp(rng)
            res = simplex_solve(lp)
            statuses.add(res.status)
            near = brute_force_lp(lp, 1e4)
            far = brute_force_lp(lp, 1e5)
            if near == -np.inf:
                assert res.status is LPStatus.INFEASIBLE, i
            elif far > near + 1e-6 * (1 + abs(near)):
                assert res.status is LPStatus.UNBOUNDED, i
            else:
                assert res.status is LPStatus.OPTIMAL, i
                assert abs(res.value - near) <= 1e-8 * (1 + abs(near)), (i, res.value, near)
    assert statuses == set(LPStatus)


if __name__ == "__main__":
    import sys

    failures = 0
    for name, fn in list(globals().items()):
        if not name.startswith("test_criterion_"):
            continue
        marks = [m for m in getattr(fn, "pytestmark", []) if m.name == "parametrize"]
        params = [(v,) for v in marks[0].args[1]] if marks else [()]
        for p in params:
            label = fn.__doc__.strip() + (f" [{p[0]}]" if p else "")
            t0 = time.perf_counter()
            try:
                fn(*p)
            except Exception as exc:  # report and keep going
                failures += 1
                print(f"FAIL  criterion {label}  ({type(exc).__name__}: {exc})")
            else:
                print(f"PASS  criterion {label}  ({time.perf_counter() - t0:.2f} s)")
    sys.exit(1 if failures else 0)
