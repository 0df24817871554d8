"""Serializable report bundles produced by the command-line tools."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .allocations import (
    equivalent_subsystem,
    pareto_inefficiency_predicate,
    price_of_anarchy_instance,
    reference_allocations,
    sdf_instance,
)
from .equilibrium import SystemEquilibrium, system_equilibrium
from .model import System


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _vec(xs):
    return [_num(x) for x in np.ravel(xs)]


@dataclass
class ReportBundle:
    """Everything a command reports, as plain JSON-compatible data.

    Application and worker numbers inside are 1-based.
    """

    system: dict
    nash: dict
    references: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ReportBundle":
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ReportBundle":
        return cls.from_dict(json.loads(text))


def nash_section(eq: SystemEquilibrium) -> dict:
    workers = []
    for n, we in enumerate(eq.workers, 1):
        part = we.partition
        workers.append(
            {
                "worker": n,
                "case": part.case.value,
                "m": part.m,
                "comp_saturated": [k + 1 for k in part.comp_set],
                "comm_saturated": [k + 1 for k in part.comm_set],
                "rates": _vec(we.rates),
                "seq_comm": _vec(we.seq_comm),
                "seq_comp": _vec(we.seq_comp),
                "par_comm": _vec(we.par_comm),
                "par_comp": _vec(we.par_comp),
                "t_comm": _num(we.t_comm),
                "t_comp": _num(we.t_comp),
            }
        )
    return {"totals": _vec(eq.totals), "workers": workers}


def provenance(**extra: Any) -> dict:
    out = {"tool": "selfishsched", "version": __version__}
    out.update(extra)
    return out


def equilibrium_bundle(s: System, **prov) -> ReportBundle:
    return ReportBundle(system=s.to_dict(), nash=nash_section(system_equilibrium(s)), provenance=provenance(**prov))


def compare_bundle(s: System, **prov) -> ReportBundle:
    eq = system_equilibrium(s)
    refs = reference_allocations(s)
    poa = price_of_anarchy_instance(s)
    sdf = sdf_instance(s)
    inefficient, witness = pareto_inefficiency_predicate(s)
    sub = equivalent_subsystem(s)
    metrics = {
        "I_sum": _num(poa.ratio),
        "sum_optimal": _num(poa.optimal_value),
        "sum_nash": _num(poa.nash_value),
        "I_sdf": _num(sdf.value),
        "sdf_witness_totals": _vec(sdf.witness.totals),
        "pareto_inefficient": inefficient,
        "pareto_witness": list(witness) if witness else None,
        "equivalent_subsystem": [
            {"worker": n, "bandwidth": _num(p.bandwidth), "power": _num(p.power)} for n, p in enumerate(sub.workers, 1)
        ],
    }
    references = {name: {"totals": _vec(a.totals), "rates": [_vec(r) for r in a.rates]} for name, a in refs.items()}
    return ReportBundle(
        system=s.to_dict(),
        nash=nash_section(eq),
        references=references,
        metrics=metrics,
        provenance=provenance(**prov),
    )
