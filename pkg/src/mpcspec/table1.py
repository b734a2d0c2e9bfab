"""Solver and pathway-estimate comparison at six reference operating points."""

from __future__ import annotations

import math
from dataclasses import dataclass

from mpcspec.params import SystemParams
from mpcspec.pathways import pathway_estimate
from mpcspec.steady import npcr, solve_steady

S2, S3 = math.sqrt(2), math.sqrt(3)

# (g_tilde, delta3_tilde, cutoff L, reference solver value, reference estimate)
TABLE1_POINTS = (
    (S2 - 1, (S2 - 1) ** 2, 1, 1.2e-3, 3.1e-3),
    (1.0, 1.0, 1, 1.7e-3, 1.7e-3),
    (1.0, S3 - S2, 1, 1.5e-3, 2.6e-3),
    (1.0, -1.0, 1, 2.4e-4, 2.1e-4),
    (1.0, -(S2 + 1), 1, 3.3e-4, 3.3e-4),
    (1.0, -(S3 + S2), 2, 1.3e-3, 2.1e-3),
)


@dataclass(frozen=True)
class Table1Row:
    g_tilde: float
    delta3_tilde: float
    L: int
    solver: float
    estimate: float
    reference_solver: float
    reference_estimate: float

    @property
    def ratio(self) -> float:
        """Estimate over solver value."""
        return self.estimate / self.solver if self.solver > 0 else math.inf


def table1_rows(p: SystemParams, q: int = 1, T: float = 10.0, dt: float | None = None,
                L_override: int | None = None) -> list[Table1Row]:
    rows = []
    for g_t, d3, L, ref_s, ref_e in TABLE1_POINTS:
        pp = p.with_scan(d3)
        g = g_t * p.g_f
        sol = solve_steady(g, pp, q)
        L_used = L if L_override is None else L_override
        est = pathway_estimate(g, pp, L=L_used, T=T, dt=dt)
        rows.append(Table1Row(g_t, d3, L_used, npcr(sol, strict=False), est, ref_s, ref_e))
    return rows
