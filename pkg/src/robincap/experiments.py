"""Batch experiments behind the command-line interface.

Every function here returns plain data; CSV formatting lives in
:func:`write_csv` so that identical inputs give byte-identical files.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fem import FemSolution, SolveOptions, solve_pair
from .geometry import area, sample_random_pair
from .hfunction import centroid_drift
from .radial import (
    ProblemParams,
    Regime,
    ball_energy,
    ball_lower_bound,
    critical_radius,
    regime_classify,
)

logger = logging.getLogger(__name__)

VIOLATION_THRESHOLD = -0.02


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(fh, header, rows, status="ok", footer=()):
    """Header, rows, optional ``# key=value`` footer lines, then a status line."""
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(fmt(v) for v in row) + "\n")
    for line in footer:
        fh.write(f"# {line}\n")
    fh.write(f"# status: {status}\n")


# --------------------------------------------------------------------------
# regimes and curves


REGIME_HEADER = ["n", "p", "beta", "regime", "alpha", "beta1", "beta2", "critical_radius", "limit_at_infinity", "unit_pair_optimal"]


def regimes_row(params: ProblemParams):
    rep = regime_classify(params)
    return rep, [params.n, params.p, params.beta, rep.regime.value, rep.alpha, rep.beta1, rep.beta2,
                 rep.critical_radius, rep.limit_at_infinity, rep.balls_pair_is_unit]


CURVE_HEADER = ["beta", "r", "energy"]


def curve_rows(n: int, p: float, betas, r_min: float, r_max: float, samples: int):
    if not 1.0 <= r_min < r_max:
        raise ValueError("need 1 <= r_min < r_max")
    if samples < 2:
        raise ValueError("need at least 2 samples")
    radii = np.linspace(r_min, r_max, samples)
    rows = []
    for beta in betas:
        params = ProblemParams(n, p, beta)
        for r, e in zip(radii, np.atleast_1d(ball_energy(params, radii))):
            rows.append([params.beta, float(r), float(e)])
    return rows


# --------------------------------------------------------------------------
# verification campaign


CAMPAIGN_HEADER = ["seed", "area_K", "area_Omega", "fem_energy", "ball_bound", "margin", "relative_margin", "centroid_drift", "status"]


@dataclass
class CampaignRecord:
    seed: int
    area_K: float
    area_Omega: float
    fem_energy: float
    ball_bound: float
    margin: float
    centroid_drift: float
    status: str = "ok"

    @property
    def relative_margin(self) -> float:
        return self.margin / self.ball_bound

    def row(self):
        return [self.seed, self.area_K, self.area_Omega, self.fem_energy, self.ball_bound,
                self.margin, self.relative_margin, self.centroid_drift, self.status]


@dataclass
class CampaignReport:
    params: ProblemParams
    M: float
    records: list[CampaignRecord] = field(default_factory=list)

    @property
    def min_margin(self) -> float:
        ok = [r.relative_margin for r in self.records if r.status == "ok"]
        return min(ok) if ok else math.nan

    @property
    def violations(self) -> int:
        return sum(1 for r in self.records if r.status == "ok" and r.relative_margin < VIOLATION_THRESHOLD)

    @property
    def failures(self) -> int:
        return sum(1 for r in self.records if r.status != "ok")

    def footer(self):
        return [f"min_relative_margin={fmt(self.min_margin)}", f"violations={self.violations}", f"failures={self.failures}"]


def theorem_hypothesis_holds(params: ProblemParams) -> bool:
    return params.b > (params.n - params.p) / (params.p - 1.0)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("PCAP_THREADS", "1")))
    except ValueError:
        return 1


def run_instance(seed: int, params: ProblemParams, M: float, amplitude: float, bound: float,
                 n_theta: int, n_radial: int, options: SolveOptions | None = None) -> CampaignRecord:
    try:
        pair = sample_random_pair(seed, M, amplitude)
        sol: FemSolution = solve_pair(pair, params, n_theta, n_radial, options)
        drift = centroid_drift(sol) if sol.mesh is not None else 0.0
        status = "ok" if sol.converged else "unconverged"
        return CampaignRecord(seed, area(pair.K), area(pair.Omega), sol.energy_total, bound,
                              sol.energy_total - bound, drift, status)
    except Exception as exc:  # recorded per instance; the campaign continues
        msg = f"error:{type(exc).__name__}"
        logger.warning("seed %d failed: %s", seed, exc)
        nan = math.nan
        return CampaignRecord(seed, nan, nan, nan, bound, nan, nan, msg)


def run_campaign(params: ProblemParams, M: float, count: int, seed: int, amplitude: float,
                 n_theta: int = 256, n_radial: int = 32, options: SolveOptions | None = None) -> CampaignReport:
    """Solve ``count`` seeded random pairs and compare with the ball lower bound.

    Instance ``i`` uses seed ``seed + i``. Rows are ordered by seed whatever
    the completion order.
    """
    if params.n != 2:
        raise ValueError("the campaign runs in the plane (n = 2)")
    if not theorem_hypothesis_holds(params):
        logger.warning("theorem hypothesis violated (beta^(1/(p-1)) <= (n-p)/(p-1)); running as exploration")
    bound, _ = ball_lower_bound(params, M)
    seeds = [seed + i for i in range(count)]
    report = CampaignReport(params, M)
    if not seeds:
        return report
    job = lambda s: run_instance(s, params, M, amplitude, bound, n_theta, n_radial, options)  # noqa: E731
    workers = min(_threads(), len(seeds))
    if workers == 1:
        records = [job(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(job, seeds))
    report.records = sorted(records, key=lambda r: r.seed)
    return report


def reference_radius(params: ProblemParams, M: float) -> float:
    """Outer radius of the reference ball solution used for derearrangement."""
    _, r_opt = ball_lower_bound(params, M)
    if r_opt > 1.0:
        return r_opt
    if regime_classify(params).regime is Regime.BUMP_THEN_DECREASING:
        return critical_radius(params)
    return max((M / params.omega) ** (1.0 / params.n), 1.0 + 1e-9)
