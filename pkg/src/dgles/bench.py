"""CFL-ramp stability search and cost accounting per iteration and per CTU."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ComparisonError, ConfigurationError, DivergenceError
from .solver import Formulation, Solver

__all__ = ["RampReport", "CostRow", "cfl_ramp", "cost_report", "write_bench_csv", "BENCH_HEADER"]

BENCH_HEADER = ("formulation", "cfl", "dt", "sec_per_iter", "hours_per_ctu", "stable")


@dataclass
class Rung:
    cfl: float
    stable: bool
    dt: float
    sec_per_iter: float
    message: str = ""


@dataclass
class RampReport:
    formulation: str
    mesh_hash: str
    order: int
    rungs: list = field(default_factory=list)
    chord: float = 1.0
    u_ref: float = 1.0

    @property
    def ladder(self):
        return [r.cfl for r in self.rungs]

    @property
    def last_stable(self):
        stable = [r for r in self.rungs if r.stable]
        return stable[-1] if stable else None

    @property
    def first_unstable(self):
        bad = [r for r in self.rungs if not r.stable]
        return bad[0] if bad else None

    @property
    def cfl_max(self):
        r = self.last_stable
        return None if r is None else r.cfl

    @property
    def dt_max(self):
        r = self.last_stable
        return None if r is None else r.dt

    @property
    def sec_per_iter(self):
        """Mean timed cost over the stable rungs."""
        vals = [r.sec_per_iter for r in self.rungs if r.stable and r.sec_per_iter > 0]
        return float(np.mean(vals)) if vals else 0.0

    @property
    def ok(self):
        return self.last_stable is not None


def cfl_ramp(mesh, config, initial_state, start=0.5, increment=0.1, probe_steps=100, max_rungs=200,
             warmup=5, chord=1.0, u_ref=1.0):
    """Raise the CFL number from ``start`` by ``increment`` until a probe run diverges.

    Every rung restarts from ``initial_state`` (an array, or a callable taking
    the solver's node coordinates) and runs ``probe_steps`` steps.  The
    ladder stops at the first unstable rung.  Wall time per iteration
    excludes the first ``warmup`` steps of each probe.
    """
    if int(probe_steps) != probe_steps or probe_steps < 1:
        raise ConfigurationError(f"probe_steps must be a positive integer, got {probe_steps!r}")
    if start <= 0.0 or increment <= 0.0:
        raise ConfigurationError("CFL start and increment must be positive")
    config = replace(config, fixed_dt=None)
    solver = Solver(mesh, config)
    try:
        q0 = initial_state(solver.metrics.x) if callable(initial_state) else np.asarray(initial_state, float)
        report = RampReport(config.formulation.value, mesh.hash(), config.order, chord=chord, u_ref=u_ref)
        for i in range(int(max_rungs)):
            # integer ladder arithmetic avoids 0.1 drift (0.5, 0.6, 0.7, ...)
            cfl = round(start + i * increment, 10)
            solver.config.cfl = cfl
            # the rung's time step is the CFL map applied to the common initial state
            solver.spatial_operator(q0)
            dt0 = solver.compute_dt(q0, cfl)
            try:
                _, _, rep = solver.run(q0, n_steps=int(probe_steps), chord=chord, u_ref=u_ref,
                                       timing_warmup=min(int(warmup), int(probe_steps) - 1))
            except DivergenceError as exc:
                report.rungs.append(Rung(cfl, False, float("nan"), 0.0, str(exc)))
                break
            report.rungs.append(Rung(cfl, True, dt0, rep.sec_per_iter))
        return report
    finally:
        solver.close()


@dataclass
class CostRow:
    formulation: str
    cfl_max: float
    dt_max: float
    sec_per_iter: float
    hours_per_ctu: float
    dt_ratio: float | None = None
    iter_cost_ratio: float | None = None
    ctu_cost_ratio: float | None = None


def hours_per_ctu(dt, sec_per_iter, chord=1.0, u_ref=1.0):
    """``(CTU / dt) * sec_per_iter / 3600`` with one CTU lasting ``chord / u_ref``."""
    return (chord / u_ref) / dt * sec_per_iter / 3600.0


def cost_report(reports, baseline=Formulation.EXPLICIT_LES.value, require=None):
    """Cost table from :class:`RampReport` objects.

    Ratio columns compare each formulation against ``baseline`` and stay
    ``None`` when the baseline is absent.  ``require`` lists formulations
    that must be present.
    """
    reports = list(reports)
    if not reports:
        raise ComparisonError("no reports to compare")
    hashes = {(r.mesh_hash, r.order) for r in reports}
    if len(hashes) > 1:
        raise ComparisonError(f"reports were produced on different meshes or orders: {sorted(hashes)}")
    names = [Formulation.parse(r.formulation).value for r in reports]
    for f in require or ():
        f = Formulation.parse(f).value
        if f not in names:
            raise ComparisonError(f"formulation {f} is missing from the reports")
    rows = []
    for r in reports:
        if not r.ok:
            raise ComparisonError(f"{r.formulation} has no stable CFL to report")
        rows.append(CostRow(r.formulation, r.cfl_max, r.dt_max, r.sec_per_iter,
                            hours_per_ctu(r.dt_max, r.sec_per_iter, r.chord, r.u_ref)))
    base_name = Formulation.parse(baseline).value
    base = next((row for row in rows if Formulation.parse(row.formulation).value == base_name), None)
    if base is not None:
        for row in rows:
            row.dt_ratio = row.dt_max / base.dt_max
            row.iter_cost_ratio = row.sec_per_iter / base.sec_per_iter if base.sec_per_iter else None
            row.ctu_cost_ratio = row.hours_per_ctu / base.hours_per_ctu if base.hours_per_ctu else None
    for row, r in zip(rows, reports):
        # consistency of the per-CTU formula
        ctu = row.hours_per_ctu * row.dt_max / row.sec_per_iter * 3600.0 if row.sec_per_iter else r.chord / r.u_ref
        if not math.isclose(ctu, r.chord / r.u_ref, rel_tol=1e-12):
            raise ComparisonError("per-CTU cost is inconsistent with dt and cost per iteration")
    return rows


def write_bench_csv(path, reports):
    """``bench.csv``: one row per tested rung of every ramp."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(BENCH_HEADER)
        for rep in reports:
            for r in rep.rungs:
                hpc = hours_per_ctu(r.dt, r.sec_per_iter, rep.chord, rep.u_ref) if r.stable and r.dt > 0 else float("nan")
                wr.writerow([rep.formulation, f"{r.cfl:.10g}", f"{r.dt:.17g}", f"{r.sec_per_iter:.17g}",
                             f"{hpc:.17g}", int(r.stable)])
