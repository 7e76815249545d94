"""Turn a :class:`~dgles.config.RunConfig` into meshes, solvers and run artefacts.

The command-line front end is a thin layer over these functions; the demo
scripts use them directly.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import cases
from .bench import cfl_ramp, cost_report, write_bench_csv
from .errors import ConfigurationError, DivergenceError, InsufficientDataError, MeshValidityError, SamplingError
from .fileio import read_checkpoint, read_mesh, write_checkpoint, write_mesh
from .mesh import (
    build_box_mesh,
    build_channel_mesh,
    build_deformed_box_mesh,
    compute_metrics,
    metric_identity_residual,
)
from .physics import GasModel
from .solver import BoundaryCondition, Formulation, SchemeConfig, Solver, every
from .spectral import PsdConfig, check_uniform, dominant_peaks, read_forces_csv, welch_psd, write_psd_csv
from .stats import (
    StatisticsAccumulator,
    SurfaceAccumulator,
    SurfaceRecord,
    integrate_forces,
    q_criterion,
    sample_wake_profiles,
    surface_record,
    wake_filename,
    write_forces_csv,
    write_surface_csv,
    write_vtk,
    write_wake_csv,
)

log = logging.getLogger(__name__)

__all__ = [
    "gas_model",
    "build_mesh",
    "scheme_config",
    "initial_state",
    "resolve_threads",
    "generate_mesh",
    "execute_run",
    "post_process",
    "compute_psd",
    "run_bench",
    "RunArtifacts",
]

METRIC_TOL = 1e-11


def gas_model(cfg):
    g = cfg.gas
    return GasModel(gamma=g.gamma, prandtl=g.prandtl, prandtl_turbulent=g.prandtl_turbulent,
                    mach=g.mach, reynolds=g.reynolds)


def resolve_threads(cfg, cli_threads=None):
    """Thread count: command line, then ``DGLES_THREADS``, then config, then the machine."""
    if cli_threads is not None:
        n = cli_threads
    elif os.environ.get("DGLES_THREADS"):
        try:
            n = int(os.environ["DGLES_THREADS"])
        except ValueError as exc:
            raise ConfigurationError(f"DGLES_THREADS must be an integer, got {os.environ['DGLES_THREADS']!r}") from exc
    elif cfg.threads is not None:
        n = cfg.threads
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ConfigurationError(f"thread count must be >= 1, got {n}")
    return int(n)


def build_mesh(cfg, base_dir="."):
    """Mesh described by ``cfg.mesh`` (generated, or read from ``mesh.path``)."""
    m = cfg.mesh
    if m.generator == "file":
        path = m.path if os.path.isabs(m.path) else os.path.join(base_dir, m.path)
        if not os.path.exists(path):
            raise FileNotFoundError(f"mesh file not found: {path}")
        return read_mesh(path)
    try:
        if m.generator == "tgv":
            ext = m.extents or [[0.0, 2 * math.pi]] * 3
            return build_box_mesh(m.nx, m.ny, m.nz, ext, (True, True, True), m.geo_order)
        ext = m.extents or [[0.0, 1.0]] * 3
        if m.generator == "box":
            return build_box_mesh(m.nx, m.ny, m.nz, ext, m.periodic, m.geo_order, m.boundary_tags or None)
        if m.generator == "deformed_box":
            return build_deformed_box_mesh(m.nx, m.ny, m.nz, ext, m.periodic, m.geo_order, m.amplitude,
                                           m.boundary_tags or None)
        if m.generator == "channel":
            ext = np.asarray(ext, float).reshape(3, 2)
            tags = m.boundary_tags or {}
            return build_channel_mesh(
                m.nx, m.ny, m.nz, ext[0, 1] - ext[0, 0], ext[1, 1] - ext[1, 0], ext[2, 1] - ext[2, 0],
                m.geo_order, m.grading, tags.get("ymin", "NoSlipWall"), tags.get("ymax", "MovingWall"),
            )
    except ConfigurationError as exc:
        raise ConfigurationError(f"mesh: {exc}") from exc
    raise ConfigurationError(f"mesh.generator: unknown generator {m.generator!r}")


def scheme_config(cfg, threads=1, deterministic=None):
    bcs = {}
    for tag, bc in cfg.boundary_conditions.items():
        bcs[tag] = BoundaryCondition(
            bc.kind, rho=bc.rho,
            velocity=None if bc.velocity is None else tuple(float(v) for v in bc.velocity),
            pressure=bc.pressure, wall_velocity=tuple(float(v) for v in bc.wall_velocity),
        )
    return SchemeConfig(
        formulation=cfg.formulation, order=cfg.order, interface=cfg.interface, c_v=cfg.c_v, sgs=cfg.sgs,
        cfl=cfg.time.cfl, fixed_dt=cfg.time.fixed_dt, gas=gas_model(cfg), bcs=bcs, threads=threads,
        deterministic=cfg.deterministic if deterministic is None else deterministic,
    )


def initial_state(cfg, x, gas):
    """Initial conservative field on node coordinates ``x``; random noise uses ``cfg.seed``."""
    ic = cfg.initial_condition
    vel = tuple(float(v) for v in ic.velocity)
    if ic.kind == "uniform":
        q = cases.uniform(x, gas, velocity=vel, pressure=ic.pressure)
    elif ic.kind == "taylor_green":
        q = cases.taylor_green(x, gas, p0=ic.pressure)
    elif ic.kind == "density_wave":
        q = cases.density_wave(x, gas, amplitude=ic.amplitude, velocity=vel,
                               pressure=gas.p_inf if ic.pressure is None else ic.pressure)
    elif ic.kind == "isentropic_vortex":
        q = cases.isentropic_vortex(x, gas, velocity=vel)
    elif ic.kind == "couette":
        ext = cfg.mesh.extents or [[0.0, 1.0]] * 3
        height = float(ext[1][1] - ext[1][0])
        wall = cfg.boundary_conditions.get("MovingWall")
        speed = 1.0 if wall is None else float(wall.wall_velocity[0])
        q = cases.couette(x, gas, height=height, wall_speed=speed, perturbation=ic.perturbation)
    else:
        raise ConfigurationError(f"initial_condition.kind: unknown kind {ic.kind!r}")
    if ic.noise > 0.0:
        rng = np.random.default_rng(cfg.seed)
        q = q.copy()
        q[..., 1:4] += ic.noise * q[..., 0:1] * rng.standard_normal(q[..., 1:4].shape)
    return q


def generate_mesh(cfg, out_path, base_dir="."):
    """Build the configured mesh, check it, and write it to ``out_path``."""
    mesh = build_mesh(cfg, base_dir)
    from .basis import build_basis  # noqa: PLC0415

    kind = Formulation.parse(cfg.formulation).node_kind
    metrics = compute_metrics(mesh, build_basis(kind, cfg.order)).metrics
    if np.any(metrics.J <= 0.0):
        raise MeshValidityError("non-positive Jacobian on the solution nodes")
    res = metric_identity_residual(metrics)
    if res > METRIC_TOL:
        raise MeshValidityError(f"metric identity residual {res:.3e} exceeds {METRIC_TOL:g}")
    write_mesh(mesh, out_path)
    return mesh, res


# ---------------------------------------------------------------------------
# run


@dataclass
class RunArtifacts:
    directory: str
    report: dict = field(default_factory=dict)
    final_checkpoint: str | None = None
    checkpoints: list = field(default_factory=list)
    diverged: bool = False


def _checkpoint_name(step):
    return f"checkpoint_{step:08d}.chk"


def _save_accumulators(path, stats_acc, surf_accs):
    arrays = {}
    if stats_acc is not None and stats_acc.samples:
        for name, rs in (("first", stats_acc.first), ("second", stats_acc.second)):
            arrays[f"{name}_total"], arrays[f"{name}_comp"] = rs.total, rs.comp
            arrays[f"{name}_count"] = np.array(rs.count)
        arrays["t_range"] = np.array([stats_acc.t_start, stats_acc.t_stop], dtype=float)
    for patch, acc in surf_accs.items():
        if acc._sums is None:
            continue
        for k, rs in acc._sums.items():
            arrays[f"surf::{patch}::{k}::total"] = rs.total
            arrays[f"surf::{patch}::{k}::comp"] = rs.comp
            arrays[f"surf::{patch}::{k}::count"] = np.array(rs.count)
    np.savez(path, **arrays)


def _load_accumulators(path, stats_acc, surf_accs, solver):
    from .stats import RunningSum  # noqa: PLC0415

    if not os.path.exists(path):
        return
    with np.load(path) as data:
        if "first_total" in data:
            for name, rs in (("first", stats_acc.first), ("second", stats_acc.second)):
                rs.total, rs.comp = data[f"{name}_total"].copy(), data[f"{name}_comp"].copy()
                rs.count = int(data[f"{name}_count"])
            stats_acc.t_start, stats_acc.t_stop = (float(v) for v in data["t_range"])
        for patch, acc in surf_accs.items():
            key = f"surf::{patch}::p::total"
            if key not in data:
                continue
            acc._template = surface_record(solver, solver._resume_q, patch, acc.streamwise)
            acc._sums = {}
            for k in ("p", "rho", "traction"):
                rs = RunningSum(data[f"surf::{patch}::{k}::total"].shape)
                rs.total = data[f"surf::{patch}::{k}::total"].copy()
                rs.comp = data[f"surf::{patch}::{k}::comp"].copy()
                rs.count = int(data[f"surf::{patch}::{k}::count"])
                acc._sums[k] = rs


def execute_run(cfg, out_dir, threads=1, deterministic=None, resume=None, base_dir="."):
    """Run the configured case; write checkpoints, forces, statistics and a report.

    Raises :class:`DivergenceError` after saving ``last_valid.chk`` when the
    integration fails.
    """
    os.makedirs(out_dir, exist_ok=True)
    mesh = build_mesh(cfg, base_dir)
    scheme = scheme_config(cfg, threads, deterministic)
    solver = Solver(mesh, scheme)
    gas = solver.gas
    ref = cfg.reference
    ctu_time = ref.chord / ref.u_inf
    t_end = cfg.time.t_end * ctu_time
    arts = RunArtifacts(directory=out_dir)

    step0, t0 = 0, 0.0
    q0 = initial_state(cfg, solver.metrics.x, gas)
    if resume is not None:
        if not os.path.exists(resume):
            raise FileNotFoundError(f"checkpoint not found: {resume}")
        ck = read_checkpoint(resume)
        if ck.mesh_hash != mesh.hash():
            raise ConfigurationError(f"checkpoint {resume} was written for mesh {ck.mesh_hash}, not {mesh.hash()}")
        if ck.formulation != scheme.formulation.value or ck.order != scheme.order:
            raise ConfigurationError(f"checkpoint {resume} belongs to {ck.formulation} N={ck.order}")
        q0, step0, t0 = ck.state, ck.step, ck.time

    stats_acc = StatisticsAccumulator(q0.shape[:-1])
    surf_accs = {p: SurfaceAccumulator(solver, p, ref.drag_axis) for p in cfg.output.surface_patches}
    if resume is not None:
        solver._resume_q = q0
        _load_accumulators(os.path.splitext(resume)[0] + ".stats.npz", stats_acc, surf_accs, solver)

    # forces and energy histories (earlier rows are kept on restart)
    force_rows, energy_rows = [], []
    forces_path = os.path.join(out_dir, "forces.csv")
    energy_path = os.path.join(out_dir, "energy.csv")
    patches = list(cfg.output.force_patches)
    if resume is not None:
        if patches and os.path.exists(forces_path):
            cols = read_forces_csv(forces_path)
            keep = cols["time"] <= t0 * (1 + 1e-15) / ctu_time + 1e-300
            force_rows = [(cols["time"][i], {c: cols[c][i] for c in cols}) for i in np.nonzero(keep)[0]]
        if os.path.exists(energy_path):
            data = np.loadtxt(energy_path, delimiter=",", skiprows=1, ndmin=2)
            energy_rows = [tuple(r) for r in data if r[0] <= t0 / ctu_time * (1 + 1e-15)]
    else:
        energy_rows.append((t0 / ctu_time, solver.kinetic_energy(q0)))

    def record(info):
        ctu = info.t / ctu_time
        energy_rows.append((ctu, solver.kinetic_energy(info.q)))
        if patches:
            fc = integrate_forces(solver, info.q, patches, ref.rho_inf, ref.u_inf, ref.area,
                                  ref.drag_axis, ref.lift_axis, grad=solver.aux.get("grad"))
            force_rows.append((ctu, fc))
        st = cfg.statistics
        if st.start - 1e-12 <= ctu <= st.start + st.duration + 1e-12 and (info.step % st.interval_steps == 0):
            stats_acc.accumulate(info.q, ctu)
            for acc in surf_accs.values():
                acc.accumulate(info.q)

    def checkpoint(info):
        path = os.path.join(out_dir, _checkpoint_name(info.step))
        write_checkpoint(path, info.q, info.step, info.t, scheme.formulation.value, scheme.order, mesh.hash())
        _save_accumulators(os.path.splitext(path)[0] + ".stats.npz", stats_acc, surf_accs)
        arts.checkpoints.append(path)

    callbacks = [record]
    if cfg.output.checkpoint_interval:
        iv = cfg.output.checkpoint_interval
        start = (math.floor(t0 / ctu_time / iv + 1e-9) + 1) * iv
        callbacks.append(every(iv, checkpoint, ref.chord, ref.u_inf, start=start))

    def on_divergence(q, t, step):
        write_checkpoint(os.path.join(out_dir, "last_valid.chk"), q, step, t, scheme.formulation.value,
                         scheme.order, mesh.hash())

    try:
        q, t, rep = solver.run(q0, t0=t0, t_end=t_end, n_steps=cfg.time.max_steps, callbacks=callbacks,
                               chord=ref.chord, u_ref=ref.u_inf, on_divergence=on_divergence, step0=step0)
    except DivergenceError:
        arts.diverged = True
        _write_histories(forces_path, energy_path, force_rows, energy_rows, patches)
        raise
    finally:
        solver.close()

    step = step0 + rep.steps
    final = os.path.join(out_dir, "final.chk")
    write_checkpoint(final, q, step, t, scheme.formulation.value, scheme.order, mesh.hash())
    arts.final_checkpoint = final
    _write_histories(forces_path, energy_path, force_rows, energy_rows, patches)
    if stats_acc.samples >= 2:
        fs = stats_acc.finalize()
        np.savez(os.path.join(out_dir, "statistics.npz"), mean=fs.mean, reynolds=fs.reynolds,
                 samples=fs.samples, t_range=np.array([fs.t_start, fs.t_stop], dtype=float))
    for patch, acc in surf_accs.items():
        if acc._sums is not None:
            rec = acc.finalize()
            np.savez(os.path.join(out_dir, f"surface_{_safe(patch)}.npz"), patch=patch,
                     **{k: getattr(rec, k) for k in _SURF_FIELDS}, samples=rec.samples)
    arts.report = {
        "formulation": scheme.formulation.value,
        "order": scheme.order,
        "mesh_hash": mesh.hash(),
        "steps": step,
        "steps_this_run": rep.steps,
        "time": t,
        "ctu": t / ctu_time,
        "wall_time": rep.wall_time,
        "sec_per_iter": rep.sec_per_iter,
        "sec_per_ctu": rep.sec_per_ctu,
        "dt_last": rep.dt_last,
        "threads": solver.threads,
        "deterministic": scheme.deterministic,
        "statistics_samples": stats_acc.samples,
    }
    with open(os.path.join(out_dir, "run_report.json"), "w") as fh:
        json.dump(arts.report, fh, indent=2)
    return arts


_SURF_FIELDS = ("x", "n_wall", "area_weights", "p", "rho", "traction", "wall_distance", "streamwise_spacing", "mu")


def _safe(name):
    return name.replace(":", "_")


def _write_histories(forces_path, energy_path, force_rows, energy_rows, patches):
    from .stats import ForceCoefficients  # noqa: PLC0415

    if patches:
        times, coeffs = [], []
        for t, c in force_rows:
            if isinstance(c, dict):  # restored row
                per = {p: (c[f"cl_{p}"], c[f"cd_{p}"], None) for p in patches}
                c = ForceCoefficients(cl=c["cl_total"], cd=c["cd_total"], force=None, per_patch=per)
            times.append(t)
            coeffs.append(c)
        write_forces_csv(forces_path, times, coeffs, patches)
    with open(energy_path, "w") as fh:
        fh.write("ctu,kinetic_energy\n")
        for t, e in energy_rows:
            fh.write(f"{t:.17g},{e:.17g}\n")


# ---------------------------------------------------------------------------
# post-processing


def post_process(cfg, out_dir, threads=1, base_dir="."):
    """Write VTK, surface, wake and PSD outputs from a finished run; returns notes."""
    notes = []
    final = os.path.join(out_dir, "final.chk")
    if not os.path.exists(final):
        raise FileNotFoundError(f"expected checkpoint not found: {final}")
    mesh = build_mesh(cfg, base_dir)
    solver = Solver(mesh, scheme_config(cfg, threads))
    try:
        ck = read_checkpoint(final)
        if ck.mesh_hash != mesh.hash():
            raise ConfigurationError(f"{final} was written for a different mesh")
        q = ck.state
        gas = solver.gas
        grad = solver.compute_gradients(q)
        stats_path = os.path.join(out_dir, "statistics.npz")
        fstats = None
        if os.path.exists(stats_path):
            from .stats import FlowStatistics  # noqa: PLC0415

            with np.load(stats_path) as d:
                fstats = FlowStatistics(d["mean"], d["reynolds"], int(d["samples"]), *d["t_range"])
        if cfg.output.vtk:
            rho = q[..., 0]
            data = {
                "density": rho,
                "velocity": q[..., 1:4] / rho[..., None],
                "pressure": (gas.gamma - 1.0) * (q[..., 4] - 0.5 * np.sum(q[..., 1:4] ** 2, axis=-1) / rho),
                "Q": q_criterion(grad),
            }
            if fstats is not None:
                data["mean_velocity"] = fstats.mean
                data["tke"] = fstats.tke
            write_vtk(os.path.join(out_dir, "field.vtk"), solver.metrics.x, data)
        ref = cfg.reference
        records = []
        for patch in cfg.output.surface_patches:
            path = os.path.join(out_dir, f"surface_{_safe(patch)}.npz")
            if os.path.exists(path):
                with np.load(path) as d:
                    records.append(SurfaceRecord(patch=patch, samples=int(d["samples"]),
                                                 **{k: (float(d[k]) if k == "mu" else d[k]) for k in _SURF_FIELDS}))
            else:
                notes.append(f"no time-averaged surface data for {patch}; using the final state")
                records.append(surface_record(solver, q, patch, ref.drag_axis, grad))
        if records:
            write_surface_csv(os.path.join(out_dir, "surface.csv"), records, ref.chord, ref.rho_inf, ref.u_inf,
                              gas.p_inf, ref.drag_axis, ref.span_axis)
        if cfg.wake.stations:
            if fstats is None:
                notes.append("wake stations configured but no statistics were collected; skipped")
            else:
                for prof in sample_wake_profiles(fstats, solver, cfg.wake.stations, ref.chord, ref.u_inf,
                                                 cfg.wake.z, cfg.wake.y_range, cfg.wake.n_points):
                    write_wake_csv(os.path.join(out_dir, wake_filename(prof.station)), prof)
        else:
            notes.append("no wake stations configured; wake profiles skipped")
    finally:
        solver.close()
    forces = os.path.join(out_dir, "forces.csv")
    if os.path.exists(forces):
        try:
            compute_psd(cfg, forces, os.path.join(out_dir, "psd.csv"))
        except (SamplingError, InsufficientDataError) as exc:
            # adaptive time steps give uneven force samples; set time.fixed_dt for spectra
            notes.append(f"PSD skipped: {exc}")
    else:
        notes.append("no forces.csv; PSD skipped")
    return notes


def compute_psd(cfg, forces_path, out_path):
    """PSD of every lift series in ``forces_path``; returns the dominant peaks of the total."""
    if not os.path.exists(forces_path):
        raise FileNotFoundError(f"forces file not found: {forces_path}")
    cols = read_forces_csv(forces_path)
    if len(cols.get("time", [])) < 2:
        raise InsufficientDataError(f"{forces_path} holds fewer than two samples")
    ref = cfg.reference
    # stored times are CTU; convert back to solver time units
    dt = check_uniform(cols["time"] * ref.chord / ref.u_inf, rtol=1e-6)
    pc = PsdConfig(cfg.psd.segment_length, cfg.psd.overlap, cfg.psd.window, dt, ref.chord, ref.u_inf)
    results = {"total": welch_psd(cols["cl_total"], pc)}
    for name in cols:
        if name.startswith("cl_") and name != "cl_total":
            results[name[3:]] = welch_psd(cols[name], pc)
    write_psd_csv(out_path, results)
    return dominant_peaks(results["total"], cfg.psd.peaks)


# ---------------------------------------------------------------------------
# benchmarking


def run_bench(cfg, out_dir, threads=1, base_dir="."):
    """CFL ramps for the configured formulations; writes ``bench.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    mesh = build_mesh(cfg, base_dir)
    reports = []
    b = cfg.bench
    for form in b.formulations:
        sub = _with_formulation(cfg, form)
        scheme = scheme_config(sub, threads, deterministic=True)
        gas = scheme.gas
        reports.append(cfl_ramp(mesh, scheme, lambda x, s=sub, g=gas: initial_state(s, x, g), b.start, b.increment,
                                b.probe_steps, b.max_rungs, b.warmup, cfg.reference.chord, cfg.reference.u_inf))
    write_bench_csv(os.path.join(out_dir, "bench.csv"), reports)
    rows = cost_report([r for r in reports if r.ok]) if any(r.ok for r in reports) else []
    return reports, rows


def _with_formulation(cfg, form):
    import copy  # noqa: PLC0415

    sub = copy.deepcopy(cfg)
    sub.formulation = form
    sub.interface = None if Formulation.parse(form) is not Formulation.parse(cfg.formulation) else cfg.interface
    return sub
