"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) for the thirteen lines
alone, or through pytest, where the lines are repeated in the terminal
summary.
"""

from __future__ import annotations

import functools
import math
import os
import sys
import tempfile
import time

import numpy as np
import pytest

from dgles import cases
from dgles.basis import NodeKind, build_basis
from dgles.bench import cfl_ramp, cost_report
from dgles.fileio import read_checkpoint, write_checkpoint
from dgles.mesh import build_box_mesh, build_channel_mesh, build_deformed_box_mesh
from dgles.physics import GasModel, euler_flux, filter_width, kg_two_point_flux, vreman_mu_t
from dgles.solver import BoundaryCondition, SchemeConfig, Solver
from dgles.spectral import PsdConfig, Window, welch_psd
from dgles.stats import (
    StatisticsAccumulator,
    integrate_forces,
    q_criterion,
    surface_cf,
    surface_record,
)

RESULTS = {}
TWO_PI = 2.0 * np.pi


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    RESULTS[number] = line
    print(line, flush=True)
    return ok


def tgv_box(n):
    return build_box_mesh(n, n, n, [(0.0, TWO_PI)] * 3, (True, True, True))


# ---------------------------------------------------------------------------
# 1-2: operators


def criterion_1():
    worst = 0.0
    for order in range(1, 9):
        b = build_basis(NodeKind.GAUSS_LOBATTO, order)
        w = np.diag(b.weights)
        bmat = np.zeros((b.n, b.n))
        bmat[0, 0], bmat[-1, -1] = -1.0, 1.0
        worst = max(worst, np.max(np.abs(w @ b.diff + b.diff.T @ w - bmat)))
    return report(1, worst <= 1e-12, f"SBP identity, GL N=1..8, max residual {worst:.2e} (tol 1e-12)")


def _exact_degree(b, tol=1e-12):
    degree = -1
    for k in range(0, 2 * b.order + 4):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        if abs(np.sum(b.weights * b.nodes**k) - exact) > tol:
            break
        degree = k
    return degree


def criterion_2():
    bad = []
    for order in range(1, 9):
        g = _exact_degree(build_basis(NodeKind.GAUSS, order))
        gl = _exact_degree(build_basis(NodeKind.GAUSS_LOBATTO, order))
        if g != 2 * order + 1 or gl != 2 * order - 1:
            bad.append((order, g, gl))
    return report(2, not bad, f"quadrature exactness Gauss 2N+1 and GL 2N-1 for N=1..8, mismatches {bad}")


# ---------------------------------------------------------------------------
# 3-6: discretisation properties


def criterion_3():
    gas = GasModel(reynolds=math.inf)
    mesh = build_deformed_box_mesh(2, 2, 2, [(0.0, 1.0)] * 3, (True, True, True), 3, 0.05)
    devs = {}
    for form in ("eLES", "iLES"):
        s = Solver(mesh, SchemeConfig(formulation=form, order=4, gas=gas, cfl=0.5))
        q0 = cases.uniform(s.metrics.x, gas, velocity=(1.0, 0.3, -0.2))
        q, _, _ = s.run(q0, n_steps=100)
        devs[form] = float(np.max(np.abs(q - q0)))
    worst = max(devs.values())
    detail = ", ".join(f"{k} {v:.2e}" for k, v in devs.items())
    return report(3, worst <= 1e-11, f"free stream on curved periodic box, 100 steps: {detail} (tol 1e-11)")


def criterion_4():
    gas = GasModel(reynolds=math.inf)
    mesh = tgv_box(4)
    drifts = {}
    for form in ("eLES", "iLES"):
        s = Solver(mesh, SchemeConfig(formulation=form, order=3, gas=gas, cfl=0.5))
        q0 = cases.taylor_green(s.metrics.x, gas)
        c0 = s.conserved_totals(q0)
        q, _, _ = s.run(q0, n_steps=200)
        c1 = s.conserved_totals(q)
        # momentum totals vanish for this flow; scale them by total mass times U
        scale = np.array([abs(c0[0]), c0[0], c0[0], c0[0], abs(c0[4])])
        drifts[form] = float(np.max(np.abs(c1 - c0) / scale))
    worst = max(drifts.values())
    detail = ", ".join(f"{k} {v:.2e}" for k, v in drifts.items())
    return report(4, worst <= 1e-11, f"conservation, inviscid TGV 4^3 N=3, 200 steps: {detail} (tol 1e-11)")


def _ke_change(interface, dt, mesh, gas):
    s = Solver(mesh, SchemeConfig(formulation="iLES", order=3, gas=gas, interface=interface, fixed_dt=dt))
    q0 = cases.taylor_green(s.metrics.x, gas)
    q, _, _ = s.run(q0, t_end=0.5)
    k0 = s.kinetic_energy(q0)
    return (s.kinetic_energy(q) - k0) / k0


def criterion_5():
    gas = GasModel(reynolds=math.inf)
    mesh = tgv_box(4)
    dts = (0.005, 0.0025, 0.00125)
    central = [_ke_change("CentralKG", dt, mesh, gas) for dt in dts]
    lf = [_ke_change("KGLaxFriedrichs", dt, mesh, gas) for dt in dts]
    # the time-integration part of the drift vanishes at the RK order
    d1, d2 = abs(central[0] - central[1]), abs(central[1] - central[2])
    order = math.log2(d1 / d2)
    ok = abs(order - 3.0) <= 0.3 and all(v <= 0.0 for v in lf)
    return report(
        5, ok,
        f"KE drift, central KG {[f'{v:.6e}' for v in central]}, temporal order {order:.2f} (3.0 +- 0.3); "
        f"LF drift {[f'{v:.2e}' for v in lf]} (all <= 0)",
    )


def _density_wave_errors(form, order, sizes, gas, pressure=1.0):
    # at p ~ 1 the acoustic speed is close to the advection speed; at M = 0.1 the
    # Lax-Friedrichs penalty is ten times the upwind value and the even-N rates
    # sit at the continuous-Galerkin value N over any affordable mesh range
    errs = []
    for nx in sizes:
        mesh = build_box_mesh(nx, 1, 1, [(0.0, TWO_PI), (0.0, 1.0), (0.0, 1.0)], (True, True, True))
        s = Solver(mesh, SchemeConfig(formulation=form, order=order, gas=gas, cfl=0.2))
        q0 = cases.density_wave(s.metrics.x, gas, pressure=pressure)
        q, t, _ = s.run(q0, t_end=1.0)
        exact = cases.density_wave(s.metrics.x, gas, t=t, pressure=pressure)
        errs.append(math.sqrt(np.sum(s.mass * (q[..., 0] - exact[..., 0]) ** 2)))
    return np.array(errs)


def criterion_6():
    gas = GasModel(reynolds=math.inf)
    rates, ok = [], True
    for form, margin in (("eLES", 0.5), ("iLES", 0.0)):
        for order in (2, 3, 4):
            e = _density_wave_errors(form, order, (4, 8, 16), gas)
            rate = math.log2(e[-2] / e[-1])
            ok &= rate >= order + margin
            rates.append(f"{form} N={order}: {rate:.2f}")
    return report(6, ok, "density-wave L2 orders (eLES >= N+0.5, iLES >= N): " + ", ".join(rates))


# ---------------------------------------------------------------------------
# 7-8: model terms


def criterion_7():
    rng = np.random.default_rng(7)
    rho, delta = 1.3, 0.17
    zero_cases = [np.zeros((3, 3))]
    for i in range(3):
        for j in range(3):
            if i != j:
                a = np.zeros((3, 3))
                a[i, j] = 2.5
                zero_cases.append(a)
    zero = max(float(vreman_mu_t(a, rho, delta)) for a in zero_cases)
    alphas = rng.standard_normal((100_000, 3, 3)) * rng.uniform(0.0, 10.0, (100_000, 1, 1))
    mut = vreman_mu_t(alphas, np.ones(100_000), np.full(100_000, delta))
    s = -1.7
    iso = float(vreman_mu_t(s * np.eye(3), rho, delta))
    iso_exact = 0.07 * rho * delta**2 * abs(s)
    width = float(filter_width(1.0, 4))
    ok = zero == 0.0 and np.all(mut >= 0.0) and abs(iso - iso_exact) <= 1e-12 and abs(width - 0.2) <= 1e-15
    return report(
        7, ok,
        f"Vreman: max mu_t over uniform/shear {zero:g}, min over 1e5 random {mut.min():.2e}, "
        f"dilatation error {abs(iso - iso_exact):.1e}, filter width {width:.15g}",
    )


def _kg_oracle(ul, ur, n, gamma):
    out = np.empty(5)
    rl, rr = ul[0], ur[0]
    vl, vr = ul[1:4] / rl, ur[1:4] / rr
    pl = (gamma - 1.0) * (ul[4] - 0.5 * rl * (vl @ vl))
    pr = (gamma - 1.0) * (ur[4] - 0.5 * rr * (vr @ vr))
    rho = (rl + rr) / 2.0
    vn = ((vl[0] + vr[0]) * n[0] + (vl[1] + vr[1]) * n[1] + (vl[2] + vr[2]) * n[2]) / 2.0
    p = (pl + pr) / 2.0
    out[0] = rho * vn
    for k in range(3):
        out[1 + k] = rho * vn * (vl[k] + vr[k]) / 2.0 + p * n[k]
    out[4] = rho * vn * (ul[4] / rl + ur[4] / rr) / 2.0 + p * vn
    return out


def criterion_8():
    gas = GasModel(mach=0.845154)  # p_inf close to 1 keeps all flux entries O(1)
    rng = np.random.default_rng(8)
    m = 10_000

    def states():
        rho = rng.uniform(0.5, 2.0, m)
        v = rng.uniform(-1.0, 1.0, (m, 3))
        p = rng.uniform(0.5, 2.0, m)
        e = p / (gas.gamma - 1.0) + 0.5 * rho * np.sum(v * v, axis=1)
        return np.column_stack([rho, rho[:, None] * v, e])

    ul, ur = states(), states()
    n = rng.standard_normal((m, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    consistency = np.max(np.abs(kg_two_point_flux(ul, ul, n, gas) - np.einsum("mdk,md->mk", euler_flux(ul, gas), n)))
    symmetry = np.max(np.abs(kg_two_point_flux(ul, ur, n, gas) - kg_two_point_flux(ur, ul, n, gas)))
    f = kg_two_point_flux(ul, ur, n, gas)
    oracle = max(np.max(np.abs(f[i] - _kg_oracle(ul[i], ur[i], n[i], gas.gamma))) for i in range(m))
    ok = consistency <= 1e-14 and symmetry <= 1e-14 and oracle <= 1e-13
    return report(
        8, ok,
        f"KG flux over 1e4 pairs: consistency {consistency:.1e}, symmetry {symmetry:.1e} (tol 1e-14), "
        f"oracle {oracle:.1e} (tol 1e-13)",
    )


# ---------------------------------------------------------------------------
# 9-10: stability and cost


@functools.lru_cache(maxsize=None)
def _ramps():
    gas = GasModel(reynolds=math.inf)
    mesh = tgv_box(2)
    reports = []
    for form in ("eLES", "iLES"):
        cfg = SchemeConfig(formulation=form, order=4, gas=gas)
        init = functools.partial(cases.density_wave, gas=gas, pressure=gas.p_inf, velocity=(1.0, 0.5, 0.25))
        reports.append(cfl_ramp(mesh, cfg, lambda x, f=init: f(x)))
    return tuple(reports)


def criterion_9():
    eles, iles = _ramps()
    if not (eles.ok and iles.ok):
        return report(9, False, "a ramp found no stable CFL")
    ratio = iles.cfl_max / eles.cfl_max
    return report(
        9, 1.2 <= ratio <= 2.0,
        f"CFL_max iLES {iles.cfl_max:g} / eLES {eles.cfl_max:g} = {ratio:.3f} (band [1.2, 2.0]); "
        f"dt ratio {iles.dt_max / eles.dt_max:.3f}",
    )


def _interleaved_step_cost(solvers, states, samples=15):
    for name in solvers:
        solvers[name].rk3_step(states[name])
    times = {name: [] for name in solvers}
    for _ in range(samples):
        for name, s in solvers.items():
            t0 = time.perf_counter()
            s.rk3_step(states[name])
            times[name].append(time.perf_counter() - t0)
    return {name: min(v) for name, v in times.items()}


def criterion_10():
    gas = GasModel(reynolds=1600.0)
    mesh = tgv_box(4)
    solvers, states = {}, {}
    for form in ("eLES", "iLES"):
        solvers[form] = Solver(mesh, SchemeConfig(formulation=form, order=4, gas=gas))
        states[form] = cases.taylor_green(solvers[form].metrics.x, gas)
    cost = _interleaved_step_cost(solvers, states)
    iter_ratio = cost["iLES"] / cost["eLES"]
    rows = {r.formulation: r for r in cost_report(_ramps())}
    row = rows["ImplicitLES_KG_GaussLobatto"]
    algebra = abs(row.ctu_cost_ratio - row.iter_cost_ratio / row.dt_ratio)
    ok = abs(iter_ratio - 1.0) <= 0.15 and algebra <= 1e-12
    return report(
        10, ok,
        f"per-iteration cost iLES/eLES {iter_ratio:.3f} (within +-15%); per-CTU ratio {row.ctu_cost_ratio:.4f} "
        f"= iteration ratio / dt ratio to {algebra:.1e}",
    )


# ---------------------------------------------------------------------------
# 11-13: post-processing and reproducibility


def criterion_11():
    fs, nseg = 64.0, 256
    t = np.arange(4096) / fs
    k = 37
    f0 = k * fs / nseg
    res = welch_psd(np.sin(2 * np.pi * f0 * t), PsdConfig(nseg, 0.5, Window.HAMMING, 1.0 / fs))
    peak = int(np.argmax(res.psd))
    noise = np.random.default_rng(11).standard_normal(2**16)
    white = welch_psd(noise, PsdConfig(1024, 0.5, Window.HAMMING, 1.0 / fs))
    parseval = np.sum(white.psd) * white.df / np.var(noise)
    const = welch_psd(np.full(1024, 3.0), PsdConfig(128, 0.5, Window.RECTANGULAR, 1.0 / fs))
    leak = np.max(const.psd[1:]) / const.psd[0]
    ok = peak == k and abs(parseval - 1.0) <= 0.02 and leak <= 1e-20
    return report(
        11, ok,
        f"PSD: on-bin sine peak at bin {peak} (expected {k}), Parseval ratio {parseval:.4f} (+-2%), "
        f"constant signal leakage {leak:.1e}",
    )


def _couette_cf():
    gas = GasModel(reynolds=5.0, mach=0.2)
    mesh = build_channel_mesh(1, 3, 1, length=1.0, height=1.0, width=1.0)
    bcs = {"MovingWall": BoundaryCondition("MovingWall", wall_velocity=(1.0, 0.0, 0.0))}
    s = Solver(mesh, SchemeConfig(formulation="eLES", order=3, gas=gas, cfl=0.5, bcs=bcs))
    q0 = cases.couette(s.metrics.x, gas, perturbation=0.1)
    q, _, _ = s.run(q0, t_end=4.0)
    cf = surface_cf(surface_record(s, q, "NoSlipWall")).cf
    exact = 2.0 * gas.mu  # tau_w = mu U / h with U = h = 1
    return float(np.max(np.abs(cf / exact - 1.0)))


def criterion_12():
    rng = np.random.default_rng(12)
    samples = rng.standard_normal((30, 10, 3))
    parts = [StatisticsAccumulator((10,)) for _ in range(3)]
    whole = StatisticsAccumulator((10,))
    for i, v in enumerate(samples):
        parts[i // 10].add_velocity(v)
        whole.add_velocity(v)

    def copy(acc):
        out = StatisticsAccumulator(acc.shape)
        return out.merge(acc)

    left = copy(parts[0]).merge(parts[1]).merge(parts[2]).finalize()
    right = copy(parts[0]).merge(copy(parts[1]).merge(parts[2])).finalize()
    ref = whole.finalize()
    assoc = max(np.max(np.abs(left.reynolds - right.reynolds)), np.max(np.abs(left.reynolds - ref.reynolds)),
                np.max(np.abs(left.mean - ref.mean)))

    gas = GasModel(reynolds=100.0)
    mesh = build_deformed_box_mesh(2, 2, 2, [(0.0, 1.0)] * 3, (False, False, False), 2, 0.05,
                                   {side: "NoSlipWall" for side in ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")})
    s = Solver(mesh, SchemeConfig(formulation="iLES", order=3, gas=gas))
    q = cases.uniform(s.metrics.x, gas, velocity=(0.0, 0.0, 0.0), pressure=2.5)
    force = np.max(np.abs(integrate_forces(s, q, ["NoSlipWall"]).force))

    cf_err = _couette_cf()

    shear = np.zeros((3, 3))
    shear[1, 0] = 1.0  # du/dy = 1: equal strain and rotation
    rotation = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    strain = np.diag([1.0, -1.0, 0.0])
    qs = [float(q_criterion(a)) for a in (shear, rotation, strain)]
    signs_ok = abs(qs[0]) <= 1e-15 and qs[1] > 0.0 and qs[2] < 0.0

    ok = assoc <= 1e-12 and force <= 1e-12 and cf_err <= 1e-3 and signs_ok
    return report(
        12, ok,
        f"merge associativity {assoc:.1e}, closed-surface force {force:.1e}, Couette Cf rel. error {cf_err:.2e} "
        f"(tol 1e-3), Q shear/rotation/strain {qs}",
    )


def criterion_13():
    gas = GasModel(reynolds=400.0)
    mesh = tgv_box(2)
    blobs, restart_ok = {}, True
    with tempfile.TemporaryDirectory() as tmp:
        for form in ("eLES", "iLES"):
            for threads in (1, 2, 3):
                s = Solver(mesh, SchemeConfig(formulation=form, order=3, gas=gas, threads=threads, deterministic=True))
                q0 = cases.taylor_green(s.metrics.x, gas)
                q, t, _ = s.run(q0, n_steps=20)
                path = os.path.join(tmp, f"{form}_{threads}.chk")
                write_checkpoint(path, q, 20, t, s.config.formulation.value, 3, mesh.hash())
                with open(path, "rb") as fh:
                    blobs[(form, threads)] = fh.read()
                if threads == 1:
                    qa, ta, _ = s.run(q0, n_steps=10)
                    mid = os.path.join(tmp, f"{form}_mid.chk")
                    write_checkpoint(mid, qa, 10, ta, s.config.formulation.value, 3, mesh.hash())
                    ck = read_checkpoint(mid)
                    qb, tb, _ = s.run(ck.state, t0=ck.time, n_steps=10, step0=ck.step)
                    restart_ok &= np.array_equal(qb, q) and tb == t
                s.close()
    same = all(blobs[(f, n)] == blobs[(f, 1)] for f, n in blobs)
    return report(13, same and restart_ok,
                  f"checkpoints bit-identical across 1/2/3 threads: {same}; restart equivalence: {restart_ok}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10, criterion_11, criterion_12, criterion_13]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i + 1}" for i in range(len(CRITERIA))])
def test_criterion(check):
    assert check()


if __name__ == "__main__":
    results = [check() for check in CRITERIA]
    sys.exit(0 if all(results) else 1)
