import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgles import cases
from dgles.errors import ConfigurationError, InsufficientDataError, RangeError
from dgles.mesh import build_box_mesh, build_channel_mesh, remove_elements
from dgles.physics import GasModel, from_primitive
from dgles.solver import BoundaryCondition, SchemeConfig, Solver
from dgles.stats import (
    SURFACE_HEADER,
    WAKE_HEADER,
    FlowStatistics,
    RunningSum,
    StatisticsAccumulator,
    SurfaceAccumulator,
    evaluate_at_points,
    forces_header,
    integrate_forces,
    locate_points,
    q_criterion,
    sample_wake_profiles,
    spanwise_average,
    surface_cf,
    surface_cp,
    surface_record,
    wake_filename,
    write_forces_csv,
    write_surface_csv,
    write_vtk,
    write_wake_csv,
)

INVISCID = GasModel(reynolds=math.inf)


def header(path):
    with open(path, newline="") as fh:
        return tuple(next(csv.reader(fh)))


# ---------------------------------------------------------------------------
# accumulators


def test_constant_signal():
    acc = StatisticsAccumulator((4,))
    for _ in range(5):
        acc.add_velocity(np.tile([2.0, -1.0, 0.5], (4, 1)))
    fs = acc.finalize()
    np.testing.assert_allclose(fs.mean, np.tile([2.0, -1.0, 0.5], (4, 1)), atol=1e-15)
    assert np.all(fs.u_rms == 0.0) and np.all(fs.tke == 0.0)


def test_alternating_samples():
    acc = StatisticsAccumulator(())
    for i in range(10):
        acc.add_velocity(np.array([(-1.0) ** i, 0.0, 0.0]), t=float(i))
    fs = acc.finalize()
    assert fs.mean[0] == 0.0 and fs.reynolds[0] == 1.0 and fs.tke == 0.5
    assert (fs.t_start, fs.t_stop) == (0.0, 9.0)


def test_finalize_needs_two_samples():
    acc = StatisticsAccumulator((2,))
    acc.add_velocity(np.zeros((2, 3)))
    with pytest.raises(InsufficientDataError):
        acc.finalize()


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**31 - 1))
def test_merge_equals_concatenated_stream(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 3, 3)) * 10.0 + 5.0
    cut1, cut2 = sorted(rng.integers(0, n + 1, 2))
    parts = [StatisticsAccumulator((3,)) for _ in range(3)]
    whole = StatisticsAccumulator((3,))
    for i, s in enumerate(v):
        parts[int(i >= cut1) + int(i >= cut2)].add_velocity(s)
        whole.add_velocity(s)
    merged = StatisticsAccumulator((3,)).merge(parts[0]).merge(StatisticsAccumulator((3,)).merge(parts[1]).merge(parts[2]))
    a, b = merged.finalize(), whole.finalize()
    assert np.max(np.abs(a.reynolds - b.reynolds)) <= 1e-12 * max(1.0, np.abs(b.reynolds).max())
    assert np.max(np.abs(a.mean - b.mean)) <= 1e-12 * max(1.0, np.abs(b.mean).max())
    assert np.all(a.reynolds[..., 0:3] >= 0.0)


def test_running_sum_is_compensated():
    rs = RunningSum(())
    rs.add(1.0)
    for _ in range(10_000):
        rs.add(1e-16)
    assert rs.value == 1.0 + 1e-12


def test_merge_rejects_different_shapes():
    with pytest.raises(ValueError):
        StatisticsAccumulator((2,)).merge(StatisticsAccumulator((3,)))


# ---------------------------------------------------------------------------
# wall coefficients


def test_cp_examples():
    assert surface_cp(5.0, 1.0, 2.0, 5.0) == 0.0
    assert surface_cp(5.0 + 0.5 * 1.2 * 3.0**2, 1.2, 3.0, 5.0) == pytest.approx(1.0, abs=1e-15)
    p = np.array([1.0, 2.5, -0.5])
    np.testing.assert_allclose(surface_cp(p, 1.1, 0.9, 0.7), (p - 0.7) / (0.5 * 1.1 * 0.81), rtol=1e-14)


def couette_solver(reynolds=5.0, order=3):
    gas = GasModel(reynolds=reynolds, mach=0.2)
    mesh = build_channel_mesh(1, 3, 1, length=1.0, height=1.0, width=1.0)
    bcs = {"MovingWall": BoundaryCondition("MovingWall", wall_velocity=(1.0, 0.0, 0.0))}
    return Solver(mesh, SchemeConfig(formulation="iLES", order=order, gas=gas, bcs=bcs))


def test_zero_shear():
    s = couette_solver()
    q = cases.uniform(s.metrics.x, s.gas, velocity=(0.0, 0.0, 0.0))
    wc = surface_cf(surface_record(s, q, "NoSlipWall"))
    assert np.max(np.abs(wc.cf)) < 1e-12 and np.max(wc.yplus) < 1e-5


def test_couette_steady_profile_skin_friction():
    s = couette_solver()
    q = cases.couette(s.metrics.x, s.gas)
    exact = 2.0 * s.gas.mu
    for patch, sign in (("NoSlipWall", 1.0), ("MovingWall", -1.0)):
        cf = surface_cf(surface_record(s, q, patch)).cf
        np.testing.assert_allclose(cf, sign * exact, rtol=1e-10)


def test_surface_accumulator_and_spacing():
    s = couette_solver()
    q = cases.couette(s.metrics.x, s.gas)
    acc = SurfaceAccumulator(s, "NoSlipWall")
    acc.accumulate(q)
    acc.accumulate(q)
    rec = acc.finalize()
    assert rec.samples == 2
    # second GL node of the first element layer (height 1/3) at N=3
    node = (1.0 - 1.0 / math.sqrt(5.0)) / 2.0 / 3.0
    np.testing.assert_allclose(rec.wall_distance, node, rtol=1e-12)


def test_cf_on_non_wall_patch_rejected():
    mesh = build_box_mesh(1, 1, 1, [(0, 1)] * 3, boundary_tags={"xmin": "Inflow", "xmax": "Outflow"})
    s = Solver(mesh, SchemeConfig(formulation="eLES", order=2, gas=GasModel(reynolds=10.0)))
    q = cases.uniform(s.metrics.x, s.gas)
    with pytest.raises(ConfigurationError):
        surface_record(s, q, "Inflow")
    with pytest.raises(ConfigurationError):
        surface_record(s, q, "NoSlipWall:missing")


# ---------------------------------------------------------------------------
# forces


def body_solver(order=3):
    mesh = remove_elements(build_box_mesh(3, 3, 3, [(0, 3)] * 3, (True, True, True)), [13], "NoSlipWall:body")
    return Solver(mesh, SchemeConfig(formulation="iLES", order=order, gas=INVISCID))


def test_empty_patch_set():
    s = body_solver()
    with pytest.raises(ConfigurationError):
        integrate_forces(s, cases.uniform(s.metrics.x, s.gas), [])


def test_uniform_pressure_closed_surface():
    s = body_solver()
    q = cases.uniform(s.metrics.x, s.gas, velocity=(0.0, 0.0, 0.0), pressure=3.7)
    assert np.max(np.abs(integrate_forces(s, q, ["NoSlipWall:body"]).force)) <= 1e-12


def test_linear_pressure_divergence_theorem():
    s = body_solver()
    x = s.metrics.x
    q = from_primitive(np.ones(x.shape[:-1]), np.zeros(x.shape), x[..., 2] + 1.0, s.gas)
    f = integrate_forces(s, q, ["NoSlipWall:body"], viscous=False).force
    # body is the unit cube [1, 2]^3: -integral of grad p over its volume
    np.testing.assert_allclose(f, [0.0, 0.0, -1.0], atol=1e-10)


def test_flat_plate_bookkeeping():
    gas = INVISCID
    mesh = remove_elements(build_box_mesh(1, 3, 1, [(0, 1), (0, 3), (0, 1)], (True, True, True)), [1], "NoSlipWall:plate")
    s = Solver(mesh, SchemeConfig(formulation="eLES", order=3, gas=gas))
    x = s.metrics.x
    qinf = 0.5
    p = np.where(x[..., 1] < 1.5, gas.p_inf + qinf, gas.p_inf)
    q = from_primitive(np.ones(x.shape[:-1]), np.zeros(x.shape), p, gas)
    fc = integrate_forces(s, q, ["NoSlipWall:plate"], rho_inf=1.0, u_inf=1.0, area=1.0)
    assert fc.cl == pytest.approx(1.0, abs=1e-12) and abs(fc.cd) < 1e-12
    assert fc.per_patch["NoSlipWall:plate"][0] == pytest.approx(1.0, abs=1e-12)


def test_forces_csv_header(tmp_path):
    s = body_solver(order=2)
    q = cases.uniform(s.metrics.x, s.gas, velocity=(0.0, 0.0, 0.0))
    fc = integrate_forces(s, q, ["NoSlipWall:body"])
    path = tmp_path / "forces.csv"
    write_forces_csv(path, [0.0, 0.1], [fc, fc], ["NoSlipWall:body"])
    assert header(path) == ("time", "cl_total", "cd_total", "cl_NoSlipWall:body", "cd_NoSlipWall:body")
    assert forces_header([]) == ("time", "cl_total", "cd_total")


def test_surface_csv_header_and_span_average(tmp_path):
    s = couette_solver()
    q = cases.couette(s.metrics.x, s.gas)
    path = tmp_path / "surface.csv"
    write_surface_csv(path, [surface_record(s, q, "NoSlipWall")], p_inf=s.gas.p_inf)
    assert header(path) == SURFACE_HEADER == ("patch", "x_over_c", "cp", "cf", "yplus", "xplus")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == s.n  # one row per streamwise node after averaging over z
    assert all(float(r["cf"]) == pytest.approx(2.0 * s.gas.mu, rel=1e-10) for r in rows)


def test_spanwise_average():
    x = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    keys, (avg,) = spanwise_average(x, [np.array([1.0, 3.0, 5.0])])
    np.testing.assert_array_equal(keys, [[0.0, 0.0], [1.0, 0.0]])
    np.testing.assert_array_equal(avg, [2.0, 5.0])


# ---------------------------------------------------------------------------
# point sampling


def wake_solver():
    mesh = build_box_mesh(3, 2, 2, [(0, 3), (-1, 1), (0, 1)], (True, False, True), geo_order=2)
    return Solver(mesh, SchemeConfig(formulation="eLES", order=3, gas=INVISCID))


def test_uniform_mean_gives_flat_profile():
    s = wake_solver()
    shape = s.metrics.x.shape[:-1]
    stats = FlowStatistics(np.broadcast_to([2.0, 0.0, 0.0], shape + (3,)).copy(), np.zeros(shape + (6,)), 2)
    (prof,) = sample_wake_profiles(stats, s, [1.5], chord=1.0, u_inf=2.0, n_points=11)
    np.testing.assert_allclose(prof.u_over_uinf, 1.0, atol=1e-14)
    np.testing.assert_allclose(prof.tke, 0.0, atol=1e-14)
    np.testing.assert_allclose(prof.y_over_c, np.linspace(-1, 1, 11))


def test_polynomial_field_reproduced_exactly():
    s = wake_solver()
    x = s.metrics.x
    f = x[..., 0] ** 3 - 2 * x[..., 1] ** 2 * x[..., 2] + x[..., 1]
    pts = np.random.default_rng(2).uniform([0, -1, 0], [3, 1, 1], (25, 3))
    elems, xis = locate_points(s.mesh, pts)
    vals = evaluate_at_points(f, s.basis, elems, xis)
    exact = pts[:, 0] ** 3 - 2 * pts[:, 1] ** 2 * pts[:, 2] + pts[:, 1]
    assert np.max(np.abs(vals - exact)) <= 1e-12


def test_station_outside_domain():
    s = wake_solver()
    shape = s.metrics.x.shape[:-1]
    stats = FlowStatistics(np.zeros(shape + (3,)), np.zeros(shape + (6,)), 2)
    with pytest.raises(RangeError):
        sample_wake_profiles(stats, s, [3.5])
    with pytest.raises(RangeError):
        locate_points(s.mesh, [[1.0, 5.0, 0.5]])


def test_wake_csv(tmp_path):
    s = wake_solver()
    shape = s.metrics.x.shape[:-1]
    stats = FlowStatistics(np.ones(shape + (3,)), np.zeros(shape + (6,)), 2)
    (prof,) = sample_wake_profiles(stats, s, [0.5], n_points=3)
    path = tmp_path / wake_filename(0.5)
    write_wake_csv(path, prof)
    assert path.name == "wake_x0.5.csv"
    assert header(path) == WAKE_HEADER == ("y_over_c", "u_over_uinf", "u_rms", "tke")


# ---------------------------------------------------------------------------
# Q-criterion and VTK


def test_q_criterion_cases():
    omega = 1.7
    shear = np.zeros((3, 3))
    shear[1, 0] = 2.0
    rot = np.array([[0.0, -omega, 0.0], [omega, 0.0, 0.0], [0.0, 0.0, 0.0]])
    strain = np.diag([1.0, 2.0, -3.0])
    assert q_criterion(shear) == 0.0
    assert q_criterion(rot) == pytest.approx(omega**2, rel=1e-15)
    assert q_criterion(strain) < 0.0


def test_q_criterion_accepts_solver_gradients():
    grad = np.zeros((2, 3, 4))
    grad[..., 1, 0] = 1.0
    grad[..., 2, 3] = 99.0  # temperature column is ignored
    np.testing.assert_array_equal(q_criterion(grad), 0.0)


def test_vtk_structure(tmp_path):
    s = wake_solver()
    x = s.metrics.x
    path = tmp_path / "f.vtk"
    write_vtk(path, x, {"Q": x[..., 0], "velocity": x})
    text = path.read_text().splitlines()
    npts = x.shape[0] * s.n**3
    ncells = x.shape[0] * (s.n - 1) ** 3
    assert text[0] == "# vtk DataFile Version 3.0" and text[3] == "DATASET UNSTRUCTURED_GRID"
    assert f"POINTS {npts} double" in text
    assert f"CELLS {ncells} {9 * ncells}" in text
    assert "SCALARS Q double 1" in text and "VECTORS velocity double" in text
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "bad.vtk", x, {"bad": np.zeros((1, 2))})
