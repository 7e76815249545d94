"""Running statistics and post-processing of solution fields.

Covers time-averaged velocity moments (mean, RMS, TKE), wall quantities
(Cp, Cf, y+, x+), integrated force coefficients, wake-profile sampling by
exact polynomial evaluation, the Q-criterion, legacy VTK export and the CSV
writers with fixed headers.

Wall conventions: ``n_wall`` is the unit normal pointing from the wall into
the fluid (the negated outward normal of the fluid element).  The traction
exerted by the fluid on the wall is ``-p n_wall + tau . n_wall``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import physics
from .basis import NodeKind, build_basis, lagrange_matrix
from .errors import ConfigurationError, InsufficientDataError, RangeError
from .mesh import bc_kind

__all__ = [
    "RunningSum",
    "StatisticsAccumulator",
    "FlowStatistics",
    "SurfaceRecord",
    "SurfaceAccumulator",
    "ForceCoefficients",
    "surface_record",
    "surface_cp",
    "surface_cf",
    "spanwise_average",
    "integrate_forces",
    "locate_points",
    "evaluate_at_points",
    "sample_wake_profiles",
    "q_criterion",
    "write_vtk",
    "write_surface_csv",
    "write_forces_csv",
    "write_wake_csv",
    "SURFACE_HEADER",
    "WAKE_HEADER",
    "forces_header",
]

SURFACE_HEADER = ("patch", "x_over_c", "cp", "cf", "yplus", "xplus")
WAKE_HEADER = ("y_over_c", "u_over_uinf", "u_rms", "tke")
WALL_KINDS = ("NoSlipWall", "MovingWall", "FreeSlipWall")
# (i, j) index pairs of the six independent second moments
_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


class RunningSum:
    """Compensated (Kahan-Babuska) running sum of equally shaped arrays."""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self.comp = np.zeros(shape)
        self.count = 0

    def add(self, x, count=1):
        x = np.asarray(x, dtype=float)
        t = self.total + x
        big = np.abs(self.total) >= np.abs(x)
        self.comp += np.where(big, (self.total - t) + x, (x - t) + self.total)
        self.total = t
        self.count += count

    def merge(self, other):
        if self.total.shape != other.total.shape:
            raise ValueError("cannot merge running sums of different shapes")
        self.add(other.total, other.count)
        self.comp += other.comp
        return self

    @property
    def value(self):
        return self.total + self.comp

    def copy(self):
        out = RunningSum(self.total.shape)
        out.total, out.comp, out.count = self.total.copy(), self.comp.copy(), self.count
        return out


@dataclass
class FlowStatistics:
    mean: np.ndarray
    reynolds: np.ndarray  # (..., 6): uu, vv, ww, uv, uw, vw
    samples: int
    t_start: float | None = None
    t_stop: float | None = None

    @property
    def u_rms(self):
        return np.sqrt(self.reynolds[..., 0])

    @property
    def rms(self):
        return np.sqrt(self.reynolds[..., 0:3])

    @property
    def tke(self):
        return 0.5 * np.sum(self.reynolds[..., 0:3], axis=-1)


class StatisticsAccumulator:
    """Per-node running sums of ``u_i`` and ``u_i u_j``.

    Per-thread accumulators can be combined with :meth:`merge`; the result
    equals accumulating the concatenated sample stream.
    """

    def __init__(self, shape):
        self.shape = tuple(shape)
        self.first = RunningSum(self.shape + (3,))
        self.second = RunningSum(self.shape + (6,))
        self.t_start = None
        self.t_stop = None

    @property
    def samples(self):
        return self.first.count

    def add_velocity(self, v, t=None):
        v = np.asarray(v, dtype=float)
        self.first.add(v)
        self.second.add(np.stack([v[..., i] * v[..., j] for i, j in _PAIRS], axis=-1))
        if t is not None:
            self.t_start = t if self.t_start is None else min(self.t_start, t)
            self.t_stop = t if self.t_stop is None else max(self.t_stop, t)

    def accumulate(self, q, t=None):
        """Add one sample of the conservative field ``q`` (shape ``(..., 5)``)."""
        q = np.asarray(q, dtype=float)
        self.add_velocity(q[..., 1:4] / q[..., 0:1], t)

    def merge(self, other):
        if self.shape != other.shape:
            raise ValueError("cannot merge accumulators over different fields")
        self.first.merge(other.first)
        self.second.merge(other.second)
        for t in (other.t_start, other.t_stop):
            if t is not None:
                self.t_start = t if self.t_start is None else min(self.t_start, t)
                self.t_stop = t if self.t_stop is None else max(self.t_stop, t)
        return self

    def finalize(self):
        n = self.samples
        if n < 2:
            raise InsufficientDataError(f"need at least 2 samples for variances, have {n}")
        mean = self.first.value / n
        second = self.second.value / n
        rey = np.stack([second[..., k] - mean[..., i] * mean[..., j] for k, (i, j) in enumerate(_PAIRS)], axis=-1)
        rey[..., 0:3] = np.maximum(rey[..., 0:3], 0.0)
        return FlowStatistics(mean, rey, n, self.t_start, self.t_stop)


# ---------------------------------------------------------------------------
# wall quantities


@dataclass
class SurfaceRecord:
    """Wall data on the face quadrature nodes of one boundary patch.

    Arrays have shape ``(F, n, n, ...)`` over the patch faces.  ``traction``
    is the viscous traction ``tau . n_wall`` on the wall (time-averaged when
    produced by :class:`SurfaceAccumulator`).
    """

    patch: str
    x: np.ndarray
    n_wall: np.ndarray
    area_weights: np.ndarray
    p: np.ndarray
    rho: np.ndarray
    traction: np.ndarray
    wall_distance: np.ndarray
    streamwise_spacing: np.ndarray
    mu: float
    samples: int = 1

    def tangential_traction(self):
        tn = np.sum(self.traction * self.n_wall, axis=-1)
        return self.traction - tn[..., None] * self.n_wall

    def wall_shear(self, streamwise=(1.0, 0.0, 0.0)):
        """Signed wall shear: magnitude of the tangential traction, sign from ``streamwise``."""
        tt = self.tangential_traction()
        sign = np.sign(np.sum(tt * np.asarray(streamwise, float), axis=-1))
        return np.where(sign < 0, -1.0, 1.0) * np.linalg.norm(tt, axis=-1)


def _patch_indices(solver, patch):
    mesh = solver.mesh
    idx = mesh.patch_faces(patch)
    if len(idx) == 0:
        idx = np.array([i for i, t in enumerate(mesh.boundary_tags) if bc_kind(t) == patch], dtype=np.int64)
    if len(idx) == 0:
        raise ConfigurationError(f"mesh has no boundary patch {patch!r}; patches are {sorted(set(mesh.boundary_tags))}")
    return idx


def _face_nodes_geometry(solver, elems, sides, streamwise):
    """Wall distance of the first off-wall node and streamwise node spacing."""
    m = solver.metrics
    n = solver.n
    # second GL node sits one node off the wall; the first Gauss node is already interior
    off = 1 if solver.lobatto else 0
    dist = np.empty((len(elems), n, n))
    spacing = np.empty((len(elems), n, n))
    s_dir = np.asarray(streamwise, float)
    for f, (e, s) in enumerate(zip(elems, sides)):
        d, plus = divmod(int(s), 2)
        xe = m.x[e]
        line = np.take(xe, n - 1 - off if plus else off, axis=d)
        xf = m.face_x[e, s]
        nw = -m.face_normal[e, s]
        dist[f] = np.abs(np.sum((line - xf) * nw, axis=-1))
        # in-face axis most aligned with the streamwise direction
        ext = [np.abs(np.sum((np.take(xf, -1, axis=a) - np.take(xf, 0, axis=a)) * s_dir, axis=-1)).mean() for a in (0, 1)]
        a = int(np.argmax(ext))
        dx = np.linalg.norm(np.diff(xf, axis=a), axis=-1)
        pad = np.take(dx, [-1], axis=a)
        fwd = np.concatenate([dx, pad], axis=a)
        bwd = np.concatenate([np.take(dx, [0], axis=a), dx], axis=a)
        spacing[f] = 0.5 * (fwd + bwd)
    return dist, spacing


def surface_record(solver, q, patch, streamwise=(1.0, 0.0, 0.0), grad=None):
    """Instantaneous :class:`SurfaceRecord` of ``patch`` for the state ``q``."""
    gas = solver.gas
    idx = _patch_indices(solver, patch)
    kinds = {bc_kind(solver.mesh.boundary_tags[i]) for i in idx}
    if not kinds <= set(WALL_KINDS):
        raise ConfigurationError(f"patch {patch!r} is not a wall (kinds {sorted(kinds)})")
    elems, sides = solver.bE[idx], solver.bS[idx]
    m = solver.metrics
    uf = solver._faces(q)[elems, sides]
    rho = uf[..., 0]
    p = physics.pressure(uf, gas.gamma)
    if grad is None:
        grad = solver.compute_gradients(q) if gas.mu > 0.0 else None
    nw = -m.face_normal[elems, sides]
    if grad is None:
        traction = np.zeros(uf.shape[:-1] + (3,))
    else:
        alpha = solver._faces(grad)[elems, sides][..., 0:3]
        zero = np.zeros(rho.shape)
        tau = physics.viscous_flux(uf, alpha, np.zeros(rho.shape + (3,)), zero, gas)[..., 1:4]
        traction = np.einsum("...ij,...i->...j", tau, nw)
    w = solver.basis.weights
    area = m.face_Js[elems, sides] * np.outer(w, w)
    dist, spacing = _face_nodes_geometry(solver, elems, sides, streamwise)
    return SurfaceRecord(
        patch=patch, x=m.face_x[elems, sides], n_wall=nw, area_weights=area, p=p, rho=rho,
        traction=traction, wall_distance=dist, streamwise_spacing=spacing, mu=gas.mu,
    )


class SurfaceAccumulator:
    """Time average of pressure, density and traction on one wall patch."""

    def __init__(self, solver, patch, streamwise=(1.0, 0.0, 0.0)):
        self.solver = solver
        self.patch = patch
        self.streamwise = streamwise
        self._template = None
        self._sums = None

    def accumulate(self, q, grad=None):
        rec = surface_record(self.solver, q, self.patch, self.streamwise, grad)
        if self._sums is None:
            self._template = rec
            self._sums = {k: RunningSum(getattr(rec, k).shape) for k in ("p", "rho", "traction")}
        for k, s in self._sums.items():
            s.add(getattr(rec, k))

    def finalize(self):
        if self._sums is None:
            raise InsufficientDataError("no surface samples accumulated")
        n = self._sums["p"].count
        t = self._template
        return SurfaceRecord(
            patch=t.patch, x=t.x, n_wall=t.n_wall, area_weights=t.area_weights,
            p=self._sums["p"].value / n, rho=self._sums["rho"].value / n,
            traction=self._sums["traction"].value / n, wall_distance=t.wall_distance,
            streamwise_spacing=t.streamwise_spacing, mu=t.mu, samples=n,
        )


def surface_cp(p, rho_inf=1.0, u_inf=1.0, p_inf=0.0):
    """Pressure coefficient ``(p - p_inf) / (rho_inf u_inf^2 / 2)``."""
    if rho_inf <= 0.0 or u_inf <= 0.0:
        raise ConfigurationError("reference density and velocity must be positive")
    if isinstance(p, SurfaceRecord):
        p = p.p
    return (np.asarray(p, dtype=float) - p_inf) / (0.5 * rho_inf * u_inf**2)


@dataclass
class WallCoefficients:
    cf: np.ndarray
    tau_w: np.ndarray
    yplus: np.ndarray
    xplus: np.ndarray


def surface_cf(record, rho_inf=1.0, u_inf=1.0, streamwise=(1.0, 0.0, 0.0)):
    """Skin friction ``2 tau_w / (rho_inf u_inf^2)`` with y+ and x+ on each wall node."""
    if rho_inf <= 0.0 or u_inf <= 0.0:
        raise ConfigurationError("reference density and velocity must be positive")
    tau_w = record.wall_shear(streamwise)
    cf = 2.0 * tau_w / (rho_inf * u_inf**2)
    u_tau = np.sqrt(np.abs(tau_w) / record.rho)
    nu = record.mu / record.rho
    with np.errstate(divide="ignore", invalid="ignore"):
        yplus = np.where(nu > 0, u_tau * record.wall_distance / np.where(nu > 0, nu, 1.0), 0.0)
        xplus = np.where(nu > 0, u_tau * record.streamwise_spacing / np.where(nu > 0, nu, 1.0), 0.0)
    return WallCoefficients(cf=cf, tau_w=tau_w, yplus=yplus, xplus=xplus)


def spanwise_average(x, values, span_axis=2, decimals=9):
    """Average nodal ``values`` over nodes sharing the same in-plane position.

    Returns ``(keys, averages)`` where ``keys`` holds the two remaining
    coordinates sorted lexicographically (first coordinate ascending).
    """
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    keep = [a for a in range(3) if a != span_axis]
    key = np.round(x[:, keep], decimals)
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    out = []
    for v in values:
        v = np.asarray(v, dtype=float).reshape(-1)
        s = np.bincount(inverse, weights=v, minlength=len(uniq))
        c = np.bincount(inverse, minlength=len(uniq))
        out.append(s / c)
    return uniq, out


# ---------------------------------------------------------------------------
# forces


@dataclass
class ForceCoefficients:
    cl: float
    cd: float
    force: np.ndarray
    per_patch: dict = field(default_factory=dict)  # patch -> (cl, cd, force)


def integrate_forces(solver, q, patches, rho_inf=1.0, u_inf=1.0, area=1.0,
                     drag_axis=(1.0, 0.0, 0.0), lift_axis=(0.0, 1.0, 0.0), grad=None, viscous=True):
    """Pressure plus viscous force on the wall ``patches``.

    ``F = sum over the patch of (-p n_b + tau . n_b) dS`` with ``n_b`` the
    body-outward normal (equal to ``n_wall``).  Coefficients divide by
    ``rho_inf u_inf^2 area / 2``; ``cl`` is the component along ``lift_axis``
    (downforce is negative for an upward lift axis).
    """
    patches = list(patches)
    if not patches:
        raise ConfigurationError("integrate_forces needs at least one patch")
    qinf = 0.5 * rho_inf * u_inf**2 * area
    drag_axis = np.asarray(drag_axis, float)
    lift_axis = np.asarray(lift_axis, float)
    if grad is None and viscous and solver.gas.mu > 0.0:
        grad = solver.compute_gradients(q)
    total = np.zeros(3)
    per = {}
    for patch in patches:
        rec = surface_record(solver, q, patch, grad=grad if viscous else None)
        if not viscous:
            rec.traction[...] = 0.0
        dens = -rec.p[..., None] * rec.n_wall + rec.traction
        f = np.einsum("fab,fabk->k", rec.area_weights, dens)
        per[patch] = (float(f @ lift_axis / qinf), float(f @ drag_axis / qinf), f)
        total += f
    return ForceCoefficients(cl=float(total @ lift_axis / qinf), cd=float(total @ drag_axis / qinf), force=total, per_patch=per)


# ---------------------------------------------------------------------------
# point location and sampling


def _geometry_basis(mesh):
    return build_basis(NodeKind.GAUSS_LOBATTO, mesh.geo_order)


def _map_and_jacobian(geom_e, nodes, diff, xi):
    """Physical point and Jacobian matrix of one element at reference point ``xi``."""
    li = [lagrange_matrix(nodes, [c])[0] for c in xi]
    # l_j'(c) = sum_k l_k(c) D_kj, exact for the degree-g interpolant
    dli = [row @ diff for row in li]
    x = np.einsum("i,j,k,ijkc->c", li[0], li[1], li[2], geom_e)
    jac = np.stack(
        [
            np.einsum("i,j,k,ijkc->c", dli[0], li[1], li[2], geom_e),
            np.einsum("i,j,k,ijkc->c", li[0], dli[1], li[2], geom_e),
            np.einsum("i,j,k,ijkc->c", li[0], li[1], dli[2], geom_e),
        ],
        axis=1,
    )
    return x, jac


def locate_points(mesh, points, tol=1e-10, max_iter=50):
    """Owning element and reference coordinates of each physical point.

    Raises :class:`RangeError` if a point lies in no element.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    geo = _geometry_basis(mesh)
    geom = mesh.geometry
    lo = geom.reshape(len(geom), -1, 3).min(axis=1)
    hi = geom.reshape(len(geom), -1, 3).max(axis=1)
    pad = 1e-8 * (hi - lo).max(axis=1, keepdims=True) + 0.05 * (hi - lo)
    elems = np.empty(len(points), dtype=np.int64)
    xis = np.empty((len(points), 3))
    for p, pt in enumerate(points):
        cand = np.nonzero(np.all((pt >= lo - pad) & (pt <= hi + pad), axis=1))[0]
        found = False
        for e in cand:
            xi = np.zeros(3)
            for _ in range(max_iter):
                x, jac = _map_and_jacobian(geom[e], geo.nodes, geo.diff, xi)
                step = np.linalg.solve(jac, pt - x)
                xi = np.clip(xi + step, -1.5, 1.5)
                if np.max(np.abs(step)) < tol:
                    break
            if np.all(np.abs(xi) <= 1.0 + 1e-9):
                elems[p], xis[p] = e, np.clip(xi, -1.0, 1.0)
                found = True
                break
        if not found:
            raise RangeError(f"point {pt.tolist()} lies outside the computational domain")
    return elems, xis


def evaluate_at_points(field_values, basis, elems, xis):
    """Evaluate nodal ``field_values`` (shape ``(K, n, n, n, ...)``) at located points."""
    out = []
    for e, xi in zip(elems, xis):
        li = [lagrange_matrix(basis.nodes, [c])[0] for c in xi]
        out.append(np.einsum("i,j,k,ijk...->...", li[0], li[1], li[2], field_values[e]))
    return np.array(out)


@dataclass
class WakeProfile:
    station: float
    y_over_c: np.ndarray
    u_over_uinf: np.ndarray
    u_rms: np.ndarray
    tke: np.ndarray


def sample_wake_profiles(stats, solver, stations, chord=1.0, u_inf=1.0, z=None, y_range=None,
                         n_points=101, streamwise_axis=0, vertical_axis=1):
    """Vertical profiles of mean velocity, u_RMS and TKE at ``x/c`` stations.

    ``stats`` is a :class:`FlowStatistics` on the solver's nodes.  Points are
    located in their owning element and the nodal polynomials are evaluated
    exactly there.
    """
    mesh = solver.mesh
    geom = mesh.geometry.reshape(-1, 3)
    lo, hi = geom.min(axis=0), geom.max(axis=0)
    span_axis = 3 - streamwise_axis - vertical_axis
    if z is None:
        z = 0.5 * (lo[span_axis] + hi[span_axis])
    if y_range is None:
        y_range = (lo[vertical_axis], hi[vertical_axis])
    ys = np.linspace(y_range[0], y_range[1], n_points)
    profiles = []
    fields = np.concatenate([stats.mean[..., 0:1], stats.u_rms[..., None], stats.tke[..., None]], axis=-1)
    for st in stations:
        xs = st * chord
        if not lo[streamwise_axis] <= xs <= hi[streamwise_axis]:
            raise RangeError(
                f"wake station x/c = {st} is outside the domain "
                f"[{lo[streamwise_axis] / chord}, {hi[streamwise_axis] / chord}]"
            )
        pts = np.empty((n_points, 3))
        pts[:, streamwise_axis] = xs
        pts[:, vertical_axis] = ys
        pts[:, span_axis] = z
        elems, xis = locate_points(mesh, pts)
        vals = evaluate_at_points(fields, solver.basis, elems, xis)
        profiles.append(WakeProfile(st, ys / chord, vals[:, 0] / u_inf, vals[:, 1], vals[:, 2]))
    return profiles


# ---------------------------------------------------------------------------
# Q-criterion


def q_criterion(grad):
    """``Q = (|Omega|^2 - |S|^2) / 2`` from ``grad[..., i, j] = d v_j / d x_i``.

    Accepts the solver's ``(..., 3, 4)`` gradient array or a ``(..., 3, 3)``
    velocity-gradient tensor.
    """
    alpha = np.asarray(grad, dtype=float)[..., 0:3, 0:3]
    g = np.swapaxes(alpha, -1, -2)  # g_ij = d v_i / d x_j
    s = 0.5 * (g + np.swapaxes(g, -1, -2))
    w = 0.5 * (g - np.swapaxes(g, -1, -2))
    return 0.5 * (np.sum(w * w, axis=(-2, -1)) - np.sum(s * s, axis=(-2, -1)))


# ---------------------------------------------------------------------------
# output


def write_vtk(path, x, point_data, title="dgles field"):
    """Legacy ASCII VTK unstructured grid of hexahedral sub-cells.

    ``x`` has shape ``(K, n, n, n, 3)``; each element contributes ``(n-1)^3``
    sub-cells joining neighbouring nodes.  ``point_data`` maps names to
    nodal arrays of shape ``(K, n, n, n)`` (scalars) or ``(K, n, n, n, 3)``
    (vectors).
    """
    x = np.asarray(x, dtype=float)
    k, n = x.shape[0], x.shape[1]
    # VTK point order i fastest: store nodes as [e, k, j, i]
    pts = np.transpose(x, (0, 3, 2, 1, 4)).reshape(-1, 3)

    def pid(e, i, j, kk):
        return e * n**3 + (kk * n + j) * n + i

    cells = []
    for e in range(k):
        for kk in range(n - 1):
            for j in range(n - 1):
                for i in range(n - 1):
                    cells.append((
                        pid(e, i, j, kk), pid(e, i + 1, j, kk), pid(e, i + 1, j + 1, kk), pid(e, i, j + 1, kk),
                        pid(e, i, j, kk + 1), pid(e, i + 1, j, kk + 1), pid(e, i + 1, j + 1, kk + 1), pid(e, i, j + 1, kk + 1),
                    ))
    with open(path, "w") as fh:
        fh.write(f"# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(pts)} double\n")
        np.savetxt(fh, pts, fmt="%.17g")
        fh.write(f"CELLS {len(cells)} {9 * len(cells)}\n")
        np.savetxt(fh, np.column_stack([np.full(len(cells), 8), np.array(cells, dtype=np.int64).reshape(-1, 8)]), fmt="%d")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        np.savetxt(fh, np.full(len(cells), 12), fmt="%d")
        fh.write(f"POINT_DATA {len(pts)}\n")
        for name, arr in point_data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 4:
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                np.savetxt(fh, np.transpose(arr, (0, 3, 2, 1)).reshape(-1), fmt="%.17g")
            elif arr.ndim == 5 and arr.shape[-1] == 3:
                fh.write(f"VECTORS {name} double\n")
                np.savetxt(fh, np.transpose(arr, (0, 3, 2, 1, 4)).reshape(-1, 3), fmt="%.17g")
            else:
                raise ValueError(f"point data {name!r} has unsupported shape {arr.shape}")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in r])


def write_surface_csv(path, records, chord=1.0, rho_inf=1.0, u_inf=1.0, p_inf=0.0, streamwise=(1.0, 0.0, 0.0), span_axis=2):
    """``surface.csv``: spanwise-averaged Cp, Cf, y+ and x+ per wall patch."""
    rows = []
    sa = int(np.argmax(np.abs(streamwise)))
    for rec in records:
        cp = surface_cp(rec.p, rho_inf, u_inf, p_inf)
        wc = surface_cf(rec, rho_inf, u_inf, streamwise)
        keys, (cpa, cfa, ypa, xpa) = spanwise_average(rec.x, [cp, wc.cf, wc.yplus, wc.xplus], span_axis)
        keep = [a for a in range(3) if a != span_axis]
        col = keep.index(sa) if sa in keep else 0
        for key, a, b, c, d in zip(keys, cpa, cfa, ypa, xpa):
            rows.append((rec.patch, float(key[col] / chord), float(a), float(b), float(c), float(d)))
    _write_rows(path, SURFACE_HEADER, rows)


def forces_header(patches):
    return ("time", "cl_total", "cd_total") + tuple(f"{k}_{p}" for p in patches for k in ("cl", "cd"))


def write_forces_csv(path, times, coefficients, patches=()):
    """``forces.csv`` from a sequence of :class:`ForceCoefficients`."""
    patches = tuple(patches)
    rows = []
    for t, c in zip(times, coefficients):
        row = [float(t), c.cl, c.cd]
        for p in patches:
            row += [c.per_patch[p][0], c.per_patch[p][1]]
        rows.append(row)
    _write_rows(path, forces_header(patches), rows)


def write_wake_csv(path, profile):
    rows = zip(profile.y_over_c, profile.u_over_uinf, profile.u_rms, profile.tke)
    _write_rows(path, WAKE_HEADER, [tuple(float(v) for v in r) for r in rows])


def wake_filename(station):
    return f"wake_x{station:g}.csv"
