"""DGSEM spatial operator, boundary conditions and low-storage RK3 time stepping.

Two formulations share one code path:

* explicit LES -- weak-form DGSEM on Gauss nodes, pointwise Euler volume
  fluxes and the Vreman eddy viscosity;
* implicit LES -- flux-differencing split form on Gauss-Lobatto nodes with
  the Kennedy-Gruber two-point volume flux and no subgrid model.

Viscous terms use BR1 lifting in both cases.  Solution arrays have shape
``(K, n, n, n, 5)`` with ``n = N + 1``.
"""

from __future__ import annotations

import enum
import logging
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import physics
from .basis import NodeKind, build_basis
from .errors import ConfigurationError, DivergenceError, StateValidityError
from .mesh import bc_kind, compute_metrics, orientation_permutation
from .physics import GasModel, InterfaceScheme

log = logging.getLogger(__name__)

__all__ = [
    "Formulation",
    "BoundaryCondition",
    "SchemeConfig",
    "Solver",
    "RunReport",
    "RK3_A",
    "RK3_B",
    "RK3_C",
    "C_VISC",
    "apply_boundary_state",
    "compute_gradients",
    "spatial_operator",
    "compute_dt",
    "rk3_step",
    "run",
    "every",
]

# Williamson (1980) 2N-storage third-order coefficients
RK3_A = (0.0, -5.0 / 9.0, -153.0 / 128.0)
RK3_B = (1.0 / 3.0, 15.0 / 16.0, 8.0 / 15.0)
RK3_C = (0.0, 1.0 / 3.0, 3.0 / 4.0)

C_VISC = 2.5
DETERMINISTIC_CHUNK = 32


class Formulation(enum.Enum):
    EXPLICIT_LES = "ExplicitLES_Vreman_Gauss"
    IMPLICIT_LES = "ImplicitLES_KG_GaussLobatto"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"eles": cls.EXPLICIT_LES, "iles": cls.IMPLICIT_LES}
        if key in aliases:
            return aliases[key]
        for f in cls:
            if f.value.lower() == key:
                return f
        raise ConfigurationError(
            f"unknown formulation {value!r}; expected one of {[f.value for f in cls]} or eLES/iLES"
        )

    @property
    def node_kind(self):
        return NodeKind.GAUSS if self is Formulation.EXPLICIT_LES else NodeKind.GAUSS_LOBATTO

    @property
    def short(self):
        return "eLES" if self is Formulation.EXPLICIT_LES else "iLES"


@dataclass(frozen=True)
class BoundaryCondition:
    """Data attached to a boundary tag.

    ``rho``, ``velocity`` and ``pressure`` define the inflow state;
    ``pressure`` is also the outlet pressure.  ``None`` means free stream.
    """

    kind: str
    rho: float | None = None
    velocity: tuple | None = None
    pressure: float | None = None
    wall_velocity: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("Inflow", "Outflow", "FreeSlipWall", "NoSlipWall", "MovingWall"):
            raise ConfigurationError(
                f"unknown boundary kind {self.kind!r}; expected Inflow, Outflow, FreeSlipWall, "
                "NoSlipWall or MovingWall"
            )


@dataclass
class SchemeConfig:
    formulation: Formulation = Formulation.IMPLICIT_LES
    order: int = 4
    node_kind: NodeKind | None = None
    interface: InterfaceScheme | None = None
    c_v: float = physics.VREMAN_CONSTANT
    sgs: bool = True
    cfl: float = 0.5
    fixed_dt: float | None = None
    gas: GasModel = field(default_factory=GasModel)
    bcs: dict = field(default_factory=dict)
    threads: int = 1
    deterministic: bool = True
    dx_weights: str = "mean"

    def __post_init__(self):
        self.formulation = Formulation.parse(self.formulation)
        expected = self.formulation.node_kind
        if self.node_kind is None:
            self.node_kind = expected
        self.node_kind = NodeKind.parse(self.node_kind)
        if self.node_kind is not expected:
            raise ConfigurationError(
                f"formulation {self.formulation.value} requires {expected.value} nodes, "
                f"got {self.node_kind.value}"
            )
        if self.interface is None:
            self.interface = (
                InterfaceScheme.UPWIND if self.formulation is Formulation.EXPLICIT_LES
                else InterfaceScheme.KG_LAX_FRIEDRICHS
            )
        self.interface = InterfaceScheme.parse(self.interface)
        if self.cfl <= 0.0:
            raise ConfigurationError(f"CFL must be positive, got {self.cfl}")
        if self.threads < 1:
            raise ConfigurationError(f"thread count must be >= 1, got {self.threads}")
        if self.dx_weights not in ("mean", "nodal"):
            raise ConfigurationError(f"dx_weights must be 'mean' or 'nodal', got {self.dx_weights!r}")

    @property
    def uses_sgs(self):
        return self.sgs and self.formulation is Formulation.EXPLICIT_LES


def _ghost_state(u, kind, bc, normal, gas):
    """Exterior state for one boundary kind; ``u`` has shape ``(..., 5)``."""
    rho = u[..., 0]
    v = u[..., 1:4] / rho[..., None]
    p = physics.pressure(u, gas.gamma)
    if kind == "Inflow":
        rho_in = 1.0 if bc.rho is None else bc.rho
        v_in = (1.0, 0.0, 0.0) if bc.velocity is None else bc.velocity
        p_in = gas.p_inf if bc.pressure is None else bc.pressure
        out = physics.from_primitive(np.asarray(rho_in, float), np.asarray(v_in, float), np.asarray(p_in, float), gas)
        return np.broadcast_to(out, u.shape).copy()
    if kind == "Outflow":
        p_out = gas.p_inf if bc.pressure is None else bc.pressure
        if np.all(p == p_out):
            return u.copy()
        return physics.from_primitive(rho, v, np.full_like(p, p_out), gas)
    if kind == "FreeSlipWall":
        vn = np.sum(v * normal, axis=-1)
        return physics.from_primitive(rho, v - 2.0 * vn[..., None] * normal, p, gas)
    if kind in ("NoSlipWall", "MovingWall"):
        vw = np.zeros(3) if kind == "NoSlipWall" else np.asarray(bc.wall_velocity, dtype=float)
        return physics.from_primitive(rho, 2.0 * vw - v, p, gas)
    raise ConfigurationError(f"boundary kind {kind!r} cannot be applied to a boundary face")


def apply_boundary_state(interior, bc, normal, t=0.0, gas=None):
    """Ghost state for a boundary face (``bc`` a :class:`BoundaryCondition` or kind name)."""
    gas = gas or GasModel()
    if isinstance(bc, str):
        bc = BoundaryCondition(bc_kind(bc))
    interior = np.asarray(interior, dtype=float)
    physics.check_state(interior, gas, "at boundary")
    return _ghost_state(interior, bc.kind, bc, np.asarray(normal, dtype=float), gas)


@dataclass
class RunReport:
    steps: int = 0
    t_start: float = 0.0
    t_end: float = 0.0
    wall_time: float = 0.0
    chord: float = 1.0
    u_ref: float = 1.0
    dt_last: float = 0.0
    dt_min: float = 0.0
    diverged: bool = False
    message: str = ""
    timed_steps: int = 0
    step_start: int = 0

    @property
    def sec_per_iter(self):
        return self.wall_time / self.timed_steps if self.timed_steps else 0.0

    @property
    def ctu(self):
        return (self.t_end - self.t_start) * self.u_ref / self.chord

    @property
    def sec_per_ctu(self):
        return self.wall_time / self.ctu if self.ctu > 0 else 0.0


@dataclass
class StepInfo:
    step: int
    t: float
    dt: float
    q: np.ndarray
    solver: "Solver"


def every(interval, fn, chord=1.0, u_ref=1.0, start=0.0):
    """Wrap ``fn(info)`` so it fires once per ``interval`` convective time units."""
    state = {"next": start}

    def cb(info):
        ctu = info.t * u_ref / chord
        if ctu + 1e-12 >= state["next"]:
            fn(info)
            while state["next"] <= ctu + 1e-12:
                state["next"] += interval

    return cb


def _chunks(n, size):
    return [slice(i, min(i + size, n)) for i in range(0, n, size)] or [slice(0, 0)]


class Solver:
    """Semi-discrete DG operator bound to a mesh and a :class:`SchemeConfig`."""

    def __init__(self, mesh, config):
        self.config = config
        self.gas = config.gas
        self.basis = build_basis(config.node_kind, config.order)
        if mesh.metrics is None or mesh.metrics.basis.kind is not self.basis.kind or mesh.metrics.basis.order != self.basis.order:
            mesh = compute_metrics(mesh, self.basis)
        self.mesh = mesh
        self.metrics = mesh.metrics
        self.lobatto = self.basis.kind is NodeKind.GAUSS_LOBATTO
        self.split_form = config.formulation is Formulation.IMPLICIT_LES
        self.viscous = self.gas.mu > 0.0 or config.uses_sgs
        self.n = self.basis.n
        n = self.n
        w = self.basis.weights
        self.D = np.array(self.basis.diff)
        self.Dhat = np.array(self.basis.weak_diff)
        self.D2 = 2.0 * self.D
        self.lift = (self.basis.left / w, self.basis.right / w)
        self.bvec = (np.array(self.basis.left), np.array(self.basis.right))
        m = self.metrics
        self.inv_J = 1.0 / m.J
        self.mass = m.mass
        self.delta = physics.filter_width(m.volume, config.order)

        fi = mesh.interior
        self.fL = (fi[:, 0], fi[:, 1])
        self.fR = (fi[:, 2], fi[:, 3])
        self.identity_orient = len(fi) == 0 or not np.any(fi[:, 4])
        if not self.identity_orient:
            perms = np.array([orientation_permutation(n, c) for c in range(8)])
            self.perm = perms[fi[:, 4]]
            self.inv_perm = np.argsort(self.perm, axis=1)
        self.f_normal = m.face_normal[self.fL]
        self.f_Js = m.face_Js[self.fL]

        bd = mesh.boundary
        self.bE, self.bS = bd[:, 0], bd[:, 1]
        self.b_normal = m.face_normal[self.bE, self.bS]
        self.b_Js = m.face_Js[self.bE, self.bS]
        groups = {}
        for i, tag in enumerate(mesh.boundary_tags):
            groups.setdefault(tag, []).append(i)
        self.b_groups = []
        for tag, idx in groups.items():
            bc = config.bcs.get(tag) or config.bcs.get(bc_kind(tag))
            if bc is None:
                kind = bc_kind(tag)
                if kind == "Periodic":
                    raise ConfigurationError(f"boundary faces may not carry tag {tag!r}")
                bc = BoundaryCondition(kind)
            self.b_groups.append((tag, bc, np.array(idx)))

        k_el = mesh.n_elements
        self.threads = max(1, int(config.threads))
        if config.deterministic or self.threads == 1:
            esize = DETERMINISTIC_CHUNK
        else:
            esize = -(-k_el // self.threads)
        self.el_chunks = _chunks(k_el, esize)
        self._pool = ThreadPoolExecutor(self.threads) if self.threads > 1 else None
        self.aux = {}

    # ------------------------------------------------------------------ utils

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _map(self, fn, chunks):
        if self._pool is None:
            for c in chunks:
                fn(c)
        else:
            list(self._pool.map(fn, chunks))

    def _face(self, arr, side):
        """Trace of nodal ``arr`` (leading element axis) on ``side``."""
        d, plus = divmod(side, 2)
        if self.lobatto:
            return np.take(arr, -1 if plus else 0, axis=1 + d)
        return np.tensordot(arr, self.bvec[plus], axes=([1 + d], [0]))

    def _faces(self, arr):
        return np.stack([self._face(arr, s) for s in range(6)], axis=1)

    def _lift_add(self, out, face_terms):
        """``out += sum_s lift_s (x) face_terms[:, s]`` (surface integral contribution)."""
        for s in range(6):
            d, plus = divmod(s, 2)
            ft = face_terms[:, s]
            if self.lobatto:
                idx = [slice(None)] * out.ndim
                idx[1 + d] = -1 if plus else 0
                out[tuple(idx)] += ft * self.lift[plus][-1 if plus else 0]
            else:
                shape = [1] * out.ndim
                shape[1 + d] = self.n
                out += np.expand_dims(ft, 1 + d) * self.lift[plus].reshape(shape)

    def _right_to_left(self, arr):
        if self.identity_orient:
            return arr
        f, n = arr.shape[0], self.n
        flat = arr.reshape((f, n * n) + arr.shape[3:])
        idx = self.perm.reshape((f, n * n) + (1,) * (arr.ndim - 3))
        return np.take_along_axis(flat, idx, axis=1).reshape(arr.shape)

    def _left_to_right(self, arr):
        if self.identity_orient:
            return arr
        f, n = arr.shape[0], self.n
        flat = arr.reshape((f, n * n) + arr.shape[3:])
        idx = self.inv_perm.reshape((f, n * n) + (1,) * (arr.ndim - 3))
        return np.take_along_axis(flat, idx, axis=1).reshape(arr.shape)

    def _apply(self, mat, arr, axis):
        return _contract_matrix(mat, arr, axis)

    # ----------------------------------------------------------- validation

    def check_field(self, q, where=""):
        rho = q[..., 0]
        with np.errstate(all="ignore"):
            p = physics.pressure(q, self.gas.gamma)
        bad = ~((rho > 0.0) & (p > 0.0) & np.isfinite(p) & np.all(np.isfinite(q), axis=-1))
        if np.any(bad):
            loc = tuple(int(i) for i in np.argwhere(bad)[0])
            raise StateValidityError(
                f"invalid state{(' ' + where) if where else ''} in element {loc[0]} node {loc[1:]}: "
                f"rho={rho[loc]!r}, p={p[loc]!r}",
                rho=float(rho[loc]),
                pressure=float(p[loc]),
                location=loc,
            )

    # ------------------------------------------------------------ the operator

    def _boundary_ghosts(self, ub):
        ghost = np.empty_like(ub)
        for _, bc, idx in self.b_groups:
            ghost[idx] = _ghost_state(ub[idx], bc.kind, bc, self.b_normal[idx], self.gas)
        return ghost

    def _primitives(self, q):
        rho = q[..., 0]
        v = q[..., 1:4] / rho[..., None]
        p = physics.pressure(q, self.gas.gamma)
        return rho, v, p

    def compute_gradients(self, q, check=True, ws=None):
        """BR1 gradients of velocity and temperature, shape ``(K, n, n, n, 3, 4)``.

        ``grad[..., i, j]`` is the derivative along ``x_i`` of ``(v1, v2, v3, T)[j]``.
        """
        if check:
            self.check_field(q)
        ws = {} if ws is None else ws
        if "w" not in ws:
            rho, v, p = self._primitives(q)
            ws["rho"], ws["v"], ws["p"] = rho, v, p
            ws["w"] = np.concatenate([v, (p / rho)[..., None]], axis=-1)
        w = ws["w"]
        k_el, n = q.shape[0], self.n
        uf = ws.get("uf")
        if uf is None:
            uf = ws["uf"] = self._faces(q)
        wf = ws["wf"] = self._faces(w)
        m = self.metrics

        # BR1 interface values w* scaled by the outward nJ
        wstar = np.empty((k_el, 6, n, n, 3, 4))
        if len(self.fL[0]):
            wl = wf[self.fL]
            wr = self._right_to_left(wf[self.fR])
            avg = 0.5 * (wl + wr)
            nj = m.face_nJ[self.fL]
            term = nj[..., :, None] * avg[..., None, :]
            wstar[self.fL] = term
            wstar[self.fR] = -self._left_to_right(term)
        if len(self.bE):
            ub = uf[self.bE, self.bS]
            ghost = ws.get("ghost")
            if ghost is None:
                ghost = ws["ghost"] = self._boundary_ghosts(ub)
            rg = ghost[..., 0]
            wg = np.concatenate([ghost[..., 1:4] / rg[..., None], (physics.pressure(ghost, self.gas.gamma) / rg)[..., None]], axis=-1)
            wb = wf[self.bE, self.bS]
            avg = 0.5 * (wb + wg)
            # outflow faces extrapolate the interior primitive state
            for _, bc, idx in self.b_groups:
                if bc.kind == "Outflow":
                    avg[idx] = wb[idx]
            nj = m.face_nJ[self.bE, self.bS]
            wstar[self.bE, self.bS] = nj[..., :, None] * avg[..., None, :]

        grad = np.empty((k_el, n, n, n, 3, 4))

        def element_block(sl):
            Ja = m.Ja[sl]
            wb = w[sl]
            # strong form: algebraically the weak form, but constants cancel exactly
            acc = None
            jump = wstar[sl].copy()
            for d in range(3):
                prod = Ja[..., d, :, None] * wb[..., None, :]
                term = self._apply(self.D, prod, 1 + d)
                acc = term if acc is None else acc + term
                jump[:, 2 * d] += self._face(prod, 2 * d)
                jump[:, 2 * d + 1] -= self._face(prod, 2 * d + 1)
            self._lift_add(acc, jump)
            grad[sl] = acc * self.inv_J[sl][..., None, None]

        self._map(element_block, self.el_chunks)
        return grad

    def _viscous_face_fluxes(self, q, ws, grad, mu_t):
        """Normal viscous flux ``F_v* . nJ`` on every element side, shape ``(K, 6, n, n, 5)``."""
        gas = self.gas
        m = self.metrics
        k_el, n = q.shape[0], self.n
        fv = ws["fv"]
        fvf = self._faces(fv)
        out = np.empty((k_el, 6, n, n, 5))
        if len(self.fL[0]):
            fl = fvf[self.fL]
            fr = self._right_to_left(fvf[self.fR])
            nj = m.face_nJ[self.fL]
            flux = np.einsum("...dk,...d->...k", 0.5 * (fl + fr), nj)
            out[self.fL] = flux
            out[self.fR] = -self._left_to_right(flux)
        if len(self.bE):
            uf = ws["uf"]
            walls = [g for g in self.b_groups if g[1].kind not in ("Inflow", "Outflow")]
            if walls:
                gradf = self._faces(grad)
                mutf = self._faces(mu_t)
            for _, bc, idx in self.b_groups:
                e, s = self.bE[idx], self.bS[idx]
                nj = m.face_nJ[e, s]
                normal = self.b_normal[idx]
                if bc.kind in ("Inflow", "Outflow"):
                    out[e, s] = np.einsum("...dk,...d->...k", fvf[e, s], nj)
                    continue
                ub = uf[e, s]
                mut_f = mutf[e, s]
                alpha = gradf[e, s][..., :, 0:3]
                if bc.kind == "FreeSlipWall":
                    f = physics.viscous_flux(ub, alpha, np.zeros(ub.shape[:-1] + (3,)), mut_f, gas)
                    tn = np.einsum("...dk,...d->...k", f[..., 1:4], normal)
                    tnn = np.sum(tn * normal, axis=-1)
                    res = np.zeros(ub.shape)
                    res[..., 1:4] = (tnn * self.b_Js[idx])[..., None] * normal
                    out[e, s] = res
                else:
                    vw = np.zeros(3) if bc.kind == "NoSlipWall" else np.asarray(bc.wall_velocity, dtype=float)
                    rho = ub[..., 0]
                    uw = physics.from_primitive(rho, np.broadcast_to(vw, ub.shape[:-1] + (3,)), physics.pressure(ub, gas.gamma), gas)
                    f = physics.viscous_flux(uw, alpha, np.zeros(ub.shape[:-1] + (3,)), mut_f, gas)
                    out[e, s] = np.einsum("...dk,...d->...k", f, nj)
        return out

    def _inviscid_face_fluxes(self, q, ws):
        gas = self.gas
        scheme = self.config.interface
        k_el, n = q.shape[0], self.n
        uf = ws["uf"]
        out = np.empty((k_el, 6, n, n, 5))
        if len(self.fL[0]):
            ul = uf[self.fL]
            ur = self._right_to_left(uf[self.fR])
            flux = physics.interface_flux(ul, ur, self.f_normal, gas, scheme, check=False) * self.f_Js[..., None]
            out[self.fL] = flux
            out[self.fR] = -self._left_to_right(flux)
        if len(self.bE):
            ub = uf[self.bE, self.bS]
            ghost = ws.get("ghost")
            if ghost is None:
                ghost = ws["ghost"] = self._boundary_ghosts(ub)
            flux = physics.interface_flux(ub, ghost, self.b_normal, gas, scheme, check=False)
            out[self.bE, self.bS] = flux * self.b_Js[..., None]
        return out

    def spatial_operator(self, q, t=0.0, check=True):
        """Time derivative ``dq/dt`` of the semi-discrete system."""
        if check:
            self.check_field(q)
        gas = self.gas
        m = self.metrics
        ws = {}
        rho, v, p = self._primitives(q)
        ws["rho"], ws["v"], ws["p"] = rho, v, p
        ws["uf"] = self._faces(q)
        mu_t = None
        if self.viscous:
            ws["w"] = np.concatenate([v, (p / rho)[..., None]], axis=-1)
            grad = self.compute_gradients(q, check=False, ws=ws)
            alpha = grad[..., 0:3]
            if self.config.uses_sgs:
                mu_t = physics.vreman_mu_t(alpha, rho, self.delta[:, None, None, None], self.config.c_v)
            else:
                mu_t = np.zeros_like(rho)
            ws["fv"] = physics.viscous_flux(q, alpha, grad[..., 3], mu_t, gas)
            phi_v = self._viscous_face_fluxes(q, ws, grad, mu_t)
            self.aux = {"grad": grad, "mu_t": mu_t}
        else:
            self.aux = {"grad": None, "mu_t": np.zeros_like(rho)}
        phi_e = self._inviscid_face_fluxes(q, ws)
        dq = np.empty_like(q)

        def element_block(sl):
            Ja = m.Ja[sl]
            qb = q[sl]
            if self.split_form:
                acc = self._flux_differencing(qb, rho[sl], v[sl], p[sl], Ja)
                fe = physics._euler_flux(qb, v[sl], p[sl])
                face_corr = phi_e[sl].copy()
                for s in range(6):
                    d, plus = divmod(s, 2)
                    idx = -1 if plus else 0
                    sign = 1.0 if plus else -1.0
                    ja_face = np.take(Ja[..., d, :], idx, axis=1 + d)
                    f_face = np.take(fe, idx, axis=1 + d)
                    face_corr[:, s] -= sign * np.einsum("...dk,...d->...k", f_face, ja_face)
                self._lift_add(acc, face_corr)
                if self.viscous:
                    fvb = ws["fv"][sl]
                    for d in range(3):
                        contra = np.einsum("...k,...kc->...c", Ja[..., d, :], fvb)
                        acc -= self._apply(self.Dhat, contra, 1 + d)
                    self._lift_add(acc, -phi_v[sl])
            else:
                flux = physics._euler_flux(qb, v[sl], p[sl])
                face_terms = phi_e[sl]
                if self.viscous:
                    flux = flux - ws["fv"][sl]
                    face_terms = face_terms - phi_v[sl]
                acc = None
                for d in range(3):
                    contra = np.einsum("...k,...kc->...c", Ja[..., d, :], flux)
                    term = self._apply(self.Dhat, contra, 1 + d)
                    acc = term if acc is None else acc + term
                self._lift_add(acc, face_terms)
            dq[sl] = -acc * self.inv_J[sl][..., None]

        self._map(element_block, self.el_chunks)
        return dq

    def _flux_differencing(self, q, rho, v, p, Ja):
        """``sum_d 2 sum_m D_im F#(u_i, u_m; {Ja^d})`` along every tensor line."""
        e = q[..., 4] / rho
        out = np.zeros(q.shape)
        D2 = self.D2
        for d in range(3):
            ax = 1 + d
            r = np.moveaxis(rho, ax, 1)
            vv = np.moveaxis(v, ax, 1)
            pp = np.moveaxis(p, ax, 1)
            ee = np.moveaxis(e, ax, 1)
            ja = np.moveaxis(Ja[..., d, :], ax, 1)
            # pair averages: axis 1 is i, axis 2 is m
            ra = 0.5 * (r[:, :, None] + r[:, None, :])
            va = 0.5 * (vv[:, :, None] + vv[:, None, :])
            pa = 0.5 * (pp[:, :, None] + pp[:, None, :])
            ea = 0.5 * (ee[:, :, None] + ee[:, None, :])
            na = 0.5 * (ja[:, :, None] + ja[:, None, :])
            vn = np.einsum("...k,...k->...", va, na)
            mass = ra * vn
            f = np.empty(mass.shape + (5,))
            f[..., 0] = mass
            f[..., 1:4] = mass[..., None] * va + pa[..., None] * na
            f[..., 4] = mass * ea + pa * vn
            contrib = np.einsum("im,kim...->ki...", D2, f)
            out += np.moveaxis(contrib, 1, ax)
        return out

    # ------------------------------------------------------------ time march

    def compute_dt(self, q, cfl=None, mu_t=None):
        """Stable time step from the convective and viscous limits."""
        cfl = self.config.cfl if cfl is None else cfl
        gas = self.gas
        rho, v, p = self._primitives(q)
        a = np.sqrt(gas.gamma * p / rho)
        speed = np.sqrt(np.sum(v * v, axis=-1)) + a
        dx = self.dx_eff
        dt = np.min(dx / speed)
        if mu_t is None:
            mu_t = self.aux.get("mu_t")
        mu_eff = gas.mu + (0.0 if mu_t is None else mu_t)
        nu = mu_eff / rho
        if np.any(nu > 0.0):
            with np.errstate(divide="ignore"):
                dt_v = np.min(np.where(nu > 0.0, dx**2 / (C_VISC * np.where(nu > 0.0, nu, 1.0)), np.inf))
            dt = min(dt, dt_v)
        return float(cfl * dt)

    @property
    def dx_eff(self):
        """Nodal length scale ``(J w)^(1/3) / (N + 1)`` of the time-step estimate.

        With ``dx_weights="mean"`` (default) every node uses the mean 1D weight
        ``2 / (N + 1)`` so that one CFL number means the same time step for both
        node families; ``"nodal"`` uses the node's own tensor weight.
        """
        if "dx_eff" not in self.__dict__:
            n1 = self.config.order + 1
            if self.config.dx_weights == "mean":
                dx = np.cbrt(self.metrics.J) * (2.0 / n1) / n1
            else:
                dx = np.cbrt(self.mass) / n1
            self.__dict__["dx_eff"] = dx
        return self.__dict__["dx_eff"]

    def rk3_step(self, q, dt=None, t=0.0, step=None, dt_cap=None):
        """One Williamson low-storage RK3 step; returns ``(q_new, dt)``.

        With ``dt=None`` the step is chosen by :meth:`compute_dt` (or the
        configured fixed step) from the state at the beginning of the step,
        clipped to ``dt_cap``.
        """
        q = np.array(q, dtype=float, copy=True)
        g = np.zeros_like(q)
        for s in range(3):
            try:
                rhs = self.spatial_operator(q, t + RK3_C[s] * (dt or 0.0), check=(s == 0))
            except StateValidityError as exc:
                raise DivergenceError(f"invalid state entering stage {s}: {exc}", stage=s, step=step) from exc
            if dt is None:
                dt = self.config.fixed_dt or self.compute_dt(q)
                if dt_cap is not None:
                    dt = min(dt, dt_cap)
            g = RK3_A[s] * g + dt * rhs
            q += RK3_B[s] * g
            if not _field_ok(q, self.gas.gamma):
                raise DivergenceError(f"non-physical state after stage {s}", stage=s, step=step)
        return q, dt

    def conserved_totals(self, q):
        """Integral of each conservative variable over the domain."""
        return np.einsum("eijk,eijkc->c", self.mass, q)

    def kinetic_energy(self, q):
        ke = 0.5 * np.sum(q[..., 1:4] ** 2, axis=-1) / q[..., 0]
        return float(np.sum(self.mass * ke))

    def run(self, q0, t0=0.0, t_end=None, n_steps=None, callbacks=(), chord=1.0, u_ref=1.0,
            on_divergence=None, step0=0, timing_warmup=0):
        """Advance ``q0`` to ``t_end`` or by ``n_steps``.

        Returns ``(q, t, report)``.  On divergence ``on_divergence(q, t, step)``
        receives the last valid state before the error propagates.
        """
        if t_end is None and n_steps is None:
            raise ConfigurationError("run needs t_end or n_steps")
        q = np.array(q0, dtype=float, copy=True)
        t = float(t0)
        report = RunReport(t_start=t, t_end=t, chord=chord, u_ref=u_ref, step_start=step0)
        step = step0
        taken = 0
        dt_min = np.inf
        while True:
            if n_steps is not None and taken >= n_steps:
                break
            if t_end is not None and t_end - t <= 1e-9 * (report.dt_last or abs(t_end) or 1.0):
                break
            start = _time.perf_counter()
            cap = None if t_end is None else t_end - t
            try:
                q_new, dt = self.rk3_step(q, None, t, step=step, dt_cap=cap)
            except DivergenceError as exc:
                report.diverged = True
                report.message = str(exc)
                report.steps = taken
                report.t_end = t
                if on_divergence is not None:
                    on_divergence(q, t, step)
                raise
            elapsed = _time.perf_counter() - start
            if taken >= timing_warmup:
                report.wall_time += elapsed
                report.timed_steps += 1
            q = q_new
            t += dt
            step += 1
            taken += 1
            dt_min = min(dt_min, dt)
            report.dt_last = dt
            info = StepInfo(step=step, t=t, dt=dt, q=q, solver=self)
            for cb in callbacks:
                cb(info)
        report.steps = taken
        report.t_end = t
        report.dt_min = 0.0 if np.isinf(dt_min) else float(dt_min)
        return q, t, report


def _field_ok(q, gamma):
    if not np.all(np.isfinite(q)):
        return False
    rho = q[..., 0]
    if np.any(rho <= 0.0):
        return False
    return bool(np.all(physics.pressure(q, gamma) > 0.0))


def _contract_matrix(mat, arr, axis):
    out = np.tensordot(mat, arr, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


# functional interface -------------------------------------------------------


def compute_gradients(q, solver):
    return solver.compute_gradients(q)


def spatial_operator(q, solver, t=0.0):
    return solver.spatial_operator(q, t)


def compute_dt(q, solver, cfl=None):
    solver.spatial_operator(q)
    return solver.compute_dt(q, cfl)


def rk3_step(q, dt, solver, t=0.0):
    return solver.rk3_step(q, dt, t)[0]


def run(config, mesh, q0, t_end=None, n_steps=None, callbacks=(), **kwargs):
    solver = Solver(mesh, config)
    try:
        return solver.run(q0, t_end=t_end, n_steps=n_steps, callbacks=callbacks, **kwargs)
    finally:
        solver.close()
