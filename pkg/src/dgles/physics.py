"""Pointwise physics of the compressible Navier-Stokes equations.

Every function here is vectorised: conservative states carry the five
variables ``[rho, rho*v1, rho*v2, rho*v3, rho*E]`` along the last axis and
any number of leading axes.  Flux arrays have shape ``(..., 3, 5)`` where
``flux[..., d, :]`` is the flux in Cartesian direction ``d``.

Nondimensionalisation: ``rho_inf = 1``, ``U_inf = 1``,
``p_inf = 1 / (gamma M^2)``, gas constant ``R = 1`` so that ``T = p / rho``
and ``mu = 1 / Re``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, StateValidityError

__all__ = [
    "GasModel",
    "PrimitiveState",
    "InterfaceScheme",
    "VREMAN_CONSTANT",
    "VREMAN_EPS",
    "pressure",
    "to_primitive",
    "from_primitive",
    "check_state",
    "euler_flux",
    "vreman_mu_t",
    "filter_width",
    "viscous_flux",
    "kg_two_point_flux",
    "interface_flux",
    "max_wave_speed",
]

VREMAN_CONSTANT = 0.07
VREMAN_EPS = 1e-30


@dataclass(frozen=True)
class GasModel:
    """Calorically perfect gas with constant viscosity."""

    gamma: float = 1.4
    prandtl: float = 0.72
    prandtl_turbulent: float = 0.9
    mach: float = 0.1
    reynolds: float = float("inf")

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ConfigurationError(f"gamma must exceed 1, got {self.gamma}")
        if not self.prandtl > 0.0 or not self.prandtl_turbulent > 0.0:
            raise ConfigurationError("Prandtl numbers must be positive")
        if not self.mach > 0.0:
            raise ConfigurationError(f"Mach number must be positive, got {self.mach}")
        if not self.reynolds > 0.0:
            raise ConfigurationError(f"Reynolds number must be positive, got {self.reynolds}")

    @property
    def mu(self):
        return 0.0 if np.isinf(self.reynolds) else 1.0 / self.reynolds

    @property
    def cp(self):
        return self.gamma / (self.gamma - 1.0)

    @property
    def p_inf(self):
        return 1.0 / (self.gamma * self.mach**2)

    def conductivity(self, mu_t=0.0):
        """Molecular plus turbulent thermal conductivity."""
        return self.cp * (self.mu / self.prandtl + mu_t / self.prandtl_turbulent)


@dataclass
class PrimitiveState:
    rho: np.ndarray
    v: np.ndarray
    p: np.ndarray
    T: np.ndarray
    a: np.ndarray
    H: np.ndarray


class InterfaceScheme(enum.Enum):
    CENTRAL_KG = "CentralKG"
    KG_LAX_FRIEDRICHS = "KGLaxFriedrichs"
    UPWIND = "Upwind"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for s in cls:
            if s.value.lower() == str(value).lower():
                return s
        raise ConfigurationError(
            f"unknown interface scheme {value!r}; expected one of {[s.value for s in cls]}"
        )


def pressure(u, gamma):
    rho = u[..., 0]
    kin = 0.5 * (u[..., 1] ** 2 + u[..., 2] ** 2 + u[..., 3] ** 2) / rho
    return (gamma - 1.0) * (u[..., 4] - kin)


def check_state(u, gas, where=""):
    """Raise :class:`StateValidityError` unless every state has rho > 0 and p > 0."""
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    with np.errstate(all="ignore"):
        p = pressure(u, gas.gamma)
    bad = ~((rho > 0.0) & (p > 0.0) & np.isfinite(p))
    if np.any(bad):
        idx = np.unravel_index(np.argmax(bad), bad.shape) if bad.ndim else ()
        r, pp = float(rho[idx]), float(p[idx])
        loc = tuple(int(i) for i in idx)
        raise StateValidityError(
            f"invalid state{(' ' + where) if where else ''} at index {loc}: rho={r!r}, p={pp!r}",
            rho=r,
            pressure=pp,
            location=loc,
        )


def to_primitive(u, gas, check=True):
    u = np.asarray(u, dtype=float)
    if check:
        check_state(u, gas)
    rho = u[..., 0]
    v = u[..., 1:4] / rho[..., None]
    p = pressure(u, gas.gamma)
    return PrimitiveState(
        rho=rho,
        v=v,
        p=p,
        T=p / rho,
        a=np.sqrt(gas.gamma * p / rho),
        H=(u[..., 4] + p) / rho,
    )


def from_primitive(rho, v, p, gas):
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    shape = np.broadcast_shapes(rho.shape, v.shape[:-1], p.shape)
    u = np.empty(shape + (5,))
    u[..., 0] = rho
    u[..., 1:4] = rho[..., None] * v
    u[..., 4] = p / (gas.gamma - 1.0) + 0.5 * rho * np.sum(v * v, axis=-1)
    return u


def euler_flux(u, gas):
    """Inviscid fluxes, shape ``(..., 3, 5)``."""
    prim = to_primitive(u, gas)
    return _euler_flux(u, prim.v, prim.p)


def _euler_flux(u, v, p):
    f = u[..., None, :] * v[..., :, None]
    for d in range(3):
        f[..., d, 1 + d] += p
        f[..., d, 4] += p * v[..., d]
    return f


def max_wave_speed(u, normal, gas):
    """``|v . n| + a`` with ``n`` a unit vector."""
    prim = to_primitive(u, gas, check=False)
    return np.abs(np.sum(prim.v * normal, axis=-1)) + prim.a


def filter_width(element_volume, order):
    """LES filter width ``V^(1/3) / (N + 1)``."""
    return np.cbrt(element_volume) / (order + 1)


def vreman_mu_t(alpha, rho, delta, c_v=VREMAN_CONSTANT, eps=VREMAN_EPS):
    """Vreman eddy viscosity.

    Parameters
    ----------
    alpha : array, shape (..., 3, 3)
        ``alpha[..., i, j] = d u_j / d x_i``.
    rho, delta : array_like
        Density and filter width, broadcast against ``alpha[..., 0, 0]``.
    """
    alpha = np.asarray(alpha, dtype=float)
    delta = np.asarray(delta, dtype=float)
    # beta_ij = delta^2 alpha_mi alpha_mj
    beta = np.einsum("...mi,...mj->...ij", alpha, alpha) * (delta**2)[..., None, None]
    b_beta = (
        beta[..., 0, 0] * beta[..., 1, 1]
        - beta[..., 0, 1] ** 2
        + beta[..., 0, 0] * beta[..., 2, 2]
        - beta[..., 0, 2] ** 2
        + beta[..., 1, 1] * beta[..., 2, 2]
        - beta[..., 1, 2] ** 2
    )
    aa = np.sum(alpha * alpha, axis=(-2, -1))
    ok = aa > eps
    # B_beta >= 0 analytically (sum of principal 2x2 minors of a PSD matrix)
    ratio = np.where(ok, np.maximum(b_beta, 0.0) / np.where(ok, aa, 1.0), 0.0)
    return c_v * np.asarray(rho) * np.sqrt(ratio)


def viscous_flux(u, alpha, grad_t, mu_t, gas):
    """Viscous plus turbulent fluxes, shape ``(..., 3, 5)``.

    ``alpha[..., i, j] = d v_j / d x_i``; ``grad_t`` is the temperature
    gradient.
    """
    u = np.asarray(u, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    v = u[..., 1:4] / u[..., 0:1]
    mu_t = np.asarray(mu_t, dtype=float)
    mu_eff = gas.mu + mu_t
    div = alpha[..., 0, 0] + alpha[..., 1, 1] + alpha[..., 2, 2]
    tau = (alpha + np.swapaxes(alpha, -1, -2)) * mu_eff[..., None, None]
    for d in range(3):
        tau[..., d, d] -= (2.0 / 3.0) * mu_eff * div
    kappa = gas.conductivity(mu_t)
    f = np.zeros(u.shape[:-1] + (3, 5))
    f[..., 1:4] = tau
    f[..., 4] = np.einsum("...dj,...j->...d", tau, v) + kappa[..., None] * grad_t
    return f


def _kg_from_primitive(rho_l, v_l, p_l, e_l, rho_r, v_r, p_r, e_r, normal):
    rho = 0.5 * (rho_l + rho_r)
    v = 0.5 * (v_l + v_r)
    p = 0.5 * (p_l + p_r)
    e = 0.5 * (e_l + e_r)
    vn = np.sum(v * normal, axis=-1)
    mass = rho * vn
    f = np.empty(mass.shape + (5,))
    f[..., 0] = mass
    f[..., 1:4] = mass[..., None] * v + p[..., None] * normal
    f[..., 4] = mass * e + p * vn
    return f


def kg_two_point_flux(u_left, u_right, normal, gas, check=True):
    """Kennedy-Gruber two-point flux projected on ``normal``.

    ``normal`` need not be unit length; the flux is linear in it.
    Symmetric in the two states and consistent with the Euler flux.
    """
    u_left = np.asarray(u_left, dtype=float)
    u_right = np.asarray(u_right, dtype=float)
    if check:
        check_state(u_left, gas)
        check_state(u_right, gas)
    normal = np.asarray(normal, dtype=float)
    g = gas.gamma
    rho_l, rho_r = u_left[..., 0], u_right[..., 0]
    return _kg_from_primitive(
        rho_l,
        u_left[..., 1:4] / rho_l[..., None],
        pressure(u_left, g),
        u_left[..., 4] / rho_l,
        rho_r,
        u_right[..., 1:4] / rho_r[..., None],
        pressure(u_right, g),
        u_right[..., 4] / rho_r,
        normal,
    )


def interface_flux(u_left, u_right, normal, gas, scheme, check=True):
    """Numerical flux across an interface with unit ``normal`` pointing left to right."""
    scheme = InterfaceScheme.parse(scheme)
    u_left = np.asarray(u_left, dtype=float)
    u_right = np.asarray(u_right, dtype=float)
    normal = np.asarray(normal, dtype=float)
    if check:
        check_state(u_left, gas)
        check_state(u_right, gas)
    if scheme is InterfaceScheme.UPWIND:
        fl = euler_flux(u_left, gas)
        fr = euler_flux(u_right, gas)
        central = 0.5 * np.einsum("...dk,...d->...k", fl + fr, normal)
    else:
        central = kg_two_point_flux(u_left, u_right, normal, gas, check=False)
    if scheme is InterfaceScheme.CENTRAL_KG:
        return central
    lam = np.maximum(max_wave_speed(u_left, normal, gas), max_wave_speed(u_right, normal, gas))
    return central - 0.5 * lam[..., None] * (u_right - u_left)
