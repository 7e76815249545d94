"""Initial conditions for the built-in test cases."""

import numpy as np

from .physics import from_primitive

__all__ = ["uniform", "taylor_green", "density_wave", "isentropic_vortex", "couette"]


def uniform(x, gas, rho=1.0, velocity=(1.0, 0.0, 0.0), pressure=None):
    p = gas.p_inf if pressure is None else pressure
    shape = x.shape[:-1]
    return from_primitive(np.full(shape, rho), np.broadcast_to(np.asarray(velocity, float), shape + (3,)), np.full(shape, p), gas)


def taylor_green(x, gas, v0=1.0, rho0=1.0, p0=None):
    """Taylor-Green vortex on ``[0, 2 pi]^3`` with constant density."""
    p0 = gas.p_inf if p0 is None else p0
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    v = np.stack(
        [
            v0 * np.sin(X) * np.cos(Y) * np.cos(Z),
            -v0 * np.cos(X) * np.sin(Y) * np.cos(Z),
            np.zeros_like(X),
        ],
        axis=-1,
    )
    p = p0 + rho0 * v0**2 / 16.0 * (np.cos(2 * X) + np.cos(2 * Y)) * (np.cos(2 * Z) + 2.0)
    return from_primitive(np.full_like(X, rho0), v, p, gas)


def density_wave(x, gas, t=0.0, amplitude=0.1, velocity=(1.0, 0.0, 0.0), pressure=1.0, wavenumber=1.0):
    """``rho = 1 + A sin(k (x - v t))`` advected by a uniform velocity at uniform pressure."""
    vel = np.asarray(velocity, float)
    phase = wavenumber * (x[..., 0] - vel[0] * t)
    rho = 1.0 + amplitude * np.sin(phase)
    shape = x.shape[:-1]
    return from_primitive(rho, np.broadcast_to(vel, shape + (3,)), np.full(shape, pressure), gas)


def isentropic_vortex(x, gas, center=(np.pi, np.pi), strength=1.0, velocity=(1.0, 0.0, 0.0)):
    """Isentropic vortex in the x-y plane (free stream ``rho = 1``, ``p = p_inf``)."""
    g = gas.gamma
    dx = x[..., 0] - center[0]
    dy = x[..., 1] - center[1]
    r2 = dx**2 + dy**2
    f = strength / (2 * np.pi) * np.exp(0.5 * (1.0 - r2))
    t_inf = gas.p_inf
    dT = -(g - 1.0) / (2.0 * g) * f**2
    T = t_inf + dT
    rho = (T / t_inf) ** (1.0 / (g - 1.0))
    p = rho * T
    v = np.stack(
        [velocity[0] - f * dy, velocity[1] + f * dx, np.full_like(dx, velocity[2])], axis=-1
    )
    return from_primitive(rho, v, p, gas)


def couette(x, gas, height=1.0, wall_speed=1.0, perturbation=0.0):
    """Linear Couette profile ``u = U y / h`` plus an optional ``sin(pi y / h)`` perturbation."""
    y = x[..., 1] / height
    u = wall_speed * y + perturbation * np.sin(np.pi * y)
    v = np.stack([u, np.zeros_like(u), np.zeros_like(u)], axis=-1)
    return from_primitive(np.ones_like(u), v, np.full_like(u, gas.p_inf), gas)
