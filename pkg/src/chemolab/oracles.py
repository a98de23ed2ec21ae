"""Closed-form references used to check the solver.

Nothing here imports the grid, elliptic or stepper modules; the oracles must
stay independent of the code paths they are used to verify.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidAmplitude, InvalidInput, Unsupported

EULER_GAMMA = 0.57721566490153286061


@dataclass(frozen=True)
class LogisticParams:
    c0: float
    r: float
    mu: float

    def __post_init__(self):
        if min(self.c0, self.r, self.mu) <= 0:
            raise InvalidInput("logistic parameters must be positive")

    @property
    def u_star(self) -> float:
        return self.r / self.mu


def logistic_exact(p: LogisticParams, t: float) -> float:
    """Solution of ``u' = r u - mu u^2`` with ``u(0) = c0``."""
    if t < 0:
        raise InvalidInput("t must be nonnegative")
    us = p.u_star
    return us / (1.0 + (us - p.c0) / p.c0 * math.exp(-p.r * t))


def eigenmode_signal(k: int, amp: float, c: float, alpha: float, beta: float, lx: float,
                     x: np.ndarray):
    """Analytic pair solving ``Lap v - alpha v + beta u = 0`` with Neumann data.

    ``u = c + amp cos(k pi x / lx)`` and the matching ``v``, evaluated at the
    coordinates ``x`` (any array shape).
    """
    if abs(amp) >= c:
        raise InvalidAmplitude(f"|amp| must be below c to keep u positive ({amp} vs {c})")
    if k < 0:
        raise InvalidInput("mode index must be nonnegative")
    kk = (k * math.pi / lx) ** 2
    mode = np.cos(k * math.pi * np.asarray(x) / lx)
    u = c + amp * mode
    v = beta * c / alpha + amp * beta * mode / (alpha + kk)
    return u, v


def bessel_k0(x: float) -> float:
    """Modified Bessel function K0 for x > 0, to roughly 1e-14 relative.

    Ascending series for x <= 2; beyond that the trapezoidal rule on
    ``K0(x) = int_0^inf exp(-x cosh s) ds``, which converges geometrically
    for this analytic, doubly-exponentially decaying integrand.
    """
    if x <= 0:
        raise InvalidInput("K0 needs a positive argument")
    if x <= 2.0:
        q = 0.25 * x * x
        term = 1.0
        harmonic = 0.0
        i0 = 1.0
        tail = 0.0
        k = 0
        while True:
            k += 1
            term *= q / (k * k)
            harmonic += 1.0 / k
            i0 += term
            tail += term * harmonic
            if term * max(harmonic, 1.0) < 1e-18 * (i0 + tail):
                break
        return -(math.log(0.5 * x) + EULER_GAMMA) * i0 + tail
    h = 0.05
    total = 0.5 * math.exp(-x)
    s = h
    while True:
        term = math.exp(-x * math.cosh(s))
        total += term
        if term < 1e-18 * total:
            break
        s += h
    return h * total


def delta0_bessel(n_dim: int, diam: float) -> float:
    """Heat-kernel constant via the Bessel-function identity.

    ``int_0^inf t^(nu-1) exp(-t - a/t) dt = 2 a^(nu/2) K_nu(2 sqrt a)`` with
    ``nu = 1 - N/2`` and ``a = diam^2 / 4``.
    """
    if diam <= 0:
        raise InvalidInput("diam must be positive")
    if n_dim == 3:
        return math.exp(-diam) / (4 * math.pi * diam)
    if n_dim == 2:
        return bessel_k0(diam) / (2 * math.pi)
    raise Unsupported(f"closed form only for N in {{2, 3}}, got {n_dim}")
