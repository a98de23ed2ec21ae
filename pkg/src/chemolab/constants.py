"""Explicit parameter thresholds and the heat-kernel constant delta0.

All threshold formulas are evaluated literally in double precision.  Formulas
that are undefined for a parameter set raise :class:`DomainViolation`;
:func:`threshold_report` turns those into :class:`Undefined` markers so one
bad threshold never hides the others.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainViolation, InvalidInput

# integrand is cut where it drops below exp(-CUTOFF) of its peak
_CUTOFF = 60.0


def _check_lambda(lam: float) -> None:
    if not (0.0 < lam < 1.0):
        raise InvalidInput(f"lambda must lie in (0, 1), got {lam}")


def _check_positive(**kw) -> None:
    for name, val in kw.items():
        if not (val > 0 and math.isfinite(val)):
            raise InvalidInput(f"{name} must be positive and finite, got {val}")


def _check_chi(chi: float) -> None:
    # chi = 0 is the homogeneous limit: every threshold carries a positive power of chi
    if not (chi >= 0 and math.isfinite(chi)):
        raise InvalidInput(f"chi must be nonnegative and finite, got {chi}")


def delta0(n_dim: int, diam: float) -> float:
    """Heat-kernel lower-bound constant of a domain with diameter ``diam``.

    ``int_0^inf (4 pi t)^(-N/2) exp(-(t + diam^2/(4t))) dt``, integrated in
    ``s = ln t`` where the integrand is a concave exponent ``exp(g(s))``.
    The window is clipped where ``g`` falls ``_CUTOFF`` below its maximum.
    """
    if int(n_dim) != n_dim or n_dim < 2:
        raise InvalidInput(f"n_dim must be an integer >= 2, got {n_dim}")
    _check_positive(diam=diam)
    a = 0.25 * diam * diam
    nu = 1.0 - 0.5 * n_dim

    def g(s):
        return nu * s - math.exp(s) - a * math.exp(-s)

    def dg(s):
        return nu - math.exp(s) + a * math.exp(-s)

    # dg is strictly decreasing; bracket its root by stepping outward
    lo, hi = -1.0, 1.0
    while dg(lo) <= 0:
        lo -= 2 * (1 - lo)
    while dg(hi) >= 0:
        hi += 2 * (1 + hi)
    s_peak = brentq(dg, lo, hi, xtol=1e-14)
    g_peak = g(s_peak)

    def drop(s):
        return g(s) - g_peak + _CUTOFF

    step = 1.0
    while drop(s_peak - step) > 0:
        step *= 2
    s_lo = brentq(drop, s_peak - step, s_peak, xtol=1e-10)
    step = 1.0
    while drop(s_peak + step) > 0:
        step *= 2
    s_hi = brentq(drop, s_peak, s_peak + step, xtol=1e-10)

    val, _ = quad(lambda s: math.exp(g(s) - g_peak), s_lo, s_hi,
                  epsabs=0.0, epsrel=1e-13, limit=200, points=[s_peak])
    return (4 * math.pi) ** (-0.5 * n_dim) * math.exp(g_peak) * val


def _common_prefactor(lam: float, chi: float, beta: float) -> float:
    # beta (1-lam) lam^(lam/(1-lam)) chi^(1/(1-lam))
    return beta * (1 - lam) * lam ** (lam / (1 - lam)) * chi ** (1 / (1 - lam))


def mu1_star(p: float, lam: float, chi: float, beta: float) -> float:
    """Threshold on mu for L^p bounds of u (``p >= 2``)."""
    _check_lambda(lam)
    _check_chi(chi)
    _check_positive(beta=beta)
    if p <= 1 + lam:
        raise DomainViolation(f"mu1* needs p > 1 + lambda (p={p}, lambda={lam})")
    e = 1 / (1 - lam)
    inner = 2 * p**4 * (p + lam) / (p - 1 - lam) ** 3
    brace = (4 * lam) ** e * inner ** ((p + 1) / (2 * p * (1 - lam))) + 1
    return (_common_prefactor(lam, chi, beta) * (p - 1) * p ** ((2 * lam - 1) * e)
            * 2 ** (-lam * e) * brace)


def mu2_star(n_dim: int, lam: float, chi: float, beta: float) -> float:
    """Threshold on mu for global boundedness; needs ``N > 2(1 + lambda)``."""
    _check_lambda(lam)
    _check_chi(chi)
    _check_positive(beta=beta)
    n = n_dim
    base = n - 2 * (1 + lam)
    if base <= 0:
        raise DomainViolation(
            f"mu2* needs N > 2(1 + lambda); N - 2(1 + lambda) = {base:g} (N={n}, lambda={lam})")
    e = 1 / (1 - lam)
    inner = n**4 * (n + 2 * lam) / (2 * base**3)
    brace = (4 * lam) ** e * inner ** ((n + 2) / (2 * n * (1 - lam))) + 1
    return (_common_prefactor(lam, chi, beta) * (n - 2) * n ** ((2 * lam - 1) * e)
            * 2 ** (-2 * lam * e) * brace)


def mu3_star(n_dim: int, lam: float, chi: float, beta: float) -> float:
    """Threshold on mu for eventual upper/lower bounds independent of u0."""
    _check_lambda(lam)
    _check_chi(chi)
    _check_positive(beta=beta)
    n = n_dim
    if n < 2:
        raise DomainViolation(f"mu3* needs N >= 2, got {n}")
    e = 1 / (1 - lam)
    inner = 32 * n**4 * (2 * n + lam) / (2 * n - 1 - lam) ** 3
    brace = (4 * lam) ** e * inner ** ((2 * n + 1) / (4 * n * (1 - lam))) + 1
    return 0.5 * _common_prefactor(lam, chi, beta) * (2 * n - 1) * n ** ((2 * lam - 1) * e) * brace


def mu4_star(q: float, lam: float, chi: float, alpha: float, beta: float, r: float,
             eta: float, delta0_val: float, area: float) -> tuple[float, int]:
    """Threshold on mu for exponential stability.

    Returns ``(value, branch)`` where ``branch`` (1 or 2) names the term of
    the minimum that was attained.
    """
    _check_lambda(lam)
    _check_chi(chi)
    _check_positive(alpha=alpha, beta=beta, r=r, delta0=delta0_val, area=area)
    if not (0 < q < 1):
        raise InvalidInput(f"q must lie in (0, 1), got {q}")
    if not (0 < eta <= 1):
        raise InvalidInput(f"eta must lie in (0, 1], got {eta}")
    floor = (eta ** (1 / q) * delta0_val * area) ** (-lam)
    b1 = (beta * chi / alpha * r ** (1 - 2 * lam) / 2 ** (2 + lam) * floor) ** (1 / (1 - lam))
    b2 = (beta ** (2 - lam) * r ** (1 - 2 * lam) / alpha ** (1 - lam) * chi**2 / 2 ** (4 + lam)
          * floor) ** (1 / (2 - 2 * lam))
    return (b1, 1) if b1 <= b2 else (b2, 2)


def v_floor_eta(r: float, mu: float, q: float, eta: float, delta0_val: float, area: float) -> float:
    """Eventual lower bound ``(2r/mu) eta^(1/q) delta0 |Omega|`` on min v."""
    return 2 * r / mu * eta ** (1 / q) * delta0_val * area


def mu_tilde(chi: float, r: float, mu: float, alpha: float, beta: float, lam: float,
             q: float, eta: float, delta0_val: float, area: float) -> float:
    """Coefficient absorbed from the cross-diffusion term in the energy estimate.

    The energy decays like ``exp(-r (mu - mu_tilde) / mu * t)`` when
    ``mu > mu_tilde``.
    """
    _check_lambda(lam)
    _check_positive(r=r, mu=mu, alpha=alpha, beta=beta, delta0=delta0_val, area=area)
    _check_chi(chi)
    inv_floor = mu / (2 * r * delta0_val * area * eta ** (1 / q))
    b1 = beta**2 * chi**2 / (16 * alpha) * inv_floor ** (2 * lam)
    b2 = beta * chi**2 / 16 * (mu / r) ** lam * (beta / alpha) ** (1 - lam) * inv_floor**lam
    return min(b1, b2)


@dataclass(frozen=True)
class Undefined:
    """Marker for a threshold whose formula is undefined at these inputs."""

    reason: str

    def to_json(self):
        return {"domain_error": self.reason}


Value = Union[float, Undefined]


def _try(fn, *args) -> Value:
    try:
        return fn(*args)
    except DomainViolation as exc:
        return Undefined(str(exc))


def _gt(a: float, b: Value) -> Optional[bool]:
    return None if isinstance(b, Undefined) else bool(a > b)


@dataclass(frozen=True)
class ThresholdReport:
    n_dim: int
    mu: float
    delta0: float
    mu1_star: dict[float, Value]
    mu2_star: Value
    mu3_star: Value
    mu4_star: float
    mu4_branch: int
    mu_tilde: float
    v_floor_eta: float
    rate_energy: float
    rate_sup: float
    flags: dict[str, object] = field(default_factory=dict)

    @property
    def mu_minus_mu_tilde(self) -> float:
        return self.mu - self.mu_tilde

    def to_json(self) -> dict:
        def enc(v):
            return v.to_json() if isinstance(v, Undefined) else v

        return {
            "n_dim": self.n_dim,
            "delta0": self.delta0,
            "mu1_star": {_pkey(p): enc(v) for p, v in self.mu1_star.items()},
            "mu2_star": enc(self.mu2_star),
            "mu3_star": enc(self.mu3_star),
            "mu4_star": self.mu4_star,
            "mu4_branch": self.mu4_branch,
            "mu_tilde": self.mu_tilde,
            "mu_minus_mu_tilde": self.mu_minus_mu_tilde,
            "mu_tilde_below_mu": self.mu_tilde < self.mu,
            "v_floor_eta": self.v_floor_eta,
            "rate_energy": self.rate_energy,
            "rate_sup": self.rate_sup,
            "flags": dict(self.flags),
        }


def _pkey(p: float) -> str:
    return str(int(p)) if float(p).is_integer() else repr(float(p))


def threshold_report(*, chi: float, r: float, mu: float, alpha: float, beta: float, lam: float,
                     n_dim: int, p_list: Sequence[float], q: float, eta: float,
                     area: float, diam: float) -> ThresholdReport:
    """Evaluate every threshold and classify ``mu`` against them.

    Flags are ``True``/``False``, or ``None`` when the threshold they compare
    against is undefined.  ``uniformly_persistent`` requires ``mu > mu3*``
    and, when ``mu2*`` is defined, ``mu3* > mu2*``.
    """
    _check_chi(chi)
    _check_positive(r=r, mu=mu, alpha=alpha, beta=beta, area=area, diam=diam)
    _check_lambda(lam)
    d0 = delta0(n_dim, diam)
    m1 = {float(p): _try(mu1_star, p, lam, chi, beta) for p in p_list}
    m2 = _try(mu2_star, n_dim, lam, chi, beta)
    m3 = _try(mu3_star, n_dim, lam, chi, beta)
    m4, branch = mu4_star(q, lam, chi, alpha, beta, r, eta, d0, area)
    mt = mu_tilde(chi, r, mu, alpha, beta, lam, q, eta, d0, area)
    rate = r * (mu - mt) / mu

    persistent = _gt(mu, m3)
    if persistent is not None and not isinstance(m2, Undefined):
        persistent = persistent and m3 > m2
    stable = None if isinstance(m3, Undefined) else bool(mu > max(m3, m4))
    flags = {
        "lp_bounded": {_pkey(p): _gt(mu, v) for p, v in m1.items()},
        "globally_bounded": _gt(mu, m2),
        "uniformly_persistent": persistent,
        "exponentially_stable": stable,
        "energy_decays": bool(mu > mt),
    }
    return ThresholdReport(
        n_dim=n_dim, mu=mu, delta0=d0, mu1_star=m1, mu2_star=m2, mu3_star=m3,
        mu4_star=m4, mu4_branch=branch, mu_tilde=mt,
        v_floor_eta=v_floor_eta(r, mu, q, eta, d0, area),
        rate_energy=rate, rate_sup=rate / (n_dim + 2), flags=flags,
    )
