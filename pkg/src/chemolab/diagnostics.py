"""Per-sample norms, the logarithmic energy, inequality ledger and rate fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .constants import ThresholdReport
from .errors import InsufficientData, InvalidInput, UndefinedEnergy
from .grid import ScalarField, _gradient, _integrate, deviation, fine_values
from .stepper import Params

ENERGY_MIN_U = 1e-14
SLACK_REL = 1e-6
SLACK_ABS = 1e-12


@dataclass(frozen=True)
class LedgerEntry:
    name: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return ledger_pass(self.lhs, self.rhs)


def ledger_pass(lhs: float, rhs: float) -> bool:
    return rhs - lhs >= -(SLACK_REL * abs(rhs) + SLACK_ABS)


@dataclass(frozen=True)
class DiagnosticsOptions:
    """What :func:`sample` evaluates.

    ``v_lower`` enables the ``v >= delta0 int u`` check; ``None`` means "only
    when alpha == beta == 1", the setting in which that bound is established.
    ``t_late`` is the time after which the eta-floor on ``min v`` is checked
    (``None`` disables it).
    """

    p_list: tuple[float, ...] = (2.0, 4.0)
    q: float = 0.5
    vp_powers: tuple[float, ...] = (1.0, 2.0, 4.0)
    v_lower: Optional[bool] = None
    t_late: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.q < 1):
            raise InvalidInput(f"q must lie in (0, 1), got {self.q}")


@dataclass
class DiagnosticsSample:
    t: float
    mass: float
    lp: dict[float, float]
    lq: float
    min_u: float
    max_u: float
    min_v: float
    max_v: float
    grad_u_max: float
    grad_v_l2sq: float
    energy: Optional[float]  # None when min u <= ENERGY_MIN_U
    dist_sup: float
    l2sq_dev: float
    ledger: list[LedgerEntry] = field(default_factory=list)

    def entries(self, prefix: str) -> list[LedgerEntry]:
        return [e for e in self.ledger if e.name.startswith(prefix)]


# Taylor coefficients of d - log(1 + d) = sum_{k>=2} (-1)^k d^k / k
_SERIES = np.array([(-1.0) ** k / k for k in range(2, 24)])


def _d_minus_log1p(d: np.ndarray) -> np.ndarray:
    # the direct form cancels for small |d|; 22 terms are exact to rounding for |d| < 0.1
    small = np.abs(d) < 0.1
    out = np.empty_like(d)
    big = ~small
    out[big] = d[big] - np.log1p(d[big])
    ds = d[small]
    acc = np.zeros_like(ds)
    for c in _SERIES[::-1]:
        acc = acc * ds + c
    out[small] = acc * ds * ds
    return out


def _energy_density(dev: np.ndarray, u_star: float) -> np.ndarray:
    # u* f(1 + d) with d = (u - u*)/u*, from the deviation so nothing cancels near u*
    return u_star * _d_minus_log1p(dev / u_star)


def energy(u: ScalarField, r: float, mu: float) -> float:
    """``int [u - u* - u* ln(u/u*)]`` with ``u* = r/mu``; nonnegative.

    Raises :class:`UndefinedEnergy` when ``min u <= 1e-14``.
    """
    if u.min() <= ENERGY_MIN_U:
        raise UndefinedEnergy(f"energy needs min u > {ENERGY_MIN_U:g}, got {u.min():.3e}")
    if r <= 0 or mu <= 0:
        raise InvalidInput("energy needs r, mu > 0")
    return _integrate(_energy_density(deviation(u, r / mu), r / mu), u.grid)


def sample(t: float, u: ScalarField, v: ScalarField, params: Params, thresholds: ThresholdReport,
           opts: DiagnosticsOptions = DiagnosticsOptions(), mass0: Optional[float] = None,
           ) -> DiagnosticsSample:
    """Evaluate every diagnostic and ledger inequality at one time.

    ``mass0`` is the initial mass used by the ``MASS_UPPER`` bound; it
    defaults to the current mass.
    """
    p = params
    if p.r <= 0 or p.mu <= 0:
        raise InvalidInput("diagnostics need r, mu > 0 (steady state r/mu)")
    g = u.grid
    a, b = u.values, v.values
    us, vs = p.u_star, p.v_star
    mass = _integrate(a, g)
    if mass0 is None:
        mass0 = mass

    powers = sorted(set(opts.p_list) | {2.0, 4.0})
    lp = {pp: _integrate(a**pp, g) for pp in powers}
    lq = _integrate(a**opts.q, g)
    du = deviation(u, us)
    ux, uy = _gradient(fine_values(u), g.hx, g.hy)
    vx, vy = _gradient(fine_values(v), g.hx, g.hy)
    grad_v_sq = vx**2 + vy**2
    grad_v_l2sq = _integrate(grad_v_sq, g)
    l2sq_dev = _integrate(du**2, g)
    min_u, min_v = float(a.min()), float(b.min())
    e = _integrate(_energy_density(du, us), g) if min_u > ENERGY_MIN_U else None

    ledger = []
    v_lower = opts.v_lower if opts.v_lower is not None else (p.alpha == 1 and p.beta == 1)
    if v_lower:
        ledger.append(LedgerEntry("V_LOWER", thresholds.delta0 * mass, min_v))
    ratio = p.beta / p.alpha
    for pp in opts.vp_powers:
        ledger.append(LedgerEntry(f"VP_UPPER_P{pp:g}", _integrate(b**pp, g),
                                  ratio**pp * _integrate(a**pp, g)))
    ledger.append(LedgerEntry("MASS_UPPER", mass, max(mass0, p.r * g.area / p.mu)))
    ledger.append(LedgerEntry("V_DEV", _integrate(deviation(v, vs) ** 2, g), ratio**2 * l2sq_dev))
    ledger.append(LedgerEntry("GRAD_V", grad_v_l2sq, p.beta**2 / (4 * p.alpha) * l2sq_dev))
    ledger.append(LedgerEntry("GRAD_V_REL", _integrate(grad_v_sq / b**2, g),
                              p.beta * p.mu / (4 * p.r) / min_v * l2sq_dev))
    # on [u*/2, 2u*] the density lies between (mu/4r)(s-u*)^2 and (mu/r)(s-u*)^2
    if e is not None and a.min() >= 0.5 * us and a.max() <= 2 * us:
        ledger.append(LedgerEntry("ENERGY_SANDWICH_LOWER", p.mu / (4 * p.r) * l2sq_dev, e))
        ledger.append(LedgerEntry("ENERGY_SANDWICH_UPPER", e, p.mu / p.r * l2sq_dev))
    if opts.t_late is not None and t >= opts.t_late:
        ledger.append(LedgerEntry("V_FLOOR_ETA", thresholds.v_floor_eta, min_v))

    return DiagnosticsSample(
        t=t, mass=mass, lp=lp, lq=lq,
        min_u=min_u, max_u=float(a.max()), min_v=min_v, max_v=float(b.max()),
        grad_u_max=float(np.sqrt(ux**2 + uy**2).max()), grad_v_l2sq=grad_v_l2sq,
        energy=e, dist_sup=float(np.abs(du).max()), l2sq_dev=l2sq_dev, ledger=ledger,
    )


def energy_rate_rhs(u: ScalarField, v: ScalarField, params: Params) -> float:
    """Right-hand side of the energy identity along solutions.

    ``-(r/mu) int |grad u|^2/u^2 + (r chi/mu) int u^-1 v^-lambda grad u . grad v
    - mu int (u - u*)^2``, with centered gradients.
    """
    p = params
    g = u.grid
    a, b = u.values, v.values
    if a.min() <= ENERGY_MIN_U:
        raise UndefinedEnergy(f"energy needs min u > {ENERGY_MIN_U:g}")
    ux, uy = _gradient(fine_values(u), g.hx, g.hy)
    vx, vy = _gradient(fine_values(v), g.hx, g.hy)
    k = p.r / p.mu
    diffusion = -k * _integrate((ux**2 + uy**2) / a**2, g)
    cross = k * p.chi * _integrate((ux * vx + uy * vy) / (a * b**p.lam), g)
    return diffusion + cross - p.mu * _integrate(deviation(u, k) ** 2, g)


def energy_derivative_check(u: ScalarField, v: ScalarField, params: Params,
                            e_prev: float, e_curr: float, dt: float) -> float:
    """``|(e_curr - e_prev)/dt - rhs(u, v)|``; O(dt + h^2) along a trajectory.

    ``(u, v)`` should be the state at the start of the interval.
    """
    if dt <= 0:
        raise InvalidInput("dt must be positive")
    return abs((e_curr - e_prev) / dt - energy_rate_rhs(u, v, params))


def fit_decay_rate(series: Sequence[tuple[float, float]], lo: float, hi: float) -> float:
    """Least-squares decay rate of ``y`` over samples with ``lo <= y <= hi``.

    Returns minus the slope of ``ln y`` against ``t`` (positive means decay).
    """
    pts = [(t, y) for t, y in series if y is not None and y > 0 and lo <= y <= hi]
    if len(pts) < 5:
        raise InsufficientData(f"need at least 5 points in [{lo:g}, {hi:g}], got {len(pts)}")
    t = np.array([pt[0] for pt in pts])
    y = np.log([pt[1] for pt in pts])
    slope = np.polyfit(t, y, 1)[0]
    return float(-slope)


def tail_window(values: Sequence, fraction: float = 0.25) -> list:
    """Last ``fraction`` of a sequence (at least one element)."""
    n = len(values)
    if n == 0:
        return []
    k = max(1, int(math.ceil(fraction * n)))
    return list(values[n - k:])
