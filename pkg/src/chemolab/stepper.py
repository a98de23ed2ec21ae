"""Positivity-preserving IMEX stepping of the cell density and blow-up sentinels.

One step solves

    (I + dt mu diag(u^n) - dt Lap) u^{n+1} = u^n - dt div_upwind(u^n, w) + dt r u^n

with ``w = chi v^{-lambda} grad v`` on cell faces.  Diffusion and the
linearized quadratic sink are implicit, advection and growth explicit.  The
matrix is an M-matrix, so ``u^{n+1} >= 0`` whenever the right-hand side is,
which the advective CFL bound guarantees.
"""
from __future__ import annotations

import enum
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded

from .elliptic import EllipticConfig, solve_signal
from .errors import ChemoLabError, CflViolation, InvalidInput, NonConvergence, SingularSensitivity
from .grid import AnchoredField, Grid, ScalarField, _integrate, fine_values, laplacian_matrix

logger = logging.getLogger(__name__)

# tolerated round-off below zero in a freshly solved u, relative to max u
_NEG_ROUNDOFF = 1e-13


@dataclass(frozen=True)
class Params:
    """Model and scheme parameters.

    ``chi``, ``r`` and ``mu`` may be zero to switch off chemotaxis or
    kinetics (pure diffusion and homogeneous checks); ``alpha``/``beta``
    must be positive.
    """

    chi: float
    r: float
    mu: float
    alpha: float
    beta: float
    lam: float
    grid: Grid
    dt_init: float
    dt_min: float
    dt_max: float
    t_end: float
    cfl_safety: float = 0.5
    u_cap: float = 1e8
    v_floor: float = 1e-12
    elliptic: EllipticConfig = field(default_factory=EllipticConfig)

    def __post_init__(self):
        for name in ("chi", "r", "mu"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise InvalidInput(f"{name} must be finite and nonnegative, got {val}")
        for name in ("alpha", "beta", "dt_init", "dt_min", "dt_max", "t_end", "u_cap", "v_floor"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise InvalidInput(f"{name} must be positive and finite, got {val}")
        if not (0 < self.lam < 1):
            raise InvalidInput(f"lambda must lie in (0, 1), got {self.lam}")
        if not (self.dt_min <= self.dt_init <= self.dt_max):
            raise InvalidInput("need dt_min <= dt_init <= dt_max")
        if not (0 < self.cfl_safety <= 1):
            raise InvalidInput("cfl_safety must lie in (0, 1]")

    @property
    def u_star(self) -> float:
        return self.r / self.mu

    @property
    def v_star(self) -> float:
        return self.beta / self.alpha * self.u_star


class Status(str, enum.Enum):
    COMPLETED = "Completed"
    BLOW_UP = "BlowUpSuspected"
    SOLVER_FAILURE = "SolverFailure"


U_CAP_EXCEEDED = "u_cap exceeded"
V_FLOOR_CROSSED = "v_floor crossed"
DT_UNDERFLOW = "dt underflow"


@dataclass(frozen=True)
class RunOutcome:
    status: Status
    reason: str
    t_final: float

    def to_json(self) -> dict:
        return {"status": self.status.value, "reason": self.reason, "t_final": self.t_final}


@dataclass(frozen=True)
class FaceVelocity:
    """Face-normal velocities: ``wx`` is ``(ny, nx+1)``, ``wy`` is ``(ny+1, nx)``."""

    wx: np.ndarray
    wy: np.ndarray


@dataclass(frozen=True)
class StepRecord:
    """Bookkeeping for one accepted step, handed to ``on_step`` observers."""

    t: float
    dt: float
    mass_before: float
    mass_after: float
    growth: float  # r * int u^n
    sink: float  # mu * int u^n u^{n+1}
    min_u: float
    min_v: float


def chemotactic_velocity(v: ScalarField, chi: float, lam: float) -> FaceVelocity:
    """``chi v^{-lambda} dv/dn`` on every face; zero on the boundary.

    ``v`` is averaged arithmetically onto the face before the power is taken.
    """
    a = v.values
    if a.min() <= 0:
        raise SingularSensitivity(f"min v = {a.min():.3e} <= 0")
    g = v.grid
    wx = np.zeros((g.ny, g.nx + 1))
    wy = np.zeros((g.ny + 1, g.nx))
    if chi == 0:
        return FaceVelocity(wx, wy)
    d = fine_values(v)  # same differences as ``a``, without cancellation near a constant
    wx[:, 1:-1] = chi * (0.5 * (a[:, 1:] + a[:, :-1])) ** (-lam) * (d[:, 1:] - d[:, :-1]) / g.hx
    wy[1:-1, :] = chi * (0.5 * (a[1:, :] + a[:-1, :])) ** (-lam) * (d[1:, :] - d[:-1, :]) / g.hy
    return FaceVelocity(wx, wy)


def outflow_rate(w: FaceVelocity, grid: Grid) -> np.ndarray:
    """Per-cell rate at which upwind advection drains the cell, ``(ny, nx)``."""
    wx, wy = w.wx, w.wy
    return ((np.maximum(wx[:, 1:], 0) - np.minimum(wx[:, :-1], 0)) / grid.hx
            + (np.maximum(wy[1:, :], 0) - np.minimum(wy[:-1, :], 0)) / grid.hy)


def advective_dt_limit(w: FaceVelocity, grid: Grid) -> float:
    """Largest dt keeping every explicit upwind update nonnegative (inf if at rest)."""
    rate = float(outflow_rate(w, grid).max())
    return math.inf if rate <= 0 else 1.0 / rate


def upwind_divergence(a: np.ndarray, w: FaceVelocity, grid: Grid) -> np.ndarray:
    wx, wy = w.wx, w.wy
    fx = np.zeros_like(wx)
    fy = np.zeros_like(wy)
    fx[:, 1:-1] = np.maximum(wx[:, 1:-1], 0) * a[:, :-1] + np.minimum(wx[:, 1:-1], 0) * a[:, 1:]
    fy[1:-1, :] = np.maximum(wy[1:-1, :], 0) * a[:-1, :] + np.minimum(wy[1:-1, :], 0) * a[1:, :]
    return (fx[:, 1:] - fx[:, :-1]) / grid.hx + (fy[1:, :] - fy[:-1, :]) / grid.hy


@functools.lru_cache(maxsize=8)
def _neg_laplacian_banded(grid: Grid) -> np.ndarray:
    """``-Lap`` in LAPACK upper symmetric band storage (bandwidth ``nx``)."""
    L = laplacian_matrix(grid)
    bw = grid.nx
    ab = np.zeros((bw + 1, grid.size))
    for k in range(bw + 1):
        ab[bw - k, k:] = -L.diagonal(k)
    ab.flags.writeable = False
    return ab


def imex_step(u: ScalarField, v: ScalarField, p: Params, dt: float,
              velocity: Optional[FaceVelocity] = None) -> ScalarField:
    """Advance ``u`` by one IMEX step of size ``dt`` with the signal ``v`` frozen.

    Raises
    ------
    CflViolation
        ``dt`` exceeds ``cfl_safety`` times the advective limit, or ``dt r > 1``.
    NonConvergence
        The implicit solve returned a non-finite or inaccurate solution.
    """
    g = u.grid
    w = velocity if velocity is not None else chemotactic_velocity(v, p.chi, p.lam)
    limit = p.cfl_safety * advective_dt_limit(w, g)
    if dt > limit * (1 + 1e-12):
        raise CflViolation(f"dt={dt:.3e} exceeds advective limit {limit:.3e}")
    if dt * p.r > 1:
        raise CflViolation(f"dt * r = {dt * p.r:.3e} > 1")

    a = u.values
    if isinstance(u, AnchoredField):
        # unknown is u - c; the constant c drops out of the diffusion term
        c = u.anchor
        rhs = u.dev + dt * (p.r - p.mu * c) * a
    else:
        rhs = a + dt * p.r * a
    if p.chi != 0:
        rhs = rhs - dt * upwind_divergence(a, w, g)
    # SPD banded system: banded Cholesky is exact and cheaper than CG here
    ab = dt * _neg_laplacian_banded(g)
    ab[-1] += 1.0 + dt * p.mu * a.ravel()
    b = rhs.ravel()
    try:
        x = solveh_banded(ab, b, overwrite_ab=True, check_finite=False)
    except LinAlgError as exc:
        raise NonConvergence(f"implicit density solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NonConvergence("implicit density solve produced non-finite values")
    if isinstance(u, AnchoredField):
        return AnchoredField.from_dev(g, u.anchor, x.reshape(g.shape))
    return ScalarField(g, x.reshape(g.shape))


def _clamped(u: ScalarField) -> ScalarField:
    # zero out round-off negatives, keeping the anchored representation
    if isinstance(u, AnchoredField):
        return AnchoredField.from_dev(u.grid, u.anchor, np.where(u.values < 0, -u.anchor, u.dev))
    return ScalarField(u.grid, np.maximum(u.values, 0.0))


def _landing_dt(t: float, dt: float, target: float) -> float:
    # snap onto target when the step would reach it (or nearly)
    if t + dt >= target - 1e-9 * dt:
        return target - t
    return dt


def simulate(u0: ScalarField, p: Params,
             sampler: Optional[Callable[[float, ScalarField, ScalarField], None]] = None,
             every: Optional[float] = None,
             on_step: Optional[Callable[[StepRecord], None]] = None,
             ) -> tuple[RunOutcome, ScalarField, Optional[ScalarField]]:
    """Integrate from ``u0`` to ``p.t_end``.

    ``sampler(t, u, v)`` is invoked at ``t = 0, every, 2 every, ...`` and at
    ``t_end``.  Steps are shortened to land exactly on sample times.  The run
    stops early with ``BlowUpSuspected`` when ``max u > u_cap``,
    ``min v < v_floor`` or the admissible step falls below ``dt_min``;
    solver errors end it with ``SolverFailure``.

    Returns ``(outcome, u, v)`` for the last state reached; ``v`` is ``None``
    if no signal solve succeeded.
    """
    if u0.min() < 0 or _integrate(u0.values, u0.grid) <= 0:
        raise InvalidInput("initial density must be nonnegative with positive integral")
    if every is None:
        every = p.t_end
    if not every > 0:
        raise InvalidInput("sampling interval must be positive")

    g = u0.grid
    # near the steady state r/mu, carry u as r/mu + deviation so that
    # convergence can be followed far below the rounding level of r/mu
    u = AnchoredField.anchor_at(u0, p.u_star) if p.r > 0 and p.mu > 0 else u0
    v: Optional[ScalarField] = None
    t = 0.0
    k_next = 0  # index of the next sample time k * every
    first = True
    guess: Optional[ScalarField] = None
    dt_prev = 0.0

    def next_sample_time() -> float:
        return min(k_next * every, p.t_end)

    while True:
        if u.max() > p.u_cap:
            return RunOutcome(Status.BLOW_UP, U_CAP_EXCEEDED, t), u, v
        try:
            v_old = v
            v = solve_signal(u, p.alpha, p.beta, p.elliptic, guess=guess)
        except ChemoLabError as exc:
            logger.warning("signal solve failed at t=%g: %s", t, exc)
            return RunOutcome(Status.SOLVER_FAILURE, str(exc), t), u, v

        done = t >= p.t_end
        if sampler is not None and (t >= next_sample_time() or done):
            sampler(t, u, v)
            while k_next * every <= t * (1 + 1e-12) + 1e-15:
                k_next += 1
        if v.min() < p.v_floor:
            return RunOutcome(Status.BLOW_UP, V_FLOOR_CROSSED, t), u, v
        if done:
            return RunOutcome(Status.COMPLETED, "", t), u, v

        try:
            w = chemotactic_velocity(v, p.chi, p.lam)
        except ChemoLabError as exc:
            return RunOutcome(Status.SOLVER_FAILURE, str(exc), t), u, v
        dt = min(p.dt_max, p.cfl_safety * advective_dt_limit(w, g))
        if p.r > 0:
            dt = min(dt, 0.5 / p.r)
        if dt < p.dt_min:
            return RunOutcome(Status.BLOW_UP, DT_UNDERFLOW, t), u, v
        if first:
            dt = min(dt, p.dt_init)
            first = False
        target = next_sample_time() if sampler is not None else p.t_end
        dt = _landing_dt(t, dt, target)

        try:
            u_new = imex_step(u, v, p, dt, velocity=w)
        except ChemoLabError as exc:
            logger.warning("step failed at t=%g: %s", t, exc)
            return RunOutcome(Status.SOLVER_FAILURE, str(exc), t), u, v

        a = u_new.values
        if a.min() < -_NEG_ROUNDOFF * max(a.max(), 1e-300):
            return RunOutcome(Status.SOLVER_FAILURE, f"positivity lost (min u = {a.min():.3e})", t), u, v
        if a.min() < 0:
            u_new = _clamped(u_new)
        if on_step is not None:
            on_step(StepRecord(
                t=t, dt=dt,
                mass_before=_integrate(u.values, g),
                mass_after=_integrate(u_new.values, g),
                growth=p.r * _integrate(u.values, g),
                sink=p.mu * _integrate(u.values * u_new.values, g),
                min_u=u_new.min(), min_v=v.min(),
            ))
        # linear extrapolation in time warm-starts the next signal solve
        if v_old is not None and dt_prev > 0:
            fv, fo = fine_values(v), fine_values(v_old)
            ext = fv + (dt / dt_prev) * (fv - fo)
            guess = (AnchoredField.from_dev(g, v.anchor, ext) if isinstance(v, AnchoredField)
                     else ScalarField(g, ext))
        else:
            guess = v
        dt_prev = dt
        u = u_new
        t = target if t + dt >= target else t + dt
