"""Deterministic SEEIIR influenza transmission model.

The population is split into six compartments (S, E1, E2, I1, I2, R); the
exposed and infectious stages each have two sub-stages, so stage durations
are Erlang(2) distributed.  Transmission is scaled by a multiplicative
factor during school holidays, making the contact rate piecewise constant
in time.  Integration uses a fixed-step classical 4th-order Runge-Kutta
scheme that restarts exactly at holiday breakpoints, so the discontinuous
contact rate never straddles a step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

# Fixed stage rates per day and the default (2014/15) population size.
DEFAULT_SIGMA = 1.0
DEFAULT_GAMMA = 0.5797
DEFAULT_N_POP = 54_551_450.0
DEFAULT_STEP = 0.1


class IntegrationError(RuntimeError):
    """Raised when the ODE solution becomes non-finite."""


@dataclass(frozen=True)
class EpiConstants:
    """Quantities held fixed during inference.

    sigma and gamma are the per-day exit rates of the two-stage exposed and
    infectious periods (stage mean 1/rate, total mean 2/rate); n_pop is the
    closed population size and step the integrator step in days.
    """

    sigma: float = DEFAULT_SIGMA
    gamma: float = DEFAULT_GAMMA
    n_pop: float = DEFAULT_N_POP
    step: float = DEFAULT_STEP

    def epi_params(self, pi: float, i_tot0: float, beta: float, kappa: float) -> "EpiParams":
        return EpiParams(pi=pi, i_tot0=i_tot0, beta=beta, kappa=kappa,
                         sigma=self.sigma, gamma=self.gamma, n_pop=self.n_pop)


@dataclass(frozen=True)
class EpiParams:
    """Transmission-model parameter vector.

    Attributes:
        pi: initially susceptible proportion of the population, in (0, 1].
        i_tot0: total number of infectious people at t=0 (split evenly
            between the two infectious sub-stages).
        beta: base transmission rate per day outside school holidays.
        kappa: multiplicative scaling of beta during school holidays.
        sigma: exposed-stage exit rate per day (fixed).
        gamma: infectious-stage exit rate per day (fixed).
        n_pop: total population size (fixed).
    """

    pi: float
    i_tot0: float
    beta: float
    kappa: float = 1.0
    sigma: float = DEFAULT_SIGMA
    gamma: float = DEFAULT_GAMMA
    n_pop: float = DEFAULT_N_POP

    def __post_init__(self) -> None:
        if not 0.0 < self.pi <= 1.0:
            raise ValueError(f"pi must lie in (0, 1], got {self.pi}")
        if self.i_tot0 < 0.0:
            raise ValueError(f"i_tot0 must be >= 0, got {self.i_tot0}")
        if self.beta < 0.0 or self.kappa <= 0.0:
            raise ValueError("beta must be >= 0 and kappa positive")
        if self.sigma <= 0.0 or self.gamma <= 0.0 or self.n_pop <= 0.0:
            raise ValueError("sigma, gamma and n_pop must be positive")


@dataclass(frozen=True)
class CompartmentState:
    """Compartment occupancies (person counts) at time t days from season start."""

    s: float
    e1: float
    e2: float
    i1: float
    i2: float
    r: float
    t: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.e1, self.e2, self.i1, self.i2, self.r])

    @property
    def total(self) -> float:
        return self.s + self.e1 + self.e2 + self.i1 + self.i2 + self.r


@dataclass(frozen=True)
class HolidayCalendar:
    """Ordered, disjoint closed intervals of school-closure days.

    Interval bounds are integer days from season start; day t is a holiday
    when start <= t <= end for some interval.
    """

    intervals: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        prev_end = None
        for start, end in self.intervals:
            if start != int(start) or end != int(end):
                raise ValueError("holiday bounds must be whole days")
            if start < 0 or end < start:
                raise ValueError(f"invalid holiday interval ({start}, {end})")
            if prev_end is not None and start <= prev_end:
                raise ValueError("holiday intervals must be sorted and disjoint")
            prev_end = end

    @classmethod
    def from_file(cls, path) -> "HolidayCalendar":
        """Parse a calendar file: one `start_day,end_day` pair per line, `#` comments."""
        intervals = []
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: expected `start_day,end_day`")
                try:
                    start, end = int(parts[0]), int(parts[1])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: day bounds must be integers") from exc
                intervals.append((start, end))
        return cls(intervals=tuple(sorted(intervals)))

    def contains(self, t: float) -> bool:
        for start, end in self.intervals:
            if start <= t <= end:
                return True
        return False

    def segment_bounds(self, horizon: int) -> np.ndarray:
        """Integration restart points: 0, horizon and every interval edge between."""
        cuts = {0, int(horizon)}
        for start, end in self.intervals:
            for edge in (start, end):
                if 0 < edge < horizon:
                    cuts.add(int(edge))
        return np.array(sorted(cuts), dtype=np.int64)

    def validate_within(self, horizon: int) -> None:
        if self.intervals and self.intervals[-1][1] > horizon:
            raise ValueError(
                f"holiday interval ends on day {self.intervals[-1][1]}, "
                f"beyond the {horizon}-day season window"
            )


def beta_star(beta: float, kappa: float, t: float, cal: HolidayCalendar | None) -> float:
    """Effective transmission rate at time t: kappa*beta during holidays, else beta."""
    if beta < 0.0 or kappa <= 0.0:
        raise ValueError("beta must be >= 0 and kappa positive")
    if cal is not None and cal.contains(t):
        return kappa * beta
    return beta


def force_of_infection(state: CompartmentState, beta_t: float, n_pop: float) -> float:
    """Per-susceptible infection rate: beta_t times the infectious proportion."""
    if n_pop <= 0.0:
        raise ValueError(f"n_pop must be positive, got {n_pop}")
    return beta_t * (state.i1 + state.i2) / n_pop


def ode_rhs(state: CompartmentState, params: EpiParams,
            cal: HolidayCalendar | None = None) -> tuple[float, float, float, float, float, float]:
    """Time derivatives of the six compartments; they sum to zero exactly."""
    bt = beta_star(params.beta, params.kappa, state.t, cal)
    lam = force_of_infection(state, bt, params.n_pop)
    ds = -lam * state.s
    de1 = lam * state.s - params.sigma * state.e1
    de2 = params.sigma * state.e1 - params.sigma * state.e2
    di1 = params.sigma * state.e2 - params.gamma * state.i1
    di2 = params.gamma * state.i1 - params.gamma * state.i2
    dr = params.gamma * state.i2
    return ds, de1, de2, di1, di2, dr


def initial_state(params: EpiParams) -> CompartmentState:
    """Season-start state for a given parameter vector.

    The infectious seed is split evenly across the two infectious
    sub-stages (i1 = i2 = i_tot0/2) and the exposed sub-stages are seeded
    with the same mass (e1 = e2 = i_tot0/2).  The removed compartment
    holds the initially immune (1 - pi) fraction; susceptibles take the
    remainder, so the compartments sum to n_pop exactly.  Raises
    ValueError when the seed does not fit inside the susceptible fraction.
    """
    half = params.i_tot0 / 2.0
    r0 = (1.0 - params.pi) * params.n_pop
    s0 = params.n_pop - 4.0 * half - r0
    if s0 < 0.0:
        raise ValueError(
            f"seed of {params.i_tot0} exposed+infectious people exceeds the "
            f"susceptible fraction pi*n_pop = {params.pi * params.n_pop:.1f}"
        )
    return CompartmentState(s=s0, e1=half, e2=half, i1=half, i2=half, r=r0, t=0.0)


@dataclass(frozen=True)
class Trajectory:
    """Compartment states sampled at whole-day boundaries 0..horizon."""

    days: np.ndarray
    states: np.ndarray  # shape (horizon+1, 6), columns s, e1, e2, i1, i2, r
    n_pop: float

    @property
    def s(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def horizon(self) -> int:
        return int(self.days[-1])

    def state_at(self, day: int) -> CompartmentState:
        row = self.states[int(day)]
        return CompartmentState(*row, t=float(day))


@numba.njit(cache=True)
def _rk4_kernel(y0, seg_days, seg_beta, m, sigma, gamma, n_pop, out):  # pragma: no cover
    dt = 1.0 / m
    s, e1, e2, i1, i2, r = y0[0], y0[1], y0[2], y0[3], y0[4], y0[5]
    out[0, 0] = s; out[0, 1] = e1; out[0, 2] = e2
    out[0, 3] = i1; out[0, 4] = i2; out[0, 5] = r
    for k in range(seg_beta.shape[0]):
        b = seg_beta[k]
        for day in range(seg_days[k], seg_days[k + 1]):
            for _ in range(m):
                lam = b * (i1 + i2) / n_pop
                k1s = -lam * s
                k1a = lam * s - sigma * e1
                k1b = sigma * (e1 - e2)
                k1c = sigma * e2 - gamma * i1
                k1d = gamma * (i1 - i2)
                k1e = gamma * i2
                s2 = s + 0.5 * dt * k1s; e12 = e1 + 0.5 * dt * k1a
                e22 = e2 + 0.5 * dt * k1b; i12 = i1 + 0.5 * dt * k1c
                i22 = i2 + 0.5 * dt * k1d
                lam = b * (i12 + i22) / n_pop
                k2s = -lam * s2
                k2a = lam * s2 - sigma * e12
                k2b = sigma * (e12 - e22)
                k2c = sigma * e22 - gamma * i12
                k2d = gamma * (i12 - i22)
                k2e = gamma * i22
                s3 = s + 0.5 * dt * k2s; e13 = e1 + 0.5 * dt * k2a
                e23 = e2 + 0.5 * dt * k2b; i13 = i1 + 0.5 * dt * k2c
                i23 = i2 + 0.5 * dt * k2d
                lam = b * (i13 + i23) / n_pop
                k3s = -lam * s3
                k3a = lam * s3 - sigma * e13
                k3b = sigma * (e13 - e23)
                k3c = sigma * e23 - gamma * i13
                k3d = gamma * (i13 - i23)
                k3e = gamma * i23
                s4 = s + dt * k3s; e14 = e1 + dt * k3a
                e24 = e2 + dt * k3b; i14 = i1 + dt * k3c
                i24 = i2 + dt * k3d
                lam = b * (i14 + i24) / n_pop
                k4s = -lam * s4
                k4a = lam * s4 - sigma * e14
                k4b = sigma * (e14 - e24)
                k4c = sigma * e24 - gamma * i14
                k4d = gamma * (i14 - i24)
                k4e = gamma * i24
                f = dt / 6.0
                s += f * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
                e1 += f * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
                e2 += f * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
                i1 += f * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
                i2 += f * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
                r += f * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
            out[day + 1, 0] = s; out[day + 1, 1] = e1; out[day + 1, 2] = e2
            out[day + 1, 3] = i1; out[day + 1, 4] = i2; out[day + 1, 5] = r
            if not (math.isfinite(s) and math.isfinite(e1) and math.isfinite(i1)):
                return day + 1
    return -1


def integrate(params: EpiParams, cal: HolidayCalendar | None, horizon: int,
              step: float = DEFAULT_STEP) -> Trajectory:
    """Integrate the SEEIIR system over `horizon` whole days.

    The step must divide one day evenly; within each holiday segment the
    contact rate is constant and the stepping restarts at segment edges,
    which all fall on whole days.

    Raises:
        ValueError: on a non-divisor step or non-positive horizon.
        IntegrationError: when the state overflows to non-finite values.
    """
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    m = round(1.0 / step)
    if m < 1 or abs(m * step - 1.0) > 1e-9:
        raise ValueError(f"step must divide 1.0 day evenly, got {step}")
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError(f"horizon must be at least one day, got {horizon}")

    if cal is None:
        cal = HolidayCalendar()
    seg_days = cal.segment_bounds(horizon)
    # Constant contact rate per segment, evaluated at the segment midpoint.
    seg_beta = np.array([
        beta_star(params.beta, params.kappa, 0.5 * (seg_days[k] + seg_days[k + 1]), cal)
        for k in range(len(seg_days) - 1)
    ])

    y0 = initial_state(params).as_array()
    out = np.empty((horizon + 1, 6))
    bad_day = _rk4_kernel(y0, seg_days, seg_beta, m, params.sigma, params.gamma,
                          params.n_pop, out)
    if bad_day >= 0:
        raise IntegrationError(
            f"non-finite state on day {bad_day} "
            f"(beta={params.beta}, kappa={params.kappa}, i_tot0={params.i_tot0})"
        )
    return Trajectory(days=np.arange(horizon + 1), states=out, n_pop=params.n_pop)


def weekly_incidence(traj: Trajectory) -> np.ndarray:
    """New infections per complete week, as susceptible depletion S(7v) - S(7v+7)."""
    n_weeks = traj.horizon // 7
    if n_weeks < 1:
        raise ValueError("trajectory must cover at least one full week")
    s = traj.s
    return s[0:7 * n_weeks:7] - s[7:7 * n_weeks + 7:7]


def reproduction_numbers(params: EpiParams) -> tuple[float, float]:
    """Basic and effective reproduction numbers (R0, Rn).

    R0 = beta * d_I with d_I = 2/gamma the mean infectious period; the
    effective number scales R0 by the initially susceptible proportion.
    """
    if params.gamma <= 0.0:
        raise ValueError("gamma must be positive")
    r0 = params.beta * 2.0 / params.gamma
    return r0, r0 * params.pi
