"""Semiclassical Wei-Norman propagation of the atom.

The interaction-picture propagator is factored as
U = exp(b+ s+) exp(b- s-) exp(bz sz), i.e. in the (e, g) basis

    U = [[(1 + p m) e^z, p e^-z], [m e^z, e^-z]],   p = b+, m = b-, z = bz.

This chart breaks down when U[0, 0] -> 0 (the atom fully inverted, W = -1):
b+ then runs off to infinity through a Riccati pole. Resonant Rabi flopping
reaches W = -1 every half period, so by default the integrator hops onto the
first column (x, y) = U |e> while |b+| is large and returns to the product
coordinates once |b+| is moderate again. Only exp(bz) is meaningful across a
hop; the logarithm branch of bz is chosen for continuity.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import IntegrationError, ValidationError, WeiNormanSingularity
from .model import InitialState, ModelParams
from .odesolve import OdeProblem, integrate

BETA_CHART, AMPLITUDE_CHART = 0, 1
ENTER_AMPLITUDE = 10.0  # |b+| above which we leave the product chart
LEAVE_AMPLITUDE = 5.0
ABORT_MAGNITUDE = 1e6  # used when chart switching is disabled
RESIDUE_LIMIT = 1e-6


def drive(params: ModelParams, init: InitialState) -> Callable[[float], complex]:
    """Scalar Omega_sc(t) using cmath; the hot path of every coefficient ODE."""
    c1 = params.g1 * init.alpha1
    c2 = params.g2 * init.alpha2
    d1, d2 = params.delta1, params.delta2
    exp = cmath.exp

    def omega(t):
        return c1 * exp(1j * d1 * t) + c2 * exp(1j * d2 * t)

    return omega


# --- chart conversions -------------------------------------------------------

def beta_to_columns(bz, bp, bm):
    ez = np.exp(bz)
    return (1 + bp * bm) * ez, bm * ez


def columns_to_beta(x, y, z_near=0.0):
    """Invert the factorization from the first column of an SU(2) matrix."""
    xc = np.conj(x)
    z = -np.log(xc)
    z = z + 2j * np.pi * np.round((np.imag(z_near) - np.imag(z)) / (2 * np.pi))
    return z, -np.conj(y) / xc, y * xc


def phi_from_beta(bz, bp, bm):
    q = bp * bm
    return (
        -bp * bp * np.exp(-2 * bz),
        -bp * (1 + q),
        np.exp(2 * bz) * (1 + q * (2 + q)),
    )


def phi_from_columns(x, y):
    yc = np.conj(y)
    return -yc * yc, yc * x, x * x


# --- integration driver ------------------------------------------------------

@dataclass
class _Segment:
    t_start: float
    t_end: float
    chart: int
    dense: object


@dataclass
class AtomPropagation:
    """Raw output of :func:`propagate_atom`."""

    times: np.ndarray
    atom: np.ndarray  # (n, 3) chart coordinates
    chart: np.ndarray  # (n,) chart flag per sample
    extra: np.ndarray  # (n, extra_dim)
    segments: list
    switch_times: list
    steps: int
    rejected: int


def propagate_atom(
    omega: Callable[[float], complex],
    grid,
    extra_rhs=None,
    extra_dim: int = 0,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
    chart_switching: bool = True,
    dense: bool = True,
) -> AtomPropagation:
    """Integrate the atom propagator, optionally together with extra ODEs.

    ``extra_rhs(t, om, phi1, phi2, phi3, extra)`` returns the derivative of the
    extra components; it sees the phi functions of the current atom
    propagator regardless of which chart is active.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or grid[0] != 0.0:
        raise ValidationError("time grid must start at 0", key="grid")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("time grid must be strictly increasing", key="grid")
    dim = 3 + extra_dim

    def rhs_beta(t, u):
        bz, bp, bm = u[0], u[1], u[2]
        om = omega(t)
        oc = om.conjugate()
        d = np.empty(dim, dtype=complex)
        d[0] = 1j * bp * oc
        d[1] = -1j * (om - bp * bp * oc)
        d[2] = -1j * (1 + 2 * bp * bm) * oc
        if extra_dim:
            q = bp * bm
            e2z = cmath.exp(2 * bz)
            d[3:] = extra_rhs(t, om, -bp * bp / e2z, -bp * (1 + q), e2z * (1 + q * (2 + q)), u[3:])
        return d

    def rhs_amp(t, u):
        x, y = u[0], u[1]
        om = omega(t)
        d = np.empty(dim, dtype=complex)
        d[0] = -1j * om * y
        d[1] = -1j * om.conjugate() * x
        d[2] = 0.0
        if extra_dim:
            yc = y.conjugate()
            d[3:] = extra_rhs(t, om, -yc * yc, yc * x, x * x, u[3:])
        return d

    def monitor_beta(t, u):
        mag = abs(u[1])
        if chart_switching:
            return mag > ENTER_AMPLITUDE
        if mag > ABORT_MAGNITUDE:
            raise WeiNormanSingularity(t, mag)
        return False

    def monitor_amp(t, u):
        return abs(u[1]) < LEAVE_AMPLITUDE * abs(u[0])

    n = grid.size
    atom = np.empty((n, 3), dtype=complex)
    charts = np.empty(n, dtype=np.int8)
    extra = np.empty((n, extra_dim), dtype=complex)
    segments, switches = [], []
    steps = rejected = 0

    chart = BETA_CHART
    t0 = 0.0
    u0 = np.zeros(dim, dtype=complex)
    filled = 0
    t_end = float(grid[-1])
    while True:
        pending = grid[filled:]
        sub = pending if pending[0] == t0 else np.concatenate(([t0], pending))
        offset = 0 if pending[0] == t0 else 1
        problem = OdeProblem(
            rhs_beta if chart == BETA_CHART else rhs_amp, (t0, t_end), dim, abs_tol, rel_tol
        )
        sol = integrate(
            problem,
            u0,
            sub,
            monitor=monitor_beta if chart == BETA_CHART else monitor_amp,
            dense=dense,
        )
        steps += sol.step_count
        rejected += sol.rejected_steps
        got = sol.states[offset:]
        k = len(got)
        atom[filled:filled + k] = got[:, :3]
        extra[filled:filled + k] = got[:, 3:]
        charts[filled:filled + k] = chart
        filled += k
        segments.append(_Segment(t0, sol.t_final, chart, sol.dense))
        if not sol.stopped:
            break
        # hop charts at the stopping instant
        t0 = sol.t_final
        u0 = sol.y_final.copy()
        if chart == BETA_CHART:
            x, y = beta_to_columns(u0[0], u0[1], u0[2])
            u0[0], u0[1], u0[2] = x, y, u0[0]  # keep bz as the branch reference
            chart = AMPLITUDE_CHART
        else:
            z, p, m = columns_to_beta(u0[0], u0[1], u0[2])
            u0[0], u0[1], u0[2] = z, p, m
            chart = BETA_CHART
        switches.append(t0)
    if filled != n:
        raise IntegrationError(f"integration ended at t={t0!r} with {n - filled} samples missing")
    return AtomPropagation(grid, atom, charts, extra, segments, switches, steps, rejected)


# --- public types ------------------------------------------------------------

@dataclass(frozen=True)
class BetaCoefficients:
    """Wei-Norman coefficients on a grid, with the propagator column alongside.

    ``beta_*`` are always filled in. On samples taken in the amplitude chart
    they are recovered from the column, which is exact but large near W = -1.
    """

    times: np.ndarray
    beta_z: np.ndarray
    beta_plus: np.ndarray
    beta_minus: np.ndarray
    x: np.ndarray
    y: np.ndarray
    chart: np.ndarray
    switch_times: tuple = ()
    segments: tuple = field(default=(), repr=False, compare=False)

    def _segment(self, t):
        if not self.segments:
            raise ValueError("no dense output stored")
        for seg in self.segments:
            if t <= seg.t_end:
                return seg
        if t <= self.segments[-1].t_end * (1 + 1e-12):
            return self.segments[-1]
        raise ValueError(f"t={t!r} beyond the solved range")

    def state_at(self, t):
        """(chart, coordinates) at arbitrary t from the dense interpolant."""
        seg = self._segment(t)
        return seg.chart, seg.dense(t)

    def columns_at(self, t):
        chart, u = self.state_at(t)
        if chart == BETA_CHART:
            return beta_to_columns(u[0], u[1], u[2])
        return u[0], u[1]

    def at(self, t):
        chart, u = self.state_at(t)
        if chart == BETA_CHART:
            return u[0], u[1], u[2]
        return columns_to_beta(u[0], u[1], u[2])

    def unitary(self, k: int) -> np.ndarray:
        """2x2 propagator at sample k in the (e, g) basis."""
        if self.chart[k] == BETA_CHART:
            z, p, m = self.beta_z[k], self.beta_plus[k], self.beta_minus[k]
            ez, emz = np.exp(z), np.exp(-z)
            return np.array([[(1 + p * m) * ez, p * emz], [m * ez, emz]])
        x, y = self.x[k], self.y[k]
        return np.array([[x, -np.conj(y)], [y, np.conj(x)]])


def _as_coefficients(prop: AtomPropagation) -> BetaCoefficients:
    atom, chart = prop.atom, prop.chart
    n = len(prop.times)
    bz, bp, bm = (np.empty(n, dtype=complex) for _ in range(3))
    x, y = np.empty(n, dtype=complex), np.empty(n, dtype=complex)
    z_prev = 0.0
    for k in range(n):
        if chart[k] == BETA_CHART:
            bz[k], bp[k], bm[k] = atom[k]
            x[k], y[k] = beta_to_columns(*atom[k])
        else:
            x[k], y[k] = atom[k, 0], atom[k, 1]
            with np.errstate(divide="ignore", invalid="ignore"):
                bz[k], bp[k], bm[k] = columns_to_beta(x[k], y[k], z_prev)
        if np.isfinite(bz[k]):
            z_prev = bz[k]
    return BetaCoefficients(
        prop.times, bz, bp, bm, x, y, chart, tuple(prop.switch_times), tuple(prop.segments)
    )


def solve_betas(
    params: ModelParams,
    init: InitialState,
    grid,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
    chart_switching: bool = True,
) -> BetaCoefficients:
    prop = propagate_atom(
        drive(params, init), grid, abs_tol=abs_tol, rel_tol=rel_tol, chart_switching=chart_switching
    )
    return _as_coefficients(prop)


def _require_excited(init: InitialState):
    if not init.is_excited:
        raise ValidationError(
            "the semiclassical state is defined for an atom starting in |e>; "
            "use the fluctuation module for general (c_e, c_g)",
            key="c_g",
        )


def sc_state(betas: BetaCoefficients, params: ModelParams, init: InitialState, t: float):
    """Lab-frame atom amplitudes (a_e, a_g) and rotated coherent labels at time t."""
    _require_excited(init)
    x, y = _columns_at_time(betas, t)
    a_e = x * cmath.exp(-0.5j * params.omega0 * t)
    a_g = y * cmath.exp(0.5j * params.omega0 * t)
    labels = (
        init.alpha1 * cmath.exp(-1j * params.omega1 * t),
        init.alpha2 * cmath.exp(-1j * params.omega2 * t),
    )
    return (a_e, a_g), labels


def _columns_at_time(betas, t):
    hit = np.flatnonzero(betas.times == t)
    if hit.size:
        k = hit[0]
        return betas.x[k], betas.y[k]
    return betas.columns_at(t)


def sc_observables(betas: BetaCoefficients, t=None):
    """(W, s) at the sample times, or at one time ``t``.

    s is <sigma_-> in the frame rotating at omega0. In the product chart W is
    1 + 2 b+ b-, whose imaginary part must vanish; a residue above 1e-6 means
    the integration is not trustworthy.
    """
    if t is not None:
        chart, u = betas.state_at(t)
        if chart == BETA_CHART:
            bp, bm = u[1], u[2]
            q = bp * bm
            _check_residue(np.atleast_1d(q), t)
            return float(np.real(1 + 2 * q)), complex(-bp * (1 + q))
        x, y = u[0], u[1]
        return float(abs(x) ** 2 - abs(y) ** 2), complex(x * np.conj(y))

    W = np.empty(len(betas.times))
    s = np.empty(len(betas.times), dtype=complex)
    in_beta = betas.chart == BETA_CHART
    q = betas.beta_plus[in_beta] * betas.beta_minus[in_beta]
    _check_residue(q, betas.times[in_beta])
    W[in_beta] = np.real(1 + 2 * q)
    s[in_beta] = -betas.beta_plus[in_beta] * (1 + q)
    x, y = betas.x[~in_beta], betas.y[~in_beta]
    W[~in_beta] = np.abs(x) ** 2 - np.abs(y) ** 2
    s[~in_beta] = x * np.conj(y)
    return W, s


def _check_residue(q, times):
    if q.size == 0:
        return
    residue = np.abs(np.imag(2 * q))
    k = int(np.argmax(residue))
    if residue[k] > RESIDUE_LIMIT:
        when = np.atleast_1d(times)[k]
        raise IntegrationError(
            f"imaginary part of 1 + 2 b+ b- is {residue[k]:.2e} at t={when!r}; "
            "tighten the integration tolerances"
        )
