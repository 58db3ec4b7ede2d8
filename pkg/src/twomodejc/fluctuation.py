"""Fluctuation hierarchy on top of the semiclassical propagator.

Three coefficient families are involved:

* beta (semiclassical atom, see :mod:`twomodejc.semiclassical`),
* eps1..eps6 for the conditional displacements exp(eps_i a_i^dag sz) ...,
* gamma1..gamma6 for the residual driven-field propagator, whose generator
  contains sigma_+-^(2) replaced by its expectation in the initial state.

The default path integrates all fifteen complex components as one ODE so
phi and <sigma^(2)> are always evaluated from the current beta and eps. The
multi-pass functions (solve_epsilons, solve_gammas) interpolate earlier
tracks and serve as a cross-check.

The state is assembled as two branches, e-branch and g-branch, each an atomic
2-vector times a coherent pair |Gamma^+-_1, Gamma^+-_2>.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError
from .exact import AtomDensity, FockSpace, FockState, coherent_state
from .model import InitialState, ModelParams
from .odesolve import OdeProblem, integrate
from .semiclassical import (
    BETA_CHART,
    BetaCoefficients,
    _as_coefficients,
    drive,
    phi_from_beta,
    phi_from_columns,
    propagate_atom,
)


@dataclass(frozen=True)
class PhiFunctions:
    """U^-1 sigma_- U = phi1 sigma_+ + phi2 sigma_z + phi3 sigma_-."""

    phi1: complex
    phi2: complex
    phi3: complex

    def lowering_matrix(self) -> np.ndarray:
        """The transformed sigma_- as a 2x2 matrix in the (e, g) basis."""
        return np.array([[self.phi2, self.phi1], [self.phi3, -self.phi2]])


def phi_at(betas: BetaCoefficients, t: float) -> PhiFunctions:
    hit = np.flatnonzero(betas.times == t)
    if hit.size:
        k = hit[0]
        if betas.chart[k] == BETA_CHART:
            vals = phi_from_beta(betas.beta_z[k], betas.beta_plus[k], betas.beta_minus[k])
        else:
            vals = phi_from_columns(betas.x[k], betas.y[k])
    else:
        chart, u = betas.state_at(t)
        vals = phi_from_beta(*u[:3]) if chart == BETA_CHART else phi_from_columns(u[0], u[1])
    return PhiFunctions(*(complex(v) for v in vals))


# --- coefficient tracks -------------------------------------------------------

@dataclass(frozen=True)
class _Track:
    times: np.ndarray
    values: np.ndarray  # (n, 6)
    interpolant: Optional[object] = field(default=None, repr=False, compare=False)

    def at(self, t: float) -> np.ndarray:
        hit = np.flatnonzero(self.times == t)
        if hit.size:
            return self.values[hit[0]]
        if self.interpolant is None:
            raise ValueError("track has no dense output")
        return self.interpolant(t)

    def conjugation_residual(self) -> float:
        """max |c1 + c3*|, |c2 + c4*| over the grid."""
        v = self.values
        return float(
            max(np.max(np.abs(v[:, 0] + np.conj(v[:, 2]))), np.max(np.abs(v[:, 1] + np.conj(v[:, 3]))))
        )


class EpsilonCoefficients(_Track):
    eps1 = property(lambda self: self.values[:, 0])
    eps2 = property(lambda self: self.values[:, 1])
    eps3 = property(lambda self: self.values[:, 2])
    eps4 = property(lambda self: self.values[:, 3])
    eps5 = property(lambda self: self.values[:, 4])
    eps6 = property(lambda self: self.values[:, 5])


class GammaCoefficients(_Track):
    gamma1 = property(lambda self: self.values[:, 0])
    gamma2 = property(lambda self: self.values[:, 1])
    gamma3 = property(lambda self: self.values[:, 2])
    gamma4 = property(lambda self: self.values[:, 3])
    gamma5 = property(lambda self: self.values[:, 4])
    gamma6 = property(lambda self: self.values[:, 5])


class _SegmentSlice:
    """Dense output of a chart-switched run restricted to some components."""

    def __init__(self, segments, lo, hi):
        self.segments, self.lo, self.hi = segments, lo, hi

    def __call__(self, t):
        for seg in self.segments:
            if t <= seg.t_end:
                return seg.dense(t)[self.lo:self.hi]
        return self.segments[-1].dense(t)[self.lo:self.hi]


# --- right-hand sides ----------------------------------------------------------

def _sigma_factors(init: InitialState):
    return (
        init.c_e.conjugate() * init.c_g,
        init.c_e * init.c_g.conjugate(),
        init.alpha1.conjugate(),
        init.alpha2.conjugate(),
    )


def sigma_pair(init: InitialState, e1, e2, e5):
    """(<sigma_+^(2)>, <sigma_-^(2)>) in the initial state for given eps1, eps2, eps5.

    Written with conj(c_e) c_g and Im(eps conj(alpha)) so complex amplitudes are
    handled; for real inputs this is C_e C_g exp(-+4[(eps5 +- sum|eps|^2)/2 + i Im(alpha eps)]).
    """
    cp, cm, a1c, a2c = _sigma_factors(init)
    ee = abs(e1) ** 2 + abs(e2) ** 2
    ph = 4j * (e1 * a1c + e2 * a2c).imag
    return cp * cmath.exp(-2 * e5 - 2 * ee - ph), cm * cmath.exp(2 * e5 - 2 * ee + ph)


def sigma2_expectation(init: InitialState, eps: EpsilonCoefficients, sign: int, t: float) -> complex:
    if sign not in (1, -1):
        raise ValidationError("sign must be +1 or -1", key="sign")
    e = eps.at(t)
    plus, minus = sigma_pair(init, e[0], e[1], e[4])
    return plus if sign == 1 else minus


def _eps_rhs(params: ModelParams):
    g1, g2, d1, d2 = params.g1, params.g2, params.delta1, params.delta2
    exp = cmath.exp

    def f(t, om, phi2, e, out):
        p2c = phi2.conjugate()
        u1 = exp(1j * d1 * t)
        u2 = exp(1j * d2 * t)
        out[0] = -1j * g1 * phi2 / u1
        out[1] = -1j * g2 * phi2 / u2
        out[2] = -1j * g1 * p2c * u1
        out[3] = -1j * g2 * p2c * u2
        x = om * p2c
        out[4] = 1j * (x + x.conjugate())
        out[5] = -1j * p2c * (g1 * u1 * e[0] + g2 * u2 * e[1])

    return f


def _gamma_rhs(params: ModelParams, init: InitialState):
    g1, g2, d1, d2 = params.g1, params.g2, params.delta1, params.delta2
    cp, cm, a1c, a2c = _sigma_factors(init)
    exp = cmath.exp
    if cp == 0 and cm == 0:
        def f0(t, om, phi1, phi3, e1, e2, e5, c, out):
            out[:] = 0.0
        return f0

    def f(t, om, phi1, phi3, e1, e2, e5, c, out):
        ee = abs(e1) ** 2 + abs(e2) ** 2
        ph = 4j * (e1 * a1c + e2 * a2c).imag
        splus = cp * exp(-2 * e5 - 2 * ee - ph)
        sminus = cm * exp(2 * e5 - 2 * ee + ph)
        K = phi3.conjugate() * splus + phi1.conjugate() * sminus
        L = phi1 * splus + phi3 * sminus
        u1 = exp(1j * d1 * t)
        u2 = exp(1j * d2 * t)
        out[0] = -1j * g1 * L / u1
        out[1] = -1j * g2 * L / u2
        out[2] = -1j * g1 * u1 * K
        out[3] = -1j * g2 * u2 * K
        X = (g1 * u1 * e1 + g2 * u2 * e2) * K
        out[4] = -1j * (X + X.conjugate())
        Y = om * K
        out[5] = -1j * (g1 * u1 * c[0] + g2 * u2 * c[1]) * K + 1j * (Y + Y.conjugate())

    return f


def solve_epsilons(
    params: ModelParams,
    init: InitialState,
    betas: BetaCoefficients,
    grid,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
) -> EpsilonCoefficients:
    """Multi-pass eps solve driven by the dense beta interpolant."""
    grid = np.asarray(grid, dtype=float)
    om_fn = drive(params, init)
    f = _eps_rhs(params)

    def rhs(t, e):
        out = np.empty(6, dtype=complex)
        f(t, om_fn(t), phi_at(betas, t).phi2, e, out)
        return out

    sol = integrate(OdeProblem(rhs, (grid[0], grid[-1]), 6, abs_tol, rel_tol), np.zeros(6), grid, dense=True)
    return EpsilonCoefficients(grid, sol.states, sol.dense)


def solve_gammas(
    params: ModelParams,
    init: InitialState,
    betas: BetaCoefficients,
    eps: EpsilonCoefficients,
    grid,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
) -> GammaCoefficients:
    grid = np.asarray(grid, dtype=float)
    om_fn = drive(params, init)
    f = _gamma_rhs(params, init)

    def rhs(t, c):
        out = np.empty(6, dtype=complex)
        phi = phi_at(betas, t)
        e = eps.at(t)
        f(t, om_fn(t), phi.phi1, phi.phi3, e[0], e[1], e[4], c, out)
        return out

    sol = integrate(OdeProblem(rhs, (grid[0], grid[-1]), 6, abs_tol, rel_tol), np.zeros(6), grid, dense=True)
    return GammaCoefficients(grid, sol.states, sol.dense)


@dataclass(frozen=True)
class Hierarchy:
    params: ModelParams
    init: InitialState
    betas: BetaCoefficients
    eps: EpsilonCoefficients
    gammas: GammaCoefficients

    @property
    def times(self):
        return self.betas.times

    def branch_state(self, k: int) -> "BranchState":
        return _assemble(
            self.params,
            self.init,
            float(self.times[k]),
            self.betas.chart[k],
            (self.betas.beta_z[k], self.betas.beta_plus[k], self.betas.beta_minus[k]),
            (self.betas.x[k], self.betas.y[k]),
            self.eps.values[k],
            self.gammas.values[k],
        )

    def branch_states(self):
        return [self.branch_state(k) for k in range(len(self.times))]


def solve_hierarchy(
    params: ModelParams,
    init: InitialState,
    grid,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
) -> Hierarchy:
    """Coupled integration of beta, eps and gamma on one adaptive step sequence."""
    fe = _eps_rhs(params)
    fg = _gamma_rhs(params, init)

    def extra(t, om, phi1, phi2, phi3, u):
        out = np.empty(12, dtype=complex)
        fe(t, om, phi2, u, out[:6])
        fg(t, om, phi1, phi3, u[0], u[1], u[4], u[6:], out[6:])
        return out

    prop = propagate_atom(drive(params, init), grid, extra, 12, abs_tol, rel_tol)
    betas = _as_coefficients(prop)
    segs = prop.segments
    eps = EpsilonCoefficients(prop.times, prop.extra[:, :6], _SegmentSlice(segs, 3, 9))
    gammas = GammaCoefficients(prop.times, prop.extra[:, 6:], _SegmentSlice(segs, 9, 15))
    return Hierarchy(params, init, betas, eps, gammas)


# --- branch state -----------------------------------------------------------------

def coherent_overlap(labels_minus, labels_plus) -> complex:
    """<G1-, G2- | G1+, G2+> for coherent pairs."""
    out = 1.0 + 0j
    for m, p in zip(labels_minus, labels_plus):
        m, p = complex(m), complex(p)
        out *= cmath.exp(-0.5 * (abs(m) ** 2 + abs(p) ** 2 - 2 * m.conjugate() * p))
    return out


@dataclass(frozen=True)
class BranchState:
    """F0 [c_e F1 (e-pair) x |Gamma+> + c_g F2 (g-pair) x |Gamma->].

    The atomic pairs carry the lab-frame phases exp(-+i omega0 t / 2). In the
    product chart they are (1 + b+ b-, b-) and (b+, 1) with exp(+-bz) inside
    F1, F2; in the amplitude chart exp(bz) is folded into the pairs, which are
    then the columns (x, y) and (-conj y, conj x) of the atom propagator.
    """

    t: float
    f0: complex
    f1: complex
    f2: complex
    c_e: complex
    c_g: complex
    excited_pair: np.ndarray
    ground_pair: np.ndarray
    gamma_plus_labels: tuple
    gamma_minus_labels: tuple
    # inputs of the closed-form photon numbers
    alphas: tuple
    eps12: tuple
    gamma12: tuple

    @property
    def plus_amplitudes(self) -> np.ndarray:
        return self.f0 * self.c_e * self.f1 * self.excited_pair

    @property
    def minus_amplitudes(self) -> np.ndarray:
        return self.f0 * self.c_g * self.f2 * self.ground_pair

    def overlap(self) -> complex:
        return coherent_overlap(self.gamma_minus_labels, self.gamma_plus_labels)

    def norm(self) -> float:
        """Squared norm including the branch cross term."""
        A, B = self.plus_amplitudes, self.minus_amplitudes
        cross = np.vdot(B, A) * self.overlap()
        return float(np.vdot(A, A).real + np.vdot(B, B).real + 2 * cross.real)

    def atom_density(self) -> AtomDensity:
        """Reduced atomic state, normalized by the branch-state norm."""
        A, B = self.plus_amplitudes, self.minus_amplitudes
        ov = self.overlap()
        rho = np.outer(A, A.conj()) + np.outer(B, B.conj()) + ov * np.outer(A, B.conj())
        rho = rho + ov.conjugate() * np.outer(B, A.conj())
        rho = 0.5 * (rho + rho.conj().T)
        return AtomDensity(rho / np.trace(rho).real)

    def coherence(self, omega0: float) -> complex:
        """<sigma_-> in the frame rotating at omega0."""
        A, B = self.plus_amplitudes, self.minus_amplitudes
        ov = self.overlap()
        s = (
            A[1].conjugate() * A[0]
            + B[1].conjugate() * B[0]
            + B[1].conjugate() * A[0] * ov
            + A[1].conjugate() * B[0] * ov.conjugate()
        )
        return complex(s * cmath.exp(1j * omega0 * self.t))


def _assemble(params, init, t, chart, beta, columns, e, c) -> BranchState:
    e1, e2, e5, e6 = e[0], e[1], e[4], e[5]
    c1, c2, c5, c6 = c[0], c[1], c[4], c[5]
    a1, a2 = init.alpha1, init.alpha2
    ph_e = cmath.exp(-0.5j * params.omega0 * t)
    ph_g = cmath.exp(0.5j * params.omega0 * t)
    if chart == BETA_CHART:
        bz, bp, bm = beta
        excited = np.array([(1 + bp * bm) * ph_e, bm * ph_g])
        ground = np.array([bp * ph_e, ph_g])
        z = bz
    else:
        x, y = columns
        excited = np.array([x * ph_e, y * ph_g])
        ground = np.array([-y.conjugate() * ph_e, x.conjugate() * ph_g])
        z = 0.0
    f0 = cmath.exp(
        0.5 * (abs(e1) ** 2 + abs(e2) ** 2 + abs(c1) ** 2 + abs(c2) ** 2)
        + e6
        + c6
        + 1j * (c1 * a1.conjugate() + c2 * a2.conjugate()).imag
    )
    expo = z + e5 + c5 + 1j * (e1 * (a1 + c1).conjugate() + e2 * (a2 + c2).conjugate()).imag
    f1 = cmath.exp(expo)
    f2 = cmath.exp(-expo)
    r1 = cmath.exp(-1j * params.omega1 * t)
    r2 = cmath.exp(-1j * params.omega2 * t)
    plus = (r1 * (a1 + c1 + e1), r2 * (a2 + c2 + e2))
    minus = (r1 * (a1 + c1 - e1), r2 * (a2 + c2 - e2))
    return BranchState(
        t, f0, f1, f2, init.c_e, init.c_g, excited, ground, plus, minus,
        (a1, a2), (complex(e1), complex(e2)), (complex(c1), complex(c2)),
    )


def branch_state(
    params: ModelParams,
    init: InitialState,
    betas: BetaCoefficients,
    eps: EpsilonCoefficients,
    gammas: GammaCoefficients,
    t: float,
) -> BranchState:
    chart, u = betas.state_at(t)
    if chart == BETA_CHART:
        beta, cols = tuple(u[:3]), (None, None)
    else:
        beta, cols = (None, None, None), (u[0], u[1])
    return _assemble(params, init, t, chart, beta, cols, eps.at(t), gammas.at(t))


# --- observables ------------------------------------------------------------------

def photon_number(state: BranchState, mode: int) -> float:
    """Closed-form <n_mode>; the branch cross term is neglected."""
    if mode not in (1, 2):
        raise ValidationError(f"mode must be 1 or 2, got {mode!r}", key="mode")
    i = mode - 1
    a, e, c = state.alphas[i], state.eps12[i], state.gamma12[i]
    bias = abs(state.c_e) ** 2 - abs(state.c_g) ** 2
    return float(
        abs(a) ** 2 + abs(e) ** 2 + abs(c) ** 2
        + 2 * ((a.conjugate() * c).real + bias * (e.conjugate() * (a + c)).real)
    )


def inversion(state: BranchState) -> float:
    """<sigma_z> of the branch state, cross term through the coherent overlap included."""
    A, B = state.plus_amplitudes, state.minus_amplitudes
    cross = (B[0].conjugate() * A[0] - B[1].conjugate() * A[1]) * state.overlap()
    return float(
        abs(A[0]) ** 2 - abs(A[1]) ** 2 + abs(B[0]) ** 2 - abs(B[1]) ** 2 + 2 * cross.real
    )


def total_excitation(state: BranchState) -> float:
    return photon_number(state, 1) + photon_number(state, 2) + 0.5 * (inversion(state) + 1)


def embed_in_fock(state: BranchState, n1max: int, n2max: int) -> FockState:
    """Both branches expanded on a truncated Fock basis.

    Raises TruncationError when a branch label needs a larger cutoff.
    """
    space = FockSpace(n1max, n2max)
    vecs, tail = [], 0.0
    for labels in (state.gamma_plus_labels, state.gamma_minus_labels):
        c1, t1 = coherent_state(labels[0], n1max, return_tail=True)
        c2, t2 = coherent_state(labels[1], n2max, return_tail=True)
        vecs.append(np.kron(c1, c2))
        tail = max(tail, t1 + t2)
    amps = np.kron(state.plus_amplitudes, vecs[0]) + np.kron(state.minus_amplitudes, vecs[1])
    return FockState(space, amps, state.t, tail_mass=tail)
