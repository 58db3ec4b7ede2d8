"""First-order Magnus solution of the semiclassical Bloch equations.

The Bloch vector y = (W, Re s, Im s) obeys y' = A(t) y with

    A = [[0, 4V, -4U], [-V, 0, 0], [U, 0, 0]],   Omega_sc = U + iV.

Integrating A once gives the generator M built from a = int V and b = int U.
M has eigenvalues 0 and +-2i*omega with omega = sqrt(a^2 + b^2), so exp(M)
rotates by the angle 2*omega. That doubled angle is what makes the designed
zero W(T) = 0 land at g2 = pi|delta2|/(8 alpha2).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import InitialState, ModelParams

SERIES_CUTOFF = 1e-6


class MagnusValidityWarning(UserWarning):
    """Some |g_i alpha_i / delta_i| exceeds 1, outside the first-order regime."""


@dataclass(frozen=True)
class MagnusFrame:
    a: float
    b: float
    omega: float

    def __post_init__(self):
        if self.omega < 0:
            raise ValidationError("omega must be >= 0", key="omega")

    @classmethod
    def from_ab(cls, a: float, b: float) -> "MagnusFrame":
        a, b = float(a), float(b)
        return cls(a, b, float(np.hypot(a, b)))

    @property
    def angle(self) -> float:
        """Rotation angle of exp(M); twice omega."""
        return 2.0 * self.omega


def _drive_terms(params: ModelParams, init: InitialState):
    amps = params.couplings * init.alphas
    deltas = params.detunings
    for i in range(2):
        if amps[i] != 0 and deltas[i] == 0:
            raise ValidationError(
                f"mode {i + 1} is resonant (delta{i + 1} = 0) with nonzero drive; "
                "the integrals divide by the detuning, use model.resonant_solution instead",
                key=f"omega{i + 1}",
            )
    ratios = np.divide(np.abs(amps), np.abs(deltas), out=np.zeros(2), where=amps != 0)
    if np.any(ratios > 1):
        warnings.warn(
            f"|g_i alpha_i / delta_i| = {ratios.max():.3g} > 1: first-order Magnus "
            "is outside its validity regime",
            MagnusValidityWarning,
            stacklevel=3,
        )
    return amps, deltas


def _ab(params, init, t):
    amps, deltas = _drive_terms(params, init)
    t = np.asarray(t, dtype=float)
    # b + i a = int_0^t Omega_sc = sum_i g_i alpha_i (e^{i d t} - 1) / (i d)
    total = np.zeros(t.shape, dtype=complex)
    for amp, d in zip(amps, deltas):
        if amp != 0:
            total = total + amp * np.expm1(1j * d * t) / (1j * d)
    return total.imag, total.real


def ab_integrals(params: ModelParams, init: InitialState, t: float) -> MagnusFrame:
    a, b = _ab(params, init, float(t))
    return MagnusFrame.from_ab(a, b)


def effective_angle_squared(params: ModelParams, init: InitialState, t):
    """omega(t)^2 written as single-mode terms plus the beat-frequency cross term.

    4 c_i^2 sin^2(d_i t / 2) per mode and, for real labels,
    2 c_1 c_2 (1 - cos d_1 t - cos d_2 t + cos (d_1 - d_2) t), c_i = g_i alpha_i / d_i.
    """
    amps, deltas = _drive_terms(params, init)
    t = np.asarray(t, dtype=float)
    c = np.divide(amps, deltas, out=np.zeros(2, dtype=complex), where=amps != 0)
    # 4 sin^2(x/2) = |e^{ix} - 1|^2 and the beat term factors as
    # 1 - e^{i d1 t} - e^{-i d2 t} + e^{i(d1 - d2)t} = (e^{i d1 t} - 1)(e^{-i d2 t} - 1);
    # expm1 keeps both accurate when d t is small
    u = [np.expm1(1j * d * t) for d in deltas]
    out = np.zeros(t.shape)
    for i in range(2):
        out = out + abs(c[i]) ** 2 * np.abs(u[i]) ** 2
    if c[0] != 0 and c[1] != 0:
        out = out + 2 * np.real(c[0] * np.conj(c[1]) * u[0] * np.conj(u[1]))
    return out


def generator_matrix(frame: MagnusFrame) -> np.ndarray:
    a, b = frame.a, frame.b
    return np.array([[0.0, 4 * a, -4 * b], [-a, 0.0, 0.0], [b, 0.0, 0.0]])


def _rotation_coefficients(theta):
    """sin(theta)/theta and (1 - cos theta)/theta^2 with a series branch near 0."""
    theta = np.asarray(theta, dtype=float)
    small = theta < SERIES_CUTOFF
    th = np.where(small, 1.0, theta)
    sinc = np.where(small, 1 - theta ** 2 / 6, np.sin(th) / th)
    vers = np.where(small, 0.5 - theta ** 2 / 24, (1 - np.cos(th)) / th ** 2)
    return sinc, vers


def exp_generator(frame: MagnusFrame) -> np.ndarray:
    """exp(M) = I + sinc(theta) M + vers(theta) M^2 with theta = 2 omega."""
    M = generator_matrix(frame)
    sinc, vers = _rotation_coefficients(frame.angle)
    return np.eye(3) + float(sinc) * M + float(vers) * (M @ M)


def bloch_evolve(params: ModelParams, init: InitialState, t):
    """(W, Re s, Im s) from the first column of exp(M); vectorized over ``t``.

    The atom starts in |e>, i.e. y(0) = (1, 0, 0).
    """
    a, b = _ab(params, init, t)
    theta = 2 * np.hypot(a, b)
    sinc, _ = _rotation_coefficients(theta)
    return np.cos(theta), -a * sinc, b * sinc


def optimal_g2(delta2: float, alpha2: float, n: int = 0) -> float:
    """Coupling that puts W(T) = 0 at T = pi/|delta2| for the single near-resonant mode."""
    if not alpha2 > 0:
        raise ValidationError(f"need alpha2 > 0, got {alpha2!r}", key="alpha2")
    if delta2 == 0:
        raise ValidationError("need a nonzero detuning", key="delta2")
    if int(n) != n or n < 0:
        raise ValidationError(f"need a non-negative integer, got {n!r}", key="n")
    return (2 * int(n) + 1) * np.pi * abs(delta2) / (8 * alpha2)


def coherence_time(delta2: float) -> float:
    if delta2 == 0:
        raise ValidationError("zero detuning has no coherence time", key="delta2")
    return np.pi / abs(delta2)
