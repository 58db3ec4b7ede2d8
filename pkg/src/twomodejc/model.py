"""Physical parameters, initial states and the resonant closed form.

Frequencies are in units of the near-resonant mode frequency (omega2 = 1 in
all shipped configurations). Detunings follow delta_i = omega0 - omega_i and
keep their sign.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError

NORM_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    omega0: float
    omega1: float
    omega2: float
    g1: float
    g2: float

    def __post_init__(self):
        for name in ("omega0", "omega1", "omega2", "g1", "g2"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValidationError("must be finite", key=name)
            object.__setattr__(self, name, float(value))
        if self.g1 < 0:
            raise ValidationError("coupling must be >= 0", key="g1")
        if self.g2 < 0:
            raise ValidationError("coupling must be >= 0", key="g2")

    @property
    def delta1(self) -> float:
        return self.omega0 - self.omega1

    @property
    def delta2(self) -> float:
        return self.omega0 - self.omega2

    @property
    def couplings(self) -> np.ndarray:
        return np.array([self.g1, self.g2])

    @property
    def detunings(self) -> np.ndarray:
        return np.array([self.delta1, self.delta2])

    @property
    def mode_frequencies(self) -> np.ndarray:
        return np.array([self.omega1, self.omega2])

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class InitialState:
    """(c_e|e> + c_g|g>) x |alpha1, alpha2>."""

    c_e: complex = 1.0
    c_g: complex = 0.0
    alpha1: complex = 0.0
    alpha2: complex = 0.0

    def __post_init__(self):
        for name in ("c_e", "c_g", "alpha1", "alpha2"):
            value = complex(getattr(self, name))
            if not np.isfinite(value):
                raise ValidationError("must be finite", key=name)
            object.__setattr__(self, name, value)
        norm = abs(self.c_e) ** 2 + abs(self.c_g) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"|c_e|^2 + |c_g|^2 = {norm!r}, expected 1", key="c_e")

    @classmethod
    def excited(cls, alpha1, alpha2) -> "InitialState":
        return cls(1.0, 0.0, alpha1, alpha2)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2])

    @property
    def is_excited(self) -> bool:
        return self.c_g == 0 and abs(self.c_e - 1.0) <= NORM_TOL


@dataclass
class Trajectory:
    """Observables sampled on a time grid.

    ``s`` is the atomic coherence <sigma_-> in the frame rotating at omega0,
    so it is directly comparable between methods.
    """

    times: np.ndarray
    W: np.ndarray
    s: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    N_total: np.ndarray
    fidelity: Optional[np.ndarray] = None
    S_lin: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ValidationError("times must be strictly increasing", key="times")
        n = len(self.times)
        for name in ("W", "s", "n1", "n2", "N_total", "fidelity", "S_lin"):
            col = getattr(self, name)
            if col is not None and len(col) != n:
                raise ValidationError(f"length {len(col)} != {n}", key=name)

    def columns(self) -> dict:
        cols = {
            "t": self.times,
            "W": np.real(self.W),
            "s_re": np.real(self.s),
            "s_im": np.imag(self.s),
            "n1": np.real(self.n1),
            "n2": np.real(self.n2),
            "N_total": np.real(self.N_total),
        }
        if self.fidelity is not None:
            cols["fidelity"] = np.asarray(self.fidelity, dtype=float)
            cols["S_lin"] = (
                np.asarray(self.S_lin, dtype=float)
                if self.S_lin is not None
                else np.full(len(self.times), np.nan)
            )
        return cols


def rabi_amplitude(params: ModelParams, init: InitialState, t):
    """Semiclassical drive sum_i g_i alpha_i exp(i delta_i t); accepts arrays."""
    t = np.asarray(t, dtype=float)
    return (
        params.g1 * init.alpha1 * np.exp(1j * params.delta1 * t)
        + params.g2 * init.alpha2 * np.exp(1j * params.delta2 * t)
    )


def resonant_solution(params: ModelParams, init: InitialState, t):
    """Closed-form (s, W) when every driven mode is resonant and the atom starts in |e>.

    W = cos(2|Omega_r| t). The coherence is s = (i/2) exp(i arg Omega_r)
    sin(2|Omega_r| t); for real positive Omega_r its magnitude is the familiar
    sin(2 Omega_r t)/2 and it is purely imaginary.
    """
    driven = params.couplings * init.alphas != 0
    if np.any(params.detunings[driven] != 0):
        raise ValidationError(
            f"resonant solution needs zero detuning on every driven mode, got "
            f"({params.delta1!r}, {params.delta2!r})",
            key="omega0",
        )
    if not init.is_excited:
        raise ValidationError("resonant solution needs the atom in |e> (c_g = 0)", key="c_g")
    t = np.asarray(t, dtype=float)
    omega_r = params.g1 * init.alpha1 + params.g2 * init.alpha2
    mag = abs(omega_r)
    phase = omega_r / mag if mag > 0 else 1.0
    s = 0.5j * phase * np.sin(2 * mag * t)
    W = np.cos(2 * mag * t)
    return s, W
