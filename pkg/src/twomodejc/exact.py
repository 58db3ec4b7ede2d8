"""Reference dynamics on a truncated two-mode Fock space.

Basis ordering: flat index = level * (N1 * N2) + n1 * N2 + n2 with level 0 = |e>,
level 1 = |g> and N_i = n_i_max + 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import TruncationError, ValidationError
from .model import InitialState, ModelParams
from .odesolve import OdeProblem, integrate

TAIL_LIMIT = 1e-10
NORM_DRIFT_LIMIT = 1e-6
PSD_TOL = 1e-10
DET_FLOOR = 8 * np.finfo(float).eps  # determinants below this are rounding noise
# 1e-8 lets the norm drift by ~1e-6 over ten coherence times; 1e-10 keeps it near 1e-9
FOCK_TOL = 1e-10


class NormDriftWarning(UserWarning):
    pass


def default_nmax(alpha) -> int:
    """ceil(|a|^2 + 6|a| + 10), raised if needed so the Poisson tail stays below TAIL_LIMIT."""
    a = abs(complex(alpha))
    return max(int(math.ceil(a * a + 6 * a + 10)), required_nmax(alpha))


def required_nmax(alpha, tail: float = TAIL_LIMIT) -> int:
    """Smallest cutoff whose Poisson tail beyond it is below ``tail``."""
    mean = abs(complex(alpha)) ** 2
    if mean == 0:
        return 0
    n = int(mean)
    while poisson.sf(n, mean) >= tail:
        n += max(1, int(math.sqrt(mean)) // 4)
    while n > 0 and poisson.sf(n - 1, mean) < tail:
        n -= 1
    return n


def coherent_state(alpha, nmax: int, return_tail: bool = False):
    """Truncated, renormalized amplitudes exp(-|a|^2/2) a^n / sqrt(n!)."""
    alpha = complex(alpha)
    if nmax < 0:
        raise ValidationError("nmax must be >= 0", key="nmax")
    mean = abs(alpha) ** 2
    tail = float(poisson.sf(nmax, mean)) if mean > 0 else 0.0
    if tail > TAIL_LIMIT:
        raise TruncationError(
            f"coherent state alpha={alpha:.6g} loses {tail:.2e} of its norm at nmax={nmax}",
            required_nmax(alpha),
        )
    n = np.arange(nmax + 1)
    if alpha == 0:
        c = (n == 0).astype(complex)
    else:
        logmag = -0.5 * mean + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
        c = np.exp(logmag + 1j * n * np.angle(alpha))
    c /= np.linalg.norm(c)
    return (c, tail) if return_tail else c


@dataclass(frozen=True)
class FockSpace:
    n1max: int
    n2max: int

    def __post_init__(self):
        for key in ("n1max", "n2max"):
            v = getattr(self, key)
            if int(v) != v or v < 0:
                raise ValidationError(f"must be a non-negative integer, got {v!r}", key=key)
            object.__setattr__(self, key, int(v))

    @property
    def shape(self):
        return (2, self.n1max + 1, self.n2max + 1)

    @property
    def dimension(self) -> int:
        return 2 * (self.n1max + 1) * (self.n2max + 1)

    def index(self, level: int, n1: int, n2: int) -> int:
        if level not in (0, 1) or not (0 <= n1 <= self.n1max and 0 <= n2 <= self.n2max):
            raise IndexError(f"({level}, {n1}, {n2}) outside {self}")
        return (level * (self.n1max + 1) + n1) * (self.n2max + 1) + n2

    def unpack(self, k: int):
        level, rest = divmod(k, (self.n1max + 1) * (self.n2max + 1))
        n1, n2 = divmod(rest, self.n2max + 1)
        return level, n1, n2

    @cached_property
    def excitation_numbers(self) -> np.ndarray:
        """Eigenvalue of N = n1 + n2 + (sz + 1)/2 for every basis vector."""
        lvl, n1, n2 = np.indices(self.shape)
        return (n1 + n2 + (lvl == 0)).reshape(-1)


@dataclass
class FockState:
    space: FockSpace
    amplitudes: np.ndarray
    t: float = 0.0
    tail_mass: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != self.space.dimension:
            raise ValidationError(
                f"{self.amplitudes.size} amplitudes for a space of dimension {self.space.dimension}",
                key="amplitudes",
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.space.shape)


def product_state(space: FockSpace, init: InitialState) -> FockState:
    field_part = np.kron(
        coherent_state(init.alpha1, space.n1max), coherent_state(init.alpha2, space.n2max)
    )
    return FockState(space, np.kron(np.array([init.c_e, init.c_g]), field_part))


def _ladder(nmax):
    return sp.diags(np.sqrt(np.arange(1, nmax + 1, dtype=float)), 1, format="csr")


def build_hamiltonian(params: ModelParams, space: FockSpace) -> sp.csr_matrix:
    I1, I2 = sp.identity(space.n1max + 1), sp.identity(space.n2max + 1)
    a1 = sp.kron(sp.kron(sp.identity(2), _ladder(space.n1max)), I2)
    a2 = sp.kron(sp.kron(sp.identity(2), I1), _ladder(space.n2max))
    lower = sp.kron(sp.kron(sp.csr_matrix(([1.0], ([1], [0])), shape=(2, 2)), I1), I2)
    diag = params.omega1 * (a1.T @ a1) + params.omega2 * (a2.T @ a2)
    diag = diag + 0.5 * params.omega0 * sp.kron(sp.kron(sp.diags([1.0, -1.0]), I1), I2)
    coupling = params.g1 * (a1.T @ lower) + params.g2 * (a2.T @ lower)
    H = diag + coupling + coupling.T
    H = sp.csr_matrix(H)
    H.eliminate_zeros()
    return H


@dataclass
class Propagation:
    space: FockSpace
    times: np.ndarray
    states: np.ndarray  # (len(times), dimension)
    norm_drift: float
    step_count: int = 0
    rejected_steps: int = 0

    def state(self, k: int) -> FockState:
        return FockState(self.space, self.states[k], float(self.times[k]))

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return (self.state(k) for k in range(len(self.times)))


def evolve(
    H,
    psi0: FockState,
    grid,
    abs_tol: float = FOCK_TOL,
    rel_tol: float = FOCK_TOL,
) -> Propagation:
    """Solve i psi' = H psi with the adaptive integrator.

    H is split into its diagonal D and the rest V; the integrator works with
    phi = exp(iDt) psi, which obeys phi' = -i exp(iDt) V exp(-iDt) phi. The
    free phases are then exact and only the slow exchange dynamics is
    integrated. States are returned in the lab frame.
    """
    grid = np.asarray(grid, dtype=float)
    n0 = psi0.norm()
    if abs(n0 - 1) > 1e-10:
        raise ValidationError(f"initial state has norm {n0!r}", key="psi0")
    H = sp.csr_matrix(H)
    D = H.diagonal().real.copy()
    V = sp.csr_matrix(H - sp.diags(D))
    V.eliminate_zeros()
    t0 = float(grid[0])

    def rhs(t, phi):
        ph = np.exp(1j * D * (t - t0))
        return -1j * (ph * (V @ (phi / ph)))

    if grid.size == 1:
        return Propagation(psi0.space, grid, psi0.amplitudes[None, :].copy(), 0.0)
    problem = OdeProblem(rhs, (t0, float(grid[-1])), psi0.space.dimension, abs_tol, rel_tol)
    sol = integrate(problem, psi0.amplitudes, grid)
    states = sol.states * np.exp(-1j * np.outer(grid - t0, D))
    drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1)))
    if drift > NORM_DRIFT_LIMIT:
        warnings.warn(f"norm drift {drift:.2e} exceeds {NORM_DRIFT_LIMIT:g}", NormDriftWarning, stacklevel=2)
    return Propagation(psi0.space, grid, states, drift, sol.step_count, sol.rejected_steps)


@dataclass(frozen=True)
class SectorPropagator:
    """Exact propagator through diagonalization of each excitation-number block."""

    space: FockSpace
    blocks: tuple = field(repr=False)  # (indices, eigenvalues, eigenvectors)

    @classmethod
    def build(cls, params: ModelParams, space: FockSpace) -> "SectorPropagator":
        H = build_hamiltonian(params, space).tocsr()
        N = space.excitation_numbers
        blocks = []
        for n in np.unique(N):
            idx = np.flatnonzero(N == n)
            block = H[idx][:, idx].toarray()
            E, U = np.linalg.eigh(block)
            blocks.append((idx, E, U))
        return cls(space, tuple(blocks))

    def apply(self, psi0: FockState, t: float) -> np.ndarray:
        out = np.zeros(self.space.dimension, dtype=complex)
        for idx, E, U in self.blocks:
            c = U.conj().T @ psi0.amplitudes[idx]
            out[idx] = U @ (np.exp(-1j * E * t) * c)
        return out


def evolve_sectors(params: ModelParams, psi0: FockState, grid) -> Propagation:
    grid = np.asarray(grid, dtype=float)
    prop = SectorPropagator.build(params, psi0.space)
    states = np.array([prop.apply(psi0, t - grid[0]) for t in grid])
    drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1)))
    return Propagation(psi0.space, grid, states, drift)


def observables(psi: FockState, omega0: float = 0.0):
    """(W, s, n1, n2, N_total); s = <sigma_-> rotated by exp(i omega0 t)."""
    P = psi.tensor()
    prob = np.abs(P) ** 2
    pe, pg = prob[0].sum(), prob[1].sum()
    n1 = float(prob.sum(axis=(0, 2)) @ np.arange(psi.space.n1max + 1))
    n2 = float(prob.sum(axis=(0, 1)) @ np.arange(psi.space.n2max + 1))
    W = float(pe - pg)
    s = complex(np.vdot(P[1], P[0])) * np.exp(1j * omega0 * psi.t)
    return W, s, n1, n2, n1 + n2 + pe


def trajectory_observables(prop: Propagation, omega0: float):
    """Vectorized observables over a whole propagation."""
    sp_ = prop.space
    P = prop.states.reshape((len(prop.times),) + sp_.shape)
    prob = np.abs(P) ** 2
    pe, pg = prob[:, 0].sum(axis=(1, 2)), prob[:, 1].sum(axis=(1, 2))
    n1 = prob.sum(axis=(1, 3)) @ np.arange(sp_.n1max + 1)
    n2 = prob.sum(axis=(1, 2)) @ np.arange(sp_.n2max + 1)
    s = np.einsum("kij,kij->k", P[:, 1].conj(), P[:, 0]) * np.exp(1j * omega0 * prop.times)
    return pe - pg, s, n1, n2, n1 + n2 + pe


@dataclass(frozen=True)
class AtomDensity:
    matrix: np.ndarray  # basis (|e>, |g>)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValidationError(f"expected a 2x2 matrix, got shape {m.shape}", key="rho")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValidationError("not Hermitian", key="rho")
        if abs(np.trace(m) - 1) > 1e-10:
            raise ValidationError(f"trace {np.trace(m).real!r} != 1", key="rho")
        if np.linalg.eigvalsh(m)[0] < -PSD_TOL:
            raise ValidationError("not positive semidefinite", key="rho")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def pure(cls, a_e, a_g) -> "AtomDensity":
        v = np.array([a_e, a_g], dtype=complex)
        v /= np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def reduced_atom(psi: FockState) -> AtomDensity:
    """Partial trace over both modes, normalized by the state norm."""
    A = psi.tensor().reshape(2, -1)
    rho = A @ A.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return AtomDensity(rho / np.trace(rho).real)


def fidelity(rho1: AtomDensity, rho2: AtomDensity) -> float:
    """(Tr sqrt(sqrt(r1) r2 sqrt(r1)))^2, closed form for qubits."""
    d1 = np.linalg.det(rho1.matrix).real
    d2 = np.linalg.det(rho2.matrix).real
    for d in (d1, d2):
        if d < -PSD_TOL:
            raise ValidationError(f"negative determinant {d:.3e}", key="rho")
    # a pure state's determinant comes out as +-1e-17 rather than 0, and the
    # square root would turn that into a 1e-9 error; snap roundoff-level values
    d1, d2 = (0.0 if d < DET_FLOOR else d for d in (d1, d2))
    overlap = np.real(np.trace(rho1.matrix @ rho2.matrix))
    F = overlap + 2 * math.sqrt(d1 * d2)
    return float(min(max(F, 0.0), 1.0))


def pure_fidelity(psi1: FockState, psi2: FockState) -> float:
    if psi1.space != psi2.space:
        raise ValidationError(f"{psi1.space} vs {psi2.space}", key="space")
    return float(abs(np.vdot(psi1.amplitudes, psi2.amplitudes)) ** 2)


def linear_entropy(rho: AtomDensity) -> float:
    return 1.0 - rho.purity
