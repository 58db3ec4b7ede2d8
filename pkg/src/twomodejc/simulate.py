"""Build observable trajectories for any solver tier, optionally against the exact reference."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import exact, fluctuation, magnus, semiclassical
from .errors import ValidationError
from .model import InitialState, ModelParams, Trajectory

METHODS = ("magnus", "semiclassical", "fluctuation", "exact")
FIDELITY_KINDS = ("state", "atom")
EXACT_SOLVERS = ("rk", "sectors")


@dataclass(frozen=True)
class RunSpec:
    params: ModelParams
    init: InitialState
    t_end: float
    samples: int
    method: str
    reference: Optional[str] = None
    fidelity: str = "state"
    n1max: Optional[int] = None
    n2max: Optional[int] = None
    coefficient_tol: float = 1e-10
    fock_tol: float = exact.FOCK_TOL
    exact_solver: str = "rk"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; choose from {METHODS}", key="run.method")
        if self.reference not in (None, "exact"):
            raise ValidationError("only 'exact' can serve as reference", key="run.reference")
        if self.reference == "exact" and self.method == "exact":
            raise ValidationError("the exact method cannot be compared with itself", key="run.reference")
        if self.fidelity not in FIDELITY_KINDS:
            raise ValidationError(f"choose from {FIDELITY_KINDS}", key="run.fidelity")
        if self.reference and self.fidelity == "state" and self.method == "magnus":
            raise ValidationError("magnus has no field state; use run.fidelity = 'atom'", key="run.fidelity")
        if self.exact_solver not in EXACT_SOLVERS:
            raise ValidationError(f"choose from {EXACT_SOLVERS}", key="run.exact_solver")
        if not self.t_end > 0:
            raise ValidationError("must be > 0", key="run.t_end")
        if int(self.samples) != self.samples or self.samples < 2:
            raise ValidationError("need at least 2 samples", key="run.samples")
        if self.method in ("magnus", "semiclassical") and not self.init.is_excited:
            raise ValidationError(f"{self.method} needs the atom to start in |e>", key="init.c_g")
        for key in ("coefficient_tol", "fock_tol"):
            if not getattr(self, key) > 0:
                raise ValidationError("must be > 0", key=f"tol.{key.split('_')[0]}")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, int(self.samples))

    @property
    def space(self) -> exact.FockSpace:
        n1 = self.n1max if self.n1max is not None else exact.default_nmax(self.init.alpha1)
        n2 = self.n2max if self.n2max is not None else exact.default_nmax(self.init.alpha2)
        return exact.FockSpace(n1, n2)


def _field_only(init, n):
    n1 = np.full(n, abs(init.alpha1) ** 2)
    n2 = np.full(n, abs(init.alpha2) ** 2)
    return n1, n2


class _Result:
    """Observables plus whatever is needed to compare against the reference."""

    def __init__(self, W, s, n1, n2, N, states=None, atoms=None):
        self.W, self.s, self.n1, self.n2, self.N = W, s, n1, n2, N
        self.states = states  # callable k -> FockState (lazy)
        self.atoms = atoms  # callable k -> AtomDensity


def _atom_from_bloch(W, s):
    # rho = [[(1+W)/2, conj(s)], [s, (1-W)/2]] in the (e, g) basis, s = <sigma_->
    return exact.AtomDensity(np.array([[(1 + W) / 2, np.conj(s)], [s, (1 - W) / 2]]))


def _run_magnus(job: RunSpec, grid):
    W, sr, si = magnus.bloch_evolve(job.params, job.init, grid)
    s = sr + 1j * si
    n1, n2 = _field_only(job.init, len(grid))
    N = n1 + n2 + 0.5 * (W + 1)
    return _Result(W, s, n1, n2, N, atoms=lambda k: _atom_from_bloch(W[k], s[k]))


def _run_semiclassical(job: RunSpec, grid):
    tol = job.coefficient_tol
    betas = semiclassical.solve_betas(job.params, job.init, grid, tol, tol)
    W, s = semiclassical.sc_observables(betas)
    n1, n2 = _field_only(job.init, len(grid))
    N = n1 + n2 + 0.5 * (W + 1)
    space = job.space

    def state(k):
        t = float(grid[k])
        (a_e, a_g), (l1, l2) = semiclassical.sc_state(betas, job.params, job.init, t)
        f = np.kron(exact.coherent_state(l1, space.n1max), exact.coherent_state(l2, space.n2max))
        return exact.FockState(space, np.kron(np.array([a_e, a_g]), f), t)

    def atom(k):
        return exact.AtomDensity.pure(betas.x[k], betas.y[k])

    return _Result(W, s, n1, n2, N, states=state, atoms=atom)


def _run_fluctuation(job: RunSpec, grid):
    tol = job.coefficient_tol
    h = fluctuation.solve_hierarchy(job.params, job.init, grid, tol, tol)
    branches = h.branch_states()
    W = np.array([fluctuation.inversion(b) for b in branches])
    s = np.array([b.coherence(job.params.omega0) for b in branches])
    n1 = np.array([fluctuation.photon_number(b, 1) for b in branches])
    n2 = np.array([fluctuation.photon_number(b, 2) for b in branches])
    N = n1 + n2 + 0.5 * (W + 1)
    space = job.space
    return _Result(
        W, s, n1, n2, N,
        states=lambda k: fluctuation.embed_in_fock(branches[k], space.n1max, space.n2max),
        atoms=lambda k: branches[k].atom_density(),
    )


def exact_propagation(job: RunSpec, grid=None) -> exact.Propagation:
    grid = job.grid if grid is None else grid
    space = job.space
    psi0 = exact.product_state(space, job.init)
    if job.exact_solver == "sectors":
        return exact.evolve_sectors(job.params, psi0, grid)
    H = exact.build_hamiltonian(job.params, space)
    return exact.evolve(H, psi0, grid, job.fock_tol, job.fock_tol)


def _run_exact(job: RunSpec, grid, prop=None):
    prop = prop if prop is not None else exact_propagation(job, grid)
    W, s, n1, n2, N = exact.trajectory_observables(prop, job.params.omega0)
    return _Result(
        W, s, n1, n2, N,
        states=prop.state,
        atoms=lambda k: exact.reduced_atom(prop.state(k)),
    ), prop


def run(job: RunSpec) -> Trajectory:
    grid = job.grid
    meta = {"method": job.method, "reference": job.reference}
    if job.method == "exact":
        res, prop = _run_exact(job, grid)
        meta["norm_drift"] = prop.norm_drift
        return Trajectory(grid, res.W, res.s, res.n1, res.n2, res.N, meta=meta)

    res = {"magnus": _run_magnus, "semiclassical": _run_semiclassical, "fluctuation": _run_fluctuation}[
        job.method
    ](job, grid)
    fid = ent = None
    if job.reference == "exact":
        ref, prop = _run_exact(job, grid)
        meta["norm_drift"] = prop.norm_drift
        fid = np.empty(len(grid))
        ent = np.empty(len(grid))
        for k in range(len(grid)):
            rho_ref = ref.atoms(k)
            ent[k] = exact.linear_entropy(rho_ref)
            if job.fidelity == "state":
                fid[k] = exact.pure_fidelity(res.states(k), ref.states(k))
            else:
                fid[k] = exact.fidelity(res.atoms(k), rho_ref)
    return Trajectory(grid, res.W, res.s, res.n1, res.n2, res.N, fid, ent, meta=meta)


def with_overrides(job: RunSpec, **changes) -> RunSpec:
    return replace(job, **changes)
