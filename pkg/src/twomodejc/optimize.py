"""Search for the near-resonant coupling g2 that gives W(T) = 0.

A uniform grid over the bracket is evaluated concurrently, the sign change
closest to the seed is kept and bisection then drives |W(T)| down.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import magnus
from .errors import NoSignChange, ValidationError
from .exact import FockSpace, SectorPropagator, default_nmax, product_state
from .model import InitialState, ModelParams

BACKENDS = ("semiclassical", "exact", "fluctuation", "magnus")
DEFAULT_POINTS = 64
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class SearchConfig:
    g2_min: float
    g2_max: float
    target_time: float
    backend: str = "semiclassical"
    points: int = DEFAULT_POINTS
    seed: Optional[float] = None
    residual_tol: float = 1e-4
    nmax: Optional[int] = None  # exact backend; default from the coherent amplitudes
    threads: Optional[int] = None
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10

    def __post_init__(self):
        if not (0 <= self.g2_min < self.g2_max):
            raise ValidationError(
                f"need 0 <= g2_min < g2_max, got [{self.g2_min}, {self.g2_max}]", key="optimize.g2_min"
            )
        if int(self.points) != self.points or self.points < 2:
            raise ValidationError("need at least 2 grid points", key="optimize.points")
        if not self.target_time > 0:
            raise ValidationError("must be > 0", key="optimize.target_time")
        if self.backend not in BACKENDS:
            raise ValidationError(f"unknown backend {self.backend!r}; choose from {BACKENDS}", key="optimize.backend")
        if not self.residual_tol > 0:
            raise ValidationError("must be > 0", key="optimize.residual_tol")


@dataclass
class SearchResult:
    g2_star: float
    residual: float
    evaluations: int
    bracket: tuple
    backend: str
    grid: np.ndarray = field(repr=False)
    grid_W: np.ndarray = field(repr=False)
    refinement: list = field(default_factory=list, repr=False)  # successive brackets

    def __iter__(self):
        # allows g2, residual, n = grid_search_g2(...)
        return iter((self.g2_star, self.residual, self.evaluations))


def seed_from_magnus(delta2: float, alpha2: float):
    g = magnus.optimal_g2(delta2, alpha2, 0)
    return 0.5 * g, 2.0 * g


def inversion_at(backend: str, params: ModelParams, init: InitialState, T: float, config=None) -> Callable[[float], float]:
    """Return g2 -> W(T) for one backend."""
    abs_tol = config.abs_tol if config else 1e-10
    rel_tol = config.rel_tol if config else 1e-10
    grid = np.array([0.0, T])

    if backend == "magnus":
        def w(g2):
            W, _, _ = magnus.bloch_evolve(params.replace(g2=g2), init, T)
            return float(W)
    elif backend == "semiclassical":
        from .semiclassical import sc_observables, solve_betas

        if not init.is_excited:
            raise ValidationError("the semiclassical backend needs the atom in |e>", key="init.c_g")

        def w(g2):
            W, _ = sc_observables(solve_betas(params.replace(g2=g2), init, grid, abs_tol, rel_tol))
            return float(W[-1])
    elif backend == "fluctuation":
        from .fluctuation import inversion, solve_hierarchy

        def w(g2):
            h = solve_hierarchy(params.replace(g2=g2), init, grid, abs_tol, rel_tol)
            return inversion(h.branch_state(1))
    elif backend == "exact":
        n = config.nmax if config and config.nmax is not None else None
        n1 = n if n is not None else default_nmax(init.alpha1)
        n2 = n if n is not None else default_nmax(init.alpha2)
        space = FockSpace(n1, n2)
        psi0 = product_state(space, init)

        def w(g2):
            psi = SectorPropagator.build(params.replace(g2=g2), space).apply(psi0, T).reshape(space.shape)
            prob = np.abs(psi) ** 2
            return float(prob[0].sum() - prob[1].sum())
    else:
        raise ValidationError(f"unknown backend {backend!r}", key="optimize.backend")
    return w


def _sign_changes(W):
    idx = []
    for k in range(len(W) - 1):
        if W[k] == 0 or W[k] * W[k + 1] < 0:
            idx.append(k)
    if W[-1] == 0:
        idx.append(len(W) - 1)
    return idx


def grid_search_g2(config: SearchConfig, params: ModelParams, init: InitialState) -> SearchResult:
    w = inversion_at(config.backend, params, init, config.target_time, config)
    grid = np.linspace(config.g2_min, config.g2_max, int(config.points))
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        W = np.array(list(pool.map(w, grid)))
    evaluations = len(grid)

    changes = _sign_changes(W)
    if not changes:
        raise NoSignChange(config.g2_min, config.g2_max, float(W.min()), float(W.max()), grid, W)
    seed = config.seed
    if seed is None:
        try:
            seed = magnus.optimal_g2(params.delta2, abs(init.alpha2), 0)
        except ValidationError:
            seed = 0.5 * (config.g2_min + config.g2_max)
    k = min(changes, key=lambda j: (abs(0.5 * (grid[j] + grid[min(j + 1, len(grid) - 1)]) - seed), j))

    floor = float(np.min(np.abs(W)))
    target = min(config.residual_tol, floor)
    lo, hi = grid[k], grid[min(k + 1, len(grid) - 1)]
    w_lo, w_hi = W[k], W[min(k + 1, len(grid) - 1)]
    best = (abs(w_lo), lo, w_lo) if abs(w_lo) <= abs(w_hi) else (abs(w_hi), hi, w_hi)
    history = [(lo, hi)]
    if best[0] > target:
        for _ in range(MAX_BISECTIONS):
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            w_mid = w(mid)
            evaluations += 1
            if abs(w_mid) < best[0]:
                best = (abs(w_mid), mid, w_mid)
            if abs(w_mid) <= target:
                break
            if (w_mid < 0) == (w_lo < 0):
                lo, w_lo = mid, w_mid
            else:
                hi, w_hi = mid, w_mid
            history.append((lo, hi))
    return SearchResult(
        g2_star=float(best[1]),
        residual=float(best[0]),
        evaluations=evaluations,
        bracket=(config.g2_min, config.g2_max),
        backend=config.backend,
        grid=grid,
        grid_W=W,
        refinement=history,
    )


def magnus_optimum(params: ModelParams, init: InitialState) -> float:
    """Closed-form optimum used by the analytic backend of the CLI."""
    return magnus.optimal_g2(params.delta2, abs(init.alpha2), 0)


def default_config(params: ModelParams, init: InitialState, backend: str, **overrides) -> SearchConfig:
    lo, hi = seed_from_magnus(params.delta2, abs(init.alpha2))
    kw = dict(
        g2_min=lo,
        g2_max=hi,
        target_time=magnus.coherence_time(params.delta2),
        backend=backend,
    )
    kw.update(overrides)
    return SearchConfig(**kw)


__all__ = [
    "BACKENDS",
    "SearchConfig",
    "SearchResult",
    "default_config",
    "grid_search_g2",
    "inversion_at",
    "magnus_optimum",
    "seed_from_magnus",
]
