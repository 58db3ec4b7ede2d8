import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm, sqrtm
from scipy.stats import poisson

from twomodejc import exact
from twomodejc.errors import TruncationError, ValidationError
from twomodejc.exact import (
    AtomDensity,
    FockSpace,
    FockState,
    SectorPropagator,
    build_hamiltonian,
    coherent_state,
    evolve,
    evolve_sectors,
    fidelity,
    linear_entropy,
    observables,
    product_state,
    pure_fidelity,
    reduced_atom,
    trajectory_observables,
)
from twomodejc.model import InitialState, ModelParams

from conftest import G2_OPT, T_COH


def _basis(space, level, n1, n2):
    v = np.zeros(space.dimension, dtype=complex)
    v[space.index(level, n1, n2)] = 1
    return FockState(space, v)


def _random_state(rng, space):
    v = rng.normal(size=space.dimension) + 1j * rng.normal(size=space.dimension)
    return FockState(space, v / np.linalg.norm(v))


def _random_density(rng):
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


def _uhlmann(r1, r2):
    s = sqrtm(r1)
    return float(np.real(np.trace(sqrtm(s @ r2 @ s))) ** 2)


def test_space_index_bijection():
    sp_ = FockSpace(3, 4)
    assert sp_.dimension == 2 * 4 * 5
    seen = {sp_.index(*sp_.unpack(k)) for k in range(sp_.dimension)}
    assert seen == set(range(sp_.dimension))
    with pytest.raises(ValidationError):
        FockSpace(-1, 2)


def test_free_hamiltonian_diagonal():
    p = ModelParams(0.98, 0.25, 1.0, 0.0, 0.0)
    sp_ = FockSpace(3, 2)
    H = build_hamiltonian(p, sp_).toarray()
    assert np.count_nonzero(H - np.diag(np.diag(H))) == 0
    for k in range(sp_.dimension):
        level, n1, n2 = sp_.unpack(k)
        sign = 1 if level == 0 else -1  # level 0 is |e>
        assert H[k, k] == pytest.approx(0.25 * n1 + 1.0 * n2 + sign * 0.49)


def test_hamiltonian_hermitian_and_sparse():
    H = build_hamiltonian(ModelParams(0.98, 0.25, 1.0, 0.01, 0.002), FockSpace(6, 7))
    assert abs(H - H.conj().T).max() == 0
    assert np.diff(H.tocsr().indptr).max() <= 5


def test_single_excitation_block():
    p = ModelParams(0.98, 0.25, 1.0, 0.01, 0.002)
    sp_ = FockSpace(1, 1)
    H = build_hamiltonian(p, sp_).toarray()
    idx = [sp_.index(0, 0, 0), sp_.index(1, 1, 0), sp_.index(1, 0, 1)]
    block = H[np.ix_(idx, idx)]
    ref = np.array([[0.49, 0.01, 0.002], [0.01, 0.25 - 0.49, 0], [0.002, 0, 1.0 - 0.49]])
    np.testing.assert_allclose(block, ref, atol=1e-15)


def test_coherent_state_basics():
    np.testing.assert_array_equal(coherent_state(0, 4), [1, 0, 0, 0, 0])
    c, tail = coherent_state(4.0, 48, return_tail=True)
    assert tail < 1e-10
    assert tail == pytest.approx(poisson.sf(48, 16.0), rel=1e-12)
    assert np.abs(c) ** 2 @ np.arange(49) == pytest.approx(16.0, abs=1e-8)
    with pytest.raises(TruncationError) as info:
        coherent_state(4.0, 30)
    assert info.value.required == exact.required_nmax(4.0)
    assert poisson.sf(info.value.required, 16) < 1e-10 <= poisson.sf(info.value.required - 1, 16)


@settings(max_examples=50, deadline=None)
@given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_coherent_overlap(a, b):
    ca, cb = coherent_state(a, 60), coherent_state(b, 60)
    ref = np.exp(-0.5 * abs(a) ** 2 - 0.5 * abs(b) ** 2 + a.conjugate() * b)
    assert abs(np.vdot(ca, cb) - ref) < 1e-9


def test_default_nmax_keeps_tail_small():
    for a in (0.5, 4, 8, 12, 3 + 4j):
        assert poisson.sf(exact.default_nmax(a), abs(a) ** 2) < 1e-10
    assert exact.default_nmax(4) == 50


def test_free_evolution_only_phases():
    p = ModelParams(0.98, 0.25, 1.0, 0.0, 0.0)
    sp_ = FockSpace(2, 2)
    psi0 = _basis(sp_, 0, 0, 0)
    grid = np.linspace(0, 30, 7)
    prop = evolve(build_hamiltonian(p, sp_), psi0, grid)
    k = sp_.index(0, 0, 0)
    np.testing.assert_allclose(prop.states[:, k], np.exp(-0.49j * grid), atol=1e-12)
    assert np.max(np.abs(np.delete(prop.states, k, axis=1))) == 0


def test_rk_matches_matrix_exponential(rng):
    tol = exact.FOCK_TOL
    p = ModelParams(0.9, 0.45, 1.1, 0.05, 0.08)
    sp_ = FockSpace(5, 5)
    H = build_hamiltonian(p, sp_)
    psi0 = _random_state(rng, sp_)
    grid = np.linspace(0, 100, 21)
    prop = evolve(H, psi0, grid, tol, tol)
    Hd = H.toarray()
    err = max(np.max(np.abs(prop.states[k] - expm(-1j * Hd * t) @ psi0.amplitudes)) for k, t in enumerate(grid))
    assert err < 1e-8
    sec = evolve_sectors(p, psi0, grid)
    assert np.max(np.abs(sec.states - prop.states)) < 1e-8


def test_evolve_rejects_unnormalized():
    sp_ = FockSpace(1, 1)
    with pytest.raises(ValidationError):
        evolve(build_hamiltonian(ModelParams(1, 1, 1, 0, 0), sp_), FockState(sp_, np.ones(sp_.dimension)), [0, 1])


def test_observables_examples(excited44):
    sp_ = FockSpace(50, 50)
    W, s, n1, n2, N = observables(product_state(sp_, excited44))
    assert (W, abs(s)) == pytest.approx((1.0, 0.0), abs=1e-14)
    assert (n1, n2, N) == pytest.approx((16, 16, 33), abs=1e-8)
    small = FockSpace(1, 1)
    v = np.zeros(small.dimension, dtype=complex)
    v[small.index(0, 0, 0)] = v[small.index(1, 0, 0)] = 2 ** -0.5
    W, s, *_ = observables(FockState(small, v))
    assert W == pytest.approx(0.0, abs=1e-15)
    assert s == pytest.approx(0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_total_excitation_identity(seed):
    rng = np.random.default_rng(seed)
    psi = _random_state(rng, FockSpace(3, 4))
    W, _, n1, n2, N = observables(psi)
    assert N == pytest.approx(n1 + n2 + (W + 1) / 2, abs=1e-12)


def test_reduced_atom_examples():
    rho = reduced_atom(product_state(FockSpace(12, 12), InitialState(0.6, 0.8j, 0.5, 0.3)))
    sp_ = FockSpace(2, 2)
    assert rho.purity == pytest.approx(1.0, abs=1e-12)
    v = np.zeros(sp_.dimension, dtype=complex)
    v[sp_.index(0, 1, 0)] = v[sp_.index(1, 0, 0)] = 2 ** -0.5
    rho = reduced_atom(FockState(sp_, v))
    np.testing.assert_allclose(np.linalg.eigvalsh(rho.matrix), [0.5, 0.5], atol=1e-15)
    assert linear_entropy(rho) == pytest.approx(0.5)


def test_atom_density_validation():
    with pytest.raises(ValidationError):
        AtomDensity(np.array([[1.0, 0.5], [0.0, 0.0]]))  # not Hermitian
    with pytest.raises(ValidationError):
        AtomDensity(np.array([[1.5, 0.0], [0.0, -0.5]]))  # negative eigenvalue


def test_fidelity_trivial_cases(rng):
    r = AtomDensity(_random_density(rng))
    assert fidelity(r, r) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(AtomDensity.pure(1, 0), AtomDensity.pure(0, 1)) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_fidelity_against_uhlmann(seed):
    rng = np.random.default_rng(seed)
    r1, r2 = _random_density(rng), _random_density(rng)
    f = fidelity(AtomDensity(r1), AtomDensity(r2))
    assert f == pytest.approx(_uhlmann(r1, r2), abs=1e-9)
    assert f == pytest.approx(fidelity(AtomDensity(r2), AtomDensity(r1)), abs=1e-10)
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    pure = AtomDensity.pure(v[0], v[1])
    assert fidelity(pure, AtomDensity(r2)) == pytest.approx(float(np.real(v.conj() @ r2 @ v)), abs=1e-12)


def test_pure_fidelity(rng):
    sp_ = FockSpace(2, 2)
    psi = _random_state(rng, sp_)
    assert pure_fidelity(psi, psi) == pytest.approx(1.0)
    assert pure_fidelity(_basis(sp_, 0, 0, 0), _basis(sp_, 1, 0, 0)) == 0.0
    with pytest.raises(ValidationError):
        pure_fidelity(psi, _random_state(rng, FockSpace(2, 3)))


def _jcm_oracle(omega0, omega, g, alpha, nmax, times):
    """Single-mode JCM built sector by sector: |e,n> couples only to |g,n+1>."""
    c = np.array([math.exp(-abs(alpha) ** 2 / 2) * alpha ** n / math.sqrt(math.factorial(n)) for n in range(nmax + 1)])
    c = c / np.linalg.norm(c)
    W = np.zeros(len(times))
    nbar = np.zeros(len(times))
    for n in range(nmax + 1):
        if n < nmax:
            h = np.array([[omega * n + omega0 / 2, g * math.sqrt(n + 1)], [g * math.sqrt(n + 1), omega * (n + 1) - omega0 / 2]])
        for k, t in enumerate(times):
            if n < nmax:
                ae, ag = expm(-1j * h * t) @ np.array([c[n], 0])
            else:
                ae, ag = c[n], 0.0  # |e, nmax> has no partner inside the truncation
            W[k] += abs(ae) ** 2 - abs(ag) ** 2
            nbar[k] += n * abs(ae) ** 2 + (n + 1) * abs(ag) ** 2
    return W, nbar


def test_single_mode_reduction():
    nmax = 40
    p = ModelParams(0.98, 0.25, 1.0, 0.0, 0.004)
    init = InitialState.excited(0.0, 3.0)
    times = np.linspace(0, 2000, 41)
    W_ref, n_ref = _jcm_oracle(0.98, 1.0, 0.004, 3.0, nmax, times)
    sp_ = FockSpace(0, nmax)
    psi0 = product_state(sp_, init)
    W, _, _, n2, _ = trajectory_observables(evolve_sectors(p, psi0, times), 0.98)
    assert np.max(np.abs(W - W_ref)) < 1e-10
    assert np.max(np.abs(n2 - n_ref)) < 1e-10
    W_rk, *_ = trajectory_observables(evolve(build_hamiltonian(p, sp_), psi0, times), 0.98)
    assert np.max(np.abs(W_rk - W_ref)) < 1e-8


@pytest.mark.slow
def test_truncation_robustness(fig2_params, excited44):
    grid = np.linspace(0, 5 * T_COH, 201)
    Ws = []
    for n in (48, 56):
        sp_ = FockSpace(n, n)
        W, *_ = trajectory_observables(evolve_sectors(fig2_params, product_state(sp_, excited44), grid), 0.98)
        Ws.append(W)
    assert np.max(np.abs(Ws[0] - Ws[1])) < 1e-6


def test_sector_propagator_unitary(rng):
    p = ModelParams(0.98, 0.25, 1.0, 0.01, G2_OPT)
    sp_ = FockSpace(6, 6)
    psi = _random_state(rng, sp_)
    out = SectorPropagator.build(p, sp_).apply(psi, 1234.5)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)
