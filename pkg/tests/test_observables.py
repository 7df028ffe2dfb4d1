import numpy as np
import pytest

from dynamics import LindbladChannel, Rotating, Static, Trajectory, lindblad_rhs
from errors import ConfigError, DimensionError
from hilbert import (
    ProductBasis,
    PureState,
    compress,
    ground_indices,
    ket,
    mixture,
    projector,
    reachable_indices,
    to_density,
)
from observables import (
    ObservableSpec,
    fidelity_sqrt,
    liouvillian_matrix,
    overlap_amplitude,
    population,
    propagate_static,
    reachable_steady_states,
    steady_states,
    trajectory_deviation,
    unvec,
    vec,
)
from urp_models import (
    BellParams,
    GateParams,
    QecParams,
    ThreeDParams,
    UrpTwoAtomParams,
    bell_states,
    build_bell_effective,
    build_gate_effective,
    build_qec_effective,
    build_threeD_effective,
    build_two_atom_effective,
    gate_states,
)


def _random_density(d: int, rng) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def _damped_qubit(gamma: float):
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    return [LindbladChannel.from_rate(gamma, lower)]


def test_population_examples():
    b = ProductBasis.uniform(2, ("0", "1", "r"))
    psi = ket(b, "11")
    assert population(to_density(psi), psi) == 1.0
    rho0 = mixture(b, {"11": 0.2, "00": 0.3, "10": 0.25, "01": 0.25})
    assert abs(population(rho0, psi) - 0.2) < 1e-15
    assert abs(population(np.eye(9) / 9, psi) - 1 / 9) < 1e-15


def test_population_rejects_dimension_mismatch():
    with pytest.raises(DimensionError):
        population(np.eye(3) / 3, PureState(np.array([1.0, 0.0])))


def test_fidelity_sqrt_examples():
    states = bell_states()
    phi = states["phi_plus"]
    assert abs(fidelity_sqrt(to_density(phi), phi) - 1) < 1e-15

    b = ProductBasis.uniform(2, ("0", "1", "r"))
    ground_mix = mixture(b, {"00": 0.25, "01": 0.25, "10": 0.25, "11": 0.25})
    assert abs(fidelity_sqrt(ground_mix, phi) - 0.5) < 1e-12

    lam = 0.3
    r1, r2 = to_density(phi), to_density(states["psi_plus"])
    mixed = lam * r1.entries + (1 - lam) * r2.entries
    expected = lam * fidelity_sqrt(r1, phi) ** 2 + (1 - lam) * fidelity_sqrt(r2, phi) ** 2
    assert abs(fidelity_sqrt(mixed, phi) ** 2 - expected) < 1e-12


def test_overlap_amplitude_of_gate_states():
    psi0, psis = gate_states()
    assert abs(overlap_amplitude(psi0, psis) - 0.25) < 1e-12
    assert abs(overlap_amplitude(psis, psis) - 1) < 1e-12
    assert abs(overlap_amplitude(np.exp(0.7j) * psi0.amplitudes, psis) - 0.25) < 1e-12


def test_populations_over_a_basis_sum_to_one():
    rng = np.random.default_rng(0)
    rho = _random_density(9, rng)
    b = ProductBasis.uniform(2, ("0", "1", "r"))
    total = sum(population(rho, ket(b, (x, y))) for x in "01r" for y in "01r")
    assert abs(total - 1) < 1e-9


def test_observable_spec_works_on_vectors_and_matrices():
    phi = bell_states()["phi_plus"]
    pop = ObservableSpec("P", "population", phi)
    fid = ObservableSpec("F", "fidelity_sqrt", phi)
    assert abs(pop(phi.amplitudes) - 1) < 1e-12
    assert abs(fid(projector(phi)) - 1) < 1e-12
    weights = np.zeros(9)
    weights[0] = 1
    diag = ObservableSpec("P00", "custom_diagonal", weights=weights)
    assert abs(diag(projector(phi)) - 0.5) < 1e-12
    with pytest.raises(ConfigError):
        ObservableSpec("bad", "entropy", phi)
    with pytest.raises(ConfigError):
        ObservableSpec("bad", "population")


# =========================
# Liouvillian
# =========================
def test_vec_is_column_stacking():
    a = np.arange(4).reshape(2, 2)
    assert list(vec(a)) == [0, 2, 1, 3]
    assert np.array_equal(unvec(vec(a), 2), a)


def test_zero_generator_gives_zero_superoperator():
    assert not np.any(liouvillian_matrix([Static(np.zeros((3, 3)))]))


def _gate_effective():
    basis, terms = build_gate_effective(GateParams())
    return basis, terms, []


def _threeD_effective():
    return build_threeD_effective(ThreeDParams(), include_r2_decay=True)


def _qec_effective_on_reachable_subspace():
    # The 64-dim superoperator would be 4096 x 4096; the dynamics from the code
    # and error states never leave a much smaller block.
    basis, terms, channels = build_qec_effective(QecParams(gamma_flip=0.002), include_noise=True)
    ops = [t.H for t in terms] + [c.L for c in channels]
    idx = reachable_indices(ops, ground_indices(basis, ("0", "1")))
    terms = [Static(compress(t.H, idx)) for t in terms]
    channels = [LindbladChannel(compress(c.L, idx), c.label) for c in channels]
    return basis, terms, channels


@pytest.mark.parametrize(
    "build",
    [
        lambda: build_two_atom_effective(UrpTwoAtomParams()) + ([],),
        _gate_effective,
        lambda: build_bell_effective(BellParams()),
        _threeD_effective,
        _qec_effective_on_reachable_subspace,
    ],
    ids=["two-atom", "gate", "bell", "three-dimensional", "qec"],
)
def test_liouvillian_matches_rhs_on_random_states(build):
    _, terms, channels = build()
    m = liouvillian_matrix(terms, channels)
    d = terms[0].dim
    rng = np.random.default_rng(d)
    for _ in range(100):
        rho = _random_density(d, rng)
        rhs = lindblad_rhs(terms, channels, rho, 0.0)
        assert np.max(np.abs(unvec(m @ vec(rho), d) - rhs)) < 1e-12


def test_damped_qubit_spectrum():
    gamma = 0.6
    m = liouvillian_matrix([], _damped_qubit(gamma), dim=2)
    eig = np.sort(np.linalg.eigvals(m).real)
    assert np.allclose(eig, [-gamma, -gamma / 2, -gamma / 2, 0.0], atol=1e-12)


def test_liouvillian_rejects_rotating_terms():
    with pytest.raises(ConfigError):
        liouvillian_matrix([Rotating(np.eye(2), 1.0)])


def test_propagate_static_matches_decay():
    gamma = 0.5
    m = liouvillian_matrix([], _damped_qubit(gamma), dim=2)
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    out = propagate_static(m, rho0, [0.0, 1.0, 2.0])
    assert np.allclose([r[1, 1].real for r in out], np.exp(-gamma * np.array([0.0, 1.0, 2.0])))
    with pytest.raises(ConfigError):
        propagate_static(m, rho0, [1.0, 0.5])


# =========================
# Steady states
# =========================
def test_damped_qubit_has_ground_state_as_unique_steady_state():
    report = steady_states(liouvillian_matrix([], _damped_qubit(1.0), dim=2))
    assert report.null_dimension == 1
    assert np.allclose(report.basis[0], np.diag([1.0, 0.0]), atol=1e-10)
    assert report.residuals[0] < 1e-9
    assert not report.ill_conditioned


def test_degenerate_null_space_is_returned_as_trace_one_hermitian_basis():
    report = steady_states(np.zeros((9, 9), dtype=complex))
    assert report.null_dimension == 9
    for b in report.basis:
        assert np.max(np.abs(b - b.conj().T)) < 1e-10
    assert abs(np.trace(report.basis[0]) - 1) < 1e-10


def test_close_singular_values_are_flagged():
    m = np.diag([0.0, 2e-9, 1.0, 1.0]).astype(complex)
    report = steady_states(m, tol=1e-9)
    assert report.null_dimension == 1
    assert report.ill_conditioned


def test_non_square_superoperator_raises():
    with pytest.raises(DimensionError):
        steady_states(np.zeros((5, 5)))


# =========================
# Deviation
# =========================
def test_trajectory_deviation():
    t = np.linspace(0, 1, 5)
    a = Trajectory(times=t, observables={"F": np.linspace(0, 1, 5)})
    b = Trajectory(times=t, observables={"F": np.linspace(0, 1, 5) + np.array([0, 0.01, 0.03, 0, 0])})
    assert trajectory_deviation(a, a, "F") == 0
    assert abs(trajectory_deviation(a, b, "F") - 0.03) < 1e-15
    c = Trajectory(times=np.linspace(0, 1, 4), observables={"F": np.zeros(4)})
    with pytest.raises(DimensionError):
        trajectory_deviation(a, c, "F")


def test_reachable_steady_states_needs_a_generator():
    with pytest.raises(DimensionError):
        reachable_steady_states([], [], [0])
