"""
Populations, fidelities, Liouvillian superoperators and steady states.

Vectorization convention: column stacking, vec(rho) = rho.flatten("F"),
so vec(A rho B) = (B^T kron A) vec(rho).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.linalg import expm, svd

from dynamics import HamiltonianTerm, LindbladChannel, Rotating, Static, Trajectory
from errors import ConfigError, DimensionError
from hilbert import DensityMatrix, PureState, compress, reachable_indices

logger = logging.getLogger(__name__)

State = Union[DensityMatrix, PureState, np.ndarray]

KINDS = ("population", "fidelity_sqrt", "overlap_amplitude", "custom_diagonal")


def _matrix(rho: State) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.entries
    return np.asarray(rho, dtype=complex)


def _vector(psi: State) -> np.ndarray:
    if isinstance(psi, PureState):
        return psi.amplitudes
    return np.asarray(psi, dtype=complex)


def _check_dims(n: int, m: int) -> None:
    if n != m:
        raise DimensionError(f"Dimension mismatch: state has {n}, target has {m}.")


# =========================
# Scalar observables
# =========================
def population(rho: State, psi: State) -> float:
    """P = <psi|rho|psi>, clamped to [0, 1]."""
    m = _matrix(rho)
    v = _vector(psi)
    _check_dims(m.shape[0], v.shape[0])
    value = float(np.vdot(v, m @ v).real)
    if value < -1e-9 or value > 1 + 1e-9:
        logger.debug("population %.3e outside [0, 1] before clamping", value)
    return min(1.0, max(0.0, value))


def fidelity_sqrt(rho: State, psi: State) -> float:
    return float(np.sqrt(population(rho, psi)))


def overlap_amplitude(psi_t: State, psi_s: State) -> float:
    """|<psi_s|psi_t>|."""
    a = _vector(psi_t)
    b = _vector(psi_s)
    _check_dims(a.shape[0], b.shape[0])
    return min(1.0, float(abs(np.vdot(b, a))))


@dataclass(frozen=True, eq=False)
class ObservableSpec:
    name: str
    kind: str
    target: Optional[PureState] = None
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"Unknown observable kind {self.kind!r}; use one of {KINDS}.")
        if self.kind == "custom_diagonal":
            if self.weights is None:
                raise ConfigError(f"Observable {self.name!r} needs diagonal weights.")
            object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        elif not isinstance(self.target, PureState):
            raise ConfigError(f"Observable {self.name!r} needs a normalized PureState target.")

    def __call__(self, state: np.ndarray) -> float:
        state = np.asarray(state)
        if self.kind == "custom_diagonal":
            diag = np.abs(state) ** 2 if state.ndim == 1 else np.diag(state).real
            _check_dims(diag.shape[0], self.weights.shape[0])
            return float(diag @ self.weights)
        if state.ndim == 1:
            amp = overlap_amplitude(state, self.target)
            return amp ** 2 if self.kind == "population" else amp
        if self.kind == "population":
            return population(state, self.target)
        return fidelity_sqrt(state, self.target)


def populations_of(named: Dict[str, PureState]) -> List[ObservableSpec]:
    return [ObservableSpec(name, "population", target) for name, target in named.items()]


def fidelities_of(named: Dict[str, PureState]) -> List[ObservableSpec]:
    return [ObservableSpec(name, "fidelity_sqrt", target) for name, target in named.items()]


# =========================
# Liouvillian
# =========================
def vec(rho: State) -> np.ndarray:
    return _matrix(rho).flatten(order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


def liouvillian_matrix(
    static_terms: Sequence[HamiltonianTerm],
    channels: Sequence[LindbladChannel] = (),
    dim: Optional[int] = None,
) -> np.ndarray:
    """Superoperator M with vec(d rho/dt) = M vec(rho), column stacking."""
    if any(isinstance(t, Rotating) for t in static_terms):
        raise ConfigError("liouvillian_matrix needs a time-independent generator; found a Rotating term.")
    dims = {t.dim for t in static_terms} | {c.dim for c in channels}
    if dim is not None:
        dims.add(dim)
    if len(dims) != 1:
        raise DimensionError(f"Cannot settle on one dimension from {sorted(dims)}.")
    d = dims.pop()
    eye = np.eye(d, dtype=complex)

    h = sum((t.H for t in static_terms if isinstance(t, Static)), np.zeros((d, d), dtype=complex))
    m = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for ch in channels:
        op = ch.L
        ldl = op.conj().T @ op
        m += np.kron(op.conj(), op) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye)
    return m


def propagate_static(m: np.ndarray, rho0: State, times: Sequence[float]) -> List[np.ndarray]:
    """Exact propagation rho(t) = unvec(expm(M t) vec(rho0)) on sorted times >= 0."""
    d = _matrix(rho0).shape[0]
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ConfigError("propagate_static needs nondecreasing nonnegative times.")
    out = []
    v = vec(rho0)
    t_prev = 0.0
    cache: Dict[float, np.ndarray] = {}
    for t in times:
        dt = round(float(t - t_prev), 12)
        if dt > 0:
            if dt not in cache:
                cache[dt] = expm(m * dt)
            v = cache[dt] @ v
        out.append(unvec(v, d))
        t_prev = t
    return out


# =========================
# Steady states
# =========================
@dataclass
class SteadyStateReport:
    null_dimension: int
    basis: List[np.ndarray]
    residuals: List[float]
    singular_values: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    ill_conditioned: bool = False

    def summary(self) -> Dict[str, object]:
        return {
            "null_dimension": self.null_dimension,
            "residuals": [float(r) for r in self.residuals],
            "ill_conditioned": self.ill_conditioned,
            "smallest_singular_values": [float(s) for s in self.singular_values[-4:]],
        }


def _hermitian_basis(null_vectors: np.ndarray, d: int) -> List[np.ndarray]:
    """Hermitian matrices spanning the (dagger-closed) null space."""
    k = null_vectors.shape[1]
    columns = []
    for j in range(k):
        x = unvec(null_vectors[:, j], d)
        for h in (0.5 * (x + x.conj().T), 0.5j * (x.conj().T - x)):
            columns.append(np.concatenate([h.real.ravel(), h.imag.ravel()]))
    real_stack = np.array(columns).T
    u, s, _ = svd(real_stack, full_matrices=False)
    out = []
    for j in range(k):
        r = u[:, j]
        h = (r[: d * d] + 1j * r[d * d:]).reshape(d, d)
        out.append(0.5 * (h + h.conj().T))
    return out


def _unit_trace(basis: List[np.ndarray]) -> List[np.ndarray]:
    traces = [np.trace(b).real for b in basis]
    if not basis or max(abs(t) for t in traces) <= 1e-8:
        return basis
    lead = int(np.argmax(np.abs(traces)))
    anchor = basis[lead] / traces[lead]
    out = [anchor]
    for j, b in enumerate(basis):
        if j == lead:
            continue
        out.append(b + (1.0 - traces[j]) * anchor)
    return out


def steady_states(m: np.ndarray, tol: float = 1e-9) -> SteadyStateReport:
    """
    Null space of the superoperator by SVD. null_dimension counts singular
    values below tol; a gap under 10*tol between the null block and the rest
    is flagged as ill-conditioned.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"Superoperator must be square, got shape {m.shape}.")
    d = int(round(np.sqrt(m.shape[0])))
    if d * d != m.shape[0]:
        raise DimensionError(f"Superoperator size {m.shape[0]} is not a perfect square.")

    _, s, vh = svd(m)
    null = s < tol
    k = int(null.sum())
    largest_null = float(s[null].max()) if k else 0.0
    smallest_kept = float(s[~null].min()) if (~null).any() else np.inf
    ill = bool(k and smallest_kept - largest_null < 10 * tol)
    if ill:
        logger.warning(
            "steady-state separation is ill-conditioned: null block up to %.3e, next singular value %.3e",
            largest_null, smallest_kept,
        )
    if k == 0:
        return SteadyStateReport(0, [], [], s, ill)

    basis = _unit_trace(_hermitian_basis(vh[-k:].conj().T, d))
    residuals = [float(np.linalg.norm(m @ vec(b))) for b in basis]
    return SteadyStateReport(k, basis, residuals, s, ill)


def embed(sub: np.ndarray, indices: Sequence[int], dim: int) -> np.ndarray:
    out = np.zeros((dim, dim), dtype=complex)
    idx = np.asarray(indices, dtype=int)
    out[np.ix_(idx, idx)] = sub
    return out


def reachable_steady_states(
    terms: Sequence[HamiltonianTerm],
    channels: Sequence[LindbladChannel],
    seeds: Sequence[int],
    tol: float = 1e-9,
) -> SteadyStateReport:
    """
    Steady states on the subspace the dynamics can reach from the seed basis
    states. States the generator never touches are trivially stationary and
    would otherwise inflate the null space. Basis elements are returned on
    the full space.
    """
    ops = [t.H for t in terms if isinstance(t, Static)] + [c.L for c in channels]
    if not ops:
        raise DimensionError("Cannot infer the dimension of a model with no Hamiltonian terms or channels.")
    dim = ops[0].shape[0]
    idx = reachable_indices(ops, seeds)
    sub_terms = [Static(compress(t.H, idx)) for t in terms if isinstance(t, Static)]
    sub_channels = [LindbladChannel(compress(c.L, idx), c.label) for c in channels]
    m = liouvillian_matrix(sub_terms, sub_channels, dim=len(idx))
    report = steady_states(m, tol)
    report.basis = [embed(b, idx, dim) for b in report.basis]
    logger.debug("steady states on %d-dim reachable subspace: null dimension %d", len(idx), report.null_dimension)
    return report


# =========================
# Trajectory comparison
# =========================
def trajectory_deviation(a: Trajectory, b: Trajectory, observable_name: str) -> float:
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-9):
        raise DimensionError(
            f"Trajectories are on different time grids ({a.times.size} vs {b.times.size} points)."
        )
    return float(np.max(np.abs(a.observables[observable_name] - b.observables[observable_name])))
