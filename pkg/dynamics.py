"""
Time-dependent Hamiltonians and the Lindblad / Schrodinger integrators.

H(t) is a list of terms: Static(H) contributes H verbatim, Rotating(A, w)
contributes A e^{-iwt} + A^dag e^{+iwt}. Jump operators carry their rate
(L = sqrt(rate) * jump). Density matrices are integrated as row-major
flattened complex vectors.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple, TypeVar, Union

import numpy as np
from scipy.integrate import RK45

import settings
from errors import ConfigError, DimensionError, FrameError, IntegrationError
from hilbert import DensityMatrix, PureState

logger = logging.getLogger(__name__)

TRACE_ABORT = 1e-5
POSITIVITY_WARN = -1e-6
METHODS = ("fixed", "adaptive")


# =========================
# Types
# =========================
@dataclass(frozen=True, eq=False)
class Static:
    H: np.ndarray

    def __post_init__(self):
        h = np.array(self.H, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise DimensionError(f"Static term must be square, got shape {h.shape}.")
        if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-12:
            raise DimensionError("Static term is not Hermitian.")
        h.setflags(write=False)
        object.__setattr__(self, "H", h)

    @property
    def dim(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True, eq=False)
class Rotating:
    A: np.ndarray
    omega: float

    def __post_init__(self):
        a = np.array(self.A, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"Rotating term must be square, got shape {a.shape}.")
        if not math.isfinite(self.omega):
            raise ConfigError(f"Rotating frequency must be finite, got {self.omega}.")
        a.setflags(write=False)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def dim(self) -> int:
        return self.A.shape[0]


HamiltonianTerm = Union[Static, Rotating]


@dataclass(frozen=True, eq=False)
class LindbladChannel:
    L: np.ndarray
    label: str = ""

    def __post_init__(self):
        op = np.array(self.L, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise DimensionError(f"Jump operator must be square, got shape {op.shape}.")
        if not np.all(np.isfinite(op)):
            raise DimensionError(f"Jump operator {self.label!r} has non-finite entries.")
        op.setflags(write=False)
        object.__setattr__(self, "L", op)

    @classmethod
    def from_rate(cls, rate: float, jump: np.ndarray, label: str = "") -> "LindbladChannel":
        if rate < 0:
            raise ConfigError(f"Channel rate must be nonnegative, got {rate}.")
        return cls(math.sqrt(rate) * np.asarray(jump), label)

    @property
    def dim(self) -> int:
        return self.L.shape[0]


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "adaptive"
    max_step: float = 0.1
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    hermitize_every_step: bool = True
    record_stride: int = 1
    record_interval: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"Unknown integrator method {self.method!r}; use one of {METHODS}.")
        if not self.max_step > 0:
            raise ConfigError(f"max_step must be > 0, got {self.max_step}.")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("Integrator tolerances must be > 0.")
        if int(self.record_stride) < 1:
            raise ConfigError(f"record_stride must be >= 1, got {self.record_stride}.")
        if self.record_interval is not None and not self.record_interval > 0:
            raise ConfigError(f"record_interval must be > 0, got {self.record_interval}.")

    def with_overrides(self, **changes) -> "IntegratorConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


@dataclass
class Trajectory:
    times: np.ndarray
    observables: Dict[str, np.ndarray]
    snapshots: Optional[List[np.ndarray]] = None
    final_state: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise IntegrationError("Trajectory times must be strictly increasing.")
        for name, values in list(self.observables.items()):
            values = np.asarray(values, dtype=float)
            if values.shape != self.times.shape:
                raise DimensionError(
                    f"Observable {name!r} has {values.size} points but the grid has {self.times.size}."
                )
            self.observables[name] = values

    def final(self, name: str) -> float:
        return float(self.observables[name][-1])

    def extend(self, later: "Trajectory") -> "Trajectory":
        """Append a continuation whose first point repeats this trajectory's last point."""
        skip = 1 if later.times.size and self.times.size and abs(later.times[0] - self.times[-1]) < 1e-12 else 0
        snapshots = None
        if self.snapshots is not None and later.snapshots is not None:
            snapshots = self.snapshots + later.snapshots[skip:]
        return Trajectory(
            times=np.concatenate([self.times, later.times[skip:]]),
            observables={k: np.concatenate([v, later.observables[k][skip:]]) for k, v in self.observables.items()},
            snapshots=snapshots,
            final_state=later.final_state,
        )


class Recorder(Protocol):
    name: str

    def __call__(self, state: np.ndarray) -> float: ...


# =========================
# Generator
# =========================
class _Generator:
    def __init__(self, terms: Sequence[HamiltonianTerm], channels: Sequence[LindbladChannel], dim: Optional[int] = None):
        dims = {t.dim for t in terms} | {c.dim for c in channels}
        if dim is not None:
            dims.add(dim)
        if len(dims) > 1:
            raise DimensionError(f"Terms, channels and state disagree on dimension: {sorted(dims)}.")
        if not dims:
            raise DimensionError("Cannot infer the dimension from an empty term and channel list.")
        self.dim = dims.pop()

        self.h_static = np.zeros((self.dim, self.dim), dtype=complex)
        self.rotating: List[Tuple[np.ndarray, np.ndarray, float]] = []
        for term in terms:
            if isinstance(term, Static):
                self.h_static = self.h_static + term.H
            elif isinstance(term, Rotating):
                self.rotating.append((term.A, term.A.conj().T, term.omega))
            else:
                raise TypeError(f"Unknown Hamiltonian term {type(term).__name__}.")

        if channels:
            self.jumps = np.stack([c.L for c in channels])
            self.jumps_dag = self.jumps.conj().transpose(0, 2, 1)
            self.decay = np.sum(self.jumps_dag @ self.jumps, axis=0)
        else:
            self.jumps = None
            self.jumps_dag = None
            self.decay = np.zeros((self.dim, self.dim), dtype=complex)

    @property
    def max_frequency(self) -> float:
        return max((abs(w) for _, _, w in self.rotating), default=0.0)

    def hamiltonian(self, t: float) -> np.ndarray:
        h = self.h_static.copy()
        for a, a_dag, w in self.rotating:
            phase = np.exp(-1j * w * t)
            h += a * phase + a_dag * np.conj(phase)
        return h

    def rho_dot(self, t: float, rho: np.ndarray) -> np.ndarray:
        heff = self.hamiltonian(t) - 0.5j * self.decay
        out = -1j * (heff @ rho - rho @ heff.conj().T)
        if self.jumps is not None:
            out += np.sum(self.jumps @ rho @ self.jumps_dag, axis=0)
        return out

    def psi_dot(self, t: float, psi: np.ndarray) -> np.ndarray:
        return -1j * (self.hamiltonian(t) @ psi)


def hamiltonian_at(terms: Sequence[HamiltonianTerm], t: float) -> np.ndarray:
    return _Generator(terms, []).hamiltonian(t)


def lindblad_rhs(
    terms: Sequence[HamiltonianTerm],
    channels: Sequence[LindbladChannel],
    rho: Union[DensityMatrix, np.ndarray],
    t: float,
) -> np.ndarray:
    """-i[H(t), rho] + sum_k (L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho})."""
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    return _Generator(terms, channels, dim=m.shape[0]).rho_dot(t, m)


# =========================
# Integration loops
# =========================
def _rk4_step(fun: Callable, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = fun(t, y)
    k2 = fun(t + h / 2, y + h / 2 * k1)
    k3 = fun(t + h / 2, y + h / 2 * k2)
    k4 = fun(t + h, y + h * k3)
    return y + h * (k1 / 6 + k2 / 3 + k3 / 3 + k4 / 6)


def _record_grid(t0: float, t_final: float, interval: Optional[float]) -> Optional[np.ndarray]:
    if interval is None:
        return None
    n = int(math.floor((t_final - t0) / interval + 1e-9))
    grid = t0 + interval * np.arange(n + 1)
    if t_final - grid[-1] > 1e-9 * interval:
        grid = np.append(grid, t_final)
    else:
        grid[-1] = t_final
    return grid


def _resolve_step(gen: _Generator, cfg: IntegratorConfig) -> float:
    h = cfg.max_step
    w = gen.max_frequency
    if w > 0:
        limit = 2 * math.pi / (10 * w)
        if h > limit:
            logger.debug("max_step %.3g clamped to %.3g to resolve |omega| = %.4g", h, limit, w)
            h = limit
    return h


def _run_fixed(fun, y0, t0, t_final, h, cfg, project, check, record) -> int:
    grid = _record_grid(t0, t_final, cfg.record_interval)
    y = y0
    record(t0, y)
    n_steps = 0
    if grid is not None:
        for a, b in zip(grid[:-1], grid[1:]):
            n = max(1, math.ceil((b - a) / h - 1e-9))
            dt = (b - a) / n
            for k in range(n):
                t = a + k * dt
                y = project(_rk4_step(fun, t, y, dt))
                check(t + dt, y)
            n_steps += n
            record(b, y)
        return n_steps

    n = max(1, math.ceil((t_final - t0) / h - 1e-9))
    dt = (t_final - t0) / n
    for k in range(1, n + 1):
        y = project(_rk4_step(fun, t0 + (k - 1) * dt, y, dt))
        t = t0 + k * dt
        check(t, y)
        if k % cfg.record_stride == 0 or k == n:
            record(t_final if k == n else t, y)
    return n


def _run_adaptive(fun, y0, t0, t_final, h, cfg, project, check, record) -> int:
    solver = RK45(fun, t0, y0, t_final, max_step=h, rtol=cfg.rel_tol, atol=cfg.abs_tol)
    grid = _record_grid(t0, t_final, cfg.record_interval)
    record(t0, y0)
    next_k = 1
    n_steps = 0
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise IntegrationError(
                f"Adaptive step failed at t={solver.t:.6g} (rel_tol={cfg.rel_tol}, abs_tol={cfg.abs_tol}): {message}"
            )
        n_steps += 1
        y = project(solver.y)
        solver.y = y
        check(solver.t, y)

        if grid is None:
            if n_steps % cfg.record_stride == 0 or solver.status == "finished":
                record(solver.t, y)
            continue

        eps = 1e-12 * max(1.0, abs(solver.t))
        if next_k < len(grid) and grid[next_k] <= solver.t + eps:
            dense = solver.dense_output()
            while next_k < len(grid) and grid[next_k] <= solver.t + eps:
                tk = grid[next_k]
                yk = y if abs(tk - solver.t) <= eps else project(dense(tk))
                record(tk, yk)
                next_k += 1
    return n_steps


def _integrate(gen, fun, y0, t0, t_final, cfg, project, check, record) -> int:
    if not t_final > t0:
        raise ConfigError(f"t_final ({t_final}) must be greater than t0 ({t0}).")
    h = _resolve_step(gen, cfg)
    runner = _run_fixed if cfg.method == "fixed" else _run_adaptive
    n_steps = runner(fun, y0, t0, t_final, h, cfg, project, check, record)
    logger.debug("%s integration: %d steps over [%g, %g], max_step %.3g", cfg.method, n_steps, t0, t_final, h)
    return n_steps


class _Collector:
    def __init__(self, observables: Sequence[Recorder], keep_snapshots: bool, to_state: Callable, on_record=None):
        self.observables = list(observables)
        self.keep_snapshots = keep_snapshots
        self.to_state = to_state
        self.on_record = on_record
        self.times: List[float] = []
        self.values: Dict[str, List[float]] = {o.name: [] for o in self.observables}
        self.snapshots: List[np.ndarray] = []
        self.last = None

    def __call__(self, t: float, y: np.ndarray) -> None:
        state = self.to_state(y)
        if self.on_record is not None:
            self.on_record(t, state)
        self.times.append(float(t))
        for o in self.observables:
            self.values[o.name].append(float(o(state)))
        if self.keep_snapshots:
            self.snapshots.append(state.copy())
        self.last = state

    def trajectory(self) -> Trajectory:
        return Trajectory(
            times=np.array(self.times),
            observables={k: np.array(v) for k, v in self.values.items()},
            snapshots=self.snapshots if self.keep_snapshots else None,
            final_state=None if self.last is None else self.last.copy(),
        )


def evolve_master(
    terms: Sequence[HamiltonianTerm],
    channels: Sequence[LindbladChannel],
    rho0: Union[DensityMatrix, np.ndarray],
    t_final: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    *,
    t0: float = 0.0,
    observables: Sequence[Recorder] = (),
    keep_snapshots: bool = False,
) -> Trajectory:
    """
    Integrate the Lindblad master equation from t0 to t_final.

    rho0 may be a validated DensityMatrix or a raw array (taken as-is, which
    is how chunked runs continue from a previous final_state).
    """
    m0 = rho0.entries if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    d = m0.shape[0]
    gen = _Generator(terms, channels, dim=d)

    def fun(t, y):
        return gen.rho_dot(t, y.reshape(d, d)).ravel()

    if cfg.hermitize_every_step:
        def project(y):
            m = y.reshape(d, d)
            return (0.5 * (m + m.conj().T)).ravel()
    else:
        def project(y):
            return y

    def check(t, y):
        tr = y[:: d + 1].sum()
        if abs(tr - 1.0) > TRACE_ABORT:
            raise IntegrationError(
                f"Trace drifted to {tr.real:.9f}{tr.imag:+.2e}j at t={t:.6g}; "
                f"reduce max_step (now {cfg.max_step}) or tighten tolerances."
            )

    def positivity(t, rho):
        lowest = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
        if lowest < POSITIVITY_WARN:
            logger.warning("density matrix eigenvalue %.3e at t=%.6g", lowest, t)

    collect = _Collector(observables, keep_snapshots, lambda y: y.reshape(d, d).copy(), positivity)
    _integrate(gen, fun, m0.ravel().copy(), t0, t_final, cfg, project, check, collect)
    return collect.trajectory()


def evolve_unitary(
    terms: Sequence[HamiltonianTerm],
    psi0: Union[PureState, np.ndarray],
    t_final: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    *,
    t0: float = 0.0,
    observables: Sequence[Recorder] = (),
    keep_snapshots: bool = False,
) -> Trajectory:
    v0 = psi0.amplitudes if isinstance(psi0, PureState) else np.asarray(psi0, dtype=complex)
    gen = _Generator(terms, [], dim=v0.shape[0])

    if cfg.hermitize_every_step:
        def project(y):
            return y / np.linalg.norm(y)
    else:
        def project(y):
            return y

    def check(t, y):
        norm = np.linalg.norm(y)
        if abs(norm - 1.0) > TRACE_ABORT:
            raise IntegrationError(f"State norm drifted to {norm:.9f} at t={t:.6g}; reduce max_step.")

    collect = _Collector(observables, keep_snapshots, lambda y: y.copy())
    _integrate(gen, gen.psi_dot, v0.copy(), t0, t_final, cfg, project, check, collect)
    return collect.trajectory()


# =========================
# Rotating frame
# =========================
def _split_by_gap(a: np.ndarray, gaps: np.ndarray) -> Dict[float, np.ndarray]:
    parts: Dict[float, np.ndarray] = {}
    rows, cols = np.nonzero(a)
    for r, c in zip(rows, cols):
        key = round(float(gaps[r, c]), 12)
        if key not in parts:
            parts[key] = np.zeros_like(a)
        parts[key][r, c] = a[r, c]
    return parts


def rotating_frame(
    terms: Sequence[HamiltonianTerm],
    generator: np.ndarray,
    channels: Sequence[LindbladChannel] = (),
) -> Tuple[List[HamiltonianTerm], List[LindbladChannel]]:
    """
    Transform to the frame U(t) = exp(i G t) for a diagonal generator G.

    An entry |a><b| picks up exp(i (g_a - g_b) t), so a rotating piece at
    frequency w becomes one at w - (g_a - g_b), and -G is added as a static
    term. Channels must connect levels of one fixed gap; they are returned
    unchanged since the dissipator ignores the resulting phase.
    """
    g = np.asarray(generator, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise FrameError(f"Generator must be square, got shape {g.shape}.")
    if np.max(np.abs(g - np.diag(np.diag(g))), initial=0.0) > 0:
        raise FrameError("Frame generator must be diagonal.")
    levels = np.diag(g)
    if np.max(np.abs(levels.imag), initial=0.0) > 1e-12:
        raise FrameError("Frame generator must be Hermitian (real diagonal).")
    levels = levels.real
    gaps = levels[:, None] - levels[None, :]

    static = -np.diag(levels).astype(complex)
    rotating: List[Rotating] = []

    def absorb(a: np.ndarray, w: float) -> None:
        nonlocal static
        for gap, part in _split_by_gap(a, gaps).items():
            w_new = w - gap
            if abs(w_new) < 1e-12:
                static = static + part + part.conj().T
            else:
                rotating.append(Rotating(part, w_new))

    for term in terms:
        if isinstance(term, Static):
            h = np.asarray(term.H)
            static = static + np.diag(np.diag(h))
            absorb(np.tril(h, -1), 0.0)
        else:
            absorb(np.asarray(term.A), term.omega)

    for ch in channels:
        rows, cols = np.nonzero(ch.L)
        channel_gaps = {round(float(gaps[r, c]), 9) for r, c in zip(rows, cols)}
        if len(channel_gaps) > 1:
            raise FrameError(
                f"Channel {ch.label!r} mixes generator gaps {sorted(channel_gaps)}; its dissipator is not frame invariant."
            )

    static = 0.5 * (static + static.conj().T)
    return [Static(static)] + rotating, list(channels)


# =========================
# Concurrency
# =========================
T = TypeVar("T")


def run_parallel(jobs: Sequence[Callable[[], T]], max_workers: Optional[int] = None) -> List[T]:
    """Run independent trajectory jobs on a thread pool; results keep submission order."""
    workers = max_workers or settings.worker_count()
    if workers == 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]
