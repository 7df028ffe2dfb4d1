"""
Full and effective models for the unconventional Rydberg pumping (URP)
schemes: two-atom pumping, the three-qubit controlled-phase gate, Bell and
three-dimensional dissipative state preparation, and autonomous bit-flip
correction in a Rydberg-atom-cavity system.

Every builder returns (basis, terms[, channels]). Frequencies are in units
of the declared scale (omega1 = 1 for the two-atom, gate and entanglement
schemes, g = 1 for error correction); times in its inverse.
"""
import logging
import math
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from dynamics import HamiltonianTerm, LindbladChannel, Rotating, Static
from errors import ConfigError
from hilbert import (
    DensityMatrix,
    ProductBasis,
    PureState,
    basis_index,
    mixture,
    pair_sum,
    site_operator,
    sum_over_sites,
    superpose,
    transition,
)
from observables import fidelity_sqrt, liouvillian_matrix, propagate_static

logger = logging.getLogger(__name__)

TWO_LEVEL_SITE = ("0", "1", "r")
QUTRIT_SITE = ("0", "1", "2", "r")
QEC_SITE = ("0", "1", "p", "r")

Model = Tuple[ProductBasis, List[HamiltonianTerm]]
OpenModel = Tuple[ProductBasis, List[HamiltonianTerm], List[LindbladChannel]]


# =========================
# Parameters
# =========================
class _Params:
    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"{type(self).__name__}.{f.name} must be a finite number >= 0, got {value}.")

    def as_dict(self) -> Dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class UrpTwoAtomParams(_Params):
    omega1: float = 1.0
    omega2: float = 0.05
    delta: float = 50.0
    u_rr: float = 50.0

    @property
    def in_urp_regime(self) -> bool:
        return (
            self.u_rr == self.delta
            and self.delta >= 10 * self.omega1
            and self.omega1 >= 10 * self.omega2
        )


@dataclass(frozen=True)
class GateParams(_Params):
    omega1: float = 1.0
    omega2: float = 0.05
    delta: float = 58.0
    u_rr: float = 58.0
    gamma: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if not self.omega2 > 0:
            raise ConfigError(f"GateParams.omega2 must be > 0 (the gate time is pi/omega2), got {self.omega2}.")


@dataclass(frozen=True)
class BellParams(_Params):
    omega1: float = 1.0
    omega2: float = 0.02
    omega_mw: float = 0.01
    delta: float = 100.0
    u_rr: float = 100.0
    gamma: float = 0.05


@dataclass(frozen=True)
class ThreeDParams(_Params):
    omega1: float = 1.0
    omega2: float = 0.02
    omega_mw1: float = 0.01
    omega_mw2: float = 0.01
    delta: float = 100.0
    delta_small: float = 0.02
    u: float = 100.0
    gamma: float = 0.05

    def __post_init__(self):
        super().__post_init__()
        if self.delta > 0 and self.delta_small >= 0.1 * self.delta:
            raise ConfigError(
                f"delta_small ({self.delta_small}) must stay far below delta ({self.delta}); "
                "keep it under delta/10."
            )


@dataclass(frozen=True)
class QecParams(_Params):
    omega1: float = 3.0
    omega2: float = 0.05
    delta: float = 800.0
    u_rr: float = 800.0
    g: float = 1.0
    kappa: float = 200.0
    kappa_e: Optional[float] = None
    gamma_flip: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if self.kappa_e is None:
            object.__setattr__(self, "kappa_e", effective_kappa(self.g, self.kappa))


def effective_kappa(g: float, kappa: float) -> float:
    """Cavity decay seen by the atom after adiabatic elimination: 4 g^2 / kappa."""
    if not kappa > 0:
        raise ConfigError(f"Cavity decay kappa must be > 0 to eliminate the mode, got {kappa}.")
    return 4.0 * g * g / kappa


# =========================
# Shared pieces
# =========================
def _pumping_terms(basis: ProductBasis, omega1: float, omega2: float, delta: float, lower: str, upper: str) -> List[HamiltonianTerm]:
    """(omega1 e^{-i delta t} + omega2) sum_i |upper>_i<lower| + h.c."""
    raise_op = sum_over_sites(basis, upper, lower)
    return [Rotating(omega1 * raise_op, delta), Static(omega2 * (raise_op + raise_op.conj().T))]


def _decay_channels(basis: ProductBasis, gamma: float, excited: str, grounds: Tuple[str, ...]) -> List[LindbladChannel]:
    if gamma == 0:
        return []
    rate = gamma / len(grounds)
    return [
        LindbladChannel.from_rate(rate, site_operator(basis, i, g, excited), f"L{i + 1}:{excited}->{g}")
        for i in range(basis.n_sites)
        for g in grounds
    ]


def _hermitian(op: np.ndarray) -> np.ndarray:
    return op + op.conj().T


def _couplings(basis: ProductBasis, pairs: List[Tuple[str, str]], scale: float = 1.0) -> np.ndarray:
    return scale * sum(transition(basis, bra, k) for bra, k in pairs)


# =========================
# Two atoms
# =========================
def build_two_atom_full(p: UrpTwoAtomParams) -> Model:
    basis = ProductBasis.uniform(2, TWO_LEVEL_SITE)
    terms = _pumping_terms(basis, p.omega1, p.omega2, p.delta, "1", "r")
    terms.append(Static(p.u_rr * pair_sum(basis, "r", "r")))
    return basis, terms


def build_two_atom_effective(p: UrpTwoAtomParams) -> Model:
    basis = ProductBasis.uniform(2, TWO_LEVEL_SITE)
    h = _couplings(basis, [("r0", "10"), ("0r", "01")], p.omega2)
    return basis, [Static(_hermitian(h))]


def two_atom_initial_mixture(basis: ProductBasis) -> DensityMatrix:
    return mixture(basis, {"11": 0.2, "00": 0.3, "10": 0.25, "01": 0.25})


# =========================
# Three-qubit controlled phase gate
# =========================
def build_gate_full(p: GateParams) -> OpenModel:
    basis = ProductBasis.uniform(3, TWO_LEVEL_SITE)
    terms = _pumping_terms(basis, p.omega1, p.omega2, p.delta, "1", "r")
    terms.append(Static(p.u_rr * pair_sum(basis, "r", "r")))
    channels = _decay_channels(basis, p.gamma, "r", ("0", "1"))
    return basis, terms, channels


def build_gate_effective(p: GateParams) -> Model:
    basis = ProductBasis.uniform(3, TWO_LEVEL_SITE)
    h = _couplings(basis, [("r00", "100"), ("0r0", "010"), ("00r", "001")], p.omega2)
    return basis, [Static(_hermitian(h))]


def gate_states() -> Tuple[PureState, PureState]:
    """(|psi_0>, |psi_s>): the product input and the gate's target output."""
    basis = ProductBasis.uniform(3, TWO_LEVEL_SITE)
    grounds = ["000", "001", "010", "011", "100", "101", "110", "111"]
    psi0 = superpose(basis, {s: 1.0 for s in grounds})
    psis = superpose(basis, {s: (-1.0 if s.count("1") == 1 else 1.0) for s in grounds})
    return psi0, psis


def gate_time(p: GateParams) -> float:
    return math.pi / p.omega2


# =========================
# Bell state
# =========================
def _microwave(basis: ProductBasis, omega: float, upper: str, lower: str) -> np.ndarray:
    """sum_i (-1)^i omega |upper>_i<lower| + h.c. with 0-based i (sign + on the first atom)."""
    signs = [(-1.0) ** i for i in range(basis.n_sites)]
    return _hermitian(omega * sum_over_sites(basis, upper, lower, signs))


def build_bell_full(p: BellParams) -> OpenModel:
    basis = ProductBasis.uniform(2, TWO_LEVEL_SITE)
    terms = _pumping_terms(basis, p.omega1, p.omega2, p.delta, "1", "r")
    terms.append(Static(p.u_rr * pair_sum(basis, "r", "r")))
    terms.append(Static(_microwave(basis, p.omega_mw, "1", "0")))
    return basis, terms, _decay_channels(basis, p.gamma, "r", ("0", "1"))


def build_bell_effective(p: BellParams) -> OpenModel:
    basis = ProductBasis.uniform(2, TWO_LEVEL_SITE)
    pump = _couplings(basis, [("10", "r0"), ("01", "0r")], p.omega2)
    # omega (|11> - |00>)(<01| - <10|)
    mw = _couplings(basis, [("11", "01"), ("00", "10")], p.omega_mw) - _couplings(
        basis, [("11", "10"), ("00", "01")], p.omega_mw
    )
    terms = [Static(_hermitian(pump + mw))]

    rate = p.gamma / 2
    jumps = [("01", "0r"), ("00", "0r"), ("10", "r0"), ("00", "r0")]
    channels = [
        LindbladChannel.from_rate(rate, transition(basis, bra, k), f"Leff{n}")
        for n, (bra, k) in enumerate(jumps, start=1)
    ] if p.gamma > 0 else []
    return basis, terms, channels


def bell_states() -> Dict[str, PureState]:
    basis = ProductBasis.uniform(2, TWO_LEVEL_SITE)
    return {
        "phi_plus": superpose(basis, {"00": 1, "11": 1}),
        "phi_minus": superpose(basis, {"00": 1, "11": -1}),
        "psi_plus": superpose(basis, {"01": 1, "10": 1}),
        "psi_minus": superpose(basis, {"01": 1, "10": -1}),
    }


def bell_initial_mixture(basis: ProductBasis) -> DensityMatrix:
    return mixture(basis, {"00": 0.25, "10": 0.25, "01": 0.25, "11": 0.25})


# =========================
# Three-dimensional entangled state
# =========================
def _threeD_detuning(basis: ProductBasis, delta_small: float) -> np.ndarray:
    return delta_small * (
        site_operator(basis, 0, "0", "0") + site_operator(basis, 0, "1", "1") + site_operator(basis, 1, "2", "2")
    )


def build_threeD_full(p: ThreeDParams) -> OpenModel:
    basis = ProductBasis.uniform(2, QUTRIT_SITE)
    terms = _pumping_terms(basis, p.omega1, p.omega2, p.delta, "1", "r")
    terms.append(Static(p.u * pair_sum(basis, "r", "r")))
    h_mw = (
        _microwave(basis, p.omega_mw1, "1", "0")
        + _microwave(basis, p.omega_mw2, "1", "2")
        + _threeD_detuning(basis, p.delta_small)
    )
    terms.append(Static(h_mw))
    return basis, terms, _decay_channels(basis, p.gamma, "r", ("0", "1", "2"))


def build_threeD_effective(p: ThreeDParams, include_r2_decay: bool = False) -> OpenModel:
    basis = ProductBasis.uniform(2, QUTRIT_SITE)
    w1, w2 = p.omega_mw1, p.omega_mw2

    pump = _couplings(basis, [("10", "r0"), ("01", "0r"), ("12", "r2"), ("21", "2r")], p.omega2)
    mw = (
        # w1 (|11> - |00>)(<01| - <10|) + w1 (|02><12| - |20><21|)
        _couplings(basis, [("11", "01"), ("00", "10"), ("02", "12")], w1)
        - _couplings(basis, [("11", "10"), ("00", "01"), ("20", "21")], w1)
        # w2 (|11> - |22>)(<21| - <12|) + w2 (|10><20| - |01><02|)
        + _couplings(basis, [("11", "21"), ("22", "12"), ("10", "20")], w2)
        - _couplings(basis, [("11", "12"), ("22", "21"), ("01", "02")], w2)
    )
    shifts = {"00": 1, "11": 1, "22": 1, "10": 1, "01": 1, "12": 2, "02": 2}
    diag = p.delta_small * sum(n * transition(basis, s, s) for s, n in shifts.items())
    terms = [Static(_hermitian(pump + mw) + diag)]

    jumps = [("00", "0r"), ("01", "0r"), ("02", "0r"), ("00", "r0"), ("10", "r0"), ("20", "r0")]
    if include_r2_decay:
        jumps += [("02", "r2"), ("12", "r2"), ("22", "r2"), ("20", "2r"), ("21", "2r"), ("22", "2r")]
    rate = p.gamma / 3
    channels = [
        LindbladChannel.from_rate(rate, transition(basis, bra, k), f"Leff{n}")
        for n, (bra, k) in enumerate(jumps, start=1)
    ] if p.gamma > 0 else []
    return basis, terms, channels


def threeD_states() -> Tuple[PureState, PureState]:
    basis = ProductBasis.uniform(2, QUTRIT_SITE)
    t1 = superpose(basis, {"00": 1, "11": 1, "22": 1})
    t2 = superpose(basis, {"20": 3, "02": 3, "11": 2, "00": -1, "22": -1})
    return t1, t2


def threeD_initial_mixture(basis: ProductBasis) -> DensityMatrix:
    return mixture(basis, {"10": 0.15, "21": 0.35, "01": 0.3, "12": 0.2})


@dataclass
class DeltaCalibration:
    delta_small: float
    fidelity: float
    scanned: List[Tuple[float, float]] = field(default_factory=list)


def _threeD_fidelity_at(p: ThreeDParams, delta_small: float, t_eval: float, include_r2_decay: bool) -> float:
    q = ThreeDParams(**{**p.as_dict(), "delta_small": delta_small})
    basis, terms, channels = build_threeD_effective(q, include_r2_decay)
    t1, _ = threeD_states()
    m = liouvillian_matrix(terms, channels)
    (rho,) = propagate_static(m, threeD_initial_mixture(basis), [t_eval])
    return fidelity_sqrt(rho, t1)


def calibrate_delta(
    p: ThreeDParams,
    t_eval: float = 8000.0,
    grid_points: int = 21,
    include_r2_decay: bool = False,
) -> DeltaCalibration:
    """
    Pick delta_small in [0.1, 10] * omega_mw1 maximizing the |T1> fidelity at
    t_eval, using the effective model propagated exactly. A log grid scan is
    refined by a bounded scalar search around the best grid point.
    """
    if p.omega_mw1 <= 0:
        raise ConfigError("delta calibration scans relative to omega_mw1, which must be > 0.")
    lo, hi = 0.1 * p.omega_mw1, 10.0 * p.omega_mw1
    grid = np.geomspace(lo, hi, max(3, grid_points))
    scanned = [(float(d), _threeD_fidelity_at(p, d, t_eval, include_r2_decay)) for d in grid]
    best = int(np.argmax([f for _, f in scanned]))

    left = grid[max(0, best - 1)]
    right = grid[min(len(grid) - 1, best + 1)]
    refined = minimize_scalar(
        lambda x: -_threeD_fidelity_at(p, math.exp(x), t_eval, include_r2_decay),
        bounds=(math.log(left), math.log(right)),
        method="bounded",
        options={"xatol": 1e-3},
    )
    delta_best, f_best = scanned[best]
    if refined.success and -refined.fun > f_best:
        delta_best, f_best = float(math.exp(refined.x)), float(-refined.fun)
    logger.info("calibrated delta_small = %.5g (|T1> fidelity %.5f at t = %g)", delta_best, f_best, t_eval)
    return DeltaCalibration(delta_best, f_best, scanned)


# =========================
# Autonomous error correction
# =========================
def _cavity_channels(basis: ProductBasis, kappa_e: float) -> List[LindbladChannel]:
    if kappa_e == 0:
        return []
    return [
        LindbladChannel.from_rate(
            kappa_e,
            site_operator(basis, i, "0", "r") + site_operator(basis, i, "1", "p"),
            f"Le{i + 1}",
        )
        for i in range(basis.n_sites)
    ]


def _noise_channels(basis: ProductBasis, gamma_flip: float) -> List[LindbladChannel]:
    if gamma_flip == 0:
        return []
    return [
        LindbladChannel.from_rate(
            gamma_flip,
            site_operator(basis, i, "0", "1") + site_operator(basis, i, "1", "0"),
            f"Lx{i + 1}",
        )
        for i in range(basis.n_sites)
    ]


def build_qec_full(p: QecParams, include_noise: bool = False, rydberg_decay: float = 0.0) -> OpenModel:
    basis = ProductBasis.uniform(3, QEC_SITE)
    drive = sum_over_sites(basis, "p", "0") + sum_over_sites(basis, "r", "1")
    terms: List[HamiltonianTerm] = [
        Rotating(p.omega1 * drive, p.delta),
        Static(p.omega2 * _hermitian(drive)),
        Static(p.u_rr * (pair_sum(basis, "r", "r") + pair_sum(basis, "p", "p"))),
    ]
    channels = _cavity_channels(basis, p.kappa_e)
    if include_noise:
        channels += _noise_channels(basis, p.gamma_flip)
    if rydberg_decay < 0:
        raise ConfigError(f"rydberg_decay must be >= 0, got {rydberg_decay}.")
    if rydberg_decay > 0:
        channels += _decay_channels(basis, rydberg_decay, "r", ("0", "1"))
        channels += _decay_channels(basis, rydberg_decay, "p", ("0", "1"))
    return basis, terms, channels


def build_qec_effective(p: QecParams, include_noise: bool = False) -> OpenModel:
    basis = ProductBasis.uniform(3, QEC_SITE)
    pairs = [
        ("100", "r00"), ("010", "0r0"), ("001", "00r"),
        ("110", "11p"), ("101", "1p1"), ("011", "p11"),
    ]
    h = _couplings(basis, pairs, p.omega2)
    channels = _cavity_channels(basis, p.kappa_e)
    if include_noise:
        channels += _noise_channels(basis, p.gamma_flip)
    return basis, [Static(_hermitian(h))], channels


def build_qec_noise_only(p: QecParams) -> OpenModel:
    """Bit-flip noise with the correction switched off (no drives, no cavity)."""
    basis = ProductBasis.uniform(3, QEC_SITE)
    return basis, [], _noise_channels(basis, p.gamma_flip)


def qec_states() -> Tuple[PureState, PureState]:
    """(single-error input, logical target)."""
    basis = ProductBasis.uniform(3, QEC_SITE)
    return superpose(basis, {"100": 1, "011": 1j}), superpose(basis, {"000": 1, "111": 1j})


def codespace_indices(basis: ProductBasis) -> List[int]:
    return [basis_index(basis, "000"), basis_index(basis, "111")]
