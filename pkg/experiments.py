"""
Registry of the URP experiments with their reference defaults, and the
runner that resolves a config, integrates the full and effective models
and collects summary scalars.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

import settings
from dynamics import (
    IntegratorConfig,
    Trajectory,
    evolve_master,
    evolve_unitary,
    rotating_frame,
    run_parallel,
)
from errors import ConfigError
from hilbert import ProductBasis, ground_indices, ket, site_operator, to_density
from observables import (
    ObservableSpec,
    fidelities_of,
    fidelity_sqrt,
    populations_of,
    reachable_steady_states,
    trajectory_deviation,
)
from results_io import write_result
from urp_models import (
    BellParams,
    GateParams,
    QecParams,
    ThreeDParams,
    UrpTwoAtomParams,
    bell_initial_mixture,
    bell_states,
    build_bell_effective,
    build_bell_full,
    build_gate_effective,
    build_gate_full,
    build_qec_effective,
    build_qec_full,
    build_qec_noise_only,
    build_threeD_effective,
    build_threeD_full,
    build_two_atom_full,
    calibrate_delta,
    gate_states,
    gate_time,
    qec_states,
    threeD_initial_mixture,
    threeD_states,
    two_atom_initial_mixture,
)

logger = logging.getLogger(__name__)

Runner = Callable[[Dict[str, float], IntegratorConfig], Tuple[Dict[str, Trajectory], Dict[str, Any]]]


# =========================
# Types
# =========================
@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    scheme: str
    defaults: Dict[str, float]
    runner: Runner
    integrator: Dict[str, Any] = field(default_factory=dict)
    reduced: Dict[str, float] = field(default_factory=dict)
    long_running: bool = False
    reference_defaults: bool = True
    notes: str = ""


@dataclass
class ExperimentConfig:
    experiment: str
    overrides: Dict[str, float] = field(default_factory=dict)
    integrator: Dict[str, Any] = field(default_factory=dict)
    out_dir: Optional[str] = None
    record_stride: Optional[int] = None
    reduced: bool = False

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, ValueError) as e:
            raise ConfigError(f"Cannot read experiment config {path}: {e}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown keys in {path}: {unknown}. Allowed: {sorted(known)}.")
        if "experiment" not in data:
            raise ConfigError(f"{path} must name an experiment.")
        return cls(**data)


@dataclass
class ExperimentResult:
    experiment: str
    trajectories: Dict[str, Trajectory]
    summary: Dict[str, Any]
    provenance: Dict[str, Any]
    out_path: Optional[str] = None


# =========================
# Helpers
# =========================
def _rydberg_generator(basis: ProductBasis, delta: float, levels: Tuple[str, ...]) -> np.ndarray:
    g = np.zeros((basis.dim, basis.dim), dtype=complex)
    for i in range(basis.n_sites):
        for lev in levels:
            g += site_operator(basis, i, lev, lev)
    return delta * g


def _frame(params: Dict[str, float], basis, terms, channels, levels=("r",)):
    if not params.get("rotating_frame"):
        return terms, channels
    gen = _rydberg_generator(basis, params["delta"], levels)
    logger.info("integrating the full model in the rotating frame of %s", "+".join(levels))
    return rotating_frame(terms, gen, channels)


def _pick(params: Dict[str, float], cls) -> Any:
    return cls(**{f.name: params[f.name] for f in fields(cls) if f.name in params})


def _with_interval(icfg: IntegratorConfig, t_final: float, points: int) -> IntegratorConfig:
    if icfg.record_interval is not None:
        return icfg
    return icfg.with_overrides(record_interval=t_final / points)


# =========================
# Runners
# =========================
def _run_fig2(params: Dict[str, float], icfg: IntegratorConfig):
    omega1 = params["omega1"]
    p = UrpTwoAtomParams(
        omega1=omega1,
        omega2=omega1 / params["omega_ratio"],
        delta=params["delta_ratio"] * omega1,
        u_rr=params["delta_ratio"] * omega1,
    )
    basis, terms = build_two_atom_full(p)
    terms, _ = _frame({**params, "delta": p.delta}, basis, terms, [])
    obs = populations_of({f"P{s}": ket(basis, s) for s in ("11", "00", "10", "01")})
    t_final = params["t_final"]
    traj = evolve_master(terms, [], two_atom_initial_mixture(basis), t_final, _with_interval(icfg, t_final, 300), observables=obs)
    p11 = traj.observables["P11"]
    summary = {
        "in_urp_regime": p.in_urp_regime,
        "p11_max_drift": float(np.max(np.abs(p11 - 0.2))),
        "final_populations": {k: traj.final(k) for k in traj.observables},
    }
    return {"full": traj}, summary


def _run_fig4(params: Dict[str, float], icfg: IntegratorConfig):
    p = _pick(params, GateParams)
    t_gate = gate_time(p)
    icfg = _with_interval(icfg, t_gate, 200)
    psi0, psis = gate_states()
    obs = [ObservableSpec("fidelity", "overlap_amplitude", psis)]

    basis, full_terms, _ = build_gate_full(p)
    full_terms, _ = _frame(params, basis, full_terms, [])
    _, eff_terms = build_gate_effective(p)
    full, eff = run_parallel([
        lambda: evolve_unitary(full_terms, psi0, t_gate, icfg, observables=obs),
        lambda: evolve_unitary(eff_terms, psi0, t_gate, icfg, observables=obs),
    ])
    summary = {
        "gate_time": t_gate,
        "final_fidelity_full": full.final("fidelity"),
        "final_fidelity_effective": eff.final("fidelity"),
        "deviation": trajectory_deviation(full, eff, "fidelity"),
    }
    return {"full": full, "effective": eff}, summary


def _run_gate_dissipative(params: Dict[str, float], icfg: IntegratorConfig):
    p = _pick(params, GateParams)
    t_gate = gate_time(p)
    psi0, psis = gate_states()
    basis, terms, channels = build_gate_full(p)
    terms, channels = _frame(params, basis, terms, channels)
    traj = evolve_master(
        terms, channels, to_density(psi0), t_gate, _with_interval(icfg, t_gate, 100),
        observables=fidelities_of({"fidelity": psis}),
    )
    return {"full": traj}, {"gate_time": t_gate, "final_fidelity_full": traj.final("fidelity")}


def _aligned_interval(icfg: IntegratorConfig, window: float) -> IntegratorConfig:
    interval = icfg.record_interval or window / 10
    n = max(1, round(window / interval))
    return icfg.with_overrides(record_interval=window / n)


def _converge(terms, channels, rho0, icfg, obs, watch: str, window: float, rate_tol: float, t_cap: float) -> Trajectory:
    """Integrate in windows until |dF| / window < rate_tol for the watched observable, or t_cap."""
    traj = evolve_master(terms, channels, rho0, window, icfg, observables=obs)
    while traj.times[-1] < t_cap - 1e-9:
        before = traj.final(watch)
        t_end = min(traj.times[-1] + window, t_cap)
        more = evolve_master(terms, channels, traj.final_state, t_end, icfg, t0=traj.times[-1], observables=obs)
        traj = traj.extend(more)
        rate = abs(traj.final(watch) - before) / window
        logger.debug("convergence check at t=%g: rate %.3e", t_end, rate)
        if rate < rate_tol:
            break
    return traj


def _run_fig6(params: Dict[str, float], icfg: IntegratorConfig):
    p = _pick(params, BellParams)
    window = params["window"]
    icfg = _aligned_interval(icfg, window)
    states = bell_states()
    obs = fidelities_of({f"F_{k}": v for k, v in states.items()})

    basis, eff_terms, eff_channels = build_bell_effective(p)
    rho0 = bell_initial_mixture(basis)
    eff = _converge(eff_terms, eff_channels, rho0, icfg, obs, "F_phi_plus", window, params["rate_tol"], params["t_cap"])
    t_conv = float(eff.times[-1])
    logger.info("fig6 effective model converged at t = %g", t_conv)

    _, full_terms, full_channels = build_bell_full(p)
    full_terms, full_channels = _frame(params, basis, full_terms, full_channels)
    full = evolve_master(full_terms, full_channels, rho0, t_conv, icfg, observables=obs)

    report = reachable_steady_states(eff_terms, eff_channels, ground_indices(basis, ("0", "1")))
    summary = {
        "t_converged": t_conv,
        "final_full": {k: full.final(k) for k in full.observables},
        "final_effective": {k: eff.final(k) for k in eff.observables},
        "deviation": trajectory_deviation(full, eff, "F_phi_plus"),
        "steady_state": {
            **report.summary(),
            "fidelity_phi_plus": fidelity_sqrt(report.basis[0], states["phi_plus"]) if report.basis else 0.0,
        },
    }
    return {"full": full, "effective": eff}, summary


def _run_fig8(params: Dict[str, float], icfg: IntegratorConfig):
    p = _pick(params, ThreeDParams)
    t_final = params["t_final"]
    r2_decay = bool(params["r2_decay"])
    calibration = None
    if params["calibrate"]:
        calibration = calibrate_delta(p, t_eval=t_final, include_r2_decay=r2_decay)
        p = ThreeDParams(**{**p.as_dict(), "delta_small": calibration.delta_small})

    t1, t2 = threeD_states()
    basis, full_terms, full_channels = build_threeD_full(p)
    _, eff_terms, eff_channels = build_threeD_effective(p, include_r2_decay=r2_decay)
    named = {"F_T1": t1, **{f"F_{s}": ket(basis, s) for s in ("00", "11", "22")}}
    obs = fidelities_of(named)
    rho0 = threeD_initial_mixture(basis)
    icfg = _with_interval(icfg, t_final, 400)

    full_terms, full_channels = _frame(params, basis, full_terms, full_channels)
    full, eff = run_parallel([
        lambda: evolve_master(full_terms, full_channels, rho0, t_final, icfg, observables=obs),
        lambda: evolve_master(eff_terms, eff_channels, rho0, t_final, icfg, observables=obs),
    ])

    seeds = ground_indices(basis, ("0", "1", "2"))
    _, t0_terms, t0_channels = build_threeD_effective(ThreeDParams(**{**p.as_dict(), "delta_small": 0.0}))
    filtered_terms, filtered_channels = build_threeD_effective(p)[1:]
    unfiltered = reachable_steady_states(t0_terms, t0_channels, seeds)
    filtered = reachable_steady_states(filtered_terms, filtered_channels, seeds)

    summary = {
        "delta_small": p.delta_small,
        "final_full": {k: full.final(k) for k in full.observables},
        "final_effective": {k: eff.final(k) for k in eff.observables},
        "deviation": trajectory_deviation(full, eff, "F_T1"),
        "steady_state_delta0": unfiltered.summary(),
        "steady_state_filtered": {
            **filtered.summary(),
            "fidelity_T1": fidelity_sqrt(filtered.basis[0], t1) if filtered.basis else 0.0,
        },
    }
    if calibration is not None:
        summary["calibration"] = {"fidelity": calibration.fidelity, "scanned": calibration.scanned}
    return {"full": full, "effective": eff}, summary


def _qec_params(params: Dict[str, float], **extra) -> QecParams:
    return QecParams(
        omega1=params["omega1"], omega2=params["omega2"], delta=params["delta"], u_rr=params["u_rr"],
        kappa_e=params["kappa_e"], **extra,
    )


def _run_fig10(params: Dict[str, float], icfg: IntegratorConfig):
    p = _qec_params(params)
    t_final = params["t_final"]
    icfg = _with_interval(icfg, t_final, 200)
    psi_err, target = qec_states()
    obs = fidelities_of({"fidelity": target})

    basis, full_terms, full_channels = build_qec_full(p, rydberg_decay=params["gamma"])
    full_terms, full_channels = _frame(params, basis, full_terms, full_channels, ("p", "r"))
    jobs = [lambda: evolve_master(full_terms, full_channels, to_density(psi_err), t_final, icfg, observables=obs)]
    if params["compare_effective"]:
        _, eff_terms, eff_channels = build_qec_effective(p)
        jobs.append(lambda: evolve_master(eff_terms, eff_channels, to_density(psi_err), t_final, icfg, observables=obs))
    runs = run_parallel(jobs)

    trajectories = {"full": runs[0]}
    summary: Dict[str, Any] = {"kappa_e": p.kappa_e, "final_fidelity_full": runs[0].final("fidelity")}
    if len(runs) > 1:
        trajectories["effective"] = runs[1]
        summary["final_fidelity_effective"] = runs[1].final("fidelity")
        summary["deviation"] = trajectory_deviation(runs[0], runs[1], "fidelity")
    return trajectories, summary


def _with_gamma_t(traj: Trajectory, gamma_flip: float) -> Trajectory:
    traj.observables = {"gamma_t": traj.times * gamma_flip, **traj.observables}
    return traj


def _run_fig11(params: Dict[str, float], icfg: IntegratorConfig):
    _, target = qec_states()
    obs = fidelities_of({"fidelity": target})
    rho0 = to_density(target)
    points = int(params["record_points"])

    ratios = [500.0, 1000.0] + ([2000.0] if params["include_g2000"] else [])

    def corrected(ratio: float):
        # g = 1 sets the scale, so the flip rate is 1/ratio and Gamma t = 1 at t = ratio.
        p = _qec_params(params, gamma_flip=1.0 / ratio)
        basis, terms, channels = build_qec_full(p, include_noise=True)
        terms, channels = _frame(params, basis, terms, channels, ("p", "r"))
        logger.info("fig11: g = %g Gamma", ratio)
        traj = evolve_master(terms, channels, rho0, ratio, _with_interval(icfg, ratio, points), observables=obs)
        return _with_gamma_t(traj, p.gamma_flip)

    def baseline():
        # No correction: time in units of 1/Gamma.
        p = _qec_params(params, gamma_flip=1.0)
        _, terms, channels = build_qec_noise_only(p)
        traj = evolve_master(terms, channels, rho0, 1.0, _with_interval(icfg, 1.0, points), observables=obs)
        return _with_gamma_t(traj, 1.0)

    jobs = [baseline] + [lambda r=r: corrected(r) for r in ratios]
    names = ["baseline"] + [f"g{int(r)}" for r in ratios]
    runs = run_parallel(jobs)
    trajectories = dict(zip(names, runs))
    summary = {"fidelity_at_gamma_t_1": {k: v.final("fidelity") for k, v in trajectories.items()}}
    return trajectories, summary


# =========================
# Registry
# =========================
# Used as divisors or as integration spans.
_STRICTLY_POSITIVE = {"omega_ratio", "t_final", "record_points", "window", "t_cap"}

_FIG2_NOTE = "Panel parameters (delta_ratio, omega_ratio) are not printed for this panel; defaults are a departure from the reference setup."

_BELL = {"omega1": 1.0, "omega2": 0.02, "omega_mw": 0.01, "delta": 100.0, "u_rr": 100.0,
         "window": 100.0, "rate_tol": 1e-6, "t_cap": 10000.0, "rotating_frame": 0.0}
_QEC = {"omega1": 3.0, "omega2": 0.05, "delta": 800.0, "u_rr": 800.0, "kappa_e": 0.02, "rotating_frame": 0.0}


def _fig2(name: str, delta_ratio: float, omega_ratio: float, reference: bool) -> Experiment:
    return Experiment(
        name=name,
        description=f"Two-atom URP populations, delta/omega1={delta_ratio:g}, omega1/omega2={omega_ratio:g}",
        scheme="two-atom",
        defaults={"omega1": 1.0, "delta_ratio": delta_ratio, "omega_ratio": omega_ratio,
                  "t_final": 300.0, "rotating_frame": 0.0},
        runner=_run_fig2,
        integrator={"record_interval": 1.0},
        reference_defaults=reference,
        notes="" if reference else _FIG2_NOTE,
    )


REGISTRY: Dict[str, Experiment] = {
    e.name: e
    for e in [
        _fig2("fig2a", 10.0, 10.0, False),
        _fig2("fig2b", 20.0, 10.0, False),
        _fig2("fig2c", 50.0, 10.0, False),
        _fig2("fig2d", 50.0, 20.0, True),
        Experiment(
            name="fig4",
            description="Three-qubit controlled-phase gate, unitary fidelity, full vs effective",
            scheme="gate",
            defaults={"omega1": 1.0, "omega2": 0.05, "delta": 58.0, "u_rr": 58.0, "rotating_frame": 0.0},
            runner=_run_fig4,
        ),
        Experiment(
            name="gate-dissipative",
            description="Three-qubit gate with Rydberg decay gamma = 1 kHz (omega1 = 1 MHz)",
            scheme="gate",
            defaults={"omega1": 1.0, "omega2": 0.05, "delta": 58.0, "u_rr": 58.0, "gamma": 0.001,
                      "rotating_frame": 0.0},
            runner=_run_gate_dissipative,
        ),
        Experiment(
            name="fig6",
            description="Dissipative Bell-state preparation, full vs effective, converged fidelity",
            scheme="bell",
            defaults={**_BELL, "gamma": 0.05},
            runner=_run_fig6,
            integrator={"record_interval": 10.0},
        ),
        Experiment(
            name="fig6-exp",
            description="Bell-state preparation at the experimental parameter set (gamma = 0.03)",
            scheme="bell",
            defaults={**_BELL, "gamma": 0.03},
            runner=_run_fig6,
            integrator={"record_interval": 10.0},
        ),
        Experiment(
            name="fig8",
            description="Three-dimensional entangled state |T1>, calibrated delta, full vs effective",
            scheme="three-dimensional",
            defaults={"omega1": 1.0, "omega2": 0.02, "omega_mw1": 0.01, "omega_mw2": 0.01, "delta": 100.0,
                      "delta_small": 0.02, "u": 100.0, "gamma": 0.05, "t_final": 8000.0,
                      "calibrate": 1.0, "r2_decay": 1.0, "rotating_frame": 0.0},
            runner=_run_fig8,
            long_running=True,
            notes="r2_decay=1 adds the |r2>,|2r> decay channels to the effective model (departure from the reference setup).",
        ),
        Experiment(
            name="fig10",
            description="Autonomous correction of a single bit flip, full vs effective",
            scheme="qec",
            defaults={**_QEC, "t_final": 1000.0, "gamma": 0.0, "compare_effective": 1.0},
            runner=_run_fig10,
            long_running=True,
        ),
        Experiment(
            name="fig10-exp",
            description="Single-flip correction at the experimental parameter set with Rydberg decay",
            scheme="qec",
            defaults={**_QEC, "t_final": 1000.0, "gamma": 0.001, "compare_effective": 0.0},
            runner=_run_fig10,
            long_running=True,
        ),
        Experiment(
            name="fig11",
            description="Correction under continuous bit-flip noise, g in {500, 1000(, 2000)} Gamma plus no-correction baseline",
            scheme="qec",
            defaults={**_QEC, "include_g2000": 0.0, "record_points": 100.0},
            runner=_run_fig11,
            reduced={"delta": 200.0, "u_rr": 200.0},
            long_running=True,
            notes="g=2000 Gamma is opt-in (include_g2000=1); --reduced sets delta=u_rr=200 g and voids the reference tolerances.",
        ),
    ]
}


def list_experiments() -> List[Dict[str, Any]]:
    return [
        {
            "name": e.name,
            "scheme": e.scheme,
            "description": e.description,
            "defaults": dict(e.defaults),
            "long_running": e.long_running,
            "reference_defaults": e.reference_defaults,
            "notes": e.notes,
        }
        for e in REGISTRY.values()
    ]


# =========================
# Resolution + run
# =========================
def get_experiment(name: str) -> Experiment:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ConfigError(f"Unknown experiment {name!r}. Known: {sorted(REGISTRY)}.")


def resolve_parameters(exp: Experiment, cfg: ExperimentConfig) -> Dict[str, float]:
    unknown = sorted(set(cfg.overrides) - set(exp.defaults))
    if unknown:
        raise ConfigError(f"Unknown parameter(s) for {exp.name}: {unknown}. Allowed: {sorted(exp.defaults)}.")
    params = dict(exp.defaults)
    if cfg.reduced:
        if exp.reduced:
            logger.warning("%s: reduced setting %s, reference tolerances do not apply", exp.name, exp.reduced)
            params.update(exp.reduced)
        else:
            logger.warning("%s has no reduced setting; --reduced ignored", exp.name)
    for key, value in cfg.overrides.items():
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"Parameter {key} must be a number, got {value!r}.")
        if not math.isfinite(value):
            raise ConfigError(f"Parameter {key} must be finite, got {value}.")
        params[key] = value
    for key in _STRICTLY_POSITIVE & set(params):
        if not params[key] > 0:
            raise ConfigError(f"Parameter {key} must be > 0 for {exp.name}, got {params[key]}.")
    return params


def resolve_integrator(exp: Experiment, cfg: ExperimentConfig) -> IntegratorConfig:
    allowed = {f.name for f in fields(IntegratorConfig)}
    merged = {**exp.integrator, **cfg.integrator}
    if cfg.record_stride is not None:
        merged["record_stride"] = cfg.record_stride
    unknown = sorted(set(merged) - allowed)
    if unknown:
        raise ConfigError(f"Unknown integrator setting(s): {unknown}. Allowed: {sorted(allowed)}.")
    return IntegratorConfig(**merged)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    exp = get_experiment(cfg.experiment)
    params = resolve_parameters(exp, cfg)
    icfg = resolve_integrator(exp, cfg)
    logger.info("running %s (%s) with %s integrator", exp.name, exp.scheme, icfg.method)

    trajectories, summary = exp.runner(params, icfg)

    provenance = {
        "experiment": exp.name,
        "scheme": exp.scheme,
        "parameters": params,
        "integrator": asdict(icfg),
        "reduced": bool(cfg.reduced and exp.reduced),
        "reference_defaults": exp.reference_defaults,
        "notes": exp.notes,
        "code_version": settings.APP_VERSION,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    result = ExperimentResult(exp.name, trajectories, summary, provenance)
    if write:
        result.out_path = write_result(result, settings.out_dir(cfg.out_dir))
    return result
