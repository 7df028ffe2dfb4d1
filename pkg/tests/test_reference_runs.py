"""
Full-scale runs at the registry defaults, checked with the same criteria
the `check` command uses. Enable with --runslow (and --runlong for g = 2000).
"""
import numpy as np
import pytest

from acceptance import check_acceptance
from experiments import ExperimentConfig, run_experiment


def _run_and_check(tmp_path, name, **overrides):
    root = str(tmp_path / "res")
    result = run_experiment(ExperimentConfig(name, overrides=overrides, out_dir=root))
    report, ok = check_acceptance(root, [name])
    assert ok, report.to_string()
    return result


@pytest.mark.slow
@pytest.mark.parametrize("name", ["fig2d", "fig4", "gate-dissipative", "fig6", "fig6-exp"])
def test_fast_reference_runs(tmp_path, name):
    _run_and_check(tmp_path, name)


@pytest.mark.slow
def test_three_dimensional_entanglement(tmp_path):
    result = _run_and_check(tmp_path, "fig8")
    assert result.summary["steady_state_delta0"]["null_dimension"] >= 2


@pytest.mark.slow
@pytest.mark.parametrize("name", ["fig10", "fig10-exp"])
def test_single_flip_correction(tmp_path, name):
    _run_and_check(tmp_path, name)


@pytest.mark.slow
def test_continuous_noise_sweep(tmp_path):
    result = _run_and_check(tmp_path, "fig11")
    assert set(result.trajectories) == {"baseline", "g500", "g1000"}
    finals = [result.trajectories[k].final("fidelity") for k in ("baseline", "g500", "g1000")]
    assert finals == sorted(finals)


@pytest.mark.long
def test_continuous_noise_sweep_with_strongest_coupling(tmp_path):
    result = _run_and_check(tmp_path, "fig11", include_g2000=1.0)
    assert result.trajectories["g2000"].final("fidelity") > result.trajectories["g1000"].final("fidelity")


@pytest.mark.slow
@pytest.mark.parametrize("omega_ratio", [10.0, 20.0])
def test_freezing_improves_with_detuning(omega_ratio):
    drifts = []
    for name in ("fig2a", "fig2b", "fig2c"):
        cfg = ExperimentConfig(name, overrides={"omega_ratio": omega_ratio})
        result = run_experiment(cfg, write=False)
        drifts.append(result.summary["p11_max_drift"])
    assert drifts == sorted(drifts, reverse=True)
    assert np.all(np.isfinite(drifts))
