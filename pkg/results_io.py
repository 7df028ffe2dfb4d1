"""
Result files: one CSV per trajectory (column t first, then one column per
observable) and a metadata.json with provenance and summary scalars, under
<out_root>/<experiment>/.
"""
import json
import logging
import os
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from dynamics import Trajectory
from errors import ResultsMissingError, UrpError
from run_index import insert_run

logger = logging.getLogger(__name__)

METADATA_FILE = "metadata.json"


def _plain(value: Any) -> Any:
    """numpy scalars/arrays -> JSON-plain python values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    df = pd.DataFrame({"t": traj.times})
    for name, values in traj.observables.items():
        df[name] = values
    return df


def write_trajectory(traj: Trajectory, path: str) -> None:
    trajectory_frame(traj).to_csv(path, index=False, float_format="%.17g", encoding="utf-8")


def write_result(result, out_root: str) -> str:
    """Writes every trajectory plus metadata.json; returns the experiment directory."""
    target = os.path.join(out_root, result.experiment)
    try:
        os.makedirs(target, exist_ok=True)
        files: List[str] = []
        for name, traj in result.trajectories.items():
            filename = f"{name}.csv"
            write_trajectory(traj, os.path.join(target, filename))
            files.append(filename)

        meta = {
            "provenance": _plain(result.provenance),
            "summary": _plain(result.summary),
            "trajectories": files,
        }
        with open(os.path.join(target, METADATA_FILE), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
    except OSError as e:
        raise UrpError(f"Unwritable output path {target}: {e}")

    logger.info("wrote %d trajectories for %s to %s", len(files), result.experiment, target)

    # If the index db is locked or read-only, the files above still stand.
    try:
        insert_run(out_root, result.experiment, target, meta)
    except Exception as e:
        logger.warning("could not record %s in the run index: %s", result.experiment, e)
    return target


def read_trajectory(path: str) -> Trajectory:
    if not os.path.isfile(path):
        raise ResultsMissingError(f"No trajectory file at {path}.")
    try:
        df = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except (OSError, ValueError) as e:
        raise UrpError(f"Cannot parse {path}: {e}")
    if df.empty or df.columns[0] != "t":
        raise UrpError(f"{path} is not a trajectory file (expected a leading 't' column).")
    return Trajectory(
        times=df["t"].to_numpy(dtype=float),
        observables={c: df[c].to_numpy(dtype=float) for c in df.columns[1:]},
    )


def read_metadata(experiment_dir: str) -> Dict[str, Any]:
    path = os.path.join(experiment_dir, METADATA_FILE)
    if not os.path.isfile(path):
        raise ResultsMissingError(f"No {METADATA_FILE} in {experiment_dir}.")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, ValueError) as e:
        raise UrpError(f"Cannot read {path}: {e}")


def read_result_dir(experiment_dir: str) -> Dict[str, Trajectory]:
    meta = read_metadata(experiment_dir)
    return {
        os.path.splitext(f)[0]: read_trajectory(os.path.join(experiment_dir, f))
        for f in meta.get("trajectories", [])
    }
