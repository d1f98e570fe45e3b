"""Artifact writer for run outputs.

Every file is written to a temp file in the target directory and renamed
into place. CSVs go through pandas with ``%.17g`` floats and no index, so a
rerun with the same inputs reproduces them byte for byte.

Layout of an output directory::

    out/
    ├── v_T0.csv, v_T0.json     # field values + grid sidecar, one pair per checkpoint
    ├── manifest.json           # system, alpha, grid, solver params, wall clock, steps
    ├── report.json             # verification report
    ├── trajectory.csv          # t, x1..xn, u1..um
    ├── theta_log.csv           # interval, t_start, theta_hat
    └── convergence.csv         # T, sup_change
"""

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import pandas as pd

from cbvf.core.grid import Grid, ScalarField, ValueSeries
from cbvf.core.report import Report
from cbvf.systems.base import Trajectory

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def atomic_write_text(path: Path, text: str) -> Path:
    """Write ``text`` to ``path`` via a temp file in the same directory and a rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(suffix=".tmp", prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(temp_path, path)
    except Exception:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise
    return path


def write_frame(path: Path, frame: pd.DataFrame) -> Path:
    return atomic_write_text(
        path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    )


def write_json(path: Path, data: Any) -> Path:
    return atomic_write_text(path, json.dumps(data, indent=2) + "\n")


def field_frame(field: ScalarField) -> pd.DataFrame:
    """Columns ``x1..xn, value``, one row per node in row-major order."""
    states = field.grid.states()
    columns = {f"x{i + 1}": states[:, i] for i in range(field.grid.dim)}
    columns["value"] = field.flat
    return pd.DataFrame(columns)


def checkpoint_name(horizon: float) -> str:
    return f"v_T{horizon:g}"


def read_field(csv_path: Union[str, Path]) -> ScalarField:
    """Load a field written by :meth:`ArtifactWriter.write_field` (needs its JSON sidecar)."""
    csv_path = Path(csv_path)
    meta = json.loads(csv_path.with_suffix(".json").read_text(encoding="utf-8"))
    grid = Grid.from_dict(meta)
    frame = pd.read_csv(csv_path)
    return ScalarField(grid, frame["value"].to_numpy(dtype=float), meta.get("label", ""))


@dataclass
class RunManifest:
    """What a solve run computed and how long it took."""

    system: dict
    alpha: Optional[dict]
    grid: dict
    params: dict
    wall_clock: float = 0.0
    steps: int = 0
    files: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        """Serialize to dictionary."""
        return {
            "system": self.system,
            "alpha": self.alpha,
            "grid": self.grid,
            "params": self.params,
            "wall_clock": self.wall_clock,
            "steps": self.steps,
            "files": list(self.files),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        """Deserialize from dictionary."""
        return cls(
            system=data["system"],
            alpha=data.get("alpha"),
            grid=data["grid"],
            params=data.get("params", {}),
            wall_clock=float(data.get("wall_clock", 0.0)),
            steps=int(data.get("steps", 0)),
            files=list(data.get("files", [])),
        )


class ArtifactWriter:
    """Writes fields, reports and rollouts into one output directory."""

    def __init__(self, out_dir: Union[str, Path]) -> None:
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def _record(self, path: Path) -> Path:
        self.written.append(path)
        logger.debug("Wrote %s", path)
        return path

    def write_field(
        self, field: ScalarField, name: str, horizon: Optional[float] = None
    ) -> Path:
        """Write ``<name>.csv`` and its ``<name>.json`` grid sidecar; returns the CSV path."""
        csv_path = self.out_dir / f"{name}.csv"
        meta = field.grid.to_dict()
        meta["label"] = field.label
        meta["horizon"] = horizon
        write_frame(csv_path, field_frame(field))
        self._record(write_json(csv_path.with_suffix(".json"), meta))
        return self._record(csv_path)

    def write_series(self, series: ValueSeries) -> list[Path]:
        """One ``v_T<T>`` field per checkpoint."""
        return [
            self.write_field(f, checkpoint_name(horizon), horizon)
            for horizon, f in zip(series.checkpoints, series.fields)
        ]

    def write_manifest(self, manifest: RunManifest) -> Path:
        manifest.files = sorted(p.name for p in self.written)
        return self._record(write_json(self.out_dir / "manifest.json", manifest.to_dict()))

    def write_report(self, report: Report, name: str = "report.json") -> Path:
        return self._record(atomic_write_text(self.out_dir / name, report.to_json() + "\n"))

    def write_trajectory(self, trajectory: Trajectory, name: str = "trajectory.csv") -> Path:
        return self._record(write_frame(self.out_dir / name, trajectory.to_frame()))

    def write_theta_log(self, frame: pd.DataFrame, name: str = "theta_log.csv") -> Path:
        return self._record(write_frame(self.out_dir / name, frame))

    def write_history(self, frame: pd.DataFrame, name: str = "convergence.csv") -> Path:
        return self._record(write_frame(self.out_dir / name, frame))
