"""Tests for the artifact writer."""

import json

import numpy as np
import pandas as pd
import pytest

from cbvf.artifacts.writer import ArtifactWriter, RunManifest, read_field
from cbvf.core.report import Report
from cbvf.systems.base import ControlSignal, flow
from cbvf.systems.builtin import DOUBLE_INTEGRATOR


class TestWriteField:
    """Tests for field CSVs and their sidecars."""

    def test_csv_and_sidecar(self, temp_dir, tent):
        """Test the CSV header and the grid sidecar."""
        writer = ArtifactWriter(temp_dir)
        path = writer.write_field(tent, "v_T0", 0.0)

        assert path.read_text(encoding="utf-8").splitlines()[0] == "x1,value"
        meta = json.loads((temp_dir / "v_T0.json").read_text(encoding="utf-8"))
        assert meta["counts"] == [301]
        assert meta["label"] == "tent"
        assert meta["horizon"] == 0.0

    def test_read_back(self, temp_dir, slab_field):
        """Test fields are read back exactly."""
        path = ArtifactWriter(temp_dir).write_field(slab_field, "slab")
        restored = read_field(path)

        assert restored.grid == slab_field.grid
        np.testing.assert_array_equal(restored.values, slab_field.values)

    def test_no_temp_files(self, temp_dir, tent):
        """Test atomic writes leave no temp files behind."""
        ArtifactWriter(temp_dir).write_field(tent, "tent")
        assert not [p for p in temp_dir.iterdir() if p.suffix == ".tmp"]

    def test_creates_directory(self, temp_dir, tent):
        """Test the output directory is created on demand."""
        writer = ArtifactWriter(temp_dir / "nested" / "out")
        assert writer.write_field(tent, "tent").exists()


class TestWriteSeries:
    """Tests for series output and reproducibility."""

    def test_checkpoint_names(self, temp_dir, scalar_series):
        """Test one field per checkpoint named by its horizon."""
        paths = ArtifactWriter(temp_dir).write_series(scalar_series)
        names = [p.name for p in paths]

        assert names[:3] == ["v_T0.csv", "v_T0.25.csv", "v_T0.5.csv"]
        assert names[-1] == "v_T2.csv"
        assert len(names) == 9

    def test_byte_identical_rewrite(self, temp_dir, scalar_series):
        """Test writing the same series twice gives identical bytes."""
        first = ArtifactWriter(temp_dir / "a").write_series(scalar_series)
        second = ArtifactWriter(temp_dir / "b").write_series(scalar_series)
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes()


class TestOtherArtifacts:
    """Tests for manifests, reports and tables."""

    def test_manifest_lists_files(self, temp_dir, tent):
        """Test the manifest records every file written before it."""
        writer = ArtifactWriter(temp_dir)
        writer.write_field(tent, "v_T0", 0.0)
        writer.write_manifest(
            RunManifest(system={"name": "scalar_example"}, alpha=None, grid={}, params={})
        )

        data = json.loads((temp_dir / "manifest.json").read_text(encoding="utf-8"))
        assert data["files"] == ["v_T0.csv", "v_T0.json"]
        assert RunManifest.from_dict(data).system == {"name": "scalar_example"}

    def test_report(self, temp_dir):
        """Test the report is written as JSON."""
        path = ArtifactWriter(temp_dir).write_report(Report(verdict="pass", label="check"))
        assert json.loads(path.read_text(encoding="utf-8"))["verdict"] == "pass"

    def test_trajectory(self, temp_dir):
        """Test the trajectory table header."""
        trajectory = flow(DOUBLE_INTEGRATOR, [0.0, 0.0], ControlSignal.constant(1.0, 0.1), 0.1)
        path = ArtifactWriter(temp_dir).write_trajectory(trajectory)

        frame = pd.read_csv(path)
        assert list(frame.columns) == ["t", "x1", "x2", "u1"]
        assert frame["x1"].iloc[-1] == pytest.approx(0.005)

    def test_history(self, temp_dir):
        """Test the convergence table."""
        frame = pd.DataFrame([(0.25, 0.1), (0.5, 0.01)], columns=["T", "sup_change"])
        path = ArtifactWriter(temp_dir).write_history(frame)
        assert path.read_text(encoding="utf-8").splitlines()[0] == "T,sup_change"
