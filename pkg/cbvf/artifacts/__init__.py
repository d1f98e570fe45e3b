"""Artifacts module - run configs and output files."""

from cbvf.artifacts.config import RunConfig, load_config, parse_config
from cbvf.artifacts.writer import ArtifactWriter, RunManifest, read_field

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "ArtifactWriter",
    "RunManifest",
    "read_field",
]
