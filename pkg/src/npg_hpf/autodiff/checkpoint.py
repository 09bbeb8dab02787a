from pathlib import Path
from typing import Mapping

import numpy as np
import yaml
from structlog import get_logger

log = get_logger(__package__)

"""Checkpoints of named parameters.

A checkpoint is a directory holding one raw binary file per parameter and a
manifest. Each binary file contains the parameter values as little-endian
32-bit floats in row-major order, with no header. The manifest is a YAML
file named 'manifest.yml':

    format: npg_hpf-checkpoint
    version: 1
    dtype: float32
    byteorder: little
    parameters:
      - name: alpha.agent.fc1.weight
        shape: [80, 64]
        file: alpha.agent.fc1.weight.f32
      ...
    metadata:
      <free-form mapping, e.g. the run configuration>
"""

MANIFEST_FILE = "manifest.yml"
FORMAT_NAME = "npg_hpf-checkpoint"
FORMAT_VERSION = 1
FILE_DTYPE = "<f4"


class CheckpointError(ValueError):
    """An exception raised when a checkpoint directory is incomplete or its
    manifest does not describe its files."""

    pass


def save_checkpoint(
    directory: Path | str,
    parameters: Mapping[str, np.ndarray],
    metadata: dict = None,
) -> Path:
    """Write parameters and a manifest to a directory, creating it if needed.

    Args:
        directory: The checkpoint directory.
        parameters: Parameter arrays keyed by name.
        metadata: Optional YAML-serializable mapping stored in the manifest.

    Returns:
        The path of the manifest.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    entries = []
    for name, value in parameters.items():
        value = np.ascontiguousarray(value, dtype=FILE_DTYPE)
        file_name = f"{name}.f32"
        value.tofile(directory / file_name)
        entries.append(
            {"name": name, "shape": list(value.shape), "file": file_name}
        )

    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dtype": "float32",
        "byteorder": "little",
        "parameters": entries,
        "metadata": metadata or {},
    }
    path = directory / MANIFEST_FILE
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=False)

    log.info("Checkpoint written", path=str(directory), n=len(entries))
    return path


def load_checkpoint(
    directory: Path | str,
) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint directory.

    Returns:
        Parameter arrays (float32) keyed by name, in manifest order, and the
        manifest metadata.
    """
    directory = Path(directory)
    path = directory / MANIFEST_FILE
    if not path.is_file():
        raise CheckpointError(f"No {MANIFEST_FILE} in {directory}")

    with open(path, encoding="utf-8") as f:
        manifest = yaml.safe_load(f)
    if manifest.get("format") != FORMAT_NAME:
        raise CheckpointError(f"{path} is not an {FORMAT_NAME} manifest")

    parameters = {}
    for entry in manifest["parameters"]:
        shape = tuple(int(n) for n in entry["shape"])
        values = np.fromfile(directory / entry["file"], dtype=FILE_DTYPE)
        if values.size != int(np.prod(shape)):
            raise CheckpointError(
                f"Parameter {entry['name']} has {values.size} values, "
                f"expected shape {shape}"
            )
        parameters[entry["name"]] = values.reshape(shape).astype(np.float32)

    return parameters, manifest.get("metadata") or {}
