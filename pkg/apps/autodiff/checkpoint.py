"""
Checkpoint files
================
One header line of structured text followed by raw tensor blocks::

    {"format": "vgm2p-checkpoint/1", "config_hash": ..., "meta": {...},
     "networks": [{"name": ..., "sizes": [...], "activations": [...], "seed": ...}]}\\n
    <weight_0><bias_0><weight_1>...   (network order, then layer order)

Each block is row-major little-endian float64.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import numpy as np

from apps.core.exceptions import DatasetError
from apps.core.renderers import parse_document, render_line

from .mlp import Layer, MlpParams

logger = logging.getLogger(__name__)

FORMAT_TAG = "vgm2p-checkpoint/1"
_DTYPE = np.dtype("<f8")


def save_checkpoint(
    path: str | Path,
    networks: dict[str, MlpParams],
    *,
    config_hash: str = "",
    meta: dict[str, Any] | None = None,
) -> Path:
    path = Path(path)
    header = {
        "format": FORMAT_TAG,
        "config_hash": config_hash,
        "meta": meta or {},
        "networks": [
            {
                "name": name,
                "sizes": params.sizes,
                "activations": list(params.activations),
                "seed": params.seed,
            }
            for name, params in networks.items()
        ],
    }
    with open(path, "wb") as fh:
        fh.write(render_line(header) + b"\n")
        for params in networks.values():
            for array in params.arrays():
                fh.write(np.ascontiguousarray(array, dtype=_DTYPE).tobytes(order="C"))
    logger.info("Checkpoint written to %s (%d network(s)).", path, len(networks))
    return path


def load_checkpoint(path: str | Path) -> tuple[dict[str, MlpParams], dict[str, Any]]:
    """Return ``(networks, header)``."""
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise DatasetError(f"{path}: missing checkpoint header")
    header = parse_document(raw[:newline])
    if header.get("format") != FORMAT_TAG:
        raise DatasetError(f"{path}: unknown checkpoint format {header.get('format')!r}")

    offset = newline + 1
    networks: dict[str, MlpParams] = {}
    for spec in header["networks"]:
        sizes = spec["sizes"]
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weight, offset = _read_block(raw, offset, (fan_out, fan_in), path)
            bias, offset = _read_block(raw, offset, (fan_out,), path)
            layers.append(Layer(weight=weight, bias=bias))
        networks[spec["name"]] = MlpParams(
            layers=tuple(layers),
            activations=tuple(spec["activations"]),
            seed=int(spec["seed"]),
        )
    if offset != len(raw):
        raise DatasetError(f"{path}: {len(raw) - offset} trailing byte(s) after last block")
    return networks, header


def _read_block(raw: bytes, offset: int, shape: tuple[int, ...], path) -> tuple[np.ndarray, int]:
    count = int(np.prod(shape))
    end = offset + count * _DTYPE.itemsize
    if end > len(raw):
        raise DatasetError(f"{path}: truncated tensor block")
    block = np.frombuffer(raw, dtype=_DTYPE, count=count, offset=offset)
    return block.astype(np.float64).reshape(shape), end
