"""MPS checkpoints: an ``.npz`` archive of site tensors plus a JSON sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mps import MpsState

FORMAT_VERSION = 1


def save_checkpoint(state: MpsState, stem, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.npz`` and ``<stem>.json``; returns both paths.

    Arrays are stored uncompressed with their dtype and shape, so a reload is
    bit-identical.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    npz = stem.with_suffix(".npz")
    side = stem.with_suffix(".json")
    arrays = {f"site_{i:04d}": t for i, t in enumerate(state.tensors)}
    with open(npz, "wb") as fh:
        np.savez(fh, **arrays)
    meta = {
        "format_version": FORMAT_VERSION,
        "n_sites": state.n_sites,
        "center": state.center,
        "time": state.time,
        "bond_dims": state.bond_dims,
        "shapes": [list(t.shape) for t in state.tensors],
        "max_projection_error": state.max_projection_error,
        "capped": state.capped,
    }
    if extra:
        meta.update(extra)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return npz, side


def load_checkpoint(stem) -> tuple[MpsState, dict]:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {meta.get('format_version')!r}")
    with np.load(stem.with_suffix(".npz")) as data:
        tensors = [data[f"site_{i:04d}"] for i in range(meta["n_sites"])]
    for t, shape in zip(tensors, meta["shapes"]):
        if list(t.shape) != shape:
            raise ValueError("checkpoint tensor shape does not match its sidecar")
    state = MpsState(tensors, center=meta["center"], time=meta["time"])
    state.max_projection_error = meta["max_projection_error"]
    state.capped = meta["capped"]
    return state, meta
