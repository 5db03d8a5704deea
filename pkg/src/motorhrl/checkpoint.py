"""Checkpoint files: a JSON manifest followed by little-endian float32 blobs.

Layout::

    MHRL-CKPT 1\\n
    <manifest byte length as decimal>\\n
    <UTF-8 JSON manifest>
    <concatenated '<f4' arrays>

The manifest lists ``groups -> [{name, shape, offset, nbytes}]`` plus free-form
``meta``. Offsets are relative to the start of the blob section.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

MAGIC = b"MHRL-CKPT 1\n"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, groups: dict[str, dict[str, np.ndarray]], meta: dict | None = None) -> None:
    entries: dict[str, list[dict]] = {}
    blobs: list[bytes] = []
    offset = 0
    for gname in sorted(groups):
        entries[gname] = []
        for pname, arr in groups[gname].items():
            raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
            entries[gname].append({"name": pname, "shape": list(np.shape(arr)), "offset": offset, "nbytes": len(raw)})
            blobs.append(raw)
            offset += len(raw)
    manifest = json.dumps({"groups": entries, "meta": meta or {}}, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(f"{len(manifest)}\n".encode())
        fh.write(manifest)
        for b in blobs:
            fh.write(b)
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[dict[str, dict[str, np.ndarray]], dict]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)
    nl = data.index(b"\n", pos)
    mlen = int(data[pos:nl])
    manifest = json.loads(data[nl + 1 : nl + 1 + mlen].decode("utf-8"))
    blob = memoryview(data)[nl + 1 + mlen :]
    groups: dict[str, dict[str, np.ndarray]] = {}
    for gname, items in manifest["groups"].items():
        groups[gname] = {}
        for it in items:
            chunk = blob[it["offset"] : it["offset"] + it["nbytes"]]
            arr = np.frombuffer(chunk, dtype="<f4").astype(np.float32).reshape(it["shape"])
            groups[gname][it["name"]] = arr
    return groups, manifest["meta"]


def group_hash(group: dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    for name in sorted(group):
        h.update(name.encode())
        h.update(np.ascontiguousarray(group[name], dtype="<f4").tobytes())
    return h.hexdigest()


def params_to_group(named: dict) -> dict[str, np.ndarray]:
    return {k: v.data.copy() for k, v in named.items()}


def load_group_into(named: dict, group: dict[str, np.ndarray], what: str) -> None:
    for k, t in named.items():
        if k not in group:
            raise CheckpointError(f"{what}: missing parameter {k!r}")
        if tuple(group[k].shape) != tuple(t.shape):
            raise CheckpointError(f"{what}: shape mismatch for {k!r}: {group[k].shape} vs {t.shape}")
        t.data = group[k].astype(np.float32).copy()
