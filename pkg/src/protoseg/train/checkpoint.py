"""Self-describing checkpoint container.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON header,
then one contiguous blob of little-endian float64 values. The header maps
each parameter path to its shape and blob offset (in elements) and echoes
the run config and seed, so a checkpoint is loadable without the code that
wrote it.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ParseError

MAGIC = b"PSEGCKPT"
FORMAT_VERSION = 1


def _named_params(model_or_dict) -> dict:
    if isinstance(model_or_dict, dict):
        return {k: np.asarray(v, dtype=np.float64) for k, v in model_or_dict.items()}
    return {
        name: p.detach().cpu().numpy().astype(np.float64)
        for name, p in model_or_dict.named_parameters()
    }


def save_checkpoint(path, model_or_params, config: dict | None = None, seed: int | None = None) -> None:
    params = _named_params(model_or_params)
    entries = {}
    offset = 0
    chunks = []
    for name in sorted(params):
        arr = params[name]
        entries[name] = {"shape": list(arr.shape), "offset": offset}
        chunks.append(arr.ravel())
        offset += arr.size
    header = {
        "format_version": FORMAT_VERSION,
        "dtype": "<f8",
        "seed": seed,
        "config": config or {},
        "params": entries,
    }
    header_bytes = json.dumps(header).encode("utf-8")
    blob = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob.astype("<f8").tobytes())


def load_checkpoint(path):
    """Returns (params: {path: ndarray}, config: dict, seed)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise ParseError(f"not a checkpoint file (bad magic)", path=str(path))
    (header_len,) = struct.unpack("<Q", raw[len(MAGIC) : len(MAGIC) + 8])
    start = len(MAGIC) + 8
    try:
        header = json.loads(raw[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"corrupt checkpoint header: {exc}", path=str(path))
    if header.get("format_version") != FORMAT_VERSION:
        raise ParseError(
            f"unsupported checkpoint version {header.get('format_version')}",
            path=str(path),
            field="format_version",
        )
    blob = np.frombuffer(raw[start + header_len :], dtype="<f8")
    params = {}
    for name, entry in header["params"].items():
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        off = entry["offset"]
        if off + size > blob.size:
            raise ParseError(
                f"parameter {name} overruns the blob", path=str(path), field=name
            )
        params[name] = blob[off : off + size].reshape(shape).copy()
    return params, header.get("config", {}), header.get("seed")


def load_into(model, params: dict) -> None:
    """Copy loaded arrays into a torch model's parameters by path."""
    import torch

    model_params = dict(model.named_parameters())
    missing = set(model_params) - set(params)
    extra = set(params) - set(model_params)
    if missing or extra:
        raise ParseError(
            f"checkpoint/model mismatch: missing {sorted(missing)[:3]}, extra {sorted(extra)[:3]}"
        )
    with torch.no_grad():
        for name, p in model_params.items():
            arr = params[name]
            if tuple(arr.shape) != tuple(p.shape):
                raise ParseError(
                    f"parameter {name} has shape {arr.shape}, model expects {tuple(p.shape)}",
                    field=name,
                )
            p.copy_(torch.from_numpy(arr))
