"""Versioned checkpoint files: JSON header plus raw little-endian blocks.

The header records the token vocabulary (and its hash), model dimensions,
the training configuration, and a parameter manifest with byte offsets.
Parameters are stored as raw float32 little-endian arrays so checkpoints
are portable and inspectable without torch.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Any

import numpy as np
import torch

from ..dsl import VOCAB
from .nets import ExecutionPolicy, ModelDims, ProgramVae

_MAGIC = b"KSCKPT1\n"


def vocab_hash() -> str:
    return hashlib.sha256("\n".join(VOCAB).encode()).hexdigest()


def save_checkpoint(path: str | Path, vae: ProgramVae, policy: ExecutionPolicy,
                    config: dict[str, Any] | None = None,
                    metrics: dict[str, Any] | None = None) -> None:
    params: list[tuple[str, torch.Tensor]] = []
    for prefix, module in (("vae", vae), ("policy", policy)):
        for name, tensor in module.state_dict().items():
            params.append((f"{prefix}.{name}", tensor))
    manifest = []
    offset = 0
    blobs = []
    for name, tensor in params:
        array = tensor.detach().cpu().numpy().astype("<f4")
        blobs.append(array.tobytes())
        manifest.append({"name": name, "shape": list(array.shape),
                         "offset": offset, "nbytes": len(blobs[-1])})
        offset += len(blobs[-1])
    header = {
        "format_version": 1,
        "vocab": list(VOCAB),
        "vocab_sha256": vocab_hash(),
        "dims": {"embed": vae.dims.embed, "hidden": vae.dims.hidden,
                 "latent": vae.dims.latent},
        "config": config or {},
        "metrics": metrics or {},
        "params": manifest,
    }
    header_bytes = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path: str | Path) -> tuple[ProgramVae, ExecutionPolicy, dict]:
    raw = Path(path).read_bytes()
    if raw[:len(_MAGIC)] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (header_len,) = struct.unpack_from("<I", raw, len(_MAGIC))
    start = len(_MAGIC) + 4
    header = json.loads(raw[start:start + header_len])
    if header["vocab_sha256"] != vocab_hash():
        raise ValueError(f"{path}: checkpoint vocabulary does not match this build")
    dims = ModelDims(**header["dims"])
    vae, policy = ProgramVae(dims), ExecutionPolicy(dims)
    base = start + header_len
    states: dict[str, dict[str, torch.Tensor]] = {"vae": {}, "policy": {}}
    for entry in header["params"]:
        array = np.frombuffer(raw, "<f4", entry["nbytes"] // 4,
                              base + entry["offset"]).reshape(entry["shape"])
        prefix, name = entry["name"].split(".", 1)
        states[prefix][name] = torch.from_numpy(array.copy())
    vae.load_state_dict(states["vae"])
    policy.load_state_dict(states["policy"])
    vae.eval()
    policy.eval()
    return vae, policy, header
