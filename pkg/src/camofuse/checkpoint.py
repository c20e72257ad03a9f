"""Versioned checkpoint container.

Layout (all integers little-endian):
    magic   b"CFCK"
    version uint32
    config  uint64 byte length + UTF-8 flat config text
    count   uint32 number of entries
    entry   uint16 name length + UTF-8 name
            uint8 ndim + ndim * uint32 dims
            raw float32 little-endian payload (C order)

Every float parameter and buffer of the model is stored; integer
bookkeeping buffers (BatchNorm batch counters) are skipped since they do
not affect inference.
"""

import struct

import numpy as np
import torch

from .config import RunConfig, parse_config, serialize_config
from .errors import ConfigError

MAGIC = b"CFCK"
VERSION = 1
_SKIP_SUFFIX = "num_batches_tracked"


def _storable_state(model):
    state = {}
    for name, tensor in model.state_dict().items():
        if name.endswith(_SKIP_SUFFIX):
            continue
        state[name] = tensor
    return state


def save_checkpoint(path, model, cfg: RunConfig):
    state = _storable_state(model)
    config_bytes = serialize_config(cfg).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(config_bytes)))
        fh.write(config_bytes)
        fh.write(struct.pack("<I", len(state)))
        for name, tensor in state.items():
            payload = tensor.detach().cpu().numpy().astype("<f4", copy=False)
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<B", payload.ndim))
            fh.write(struct.pack(f"<{payload.ndim}I", *payload.shape))
            fh.write(payload.tobytes(order="C"))


def load_checkpoint(path):
    """Returns (state dict of float32 tensors, embedded RunConfig)."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ConfigError(f"{path} is not a checkpoint file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ConfigError(f"unsupported checkpoint version {version}")
        (cfg_len,) = struct.unpack("<Q", fh.read(8))
        cfg = parse_config(fh.read(cfg_len).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        state = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim)) if ndim else ()
            n = int(np.prod(dims)) if dims else 1
            buf = fh.read(4 * n)
            arr = np.frombuffer(buf, dtype="<f4").reshape(dims)
            state[name] = torch.from_numpy(arr.copy())
    return state, cfg


def restore_model(model, state):
    """Load a stored state into a freshly built model; key mismatches are
    named errors."""
    own = set(_storable_state(model))
    loaded = set(state)
    if own != loaded:
        missing = sorted(own - loaded)
        extra = sorted(loaded - own)
        raise ConfigError(
            f"checkpoint/model key mismatch (missing {missing[:3]}, extra {extra[:3]})"
        )
    model.load_state_dict(state, strict=False)  # counters excluded by design
    return model


def check_model_section(cfg_a: RunConfig, cfg_b: RunConfig):
    """Raise naming the first differing model key, if any."""
    from dataclasses import fields

    for f in fields(cfg_a.model):
        va, vb = getattr(cfg_a.model, f.name), getattr(cfg_b.model, f.name)
        if va != vb:
            raise ConfigError(
                f"config mismatch at model.{f.name}: {va!r} vs checkpoint {vb!r}"
            )
