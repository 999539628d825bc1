"""Bit-exact array serialization for JSON documents.

Arrays are stored as little-endian float64 bytes in base64 plus an explicit
shape, so checkpoints round-trip exactly across platforms.
"""

from __future__ import annotations

import base64

import numpy as np


def encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.astype("<f8").tobytes()).decode("ascii"),
    }


def decode_array(doc: dict) -> np.ndarray:
    raw = base64.b64decode(doc["data"])
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return arr.reshape(doc["shape"]).copy()


def encode_state(slot: dict) -> dict:
    """Optimizer slot: arrays encoded, plain numbers kept as-is."""
    out = {}
    for k, v in slot.items():
        if isinstance(v, np.ndarray):
            out[k] = encode_array(v)
        else:
            out[k] = v
    return out


def decode_state(doc: dict) -> dict:
    out = {}
    for k, v in doc.items():
        if isinstance(v, dict) and "shape" in v and "data" in v:
            out[k] = decode_array(v)
        else:
            out[k] = v
    return out
