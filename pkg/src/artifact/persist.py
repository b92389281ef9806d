"""Binary array persistence with JSON sidecars.

Arrays are stored row-major as little-endian 8-byte reals (complex arrays as
interleaved re/im pairs, i.e. little-endian complex128).  The sidecar records
shape, dtype, byte order, a sha256 of the payload, and caller metadata, so a
stored field round-trips bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError

_DTYPES = {"float64": "<f8", "complex128": "<c16"}


def save_array(path_base, array: np.ndarray, meta: dict | None = None) -> Path:
    """Write array to path_base.bin with sidecar path_base.json."""
    base = Path(path_base)
    arr = np.asarray(array)
    if np.iscomplexobj(arr):
        arr = arr.astype("<c16", copy=False)
        dtype = "complex128"
    else:
        arr = arr.astype("<f8", copy=False)
        dtype = "float64"
    payload = np.ascontiguousarray(arr).tobytes()
    bin_path = base.with_suffix(".bin")
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    bin_path.write_bytes(payload)
    sidecar = {
        "shape": list(arr.shape),
        "dtype": dtype,
        "byte_order": "little",
        "order": "C",
        "sha256": hashlib.sha256(payload).hexdigest(),
        "meta": meta or {},
    }
    base.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True, indent=1))
    return bin_path


def load_array(path_base) -> tuple[np.ndarray, dict]:
    base = Path(path_base)
    sidecar = json.loads(base.with_suffix(".json").read_text())
    dtype = sidecar["dtype"]
    if dtype not in _DTYPES:
        raise ConfigError(f"unsupported dtype in sidecar: {dtype}")
    payload = base.with_suffix(".bin").read_bytes()
    digest = hashlib.sha256(payload).hexdigest()
    if digest != sidecar["sha256"]:
        raise ConfigError(f"payload hash mismatch for {base}")
    arr = np.frombuffer(payload, dtype=_DTYPES[dtype]).reshape(sidecar["shape"])
    return arr.copy(), sidecar.get("meta", {})
