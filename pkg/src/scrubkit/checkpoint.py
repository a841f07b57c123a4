"""Binary checkpoint files for model parameters.

Layout (all integers little-endian):

    offset  size  field
    0       4     magic "UFCK"
    4       4     u32 format version (currently 1)
    8       4     u32 layer count (len(layer_sizes))
    12      4*n   u32 layer_sizes
    ...     1     u8 activation tag (0 = relu, 1 = tanh)
    ...     8     u64 init seed
    ...     8*d   f64 parameter values, flat layout

d is derived from layer_sizes, so truncated or padded files are rejected.
"""

import struct

import numpy as np

from .nn import ModelSpec

MAGIC = b"UFCK"
VERSION = 1
_ACT_TAGS = {"relu": 0, "tanh": 1}
_ACT_NAMES = {v: k for k, v in _ACT_TAGS.items()}


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, spec, params):
    params = np.ascontiguousarray(params, dtype=np.float64)
    if params.shape != (spec.num_params,):
        raise CheckpointError(f"parameter vector of length {params.size} does not fit spec (d={spec.num_params})")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(spec.layer_sizes)))
        f.write(struct.pack(f"<{len(spec.layer_sizes)}I", *spec.layer_sizes))
        f.write(struct.pack("<BQ", _ACT_TAGS[spec.activation], spec.seed))
        f.write(params.astype("<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    try:
        version, n_layers = struct.unpack_from("<II", blob, 4)
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        sizes = struct.unpack_from(f"<{n_layers}I", blob, 12)
        act_tag, seed = struct.unpack_from("<BQ", blob, 12 + 4 * n_layers)
    except struct.error as e:
        raise CheckpointError(f"{path}: truncated header ({e})") from e
    if act_tag not in _ACT_NAMES:
        raise CheckpointError(f"{path}: unknown activation tag {act_tag}")
    spec = ModelSpec(sizes, _ACT_NAMES[act_tag], seed)
    off = 12 + 4 * n_layers + 9
    expected = off + 8 * spec.num_params
    if len(blob) != expected:
        raise CheckpointError(f"{path}: expected {expected} bytes, found {len(blob)}")
    params = np.frombuffer(blob, dtype="<f8", count=spec.num_params, offset=off).copy()
    return spec, params
