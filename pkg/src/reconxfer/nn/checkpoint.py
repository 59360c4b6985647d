"""Binary model checkpoints.

Layout (little-endian): magic b"RTLM", u32 format version, u32 layer
count; then per layer u32 in_dim, u32 out_dim, u8 activation code,
row-major f64 weights (out_dim * in_dim), f64 biases (out_dim), u8 frozen.
"""

import struct

import numpy as np

from ..errors import DataError
from .mlp import ACTIVATIONS, DenseLayer, Mlp

MAGIC = b"RTLM"
FORMAT_VERSION = 1

_ACT_CODE = {name: i for i, name in enumerate(ACTIVATIONS)}
_ACT_NAME = dict(enumerate(ACTIVATIONS))


def save_mlp(path, model: Mlp) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(model.layers)))
        for k, layer in enumerate(model.layers):
            fh.write(struct.pack("<IIB", layer.in_dim, layer.out_dim,
                                 _ACT_CODE[layer.activation]))
            fh.write(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.biases, dtype="<f8").tobytes())
            fh.write(struct.pack("<B", int(model.frozen[k])))


def load_mlp(path) -> Mlp:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise DataError(f"{path}: not a model checkpoint (bad magic {blob[:4]!r})")
    version, n_layers = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    offset = 12
    layers, frozen = [], []
    for _ in range(n_layers):
        in_dim, out_dim, act_code = struct.unpack_from("<IIB", blob, offset)
        offset += 9
        if act_code not in _ACT_NAME:
            raise DataError(f"{path}: unknown activation code {act_code}")
        w_bytes = out_dim * in_dim * 8
        need = w_bytes + out_dim * 8 + 1
        if offset + need > len(blob):
            raise DataError(f"{path}: truncated checkpoint")
        w = np.frombuffer(blob, dtype="<f8", count=out_dim * in_dim,
                          offset=offset).reshape(out_dim, in_dim).copy()
        offset += w_bytes
        b = np.frombuffer(blob, dtype="<f8", count=out_dim, offset=offset).copy()
        offset += out_dim * 8
        frozen.append(bool(blob[offset]))
        offset += 1
        layers.append(DenseLayer(w, b, _ACT_NAME[act_code]))
    return Mlp(layers, np.array(frozen, dtype=bool))
