"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic        8 bytes  b"BAMCKPT\\0"
    version      uint32
    for f, then g:
        num_layers   uint32
        dims         (num_layers + 1) x uint32
        bn flags     num_layers x uint8
    has_teacher  uint8
    tensors      float64 little-endian, row-major, in ``ModelParams.tensors()``
                 order for the student, then the teacher if present
"""

from __future__ import annotations

import struct

import numpy as np

from .encoder import Layer, MlpSpec, ModelParams
from .errors import CheckpointError

MAGIC = b"BAMCKPT\x00"
VERSION = 1


def _spec_bytes(spec: MlpSpec) -> bytes:
    out = struct.pack("<I", spec.num_layers)
    out += struct.pack(f"<{len(spec.layer_dims)}I", *spec.layer_dims)
    out += struct.pack(f"<{spec.num_layers}B", *map(int, spec.with_batchnorm))
    return out


def dumps(params: ModelParams, teacher: ModelParams | None = None) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION), _spec_bytes(params.spec_f),
             _spec_bytes(params.spec_g), struct.pack("<B", teacher is not None)]
    for p in [params] + ([teacher] if teacher is not None else []):
        for t in p.tensors():
            if not np.all(np.isfinite(t)):
                raise CheckpointError("refusing to write non-finite parameters")
            parts.append(np.ascontiguousarray(t, dtype="<f8").tobytes())
    return b"".join(parts)


def save(path, params: ModelParams, teacher: ModelParams | None = None):
    data = dumps(params, teacher)
    with open(path, "wb") as fh:
        fh.write(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_spec(r: _Reader) -> MlpSpec:
    (nl,) = r.unpack("<I")
    if not 1 <= nl <= 1024:
        raise CheckpointError(f"implausible layer count {nl}")
    dims = r.unpack(f"<{nl + 1}I")
    bn = r.unpack(f"<{nl}B")
    try:
        return MlpSpec(dims, tuple(bool(b) for b in bn))
    except ValueError as e:
        raise CheckpointError(f"bad layer spec: {e}") from None


def _empty_net(spec: MlpSpec):
    layers = []
    for l in range(spec.num_layers):
        a, b = spec.layer_dims[l], spec.layer_dims[l + 1]
        layer = Layer(np.empty((a, b)), np.empty(b))
        if spec.with_batchnorm[l]:
            layer.gamma, layer.beta = np.empty(b), np.empty(b)
            layer.running_mean, layer.running_var = np.empty(b), np.empty(b)
        layers.append(layer)
    return layers


def _fill(r: _Reader, params: ModelParams):
    for t in params.tensors():
        raw = r.take(t.size * 8)
        vals = np.frombuffer(raw, dtype="<f8").reshape(t.shape)
        if not np.all(np.isfinite(vals)):
            raise CheckpointError("checkpoint contains non-finite values")
        t[...] = vals


def loads(data: bytes):
    """Return ``(params, teacher_or_None)``."""
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("bad magic: not a checkpoint file")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    spec_f, spec_g = _read_spec(r), _read_spec(r)
    if spec_g.in_dim != spec_f.out_dim:
        raise CheckpointError("projector input does not match encoder output")
    (has_teacher,) = r.unpack("<B")
    params = ModelParams(spec_f, spec_g, _empty_net(spec_f), _empty_net(spec_g))
    _fill(r, params)
    teacher = None
    if has_teacher:
        teacher = ModelParams(spec_f, spec_g, _empty_net(spec_f), _empty_net(spec_g))
        _fill(r, teacher)
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return params, teacher


def load(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    return loads(data)
