"""MLP encoder ``f`` and projector ``g`` with a hand-written backward pass.

Layers are ``linear -> [batchnorm] -> relu`` on hidden layers and
``linear -> [batchnorm]`` on the output layer of each network.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ._rng import stream
from .errors import ConfigError, DataError, UsageError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class MlpSpec:
    layer_dims: tuple[int, ...]
    with_batchnorm: tuple[bool, ...] | bool = False

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or min(dims) < 1:
            raise ConfigError("layer_dims needs an input and >= 1 layer of positive width")
        object.__setattr__(self, "layer_dims", dims)
        bn = self.with_batchnorm
        if isinstance(bn, bool):
            bn = (bn,) * (len(dims) - 1)
        bn = tuple(bool(b) for b in bn)
        if len(bn) != len(dims) - 1:
            raise ConfigError("with_batchnorm needs one flag per layer")
        object.__setattr__(self, "with_batchnorm", bn)

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None
    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None

    @property
    def has_bn(self) -> bool:
        return self.gamma is not None

    def trainable(self):
        out = [self.weight, self.bias]
        if self.has_bn:
            out += [self.gamma, self.beta]
        return out

    def buffers(self):
        return [self.running_mean, self.running_var] if self.has_bn else []


@dataclass
class ModelParams:
    spec_f: MlpSpec
    spec_g: MlpSpec
    encoder: list[Layer]
    projector: list[Layer]

    def layers(self):
        return self.encoder + self.projector

    def trainable(self) -> list[np.ndarray]:
        """Trainable arrays in declaration order (live references, not copies)."""
        return [a for layer in self.layers() for a in layer.trainable()]

    def tensors(self) -> list[np.ndarray]:
        """Every stored array including batchnorm buffers, in declaration order."""
        out = []
        for layer in self.layers():
            out += layer.trainable() + layer.buffers()
        return out

    def copy(self) -> "ModelParams":
        return copy.deepcopy(self)

    def zeros_like(self) -> "ModelParams":
        p = self.copy()
        for a in p.tensors():
            a[...] = 0.0
        return p


@dataclass
class ForwardTape:
    x: np.ndarray
    f_cache: list = field(default_factory=list)
    g_cache: list = field(default_factory=list)
    train: bool = True
    # batch statistics per batchnorm layer: (net, layer index, mean, var)
    bn_stats: list = field(default_factory=list)


def _init_net(spec: MlpSpec, rng) -> list[Layer]:
    layers = []
    for l in range(spec.num_layers):
        fan_in, fan_out = spec.layer_dims[l], spec.layer_dims[l + 1]
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        layer = Layer(w, np.zeros(fan_out))
        if spec.with_batchnorm[l]:
            layer.gamma = np.ones(fan_out)
            layer.beta = np.zeros(fan_out)
            layer.running_mean = np.zeros(fan_out)
            layer.running_var = np.ones(fan_out)
        layers.append(layer)
    return layers


def init_params(spec_f: MlpSpec, spec_g: MlpSpec, seed: int) -> ModelParams:
    """He-uniform weights (bound ``sqrt(6 / fan_in)``), zero biases."""
    if spec_g.in_dim != spec_f.out_dim:
        raise ConfigError(
            f"projector input dim {spec_g.in_dim} != encoder output dim {spec_f.out_dim}")
    rng = stream(seed, "init")
    return ModelParams(spec_f, spec_g, _init_net(spec_f, rng), _init_net(spec_g, rng))


def _net_forward(layers, x, train, cache, bn_stats, tag):
    out = x
    last = len(layers) - 1
    for l, layer in enumerate(layers):
        inp = out
        pre = inp @ layer.weight + layer.bias
        entry = {"inp": inp, "pre": pre}
        y = pre
        if layer.has_bn:
            if train:
                mu = pre.mean(axis=0)
                var = pre.var(axis=0)
                bn_stats.append((tag, l, mu, var))
            else:
                mu, var = layer.running_mean, layer.running_var
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            xhat = (pre - mu) * inv_std
            entry.update(xhat=xhat, inv_std=inv_std)
            y = layer.gamma * xhat + layer.beta
        entry["act_in"] = y
        if l < last:
            y = np.maximum(y, 0.0)
        cache.append(entry)
        out = y
    return out


def forward(params: ModelParams, x, train: bool = True):
    """Return ``(h, z, tape)`` with ``h = f(x)`` and ``z = g(h)``.

    With ``train=False`` batchnorm layers use their running statistics.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.spec_f.in_dim:
        raise DataError(f"input must be (batch, {params.spec_f.in_dim})")
    if not np.all(np.isfinite(x)):
        raise DataError("input contains non-finite entries")
    tape = ForwardTape(x=x, train=train)
    h = _net_forward(params.encoder, x, train, tape.f_cache, tape.bn_stats, "f")
    z = _net_forward(params.projector, h, train, tape.g_cache, tape.bn_stats, "g")
    return h, z, tape


def _net_backward(layers, cache, dout, train, grads):
    last = len(layers) - 1
    for l in range(last, -1, -1):
        layer, entry, g = layers[l], cache[l], grads[l]
        d = dout
        if l < last:
            d = d * (entry["act_in"] > 0)
        if layer.has_bn:
            xhat, inv_std = entry["xhat"], entry["inv_std"]
            g.gamma[...] = (d * xhat).sum(axis=0)
            g.beta[...] = d.sum(axis=0)
            dxhat = d * layer.gamma
            if train:
                m = d.shape[0]
                d = inv_std / m * (m * dxhat - dxhat.sum(axis=0)
                                   - xhat * (dxhat * xhat).sum(axis=0))
            else:
                d = dxhat * inv_std
        g.weight[...] = entry["inp"].T @ d
        g.bias[...] = d.sum(axis=0)
        dout = d @ layer.weight.T
    return dout


def backward(params: ModelParams, tape: ForwardTape, dL_dz, dL_dh=None) -> ModelParams:
    """Gradients of a scalar loss w.r.t. every trainable array.

    ``dL_dh`` optionally adds a direct gradient on the encoder output.
    Batchnorm buffers in the returned object are zero.
    """
    dL_dz = np.asarray(dL_dz, dtype=np.float64)
    if not tape.g_cache or tape.g_cache[-1]["pre"].shape != dL_dz.shape:
        raise UsageError("dL_dz does not match the recorded forward pass")
    grads = params.zeros_like()
    dh = _net_backward(params.projector, tape.g_cache, dL_dz, tape.train, grads.projector)
    if dL_dh is not None:
        dh = dh + dL_dh
    _net_backward(params.encoder, tape.f_cache, dh, tape.train, grads.encoder)
    return grads


def update_running_stats(params: ModelParams, tape: ForwardTape, momentum: float = BN_MOMENTUM):
    """Fold the batch statistics recorded in ``tape`` into the running buffers (in place)."""
    for tag, l, mu, var in tape.bn_stats:
        layer = (params.encoder if tag == "f" else params.projector)[l]
        m = tape.x.shape[0]
        unbiased = var * m / max(m - 1, 1)
        layer.running_mean *= 1 - momentum
        layer.running_mean += momentum * mu
        layer.running_var *= 1 - momentum
        layer.running_var += momentum * unbiased


def _check_same_shapes(a: ModelParams, b: ModelParams):
    ta, tb = a.tensors(), b.tensors()
    if len(ta) != len(tb) or any(x.shape != y.shape for x, y in zip(ta, tb)):
        raise ConfigError("student and teacher parameter shapes differ")


def ema_update(student: ModelParams, teacher: ModelParams, momentum: float) -> ModelParams:
    """Return ``momentum * teacher + (1 - momentum) * student``, elementwise.

    Batchnorm running statistics are averaged the same way.
    """
    if not 0.0 <= momentum <= 1.0:
        raise ConfigError("momentum must lie in [0, 1]")
    _check_same_shapes(student, teacher)
    out = teacher.copy()
    for t, s in zip(out.tensors(), student.tensors()):
        t *= momentum
        t += (1.0 - momentum) * s
    return out


def grad_global_norm(grads: ModelParams) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.trainable())))
