# -*- coding: utf-8 -*-

from __future__ import absolute_import, annotations, unicode_literals

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from prepinn.utils import PrepinnException

from .grid import Field

log = logging.getLogger("net")

MLP = "mlp"
CONV = "conv"
KINDS = (MLP, CONV)
ACTIVATIONS = ("tanh", "gelu")

# first line of a parameter checkpoint
CHECKPOINT_MAGIC = "prepinn-params"
CHECKPOINT_VERSION = "1"


class NetException(PrepinnException):
    pass


def configure_torch():
    """
    Single-threaded, deterministic CPU execution.
    """
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True, warn_only=True)


@dataclass(frozen=True)
class Layer:
    name: str
    weight_shape: Tuple[int, ...]
    bias_shape: Tuple[int, ...]
    fan_in: int
    fan_out: int

    @property
    def size(self) -> int:
        return math.prod(self.weight_shape) + math.prod(self.bias_shape)


@dataclass(frozen=True)
class NetworkArch:
    """
    Network architecture. `mlp` applies the same per-point MLP at every node; `conv` is an
    encoder-decoder where `widths` lists the channels of the lifted input and of every
    stride-2 encoder stage.
    """

    kind: str = MLP
    widths: Tuple[int, ...] = (64, 64, 64)
    activation: str = "tanh"
    n_out: int = 1
    n_in: int = 2

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.kind not in KINDS:
            raise NetException(f"Unknown network kind '{self.kind}', expected one of {KINDS}.")
        if self.activation not in ACTIVATIONS:
            raise NetException(
                f"Unknown activation '{self.activation}', expected one of {ACTIVATIONS}."
            )
        if len(self.widths) < 1 or min(self.widths) < 1:
            raise NetException("At least one hidden layer of width >= 1 is required.")
        if self.kind == CONV and len(self.widths) < 2:
            raise NetException("The encoder-decoder needs at least two widths.")
        if self.n_out < 1 or self.n_in < 1:
            raise NetException("The network needs at least one input and one output.")

    @property
    def depth(self) -> int:
        """
        Number of stride-2 encoder stages.
        """
        return len(self.widths) - 1 if self.kind == CONV else 0

    def layers(self) -> List[Layer]:
        if self.kind == MLP:
            sizes = [self.n_in, *self.widths, self.n_out]
            return [
                Layer(f"dense{x}", (b, a), (b,), a, b)
                for x, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))
            ]
        w = self.widths
        layers = [Layer("lift", (w[0], self.n_in, 1, 1), (w[0],), self.n_in, w[0])]
        for x, (a, b) in enumerate(zip(w[:-1], w[1:])):
            layers.append(Layer(f"down{x}", (b, a, 4, 4), (b,), a * 16, b * 16))
        for x, (a, b) in enumerate(reversed(list(zip(w[:-1], w[1:])))):
            layers.append(Layer(f"up{x}", (a, b, 3, 3), (a,), b * 9, a * 9))
        layers.append(Layer("head", (self.n_out, w[0], 1, 1), (self.n_out,), w[0], self.n_out))
        return layers

    @property
    def n_params(self) -> int:
        return sum(layer.size for layer in self.layers())

    def check_grid(self, grid):
        if self.kind == CONV:
            d = 2**self.depth
            if grid.nx % d != 0 or grid.ny % d != 0:
                raise NetException(
                    f"The grid {grid.nx}x{grid.ny} is not divisible by 2^{self.depth}={d} "
                    f"required by the encoder-decoder."
                )

    def descriptor(self) -> str:
        return (
            f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION} kind={self.kind} "
            f"widths={','.join(str(w) for w in self.widths)} activation={self.activation} "
            f"n_in={self.n_in} n_out={self.n_out} count={self.n_params}"
        )

    @classmethod
    def from_descriptor(cls, line: str) -> Tuple["NetworkArch", int]:
        parts = line.strip().split()
        if len(parts) < 2 or parts[0] != CHECKPOINT_MAGIC:
            raise NetException("Not a parameter checkpoint.")
        if parts[1] != CHECKPOINT_VERSION:
            raise NetException(f"Unsupported checkpoint version {parts[1]}.")
        try:
            d = dict(p.split("=", 1) for p in parts[2:])
            arch = cls(
                kind=d["kind"],
                widths=tuple(int(x) for x in d["widths"].split(",")),
                activation=d["activation"],
                n_in=int(d["n_in"]),
                n_out=int(d["n_out"]),
            )
            return arch, int(d["count"])
        except (KeyError, ValueError) as e:
            raise NetException(f"Invalid checkpoint descriptor: {e}")


@dataclass(frozen=True, eq=False)
class ParameterSet:
    """
    All weights and biases of a network as one flat float64 array, layer by layer,
    weight before bias.
    """

    values: np.ndarray
    arch: NetworkArch

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size != self.arch.n_params:
            raise NetException(
                f"Parameter count {values.size} does not match the architecture ({self.arch.n_params})."
            )
        if not np.isfinite(values).all():
            raise NetException("The parameters contain non-finite values.")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values) -> "ParameterSet":
        return ParameterSet(values, self.arch)

    def split(self, flat=None):
        """
        Per-layer (weight, bias) views of `flat` (the own values by default; numpy array or tensor).
        """
        flat = self.values if flat is None else flat
        out, offset = [], 0
        for layer in self.arch.layers():
            nw = math.prod(layer.weight_shape)
            nb = math.prod(layer.bias_shape)
            w = flat[offset : offset + nw].reshape(layer.weight_shape)
            b = flat[offset + nw : offset + nw + nb].reshape(layer.bias_shape)
            out.append((w, b))
            offset += nw + nb
        return out


def init_params(arch: NetworkArch, seed: int) -> ParameterSet:
    """
    Glorot-uniform weights with bound sqrt(6/(fan_in+fan_out)) and zero biases.
    """
    rng = np.random.default_rng(seed)
    chunks = []
    for layer in arch.layers():
        bound = math.sqrt(6.0 / (layer.fan_in + layer.fan_out))
        chunks.append(rng.uniform(-bound, bound, size=math.prod(layer.weight_shape)))
        chunks.append(np.zeros(math.prod(layer.bias_shape)))
    return ParameterSet(np.concatenate(chunks), arch)


@dataclass(frozen=True, eq=False)
class Tape:
    """
    Recorded graph of one forward pass.
    """

    theta: torch.Tensor
    output: torch.Tensor
    params: np.ndarray


def _activation(name):
    return torch.tanh if name == "tanh" else F.gelu


def _mlp(arch, layers, X):
    act = _activation(arch.activation)
    n_in, ny, nx = X.shape
    x = X.reshape(n_in, -1).T
    for k, (w, b) in enumerate(layers):
        x = F.linear(x, w, b)
        if k < len(layers) - 1:
            x = act(x)
    return x.T.reshape(arch.n_out, ny, nx)


def _conv(arch, layers, X):
    act = _activation(arch.activation)
    depth = arch.depth
    x = act(F.conv2d(X[None], *layers[0]))
    for w, b in layers[1 : 1 + depth]:
        x = act(F.conv2d(x, w, b, stride=2, padding=1))
    for w, b in layers[1 + depth : 1 + 2 * depth]:
        x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
        x = act(F.conv2d(x, w, b, padding=1))
    return F.conv2d(x, *layers[-1])[0]


def forward(params: ParameterSet, coords: Field, names: Optional[Sequence[str]] = None):
    """
    Evaluate the network at every node of `coords` and return the output field together
    with the tape needed by `backward`.
    """
    arch = params.arch
    if coords.n_components != arch.n_in:
        raise NetException(
            f"The network expects {arch.n_in} input channels, found {coords.n_components}."
        )
    arch.check_grid(coords.grid)
    with torch.enable_grad():
        theta = torch.tensor(params.values, dtype=torch.float64, requires_grad=True)
        layers = params.split(theta)
        X = torch.as_tensor(np.array(coords.values), dtype=torch.float64)
        output = _mlp(arch, layers, X) if arch.kind == MLP else _conv(arch, layers, X)
    values = output.detach().numpy().copy()
    if not np.isfinite(values).all():
        raise NetException("The network output contains non-finite values.")
    return Field(coords.grid, values, tuple(names or ())), Tape(theta, output, params.values)


def backward(tape: Tape, seed, params: Optional[ParameterSet] = None) -> np.ndarray:
    """
    Parameter gradient of a loss whose gradient with respect to the network output is `seed`.
    """
    seed = np.asarray(seed, dtype=np.float64)
    if seed.shape != tuple(tape.output.shape):
        try:
            seed = seed.reshape(tuple(tape.output.shape))
        except ValueError:
            raise NetException(
                f"The seed of shape {seed.shape} does not match the output {tuple(tape.output.shape)}."
            )
    if params is not None and not np.array_equal(params.values, tape.params):
        raise NetException("Stale tape: it was recorded with different parameters.")
    (grad,) = torch.autograd.grad(
        tape.output,
        tape.theta,
        grad_outputs=torch.as_tensor(seed, dtype=torch.float64),
        retain_graph=True,
    )
    return grad.detach().numpy().copy()


def params_bytes(params: ParameterSet) -> bytes:
    """
    Checkpoint layout: the architecture descriptor line terminated by a newline, then
    the parameters as little-endian float64 values.
    """
    return (params.arch.descriptor() + "\n").encode("ascii") + params.values.astype("<f8").tobytes()


def params_from_bytes(data: bytes) -> ParameterSet:
    nl = data.find(b"\n")
    if nl < 0:
        raise NetException("The checkpoint has no descriptor line.")
    arch, count = NetworkArch.from_descriptor(data[:nl].decode("ascii", errors="replace"))
    body = data[nl + 1 :]
    if len(body) != 8 * count:
        raise NetException(f"The checkpoint holds {len(body)} bytes, expected {8 * count}.")
    return ParameterSet(np.frombuffer(body, dtype="<f8").astype(np.float64), arch)


def load_params(path) -> ParameterSet:
    with open(path, "rb") as f:
        return params_from_bytes(f.read())
