"""Feedforward network representation, forward evaluation and JSON loading.

A network is an ordered list of layers, each either an affine map or an
elementwise activation (ReLU or tanh).  Layer dimensions must chain: the
column count of every affine layer equals the width produced by the stage
before it, activations preserve width, and the final width equals the
declared output dimension.

The JSON wire format is::

    {"input_dim": n, "output_dim": m,
     "layers": [{"type": "affine", "weight": [[...], ...], "bias": [...]},
                {"type": "relu"} | {"type": "tanh"}, ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParseError

ACTIVATION_KINDS = ("relu", "tanh")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Affine:
    """Dense affine layer ``x -> weight @ x + bias``."""

    weight: np.ndarray  # (rows, cols)
    bias: np.ndarray  # (rows,)

    def __post_init__(self):
        object.__setattr__(self, "weight", _readonly(np.atleast_2d(self.weight)))
        object.__setattr__(self, "bias", _readonly(np.atleast_1d(self.bias)))
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise DimensionError("affine layer expects a 2-d weight and 1-d bias")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise DimensionError(
                f"weight has {self.weight.shape[0]} rows but bias has "
                f"{self.bias.shape[0]} entries"
            )
        if not np.isfinite(self.weight).all() or not np.isfinite(self.bias).all():
            raise ValueError("affine layer contains non-finite entries")

    @property
    def rows(self) -> int:
        return self.weight.shape[0]

    @property
    def cols(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True)
class Activation:
    """Elementwise activation layer, ``kind`` in {"relu", "tanh"}."""

    kind: str

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ParseError(f"unknown activation kind {self.kind!r}")


Layer = Affine | Activation


@dataclass(frozen=True)
class Network:
    """Immutable feedforward network ``f: R^input_dim -> R^output_dim``."""

    layers: tuple[Layer, ...]
    input_dim: int
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.input_dim < 1 or self.output_dim < 1:
            raise DimensionError("input_dim and output_dim must be positive")
        width = self.input_dim
        for k, layer in enumerate(self.layers):
            if isinstance(layer, Affine):
                if layer.cols != width:
                    raise DimensionError(
                        f"layer {k}: affine expects {layer.cols} inputs but the "
                        f"preceding stage produces {width}"
                    )
                width = layer.rows
            elif isinstance(layer, Activation):
                pass  # activations preserve width
            else:
                raise ParseError(f"layer {k} has unsupported type {type(layer)!r}")
        if width != self.output_dim:
            raise DimensionError(
                f"final stage width {width} does not match output_dim "
                f"{self.output_dim}"
            )


def load_network(source: str | bytes | dict) -> Network:
    """Parse the JSON network format into a dimension-checked Network.

    ``source`` may be the JSON text itself or an already-decoded dict.
    Raises ParseError for malformed documents, DimensionError for chain
    mismatches and ValueError for non-finite entries.
    """
    if isinstance(source, (str, bytes)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ParseError("network document must be a JSON object")
    try:
        input_dim = int(doc["input_dim"])
        output_dim = int(doc["output_dim"])
        raw_layers = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"missing or malformed top-level field: {exc}") from exc
    if not isinstance(raw_layers, list):
        raise ParseError("'layers' must be a list")

    layers: list[Layer] = []
    for k, entry in enumerate(raw_layers):
        if not isinstance(entry, dict) or "type" not in entry:
            raise ParseError(f"layer {k} must be an object with a 'type' field")
        kind = entry["type"]
        if kind == "affine":
            try:
                weight = np.array(entry["weight"], dtype=np.float64)
                bias = np.array(entry["bias"], dtype=np.float64)
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"layer {k}: bad affine payload: {exc}") from exc
            if weight.ndim != 2:
                raise ParseError(f"layer {k}: weight must be a matrix (list of rows)")
            layers.append(Affine(weight, bias))
        elif kind in ACTIVATION_KINDS:
            layers.append(Activation(kind))
        else:
            raise ParseError(f"layer {k}: unknown layer type {kind!r}")
    return Network(tuple(layers), input_dim, output_dim)


def load_network_file(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return load_network(fh.read())


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on a single input vector.

    Deterministic sequential evaluation; repeated calls are bit-identical.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise DimensionError(
            f"input has shape {x.shape}, expected ({net.input_dim},)"
        )
    for layer in net.layers:
        if isinstance(layer, Affine):
            x = layer.weight @ x + layer.bias
        elif layer.kind == "relu":
            x = np.maximum(x, 0.0)
        else:
            x = np.tanh(x)
    return x


def forward_batch(net: Network, xs: np.ndarray) -> np.ndarray:
    """Evaluate the network on a batch of row vectors, shape (N, input_dim)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != net.input_dim:
        raise DimensionError(
            f"batch has shape {xs.shape}, expected (N, {net.input_dim})"
        )
    for layer in net.layers:
        if isinstance(layer, Affine):
            xs = xs @ layer.weight.T + layer.bias
        elif layer.kind == "relu":
            xs = np.maximum(xs, 0.0)
        else:
            xs = np.tanh(xs)
    return xs
