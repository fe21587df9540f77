"""Fully connected statistics network with exact reverse-mode gradients.

The critic maps a (usually scalar) observation to a real score. Hidden
layers use ReLU, the output layer is linear, optionally squashed to
``M * tanh(raw / M)`` so that ``|T(z)| <= M`` holds for every input.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from collections.abc import Sequence

import numpy as np

from rdp_audit._io import write_atomic


@dataclasses.dataclass
class ParamGradient:
    """Per-layer gradient arrays, congruent with a CriticNetwork's parameters."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def __add__(self, other: ParamGradient) -> ParamGradient:
        return ParamGradient(
            [a + b for a, b in zip(self.weights, other.weights)],
            [a + b for a, b in zip(self.biases, other.biases)],
        )

    def scaled(self, factor: float) -> ParamGradient:
        return ParamGradient([factor * w for w in self.weights], [factor * b for b in self.biases])


class CriticNetwork:
    """ReLU multilayer perceptron ``T_theta`` with a scalar output.

    Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``X`` of
    shape ``(n, fan_in)`` maps to ``X @ W + b``.

    Attributes:
      layer_sizes: widths including input and output, e.g. ``[1, 100, 100, 1]``.
      weights, biases: per-layer parameters.
      clamp_bound: if set, outputs are ``M * tanh(raw / M)``.
      param_radius: if set, ``apply_update`` projects onto ``||theta|| <= K``.
      input_shift, input_scale: affine standardization applied to inputs
        before the first layer (identity by default).
      seed: the initialization seed, kept for serialization.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        weights: Sequence[np.ndarray],
        biases: Sequence[np.ndarray],
        clamp_bound: float | None = None,
        param_radius: float | None = None,
        input_shift: float = 0.0,
        input_scale: float = 1.0,
        seed: int | None = None,
    ):
        sizes = _check_sizes(layer_sizes)
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ValueError("need one weight matrix and bias vector per layer")
        ws, bs = [], []
        for i, (w, b) in enumerate(zip(weights, biases)):
            w = np.array(w, dtype=np.float64).reshape(sizes[i], sizes[i + 1])
            b = np.array(b, dtype=np.float64).reshape(sizes[i + 1])
            ws.append(w)
            bs.append(b)
        if clamp_bound is not None and not clamp_bound > 0:
            raise ValueError("clamp_bound must be positive")
        if param_radius is not None and not param_radius > 0:
            raise ValueError("param_radius must be positive")
        if not input_scale > 0:
            raise ValueError("input_scale must be positive")
        self.layer_sizes = sizes
        self.weights = ws
        self.biases = bs
        self.clamp_bound = None if clamp_bound is None else float(clamp_bound)
        self.param_radius = None if param_radius is None else float(param_radius)
        self.input_shift = float(input_shift)
        self.input_scale = float(input_scale)
        self.seed = seed

    @classmethod
    def init(
        cls,
        seed: int,
        layer_sizes: Sequence[int] = (1, 100, 100, 1),
        clamp_bound: float | None = None,
        param_radius: float | None = None,
    ) -> CriticNetwork:
        """Glorot-uniform weights, zero biases, fully determined by ``seed``.

        If ``param_radius`` is set the initial point is projected into the ball.
        """
        sizes = _check_sizes(layer_sizes)
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        net = cls(sizes, weights, biases, clamp_bound, param_radius, seed=seed)
        net._project()
        return net

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    def flat_params(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def set_flat_params(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self.num_params:
            raise ValueError(f"expected {self.num_params} parameters, got {theta.size}")
        pos = 0
        for i in range(len(self.weights)):
            for arr in (self.weights[i], self.biases[i]):
                arr[...] = theta[pos : pos + arr.size].reshape(arr.shape)
                pos += arr.size

    def copy(self) -> CriticNetwork:
        return CriticNetwork(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.clamp_bound,
            self.param_radius,
            self.input_shift,
            self.input_scale,
            self.seed,
        )

    def zero_gradient(self) -> ParamGradient:
        return ParamGradient([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def _as_batch(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if self.input_dim == 1:
            arr = arr.reshape(-1, 1)
        else:
            if arr.ndim == 1:
                arr = arr.reshape(1, -1)
            if arr.ndim != 2 or arr.shape[1] != self.input_dim:
                raise ValueError(
                    f"input dimension mismatch: expected {self.input_dim}, got shape {arr.shape}"
                )
        return (arr - self.input_shift) / self.input_scale

    def _forward_cache(self, batch: np.ndarray):
        acts = [batch]
        h = batch
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if i == last else np.maximum(z, 0.0)
            acts.append(h)
        raw = acts[-1][:, 0]
        if self.clamp_bound is None:
            return raw, acts
        return self.clamp_bound * np.tanh(raw / self.clamp_bound), acts

    def forward_batch(self, x) -> np.ndarray:
        """Scores for a batch; scalar critics accept any 1-D array."""
        out, _ = self._forward_cache(self._as_batch(x))
        return out

    def forward(self, x) -> float:
        """Score of a single input."""
        arr = np.asarray(x, dtype=np.float64).reshape(-1)
        if arr.size != self.input_dim:
            raise ValueError(f"input dimension mismatch: expected {self.input_dim}, got {arr.size}")
        return float(self.forward_batch(arr.reshape(1, -1) if self.input_dim > 1 else arr)[0])

    __call__ = forward_batch

    def weighted_param_gradient(self, inputs, weights) -> ParamGradient:
        """Gradient of ``sum_i weights[i] * T(inputs[i])`` by backpropagation."""
        batch = self._as_batch(inputs)
        w_out = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w_out.size != batch.shape[0]:
            raise ValueError(f"got {w_out.size} weights for {batch.shape[0]} inputs")
        out, acts = self._forward_cache(batch)
        return self._backward(out, acts, w_out)

    def _backward(self, out: np.ndarray, acts: list[np.ndarray], w_out: np.ndarray) -> ParamGradient:
        upstream = w_out
        if self.clamp_bound is not None:
            upstream = upstream * (1.0 - (out / self.clamp_bound) ** 2)
        delta = upstream[:, None]
        n_layers = len(self.weights)
        gw: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
        gb: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
        for i in range(n_layers - 1, -1, -1):
            gw[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i > 0:
                # ReLU'(0) := 0
                delta = (delta @ self.weights[i].T) * (acts[i] > 0.0)
        return ParamGradient(gw, gb)

    def apply_update(self, grad: ParamGradient, step: float) -> CriticNetwork:
        """In-place ``theta += step * grad``, then projection if a radius is set."""
        if len(grad.weights) != len(self.weights):
            raise ValueError("gradient has the wrong number of layers")
        for w, b, gw, gb in zip(self.weights, self.biases, grad.weights, grad.biases):
            if gw.shape != w.shape or gb.shape != b.shape:
                raise ValueError(f"gradient shape {gw.shape}/{gb.shape} != {w.shape}/{b.shape}")
        if step != 0:
            for w, b, gw, gb in zip(self.weights, self.biases, grad.weights, grad.biases):
                w += step * gw
                b += step * gb
        self._project()
        return self

    def _project(self) -> None:
        if self.param_radius is None:
            return
        norm = math.sqrt(sum(float(np.sum(a * a)) for pair in zip(self.weights, self.biases) for a in pair))
        if norm > self.param_radius:
            scale = self.param_radius / norm
            for w, b in zip(self.weights, self.biases):
                w *= scale
                b *= scale

    def to_dict(self) -> dict:
        return {
            "format": "rdp_audit.critic/1",
            "layer_sizes": list(self.layer_sizes),
            "activation": "relu",
            "weights": [w.ravel(order="C").tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "weight_layout": "row-major (fan_in, fan_out)",
            "seed": self.seed,
            "clamp_bound": self.clamp_bound,
            "param_radius": self.param_radius,
            "input_shift": self.input_shift,
            "input_scale": self.input_scale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> CriticNetwork:
        if data.get("format") != "rdp_audit.critic/1":
            raise ValueError(f"unknown critic format {data.get('format')!r}")
        return cls(
            data["layer_sizes"],
            data["weights"],
            data["biases"],
            data.get("clamp_bound"),
            data.get("param_radius"),
            data.get("input_shift", 0.0),
            data.get("input_scale", 1.0),
            data.get("seed"),
        )

    def save(self, path: str | os.PathLike) -> None:
        write_atomic(path, json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> CriticNetwork:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _check_sizes(layer_sizes: Sequence[int]) -> list[int]:
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError("layer_sizes needs at least an input and an output entry")
    if any(s <= 0 for s in sizes) or any(s != orig for s, orig in zip(sizes, layer_sizes)):
        raise ValueError(f"layer sizes must be positive integers, got {list(layer_sizes)}")
    if sizes[-1] != 1:
        raise ValueError("the critic must have a scalar output (last size 1)")
    return sizes

