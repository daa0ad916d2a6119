"""Minimal dense-network toolkit with exact reverse-mode gradients.

Just enough machinery for the actor and critic networks: affine layers with
mish / tanh / identity activations, a forward pass that caches what the
backward pass needs, hand-derived backprop, Adam, sinusoidal step
embeddings, and a JSON checkpoint format.  Everything is float64 numpy on
row-major batches (inputs are (batch, dim)); there is no graph engine, the
layer chain is fixed.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("mish", "tanh", "identity")

CHECKPOINT_VERSION = 1


class TrainingDivergence(RuntimeError):
    """Raised when a gradient or loss stops being finite."""


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _mish(x: np.ndarray) -> np.ndarray:
    return x * np.tanh(_softplus(x))


def _mish_grad(x: np.ndarray) -> np.ndarray:
    t = np.tanh(_softplus(x))
    return t + x * (1.0 - t * t) * expit(x)


def _apply(act: str, z: np.ndarray) -> np.ndarray:
    if act == "mish":
        return _mish(z)
    if act == "tanh":
        return np.tanh(z)
    if act == "identity":
        return z
    raise ValueError(f"unknown activation {act!r}")


def _apply_grad(act: str, z: np.ndarray) -> np.ndarray:
    if act == "mish":
        return _mish_grad(z)
    if act == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if act == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {act!r}")


@dataclass
class DenseNet:
    """A fixed chain of affine layers with per-layer activations."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "DenseNet":
        return DenseNet(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activations=list(self.activations),
        )

    def assert_finite(self) -> None:
        for w, b in zip(self.weights, self.biases):
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise TrainingDivergence("network parameters are no longer finite")


def init_dense(dims, activations, rng: np.random.Generator) -> DenseNet:
    """He-scaled normals for mish layers, Xavier-scaled for tanh/identity."""
    dims = list(dims)
    activations = list(activations)
    if len(activations) != len(dims) - 1:
        raise ValueError("need one activation per layer")
    for act in activations:
        if act not in ACTIVATIONS:
            raise ValueError(f"unknown activation {act!r}")
    weights, biases = [], []
    for fan_in, fan_out, act in zip(dims[:-1], dims[1:], activations):
        if act == "mish":
            scale = np.sqrt(2.0 / fan_in)
        else:
            scale = np.sqrt(2.0 / (fan_in + fan_out))
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenseNet(weights=weights, biases=biases, activations=activations)


@dataclass
class ForwardCache:
    """Intermediate values a backward pass needs; valid for one forward."""

    net_id: int
    inputs: list[np.ndarray]    # layer inputs, inputs[0] is the net input
    pre_acts: list[np.ndarray]  # affine outputs before activation


@dataclass
class GradientTape:
    """Parameter gradients aligned with a DenseNet, plus the input gradient."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]
    d_input: np.ndarray | None = None

    def add_(self, other: "GradientTape") -> None:
        for dw, ow in zip(self.d_weights, other.d_weights):
            dw += ow
        for db, ob in zip(self.d_biases, other.d_biases):
            db += ob

    def scale_(self, factor: float) -> None:
        for dw in self.d_weights:
            dw *= factor
        for db in self.d_biases:
            db *= factor

    def assert_finite(self) -> None:
        for dw, db in zip(self.d_weights, self.d_biases):
            if not (np.isfinite(dw).all() and np.isfinite(db).all()):
                raise TrainingDivergence("gradient is no longer finite")


def zero_tape(net: DenseNet) -> GradientTape:
    return GradientTape(
        d_weights=[np.zeros_like(w) for w in net.weights],
        d_biases=[np.zeros_like(b) for b in net.biases],
    )


def forward(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run the layer chain on a (batch, in_dim) array."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ValueError(f"input shape {x.shape} does not match net input dim {net.in_dim}")
    inputs, pre_acts = [x], []
    h = x
    for w, b, act in zip(net.weights, net.biases, net.activations):
        z = h @ w + b
        pre_acts.append(z)
        h = _apply(act, z)
        inputs.append(h)
    cache = ForwardCache(net_id=id(net), inputs=inputs[:-1], pre_acts=pre_acts)
    return (h[0] if squeeze else h), cache


def backward(net: DenseNet, cache: ForwardCache, output_grad: np.ndarray) -> GradientTape:
    """Exact gradients of sum(output * output_grad) w.r.t. params and input."""
    if cache.net_id != id(net):
        raise RuntimeError("cache does not belong to this network")
    g = np.asarray(output_grad, dtype=float)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != (cache.inputs[0].shape[0], net.out_dim):
        raise ValueError(f"output_grad shape {output_grad.shape} does not match")
    d_weights = [None] * len(net.weights)
    d_biases = [None] * len(net.biases)
    for layer in range(len(net.weights) - 1, -1, -1):
        dz = g * _apply_grad(net.activations[layer], cache.pre_acts[layer])
        d_weights[layer] = cache.inputs[layer].T @ dz
        d_biases[layer] = dz.sum(axis=0)
        g = dz @ net.weights[layer].T
    return GradientTape(d_weights=d_weights, d_biases=d_biases, d_input=g)


@dataclass
class AdamState:
    """Adam moments for one DenseNet."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_w: list[np.ndarray] = field(default_factory=list)
    v_w: list[np.ndarray] = field(default_factory=list)
    m_b: list[np.ndarray] = field(default_factory=list)
    v_b: list[np.ndarray] = field(default_factory=list)


def adam_init(net: DenseNet, lr: float) -> AdamState:
    return AdamState(
        lr=lr,
        m_w=[np.zeros_like(w) for w in net.weights],
        v_w=[np.zeros_like(w) for w in net.weights],
        m_b=[np.zeros_like(b) for b in net.biases],
        v_b=[np.zeros_like(b) for b in net.biases],
    )


def adam_step(net: DenseNet, tape: GradientTape, state: AdamState) -> None:
    """One in-place Adam update.  Raises on non-finite gradients."""
    tape.assert_finite()
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for i, (w, dw) in enumerate(zip(net.weights, tape.d_weights)):
        state.m_w[i] = state.beta1 * state.m_w[i] + (1.0 - state.beta1) * dw
        state.v_w[i] = state.beta2 * state.v_w[i] + (1.0 - state.beta2) * dw * dw
        w -= state.lr * (state.m_w[i] / bc1) / (np.sqrt(state.v_w[i] / bc2) + state.eps)
    for i, (b, db) in enumerate(zip(net.biases, tape.d_biases)):
        state.m_b[i] = state.beta1 * state.m_b[i] + (1.0 - state.beta1) * db
        state.v_b[i] = state.beta2 * state.v_b[i] + (1.0 - state.beta2) * db * db
        b -= state.lr * (state.m_b[i] / bc1) / (np.sqrt(state.v_b[i] / bc2) + state.eps)
    net.assert_finite()


def sinusoidal_embed(step: int, dim: int) -> np.ndarray:
    """Interleaved sin/cos encoding of an integer step.

    Entry 2k is sin(step / 10000**(2k/dim)), entry 2k+1 the matching cos,
    so step 0 encodes as [0, 1, 0, 1, ...].
    """
    if dim % 2 != 0 or dim <= 0:
        raise ValueError(f"embedding dim must be a positive even number, got {dim}")
    k = np.arange(dim // 2)
    freqs = np.power(10000.0, -2.0 * k / dim)
    angles = step * freqs
    out = np.empty(dim)
    out[0::2] = np.sin(angles)
    out[1::2] = np.cos(angles)
    return out


def _encode_array(a: np.ndarray) -> dict:
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(d["shape"])


def net_to_dict(net: DenseNet) -> dict:
    return {
        "dims": net.dims,
        "activations": list(net.activations),
        "weights": [_encode_array(w) for w in net.weights],
        "biases": [_encode_array(b) for b in net.biases],
    }


def net_from_dict(d: dict) -> DenseNet:
    net = DenseNet(
        weights=[_decode_array(w) for w in d["weights"]],
        biases=[_decode_array(b) for b in d["biases"]],
        activations=list(d["activations"]),
    )
    if net.dims != list(d["dims"]):
        raise ValueError("checkpoint dims do not match stored parameters")
    return net


def adam_to_dict(state: AdamState) -> dict:
    return {
        "lr": state.lr,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "eps": state.eps,
        "step": state.step,
        "m_w": [_encode_array(a) for a in state.m_w],
        "v_w": [_encode_array(a) for a in state.v_w],
        "m_b": [_encode_array(a) for a in state.m_b],
        "v_b": [_encode_array(a) for a in state.v_b],
    }


def adam_from_dict(d: dict) -> AdamState:
    return AdamState(
        lr=d["lr"],
        beta1=d["beta1"],
        beta2=d["beta2"],
        eps=d["eps"],
        step=d["step"],
        m_w=[_decode_array(a) for a in d["m_w"]],
        v_w=[_decode_array(a) for a in d["v_w"]],
        m_b=[_decode_array(a) for a in d["m_b"]],
        v_b=[_decode_array(a) for a in d["v_b"]],
    )
