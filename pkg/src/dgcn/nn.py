"""Minimal dense-network substrate: affine layers with ReLU hidden
activations, exact reverse-mode gradients over a recorded tape, Adam
updates, and central-finite-difference gradient verification.

Layers compute y = x @ W.T + b with W of shape (out, in). Hidden layers are
ReLU, the output layer is linear. Everything is float64 and deterministic
given a seed.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_CKPT_MAGIC = b"DGCNCKP1"


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)


@dataclass
class Mlp:
    """Stack of dense layers; ReLU between layers, linear output."""

    layers: list

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]


@dataclass
class GradTape:
    """Per-layer inputs and pre-activations from one forward pass."""

    inputs: list = field(default_factory=list)
    preacts: list = field(default_factory=list)
    consumed: bool = False


def glorot_uniform(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(out_dim, in_dim))


def mlp_init(sizes, rng: np.random.Generator) -> Mlp:
    """Fresh network with Glorot-uniform weights and zero biases.

    sizes = (in, hidden..., out); at least one layer results.
    """
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output width")
    layers = [
        DenseLayer(weight=glorot_uniform(rng, o, i), bias=np.zeros(o))
        for i, o in zip(sizes[:-1], sizes[1:])
    ]
    return Mlp(layers=layers)


def mlp_forward(m: Mlp, X: np.ndarray):
    """Forward pass returning the output and the tape for backward."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.in_dim:
        raise ValueError(f"input shape {X.shape} does not match network input width {m.in_dim}")
    tape = GradTape()
    h = X
    last = len(m.layers) - 1
    for idx, layer in enumerate(m.layers):
        tape.inputs.append(h)
        pre = h @ layer.weight.T + layer.bias
        tape.preacts.append(pre)
        h = pre if idx == last else np.maximum(pre, 0.0)
    return h, tape


def backward(m: Mlp, tape: GradTape, d_out: np.ndarray):
    """Reverse-mode gradients for one recorded forward pass.

    Returns (grads, d_input) where grads is a list of (dW, db) matching the
    layer order. A tape can be consumed once.
    """
    if tape.consumed:
        raise RuntimeError("gradient tape already consumed")
    tape.consumed = True
    d_out = np.asarray(d_out, dtype=np.float64)
    grads = [None] * len(m.layers)
    last = len(m.layers) - 1
    d_h = d_out
    for idx in range(last, -1, -1):
        d_pre = d_h if idx == last else d_h * (tape.preacts[idx] > 0)
        grads[idx] = (d_pre.T @ tape.inputs[idx], d_pre.sum(axis=0))
        d_h = d_pre @ m.layers[idx].weight
    return grads, d_h


@dataclass
class AdamState:
    """First/second moment accumulators matching a flat parameter list."""

    m: list
    v: list
    step: int
    lr: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def create(cls, params, lr: float) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            step=0,
            lr=lr,
        )


def adam_step(state: AdamState, params, grads, names=None):
    """One bias-corrected Adam update, applied in place.

    Raises on non-finite gradients, naming the offending parameter.
    """
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameter/gradient structure does not match optimizer state")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    for idx, (p, g) in enumerate(zip(params, grads)):
        if not np.all(np.isfinite(g)):
            label = names[idx] if names is not None else f"param[{idx}]"
            raise FloatingPointError(f"non-finite gradient for {label}")
        state.m[idx] = b1 * state.m[idx] + (1.0 - b1) * g
        state.v[idx] = b2 * state.v[idx] + (1.0 - b2) * (g * g)
        m_hat = state.m[idx] / bc1
        v_hat = state.v[idx] / bc2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def _relu_masks(m: Mlp, X: np.ndarray):
    _, tape = mlp_forward(m, X)
    return [pre > 0 for pre in tape.preacts[:-1]]


def finite_difference_grads(f, arrays, coords, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar f() at selected (array_idx, flat_idx)
    coordinates, perturbing the arrays in place and restoring them."""
    out = np.empty(len(coords))
    for pos, (ai, flat) in enumerate(coords):
        flat_view = arrays[ai].reshape(-1)
        orig = flat_view[flat]
        flat_view[flat] = orig + h
        up = f()
        flat_view[flat] = orig - h
        down = f()
        flat_view[flat] = orig
        out[pos] = (up - down) / (2.0 * h)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def grad_check(m: Mlp, loss_fn, X, n_samples: int = 40, h: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between tape gradients and central differences.

    loss_fn maps the network output to (scalar, d_output). Sampled
    coordinates whose +-h perturbation flips a ReLU mask are re-drawn, since
    the loss is not differentiable across the kink.
    """
    rng = np.random.default_rng(seed)
    X = np.asarray(X, dtype=np.float64)
    out, tape = mlp_forward(m, X)
    _, d_out = loss_fn(out)
    grads, _ = backward(m, tape, d_out)

    arrays, flats = [], []
    for layer, (dW, db) in zip(m.layers, grads):
        arrays.extend([layer.weight, layer.bias])
        flats.extend([dW.reshape(-1), db.reshape(-1)])

    def loss_at_current():
        y, _ = mlp_forward(m, X)
        return loss_fn(y)[0]

    base_masks = _relu_masks(m, X)

    def crosses_kink(ai, flat):
        view = arrays[ai].reshape(-1)
        orig = view[flat]
        crossed = False
        for delta in (h, -h):
            view[flat] = orig + delta
            masks = _relu_masks(m, X)
            if any(not np.array_equal(a, b) for a, b in zip(masks, base_masks)):
                crossed = True
                break
        view[flat] = orig
        return crossed

    total = sum(a.size for a in arrays)
    n_samples = min(n_samples, total)
    chosen = []
    attempts = 0
    while len(chosen) < n_samples and attempts < 20 * n_samples:
        attempts += 1
        ai = int(rng.integers(len(arrays)))
        flat = int(rng.integers(arrays[ai].size))
        if (ai, flat) in chosen or crosses_kink(ai, flat):
            continue
        chosen.append((ai, flat))
    if not chosen:
        raise RuntimeError("could not sample any kink-free coordinate")

    numeric = finite_difference_grads(loss_at_current, arrays, chosen, h=h)
    analytic = np.array([flats[ai][flat] for ai, flat in chosen])
    return relative_error(analytic, numeric)


def save_params(path, named_params, seed=None):
    """Checkpoint a list of (name, array) as little-endian float64 blobs
    behind a JSON header carrying names, shapes, and the RNG seed."""
    header = {
        "names": [name for name, _ in named_params],
        "shapes": [list(arr.shape) for _, arr in named_params],
        "seed": seed,
    }
    raw = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for _, arr in named_params:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_params(path):
    """Inverse of save_params: returns (list of (name, array), seed)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise ValueError("bad magic: not a parameter checkpoint")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        named = []
        for name, shape in zip(header["names"], header["shapes"]):
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise ValueError("truncated checkpoint")
            named.append((name, np.frombuffer(buf, dtype="<f8").reshape(shape).copy()))
    return named, header.get("seed")
