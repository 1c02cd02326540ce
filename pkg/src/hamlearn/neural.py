"""Dense feedforward neural potential with exact derivatives.

The model is a scalar-output network V(q) = out(W_L a_{L-1} + b_L) with
a_l = act(W_l a_{l-1} + b_l) and a_0 an optional fixed transform of the raw
input (identity, particle-pair difference, or particle-pair distance).

Besides plain evaluation, this module computes two exact derivatives:

* the gradient of V with respect to its raw input (reverse mode), and
* the gradient with respect to all weights/biases of the trajectory-matching
  loss, which itself contains the input gradient.  That needs mixed second
  derivatives; they are obtained by propagating a forward-mode tangent along
  the residual direction and then running reverse mode over the combined
  primal+tangent computation.  Everything is plain float64 numpy.

The training loop evaluates the loss gradient tens of thousands of times on a
fixed batch, so the passes write into preallocated workspace buffers instead
of allocating fresh megabyte arrays per step (repeated large allocations are
an order of magnitude slower than the arithmetic).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .errors import ConfigError, DomainError, FormatError

TANH = "tanh"
ELU = "elu"
SOFTPLUS = "softplus"
LINEAR = "linear"
ACTIVATIONS = (TANH, ELU, SOFTPLUS, LINEAR)

IDENTITY = "identity"
PAIR_DIFFERENCE = "pair_difference"
PAIR_DISTANCE = "pair_distance"
INPUT_TRANSFORMS = (IDENTITY, PAIR_DIFFERENCE, PAIR_DISTANCE)

OUT_IDENTITY = "identity"
OUT_EXP = "exp"
OUTPUT_TRANSFORMS = (OUT_IDENTITY, OUT_EXP)

MODEL_FORMAT_VERSION = 1


@dataclass
class DenseNetwork:
    """Weights (out x in per layer), biases, activation tags, transforms."""

    layer_dims: tuple
    weights: list
    biases: list
    activations: tuple
    input_transform: str = IDENTITY
    output_transform: str = OUT_IDENTITY

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ConfigError("layer_dims must be >= 2 positive integers")
        if dims[-1] != 1:
            raise ConfigError("output dimension must be 1 (scalar potential)")
        n_hidden = len(dims) - 2
        acts = tuple(self.activations)
        if len(acts) != n_hidden:
            raise ConfigError(f"need {n_hidden} activation tags, got {len(acts)}")
        for a in acts:
            if a not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {a!r}")
        if self.input_transform not in INPUT_TRANSFORMS:
            raise ConfigError(f"unknown input transform {self.input_transform!r}")
        if self.output_transform not in OUTPUT_TRANSFORMS:
            raise ConfigError(f"unknown output transform {self.output_transform!r}")
        if self.input_transform == PAIR_DIFFERENCE and dims[0] != 3:
            raise ConfigError("pair_difference feeds 3 inputs, layer_dims[0] must be 3")
        if self.input_transform == PAIR_DISTANCE and dims[0] != 1:
            raise ConfigError("pair_distance feeds 1 input, layer_dims[0] must be 1")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ConfigError("need one weight matrix and bias vector per layer")
        ws, bs = [], []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.ascontiguousarray(np.asarray(w, dtype=float))
            b = np.ascontiguousarray(np.asarray(b, dtype=float))
            if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
                raise ConfigError(f"layer {i} arrays inconsistent with layer_dims")
            ws.append(w)
            bs.append(b)
        self.layer_dims = dims
        self.weights = ws
        self.biases = bs
        self.activations = acts

    @property
    def raw_input_dim(self) -> int:
        if self.input_transform in (PAIR_DIFFERENCE, PAIR_DISTANCE):
            return 6
        return self.layer_dims[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activations,
            self.input_transform,
            self.output_transform,
        )


def networks_equal(a: DenseNetwork, b: DenseNetwork) -> bool:
    return (
        a.layer_dims == b.layer_dims
        and a.activations == b.activations
        and a.input_transform == b.input_transform
        and a.output_transform == b.output_transform
        and all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
        and all(np.array_equal(x, y) for x, y in zip(a.biases, b.biases))
    )


def init_network(
    layer_dims,
    activations,
    input_transform: str = IDENTITY,
    output_transform: str = OUT_IDENTITY,
    seed: int = 0,
) -> DenseNetwork:
    """Uniform fan-in/fan-out weights, zero biases, deterministic in seed."""
    dims = tuple(int(d) for d in layer_dims)
    rng = np.random.Generator(np.random.PCG64(seed))
    weights, biases = [], []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseNetwork(dims, weights, biases, tuple(activations), input_transform, output_transform)


# ---------------------------------------------------------------------------
# Activations: fill value/derivative buffers in place
# ---------------------------------------------------------------------------


def _act_into(kind, z, a, p, p2, mask):
    """a = act(z), p = act'(z), p2 = act''(z) (p2 skipped when None)."""
    if kind == TANH:
        np.tanh(z, out=a)
        np.multiply(a, a, out=p)
        np.subtract(1.0, p, out=p)
        if p2 is not None:
            np.multiply(a, p, out=p2)
            p2 *= -2.0
    elif kind == ELU:
        # alpha = 1; at z = 0 the exponential branch applies, so the second
        # derivative there is 1 (a fixed convention; hitting 0 exactly is
        # measure zero in training data)
        np.greater(z, 0.0, out=mask)
        np.minimum(z, 0.0, out=p)
        np.exp(p, out=p)  # p = exp(min(z, 0))
        np.subtract(p, 1.0, out=a)
        np.copyto(a, z, where=mask)
        if p2 is not None:
            np.copyto(p2, p)
            np.copyto(p2, 0.0, where=mask)
        np.copyto(p, 1.0, where=mask)
    elif kind == SOFTPLUS:
        # value via max(z,0) + log1p(exp(-|z|)); logistic derivative via tanh
        np.multiply(z, 0.5, out=p)
        np.tanh(p, out=p)
        p += 1.0
        p *= 0.5
        np.abs(z, out=a)
        np.negative(a, out=a)
        np.exp(a, out=a)
        np.log1p(a, out=a)
        if p2 is not None:  # reuse p2 as scratch for max(z, 0) before its final value
            np.maximum(z, 0.0, out=p2)
            a += p2
            np.subtract(1.0, p, out=p2)
            p2 *= p
        else:
            a += np.maximum(z, 0.0)
    elif kind == LINEAR:
        np.copyto(a, z)
        p.fill(1.0)
        if p2 is not None:
            p2.fill(0.0)
    else:  # pragma: no cover
        raise ConfigError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------------------
# Workspace: preallocated per-batch buffers
# ---------------------------------------------------------------------------


class Workspace:
    """Buffers for repeated passes over a fixed batch of K samples."""

    def __init__(self, net: DenseNetwork, K: int):
        dims = net.layer_dims
        L = net.n_layers
        self.K = K
        self.dims = dims
        self.transform = net.input_transform
        self.z = [np.empty((K, dims[i + 1])) for i in range(L)]
        self.zt = [np.empty((K, dims[i + 1])) for i in range(L)]
        self.v = [np.empty((K, dims[i + 1])) for i in range(L)]
        self.a = [None] + [np.empty((K, dims[i])) for i in range(1, L)]
        self.at = [np.empty((K, dims[i])) for i in range(L)]
        self.p = [np.empty((K, dims[i + 1])) for i in range(L - 1)]
        self.p2 = [np.empty((K, dims[i + 1])) for i in range(L - 1)]
        self.mask = [np.empty((K, dims[i + 1]), dtype=bool) for i in range(L - 1)]
        self.gi = [np.empty((K, dims[i])) for i in range(L)]
        self.abar = [np.empty((K, dims[i])) for i in range(L)]
        self.atbar = [np.empty((K, dims[i])) for i in range(L)]
        self.ones = np.ones((K, 1))
        self.o1 = np.empty((K, 1))
        d_raw = net.raw_input_dim
        self.G = np.empty((K, d_raw))
        self.R = np.empty((K, d_raw))
        if net.input_transform != IDENTITY:
            self.a0 = np.empty((K, dims[0]))
            self.delta = np.empty((K, 3))
            self.dhat = np.empty((K, 3))
            self.r = np.empty((K, 1))
            self.scratch3 = np.empty((K, 3))

    def matches(self, net: DenseNetwork, K: int) -> bool:
        return self.K == K and self.dims == net.layer_dims and self.transform == net.input_transform


def _check_raw(net: DenseNetwork, Q: np.ndarray) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[1] != net.raw_input_dim:
        raise ConfigError(f"inputs must be (m, {net.raw_input_dim}), got {Q.shape}")
    return Q


def _transform_into(net: DenseNetwork, ws: Workspace, Q: np.ndarray):
    """Fill ws with the transformed input; return the a0 array."""
    if net.input_transform == IDENTITY:
        return Q
    np.subtract(Q[:, :3], Q[:, 3:], out=ws.delta)
    if net.input_transform == PAIR_DIFFERENCE:
        np.copyto(ws.a0, ws.delta)
        return ws.a0
    np.multiply(ws.delta, ws.delta, out=ws.scratch3)
    np.sum(ws.scratch3, axis=1, out=ws.r[:, 0])
    np.sqrt(ws.r, out=ws.r)
    if np.any(ws.r == 0.0):
        raise DomainError("pair distance vanished; gradient undefined")
    np.divide(ws.delta, ws.r, out=ws.dhat)
    np.copyto(ws.a0, ws.r)
    return ws.a0


def _forward_into(net: DenseNetwork, ws: Workspace, a0: np.ndarray, need_p2: bool):
    """Dense layers into ws buffers; returns the pre-output array ws.z[-1]."""
    L = net.n_layers
    cur = a0
    for i in range(L):
        np.matmul(cur, net.weights[i].T, out=ws.z[i])
        ws.z[i] += net.biases[i]
        if i < L - 1:
            _act_into(
                net.activations[i], ws.z[i], ws.a[i + 1], ws.p[i],
                ws.p2[i] if need_p2 else None, ws.mask[i],
            )
            cur = ws.a[i + 1]
    return ws.z[L - 1]


def _grad_transformed_into(net: DenseNetwork, ws: Workspace, o1: np.ndarray) -> np.ndarray:
    """Reverse pass to the transformed input; fills ws.gi, returns ws.gi[0]."""
    L = net.n_layers
    np.matmul(o1, net.weights[L - 1], out=ws.gi[L - 1])
    for i in range(L - 2, -1, -1):
        np.multiply(ws.gi[i + 1], ws.p[i], out=ws.zt[i])
        np.matmul(ws.zt[i], net.weights[i], out=ws.gi[i])
    return ws.gi[0]


def _pullback_into(net: DenseNetwork, ws: Workspace, Gt: np.ndarray) -> np.ndarray:
    """Map the transformed-input gradient back to raw coordinates (ws.G)."""
    if net.input_transform == IDENTITY:
        np.copyto(ws.G, Gt)
    elif net.input_transform == PAIR_DIFFERENCE:
        np.copyto(ws.G[:, :3], Gt)
        np.negative(Gt, out=ws.G[:, 3:])
    else:
        np.multiply(ws.dhat, Gt, out=ws.G[:, :3])
        np.negative(ws.G[:, :3], out=ws.G[:, 3:])
    return ws.G


def _seed_into(net: DenseNetwork, ws: Workspace, W: np.ndarray) -> np.ndarray:
    """Push a raw-input tangent through the transform Jacobian into ws.at[0]."""
    if net.input_transform == IDENTITY:
        np.copyto(ws.at[0], W)
    elif net.input_transform == PAIR_DIFFERENCE:
        np.subtract(W[:, :3], W[:, 3:], out=ws.at[0])
    else:
        np.subtract(W[:, :3], W[:, 3:], out=ws.scratch3)
        ws.scratch3 *= ws.dhat
        np.sum(ws.scratch3, axis=1, out=ws.at[0][:, 0])
    return ws.at[0]


def _output_o1(net: DenseNetwork, ws: Workspace, z_out: np.ndarray) -> np.ndarray:
    """First derivative of the output transform at z_out (ws.o1 or ones)."""
    if net.output_transform == OUT_EXP:
        np.exp(z_out, out=ws.o1)
        return ws.o1
    return ws.ones


# ---------------------------------------------------------------------------
# Public evaluation API
# ---------------------------------------------------------------------------


def forward_batch(net: DenseNetwork, Q: np.ndarray) -> np.ndarray:
    """Potential values at each row of Q; shape (m,)."""
    Q = _check_raw(net, Q)
    ws = Workspace(net, Q.shape[0])
    a0 = _transform_into(net, ws, Q)
    z_out = _forward_into(net, ws, a0, need_p2=False)
    if net.output_transform == OUT_EXP:
        return np.exp(z_out[:, 0])
    return z_out[:, 0].copy()


def forward(net: DenseNetwork, q: np.ndarray) -> float:
    return float(forward_batch(net, np.asarray(q, dtype=float)[None, :])[0])


def grad_input_batch(net: DenseNetwork, Q: np.ndarray) -> np.ndarray:
    """Exact gradient of the potential w.r.t. each raw input row."""
    Q = _check_raw(net, Q)
    ws = Workspace(net, Q.shape[0])
    a0 = _transform_into(net, ws, Q)
    z_out = _forward_into(net, ws, a0, need_p2=False)
    o1 = _output_o1(net, ws, z_out)
    Gt = _grad_transformed_into(net, ws, o1)
    return _pullback_into(net, ws, Gt).copy()


def grad_input(net: DenseNetwork, q: np.ndarray) -> np.ndarray:
    return grad_input_batch(net, np.asarray(q, dtype=float)[None, :])[0]


# ---------------------------------------------------------------------------
# Trajectory-matching loss and its exact parameter gradient
# ---------------------------------------------------------------------------


@dataclass
class NetworkGradient:
    """Per-parameter gradient, mirroring the weight/bias layout."""

    weights: list
    biases: list

    def norm(self) -> float:
        total = 0.0
        for w in self.weights:
            total += float(np.sum(w * w))
        for b in self.biases:
            total += float(np.sum(b * b))
        return float(np.sqrt(total))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights) and all(
            np.all(np.isfinite(b)) for b in self.biases
        )


def stack_transitions(corpus, start: int = 0, stop: int | None = None):
    """Stack transition samples (q_i, (p_{i+1}-p_i)/h) from equal-shape trajectories.

    start/stop select a window of transition indices within every trajectory.
    """
    corpus = list(corpus)
    if not corpus:
        raise ConfigError("corpus is empty")
    d = corpus[0].dim
    h = corpus[0].step
    n = corpus[0].n_transitions
    for t in corpus:
        if not isinstance(t, Trajectory):
            raise ConfigError("corpus entries must be Trajectory instances")
        if t.dim != d or t.step != h or t.n_transitions != n:
            raise ConfigError("corpus trajectories must share dimension, step, and length")
    if n < 1:
        raise ConfigError("trajectories need at least one transition")
    if stop is None:
        stop = n
    if not (0 <= start < stop <= n):
        raise ConfigError(f"bad transition window [{start}, {stop}) for length {n}")
    Q = np.concatenate([t.qs[start:stop] for t in corpus], axis=0)
    U = np.concatenate([(t.ps[start + 1 : stop + 1] - t.ps[start:stop]) / h for t in corpus], axis=0)
    return Q, U


def loss_from_stacked(net: DenseNetwork, Q, U, ws: Workspace | None = None) -> float:
    Q = _check_raw(net, Q)
    if ws is None or not ws.matches(net, Q.shape[0]):
        ws = Workspace(net, Q.shape[0])
    # overflow shows up as a non-finite loss, which the trainer reports as
    # divergence; no need for numpy to warn about it here
    with np.errstate(over="ignore", invalid="ignore"):
        a0 = _transform_into(net, ws, Q)
        z_out = _forward_into(net, ws, a0, need_p2=False)
        o1 = _output_o1(net, ws, z_out)
        Gt = _grad_transformed_into(net, ws, o1)
        G = _pullback_into(net, ws, Gt)
        np.add(U, G, out=ws.R)
        return float(np.sum(ws.R * ws.R) / Q.shape[0])


def loss(net: DenseNetwork, corpus) -> float:
    """Mean squared norm of (p_{i+1}-p_i)/h + grad V(q_i) over all transitions."""
    Q, U = stack_transitions(corpus)
    return loss_from_stacked(net, Q, U)


def loss_param_gradient_from_stacked(net: DenseNetwork, Q, U, ws: Workspace | None = None):
    """Loss value and its exact gradient w.r.t. every weight and bias.

    The loss depends on parameters only through g(q) = grad_q V(q), so
    dL/dtheta = sum_k w_k . dg(q_k)/dtheta with w_k = 2 (u_k + g_k) / K held
    fixed.  Each w_k . g(q_k) is the directional derivative of V along w_k,
    so a forward tangent pass seeded with w_k followed by a reverse pass over
    the primal+tangent graph yields the whole gradient at machine precision.
    """
    Q = _check_raw(net, Q)
    K = Q.shape[0]
    if ws is None or not ws.matches(net, K):
        ws = Workspace(net, K)
    with np.errstate(over="ignore", invalid="ignore"):
        return _loss_param_gradient_core(net, ws, Q, U)


def _loss_param_gradient_core(net: DenseNetwork, ws: Workspace, Q, U):
    K = Q.shape[0]
    L = net.n_layers
    weights = net.weights

    a0 = _transform_into(net, ws, Q)
    z_out = _forward_into(net, ws, a0, need_p2=True)
    o1 = _output_o1(net, ws, z_out)

    Gt = _grad_transformed_into(net, ws, o1)
    G = _pullback_into(net, ws, Gt)
    np.add(U, G, out=ws.R)
    loss_value = float(np.sum(ws.R * ws.R) / K)

    # forward tangent along the per-sample residual directions
    ws.R *= 2.0 / K
    cur = _seed_into(net, ws, ws.R)
    for i in range(L):
        np.matmul(cur, weights[i].T, out=ws.zt[i])
        if i < L - 1:
            np.multiply(ws.p[i], ws.zt[i], out=ws.at[i + 1])
            cur = ws.at[i + 1]

    # reverse pass over the primal+tangent computation; the z buffers are
    # reused as the primal adjoint stream
    gW = [None] * L
    gb = [None] * L
    if net.output_transform == OUT_EXP:
        u = ws.z[L - 1]
        np.multiply(o1, ws.zt[L - 1], out=u)
        v = o1
    else:
        u = ws.z[L - 1]
        u.fill(0.0)
        v = ws.ones
    for i in range(L - 1, -1, -1):
        ai = a0 if i == 0 else ws.a[i]
        gW[i] = u.T @ ai + v.T @ ws.at[i]
        gb[i] = u.sum(axis=0)
        if i > 0:
            np.matmul(u, weights[i], out=ws.abar[i])
            np.matmul(v, weights[i], out=ws.atbar[i])
            np.multiply(ws.p[i - 1], ws.atbar[i], out=ws.v[i - 1])
            np.multiply(ws.p2[i - 1], ws.zt[i - 1], out=ws.z[i - 1])
            ws.z[i - 1] *= ws.atbar[i]
            np.multiply(ws.p[i - 1], ws.abar[i], out=ws.atbar[i])
            ws.z[i - 1] += ws.atbar[i]
            u = ws.z[i - 1]
            v = ws.v[i - 1]
    return loss_value, NetworkGradient(gW, gb)


def loss_param_gradient(net: DenseNetwork, corpus):
    Q, U = stack_transitions(corpus)
    return loss_param_gradient_from_stacked(net, Q, U)


# ---------------------------------------------------------------------------
# Serialization: versioned JSON document, weights row-major, full precision
# ---------------------------------------------------------------------------


def serialize(net: DenseNetwork) -> bytes:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_dims": list(net.layer_dims),
        "activations": list(net.activations),
        "input_transform": net.input_transform,
        "output_transform": net.output_transform,
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    return json.dumps(doc, indent=1).encode("utf-8")


def deserialize(data: bytes) -> DenseNetwork:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"not a valid model document: {e}") from e
    if not isinstance(doc, dict):
        raise FormatError("model document must be a JSON object")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version!r}")
    try:
        dims = tuple(int(d) for d in doc["layer_dims"])
        weights = [
            np.asarray(w, dtype=float).reshape(dims[i + 1], dims[i])
            for i, w in enumerate(doc["weights"])
        ]
        biases = [np.asarray(b, dtype=float) for b in doc["biases"]]
        net = DenseNetwork(
            dims,
            weights,
            biases,
            tuple(doc["activations"]),
            doc["input_transform"],
            doc["output_transform"],
        )
    except (KeyError, TypeError, ValueError, ConfigError) as e:
        raise FormatError(f"malformed model document: {e}") from e
    return net
