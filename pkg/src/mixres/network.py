"""Fully connected tanh/logistic networks with input jets and parameter gradients.

The forward recursion is the plain MLP

    f_0 = x,  f_l = rho(A_l f_{l-1} + b_l)  (l < D),  f_D = A_D f_{D-1} + b_D

and every hidden state is carried together with its input Jacobian. Internally
the pair is stored as one array ``H`` of shape ``(M, 1 + d, n_l)``: slot 0 holds
the value and slot ``1 + q`` holds ``d/dx_q``. A layer is then a single matrix
product ``H @ A.T`` followed by the activation rule, and the reverse sweep reuses
the same layout.
"""
from __future__ import annotations

import json
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np


class NonFiniteError(FloatingPointError):
    """Raised when a layer produces a NaN or infinity."""

    def __init__(self, layer: int, where: str = "forward"):
        super().__init__(f"non-finite values in {where} pass at layer {layer}")
        self.layer = layer


@dataclass(frozen=True)
class Activation:
    """Smooth activation ``rho`` with its first two derivatives."""

    kind: str = "tanh"

    def __post_init__(self):
        if self.kind not in ("tanh", "logistic"):
            raise ValueError(f"activation must be 'tanh' or 'logistic', got {self.kind!r}")

    def value(self, z):
        if self.kind == "tanh":
            return np.tanh(z)
        return 0.5 * (1.0 + np.tanh(0.5 * z))

    def derivatives(self, z):
        """Return ``(rho, rho', rho'')`` evaluated at ``z``."""
        if self.kind == "tanh":
            t = np.tanh(z)
            d1 = 1.0 - t * t
            return t, d1, -2.0 * t * d1
        s = 0.5 * (1.0 + np.tanh(0.5 * z))
        d1 = s * (1.0 - s)
        return s, d1, d1 * (1.0 - 2.0 * s)

    def __call__(self, z):
        return self.value(z)


def as_activation(act) -> Activation:
    return act if isinstance(act, Activation) else Activation(str(act))


@dataclass(frozen=True)
class Jet:
    """Value and input Jacobian of a vector field at one or many points.

    ``value[..., i]`` is ``f_i`` and ``jacobian[..., i, q]`` is ``d f_i / d x_q``.
    Component 0 is ``u`` and components ``1..d`` are ``p``.
    """

    value: np.ndarray
    jacobian: np.ndarray

    @property
    def u(self):
        return self.value[..., 0]

    @property
    def grad_u(self):
        return self.jacobian[..., 0, :]

    @property
    def p(self):
        return self.value[..., 1:]

    @property
    def div_p(self):
        jp = self.jacobian[..., 1:, :]
        return np.trace(jp, axis1=-2, axis2=-1)

    def __getitem__(self, idx):
        return Jet(self.value[idx], self.jacobian[idx])


@dataclass(frozen=True)
class NetworkParams:
    weights: tuple[np.ndarray, ...] = field(repr=False)
    biases: tuple[np.ndarray, ...] = field(repr=False)
    weight_bound: float = 1.0

    def __post_init__(self):
        ws = tuple(np.array(w, dtype=float) for w in self.weights)
        bs = tuple(np.array(b, dtype=float).reshape(-1) for b in self.biases)
        if len(ws) == 0 or len(ws) != len(bs):
            raise ValueError("need one bias vector per weight matrix and at least one layer")
        for l, (w, b) in enumerate(zip(ws, bs), start=1):
            if w.ndim != 2 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {l}: weight shape {w.shape} incompatible with bias {b.shape}")
            if l > 1 and w.shape[1] != ws[l - 2].shape[0]:
                raise ValueError(f"layer {l}: input width {w.shape[1]} != previous output {ws[l - 2].shape[0]}")
            w.setflags(write=False)
            b.setflags(write=False)
        if ws[-1].shape[0] != ws[0].shape[1] + 1:
            raise ValueError(
                f"output width must be d+1 = {ws[0].shape[1] + 1}, got {ws[-1].shape[0]}"
            )
        if not self.weight_bound > 0:
            raise ValueError("weight_bound must be positive")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.dim,) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def nonzero_count(self, layer: int | None = None) -> int:
        """Nonzero weights and biases in the first ``layer`` layers (all by default)."""
        layer = self.depth if layer is None else layer
        return int(
            sum(
                np.count_nonzero(w) + np.count_nonzero(b)
                for w, b in zip(self.weights[:layer], self.biases[:layer])
            )
        )

    def max_abs(self) -> float:
        return max(max(np.max(np.abs(w)), np.max(np.abs(b))) for w, b in zip(self.weights, self.biases))

    def flatten(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def unflatten(self, theta: np.ndarray) -> NetworkParams:
        return unflatten(self.widths, theta, self.weight_bound)


def unflatten(widths: Sequence[int], theta: np.ndarray, weight_bound: float = 1.0) -> NetworkParams:
    theta = np.asarray(theta, dtype=float)
    ws, bs, k = [], [], 0
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        ws.append(theta[k : k + n_in * n_out].reshape(n_out, n_in))
        k += n_in * n_out
        bs.append(theta[k : k + n_out])
        k += n_out
    if k != theta.size:
        raise ValueError(f"theta has {theta.size} entries, architecture needs {k}")
    return NetworkParams(tuple(ws), tuple(bs), weight_bound)


def init_params(widths: Sequence[int], weight_bound: float = 1.0, seed: int = 0) -> NetworkParams:
    """Uniform init in ``[-B, B]`` with ``B = min(weight_bound, sqrt(6 / (n_in + n_out)))``."""
    widths = [int(w) for w in widths]
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    ws, bs = [], []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        lim = min(weight_bound, math.sqrt(6.0 / (n_in + n_out)))
        ws.append(rng.uniform(-lim, lim, size=(n_out, n_in)))
        bs.append(rng.uniform(-lim, lim, size=n_out))
    return NetworkParams(tuple(ws), tuple(bs), weight_bound)


def zero_params(widths: Sequence[int], weight_bound: float = 1.0) -> NetworkParams:
    ws = [np.zeros((o, i)) for i, o in zip(widths[:-1], widths[1:])]
    bs = [np.zeros(o) for o in widths[1:]]
    return NetworkParams(tuple(ws), tuple(bs), weight_bound)


def clamp_to_bound(params: NetworkParams) -> NetworkParams:
    B = params.weight_bound
    return NetworkParams(
        tuple(np.clip(w, -B, B) for w in params.weights),
        tuple(np.clip(b, -B, B) for b in params.biases),
        B,
    )


def _as_batch(params: NetworkParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = x.reshape(1, -1) if single else x
    if x2.ndim != 2 or x2.shape[1] != params.dim:
        raise ValueError(f"expected points of dimension {params.dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x2)):
        raise ValueError("input points must be finite")
    return x2, single


def forward(params: NetworkParams, act, x) -> np.ndarray:
    """Network output ``f(x)`` of length ``d + 1`` (batched over leading axis)."""
    act = as_activation(act)
    x2, single = _as_batch(params, x)
    h = x2
    last = params.depth - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        if not np.all(np.isfinite(z)):
            raise NonFiniteError(l + 1)
        h = z if l == last else act.value(z)
    return h[0] if single else h


@dataclass
class _Tape:
    inputs: list  # H_{l-1} per layer, shape (M, 1+d, n_{l-1})
    pre: list  # Z_l per layer, shape (M, 1+d, n_l)
    d1: list  # rho'(z_l) for hidden layers
    d2: list  # rho''(z_l) for hidden layers


def _forward_tape(params: NetworkParams, act: Activation, x2: np.ndarray, keep: bool):
    m, d = x2.shape
    H = np.zeros((m, 1 + d, d))
    H[:, 0, :] = x2
    H[:, 1:, :] = np.eye(d)
    tape = _Tape([], [], [], []) if keep else None
    last = params.depth - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        Z = (H.reshape(-1, w.shape[1]) @ w.T).reshape(m, 1 + d, w.shape[0])
        Z[:, 0, :] += b
        # |rho'| <= 1, so a finite pre-activation jet gives a finite post-activation jet
        if not _finite(Z):
            raise NonFiniteError(l + 1)
        if keep:
            tape.inputs.append(H)
            tape.pre.append(Z)
        if l == last:
            H = Z
        else:
            r0, r1, r2 = act.derivatives(Z[:, 0, :])
            H = np.empty_like(Z)
            H[:, 0, :] = r0
            H[:, 1:, :] = Z[:, 1:, :] * r1[:, None, :]
            if keep:
                tape.d1.append(r1)
                tape.d2.append(r2)
    return H, tape


def _finite(a: np.ndarray) -> bool:
    # a sum is NaN/inf whenever any entry is; overflow of the sum itself is
    # rechecked elementwise
    return bool(np.isfinite(a.sum())) or bool(np.all(np.isfinite(a)))


def _jet_from_H(H: np.ndarray) -> Jet:
    return Jet(H[:, 0, :], np.swapaxes(H[:, 1:, :], 1, 2))


def forward_jet(params: NetworkParams, act, x) -> Jet:
    """Output and input Jacobian via forward-mode propagation."""
    act = as_activation(act)
    x2, single = _as_batch(params, x)
    H, _ = _forward_tape(params, act, x2, keep=False)
    jet = _jet_from_H(H)
    return jet[0] if single else jet


def forward_jet_tape(params: NetworkParams, act, x):
    act = as_activation(act)
    x2, _ = _as_batch(params, x)
    H, tape = _forward_tape(params, act, x2, keep=True)
    return _jet_from_H(H), tape


def jet_backward(params: NetworkParams, tape: _Tape, g_value: np.ndarray, g_jacobian: np.ndarray) -> np.ndarray:
    """Pull back cotangents on the output jet to a flat parameter gradient.

    ``g_value`` has shape ``(M, d+1)`` and ``g_jacobian`` shape ``(M, d+1, d)``;
    contributions are summed over the batch.
    """
    G = np.concatenate([g_value[:, None, :], np.swapaxes(g_jacobian, 1, 2)], axis=1)
    grads_w = [None] * params.depth
    grads_b = [None] * params.depth
    last = params.depth - 1
    for l in range(last, -1, -1):
        w = params.weights[l]
        if l == last:
            dZ = G
        else:
            r1, r2 = tape.d1[l], tape.d2[l]
            Z = tape.pre[l]
            dZ = np.empty_like(G)
            dZ[:, 1:, :] = G[:, 1:, :] * r1[:, None, :]
            ds = (G[:, 1:, :] * Z[:, 1:, :]).sum(axis=1)
            dZ[:, 0, :] = G[:, 0, :] * r1 + ds * r2
        Hin = tape.inputs[l]
        n_out, n_in = w.shape
        grads_w[l] = dZ.reshape(-1, n_out).T @ Hin.reshape(-1, n_in)
        grads_b[l] = dZ[:, 0, :].sum(axis=0)
        if l > 0:
            G = (dZ.reshape(-1, n_out) @ w).reshape(dZ.shape[0], dZ.shape[1], n_in)
        if not (_finite(grads_w[l]) and _finite(grads_b[l])):
            raise NonFiniteError(l + 1, "backward")
    parts = []
    for gw, gb in zip(grads_w, grads_b):
        parts.append(gw.ravel())
        parts.append(gb)
    return np.concatenate(parts)


JetFunctional = Callable[[Jet], tuple[float, np.ndarray, np.ndarray]]


def scalar_grad(params: NetworkParams, act, functional: JetFunctional, x) -> np.ndarray:
    """Gradient over flattened parameters of ``functional(forward_jet(params, x))``.

    ``functional`` receives the single-point jet and returns
    ``(value, d value / d jet.value, d value / d jet.jacobian)``.
    """
    jet, tape = forward_jet_tape(params, act, np.asarray(x, dtype=float).reshape(1, -1))
    _, gv, gj = functional(jet[0])
    gv = np.asarray(gv, dtype=float).reshape(1, -1)
    gj = np.asarray(gj, dtype=float).reshape(1, *jet.jacobian.shape[1:])
    return jet_backward(params, tape, gv, gj)


def dumps_exact(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON text with every float written as ``%.17g`` (bit-exact round trip)."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError("cannot serialize non-finite float")
        text = format(v, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = [f"{pad}{json.dumps(str(k))}: {dumps_exact(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}" if items else "{}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if all(isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(dumps_exact(v) for v in seq) + "]"
        items = [f"{pad}{dumps_exact(v, indent, _level + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]" if items else "[]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def params_to_dict(params: NetworkParams, act) -> dict:
    act = as_activation(act)
    return {
        "version": 1,
        "dim": params.dim,
        "depth": params.depth,
        "widths": list(params.widths),
        "activation": act.kind,
        "weight_bound": float(params.weight_bound),
        "layers": [
            {"A": w.tolist(), "b": b.tolist()} for w, b in zip(params.weights, params.biases)
        ],
    }


def save_checkpoint(path, params: NetworkParams, act) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_exact(params_to_dict(params, act)) + "\n")


def params_from_dict(doc: dict) -> tuple[NetworkParams, Activation]:
    if doc.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    layers = doc["layers"]
    params = NetworkParams(
        tuple(np.array(layer["A"], dtype=float) for layer in layers),
        tuple(np.array(layer["b"], dtype=float) for layer in layers),
        float(doc["weight_bound"]),
    )
    if list(params.widths) != list(doc["widths"]) or params.depth != doc["depth"] or params.dim != doc["dim"]:
        raise ValueError("checkpoint metadata does not match layer shapes")
    return params, Activation(doc["activation"])


def load_checkpoint(path) -> tuple[NetworkParams, Activation]:
    with open(path, encoding="utf-8") as fh:
        return params_from_dict(json.load(fh))
