"""Minimal neural-network engine: bounded sparse ReLU perceptrons.

A network is a composition of H affine layers with ReLU between them (none
after the last), outputs clamped coordinatewise to [-V, V].  Optional
constraints: every weight and bias in [-B, B], and at most R nonzero
parameters in total.  Gradients are exact reverse-mode; the output clamp
uses a pass-through gradient during training and a hard clamp at inference.

All arithmetic is float64.  Weight matrices are stored (fan_in, fan_out)
so a batch forward is ``h @ A + b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ioutil import Cursor, FormatError, pack

_MAGIC = b"CDNN"
_VERSION = 1


@dataclass(frozen=True)
class NetSpec:
    """Architecture and constraint set: widths W_1..W_{H+1}, sparsity R,
    weight bound B, output sup bound V.  ``None`` means unbounded R/B."""

    widths: tuple
    sparsity: int | None = None
    weight_bound: float | None = None
    output_bound: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError("need at least an input and an output width")
        if any(w < 1 for w in self.widths):
            raise ValueError("widths must be >= 1")
        if self.sparsity is not None and self.sparsity < self.widths[-1]:
            raise ValueError("sparsity budget below output bias count")
        if self.weight_bound is not None and not self.weight_bound > 0:
            raise ValueError("weight bound must be positive")
        if not self.output_bound > 0:
            raise ValueError("output bound must be positive")

    @property
    def height(self) -> int:
        return len(self.widths) - 1

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def param_count(self) -> int:
        return sum(a * b + b for a, b in zip(self.widths[:-1], self.widths[1:]))


class Mlp:
    """ReLU multilayer perceptron with explicit parameter arrays."""

    def __init__(self, spec: NetSpec, weights, biases):
        self.spec = spec
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        for i, (a, b) in enumerate(zip(spec.widths[:-1], spec.widths[1:])):
            if self.weights[i].shape != (a, b) or self.biases[i].shape != (b,):
                raise ValueError(f"layer {i} shape mismatch")

    @classmethod
    def init(cls, spec: NetSpec, rng: np.random.Generator) -> "Mlp":
        """He fan-in Gaussian weights (std sqrt(2/fan_in)), zero biases."""
        weights, biases = [], []
        for a, b in zip(spec.widths[:-1], spec.widths[1:]):
            weights.append(rng.standard_normal((a, b)) * math.sqrt(2.0 / a))
            biases.append(np.zeros(b))
        return cls(spec, weights, biases)

    def copy(self) -> "Mlp":
        return Mlp(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def params(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def param_count(self) -> int:
        return self.spec.param_count()

    def nonzero_count(self) -> int:
        return int(sum(np.count_nonzero(p) for p in self.params()))

    # forward / backward -------------------------------------------------

    def forward(self, x, clamp: bool = True):
        """Batch or single-point forward pass; hard output clamp to [-V, V]."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.spec.in_dim:
            raise ValueError(f"input width {h.shape[1]} != {self.spec.in_dim}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        if clamp and math.isfinite(self.spec.output_bound):
            v = self.spec.output_bound
            h = np.clip(h, -v, v)
        return h[0] if single else h

    def forward_cached(self, x):
        """Forward pass keeping pre-activations for backprop.

        Returns (clamped output, cache).  The clamp is applied to the value
        only; ``backward`` treats it as identity (pass-through gradient).
        """
        h = np.asarray(x, dtype=float)
        if h.ndim != 2 or h.shape[1] != self.spec.in_dim:
            raise ValueError("forward_cached expects a 2-D batch of matching width")
        acts = [h]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            if i < last:
                z = np.maximum(z, 0.0)
            acts.append(z)
        out = acts[-1]
        if math.isfinite(self.spec.output_bound):
            v = self.spec.output_bound
            out = np.clip(out, -v, v)
        return out, acts

    def backward(self, cache, grad_out):
        """Exact reverse-mode gradients given dLoss/dOutput for the batch."""
        acts = cache
        g = np.asarray(grad_out, dtype=float)
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = acts[i]
            grads_w[i] = h_in.T @ g
            grads_b[i] = g.sum(axis=0)
            if i > 0:
                g = g @ self.weights[i].T
                g = np.where(acts[i] > 0.0, g, 0.0)
        return list(zip(grads_w, grads_b))

    # serialization --------------------------------------------------------

    def to_bytes(self) -> bytes:
        parts = [_MAGIC, pack("H", _VERSION)]
        s = self.spec
        parts.append(pack("I", s.height))
        parts.append(pack(f"{s.height + 1}I", *s.widths))
        parts.append(pack("q", -1 if s.sparsity is None else s.sparsity))
        parts.append(pack("d", math.inf if s.weight_bound is None else s.weight_bound))
        parts.append(pack("d", s.output_bound))
        for p in self.params():
            parts.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
        return b"".join(parts)

    @classmethod
    def read_from(cls, cur: Cursor) -> "Mlp":
        cur.expect_magic(_MAGIC)
        (version,) = cur.unpack("H")
        if version != _VERSION:
            raise FormatError(f"unsupported network format version {version}")
        (height,) = cur.unpack("I")
        if height < 1 or height > 10_000:
            raise FormatError("implausible network height")
        widths = cur.unpack(f"{height + 1}I")
        (r,) = cur.unpack("q")
        (b_bound,) = cur.unpack("d")
        (v_bound,) = cur.unpack("d")
        spec = NetSpec(
            widths,
            sparsity=None if r < 0 else int(r),
            weight_bound=None if math.isinf(b_bound) else b_bound,
            output_bound=v_bound,
        )
        weights, biases = [], []
        for a, b in zip(widths[:-1], widths[1:]):
            weights.append(np.frombuffer(cur.take(8 * a * b), dtype="<f8").reshape(a, b).astype(float))
            biases.append(np.frombuffer(cur.take(8 * b), dtype="<f8").astype(float))
        return cls(spec, weights, biases)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Mlp":
        cur = Cursor(data)
        net = cls.read_from(cur)
        cur.done()
        return net


def serialize(net: Mlp) -> bytes:
    return net.to_bytes()


def deserialize(data: bytes) -> Mlp:
    return Mlp.from_bytes(data)


def grad(net: Mlp, loss_fn, batch_inputs):
    """Loss value and exact parameter gradients for one batch.

    ``loss_fn(outputs) -> (loss, dLoss/dOutputs)`` supplies the head; the
    clamp contributes a pass-through gradient.
    """
    out, cache = net.forward_cached(batch_inputs)
    loss, grad_out = loss_fn(out)
    return loss, net.backward(cache, grad_out)


@dataclass
class AdamState:
    """Adam moment accumulators; shapes mirror the parameter list."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = None
    v: list = None

    @classmethod
    def for_net(cls, net: Mlp, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            step=0,
            m=[np.zeros_like(p) for p in net.params()],
            v=[np.zeros_like(p) for p in net.params()],
        )


def adam_step(net: Mlp, state: AdamState, grads) -> Mlp:
    """Standard Adam update in place, then weight-bound enforcement if set."""
    state.step += 1
    t = state.step
    flat_grads = [g for pair in grads for g in pair]
    params = list(net.params())
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, flat_grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    if net.spec.weight_bound is not None:
        enforce_bounds(net, net.spec.weight_bound)
    return net


def enforce_bounds(net: Mlp, bound: float) -> Mlp:
    """Clip every weight and bias elementwise into [-B, B]."""
    if bound is None or math.isinf(bound):
        return net
    for p in net.params():
        np.clip(p, -bound, bound, out=p)
    return net


def prune_to_sparsity(net: Mlp, budget: int) -> Mlp:
    """Zero the smallest-magnitude parameters until at most ``budget`` remain."""
    if budget < net.spec.out_dim:
        raise ValueError("sparsity budget below output bias count")
    params = list(net.params())
    flat = np.concatenate([p.ravel() for p in params])
    nonzero = np.count_nonzero(flat)
    if nonzero <= budget:
        return net
    order = np.argsort(-np.abs(flat), kind="stable")
    kill = order[budget:]
    flat[kill] = 0.0
    pos = 0
    for p in params:
        p.ravel()[:] = flat[pos : pos + p.size]
        pos += p.size
    return net
