"""Piecewise-in-time conditional score model and its training loop.

The model holds one bounded ReLU network per dyadic time bin on a geometric
grid t_0 = tau < t_1 < ... < t_I = T with t_{i+1}/t_i = 2; a query (y, x, t)
is routed to the unique bin containing t (bins left-closed, the last closed
at T).  Bin i's network maps the concatenated input [y; x; t] to an
estimated conditional score in R^{D_Y}.

Training minimizes the empirical denoising conditional score-matching risk
with time weight t: per bin, times are drawn with density proportional to t
(inverse CDF), a forward-kernel perturbation of each data point supplies the
regression target, and the mean squared error times the bin normalizer
(t_i^2 - t_{i-1}^2)/2 estimates the weighted time integral.  Bins train
independently with per-bin rng streams.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import net as nets
from . import ou
from .ioutil import Cursor, FormatError, NumericError, pack

_MAGIC = b"CDSM"
_VERSION = 1


@dataclass(frozen=True)
class ProblemSpec:
    """Dimensions, smoothness, and sample size driving the size schedule."""

    dim_x: int
    dim_y: int
    intrinsic_x: int
    intrinsic_y: int
    alpha_x: float
    alpha_y: float
    n: int

    def __post_init__(self):
        if min(self.dim_x, self.dim_y, self.intrinsic_x, self.intrinsic_y) < 1:
            raise ValueError("dimensions must be positive")
        if self.intrinsic_x > self.dim_x or self.intrinsic_y > self.dim_y:
            raise ValueError("intrinsic dimension exceeds ambient dimension")
        if self.alpha_x <= 0 or self.alpha_y <= 0:
            raise ValueError("smoothness exponents must be positive")
        if self.n < 1:
            raise ValueError("sample size must be positive")

    def epsilon1(self, mode: str = "euclidean") -> float:
        """Base accuracy n^(-1 / (2 a_Y + d_Y + (a_Y/a_X) d_X)); euclidean
        mode uses ambient dimensions, manifold mode intrinsic ones."""
        dx, dy = _mode_dims(self, mode)
        expo = 2.0 * self.alpha_y + dy + (self.alpha_y / self.alpha_x) * dx
        return float(self.n ** (-1.0 / expo))


def _mode_dims(spec: ProblemSpec, mode: str):
    if mode == "euclidean":
        return spec.dim_x, spec.dim_y
    if mode == "manifold":
        return spec.intrinsic_x, spec.intrinsic_y
    raise ValueError(f"unknown mode {mode!r}")


def w1_rate_exponent(spec: ProblemSpec, mode: str = "euclidean") -> float:
    """Theoretical Wasserstein error exponent: the slower of the covariate
    term -1/(2 + d_X/a_X) and the conditional-law term
    -(1 + 1/a_Y)/(2 + d_X/a_X + d_Y/a_Y)."""
    dx, dy = _mode_dims(spec, mode)
    first = -1.0 / (2.0 + dx / spec.alpha_x)
    second = -(1.0 + 1.0 / spec.alpha_y) / (2.0 + dx / spec.alpha_x + dy / spec.alpha_y)
    return max(first, second)


def tv_rate_exponent(spec: ProblemSpec, mode: str = "euclidean") -> float:
    """Theoretical total-variation error exponent -1/(2 + d_X/a_X + d_Y/a_Y)."""
    dx, dy = _mode_dims(spec, mode)
    return -1.0 / (2.0 + dx / spec.alpha_x + dy / spec.alpha_y)


@dataclass(frozen=True)
class TimePartition:
    """Dyadic grid tau = T/2^I < ... < T with consecutive-knot ratio 2."""

    horizon: float
    n_bins: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.n_bins < 1:
            raise ValueError("need at least one bin")

    @property
    def tau(self) -> float:
        return self.horizon / float(2**self.n_bins)

    def knots(self) -> np.ndarray:
        return self.horizon / 2.0 ** np.arange(self.n_bins, -1, -1, dtype=float)

    def bin_range(self, i: int):
        if not 0 <= i < self.n_bins:
            raise ValueError(f"bin index {i} out of range")
        k = self.knots()
        return float(k[i]), float(k[i + 1])

    def bin_index(self, t: float) -> int:
        """Route t to its bin: [t_{i-1}, t_i), with the last bin closed at T."""
        if not self.tau <= t <= self.horizon:
            raise ValueError(f"time {t} outside [{self.tau}, {self.horizon}]")
        k = self.knots()
        i = int(np.searchsorted(k, t, side="right")) - 1
        return min(max(i, 0), self.n_bins - 1)


def v_level(n: int, t: float, c_v: float = 1.0) -> float:
    """Per-bin output clamp level c_V sqrt(log n / min(t, 1))."""
    return c_v * math.sqrt(math.log(n) / min(t, 1.0))


DEFAULT_CONSTANTS = {"c_tau": 1.0, "c_T": 1.0, "c_H": 1.0, "c_W": 1.0, "c_R": 1.0, "c_V": 1.0}
DEFAULT_CAPS = {"cap_height": 6, "cap_width": 256, "width_floor": 4, "enforce_sparsity": False, "enforce_weight_bound": False}


@dataclass
class Schedule:
    """Resolved theorem-driven schedule: partition, per-bin network specs,
    and a log table carrying both raw formula values and applied caps."""

    partition: TimePartition
    net_specs: list
    table: list
    mode: str
    constants: dict
    caps: dict
    epsilon1: float
    tau_raw: float

    def to_jsonable(self) -> dict:
        return {
            "mode": self.mode,
            "constants": self.constants,
            "caps": self.caps,
            "epsilon1": self.epsilon1,
            "tau_raw": self.tau_raw,
            "horizon": self.partition.horizon,
            "n_bins": self.partition.n_bins,
            "tau": self.partition.tau,
            "bins": self.table,
        }


def schedule_from_theory(spec: ProblemSpec, mode: str = "euclidean", constants: dict | None = None, caps: dict | None = None) -> Schedule:
    """Evaluate the size formulas for the piecewise score family.

    With multiplier constants c and dimensions (δ_X, δ_Y) chosen by mode:

      eps1   = n^(-1/(2 a_Y + δ_Y + (a_Y/a_X) δ_X))
      tau    = T / 2^I rounded down from c_tau eps1^(2(a_Y+1)),  T = c_T log n
      H_i    = c_H ceil(log^4 n)                  (capped)
      w_i    = c_W (n^(δ_X/(2a_X+δ_X)) t_i^(-a_X δ_Y/(2a_X+δ_X))
                    min  eps1^(-δ_Y - a_Y δ_X / a_X))            (capped)
      R_i    = same expression with c_R           (logged; off by default)
      B_i    = exp(4 log n) and exp(log^4 n) both logged; unbounded applied
      V_i    = c_V sqrt(log n / min(t_i, 1))

    The raw value and the applied (capped/floored) value of every quantity
    are recorded in the returned table.
    """
    c = dict(DEFAULT_CONSTANTS)
    c.update(constants or {})
    cap = dict(DEFAULT_CAPS)
    cap.update(caps or {})

    dx_dim, dy_dim = _mode_dims(spec, mode)
    ax, ay, n = spec.alpha_x, spec.alpha_y, spec.n
    logn = math.log(n)
    eps1 = spec.epsilon1(mode)

    tau_raw = c["c_tau"] * eps1 ** (2.0 * (ay + 1.0))
    horizon = c["c_T"] * logn
    if tau_raw >= horizon:
        raise ValueError("early-stopping time not below the horizon; increase n or adjust constants")
    n_bins = max(1, math.ceil(math.log2(horizon / tau_raw)))
    partition = TimePartition(horizon=horizon, n_bins=n_bins)

    h_raw = c["c_H"] * logn**4
    height = int(min(cap["cap_height"], max(1, math.ceil(h_raw))))

    knots = partition.knots()
    in_dim = spec.dim_y + spec.dim_x + 1
    specs, table = [], []
    for i in range(n_bins):
        t_hi = float(knots[i + 1])
        w_growth = n ** (dx_dim / (2.0 * ax + dx_dim)) * t_hi ** (-ax * dy_dim / (2.0 * ax + dx_dim))
        w_cap_term = eps1 ** (-dy_dim - ay * dx_dim / ax)
        w_raw = c["c_W"] * min(w_growth, w_cap_term)
        width = int(min(cap["cap_width"], max(cap["width_floor"], math.ceil(w_raw))))
        r_raw = c["c_R"] * min(w_growth, w_cap_term)
        v_i = v_level(n, t_hi, c["c_V"])
        widths = (in_dim,) + (width,) * (height - 1) + (spec.dim_y,)
        sparsity = int(math.ceil(r_raw)) if cap["enforce_sparsity"] else None
        if sparsity is not None:
            sparsity = max(sparsity, spec.dim_y)
        ns = nets.NetSpec(widths, sparsity=sparsity, weight_bound=None, output_bound=v_i)
        specs.append(ns)
        table.append(
            {
                "bin": i,
                "t_lo": float(knots[i]),
                "t_hi": t_hi,
                "height_raw": h_raw,
                "height": height,
                "width_raw": w_raw,
                "width": width,
                "sparsity_raw": r_raw,
                "sparsity": sparsity,
                "weight_bound_log_4logn": 4.0 * logn,
                "weight_bound_log_logn4": logn**4,
                "weight_bound": None,
                "v_level": v_i,
                "params": ns.param_count(),
            }
        )
    return Schedule(
        partition=partition,
        net_specs=specs,
        table=table,
        mode=mode,
        constants=c,
        caps=cap,
        epsilon1=eps1,
        tau_raw=tau_raw,
    )


def sample_time(a: float, b: float, rng: np.random.Generator, size=None):
    """Draw t with density proportional to t on [a, b] via the inverse CDF
    t = sqrt(a^2 + u (b^2 - a^2)); realizes the t-weighted time integral by
    importance sampling."""
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    u = rng.random(size)
    return np.sqrt(a * a + u * (b * b - a * a))


@dataclass
class TrainConfig:
    """Optimizer and sampling knobs for the per-bin training loops."""

    steps_per_bin: int = 400
    batch_size: int = 128
    draws_per_point: int = 2
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    prune_every: int = 500
    time_sampling: str = "weighted"
    seed: int = 0

    def __post_init__(self):
        if min(self.steps_per_bin, self.batch_size, self.draws_per_point) < 1:
            raise ValueError("counts must be positive")
        if self.time_sampling not in ("weighted", "uniform"):
            raise ValueError("time_sampling must be 'weighted' or 'uniform'")


def dsm_loss(network: nets.Mlp, t_lo: float, t_hi: float, x_batch, y_batch, schedule: ou.OUSchedule, rng: np.random.Generator, draws: int = 1, time_sampling: str = "weighted", with_grads: bool = True):
    """Denoising score-matching loss (and gradients) for one bin minibatch.

    Each data point is perturbed ``draws`` times at an independently drawn
    time; the network regresses onto the forward-kernel score.  The returned
    value estimates the t-weighted risk integral over [t_lo, t_hi].
    """
    x_batch = np.asarray(x_batch, dtype=float)
    y_batch = np.asarray(y_batch, dtype=float)
    if x_batch.ndim != 2 or y_batch.ndim != 2 or len(x_batch) != len(y_batch):
        raise ValueError("expect matching 2-D covariate and response batches")
    if len(x_batch) == 0:
        raise ValueError("empty batch")
    x_rep = np.repeat(x_batch, draws, axis=0)
    y_rep = np.repeat(y_batch, draws, axis=0)
    m = len(x_rep)
    normalizer = 0.5 * (t_hi * t_hi - t_lo * t_lo)
    if time_sampling == "weighted":
        t = sample_time(t_lo, t_hi, rng, size=m)
        weights = np.full(m, normalizer)
    else:
        t = rng.uniform(t_lo, t_hi, size=m)
        weights = t * (t_hi - t_lo)
    y_t = ou.perturb(schedule, y_rep, t, rng)
    target = ou.kernel_score(schedule, y_t, y_rep, t)
    inputs = np.concatenate([y_t, x_rep, t[:, None]], axis=1)

    def loss_fn(out):
        diff = out - target
        per = np.sum(diff * diff, axis=1)
        loss = float(np.mean(weights * per))
        grad_out = (2.0 / m) * weights[:, None] * diff
        return loss, grad_out

    if not with_grads:
        out = network.forward(inputs)
        return loss_fn(out)[0], None
    loss, grads = nets.grad(network, loss_fn, inputs)
    return loss, grads


class ScoreModel:
    """Trained piecewise conditional score: one network per dyadic bin."""

    def __init__(self, problem: ProblemSpec, schedule: ou.OUSchedule, partition: TimePartition, networks: list):
        if len(networks) != partition.n_bins:
            raise ValueError("one network per bin required")
        self.problem = problem
        self.schedule = schedule
        self.partition = partition
        self.networks = networks

    def eval(self, y, x, t: float):
        """Score estimate at a single time for one point or a batch.

        ``t`` is routed to its bin; the bin network sees [y; x; t] and its
        output is clamped to the bin's V level.
        """
        i = self.partition.bin_index(float(t))
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        single = y.ndim == 1
        yb = y[None, :] if single else y
        xb = np.broadcast_to(x, (len(yb), self.problem.dim_x)) if x.ndim == 1 else x
        tb = np.full((len(yb), 1), float(t))
        out = self.networks[i].forward(np.concatenate([yb, xb, tb], axis=1))
        return out[0] if single else out

    def eval_times(self, y, x, t):
        """Vectorized over per-row times: groups rows by bin internally."""
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.empty((len(y), self.problem.dim_y))
        bins = np.array([self.partition.bin_index(float(ti)) for ti in t])
        for i in np.unique(bins):
            sel = bins == i
            inputs = np.concatenate([y[sel], x[sel], t[sel, None]], axis=1)
            out[sel] = self.networks[i].forward(inputs)
        return out

    def as_score_fn(self):
        """Adapter with the (y, x, t) -> score signature the sampler expects."""
        return lambda y, x, t: self.eval(y, x, t)

    # persistence ---------------------------------------------------------

    def to_bytes(self) -> bytes:
        p = self.problem
        parts = [_MAGIC, pack("H", _VERSION)]
        parts.append(pack("IIIIddQ", p.dim_x, p.dim_y, p.intrinsic_x, p.intrinsic_y, p.alpha_x, p.alpha_y, p.n))
        if self.schedule.kind == "constant":
            parts.append(pack("Bd", 0, self.schedule.delta0))
        else:
            parts.append(pack("Bd", 1, self.schedule.delta0))
            parts.append(pack("I", len(self.schedule.times)))
            for t, d in zip(self.schedule.times, self.schedule.deltas):
                parts.append(pack("dd", t, d))
        parts.append(pack("dI", self.partition.horizon, self.partition.n_bins))
        for network in self.networks:
            parts.append(network.to_bytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ScoreModel":
        cur = Cursor(data)
        cur.expect_magic(_MAGIC)
        (version,) = cur.unpack("H")
        if version != _VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        dx, dy, ix, iy, ax, ay, n = cur.unpack("IIIIddQ")
        problem = ProblemSpec(dx, dy, ix, iy, ax, ay, n)
        kind, delta0 = cur.unpack("Bd")
        if kind == 0:
            schedule = ou.OUSchedule(kind="constant", delta0=delta0)
        else:
            (npts,) = cur.unpack("I")
            pairs = [cur.unpack("dd") for _ in range(npts)]
            schedule = ou.OUSchedule(kind="tabulated", delta0=delta0, times=[p[0] for p in pairs], deltas=[p[1] for p in pairs])
        horizon, n_bins = cur.unpack("dI")
        partition = TimePartition(horizon=horizon, n_bins=n_bins)
        networks = [nets.Mlp.read_from(cur) for _ in range(n_bins)]
        cur.done()
        return cls(problem, schedule, partition, networks)

    def save(self, path):
        from .ioutil import atomic_write_bytes

        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def load(cls, path) -> "ScoreModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _bin_rng(seed: int, bin_index: int, label: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, label, bin_index])


def train(x_data, y_data, schedule: Schedule, ou_schedule: ou.OUSchedule, problem: ProblemSpec, config: TrainConfig, init_networks: list | None = None, rng_label: int = 0, bin_order=None):
    """Fit every bin network independently; returns (model, trace rows).

    Bins draw from per-bin rng streams derived from (seed, bin index), so
    the result is independent of training order and reproducible given the
    seed.  Raises NumericError with (bin, step) diagnostics on NaN loss.
    """
    x_data = np.asarray(x_data, dtype=float)
    y_data = np.asarray(y_data, dtype=float)
    if len(x_data) == 0:
        raise ValueError("empty dataset")
    if x_data.shape[1] != problem.dim_x or y_data.shape[1] != problem.dim_y:
        raise ValueError("dataset dimensions do not match the problem spec")
    partition = schedule.partition
    n_bins = partition.n_bins
    networks = [None] * n_bins
    traces = []
    order = list(range(n_bins)) if bin_order is None else list(bin_order)
    for i in order:
        rng = _bin_rng(config.seed, i, rng_label)
        t_lo, t_hi = partition.bin_range(i)
        spec_i = schedule.net_specs[i]
        network = init_networks[i].copy() if init_networks is not None else nets.Mlp.init(spec_i, rng)
        state = nets.AdamState.for_net(network, lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)
        n = len(x_data)
        for step in range(config.steps_per_bin):
            t0 = time.perf_counter()
            idx = rng.integers(0, n, size=min(config.batch_size, n))
            loss, grads = dsm_loss(
                network,
                t_lo,
                t_hi,
                x_data[idx],
                y_data[idx],
                ou_schedule,
                rng,
                draws=config.draws_per_point,
                time_sampling=config.time_sampling,
            )
            if not math.isfinite(loss):
                raise NumericError(f"non-finite loss in bin {i} at step {step}")
            nets.adam_step(network, state, grads)
            if spec_i.sparsity is not None and (step + 1) % config.prune_every == 0:
                nets.prune_to_sparsity(network, spec_i.sparsity)
            traces.append({"bin": i, "step": step, "loss": loss, "wall_ms": (time.perf_counter() - t0) * 1e3})
        if spec_i.sparsity is not None:
            nets.prune_to_sparsity(network, spec_i.sparsity)
        networks[i] = network
    model = ScoreModel(problem, ou_schedule, partition, networks)
    return model, traces


def train_monolithic(x_data, y_data, net_spec: nets.NetSpec, partition: TimePartition, ou_schedule: ou.OUSchedule, config: TrainConfig, total_steps: int | None = None):
    """Fit a single network across space and time on [tau, T].

    Baseline arm for the architecture comparison: the same denoising
    objective, with times drawn over the whole range instead of per bin.
    """
    x_data = np.asarray(x_data, dtype=float)
    y_data = np.asarray(y_data, dtype=float)
    rng = np.random.default_rng([config.seed, 2])
    network = nets.Mlp.init(net_spec, rng)
    state = nets.AdamState.for_net(network, lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)
    steps = total_steps if total_steps is not None else config.steps_per_bin
    n = len(x_data)
    for step in range(steps):
        idx = rng.integers(0, n, size=min(config.batch_size, n))
        loss, grads = dsm_loss(
            network,
            partition.tau,
            partition.horizon,
            x_data[idx],
            y_data[idx],
            ou_schedule,
            rng,
            draws=config.draws_per_point,
            time_sampling=config.time_sampling,
        )
        if not math.isfinite(loss):
            raise NumericError(f"non-finite loss in monolithic training at step {step}")
        nets.adam_step(network, state, grads)
    return network
