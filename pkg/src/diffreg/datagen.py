"""Synthetic joint laws with exact conditional samplers and score oracles.

Each generator fixes a joint distribution over (X, Y) with a smooth link
between covariate and response, declares its dimensions, smoothness
metadata, density floor, and sup-norm radius, and provides:

  * sample_joint    -- i.i.d. draws of (X, Y) for training,
  * sample_conditional -- exact draws from the conditional law at a given x
                          (the evaluation ground truth),
  * analytic_score  -- where available, the exact score of the noised
                       conditional law (Gaussian-mixture families),
  * distance_to_support -- for manifold variants, Euclidean distance of a
                       point to the section manifold at x.

Randomized embeddings (frames, curves) are derived once from a seed stored
in the generator so ambient-dimension experiments are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import ou
from .ioutil import Cursor, FormatError, pack

_MAGIC = b"CDRG"
_VERSION = 1
_X_TOL = 1e-9


class UnsupportedScore(ValueError):
    """Raised when a generator has no analytic score for oracle runs."""


@dataclass
class Dataset:
    """An (X, Y) sample with provenance (generator descriptor + seed)."""

    x: np.ndarray
    y: np.ndarray
    provenance: dict

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if len(self.x) != len(self.y):
            raise ValueError("X and Y row counts differ")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def dim_x(self) -> int:
        return self.x.shape[1]

    @property
    def dim_y(self) -> int:
        return self.y.shape[1]

    def to_bytes(self) -> bytes:
        head = _MAGIC + pack("HQII", _VERSION, self.n, self.dim_x, self.dim_y)
        return head + np.ascontiguousarray(self.x, dtype="<f8").tobytes() + np.ascontiguousarray(self.y, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, provenance: dict | None = None) -> "Dataset":
        cur = Cursor(data)
        cur.expect_magic(_MAGIC)
        version, n, dx, dy = cur.unpack("HQII")
        if version != _VERSION:
            raise FormatError(f"unsupported dataset version {version}")
        x = np.frombuffer(cur.take(8 * n * dx), dtype="<f8").reshape(n, dx).astype(float)
        y = np.frombuffer(cur.take(8 * n * dy), dtype="<f8").reshape(n, dy).astype(float)
        cur.done()
        return cls(x, y, provenance or {})

    def save(self, path):
        from .ioutil import atomic_write_bytes

        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def load(cls, path) -> "Dataset":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), provenance={"path": str(path)})

    def to_csv(self, path):
        from .ioutil import atomic_write_text

        header = ",".join([f"x{i}" for i in range(self.dim_x)] + [f"y{i}" for i in range(self.dim_y)])
        rows = [header]
        mat = np.concatenate([self.x, self.y], axis=1)
        rows.extend(",".join(repr(v) for v in row) for row in mat)
        atomic_write_text(path, "\n".join(rows) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            dx = sum(1 for c in header if c.startswith("x"))
            dy = len(header) - dx
            mat = np.loadtxt(fh, delimiter=",", ndmin=2)
        if mat.shape[1] != dx + dy:
            raise FormatError("column count does not match header")
        return cls(mat[:, :dx], mat[:, dx:], provenance={"path": str(path)})


# ---------------------------------------------------------------------------
# mixture score machinery
#
# Every supported conditional law is (for score purposes) a mixture of
# "atoms" (coef, mean, var): after time t of forward noising an atom
# N(mu, s^2) becomes N(m_t mu, m_t^2 s^2 + sigma_t^2), and the smooth bump
# floor enters through Gauss-Legendre nodes of its exact convolution
# integral.  Density and score then follow from the weighted-component
# formulas with max-subtraction for stability.
# ---------------------------------------------------------------------------


def _mixture_score_1d(y, atoms_coef, atoms_mean, atoms_var):
    y = np.asarray(y, dtype=float)
    yy = y[..., None]
    log_n = -0.5 * (yy - atoms_mean) ** 2 / atoms_var - 0.5 * np.log(2.0 * np.pi * atoms_var)
    log_terms = np.log(atoms_coef) + log_n
    peak = np.max(log_terms, axis=-1, keepdims=True)
    w = np.exp(log_terms - peak)
    dens = np.sum(w, axis=-1)
    slope = np.sum(w * (atoms_mean - yy) / atoms_var, axis=-1)
    return slope / dens


_BUMP_Z = None


def _bump_norm() -> float:
    global _BUMP_Z
    if _BUMP_Z is None:
        _BUMP_Z = quad(lambda u: math.exp(-1.0 / (1.0 - u * u)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)[0]
    return _BUMP_Z


def bump_pdf(y):
    """Normalized C-infinity bump density on (-1, 1)."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    out[inside] = np.exp(-1.0 / (1.0 - yi * yi)) / _bump_norm()
    return out


_BUMP_GRID = None


def _bump_inverse_cdf(u):
    global _BUMP_GRID
    if _BUMP_GRID is None:
        g = np.linspace(-1.0, 1.0, 8193)
        pdf = bump_pdf(g)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(g))])
        cdf /= cdf[-1]
        _BUMP_GRID = (cdf, g)
    cdf, g = _BUMP_GRID
    return np.interp(u, cdf, g)


def _bump_atoms(t_mean: float, t_var: float, n_nodes: int):
    """Gauss-Legendre discretization of the noised bump: the convolution
    integral of bump(z) against N(y; t_mean*z, t_var) as mixture atoms."""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    coef = weights * bump_pdf(nodes)
    keep = coef > 0
    return coef[keep], t_mean * nodes[keep], np.full(int(np.sum(keep)), t_var)


def _invert_cdf(cdf, pdf, u, lo: float, hi: float, iters: int = 60):
    """Vectorized safeguarded Newton for a strictly increasing CDF."""
    u = np.asarray(u, dtype=float)
    lo_b = np.full(u.shape, float(lo))
    hi_b = np.full(u.shape, float(hi))
    z = lo + (hi - lo) * u
    for _ in range(iters):
        f = cdf(z) - u
        lo_b = np.where(f < 0, z, lo_b)
        hi_b = np.where(f > 0, z, hi_b)
        step = f / np.maximum(pdf(z), 1e-12)
        z_new = z - step
        outside = (z_new <= lo_b) | (z_new >= hi_b)
        z_new = np.where(outside, 0.5 * (lo_b + hi_b), z_new)
        if np.max(np.abs(z_new - z)) < 1e-14:
            z = z_new
            break
        z = z_new
    return z


def _orthonormal_frame(dim: int, cols: int, seed: int) -> np.ndarray:
    """Deterministic orthonormal (dim, cols) frame from a named seed."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, max(cols, 1))))
    q = q * np.sign(np.diag(r))
    return q[:, :cols]


class Generator:
    """Base synthetic joint law; subclasses fill the declared metadata."""

    name = "base"
    alpha_x = 1.0
    alpha_y = 1.0
    beta_x = math.inf
    beta_y = math.inf
    density_floor = None
    has_analytic_score = False

    dim_x: int
    dim_y: int
    intrinsic_x: int
    intrinsic_y: int
    y_radius: float
    x_radius: float = 1.0

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dim_x": self.dim_x,
            "dim_y": self.dim_y,
            "intrinsic_x": self.intrinsic_x,
            "intrinsic_y": self.intrinsic_y,
            "alpha_x": self.alpha_x,
            "alpha_y": self.alpha_y,
            "y_radius": self.y_radius,
            "params": self.params(),
        }

    def sample_x(self, m: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(m, self.dim_x))

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.dim_x,):
            raise ValueError(f"covariate must have dimension {self.dim_x}")
        if np.max(np.abs(x)) > self.x_radius + _X_TOL:
            raise ValueError("covariate outside the declared covariate space")
        return x

    def sample_conditional(self, x, k: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sample_joint(self, n: int, rng: np.random.Generator, seed=None) -> Dataset:
        if n < 1:
            raise ValueError("need n >= 1")
        xs = self.sample_x(n, rng)
        ys = np.empty((n, self.dim_y))
        for i in range(n):
            ys[i] = self.sample_conditional(xs[i], 1, rng)[0]
        return Dataset(xs, ys, provenance={"generator": self.describe(), "seed": seed})

    def analytic_score(self, x, y, schedule: ou.OUSchedule, t):
        raise UnsupportedScore(f"generator {self.name!r} has no analytic score")

    def conditional_mean(self, x) -> np.ndarray:
        raise NotImplementedError(f"generator {self.name!r} has no closed-form conditional mean")

    def distance_to_support(self, x, y) -> np.ndarray:
        raise NotImplementedError(f"generator {self.name!r} declares no section manifold")


class CondGaussian(Generator):
    """Y | x = f(x) + s Z with isotropic Gaussian noise and a smooth link.

    ``link='affine'`` uses f(x) = A x + b, ``link='sin'`` uses
    f(x) = A sin(pi x) + b; scalar slope/intercept broadcast to the shapes
    (dim_y, dim_x) and (dim_y,).  Supports the exact noised score.
    """

    name = "cond_gaussian"
    has_analytic_score = True

    def __init__(self, dim_x: int = 1, dim_y: int = 1, slope=0.5, intercept=0.0, noise: float = 0.25, link: str = "affine"):
        if noise <= 0:
            raise ValueError("noise scale must be positive")
        if link not in ("affine", "sin"):
            raise ValueError("link must be 'affine' or 'sin'")
        self.dim_x, self.dim_y = int(dim_x), int(dim_y)
        self.intrinsic_x, self.intrinsic_y = self.dim_x, self.dim_y
        self.slope = np.broadcast_to(np.asarray(slope, dtype=float), (self.dim_y, self.dim_x)).copy() if np.ndim(slope) == 0 else np.asarray(slope, dtype=float).reshape(self.dim_y, self.dim_x)
        self.intercept = np.broadcast_to(np.asarray(intercept, dtype=float), (self.dim_y,)).copy() if np.ndim(intercept) == 0 else np.asarray(intercept, dtype=float).reshape(self.dim_y)
        self.noise = float(noise)
        self.link = link
        self.y_radius = float(np.max(np.abs(self.slope).sum(axis=1) + np.abs(self.intercept)) + 4.0 * self.noise)
        self.alpha_x = math.inf if link == "affine" else 2.0
        self.alpha_y = math.inf

    def params(self) -> dict:
        return {"slope": self.slope.tolist(), "intercept": self.intercept.tolist(), "noise": self.noise, "link": self.link}

    def mean_fn(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        feat = x if self.link == "affine" else np.sin(np.pi * x)
        return feat @ self.slope.T + self.intercept

    def conditional_mean(self, x) -> np.ndarray:
        return self.mean_fn(self._check_x(x))

    def sample_conditional(self, x, k: int, rng: np.random.Generator) -> np.ndarray:
        x = self._check_x(x)
        return self.mean_fn(x) + self.noise * rng.standard_normal((k, self.dim_y))

    def sample_joint(self, n: int, rng: np.random.Generator, seed=None) -> Dataset:
        if n < 1:
            raise ValueError("need n >= 1")
        xs = self.sample_x(n, rng)
        ys = self.mean_fn(xs) + self.noise * rng.standard_normal((n, self.dim_y))
        return Dataset(xs, ys, provenance={"generator": self.describe(), "seed": seed})

    def analytic_score(self, x, y, schedule: ou.OUSchedule, t):
        x = self._check_x(x)
        return ou.gaussian_marginal_score(schedule, self.mean_fn(x), self.noise, y, t)


class Bimodal1d(Generator):
    """Two Gaussian modes at -1/2 and +1/2 whose weights trade off smoothly
    with x, plus a fixed smooth bump floor keeping the density bounded below
    on the interior of [-1, 1].

    Mixture at covariate x with w(x) = (1 + sin(pi x))/2:

        0.9 w(x) N(-0.5, s^2) + 0.9 (1 - w(x)) N(0.5, s^2) + 0.1 bump.

    The noised conditional law stays an explicit mixture (the bump enters
    through its exact convolution integral), so the score oracle is
    available at any t > 0.
    """

    name = "bimodal1d"
    has_analytic_score = True
    density_floor = 0.02  # certified on [-0.95, 0.95]; the bump vanishes at +/-1
    floor_domain = 0.95

    def __init__(self, noise: float = 0.25, floor_weight: float = 0.1, mode: float = 0.5):
        if not 0 < floor_weight < 1:
            raise ValueError("floor weight must be in (0, 1)")
        if noise <= 0 or mode <= 0:
            raise ValueError("noise and mode offset must be positive")
        self.dim_x = self.dim_y = self.intrinsic_x = self.intrinsic_y = 1
        self.noise = float(noise)
        self.floor_weight = float(floor_weight)
        self.mode = float(mode)
        self.y_radius = max(1.0, self.mode + 4.0 * self.noise)

    def params(self) -> dict:
        return {"noise": self.noise, "floor_weight": self.floor_weight, "mode": self.mode}

    def mix_weight(self, x) -> float:
        return 0.5 * (1.0 + math.sin(math.pi * float(np.asarray(x).reshape(-1)[0])))

    def component_weights(self, x):
        w = self.mix_weight(x)
        g = 1.0 - self.floor_weight
        return np.array([g * w, g * (1.0 - w), self.floor_weight])

    def conditional_mean(self, x) -> np.ndarray:
        x = self._check_x(x)
        cw = self.component_weights(x)
        return np.array([cw[0] * (-self.mode) + cw[1] * self.mode])

    def density(self, x, y) -> np.ndarray:
        """Exact conditional density at t = 0."""
        x = self._check_x(x)
        y = np.asarray(y, dtype=float)
        cw = self.component_weights(x)
        s = self.noise
        gauss = lambda mu: np.exp(-0.5 * (y - mu) ** 2 / s**2) / (s * math.sqrt(2.0 * math.pi))
        return cw[0] * gauss(-self.mode) + cw[1] * gauss(self.mode) + cw[2] * bump_pdf(y)

    def sample_conditional(self, x, k: int, rng: np.random.Generator) -> np.ndarray:
        x = self._check_x(x)
        cw = self.component_weights(x)
        comp = rng.choice(3, size=k, p=cw)
        out = np.empty(k)
        n_g = int(np.sum(comp < 2))
        draws = rng.standard_normal(n_g) * self.noise
        means = np.where(comp[comp < 2] == 0, -self.mode, self.mode)
        out[comp < 2] = means + draws
        n_b = k - n_g
        if n_b:
            out[comp == 2] = _bump_inverse_cdf(rng.random(n_b))
        return out[:, None]

    def _atoms(self, x, schedule: ou.OUSchedule, t: float):
        m = float(ou.mean_coeff(schedule, t))
        var = float(ou.noise_var(schedule, t))
        cw = self.component_weights(x)
        coefs = [cw[0], cw[1]]
        means = [-m * self.mode, m * self.mode]
        vars_ = [m * m * self.noise**2 + var, m * m * self.noise**2 + var]
        sd = math.sqrt(var)
        n_nodes = int(min(4000, max(200, math.ceil(8.0 * 2.0 / max(sd, 1e-3)))))
        bc, bm, bv = _bump_atoms(m, var, n_nodes)
        coefs = np.concatenate([coefs, cw[2] * bc])
        means = np.concatenate([means, bm])
        vars_ = np.concatenate([vars_, bv])
        return coefs, means, vars_

    def analytic_score(self, x, y, schedule: ou.OUSchedule, t):
        x = self._check_x(x)
        t = float(t)
        if t <= 0:
            raise ValueError("analytic score requires t > 0")
        coefs, means, vars_ = self._atoms(x, schedule, t)
        y = np.asarray(y, dtype=float)
        scores = _mixture_score_1d(y.reshape(-1), coefs, means, vars_)
        return scores.reshape(y.shape)

    def noised_density(self, x, y, schedule: ou.OUSchedule, t):
        x = self._check_x(x)
        coefs, means, vars_ = self._atoms(x, schedule, float(t))
        y = np.asarray(y, dtype=float)
        yy = y.reshape(-1)[:, None]
        dens = np.sum(coefs * np.exp(-0.5 * (yy - means) ** 2 / vars_) / np.sqrt(2.0 * np.pi * vars_), axis=1)
        return dens.reshape(y.shape)


class CircleSection(Generator):
    """Responses on an x-dependent circle embedded in R^{dim_y}.

    Y = center(x) + r(x) E [cos th, sin th]^T with a fixed orthonormal
    2-frame E, radius r(x) = r0 + r_amp sin(pi x), center moving along a
    third orthonormal direction, and angle density proportional to
    1 + a(x) cos th with |a| <= 0.8 (bounded below).  Intrinsic dimension 1.
    """

    name = "circle_section"
    intrinsic_y = 1
    density_floor = (1.0 - 0.8) / (2.0 * math.pi)

    def __init__(self, dim_y: int = 8, r0: float = 0.6, r_amp: float = 0.15, center_amp: float = 0.2, angle_amp: float = 0.8, frame_seed: int = 7):
        if dim_y < 3:
            raise ValueError("need ambient dimension >= 3 for the moving center")
        if not 0 < r_amp < r0:
            raise ValueError("radius amplitude must stay below the base radius")
        if not 0 <= angle_amp <= 0.8:
            raise ValueError("angle density modulation limited to 0.8")
        self.dim_x = self.intrinsic_x = 1
        self.dim_y = int(dim_y)
        self.r0, self.r_amp = float(r0), float(r_amp)
        self.center_amp = float(center_amp)
        self.angle_amp = float(angle_amp)
        self.frame_seed = int(frame_seed)
        frame = _orthonormal_frame(self.dim_y, 3, frame_seed)
        self.frame = frame[:, :2]
        self.center_dir = frame[:, 2]
        self.y_radius = float(np.max(np.abs(self.center_amp * self.center_dir)) + (self.r0 + self.r_amp) * np.max(np.abs(self.frame).sum(axis=1)))

    def params(self) -> dict:
        return {"dim_y": self.dim_y, "r0": self.r0, "r_amp": self.r_amp, "center_amp": self.center_amp, "angle_amp": self.angle_amp, "frame_seed": self.frame_seed}

    def radius(self, x) -> float:
        return self.r0 + self.r_amp * math.sin(math.pi * float(np.asarray(x).reshape(-1)[0]))

    def center(self, x) -> np.ndarray:
        return self.center_amp * math.sin(math.pi * float(np.asarray(x).reshape(-1)[0])) * self.center_dir

    def _sample_angles(self, x, k: int, rng: np.random.Generator) -> np.ndarray:
        a = self.angle_amp * math.sin(math.pi * float(np.asarray(x).reshape(-1)[0]))
        cdf = lambda th: (th + math.pi + a * np.sin(th)) / (2.0 * math.pi)
        pdf = lambda th: (1.0 + a * np.cos(th)) / (2.0 * math.pi)
        return _invert_cdf(cdf, pdf, rng.random(k), -math.pi, math.pi)

    def sample_conditional(self, x, k: int, rng: np.random.Generator) -> np.ndarray:
        x = self._check_x(x)
        th = self._sample_angles(x, k, rng)
        ring = np.stack([np.cos(th), np.sin(th)], axis=1)
        return self.center(x) + self.radius(x) * ring @ self.frame.T

    def distance_to_support(self, x, y) -> np.ndarray:
        x = self._check_x(x)
        y = np.atleast_2d(np.asarray(y, dtype=float))
        v = y - self.center(x)
        planar = v @ self.frame
        radial = np.abs(np.linalg.norm(planar, axis=1) - self.radius(x))
        ortho = np.linalg.norm(v - planar @ self.frame.T, axis=1)
        return np.sqrt(radial**2 + ortho**2)


class PlaneSection(Generator):
    """Responses on a fixed linear section shifted smoothly with x.

    Y = E z + b(x) with a fixed orthonormal (dim_y, d) frame, offset b(x)
    along an extra orthonormal direction, and z with independent smooth
    coordinate densities proportional to 1 + 0.5 sin(pi z + phase) on
    [-1, 1] (floor 1/4 of uniform).
    """

    name = "plane_section"
    density_floor = 0.25

    def __init__(self, dim_y: int = 4, latent: int = 2, b_amp: float = 0.3, frame_seed: int = 11):
        if latent >= dim_y:
            raise ValueError("latent dimension must be below ambient")
        self.dim_x = self.intrinsic_x = 1
        self.dim_y = int(dim_y)
        self.intrinsic_y = int(latent)
        self.b_amp = float(b_amp)
        self.frame_seed = int(frame_seed)
        frame = _orthonormal_frame(self.dim_y, latent + 1, frame_seed)
        self.frame = frame[:, :latent]
        self.offset_dir = frame[:, latent]
        self.phases = np.random.default_rng(frame_seed + 1).uniform(0.0, 2.0 * math.pi, size=latent)
        self.y_radius = float(np.max(np.abs(self.frame).sum(axis=1)) + self.b_amp)

    def params(self) -> dict:
        return {"dim_y": self.dim_y, "latent": self.intrinsic_y, "b_amp": self.b_amp, "frame_seed": self.frame_seed}

    def offset(self, x) -> np.ndarray:
        return self.b_amp * math.sin(math.pi * float(np.asarray(x).reshape(-1)[0])) * self.offset_dir

    def latent_density(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        vals = (1.0 + 0.5 * np.sin(np.pi * z + self.phases)) / 2.0
        return np.prod(np.where(np.abs(z) <= 1.0, vals, 0.0), axis=1)

    def _sample_latent(self, k: int, rng: np.random.Generator) -> np.ndarray:
        z = np.empty((k, self.intrinsic_y))
        for j, phase in enumerate(self.phases):
            cdf = lambda s: ((s + 1.0) + (0.5 / math.pi) * (math.cos(phase - math.pi) - np.cos(math.pi * s + phase))) / 2.0
            pdf = lambda s: (1.0 + 0.5 * np.sin(math.pi * s + phase)) / 2.0
            z[:, j] = _invert_cdf(cdf, pdf, rng.random(k), -1.0, 1.0)
        return z

    def sample_conditional(self, x, k: int, rng: np.random.Generator) -> np.ndarray:
        x = self._check_x(x)
        z = self._sample_latent(k, rng)
        return z @ self.frame.T + self.offset(x)

    def distance_to_support(self, x, y) -> np.ndarray:
        x = self._check_x(x)
        y = np.atleast_2d(np.asarray(y, dtype=float))
        v = y - self.offset(x)
        z = v @ self.frame
        ortho = np.linalg.norm(v - z @ self.frame.T, axis=1)
        excess = np.linalg.norm(np.maximum(np.abs(z) - 1.0, 0.0), axis=1)
        return np.sqrt(ortho**2 + excess**2)


class CurveX(Generator):
    """Covariates on a one-dimensional curve in R^{dim_x}, composed with any
    1-D-covariate response generator.

    gamma(u) = [cos(pi u), sin(pi u), a sin(2 pi u + phase_j), ...] for
    u ~ Uniform[0, 1]; the inner generator sees the effective covariate
    2u - 1.  The arc in the leading coordinates keeps gamma injective, so
    on-curve covariates invert exactly.
    """

    name = "curve_x"
    intrinsic_x = 1

    def __init__(self, inner: Generator, dim_x: int = 3, wiggle: float = 0.3, curve_seed: int = 13):
        if inner.dim_x != 1:
            raise ValueError("inner generator must take a 1-D covariate")
        if dim_x < 2:
            raise ValueError("curve needs ambient dimension >= 2")
        self.inner = inner
        self.dim_x = int(dim_x)
        self.wiggle = float(wiggle)
        self.curve_seed = int(curve_seed)
        self.phases = np.random.default_rng(curve_seed).uniform(0.0, 2.0 * math.pi, size=max(dim_x - 2, 0))
        self.dim_y = inner.dim_y
        self.intrinsic_y = inner.intrinsic_y
        self.alpha_x = inner.alpha_x
        self.alpha_y = inner.alpha_y
        self.density_floor = inner.density_floor
        self.has_analytic_score = inner.has_analytic_score
        self.y_radius = inner.y_radius
        self.x_radius = 1.0 + (self.wiggle if dim_x > 2 else 0.0)
        self._grid_u = np.linspace(0.0, 1.0, 8193)
        self._grid_pts = self.curve(self._grid_u)

    @property
    def name_full(self) -> str:
        return f"curve_x[{self.inner.name}]"

    def params(self) -> dict:
        return {"dim_x": self.dim_x, "wiggle": self.wiggle, "curve_seed": self.curve_seed, "inner": self.inner.describe()}

    def curve(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        cols = [np.cos(np.pi * u), np.sin(np.pi * u)]
        for phase in self.phases:
            cols.append(self.wiggle * np.sin(2.0 * np.pi * u + phase))
        return np.stack(cols, axis=-1)

    def invert(self, x) -> float:
        """Recover the latent parameter of an on-curve covariate."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.dim_x,):
            raise ValueError(f"covariate must have dimension {self.dim_x}")
        d2 = np.sum((self._grid_pts - x) ** 2, axis=1)
        i = int(np.argmin(d2))
        if d2[i] > 1e-4:
            raise ValueError("covariate outside the declared covariate space (not on the curve)")
        from scipy.optimize import minimize_scalar

        lo = self._grid_u[max(i - 1, 0)]
        hi = self._grid_u[min(i + 1, len(self._grid_u) - 1)]
        res = minimize_scalar(lambda u: float(np.sum((self.curve(u) - x) ** 2)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        return float(res.x)

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        self.invert(x)
        return x

    def _effective(self, x) -> np.ndarray:
        return np.array([2.0 * self.invert(x) - 1.0])

    def sample_x(self, m: int, rng: np.random.Generator) -> np.ndarray:
        return self.curve(rng.random(m))

    def sample_conditional(self, x, k: int, rng: np.random.Generator) -> np.ndarray:
        return self.inner.sample_conditional(self._effective(x), k, rng)

    def sample_joint(self, n: int, rng: np.random.Generator, seed=None) -> Dataset:
        if n < 1:
            raise ValueError("need n >= 1")
        u = rng.random(n)
        xs = self.curve(u)
        ys = np.empty((n, self.dim_y))
        for i in range(n):
            ys[i] = self.inner.sample_conditional(np.array([2.0 * u[i] - 1.0]), 1, rng)[0]
        return Dataset(xs, ys, provenance={"generator": self.describe(), "seed": seed})

    def analytic_score(self, x, y, schedule: ou.OUSchedule, t):
        return self.inner.analytic_score(self._effective(x), y, schedule, t)

    def conditional_mean(self, x) -> np.ndarray:
        return self.inner.conditional_mean(self._effective(x))

    def distance_to_support(self, x, y) -> np.ndarray:
        return self.inner.distance_to_support(self._effective(x), y)


GENERATORS = {
    "cond_gaussian": CondGaussian,
    "bimodal1d": Bimodal1d,
    "circle_section": CircleSection,
    "plane_section": PlaneSection,
    "curve_x": CurveX,
}


def make_generator(name: str, **params) -> Generator:
    """Build a generator by variant name; curve_x takes ``inner=<name>`` plus
    ``inner_*`` parameters forwarded to the wrapped variant."""
    if name not in GENERATORS:
        raise ValueError(f"unknown generator {name!r}; available: {', '.join(sorted(GENERATORS))}")
    if name == "curve_x":
        inner_name = params.pop("inner", "bimodal1d")
        inner_params = {k[len("inner_") :]: v for k, v in list(params.items()) if k.startswith("inner_")}
        for k in list(params):
            if k.startswith("inner_"):
                params.pop(k)
        inner = make_generator(inner_name, **inner_params)
        return CurveX(inner, **params)
    return GENERATORS[name](**params)
