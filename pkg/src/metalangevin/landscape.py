"""Objectives with exact derivatives and declared regularity constants.

All callables are vectorised over leading axes: ``value`` maps ``(..., d)`` to
``(...)``, ``gradient`` to ``(..., d)`` and ``hessian`` to ``(..., d, d)``.
Matrix-vector products are written as broadcast multiply + last-axis sum so a
point gives bit-identical results whether evaluated alone or inside a batch.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
from scipy import stats
from scipy.stats import qmc

from .seeding import derive_seed, make_stream

Array = np.ndarray
Fn = Callable[[Array], Array]


class LandscapeError(ValueError):
    pass


class NonConvergenceError(LandscapeError):
    pass


class DegenerateMinimumError(LandscapeError):
    pass


@dataclass(frozen=True)
class RegularityConstants:
    """Constants of the standing assumptions.

    ``A``, ``B``, ``C`` bound ``|f(0,z)|``, ``||grad f(0,z)||`` and
    ``||hess f(0,z)||``; ``M`` and ``L`` are the gradient and Hessian Lipschitz
    constants; ``(m, b)`` is the dissipativity pair and ``R = sqrt(b/m)``.
    """

    A: float
    B: float
    C: float
    M: float
    L: float
    m: float
    b: float
    R: Optional[float] = None

    def __post_init__(self):
        if self.R is None:
            object.__setattr__(self, "R", math.sqrt(self.b / self.m) if self.m > 0 else float("nan"))
        for name in ("A", "B", "C", "M", "L", "m", "b", "R"):
            v = getattr(self, name)
            if not (v >= 0) or not math.isfinite(v):
                raise LandscapeError(f"regularity constant {name}={v!r} must be finite and nonnegative")
        for name in ("M", "L", "m"):
            if getattr(self, name) <= 0:
                raise LandscapeError(f"regularity constant {name} must be positive")
        if self.R**2 * self.m > self.b * (1 + 1e-12) + 1e-300:
            raise LandscapeError(f"R={self.R} inconsistent with sqrt(b/m)={math.sqrt(self.b / self.m)}")

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in ("A", "B", "C", "M", "L", "m", "b", "R")}

    @classmethod
    def from_dict(cls, d: dict) -> "RegularityConstants":
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class Dataset:
    samples: Array
    sampler_spec: dict

    def __post_init__(self):
        if len(self.samples) < 1:
            raise LandscapeError("dataset must contain at least one sample")
        self.samples.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.samples)

    def to_csv(self, path) -> None:
        flat = self.samples.reshape(self.n, -1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"z_{j + 1}" for j in range(flat.shape[1])])
            for row in flat:
                w.writerow([format(float(x), ".17g") for x in row])


@dataclass(frozen=True, eq=False)
class Landscape:
    name: str
    dimension: int
    value: Fn
    gradient: Fn
    hessian: Fn
    constants: RegularityConstants
    population_value: Optional[Fn] = None
    population_gradient: Optional[Fn] = None
    population_hessian: Optional[Fn] = None
    params: dict = field(default_factory=dict)

    def population(self) -> "Landscape":
        """The population risk as a landscape of its own (same constants)."""
        if self.population_value is None:
            raise LandscapeError(f"{self.name}: no closed-form population risk")
        return Landscape(
            name=f"{self.name}:population",
            dimension=self.dimension,
            value=self.population_value,
            gradient=self.population_gradient,
            hessian=self.population_hessian,
            constants=self.constants,
            params=self.params,
        )


@dataclass(frozen=True)
class LocalMinimum:
    location: Array
    hessian_at_min: Array
    min_eigenvalue: float
    gradient_norm_residual: float


def matvec(A: Array, w: Array) -> Array:
    """``A @ w`` over the last axis, summed column by column.

    The summation order does not depend on the batch shape, so a batched
    evaluation is bit-identical to evaluating each row on its own.
    """
    out = A[:, 0] * w[..., 0:1]
    for j in range(1, A.shape[1]):
        out = out + A[:, j] * w[..., j:j + 1]
    return out


def _sq(w: Array) -> Array:
    return (w * w).sum(axis=-1)


def _spectral_norm(A: Array) -> float:
    return float(np.abs(np.linalg.eigvalsh(A)).max())


# --------------------------------------------------------------------------
# families
# --------------------------------------------------------------------------


def build_quadratic(matrix, center=None, b: float = 1.0, hessian_lipschitz: float = 1.0) -> Landscape:
    """``F(w) = 0.5 (w-c)^T A (w-c)`` for symmetric positive-definite ``A``.

    The Hessian is constant, so any positive ``hessian_lipschitz`` is valid.
    With ``c = 0`` the dissipativity pair is ``(lambda_min(A), b)`` for the
    given ``b``; otherwise it is derived by Young's inequality.
    """
    A = np.array(matrix, dtype=float)
    if A.ndim == 1:
        A = np.diag(A)
    d = A.shape[0]
    if A.shape != (d, d) or not np.allclose(A, A.T):
        raise LandscapeError("quadratic matrix must be square and symmetric")
    A = 0.5 * (A + A.T)
    eig = np.linalg.eigvalsh(A)
    if eig[0] <= 0:
        raise LandscapeError("quadratic matrix must be positive definite")
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    Ac = A @ c
    lam_min, lam_max = float(eig[0]), float(eig[-1])
    if np.any(c != 0):
        m = lam_min / 2
        b_eff = float(Ac @ Ac) / (2 * lam_min) + b
    else:
        m, b_eff = lam_min, b
    const = RegularityConstants(
        A=0.5 * float(c @ Ac), B=float(np.linalg.norm(Ac)), C=lam_max, M=lam_max,
        L=hessian_lipschitz, m=m, b=b_eff,
    )

    def value(w):
        y = np.asarray(w, dtype=float) - c
        return 0.5 * (y * matvec(A, y)).sum(axis=-1)

    def gradient(w):
        return matvec(A, np.asarray(w, dtype=float) - c)

    def hessian(w):
        w = np.asarray(w, dtype=float)
        return np.broadcast_to(A, w.shape[:-1] + (d, d)).copy()

    return Landscape("quadratic", d, value, gradient, hessian, const,
                     params={"matrix": A.tolist(), "center": c.tolist(), "b": b,
                             "hessian_lipschitz": hessian_lipschitz})


def build_double_well(dimension: int, barrier_scale: float = 1.0) -> Landscape:
    """``s * ((w_1^2 - 1)^2 / 4 + 0.5 * sum_{j>=2} w_j^2)``.

    Minima at ``w_1 = +-1``, saddle at the origin, barrier height ``s/4``.
    Dissipativity ``(s/2, 9s/16)`` holds globally; ``M`` and ``L`` are
    certified on the ball of radius ``2R``.
    """
    if dimension < 1:
        raise LandscapeError("dimension must be >= 1")
    s = float(barrier_scale)
    if s <= 0:
        raise LandscapeError("barrier_scale must be positive")
    d = int(dimension)
    m, b = s / 2, 0.5625 * s
    R = math.sqrt(b / m)
    rho = 2 * R
    const = RegularityConstants(
        A=s / 4, B=0.0, C=s, M=s * max(3 * rho**2 - 1, 1.0), L=6 * s * rho, m=m, b=b,
    )

    def value(w):
        w = np.asarray(w, dtype=float)
        x = w[..., 0]
        rest = _sq(w[..., 1:]) if d > 1 else 0.0
        return s * ((x * x - 1) ** 2 / 4 + 0.5 * rest)

    def gradient(w):
        w = np.asarray(w, dtype=float)
        g = s * w
        x = w[..., 0]
        g[..., 0] = s * (x * x * x - x)
        return g

    def hessian(w):
        w = np.asarray(w, dtype=float)
        H = np.zeros(w.shape[:-1] + (d, d))
        idx = np.arange(d)
        H[..., idx, idx] = s
        H[..., 0, 0] = s * (3 * w[..., 0] ** 2 - 1)
        return H

    return Landscape("double_well", d, value, gradient, hessian, const,
                     params={"dimension": d, "barrier_scale": s})


# --------------------------------------------------------------------------
# datasets and ERM families
# --------------------------------------------------------------------------


def sample_truncated_gaussian(n: int, mean, truncation: float, seed: int) -> Dataset:
    """``n`` draws of ``N(mean, I)`` truncated coordinate-wise to ``mean +- truncation``."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    if n < 1:
        raise LandscapeError("dataset must contain at least one sample")
    rng = make_stream(derive_seed(seed, n))
    a = float(truncation)
    z = stats.truncnorm.rvs(-a, a, size=(n, mean.size), random_state=rng) + mean
    spec = {"law": "truncated_gaussian", "mean": mean.tolist(), "truncation": a, "n": n, "seed": int(seed)}
    return Dataset(z, spec)


def sample_symmetric_uniform(n: int, dimension: int, scale: float, seed: int) -> Dataset:
    """``n`` symmetric ``d x d`` matrices with i.i.d. ``U[-scale, scale]`` upper-triangle entries."""
    if n < 1:
        raise LandscapeError("dataset must contain at least one sample")
    d = int(dimension)
    rng = make_stream(derive_seed(seed, n))
    iu = np.triu_indices(d)
    S = np.zeros((n, d, d))
    S[:, iu[0], iu[1]] = rng.uniform(-scale, scale, size=(n, iu[0].size))
    S = S + np.triu(S, 1).transpose(0, 2, 1)
    spec = {"law": "symmetric_uniform", "dimension": d, "scale": float(scale), "n": n, "seed": int(seed)}
    return Dataset(S, spec)


def truncated_gaussian_second_moment(mean, truncation: float) -> float:
    """``E||z||^2`` for the coordinate-wise truncated unit Gaussian."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    var = float(stats.truncnorm.var(-truncation, truncation))
    return float(mean @ mean) + mean.size * var


def build_gaussian_location_erm(dataset: Dataset, ridge: float = 0.0, hessian_lipschitz: float = 0.25) -> Landscape:
    """Empirical risk of ``f(w, z) = 0.5||w - z||^2 + ridge ||w||^2``.

    The Hessian ``(1 + 2 ridge) I`` does not depend on ``w`` or ``z``, so any
    positive ``hessian_lipschitz`` is a valid declaration.
    """
    if dataset.n < 1:
        raise LandscapeError("empty dataset")
    if ridge < 0:
        raise LandscapeError("ridge must be nonnegative")
    z = np.asarray(dataset.samples, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    d = z.shape[1]
    k = 1.0 + 2.0 * ridge
    zbar = z.mean(axis=0)
    m2 = float(_sq(z).mean())
    spec = dataset.sampler_spec

    if spec.get("law") == "truncated_gaussian":
        mu = np.asarray(spec["mean"], dtype=float)
        zmax = float(np.linalg.norm(np.abs(mu) + spec["truncation"]))
    else:
        mu = None
        zmax = float(np.sqrt(_sq(z)).max())
    m = k / 2
    const = RegularityConstants(
        A=0.5 * zmax**2, B=zmax, C=k, M=k, L=hessian_lipschitz, m=m, b=zmax**2 / (2 * k),
    )

    def value(w):
        w = np.asarray(w, dtype=float)
        return 0.5 * k * _sq(w) - (w * zbar).sum(axis=-1) + 0.5 * m2

    def gradient(w):
        return k * np.asarray(w, dtype=float) - zbar

    def hessian(w):
        w = np.asarray(w, dtype=float)
        return np.broadcast_to(k * np.eye(d), w.shape[:-1] + (d, d)).copy()

    pop = {}
    if mu is not None:
        pm2 = truncated_gaussian_second_moment(mu, spec["truncation"])
        pop = dict(
            population_value=lambda w: 0.5 * k * _sq(np.asarray(w, float)) - (np.asarray(w, float) * mu).sum(-1) + 0.5 * pm2,
            population_gradient=lambda w: k * np.asarray(w, dtype=float) - mu,
            population_hessian=hessian,
        )
    return Landscape("gaussian_location", d, value, gradient, hessian, const,
                     params={"ridge": ridge, "hessian_lipschitz": hessian_lipschitz, "sampler": spec,
                             "minimizer": (zbar / k).tolist()},
                     **pop)


def build_perturbed_quadratic_erm(dataset: Dataset, quartic: float = 0.5, m: float = 0.5) -> Landscape:
    """Empirical risk of ``f(w, S) = 0.5 w^T (I + S) w + (quartic/4) ||w||^4``.

    ``S`` is a bounded random symmetric matrix with mean zero, so the
    population risk is ``0.5||w||^2 + (quartic/4)||w||^4``.  The quartic term
    keeps every realisation dissipative; ``M`` and ``L`` are certified on the
    ball of radius ``2R``.
    """
    S = np.asarray(dataset.samples, dtype=float)
    if S.ndim != 3 or S.shape[1] != S.shape[2]:
        raise LandscapeError("perturbed quadratic needs a dataset of square matrices")
    d = S.shape[1]
    kappa = float(quartic)
    if kappa <= 0:
        raise LandscapeError("quartic coefficient must be positive")
    scale = float(dataset.sampler_spec.get("scale", np.abs(S).max()))
    Sbar = S.mean(axis=0)
    P = np.eye(d) + Sbar
    q = max(0.0, m - 1.0 + scale * d)
    b = q * q / (4 * kappa) + m
    R = math.sqrt(b / m)
    rho = 2 * R
    const = RegularityConstants(
        A=0.0, B=0.0, C=1.0 + scale * d, M=1.0 + scale * d + 3 * kappa * rho**2,
        L=6 * kappa * rho, m=m, b=b,
    )

    def make(Pmat):
        def value(w):
            w = np.asarray(w, dtype=float)
            r2 = _sq(w)
            return 0.5 * (w * matvec(Pmat, w)).sum(-1) + 0.25 * kappa * r2 * r2

        def gradient(w):
            w = np.asarray(w, dtype=float)
            return matvec(Pmat, w) + kappa * _sq(w)[..., None] * w

        def hessian(w):
            w = np.asarray(w, dtype=float)
            r2 = _sq(w)[..., None, None]
            return Pmat + kappa * (r2 * np.eye(d) + 2 * w[..., :, None] * w[..., None, :])

        return value, gradient, hessian

    v, g, h = make(P)
    pv, pg, ph = make(np.eye(d))
    return Landscape("perturbed_quadratic", d, v, g, h, const, pv, pg, ph,
                     params={"quartic": kappa, "m": m, "sampler": dataset.sampler_spec})


# --------------------------------------------------------------------------
# analysis
# --------------------------------------------------------------------------


def find_local_minimum(landscape: Landscape, start, tolerance: float = 1e-10,
                       max_iter: int = 10_000) -> LocalMinimum:
    """Gradient descent with backtracking, then Newton refinement.

    Raises :class:`NonConvergenceError` if the gradient norm does not reach
    ``tolerance`` and :class:`DegenerateMinimumError` if the Hessian at the
    limit has an eigenvalue below the declared ``m``.
    """
    w = np.array(start, dtype=float).reshape(landscape.dimension)
    R = landscape.constants.R
    if np.linalg.norm(w) > R * (1 + 1e-9):
        raise LandscapeError(f"start {w.tolist()} lies outside the ball of radius R={R}")
    f, grad, hess = landscape.value, landscape.gradient, landscape.hessian
    g = grad(w)
    step = 1.0 / landscape.constants.M
    for _ in range(max_iter):
        gn = float(np.linalg.norm(g))
        if gn <= tolerance:
            break
        H = hess(w)
        lam = np.linalg.eigvalsh(H)
        moved = False
        if lam[0] > 0 and gn < 1e-2:
            cand = w - np.linalg.solve(H, g)
            gc = grad(cand)
            if np.linalg.norm(gc) < gn:
                w, g, moved = cand, gc, True
        if not moved:
            t, fw = step, float(f(w))
            while t > 1e-16:
                cand = w - t * g
                if float(f(cand)) <= fw - 0.5 * t * gn * gn:
                    break
                t *= 0.5
            if t <= 1e-16:
                break
            w = cand
            g = grad(w)
            step = min(2 * t, 1e3 / landscape.constants.M)
    gn = float(np.linalg.norm(g))
    if gn > tolerance:
        raise NonConvergenceError(f"gradient norm {gn:.3e} above tolerance {tolerance:.1e}")
    H = np.asarray(hess(w))
    lam_min = float(np.linalg.eigvalsh(H)[0])
    if lam_min < landscape.constants.m:
        raise DegenerateMinimumError(
            f"lambda_min(H)={lam_min:.6g} < m={landscape.constants.m:.6g}: "
            "not nondegenerate per standing assumption")
    return LocalMinimum(w, H, lam_min, gn)


def _ball_directions(d: int, count: int, seed: int) -> Array:
    if d == 1:
        return np.where(np.arange(count) % 2 == 0, 1.0, -1.0)[:, None]
    u = qmc.Sobol(d, scramble=True, seed=make_stream(seed)).random(count)
    x = stats.norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def check_dissipativity(landscape: Landscape, m: float, b: float, probe_count: int = 4096,
                        seed: int = 0) -> dict:
    """Probe ``<w, grad F(w)> - m||w||^2 + b`` on quasi-random points.

    Radii follow an expanding schedule: half linear on ``[0, 4 max(R, 1)]``,
    half geometric up to ``1e3 max(R, 1)``.  The origin is always included.
    """
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    d = landscape.dimension
    scale = max(landscape.constants.R, 1.0)
    n_lin = (probe_count + 1) // 2
    radii = np.concatenate([
        np.linspace(0.0, 4 * scale, n_lin),
        np.geomspace(4 * scale, 1e3 * scale, probe_count - n_lin),
    ])
    dirs = _ball_directions(d, probe_count, derive_seed(seed, 7))
    pts = radii[:, None] * dirs
    pts[0] = 0.0
    margin = (pts * landscape.gradient(pts)).sum(-1) - m * _sq(pts) + b
    i = int(np.argmin(margin))
    return {
        "status": "PASS" if margin[i] >= -1e-9 else "FAIL",
        "min_margin": float(margin[i]),
        "worst_point": pts[i].tolist(),
        "m": m, "b": b, "probe_count": probe_count, "seed": seed,
    }


def ball_grid(d: int, radius: float, resolution: int) -> Array:
    """Cartesian grid with ``resolution`` points per axis, clipped to the ball."""
    ax = np.linspace(-radius, radius, resolution)
    mesh = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return mesh[_sq(mesh) <= radius * radius * (1 + 1e-12)]


def certify_strongly_morse(landscape: Landscape, eps0: float, m: float, grid_resolution: int = 201) -> dict:
    """Grid check that ``||grad F|| <= eps0`` implies ``min_j |lambda_j| >= m`` on ``B(R)``."""
    d = landscape.dimension
    if d > 3:
        raise LandscapeError(f"grid certification supports d <= 3, got d={d}")
    pts = ball_grid(d, landscape.constants.R, grid_resolution)
    gnorm = np.sqrt(_sq(landscape.gradient(pts)))
    near = gnorm <= eps0
    report = {"eps0": eps0, "m": m, "grid_points": int(len(pts)), "near_stationary": int(near.sum())}
    if not near.any():
        report.update(status="PASS", min_abs_eigenvalue=None, worst_point=None)
        return report
    lam = np.linalg.eigvalsh(landscape.hessian(pts[near]))
    score = np.abs(lam).min(axis=-1)
    i = int(np.argmin(score))
    report.update(
        status="PASS" if score[i] >= m else "FAIL",
        min_abs_eigenvalue=float(score[i]),
        worst_point=pts[near][i].tolist(),
    )
    return report


def build_family(family: str, params: dict) -> Landscape:
    """Construct a landscape from a configuration block."""
    p = dict(params)
    if family == "quadratic":
        d = p.pop("dimension", None)
        mat = p.pop("matrix", None)
        curv = p.pop("curvatures", None)
        if mat is None:
            mat = np.diag(curv if curv is not None else np.ones(d or 1))
        return build_quadratic(mat, **p)
    if family == "double_well":
        return build_double_well(**p)
    if family == "gaussian_location":
        d = int(p.pop("dimension", 1))
        ds = sample_truncated_gaussian(int(p.pop("n")), p.pop("mean", [0.0] * d),
                                       float(p.pop("truncation", 5.0)), int(p.pop("seed", 0)))
        return build_gaussian_location_erm(ds, **p)
    if family == "perturbed_quadratic":
        d = int(p.pop("dimension", 2))
        ds = sample_symmetric_uniform(int(p.pop("n")), d, float(p.pop("scale", 0.5)), int(p.pop("seed", 0)))
        return build_perturbed_quadratic_erm(ds, **p)
    raise LandscapeError(f"unknown landscape family {family!r}")


FAMILIES = ("quadratic", "double_well", "gaussian_location", "perturbed_quadratic")


def describe(landscape: Landscape) -> dict[str, Any]:
    return {"name": landscape.name, "dimension": landscape.dimension,
            "constants": landscape.constants.to_dict()}
