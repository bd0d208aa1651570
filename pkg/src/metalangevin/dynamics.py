"""Discrete Langevin iteration, fine-step diffusion proxy and exact OU sampling.

One engine, :func:`langevin_blocks`, drives every simulation.  It advances a
batch of replicas with step ``dt = eta / substep_factor`` and yields the
iterates in blocks, so long horizons can be reduced on the fly without keeping
the whole path in memory.  Single-trajectory helpers call it with one replica;
a replica therefore follows the same path alone or inside a batch.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .landscape import Landscape, LocalMinimum, matvec
from .seeding import NoiseStreams

KINDS = ("discrete", "diffusion_proxy", "exact_ou")
MAGIC = b"LNGVTRJ1"
DEFAULT_BLOCK = 2048


class DivergenceError(RuntimeError):
    """A non-finite iterate appeared; ``index`` is the first bad fine-step index."""

    def __init__(self, index: int, replica: int = 0):
        super().__init__(f"non-finite iterate at index {index} (replica {replica})")
        self.index = index
        self.replica = replica


@dataclass(frozen=True)
class LangevinConfig:
    """Step size, inverse temperature, horizon, start and seed.

    ``noiseless=True`` switches the Gaussian term off entirely (the
    zero-temperature limit); ``beta`` is then ignored.
    """

    eta: float
    beta: float
    horizon_K: int
    initial_point: tuple
    seed: int = 0
    noiseless: bool = False

    def __post_init__(self):
        object.__setattr__(self, "initial_point", tuple(float(x) for x in np.ravel(self.initial_point)))
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be finite and >= 0, got {self.eta}")
        if not self.noiseless and not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if int(self.horizon_K) < 1:
            raise ValueError("horizon_K must be >= 1")
        object.__setattr__(self, "horizon_K", int(self.horizon_K))
        if not all(math.isfinite(x) for x in self.initial_point):
            raise ValueError("initial point must be finite")

    @property
    def dimension(self) -> int:
        return len(self.initial_point)

    @property
    def noise_scale(self) -> float:
        return 0.0 if self.noiseless else math.sqrt(2.0 * self.eta / self.beta)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["initial_point"] = list(self.initial_point)
        d["beta"] = None if self.noiseless else self.beta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LangevinConfig":
        d = dict(d)
        if d.get("beta") is None:
            d["beta"] = math.inf
            d["noiseless"] = True
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Trajectory:
    kind: str
    times: np.ndarray
    points: np.ndarray
    config: LangevinConfig
    substep_factor: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if len(self.times) != len(self.points):
            raise ValueError("times and points differ in length")

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def coarse(self) -> "Trajectory":
        """Grid points ``t = k * eta`` of a diffusion proxy."""
        s = self.substep_factor
        return Trajectory(self.kind, self.times[::s], self.points[::s], self.config, 1)


# --------------------------------------------------------------------------
# engine
# --------------------------------------------------------------------------


def langevin_blocks(gradient: Callable, x0, eta: float, beta: float, n_steps: int,
                    seeds: Sequence[int], *, noiseless: bool = False, substep_factor: int = 1,
                    noise_aggregation: int = 1, block: int = DEFAULT_BLOCK) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(start, W)`` with ``W[i]`` the batch at fine index ``start + i``.

    ``W`` has shape ``(c, R, d)``.  The first block starts with the initial
    batch at index 0.  There are ``n_steps * substep_factor`` fine steps of
    size ``eta / substep_factor``; fine step ``i`` of replica ``r`` uses
    normals ``[i*d*a, (i+1)*d*a)`` of stream ``seeds[r]`` where
    ``a = noise_aggregation``.  With ``a > 1`` the ``a`` draws are summed and
    divided by ``sqrt(a)``, which pairs a coarse run with a fine run that
    shares the same underlying stream.
    """
    x = np.array(x0, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    R, d = x.shape
    if len(seeds) != R:
        raise ValueError("need one seed per replica")
    if substep_factor < 1 or noise_aggregation < 1:
        raise ValueError("substep_factor and noise_aggregation must be >= 1")
    dt = eta / substep_factor
    scale = 0.0 if noiseless else math.sqrt(2.0 * dt / beta)
    streams = None if noiseless else NoiseStreams(seeds)
    total = int(n_steps) * substep_factor
    a = noise_aggregation
    root_a = math.sqrt(a)

    out = np.empty((block, R, d))
    out[0] = x
    filled, start, i = 1, 0, 0
    while i < total:
        c = min(block, total - i)
        if streams is not None:
            xi = streams.draw(c, d * a)
            if a > 1:
                xi = xi.reshape(c, R, a, d).sum(axis=2) / root_a
        for j in range(c):
            x = x - dt * gradient(x)
            if streams is not None:
                x = x + scale * xi[j]
            if filled == block:
                _check_finite(out, start)
                yield start, out
                start += filled
                out = np.empty((block, R, d))
                filled = 0
            out[filled] = x
            filled += 1
        i += c
    _check_finite(out[:filled], start)
    yield start, out[:filled]


def _check_finite(w: np.ndarray, start: int) -> None:
    ok = np.isfinite(w).all(axis=2)
    if not ok.all():
        bad = np.argwhere(~ok)[0]
        raise DivergenceError(start + int(bad[0]), int(bad[1]))


def _collect(blocks) -> np.ndarray:
    parts = [w.copy() for _, w in blocks]
    return np.concatenate(parts, axis=0)


def run_discrete_langevin(landscape: Landscape, config: LangevinConfig) -> Trajectory:
    """``W_{k+1} = W_k - eta grad F(W_k) + sqrt(2 eta / beta) xi_k`` for ``horizon_K`` steps."""
    _check_dim(landscape, config)
    pts = _collect(langevin_blocks(landscape.gradient, config.initial_point, config.eta, config.beta,
                                   config.horizon_K, [config.seed], noiseless=config.noiseless))[:, 0, :]
    times = np.arange(config.horizon_K + 1) * config.eta
    return Trajectory("discrete", times, pts, config, 1)


def run_diffusion_proxy(landscape: Landscape, config: LangevinConfig, substep_factor: int = 16) -> Trajectory:
    """Euler--Maruyama for the Langevin diffusion with inner step ``eta / substep_factor``.

    All substeps are recorded.  ``substep_factor=1`` reproduces
    :func:`run_discrete_langevin` exactly.
    """
    _check_dim(landscape, config)
    if substep_factor < 1:
        raise ValueError("substep_factor must be >= 1")
    pts = _collect(langevin_blocks(landscape.gradient, config.initial_point, config.eta, config.beta,
                                   config.horizon_K, [config.seed], noiseless=config.noiseless,
                                   substep_factor=substep_factor))[:, 0, :]
    times = np.arange(config.horizon_K * substep_factor + 1) * (config.eta / substep_factor)
    return Trajectory("diffusion_proxy", times, pts, config, substep_factor)


def _check_dim(landscape: Landscape, config: LangevinConfig) -> None:
    if config.dimension != landscape.dimension:
        raise ValueError(f"initial point has dimension {config.dimension}, landscape has {landscape.dimension}")


# --------------------------------------------------------------------------
# linearisation around a minimum
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OULinearization:
    center: np.ndarray
    H: np.ndarray
    H_sqrt: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dimension(self) -> int:
        return self.H.shape[0]

    def spectral(self, fn) -> np.ndarray:
        """``U diag(fn(lambda)) U^T``."""
        U = self.eigenvectors
        return (U * fn(self.eigenvalues)) @ U.T


def build_ou_linearization(center, H, m: Optional[float] = None) -> OULinearization:
    H = np.array(H, dtype=float)
    H = 0.5 * (H + H.T)
    lam, U = np.linalg.eigh(H)
    if lam[0] <= 0:
        raise ValueError("H must be positive definite")
    if m is not None and lam[0] < m * (1 - 1e-12):
        raise ValueError(f"lambda_min(H)={lam[0]} below m={m}")
    Hs = (U * np.sqrt(lam)) @ U.T
    return OULinearization(np.array(center, dtype=float), H, Hs, lam, U)


def linearize(local_min: LocalMinimum, m: Optional[float] = None) -> OULinearization:
    return build_ou_linearization(local_min.location, local_min.hessian_at_min, m)


def h_norm(v, H) -> np.ndarray:
    """``sqrt(<v, H v>)`` over the last axis."""
    v = np.asarray(v, dtype=float)
    q = (v * matvec(np.asarray(H, dtype=float), v)).sum(-1)
    return np.sqrt(np.maximum(q, 0.0))


def ou_marginal(lin: OULinearization, y0, t: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean ``e^{-tH} y0`` and covariance ``(I - e^{-2tH}) / beta`` of the OU displacement."""
    if t < 0:
        raise ValueError("t must be >= 0")
    mean = lin.spectral(lambda l: np.exp(-t * l)) @ np.asarray(y0, dtype=float)
    cov = lin.spectral(lambda l: -np.expm1(-2 * t * l) / beta)
    return mean, 0.5 * (cov + cov.T)


def matrix_flow_Q(lin: OULinearization, t0: float, t: float) -> np.ndarray:
    """``H^{1/2} e^{(t0 - t) H}``."""
    if t < t0:
        raise ValueError(f"need t >= t0, got t={t} < t0={t0}")
    return lin.spectral(lambda l: np.sqrt(l) * np.exp((t0 - t) * l))


def run_exact_ou(lin: OULinearization, config: LangevinConfig) -> Trajectory:
    """Exact transitions of ``dY = -H Y dt + sqrt(2/beta) dB`` on the grid ``k * eta``.

    Sampling is done in the eigenbasis of ``H``; the returned points are
    ``center + Y``.  In noiseless mode the closed form ``e^{-tH} Y_0`` is used.
    """
    if config.dimension != lin.dimension:
        raise ValueError("initial point dimension does not match the linearisation")
    U, lam = lin.eigenvectors, lin.eigenvalues
    K = config.horizon_K
    times = np.arange(K + 1) * config.eta
    y0 = U.T @ (np.asarray(config.initial_point) - lin.center)
    if config.noiseless:
        ytil = np.exp(-np.outer(times, lam)) * y0
    else:
        a = np.exp(-config.eta * lam)
        s = np.sqrt(-np.expm1(-2 * config.eta * lam) / config.beta)
        xi = NoiseStreams([config.seed]).draw(K, lin.dimension)[:, 0, :]
        ytil = np.empty((K + 1, lin.dimension))
        ytil[0] = y0
        for k in range(K):
            ytil[k + 1] = a * ytil[k] + s * xi[k]
    pts = lin.center + ytil @ U.T
    return Trajectory("exact_ou", times, pts, config, 1)


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------


def write_csv(traj: Trajectory, path) -> None:
    """Columns ``k, t, w_1..w_d``; floats with 17 significant digits."""
    d = traj.dimension
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["k", "t"] + [f"w_{j + 1}" for j in range(d)]) + "\n")
        for k, (t, p) in enumerate(zip(traj.times, traj.points)):
            fh.write(",".join([str(k), format(float(t), ".17g")] + [format(float(x), ".17g") for x in p]) + "\n")


def read_csv(path, config: LangevinConfig, kind: str = "discrete", substep_factor: int = 1) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(kind, data[:, 1].copy(), data[:, 2:].copy(), config, substep_factor)


def write_binary(traj: Trajectory, path) -> None:
    """``LNGVTRJ1`` | u32 header length | JSON header | f64 times | f64 points (little-endian)."""
    header = json.dumps({
        "kind": traj.kind, "dimension": traj.dimension, "length": len(traj.times),
        "substep_factor": traj.substep_factor, "config": traj.config.to_dict(),
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(traj.times, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(traj.points, dtype="<f8").tobytes())


def read_binary(path) -> Trajectory:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}")
    (hlen,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12:12 + hlen])
    n, d = header["length"], header["dimension"]
    off = 12 + hlen
    times = np.frombuffer(raw, dtype="<f8", count=n, offset=off).copy()
    pts = np.frombuffer(raw, dtype="<f8", count=n * d, offset=off + 8 * n).reshape(n, d).copy()
    return Trajectory(header["kind"], times, pts, LangevinConfig.from_dict(header["config"]),
                      header["substep_factor"])
