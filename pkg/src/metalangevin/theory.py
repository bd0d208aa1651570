"""Closed-form bounds and admissibility conditions as pure functions.

Formula-level helpers take plain numbers and are exposed for direct use; the
``params``-level wrappers pull constants out of :class:`ProblemParams` and
enforce the preconditions.  Unspecified absolute constants (``c1``, ``c2``,
``c0``, ``c``, ``c_prime``, ``c_reflect``) are configuration fields.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .landscape import RegularityConstants


class PreconditionError(ValueError):
    """An input lies outside the domain on which a bound is stated."""


class FixpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProblemParams:
    constants: RegularityConstants
    d: int
    epsilon: float
    delta: float
    r: float
    T: float
    c1: float = 1.0
    c2: float = 1.0
    c0: float = 1.0
    c: Optional[float] = None
    c_prime: float = 1.0
    c_reflect: float = 0.5
    eps0: Optional[float] = None

    def __post_init__(self):
        if self.d < 1:
            raise PreconditionError("d must be >= 1")
        if not self.epsilon > 0:
            raise PreconditionError("epsilon must be > 0")
        if not 0 < self.delta < 1:
            raise PreconditionError("delta must lie in (0, 1)")
        if not self.r > 0:
            raise PreconditionError("r must be > 0")
        if not self.T >= 0:
            raise PreconditionError("T must be >= 0")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["constants"] = self.constants.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemParams":
        d = dict(d)
        d["constants"] = RegularityConstants.from_dict(d["constants"])
        return cls(**d)


# --------------------------------------------------------------------------
# recurrence and admissibility
# --------------------------------------------------------------------------


def recurrence_time_value(m: float, r: float, epsilon: float) -> float:
    """``(2/m) log(8r/eps)``; zero when ``r = eps/8``."""
    ratio = 8.0 * r / epsilon
    if ratio < 1.0 - 1e-12:
        raise PreconditionError(f"recurrence time needs eps <= 8r (eps={epsilon}, 8r={8 * r})")
    if ratio <= 1.0 + 1e-12:
        return 0.0
    return (2.0 / m) * math.log(ratio)


def recurrence_time(params: ProblemParams) -> float:
    return recurrence_time_value(params.constants.m, params.r, params.epsilon)


def escape_time(params: ProblemParams) -> float:
    return recurrence_time(params) + params.T


def G0_value(M: float, R: float, m: float, b: float, B: float, d: int, beta: float) -> float:
    """Second-moment bound on the gradient along the iteration."""
    dob = 0.0 if math.isinf(beta) else d / beta
    return 2 * M**2 * (R**2 + 2 * max(1.0, 1.0 / m) * (b + B**2 + dob)) + 2 * B**2


def G1_value(R: float, b: float, d: int, m: float) -> float:
    return R + (b + d) / m


def G0(params: ProblemParams, beta: float) -> float:
    k = params.constants
    return G0_value(k.M, k.R, k.m, k.b, k.B, params.d, beta)


def G1(params: ProblemParams) -> float:
    k = params.constants
    return G1_value(k.R, k.b, params.d, k.m)


def check_epsilon_range(params: ProblemParams) -> None:
    k = params.constants
    cap = params.c1 * k.m**2 / (k.L * math.sqrt(k.M))
    if not params.epsilon < cap:
        raise PreconditionError(f"epsilon < c1 m^2/(L sqrt(M)) violated: {params.epsilon} >= {cap}")
    if params.epsilon > 8 * params.r * (1 + 1e-12):
        raise PreconditionError(f"epsilon <= 8r violated: {params.epsilon} > {8 * params.r}")


def eta_max_at(params: ProblemParams, beta: float) -> float:
    """Largest step size allowed at inverse temperature ``beta``."""
    k = params.constants
    T_rec, T_esc = recurrence_time(params), escape_time(params)
    terms = [1.0, k.m / (2 * k.M**2)]
    if T_esc > 0:
        terms.append(params.c1 * params.delta**2 / (k.M**2 * (beta * G0(params, beta) + params.d) * T_esc))
    if T_rec > 0:
        terms.append(params.c1 * params.delta * params.epsilon**2 / (k.M**3 * G1(params) * T_rec))
    return min(terms)


def beta_min_at(params: ProblemParams, eta: float) -> float:
    """Smallest inverse temperature allowed at step size ``eta``."""
    k, d, eps, dl = params.constants, params.d, params.epsilon, params.delta
    T_rec, T_esc = recurrence_time(params), escape_time(params)
    first = (params.c2 / eps**2) * (d + math.log(k.M * T_esc / dl)) if T_esc > 0 else 0.0
    second = 0.0
    if T_rec > 0:
        second = (params.c2 * k.M * d / eps**2) * math.log(d * T_rec / (dl * eta))
    return max(first, second, 0.0)


class Admissible(NamedTuple):
    eta_max: float
    beta_min: float
    G0: float
    G1: float
    passes: int
    converged: bool


def admissible_eta_beta(params: ProblemParams, max_passes: int = 50, rtol: float = 0.01) -> Admissible:
    """Jointly admissible ``(eta_max, beta_min)``.

    ``G0`` depends on ``beta`` and the ``beta`` floor depends on ``eta``, so the
    pair is found by fixpoint iteration started from ``beta = 1`` in ``G0``.
    Stops once ``beta_min`` moves by less than ``rtol`` relative; raises
    :class:`FixpointError` if that never happens.
    """
    check_epsilon_range(params)
    beta = 1.0
    eta = eta_max_at(params, beta)
    prev = None
    for p in range(1, max_passes + 1):
        beta = max(beta_min_at(params, eta), 1e-300)
        eta = eta_max_at(params, beta)
        if prev is not None and abs(beta - prev) <= rtol * prev:
            return Admissible(eta, beta, G0(params, beta), G1(params), p, True)
        prev = beta
    raise FixpointError(f"eta/beta fixpoint did not settle within {max_passes} passes (beta={beta})")


def is_admissible(params: ProblemParams, eta: float, beta: float) -> tuple[bool, list[str]]:
    """Check a concrete ``(eta, beta)`` against both conditions."""
    problems = []
    em = eta_max_at(params, beta)
    bm = beta_min_at(params, eta)
    if eta > em:
        problems.append(f"eta={eta:.6g} exceeds eta_max(beta)={em:.6g}")
    if beta < bm:
        problems.append(f"beta={beta:.6g} below beta_min(eta)={bm:.6g}")
    return not problems, problems


# --------------------------------------------------------------------------
# diffusion-level bounds
# --------------------------------------------------------------------------


def diffusion_beta_threshold(epsilon: float, d: int, M: float, T: float, delta: float) -> float:
    """``(128 / (3 eps^2)) (d + log((2MT + 1) / delta))``."""
    return (128.0 / (3.0 * epsilon**2)) * (d + math.log((2 * M * T + 1) / delta))


def diffusion_beta_min(params: ProblemParams) -> float:
    k = params.constants
    cap = (math.sqrt(2) - 1) * k.m**2 / (4 * k.L * math.sqrt(2 * k.M))
    if not params.epsilon < cap:
        raise PreconditionError(
            f"epsilon < (sqrt2-1) m^2/(4 L sqrt(2M)) violated: {params.epsilon} >= {cap}")
    if params.epsilon > 8 * params.r * (1 + 1e-12):
        raise PreconditionError(f"epsilon <= 8r violated: {params.epsilon} > {8 * params.r}")
    return diffusion_beta_threshold(params.epsilon, params.d, k.M, params.T, params.delta)


class Bound(NamedTuple):
    value: float
    raw: float


def _pd_solve(A: np.ndarray, what: str) -> tuple[np.ndarray, float]:
    A = 0.5 * (A + A.T)
    lam = np.linalg.eigvalsh(A)
    if lam[0] <= 0:
        raise PreconditionError(f"{what} is not positive definite (min eigenvalue {lam[0]:.3e})")
    return A, float(np.sum(np.log(lam)))


def martingale_tail_bound(mu, Sigma, beta: float, lam: float, h: float, d: Optional[int] = None) -> Bound:
    """Doob--Chernoff tail bound for the supremum of the OU martingale.

    ``(1/(1-lam))^{d/2} exp(-(beta lam / 2) [h^2 - <mu, (I - beta lam Sigma)^{-1} mu>])``.
    Stated for ``lam`` in ``(0, 1/2)``; values in ``[1/2, 1)`` are accepted with a
    warning as long as ``I - beta lam Sigma`` stays positive definite.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    d = mu.size if d is None else int(d)
    if not 0 < lam < 1:
        raise PreconditionError(f"lambda must lie in (0, 1), got {lam}")
    if lam >= 0.5:
        warnings.warn(f"lambda={lam} outside (0, 1/2); using positive definiteness of I - beta lam Sigma only",
                      stacklevel=2)
    P, _ = _pd_solve(np.eye(mu.size) - beta * lam * Sigma, "I - beta*lambda*Sigma")
    quad = float(mu @ np.linalg.solve(P, mu))
    log_raw = -0.5 * d * math.log1p(-lam) - 0.5 * beta * lam * (h * h - quad)
    raw = math.exp(log_raw) if log_raw < 700 else math.inf
    return Bound(min(max(raw, 0.0), 1.0), raw)


def gaussian_quadratic_mgf(mu, Sigma, gamma: float) -> float:
    """``E exp(gamma ||V||^2)`` for ``V ~ N(mu, Sigma)``."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    P, logdet = _pd_solve(np.eye(mu.size) - 2 * gamma * Sigma, "I - 2*gamma*Sigma")
    return math.exp(-0.5 * logdet + gamma * float(mu @ np.linalg.solve(P, mu)))


# --------------------------------------------------------------------------
# discretisation bounds
# --------------------------------------------------------------------------


class KLTV(NamedTuple):
    kl: float
    tv: float
    tv_raw: float


def kl_tv_value(M: float, beta: float, G0: float, d: int, K: int, eta: float) -> KLTV:
    kl = M**2 * (beta * G0 / 2 + d) * K * eta**2
    tv = math.sqrt(kl / 2)
    return KLTV(kl, min(tv, 1.0), tv)


def kl_tv_coupling_bounds(params: ProblemParams, K: int, eta: float, beta: float,
                          G0_override: Optional[float] = None) -> KLTV:
    """Relative entropy between the discrete path law and the diffusion, and its Pinsker TV bound."""
    k = params.constants
    if not eta < min(1.0, k.m / k.M**2):
        raise PreconditionError(f"eta < 1 ^ m/M^2 violated: eta={eta}, m/M^2={k.m / k.M**2}")
    g0 = G0(params, beta) if G0_override is None else G0_override
    return kl_tv_value(k.M, beta, g0, params.d, K, eta)


def event_B_value(K0: int, G1: float, M: float, eta: float, epsilon: float, d: int,
                  beta: float, c_prime: float) -> float:
    first = 16 * G1 * M**3 * eta**2 / epsilon**2 * math.exp(2 * M * eta)
    second = 2 * d * math.exp(-c_prime * beta * epsilon**2 / (M * d * eta) * math.exp(-2 * M * eta))
    return K0 * (first + second)


def event_B_bound(params: ProblemParams, eta: float, beta: float) -> float:
    """Bound on the probability that the diffusion oscillates by more than
    ``eps / (2 sqrt M)`` inside some grid interval before the recurrence time."""
    if not (eta > 0 and beta > 0):
        raise PreconditionError("eta and beta must be positive")
    K0 = math.ceil(recurrence_time(params) / eta - 1e-9)
    k = params.constants
    return event_B_value(K0, G1(params), k.M, eta, params.epsilon, params.d, beta, params.c_prime)


def reflection_tail_bound(u: float, d: int, eta: float, c_reflect: float = 0.5) -> float:
    """``2 d exp(-c u^2 / (d eta))`` for the Brownian sup over one grid interval."""
    return min(1.0, 2 * d * math.exp(-c_reflect * u * u / (d * eta)))


# --------------------------------------------------------------------------
# statistical bounds
# --------------------------------------------------------------------------


def subgaussian_proxies(k: RegularityConstants) -> tuple[float, float, float, float]:
    s0 = k.A + (k.B + k.M * k.R) * k.R
    s1 = k.B + k.M * k.R
    s2 = k.C + k.L * k.R
    return s0, s1, s2, max(s0, s1, s2)


def deviation_constant(params: ProblemParams) -> float:
    """``c`` of the uniform deviation levels: the override if set, else
    ``c0 (1 v log((M v L v (B + MR)) R sigma / delta))``."""
    if params.c is not None:
        return params.c
    k = params.constants
    sigma = subgaussian_proxies(k)[3]
    arg = max(k.M, k.L, k.B + k.M * k.R) * k.R * sigma / params.delta
    return params.c0 * max(1.0, math.log(arg) if arg > 0 else -math.inf)


class DeviationLevels(NamedTuple):
    risk: float
    grad: float
    hess: float
    sigma: float
    c: float


def deviation_threshold(params: ProblemParams, n: int) -> DeviationLevels:
    """Common level ``sigma sqrt(c d log n / n)`` for risk, gradient and Hessian."""
    c = deviation_constant(params)
    d = params.d
    floor = c * d * math.log(d)
    if n < max(floor, 2):
        raise PreconditionError(f"n >= c d log d violated (n={n}, floor={floor:.4g}); need n >= 2")
    sigma = subgaussian_proxies(params.constants)[3]
    t = sigma * math.sqrt(c * d * math.log(n) / n)
    return DeviationLevels(t, t, t, sigma, c)


def sample_size_floor(params: ProblemParams, eps0: float, m: float) -> int:
    """Smallest ``n`` from which ``n >= c d log d`` and
    ``n / log n >= c sigma^2 d / (eps0 ^ m)^2`` hold for every larger ``n``."""
    if not (eps0 > 0 and m > 0):
        raise PreconditionError("eps0 and m must be positive")
    c = deviation_constant(params)
    d = params.d
    sigma = subgaussian_proxies(params.constants)[3]
    need = c * sigma**2 * d / min(eps0, m) ** 2
    lin = c * d * math.log(d)

    def ok(n: int) -> bool:
        return n >= lin and n / math.log(n) >= need

    # n / log n increases from n = 3 on
    lo, hi = 3, 3
    while not ok(hi):
        lo, hi = hi, hi * 2
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    if hi == 3 and ok(2):
        return 2
    return hi


# --------------------------------------------------------------------------
# everything at once
# --------------------------------------------------------------------------


@dataclass
class TheoryBounds:
    T_rec: float
    T_esc: float
    eta_max: float
    beta_min: float
    G0: float
    G1: float
    sigma0: float
    sigma1: float
    sigma2: float
    sigma: float
    K: int
    K0: int
    kl_bound: float
    tv_bound: float
    tv_bound_raw: float
    event_B_bound: float
    sample_size_min: int
    diffusion_beta_min: Optional[float]
    fixpoint_passes: int
    fixpoint_converged: bool
    eta_used: float
    beta_used: float

    def to_dict(self) -> dict:
        return asdict(self)


LABELS = {
    "T_rec": "recurrence time (2/m) log(8r/eps)",
    "T_esc": "escape time T_rec + T",
    "eta_max": "largest admissible step size",
    "beta_min": "smallest admissible inverse temperature",
    "G0": "gradient second-moment bound G0",
    "G1": "iterate second-moment bound G1",
    "sigma0": "subgaussian proxy, risk",
    "sigma1": "subgaussian proxy, gradient",
    "sigma2": "subgaussian proxy, Hessian",
    "sigma": "uniform deviation scale (max of proxies)",
    "K": "iteration horizon floor(T_esc/eta)",
    "K0": "recurrence iterations ceil(T_rec/eta)",
    "kl_bound": "Girsanov relative-entropy bound",
    "tv_bound": "Pinsker total-variation bound (clamped)",
    "tv_bound_raw": "Pinsker total-variation bound (raw)",
    "event_B_bound": "Gronwall/reflection inter-step oscillation bound",
    "sample_size_min": "a-posteriori risk bound sample-size floor",
    "diffusion_beta_min": "diffusion fast-recurrence/slow-escape beta floor",
    "fixpoint_passes": "eta/beta fixpoint passes",
    "fixpoint_converged": "eta/beta fixpoint converged",
    "eta_used": "step size used for K, KL/TV and event-B",
    "beta_used": "inverse temperature used for KL/TV and event-B",
}


def compute_bounds(params: ProblemParams, eta: Optional[float] = None, beta: Optional[float] = None) -> TheoryBounds:
    adm = admissible_eta_beta(params)
    eta_u = adm.eta_max if eta is None else eta
    beta_u = adm.beta_min if beta is None else beta
    T_rec, T_esc = recurrence_time(params), escape_time(params)
    K = math.floor(T_esc / eta_u + 1e-9)
    K0 = math.ceil(T_rec / eta_u - 1e-9)
    kltv = kl_tv_coupling_bounds(params, K, eta_u, beta_u)
    s0, s1, s2, s = subgaussian_proxies(params.constants)
    eps0 = params.eps0 if params.eps0 is not None else params.epsilon
    try:
        p_diff = diffusion_beta_min(params)
    except PreconditionError:
        p_diff = None
    return TheoryBounds(
        T_rec=T_rec, T_esc=T_esc, eta_max=adm.eta_max, beta_min=adm.beta_min,
        G0=G0(params, beta_u), G1=adm.G1, sigma0=s0, sigma1=s1, sigma2=s2, sigma=s,
        K=K, K0=K0, kl_bound=kltv.kl, tv_bound=kltv.tv, tv_bound_raw=kltv.tv_raw,
        event_B_bound=event_B_bound(params, eta_u, beta_u),
        sample_size_min=sample_size_floor(params, eps0, params.constants.m),
        diffusion_beta_min=p_diff, fixpoint_passes=adm.passes, fixpoint_converged=adm.converged,
        eta_used=eta_u, beta_used=beta_u,
    )
