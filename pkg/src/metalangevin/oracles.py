"""Brute-force and Monte Carlo verifiers for the checkable inequalities.

Every oracle returns an :class:`OracleVerdict` and is reproducible from its
name, seed and sample count.  Tail-bound checks are one-sided: they only ever
test that an analytic bound sits above an empirical estimate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from . import landscape as ls_mod
from . import theory
from .dynamics import OULinearization, build_ou_linearization, h_norm, langevin_blocks
from .landscape import ball_grid, build_family, certify_strongly_morse, find_local_minimum
from .metastability import (EXIT_EARLY, TubeAccumulator, TubeSpec, default_initial_point, wilson_interval)
from .seeding import derive_seed, make_stream

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"


class OracleError(ValueError):
    pass


@dataclass
class OracleVerdict:
    name: str
    status: str
    statistic: float
    threshold: float
    standard_error: Optional[float]
    seed: int
    sample_count: int
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return asdict(self)


def clopper_pearson_upper(k: int, n: int, confidence: float = 0.95) -> float:
    """One-sided exact upper confidence bound for a binomial proportion."""
    if k >= n:
        return 1.0
    return float(stats.beta.ppf(confidence, k + 1, n - k))


def _proportion_verdict(name, hits, total, target, seed, details, margin=0.05):
    """PASS iff ``hits/total >= target - margin``; INCONCLUSIVE when only the Wilson upper end reaches it."""
    thr = target - margin
    frac = hits / total if total else float("nan")
    lo, hi = wilson_interval(hits, total)
    if total == 0:
        status = INCONCLUSIVE
    elif frac >= thr:
        status = PASS
    elif hi >= thr:
        status = INCONCLUSIVE
    else:
        status = FAIL
    se = math.sqrt(frac * (1 - frac) / total) if total else None
    details = dict(details, wilson95=[lo, hi], nominal=target, margin=margin)
    return OracleVerdict(name, status, frac, thr, se, seed, total, details)


# --------------------------------------------------------------------------
# Gaussian quadratic MGF
# --------------------------------------------------------------------------

MGF_CASES = (
    ([0.0], [[1.0]], 0.0),
    ([0.0], [[1.0]], 0.25),
    ([1.0], [[1.0]], 0.25),
    ([0.5, -0.3], [[1.0, 0.3], [0.3, 0.5]], 0.1),
    ([0.2, 0.0, -0.4], [[0.8, 0.1, 0.0], [0.1, 0.6, 0.2], [0.0, 0.2, 1.0]], 0.05),
)


def verify_gaussian_mgf(trials: int = 1_000_000, seed: int = 0, cases=MGF_CASES) -> OracleVerdict:
    """Monte Carlo mean of ``exp(gamma ||V||^2)`` against the closed form, case by case.

    PASS iff every ``|MC - exact| / SE <= 3``.  Cases at ``gamma = 1/4`` with
    unit covariance sit on the edge of finite variance; the sample SE is
    still the reported scale.
    """
    if trials < 100_000:
        raise OracleError("trials must be >= 1e5")
    rows, worst = [], 0.0
    for i, (mu, Sig, gamma) in enumerate(cases):
        mu = np.asarray(mu, float)
        Sig = np.asarray(Sig, float)
        exact = theory.gaussian_quadratic_mgf(mu, Sig, gamma)
        rng = make_stream(derive_seed(seed, i))
        chol = np.linalg.cholesky(Sig)
        V = mu + rng.standard_normal((trials, mu.size)) @ chol.T
        y = np.exp(gamma * (V * V).sum(axis=1))
        mc = float(y.mean())
        se = float(y.std(ddof=1) / math.sqrt(trials))
        z = 0.0 if mc == exact else (abs(mc - exact) / se if se > 0 else math.inf)
        worst = max(worst, z)
        rows.append({"mu": mu.tolist(), "Sigma": Sig.tolist(), "gamma": gamma, "exact": exact,
                     "monte_carlo": mc, "standard_error": se, "z": z})
    return OracleVerdict("gaussian_mgf", PASS if worst <= 3 else FAIL, worst, 3.0,
                         max(r["standard_error"] for r in rows), seed, trials, {"cases": rows})


# --------------------------------------------------------------------------
# martingale tail
# --------------------------------------------------------------------------

LAMBDA_GRID = np.linspace(0.01, 0.49, 49)


def tail_bound_min(mu, Sigma, beta: float, h: float, lambdas=LAMBDA_GRID) -> tuple[float, float]:
    """``(bound, lambda)`` minimising the raw tail bound over a lambda grid in ``(0, 1/2)``."""
    best = (math.inf, float(lambdas[0]))
    for lam in lambdas:
        try:
            raw = theory.martingale_tail_bound(mu, Sigma, beta, float(lam), h).raw
        except theory.PreconditionError:
            continue
        if raw < best[0]:
            best = (raw, float(lam))
    return best


def martingale_moments(lin: OULinearization, t1: float, beta: float, y0) -> tuple[np.ndarray, np.ndarray]:
    """Terminal mean ``H^{1/2} e^{-t1 H} y0`` and covariance ``(I - e^{-2 t1 H}) / beta``."""
    y0 = np.asarray(y0, float)
    mu = lin.H_sqrt @ lin.spectral(lambda l: np.exp(-t1 * l)) @ y0
    Sigma = (np.eye(lin.dimension) - lin.spectral(lambda l: np.exp(-2 * t1 * l))) / beta
    return mu, Sigma


def default_h_grid(mu, Sigma, beta: float, points: int = 8, top: float = 0.02, bottom: float = 0.9) -> np.ndarray:
    """``points`` levels between where the optimised bound equals ``bottom`` and ``top``."""
    def solve(target):
        lo, hi = 0.0, 1.0
        while tail_bound_min(mu, Sigma, beta, hi)[0] > target:
            hi *= 2
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if tail_bound_min(mu, Sigma, beta, mid)[0] > target:
                lo = mid
            else:
                hi = mid
        return hi
    return np.linspace(solve(bottom), solve(top), points)


def simulate_martingale_sup(lin: OULinearization, t0: float, t1: float, beta: float, y0, replicas: int,
                            substeps: int, seed: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Grid suprema of ``||Q_{t0}(t1) Z0_t||`` on ``substeps`` and ``substeps/2`` intervals.

    Works in the eigenbasis of ``H`` where the martingale has independent
    coordinates with exactly known variances; the coarse path is the fine path
    at every other grid point.  Returns ``(sup_fine, sup_coarse, max_step_sd)``.
    """
    if not t1 > t0 or t0 < 0:
        raise OracleError("need 0 <= t0 < t1")
    if substeps < 2 or substeps % 2:
        raise OracleError("degenerate grid: substeps must be an even number >= 2")
    lam = lin.eigenvalues
    V = lin.eigenvectors
    d = lam.size
    mu = np.sqrt(lam) * np.exp(-t1 * lam) * (V.T @ np.asarray(y0, float))
    grid = np.linspace(t0, t1, substeps + 1)
    var = (np.exp(2 * (grid[:, None] - t1) * lam) - np.exp(-2 * t1 * lam)) / beta
    inc_sd = np.sqrt(np.diff(var, axis=0))
    rng = make_stream(derive_seed(seed))
    start = mu + np.sqrt(var[0]) * rng.standard_normal((replicas, d))
    xi = rng.standard_normal((substeps, replicas, d))
    path = np.concatenate([start[None], start + np.cumsum(inc_sd[:, None, :] * xi, axis=0)])
    norms = np.sqrt((path * path).sum(axis=2))
    step_sd = float(np.sqrt((inc_sd**2).sum(axis=1)).max())
    return norms.max(axis=0), norms[::2].max(axis=0), step_sd


def verify_martingale_tail(lin: OULinearization, t0: float, t1: float, beta: float, y0,
                           h_grid: Optional[Sequence[float]] = None, replicas: int = 10_000, seed: int = 0,
                           substeps: int = 256, refinement_tolerance: float = 0.02,
                           name: str = "martingale_tail") -> OracleVerdict:
    """Empirical sup-tail of the OU martingale against the optimised analytic bound.

    PASS iff at every ``h`` the one-sided 95% Clopper--Pearson upper bound of
    the empirical tail is at most the bound, and the tail estimates on the
    fine and half-resolution grids differ by less than ``refinement_tolerance``
    (absolute) at every ``h``.  A grid supremum never exceeds the continuous
    one, so coarse grids can only make the check easier to pass; the
    refinement gap is reported for that reason.
    """
    if replicas < 10_000:
        raise OracleError("replicas must be >= 1e4")
    mu, Sigma = martingale_moments(lin, t1, beta, y0)
    hs = default_h_grid(mu, Sigma, beta) if h_grid is None else np.asarray(h_grid, float)
    if hs.size < 1:
        raise OracleError("degenerate grid: empty h grid")
    sup_f, sup_c, step_sd = simulate_martingale_sup(lin, t0, t1, beta, y0, replicas, substeps, seed)
    rows, margin, gap, any_straddle, any_fail = [], -math.inf, 0.0, False, False
    for h in hs:
        k = int((sup_f >= h).sum())
        kc = int((sup_c >= h).sum())
        p, pc = k / replicas, kc / replicas
        up = clopper_pearson_upper(k, replicas)
        bound, lam = tail_bound_min(mu, Sigma, beta, float(h))
        clamped = min(bound, 1.0)
        margin = max(margin, up - clamped)
        gap = max(gap, abs(p - pc))
        if p > clamped:
            any_fail = True
        elif up > clamped:
            any_straddle = True
        rows.append({"h": float(h), "tail": p, "tail_upper95": up, "tail_half_grid": pc,
                     "bound": clamped, "bound_raw": bound, "lambda": lam})
    refine_ok = gap < refinement_tolerance
    if any_fail or not refine_ok:
        status = FAIL
    elif any_straddle:
        status = INCONCLUSIVE
    else:
        status = PASS
    se = max(math.sqrt(r["tail"] * (1 - r["tail"]) / replicas) for r in rows)
    details = {"t0": t0, "t1": t1, "beta": beta, "y0": np.asarray(y0, float).tolist(), "H": lin.H.tolist(),
               "mu": mu.tolist(), "Sigma": Sigma.tolist(), "substeps": substeps, "rows": rows,
               "refinement_gap": gap, "refinement_tolerance": refinement_tolerance,
               "max_substep_sd": step_sd}
    return OracleVerdict(name, status, margin, 0.0, se, seed, replicas, details)


MARTINGALE_SETTINGS = (
    {"H": [[1.0, 0.0], [0.0, 1.0]], "beta": 10.0, "y0": [0.0, 0.0], "t0": 0.5, "t1": 1.0},
    {"H": [[1.0, 0.0], [0.0, 3.0]], "beta": 5.0, "y0": [0.5, -0.2], "t0": 0.0, "t1": 0.5},
    {"H": [[2.0, 0.5], [0.5, 1.0]], "beta": 20.0, "y0": [0.3, 0.3], "t0": 0.2, "t1": 1.2},
)


def verify_martingale_tail_suite(replicas: int = 10_000, seed: int = 0, settings=MARTINGALE_SETTINGS) -> OracleVerdict:
    parts = []
    for i, s in enumerate(settings):
        lin = build_ou_linearization(np.zeros(len(s["y0"])), np.asarray(s["H"], float))
        parts.append(verify_martingale_tail(lin, s["t0"], s["t1"], s["beta"], s["y0"], replicas=replicas,
                                            seed=derive_seed(seed, i), name=f"martingale_tail[{i}]"))
    order = {FAIL: 2, INCONCLUSIVE: 1, PASS: 0}
    status = max((p.status for p in parts), key=order.__getitem__)
    return OracleVerdict("martingale_tail", status, max(p.statistic for p in parts), 0.0,
                         max(p.standard_error for p in parts), seed, replicas,
                         {"settings": [p.to_dict() for p in parts]})


# --------------------------------------------------------------------------
# uniform deviation scaling
# --------------------------------------------------------------------------

DEFAULT_N_GRID = (100, 400, 1600, 6400)


def grid_deviations(landscape: ls_mod.Landscape, pts: np.ndarray) -> tuple[float, float, float]:
    """Grid suprema of the value, gradient-norm and Hessian spectral-norm deviations."""
    if landscape.population_value is None:
        raise OracleError(f"{landscape.name} has no closed-form population risk")
    dv = np.abs(landscape.value(pts) - landscape.population_value(pts)).max()
    dg = np.sqrt(((landscape.gradient(pts) - landscape.population_gradient(pts)) ** 2).sum(-1)).max()
    dh = np.linalg.norm(landscape.hessian(pts) - landscape.population_hessian(pts), ord=2, axis=(-2, -1)).max()
    return float(dv), float(dg), float(dh)


def _family_params(family: str, d: int, n: int, seed: int, extra: Optional[dict]) -> dict:
    p = {"dimension": d}
    if family in ("gaussian_location", "perturbed_quadratic"):
        p.update(n=n, seed=seed)
    if family == "gaussian_location":
        p["mean"] = [0.0] * d
    p.update(extra or {})
    return p


def verify_uniform_deviation_scaling(family: str = "gaussian_location", d: int = 1,
                                     n_grid: Sequence[int] = DEFAULT_N_GRID, grid_resolution: int = 41,
                                     dataset_replicas: int = 200, seed: int = 0, delta: float = 0.1,
                                     slope_window: tuple = (-0.6, -0.4), family_params: Optional[dict] = None,
                                     bootstrap: int = 200) -> OracleVerdict:
    """Regress the log ``1 - delta`` quantile of the grid-sup deviation on ``log(n / log n)``.

    PASS iff every non-degenerate level has slope inside ``slope_window``.  A
    level whose deviation is identically zero at every ``n`` is a degenerate
    PASS and is reported as such.  The slope SE comes from a bootstrap over
    dataset replicas.
    """
    if d > 2:
        raise OracleError("d must be <= 2")
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 4:
        raise OracleError("n_grid too short for regression (< 4 points)")
    levels = ("risk", "grad", "hess")
    devs = np.empty((len(n_grid), dataset_replicas, 3))
    pts = None
    for i, n in enumerate(n_grid):
        for j in range(dataset_replicas):
            land = build_family(family, _family_params(family, d, n, derive_seed(seed, i, j), family_params))
            if pts is None:
                res = grid_resolution if d > 1 else max(grid_resolution, 201)
                pts = ball_grid(d, land.constants.R, res)
            devs[i, j] = grid_deviations(land, pts)
    q = 1 - delta
    x = np.log([n / math.log(n) for n in n_grid])
    rng = make_stream(derive_seed(seed, 10**6))
    out, ok = {}, True
    for li, name in enumerate(levels):
        col = devs[:, :, li]
        if np.all(col <= 1e-12):
            out[name] = {"degenerate": True, "status": PASS, "slope": None, "quantiles": [0.0] * len(n_grid)}
            continue
        quant = np.quantile(col, q, axis=1)
        fit = stats.linregress(x, np.log(quant))
        boots = []
        for _ in range(bootstrap):
            idx = rng.integers(0, dataset_replicas, size=(len(n_grid), dataset_replicas))
            qb = np.quantile(np.take_along_axis(col, idx, axis=1), q, axis=1)
            boots.append(stats.linregress(x, np.log(qb)).slope)
        inside = slope_window[0] <= fit.slope <= slope_window[1]
        ok &= inside
        out[name] = {"degenerate": False, "status": PASS if inside else FAIL, "slope": float(fit.slope),
                     "intercept": float(fit.intercept), "r2": float(fit.rvalue**2),
                     "slope_bootstrap_se": float(np.std(boots, ddof=1)), "quantiles": quant.tolist()}
    slopes = [v["slope"] for v in out.values() if v["slope"] is not None]
    worst = max(slopes, key=lambda s: abs(s + 0.5)) if slopes else 0.0
    ses = [v["slope_bootstrap_se"] for v in out.values() if v["slope"] is not None]
    return OracleVerdict(f"uniform_deviation[{family},d={d}]", PASS if ok else FAIL, worst, -0.5,
                         max(ses) if ses else None, seed, dataset_replicas,
                         {"n_grid": n_grid, "quantile": q, "slope_window": list(slope_window),
                          "levels": out, "grid_points": int(len(pts))})


# --------------------------------------------------------------------------
# strongly Morse transfer
# --------------------------------------------------------------------------


def verify_strongly_morse_transfer(family: str = "perturbed_quadratic", eps0: float = 0.5, m: float = 0.25,
                                   n: Optional[int] = None, dataset_replicas: int = 100, seed: int = 0,
                                   d: int = 2, delta: float = 0.1, floor_multiplier: float = 1.0,
                                   grid_resolution: int = 101, family_params: Optional[dict] = None,
                                   margin: float = 0.05) -> OracleVerdict:
    """Fraction of empirical risks that pass the ``(eps0, m)`` strongly-Morse grid certificate.

    The population risk must first pass at ``(2 eps0, 2 m)``.  When ``n`` is
    not given it is the sample-size floor times ``floor_multiplier``.
    """
    if d > 2:
        raise OracleError("d must be <= 2")
    probe = build_family(family, _family_params(family, d, 2, seed, family_params))
    if probe.population_value is None:
        raise OracleError("population certificate missing: family has no closed-form population risk")
    pop_cert = certify_strongly_morse(probe.population(), 2 * eps0, 2 * m, grid_resolution)
    if pop_cert["status"] != PASS:
        raise OracleError(f"population certificate missing: population fails ({2 * eps0}, {2 * m}) check")
    params = theory.ProblemParams(probe.constants, d, epsilon=eps0, delta=delta, r=eps0, T=0.0)
    floor = theory.sample_size_floor(params, eps0, m)
    n_used = int(n) if n is not None else max(2, int(math.ceil(floor * floor_multiplier)))
    hits, worst = 0, math.inf
    for j in range(dataset_replicas):
        land = build_family(family, _family_params(family, d, n_used, derive_seed(seed, j), family_params))
        cert = certify_strongly_morse(land, eps0, m, grid_resolution)
        hits += cert["status"] == PASS
        if cert["min_abs_eigenvalue"] is not None:
            worst = min(worst, cert["min_abs_eigenvalue"])
    details = {"family": family, "eps0": eps0, "m": m, "n": n_used, "sample_floor": floor,
               "floor_multiplier": floor_multiplier, "population_certificate": pop_cert,
               "worst_min_abs_eigenvalue": None if worst == math.inf else worst}
    return _proportion_verdict(f"strongly_morse_transfer[{family}]", hits, dataset_replicas, 1 - delta, seed,
                               details, margin)


# --------------------------------------------------------------------------
# a-posteriori risk bound
# --------------------------------------------------------------------------


# keeps R, and with it the admissible step count, small
APOSTERIORI_TRUNCATION = 1.0


def aposteriori_params(constants, d: int, epsilon: float = 0.5, delta: float = 0.1, T: float = 1.0,
                       c: float = 1.0, r: Optional[float] = None) -> theory.ProblemParams:
    """Default parameter set: ``r = eps / 8`` so the recurrence window is empty."""
    return theory.ProblemParams(constants, d, epsilon=epsilon, delta=delta, r=epsilon / 8 if r is None else r,
                                T=T, c=c)


def _run_one_aposteriori(land, params: theory.ProblemParams, eta: float, beta: float, n: int, noise_seed: int,
                         noiseless: bool, initial_point=None) -> dict:
    lm = find_local_minimum(land, np.zeros(land.dimension))
    T_rec, T_esc = theory.recurrence_time(params), theory.escape_time(params)
    tube = TubeSpec(lm.location, lm.hessian_at_min, params.epsilon, params.r, params.constants.m)
    w0 = (default_initial_point(lm, params.r, land.constants.R) if initial_point is None
          else np.asarray(initial_point, float))
    acc = TubeAccumulator(tube, eta, T_rec, T_esc, 1)
    best, far = math.inf, 0.0
    for start, W in langevin_blocks(land.gradient, w0, eta, beta, acc.K, [noise_seed], noiseless=noiseless):
        acc.update(start, W)
        k = np.arange(start, start + len(W))
        sel = (k >= acc.k_start) & (k <= acc.K)
        if sel.any():
            Ws = W[sel, 0, :]
            best = min(best, float(land.value(Ws).min()))
            far = max(far, float(h_norm(Ws - lm.location, lm.hessian_at_min).max()))
    cls = acc.classification(0)
    F_pop = float(land.population_value(lm.location))
    F_emp = float(land.value(lm.location))
    thr = theory.deviation_threshold(params, n).risk
    return {"outcome": cls.outcome, "E1": F_pop - F_emp, "E2": F_emp - best, "threshold": thr,
            "holds": F_pop <= best + thr, "max_H_distance_window": far, "location": lm.location.tolist()}


def verify_aposteriori_bound(family: str = "gaussian_location", params: Optional[theory.ProblemParams] = None,
                             n: int = 2000, dataset_replicas: int = 100, seed: int = 0, d: int = 2,
                             family_params: Optional[dict] = None, noiseless: bool = False,
                             margin: float = 0.05, e2_tolerance: float = 1e-12) -> OracleVerdict:
    """Population risk at the empirical minimum against the best empirical risk seen along the path.

    Replicas classified EXIT_EARLY are set aside.  Among the rest the oracle
    checks ``F(w_Z) <= min_k F_Z(W_k) + sigma sqrt(c d log n / n)`` over the
    window ``[ceil(T_rec / eta), floor(T_esc / eta)]``, logs the split into
    ``E1 = F(w_Z) - F_Z(w_Z)`` and ``E2 = F_Z(w_Z) - min_k F_Z(W_k)``, and
    fails outright if ``E2`` is positive while every window iterate stayed
    within H-distance ``2 eps`` and ``eps <= 3 m^{3/2} / (2L)``.
    """
    if family_params is None and family == "gaussian_location":
        family_params = {"truncation": APOSTERIORI_TRUNCATION}
    fp = _family_params(family, d, n, seed, family_params)
    probe = build_family(family, fp)
    if probe.population_value is None:
        raise OracleError(f"{family} has no closed-form population risk")
    k = probe.constants
    if params is None:
        params = aposteriori_params(k, d)
    small_eps = params.epsilon <= 3 * k.m**1.5 / (2 * k.L)
    if not small_eps:
        raise theory.PreconditionError(
            f"eps <= 3 m^(3/2) / (2L) violated: {params.epsilon} > {3 * k.m**1.5 / (2 * k.L)}")
    adm = theory.admissible_eta_beta(params)
    rows = []
    for j in range(dataset_replicas):
        land = build_family(family, dict(fp, seed=derive_seed(seed, 0, j)))
        rows.append(_run_one_aposteriori(land, params, adm.eta_max, adm.beta_min, n, derive_seed(seed, 1, j),
                                         noiseless))
    kept = [r for r in rows if r["outcome"] != EXIT_EARLY]
    e2_violations = [i for i, r in enumerate(rows) if r["outcome"] != EXIT_EARLY
                     and r["max_H_distance_window"] <= 2 * params.epsilon and r["E2"] > e2_tolerance]
    details = {
        "family": family, "n": n, "eta": adm.eta_max, "beta": None if noiseless else adm.beta_min,
        "noiseless": noiseless, "params": params.to_dict(), "retained": len(kept),
        "exit_early": len(rows) - len(kept), "threshold": rows[0]["threshold"] if rows else None,
        "E1": [r["E1"] for r in rows], "E2": [r["E2"] for r in rows],
        "max_E1": max((r["E1"] for r in kept), default=None),
        "max_E2": max((r["E2"] for r in kept), default=None),
        "E2_positive_in_stay_branch": e2_violations,
    }
    name = f"aposteriori_bound[{family}]"
    if not kept:
        return OracleVerdict(name, INCONCLUSIVE, float("nan"), 1 - params.delta - margin, None, seed,
                             dataset_replicas, dict(details, note="all replicas EXIT_EARLY"))
    verdict = _proportion_verdict(name, sum(r["holds"] for r in kept), len(kept), 1 - params.delta, seed,
                                  details, margin)
    if e2_violations:
        verdict.status = FAIL
    return verdict


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------


def _deviation_both(seed: int = 0, dataset_replicas: int = 200) -> OracleVerdict:
    parts = [verify_uniform_deviation_scaling("gaussian_location", d, seed=derive_seed(seed, d),
                                              dataset_replicas=dataset_replicas) for d in (1, 2)]
    status = PASS if all(p.passed for p in parts) else FAIL
    worst = max((p.statistic for p in parts), key=lambda s: abs(s + 0.5))
    return OracleVerdict("uniform_deviation", status, worst, -0.5, max(p.standard_error or 0 for p in parts),
                         seed, dataset_replicas, {"dimensions": [p.to_dict() for p in parts]})


ORACLES: dict[str, Callable[..., OracleVerdict]] = {
    "gaussian_mgf": lambda seed=0: verify_gaussian_mgf(seed=seed),
    "martingale_tail": lambda seed=0: verify_martingale_tail_suite(seed=seed),
    "uniform_deviation": lambda seed=0: _deviation_both(seed=seed),
    "strongly_morse_transfer": lambda seed=0: verify_strongly_morse_transfer(seed=seed),
    "aposteriori_bound": lambda seed=0: verify_aposteriori_bound(seed=seed),
}


def run_oracle(name: str, seed: int = 0) -> OracleVerdict:
    if name not in ORACLES:
        raise KeyError(f"unknown oracle {name!r}; available: {', '.join(sorted(ORACLES))}")
    return ORACLES[name](seed=seed)
