"""Path classification against the two-event picture, stopping times and escape statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import theory
from .dynamics import Trajectory, h_norm, langevin_blocks
from .landscape import Landscape, LocalMinimum
from .seeding import derive_seed, replica_seeds

EXIT_EARLY = "EXIT_EARLY"
STAY = "STAY"
VIOLATION = "VIOLATION"
OUTCOMES = (EXIT_EARLY, STAY, VIOLATION)


class StudyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TubeSpec:
    """``{w : ||w - center||_H <= eps + r exp(-m t)}``."""

    center: np.ndarray
    H: np.ndarray
    epsilon: float
    r: float
    m: float

    def radius(self, t):
        return self.epsilon + self.r * np.exp(-self.m * np.asarray(t, dtype=float))

    def ratio(self, points, t):
        return h_norm(np.asarray(points) - self.center, self.H) / self.radius(t)

    def scaled(self, c: float) -> "TubeSpec":
        """Same tube with ``H -> c^2 H`` and ``(eps, r) -> (c eps, c r)``."""
        return TubeSpec(self.center, c * c * self.H, c * self.epsilon, c * self.r, self.m)


@dataclass
class EventClassification:
    outcome: str
    first_exit_index: Optional[int]
    tau_estimate: Optional[float]
    max_tube_ratio_pre: float
    max_tube_ratio_post: float

    def to_dict(self) -> dict:
        return asdict(self)


def event_windows(eta: float, T_rec: float, T_esc: float) -> tuple[int, int, int]:
    """``(k_rec, k_start, K)``: event 1 looks at ``1..k_rec``, event 2 at ``k_start..K``."""
    if eta <= 0:
        raise StudyError("classification needs eta > 0")
    k_rec = math.floor(T_rec / eta + 1e-9)
    k_start = math.ceil(T_rec / eta - 1e-9)
    K = math.floor(T_esc / eta + 1e-9)
    return k_rec, k_start, K


class TubeAccumulator:
    """Streaming reduction of tube ratios for a batch of replicas.

    Feed blocks of iterates with :meth:`update`; indices beyond ``K`` are
    ignored, so appending iterates never changes the classification.
    """

    def __init__(self, tube: TubeSpec, eta: float, T_rec: float, T_esc: float, replicas: int):
        self.tube = tube
        self.eta = eta
        self.k_rec, self.k_start, self.K = event_windows(eta, T_rec, T_esc)
        self.first_exit = np.full(replicas, -1)
        self.max_pre = np.zeros(replicas)
        self.max_post = np.zeros(replicas)
        self.tau_index = np.full(replicas, -1)
        self.seen = 0

    def update(self, start: int, W: np.ndarray) -> None:
        stop = min(start + len(W), self.K + 1)
        if stop <= start:
            return
        W = W[: stop - start]
        k = np.arange(start, stop)
        ratio = self.tube.ratio(W, (k * self.eta)[:, None])
        pre = (k >= 1) & (k <= self.k_rec)
        if pre.any():
            rp = ratio[pre]
            self.max_pre = np.maximum(self.max_pre, rp.max(axis=0))
            hit = rp >= 0.5
            fresh = hit.any(axis=0) & (self.first_exit < 0)
            if fresh.any():
                self.first_exit[fresh] = k[pre][hit.argmax(axis=0)][fresh]
        post = k >= self.k_start
        if post.any():
            self.max_post = np.maximum(self.max_post, ratio[post].max(axis=0))
        out = ratio >= 1.0
        fresh = out.any(axis=0) & (self.tau_index < 0)
        if fresh.any():
            self.tau_index[fresh] = k[out.argmax(axis=0)][fresh]
        self.seen = stop

    @property
    def complete(self) -> bool:
        return self.seen >= self.K + 1

    def outcomes(self) -> list[str]:
        if not self.complete:
            raise StudyError(f"trajectory too short: need index {self.K}, have {self.seen - 1}")
        res = []
        for fe, mp in zip(self.first_exit, self.max_post):
            if fe >= 0:
                res.append(EXIT_EARLY)
            elif mp <= 1.0:
                res.append(STAY)
            else:
                res.append(VIOLATION)
        return res

    def classification(self, i: int = 0) -> EventClassification:
        out = self.outcomes()[i]
        fe = int(self.first_exit[i])
        ti = int(self.tau_index[i])
        return EventClassification(
            outcome=out,
            first_exit_index=fe if fe >= 0 else None,
            tau_estimate=ti * self.eta if ti >= 0 else None,
            max_tube_ratio_pre=float(self.max_pre[i]),
            max_tube_ratio_post=float(self.max_post[i]),
        )


def classify_trajectory(traj: Trajectory, tube: TubeSpec, T_rec: float, T_esc: float) -> EventClassification:
    """Place a discrete trajectory in exactly one of EXIT_EARLY / STAY / VIOLATION."""
    if traj.kind != "discrete":
        raise StudyError(f"classification needs a discrete trajectory, got {traj.kind}")
    acc = TubeAccumulator(tube, traj.config.eta, T_rec, T_esc, 1)
    acc.update(0, traj.points[:, None, :])
    return acc.classification(0)


def estimate_tau(traj: Trajectory, tube: TubeSpec) -> Optional[float]:
    """First grid time with tube ratio ``>= 1``; ``None`` when censored."""
    ratio = tube.ratio(traj.points, traj.times)
    hit = np.flatnonzero(ratio >= 1.0)
    return float(traj.times[hit[0]]) if hit.size else None


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(n)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


def default_initial_point(local_min: LocalMinimum, r: float, R: float) -> np.ndarray:
    """``w_bar + (r / sqrt(lambda_max(H))) e_1``, pulled back into ``B(R)`` if needed."""
    lam_max = float(np.linalg.eigvalsh(local_min.hessian_at_min)[-1])
    w = np.array(local_min.location, dtype=float)
    w[0] += r / math.sqrt(lam_max)
    n = float(np.linalg.norm(w))
    if n > R:
        w *= R / n
    return w


def run_violation_study(landscape: Landscape, local_min: LocalMinimum, params: theory.ProblemParams,
                        replicas: int, seed: int, *, eta: Optional[float] = None,
                        beta: Optional[float] = None, noiseless: bool = False,
                        override: bool = False, initial_point=None, per_replica: bool = False) -> dict:
    """Monte Carlo estimate of the probability that neither event occurs.

    ``(eta, beta)`` default to the calculator's admissible pair.  A supplied
    pair is checked and rejected unless ``override`` is set; the report
    records which happened.
    """
    adm = theory.admissible_eta_beta(params)
    eta_u = adm.eta_max if eta is None else float(eta)
    beta_u = adm.beta_min if beta is None else float(beta)
    notes = []
    if not noiseless and (eta is not None or beta is not None):
        ok, problems = theory.is_admissible(params, eta_u, beta_u)
        if not ok:
            if not override:
                raise StudyError("inadmissible (eta, beta): " + "; ".join(problems))
            notes.extend(problems)
    T_rec, T_esc = theory.recurrence_time(params), theory.escape_time(params)
    tube = TubeSpec(local_min.location, local_min.hessian_at_min, params.epsilon, params.r, params.constants.m)
    w0 = (default_initial_point(local_min, params.r, landscape.constants.R)
          if initial_point is None else np.asarray(initial_point, dtype=float))
    r0 = float(h_norm(w0 - local_min.location, local_min.hessian_at_min))
    if r0 > params.r * (1 + 1e-9):
        raise StudyError(f"initial point at H-distance {r0} outside radius r={params.r}")
    acc = TubeAccumulator(tube, eta_u, T_rec, T_esc, replicas)
    seeds = replica_seeds(seed, replicas)
    x0 = np.tile(w0, (replicas, 1))
    for start, W in langevin_blocks(landscape.gradient, x0, eta_u, beta_u, acc.K, seeds, noiseless=noiseless):
        acc.update(start, W)
    outs = acc.outcomes()
    counts = {o: outs.count(o) for o in OUTCOMES}
    lo, hi = wilson_interval(counts[VIOLATION], replicas)
    report = {
        "replicas": replicas,
        "seed": seed,
        "eta": eta_u,
        "beta": None if noiseless else beta_u,
        "noiseless": noiseless,
        "admissibility_overridden": bool(notes),
        "admissibility_notes": notes,
        "T_rec": T_rec,
        "T_esc": T_esc,
        "K": acc.K,
        "initial_point": w0.tolist(),
        "initial_H_distance": r0,
        "counts": counts,
        "violation_fraction": counts[VIOLATION] / replicas,
        "violation_wilson95": [lo, hi],
        "delta": params.delta,
        "within_delta": hi <= params.delta + 0.05,
        "max_tube_ratio_post": float(acc.max_post.max()),
        "replica_seeds": [int(s) for s in seeds] if per_replica else None,
    }
    if per_replica:
        report["per_replica"] = [acc.classification(i).to_dict() for i in range(replicas)]
    else:
        report.pop("replica_seeds")
    return report


# --------------------------------------------------------------------------
# escape times
# --------------------------------------------------------------------------


@dataclass
class EscapeStats:
    betas: list
    mean_escape: list
    log_mean_escape: list
    replica_counts: list
    uncensored_counts: list
    censored_counts: list
    censoring_flags: list
    regression: Optional[dict]
    escape_times: list = field(repr=False)
    eta: float = 0.0
    budget_K: int = 0
    seed: int = 0

    def to_dict(self, with_samples: bool = False) -> dict:
        out = asdict(self)
        if not with_samples:
            out.pop("escape_times")
        return out

    def rows(self):
        """``(beta, replica, escape_time, censored)`` per replica; censored rows carry the budget time."""
        for b, times in zip(self.betas, self.escape_times):
            for i, t in enumerate(times):
                if t is None:
                    yield b, i, self.budget_K * self.eta, True
                else:
                    yield b, i, t, False


def escape_times(landscape: Landscape, center, beta: float, eta: float, budget_K: int, seeds: Sequence[int],
                 *, substep_factor: int = 1, noise_aggregation: int = 1, block: int = 1024) -> list:
    """First time each replica reaches the far side of ``{w_1 = 0}``; ``None`` if censored."""
    center = np.asarray(center, dtype=float)
    side = math.copysign(1.0, center[0])
    R = len(seeds)
    first = np.full(R, -1)
    dt = eta / substep_factor
    for start, W in langevin_blocks(landscape.gradient, np.tile(center, (R, 1)), eta, beta, budget_K, seeds,
                                    substep_factor=substep_factor, noise_aggregation=noise_aggregation,
                                    block=block):
        crossed = side * W[:, :, 0] <= 0
        fresh = crossed.any(axis=0) & (first < 0)
        if fresh.any():
            first[fresh] = start + crossed.argmax(axis=0)[fresh]
        if (first >= 0).all():
            break
    return [None if f < 0 else float(f * dt) for f in first]


def escape_time_sweep(landscape: Landscape, local_min: LocalMinimum, betas: Sequence[float], eta: float,
                      budget_K: int, replicas: int, seed: int, *, substep_factor: int = 1,
                      noise_aggregation: int = 1) -> EscapeStats:
    """Mean basin-escape time per ``beta`` and a least-squares fit of its log against ``beta``.

    Escape means crossing the hyperplane ``w_1 = 0`` from the basin of the
    given minimum.  Censored replicas are counted and excluded from the mean.
    """
    betas = [float(b) for b in betas]
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise StudyError("betas must be strictly increasing")
    if abs(local_min.location[0]) == 0:
        raise StudyError("minimum lies on the separating hyperplane")
    means, logs, ucnt, ccnt, flags, samples = [], [], [], [], [], []
    for j, b in enumerate(betas):
        seeds = [derive_seed(seed, j, i) for i in range(replicas)]
        t = escape_times(landscape, local_min.location, b, eta, budget_K, seeds,
                         substep_factor=substep_factor, noise_aggregation=noise_aggregation)
        done = [x for x in t if x is not None]
        samples.append(t)
        ucnt.append(len(done))
        ccnt.append(replicas - len(done))
        flags.append(len(done) == 0)
        mean = float(np.mean(done)) if done else None
        means.append(mean)
        logs.append(math.log(mean) if mean else None)
    xs = [b for b, l in zip(betas, logs) if l is not None]
    ys = [l for l in logs if l is not None]
    reg = None
    if len(xs) >= 2:
        fit = stats.linregress(xs, ys)
        reg = {"slope": float(fit.slope), "intercept": float(fit.intercept), "r2": float(fit.rvalue**2),
               "slope_stderr": float(fit.stderr), "points": len(xs)}
    return EscapeStats(betas, means, logs, [replicas] * len(betas), ucnt, ccnt, flags, reg, samples,
                       eta, budget_K, seed)


# --------------------------------------------------------------------------
# inter-step oscillation
# --------------------------------------------------------------------------


def interstep_oscillation_check(traj: Trajectory, eta: float, epsilon: float, M: float,
                                params: Optional[theory.ProblemParams] = None, beta: Optional[float] = None) -> dict:
    """Fraction of grid intervals where ``max_t ||W_t - W_{t_{k+1}}|| > eps / (2 sqrt M)``."""
    s = traj.substep_factor
    if traj.kind != "diffusion_proxy" or s < 4:
        raise StudyError("needs a diffusion-proxy trajectory with substep_factor >= 4")
    P = traj.points
    n_int = (len(P) - 1) // s
    seg = P[: n_int * s + 1]
    osc = np.empty(n_int)
    for k in range(n_int):
        block = seg[k * s:(k + 1) * s + 1]
        osc[k] = np.sqrt(((block - block[-1]) ** 2).sum(axis=1)).max()
    thr = epsilon / (2 * math.sqrt(M))
    frac = float((osc > thr).mean()) if n_int else 0.0
    report = {
        "intervals": n_int,
        "threshold": thr,
        "violation_fraction": frac,
        "oscillation_quantiles": {str(q): float(np.quantile(osc, q)) for q in (0.5, 0.9, 0.99, 1.0)} if n_int else {},
        "eta": eta,
        "substep_factor": s,
    }
    if params is not None and beta is not None:
        bound = theory.event_B_bound(params, eta, beta)
        report["event_B_bound"] = bound
        report["within_bound"] = frac <= bound
    return report
