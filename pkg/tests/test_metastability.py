import math

import numpy as np
import pytest

from metalangevin import dynamics as D
from metalangevin import landscape as L
from metalangevin import metastability as S
from metalangevin import theory


def tube_1d(eps=0.5, r=0.5, m=1.0):
    return S.TubeSpec(np.zeros(1), np.eye(1), eps, r, m)


def make_traj(values, eta=0.1, kind="discrete", substep_factor=1):
    pts = np.asarray(values, dtype=float).reshape(len(values), -1)
    cfg = D.LangevinConfig(eta, 1.0, max(1, (len(pts) - 1) // substep_factor), pts[0])
    times = np.arange(len(pts)) * eta / substep_factor
    return D.Trajectory(kind, times, pts, cfg, substep_factor)


class TestClassification:
    T_REC, T_ESC = 0.5, 1.0   # event 1 on k = 1..5, event 2 on k = 5..10

    def test_constant_path_stays(self):
        c = S.classify_trajectory(make_traj([0.0] * 11), tube_1d(), self.T_REC, self.T_ESC)
        assert c.outcome == S.STAY
        assert c.first_exit_index is None and c.tau_estimate is None
        assert c.max_tube_ratio_post == 0.0

    def test_early_jump_exits(self):
        vals = [0.0] + [10 * (0.5 + 0.5)] * 10
        c = S.classify_trajectory(make_traj(vals), tube_1d(), self.T_REC, self.T_ESC)
        assert c.outcome == S.EXIT_EARLY
        assert c.first_exit_index == 1

    def test_late_crossing_is_violation(self):
        vals = [0.1] * 11
        vals[8] = 2.0
        c = S.classify_trajectory(make_traj(vals), tube_1d(), self.T_REC, self.T_ESC)
        assert c.outcome == S.VIOLATION
        assert c.tau_estimate == pytest.approx(0.8)
        assert c.max_tube_ratio_pre < 0.5 < 1.0 < c.max_tube_ratio_post

    def test_exact_half_ratio_counts_as_exit(self):
        # at k = 1 the radius is 0.5 + 0.5 e^{-0.1}
        vals = [0.0] * 11
        vals[1] = 0.5 * (0.5 + 0.5 * math.exp(-0.1))
        c = S.classify_trajectory(make_traj(vals), tube_1d(), self.T_REC, self.T_ESC)
        assert c.outcome == S.EXIT_EARLY

    def test_start_point_is_not_in_event_one_window(self):
        vals = [5.0] + [0.0] * 10
        c = S.classify_trajectory(make_traj(vals), tube_1d(), self.T_REC, self.T_ESC)
        assert c.outcome == S.STAY
        assert c.tau_estimate == 0.0

    def test_too_short(self):
        with pytest.raises(S.StudyError, match="too short"):
            S.classify_trajectory(make_traj([0.0] * 5), tube_1d(), self.T_REC, self.T_ESC)

    def test_needs_discrete_kind(self):
        tr = make_traj([0.0] * 41, kind="diffusion_proxy", substep_factor=4)
        with pytest.raises(S.StudyError):
            S.classify_trajectory(tr, tube_1d(), self.T_REC, self.T_ESC)

    def test_event_windows(self):
        assert S.event_windows(0.1, 0.5, 1.0) == (5, 5, 10)
        assert S.event_windows(0.3, 0.5, 1.0) == (1, 2, 3)
        assert S.event_windows(0.1, 0.0, 1.0) == (0, 0, 10)


@pytest.fixture(scope="module")
def paths():
    dw = L.build_double_well(2)
    out = []
    for s in range(20):
        cfg = D.LangevinConfig(0.05, 2.0, 300, [1.0, 0.0], seed=s)
        out.append(D.run_discrete_langevin(dw, cfg))
    return out


@pytest.fixture(scope="module")
def well():
    dw = L.build_double_well(1)
    return dw, L.find_local_minimum(dw, [-0.8])


class TestRandomPaths:
    def tube(self, eps=0.3):
        return S.TubeSpec(np.array([1.0, 0.0]), np.diag([2.0, 1.0]), eps, 0.4, 1.0)

    def test_trichotomy(self, paths):
        seen = {S.classify_trajectory(p, self.tube(), 1.0, 3.0).outcome for p in paths}
        assert seen <= set(S.OUTCOMES)

    def test_appending_points_does_not_change_outcome(self, paths):
        for p in paths:
            short = D.Trajectory(p.kind, p.times[:61], p.points[:61], p.config)
            assert (S.classify_trajectory(short, self.tube(), 1.0, 3.0)
                    == S.classify_trajectory(p, self.tube(), 1.0, 3.0))

    def test_scaling_the_metric_is_invariant(self, paths):
        t = self.tube()
        for p in paths:
            a = S.classify_trajectory(p, t, 1.0, 3.0)
            b = S.classify_trajectory(p, t.scaled(3.7), 1.0, 3.0)
            assert a.outcome == b.outcome
            assert b.max_tube_ratio_post == pytest.approx(a.max_tube_ratio_post, rel=1e-12)

    def test_tau_monotone_in_epsilon(self, paths):
        for p in paths:
            taus = [S.estimate_tau(p, self.tube(eps)) for eps in (0.1, 0.3, 0.9, 100.0)]
            finite = [math.inf if t is None else t for t in taus]
            assert finite == sorted(finite)
            assert taus[-1] is None


class TestTau:
    def test_outside_start(self):
        assert S.estimate_tau(make_traj([3.0, 0.0, 0.0]), tube_1d()) == 0.0

    def test_noiseless_contraction_is_censored(self):
        q = L.build_quadratic(np.diag([1.0, 2.0]))
        lin = D.build_ou_linearization([0.0, 0.0], q.hessian(np.zeros(2)))
        tr = D.run_exact_ou(lin, D.LangevinConfig(0.01, 1.0, 1000, [0.5 / math.sqrt(2), 0.0], noiseless=True))
        tube = S.TubeSpec(np.zeros(2), np.diag([1.0, 2.0]), 0.1, 0.5, 1.0)
        assert S.estimate_tau(tr, tube) is None


class TestViolationStudy:
    @pytest.fixture
    def setup(self):
        q = L.build_quadratic(np.eye(2), b=1.0, hessian_lipschitz=1.0)
        lm = L.find_local_minimum(q, [0.1, 0.1])
        p = theory.ProblemParams(q.constants, 2, 0.5, 0.1, 0.5 / 8, 1.0)
        return q, lm, p

    def test_noiseless_always_stays(self, setup):
        q, lm, p = setup
        rep = S.run_violation_study(q, lm, p, 5, 0, eta=0.01, noiseless=True)
        assert rep["counts"][S.STAY] == 5
        assert rep["beta"] is None

    def test_small_study_is_deterministic(self, setup):
        q, lm, p = setup
        a = S.run_violation_study(q, lm, p, 40, 3, eta=0.01, beta=400.0, override=True, per_replica=True)
        b = S.run_violation_study(q, lm, p, 40, 3, eta=0.01, beta=400.0, override=True, per_replica=True)
        assert a == b
        assert a["K"] == 100
        assert sum(a["counts"].values()) == 40
        assert len(a["per_replica"]) == 40

    def test_inadmissible_pair_rejected_without_override(self, setup):
        q, lm, p = setup
        with pytest.raises(S.StudyError, match="inadmissible"):
            S.run_violation_study(q, lm, p, 5, 0, eta=0.01, beta=1.0)
        rep = S.run_violation_study(q, lm, p, 5, 0, eta=0.01, beta=1.0, override=True)
        assert rep["admissibility_overridden"] and rep["admissibility_notes"]

    def test_start_outside_radius_rejected(self, setup):
        q, lm, p = setup
        with pytest.raises(S.StudyError, match="outside"):
            S.run_violation_study(q, lm, p, 5, 0, eta=0.01, noiseless=True, initial_point=[1.0, 0.0])

    def test_cold_enough_is_rarely_violated(self, setup):
        q, lm, p = setup
        rep = S.run_violation_study(q, lm, p, 200, 1, eta=0.01, beta=400.0, override=True)
        assert rep["violation_fraction"] <= p.delta

    def test_far_too_hot_violates_often(self, setup):
        # diagnostic only: not implied by any bound, but a hot chain leaves the tube
        q, lm, p = setup
        rep = S.run_violation_study(q, lm, p, 200, 1, eta=0.01, beta=1.0, override=True)
        assert rep["violation_fraction"] > p.delta

    def test_wilson(self):
        lo, hi = S.wilson_interval(0, 500)
        assert lo == 0.0 and 0.007 < hi < 0.008
        assert S.wilson_interval(0, 0) == (0.0, 1.0)


class TestEscape:
    def test_sweep_deterministic(self, well):
        dw, lm = well
        a = S.escape_time_sweep(dw, lm, [2.0, 3.0], 0.01, 5000, 20, 4)
        b = S.escape_time_sweep(dw, lm, [2.0, 3.0], 0.01, 5000, 20, 4)
        assert a.to_dict(with_samples=True) == b.to_dict(with_samples=True)
        assert a.regression["points"] == 2

    def test_all_censored_is_flagged(self, well):
        dw, lm = well
        st = S.escape_time_sweep(dw, lm, [2.0, 200.0], 0.01, 50, 5, 0)
        assert st.censoring_flags == [False, True] or st.censoring_flags == [True, True]
        assert st.mean_escape[1] is None
        rows = list(st.rows())
        assert len(rows) == 10 and rows[-1][3] is True

    def test_mean_grows_with_beta(self, well):
        dw, lm = well
        st = S.escape_time_sweep(dw, lm, [2.0, 6.0], 0.01, 100_000, 100, 1)
        assert st.mean_escape[0] < st.mean_escape[1]

    def test_paired_halving_changes_mean_little(self, well):
        dw, lm = well
        seeds = list(range(300))
        coarse = S.escape_times(dw, lm.location, 5.0, 0.02, 50_000, seeds, noise_aggregation=2)
        fine = S.escape_times(dw, lm.location, 5.0, 0.02, 50_000, seeds, substep_factor=2)
        assert None not in coarse and None not in fine
        assert abs(np.mean(fine) / np.mean(coarse) - 1) < 0.10

    def test_betas_must_increase(self, well):
        dw, lm = well
        with pytest.raises(S.StudyError):
            S.escape_time_sweep(dw, lm, [3.0, 2.0], 0.01, 10, 2, 0)


class TestOscillation:
    def test_noiseless_drift_gap(self):
        q = L.build_quadratic(np.eye(2))
        eta, s = 0.01, 8
        cfg = D.LangevinConfig(eta, 1.0, 200, [0.1, 0.0], noiseless=True)
        tr = D.run_diffusion_proxy(q, cfg, substep_factor=s)
        rep = S.interstep_oscillation_check(tr, eta, 0.5, 1.0)
        assert rep["violation_fraction"] == 0.0
        closed = 1.0 * eta * 0.1 * math.exp(eta)
        assert rep["oscillation_quantiles"]["1.0"] <= closed
        assert rep["intervals"] == 200

    def test_compares_with_bound(self):
        q = L.build_quadratic(np.eye(1), b=1.0, hessian_lipschitz=1.0)
        p = theory.ProblemParams(q.constants, 1, 0.5, 0.1, 0.5, 1.0)
        tr = D.run_diffusion_proxy(q, D.LangevinConfig(0.001, 500.0, 500, [0.0], seed=2), substep_factor=8)
        rep = S.interstep_oscillation_check(tr, 0.001, 0.5, 1.0, params=p, beta=500.0)
        assert rep["within_bound"]

    def test_coarse_substeps_rejected(self):
        q = L.build_quadratic(np.eye(1))
        tr = D.run_diffusion_proxy(q, D.LangevinConfig(0.01, 1.0, 10, [0.0]), substep_factor=2)
        with pytest.raises(S.StudyError):
            S.interstep_oscillation_check(tr, 0.01, 0.5, 1.0)
        with pytest.raises(S.StudyError):
            S.interstep_oscillation_check(make_traj([0.0] * 5), 0.01, 0.5, 1.0)
