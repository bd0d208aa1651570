import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metalangevin import landscape as L
from conftest import ball_points, shipped_landscapes


def fd_gradient(f, w, h=1e-6):
    g = np.empty_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        g[j] = (f(w + e) - f(w - e)) / (2 * h)
    return g


def fd_hessian(grad, w, h=1e-6):
    cols = []
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        cols.append((grad(w + e) - grad(w - e)) / (2 * h))
    return np.stack(cols, axis=1)


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-8)


class TestDerivatives:
    def test_gradient_matches_finite_differences(self, any_landscape):
        rng = np.random.default_rng(0)
        R = any_landscape.constants.R
        for w in ball_points(rng, any_landscape.dimension, R, 100):
            assert rel_err(any_landscape.gradient(w), fd_gradient(any_landscape.value, w)) < 1e-5

    def test_hessian_matches_finite_differences(self, any_landscape):
        rng = np.random.default_rng(1)
        R = any_landscape.constants.R
        for w in ball_points(rng, any_landscape.dimension, R, 100):
            assert rel_err(any_landscape.hessian(w), fd_hessian(any_landscape.gradient, w)) < 1e-4

    def test_batch_evaluation_is_bit_identical(self, any_landscape):
        rng = np.random.default_rng(2)
        W = ball_points(rng, any_landscape.dimension, any_landscape.constants.R, 17)
        for fn in (any_landscape.value, any_landscape.gradient, any_landscape.hessian):
            batch = fn(W)
            single = np.stack([fn(w) for w in W])
            assert np.array_equal(batch, single)

    def test_pure(self, any_landscape):
        w = np.full(any_landscape.dimension, 0.3)
        assert any_landscape.value(w) == any_landscape.value(w.copy())


class TestRegularity:
    def test_linearization_remainder(self, any_landscape):
        lm = _some_minimum(any_landscape)
        rng = np.random.default_rng(3)
        Lc = any_landscape.constants.L
        for u in ball_points(rng, any_landscape.dimension, 1.0, 100):
            w = lm.location + u
            rem = any_landscape.gradient(w) - lm.hessian_at_min @ u
            assert np.linalg.norm(rem) <= 0.5 * Lc * (u @ u) * (1 + 1e-9) + 1e-12

    def test_declared_lipschitz_constants(self, any_landscape):
        rng = np.random.default_rng(4)
        k = any_landscape.constants
        d = any_landscape.dimension
        W = ball_points(rng, d, 2 * k.R, 100)
        V = ball_points(rng, d, 2 * k.R, 100)
        for w, v in zip(W, V):
            gap = np.linalg.norm(w - v)
            assert np.linalg.norm(any_landscape.gradient(w) - any_landscape.gradient(v)) <= k.M * gap * (1 + 1e-9)
            hgap = np.linalg.norm(any_landscape.hessian(w) - any_landscape.hessian(v), 2)
            assert hgap <= k.L * gap * (1 + 1e-9) + 1e-12

    def test_declared_dissipativity_holds(self, any_landscape):
        k = any_landscape.constants
        rep = L.check_dissipativity(any_landscape, k.m, k.b, probe_count=2048)
        assert rep["status"] == "PASS", rep

    def test_constants_consistency(self):
        k = L.RegularityConstants(A=0, B=0, C=1, M=1, L=1, m=2, b=8)
        assert k.R == 2.0
        assert L.RegularityConstants.from_dict(k.to_dict()) == k

    @pytest.mark.parametrize("bad", [dict(M=0), dict(m=-1), dict(A=-1), dict(R=10.0), dict(b=float("inf"))])
    def test_constants_rejected(self, bad):
        base = dict(A=0, B=0, C=1, M=1, L=1, m=1, b=1)
        base.update(bad)
        with pytest.raises(L.LandscapeError):
            L.RegularityConstants(**base)


def _some_minimum(land):
    start = np.zeros(land.dimension)
    if land.name == "double_well":
        start[0] = 0.8
    if land.name == "quadratic":
        start = np.asarray(land.params["center"])
    return L.find_local_minimum(land, start)


class TestDoubleWell:
    def test_values_at_known_points(self):
        dw = L.build_double_well(1)
        assert dw.value(np.array([1.0])) == 0.0
        assert dw.gradient(np.array([1.0]))[0] == 0.0
        assert np.array_equal(dw.hessian(np.array([1.0])), [[2.0]])
        assert dw.value(np.array([0.0])) == 0.25

    def test_two_dimensional_minimum(self):
        dw = L.build_double_well(2)
        assert np.array_equal(dw.gradient(np.array([1.0, 0.0])), [0.0, 0.0])
        assert np.array_equal(dw.hessian(np.array([1.0, 0.0])), np.diag([2.0, 1.0]))

    def test_minimum_search_and_mirror_symmetry(self):
        dw = L.build_double_well(1)
        right = L.find_local_minimum(dw, [0.5])
        left = L.find_local_minimum(dw, [-0.5])
        assert right.location[0] == pytest.approx(1.0, abs=1e-12)
        assert left.location[0] == pytest.approx(-1.0, abs=1e-12)
        assert np.allclose(right.hessian_at_min, [[2.0]])
        assert right.gradient_norm_residual <= 1e-10

    def test_dissipativity_brute_force(self):
        dw = L.build_double_well(1)
        # w^4 - 1.5 w^2 + 0.5 has minimum -0.0625 at w^2 = 0.75
        assert L.check_dissipativity(dw, 0.5, 0.5)["status"] == "FAIL"
        assert L.check_dissipativity(dw, 0.5, 0.6)["status"] == "PASS"
        grid = np.linspace(-5, 5, 200001)
        brute = (grid**4 - grid**2 - 0.5 * grid**2).min()
        assert brute == pytest.approx(-0.5625, abs=1e-6)
        assert L.check_dissipativity(dw, 0.5, 0.5625)["status"] == "PASS"

    def test_strongly_morse(self):
        dw = L.build_double_well(1)
        assert L.certify_strongly_morse(dw, 0.1, 0.5)["status"] == "PASS"
        # |F'| <= 0.4 covers w = +-1/sqrt(3), where F'' = 0
        rep = L.certify_strongly_morse(dw, 0.4, 0.5)
        assert rep["status"] == "FAIL"
        assert abs(abs(rep["worst_point"][0]) - 1 / math.sqrt(3)) < 0.05

    def test_rejects_degenerate_or_outside_start(self):
        dw = L.build_double_well(1)
        with pytest.raises(L.LandscapeError):
            L.find_local_minimum(dw, [10.0])
        with pytest.raises(L.LandscapeError):
            L.build_double_well(0)


class TestQuadratic:
    def test_equality_case_of_dissipativity(self):
        q = L.build_quadratic(np.eye(2) * 0.7, b=0.0)
        rep = L.check_dissipativity(q, 0.7, 0.0)
        assert rep["status"] == "PASS"
        assert rep["min_margin"] == pytest.approx(0.0, abs=1e-9)

    def test_too_small_b_fails(self):
        q = L.build_quadratic(np.eye(1), center=[1.0], b=0.0)
        # <w, w - 1> - 0.5 w^2 + b  has minimum b - 0.5 at w = 1
        assert L.check_dissipativity(q, 0.5, 0.45)["status"] == "FAIL"
        assert L.check_dissipativity(q, 0.5, 0.5)["status"] == "PASS"

    def test_strongly_morse_identity(self):
        q = L.build_quadratic(np.eye(2))
        assert L.certify_strongly_morse(q, 10.0, 0.9, grid_resolution=21)["status"] == "PASS"

    def test_degenerate_minimum_rejected(self):
        k = L.RegularityConstants(A=0, B=0, C=1, M=1, L=1, m=0.9, b=0.9)
        q = L.build_quadratic(np.diag([1.0, 0.5]))
        bad = L.Landscape("q", 2, q.value, q.gradient, q.hessian, k)
        with pytest.raises(L.DegenerateMinimumError):
            L.find_local_minimum(bad, [0.1, 0.1])


class TestGaussianLocation:
    def test_single_zero_sample(self):
        ds = L.Dataset(np.zeros((1, 1)), {"law": "fixed"})
        land = L.build_gaussian_location_erm(ds)
        lm = L.find_local_minimum(land, [0.0])
        assert lm.location[0] == 0.0
        assert land.value(np.array([0.0])) == 0.0

    def test_two_symmetric_samples(self):
        ds = L.Dataset(np.array([[1.0], [-1.0]]), {"law": "fixed"})
        land = L.build_gaussian_location_erm(ds)
        lm = L.find_local_minimum(land, [0.3])
        assert lm.location[0] == pytest.approx(0.0, abs=1e-12)
        # mean of 0.5 * (w - z)^2 at w = 0 over z = +-1
        assert land.value(np.array([0.0])) == pytest.approx(0.5)

    def test_minimum_is_shrunk_sample_mean(self):
        ds = L.sample_truncated_gaussian(100, [0.0, 0.0], 5.0, seed=11)
        land = L.build_gaussian_location_erm(ds, ridge=0.25)
        lm = L.find_local_minimum(land, [0.0, 0.0])
        assert np.allclose(lm.location, ds.samples.mean(axis=0) / 1.5, atol=1e-10)

    def test_population_closed_form(self):
        ds = L.sample_truncated_gaussian(400_000, [0.5], 1.0, seed=1)
        land = L.build_gaussian_location_erm(ds)
        w = np.array([0.2])
        assert land.value(w) == pytest.approx(land.population_value(w), abs=5e-3)

    def test_dataset_reproducible_and_readonly(self, tmp_path):
        a = L.sample_truncated_gaussian(10, [0.0, 1.0], 2.0, seed=5)
        b = L.sample_truncated_gaussian(10, [0.0, 1.0], 2.0, seed=5)
        assert np.array_equal(a.samples, b.samples)
        assert np.all(np.abs(a.samples - [0.0, 1.0]) <= 2.0)
        with pytest.raises(ValueError):
            a.samples[0, 0] = 1.0
        a.to_csv(tmp_path / "z.csv")
        back = np.loadtxt(tmp_path / "z.csv", delimiter=",", skiprows=1)
        assert np.array_equal(back, a.samples)

    def test_empty_dataset_rejected(self):
        with pytest.raises(L.LandscapeError):
            L.sample_truncated_gaussian(0, [0.0], 1.0, seed=0)


class TestPerturbedQuadratic:
    def test_population_is_unperturbed(self):
        land = L.build_family("perturbed_quadratic", {"dimension": 2, "n": 10, "seed": 0})
        w = np.array([0.3, -0.4])
        r2 = w @ w
        assert land.population_value(w) == pytest.approx(0.5 * r2 + 0.125 * r2 * r2)

    def test_samples_symmetric(self):
        ds = L.sample_symmetric_uniform(20, 3, 0.5, seed=1)
        assert np.array_equal(ds.samples, ds.samples.transpose(0, 2, 1))
        assert np.abs(ds.samples).max() <= 0.5


class TestFamilies:
    def test_unknown_family(self):
        with pytest.raises(L.LandscapeError):
            L.build_family("banana", {})

    def test_all_families_buildable(self):
        for name in L.FAMILIES:
            assert name in {l.name for l in shipped_landscapes().values()}

    def test_grid_too_high_dimensional(self):
        with pytest.raises(L.LandscapeError):
            L.certify_strongly_morse(L.build_quadratic(np.eye(4)), 0.1, 0.1)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.2, 5.0), min_size=1, max_size=3))
def test_quadratic_constants_are_valid(curv):
    q = L.build_quadratic(np.diag(curv))
    k = q.constants
    assert k.m <= min(curv) + 1e-12
    assert k.M == pytest.approx(max(curv))
    assert L.check_dissipativity(q, k.m, k.b, probe_count=256)["status"] == "PASS"
