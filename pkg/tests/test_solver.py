"""Weighted least-squares solves: direct, iterative, and the wrapper."""

import json

import numpy as np
import pytest

from latsub.fourier import DenseOperator, LatticeOperator
from latsub.index_sets import hyperbolic_cross
from latsub.lattice import Rank1Lattice, SamplePlan, search_generator
from latsub.mz import SpectralBounds, mz_constants
from latsub.solver import SolverConfig, least_squares, reconstruct
from latsub.subsampling import density_weights, plain_bss_subsample, random_subsample


def crandn(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def tight_setup(d, gamma, R, seed):
    I = hyperbolic_cross(d, gamma, R)
    lat = search_generator(I, rng_seed=seed)
    plan = SamplePlan(points=lat.points(), weights=np.full(lat.size, 1 / lat.size),
                      stable_for=I, bounds=SpectralBounds(1.0, 1.0), lattice=lat)
    return I, lat, plan


class TestLeastSquares:
    def test_full_lattice_reproduces_exactly(self):
        rng = np.random.default_rng(0)
        I, lat, plan = tight_setup(2, 1.0, 4.0, seed=0)
        op = LatticeOperator(lat, I)
        a_true = crandn(rng, len(I))
        f = op.forward(a_true)
        a, diag = least_squares(op, plan.weights, f, SolverConfig())
        assert np.max(np.abs(a - a_true)) < 1e-12 * np.max(np.abs(a_true))
        # identical to the plain rescaled adjoint (tight frame, no inverse)
        assert np.allclose(a, op.adjoint(f) / lat.size, atol=1e-13)
        assert diag.converged

    def test_zero_samples_give_zero_coefficients(self):
        I, lat, plan = tight_setup(1, 1.0, 4.0, seed=1)
        op = LatticeOperator(lat, I)
        a, diag = least_squares(op, plan.weights, np.zeros(lat.size))
        assert np.all(a == 0)
        assert diag.iterations == 0

    def test_subsampled_recovery_with_certified_floor(self):
        rng = np.random.default_rng(2)
        I, lat, plan = tight_setup(2, 1.0, 3.0, seed=2)
        rho = density_weights(plan, I, I, 1.5)
        sel = random_subsample(plan, rho, n=8 * len(I), seed=3)
        bounds = mz_constants(sel.as_plan(), I)
        assert bounds.A >= 1e-3  # certified stable instance
        op = LatticeOperator(lat, I).masked(sel.indices)
        a_true = crandn(rng, len(I))
        f = op.forward(a_true)
        cfg = SolverConfig(max_iterations=200, residual_tolerance=1e-14)
        a, _ = least_squares(op, sel.reweights, f, cfg)
        assert np.max(np.abs(a - a_true)) < 1e-8

    def test_reproduction_scales_with_conditioning(self):
        # members of the space are recovered to 1e-8 * (B/A) relative on any
        # certified-stable system (uncapped iterations)
        rng = np.random.default_rng(11)
        I, lat, plan = tight_setup(2, 1.0, 3.0, seed=20)
        rho = density_weights(plan, I, I, 1.5)
        cfg = SolverConfig(max_iterations=3000, residual_tolerance=1e-15)
        for trial in range(6):
            sel = random_subsample(plan, rho, n=3 * len(I), seed=40 + trial)
            bounds = mz_constants(sel.as_plan(), I)
            if bounds.A <= 1e-6:
                continue
            op = LatticeOperator(lat, I).masked(sel.indices)
            a_true = crandn(rng, len(I))
            a, _ = least_squares(op, sel.reweights, op.forward(a_true), cfg)
            limit = 1e-8 * bounds.ratio * np.linalg.norm(a_true)
            assert np.linalg.norm(a - a_true) <= limit

    def test_direct_and_iterative_agree(self):
        rng = np.random.default_rng(3)
        I, lat, plan = tight_setup(2, 1.0, 3.0, seed=4)
        rho = density_weights(plan, I, I, 1.5)
        sel = random_subsample(plan, rho, n=10 * len(I), seed=5)
        bounds = mz_constants(sel.as_plan(), I)
        assert bounds.ratio <= 10
        op = LatticeOperator(lat, I).masked(sel.indices)
        f = crandn(rng, len(sel))  # arbitrary data, not in the range
        direct, _ = least_squares(op, sel.reweights, f,
                                  SolverConfig(mode="direct_normal"))
        iterative, _ = least_squares(
            op, sel.reweights, f,
            SolverConfig(max_iterations=500, residual_tolerance=1e-15))
        assert np.max(np.abs(direct - iterative)) < 1e-7 * np.max(np.abs(direct))

    def test_weighted_residual_optimality(self):
        rng = np.random.default_rng(4)
        I, lat, plan = tight_setup(1, 1.0, 6.0, seed=6)
        rows = rng.integers(0, lat.size, size=3 * len(I))
        w = rng.random(3 * len(I)) + 0.1
        op = LatticeOperator(lat, I).masked(rows)
        f = crandn(rng, len(rows))
        a, diag = least_squares(op, w, f, SolverConfig(mode="direct_normal"))
        base = np.sqrt(np.sum(w * np.abs(op.forward(a) - f) ** 2))
        assert diag.weighted_residual == pytest.approx(base, rel=1e-12)
        for _ in range(100):
            delta = crandn(rng, len(I))
            delta *= 1e-3 / np.linalg.norm(delta)
            perturbed = np.sqrt(
                np.sum(w * np.abs(op.forward(a + delta) - f) ** 2))
            assert perturbed >= base * (1 - 1e-12)

    def test_singular_normal_matrix_downgrades_with_warning(self):
        I = hyperbolic_cross(1, 1.0, 4.0)  # 9 frequencies
        lat = Rank1Lattice(dimension=1, generator=np.array([1]), size=16)
        op = LatticeOperator(lat, I).masked(np.arange(4))  # 4 rows < 9
        f = np.ones(4, dtype=complex)
        with pytest.warns(RuntimeWarning, match="least-norm"):
            a, _ = least_squares(op, np.full(4, 0.25), f,
                                 SolverConfig(mode="direct_normal"))
        # least-norm solution still fits the data
        assert np.max(np.abs(op.forward(a) - f)) < 1e-10

    def test_iteration_cap_flagged_not_raised(self):
        rng = np.random.default_rng(5)
        I, lat, plan = tight_setup(2, 1.0, 3.0, seed=7)
        rho = density_weights(plan, I, I, 1.5)
        sel = random_subsample(plan, rho, n=3 * len(I), seed=8)
        op = LatticeOperator(lat, I).masked(sel.indices)
        f = crandn(rng, len(sel))
        a, diag = least_squares(op, sel.reweights, f,
                                SolverConfig(max_iterations=1,
                                             residual_tolerance=1e-16))
        assert diag.iterations == 1
        assert not diag.converged

    def test_validation(self):
        I, lat, plan = tight_setup(1, 1.0, 2.0, seed=9)
        op = LatticeOperator(lat, I)
        with pytest.raises(ValueError):
            least_squares(op, plan.weights[:-1], np.zeros(lat.size))
        with pytest.raises(ValueError):
            least_squares(op, -plan.weights, np.zeros(lat.size))
        with pytest.raises(ValueError):
            SolverConfig(max_iterations=0)
        with pytest.raises(ValueError):
            SolverConfig(mode="direct")

    def test_diagnostics_json(self):
        I, lat, plan = tight_setup(1, 1.0, 2.0, seed=10)
        op = LatticeOperator(lat, I)
        _, diag = least_squares(op, plan.weights, np.ones(lat.size, dtype=complex),
                                bounds=SpectralBounds(1.0, 1.0))
        data = json.loads(diag.to_json())
        assert data["operator_kind"] == "lattice_fft"
        assert data["condition_estimate"] == 1.0
        assert data["converged"] is True


class TestReconstructWrapper:
    def test_full_lattice_equals_scaled_adjoint(self):
        rng = np.random.default_rng(6)
        I, lat, plan = tight_setup(2, 1.0, 3.0, seed=11)
        op = LatticeOperator(lat, I)
        f = op.forward(crandn(rng, len(I)))
        a_wrap, diag = reconstruct(plan, I, f)
        assert np.allclose(a_wrap, op.adjoint(f) / lat.size, atol=1e-12)
        assert diag.operator_kind == "lattice_fft"
        assert diag.condition_estimate == 1.0  # bounds picked up from the plan

    def test_selection_equals_manual_weights(self):
        rng = np.random.default_rng(7)
        I, lat, plan = tight_setup(2, 1.0, 2.0, seed=12)
        rho = density_weights(plan, I, I, 1.5)
        sel = random_subsample(plan, rho, n=6 * len(I), seed=13)
        f = crandn(rng, len(sel))
        a_wrap, _ = reconstruct(sel, I, f)
        op = LatticeOperator(lat, I).masked(sel.indices)
        a_manual, _ = least_squares(op, sel.reweights, f)
        assert np.array_equal(a_wrap, a_manual)

    def test_invariant_under_weight_rescaling(self):
        rng = np.random.default_rng(8)
        I, lat, plan = tight_setup(1, 1.0, 5.0, seed=14)
        rows = rng.integers(0, lat.size, size=4 * len(I))
        w = rng.random(len(rows)) + 0.05
        op = LatticeOperator(lat, I).masked(rows)
        f = crandn(rng, len(rows))
        cfg = SolverConfig(max_iterations=300, residual_tolerance=1e-14)
        a1, _ = least_squares(op, w, f, cfg)
        a2, _ = least_squares(op, 7.25 * w, f, cfg)
        assert np.max(np.abs(a1 - a2)) < 1e-9 * max(np.max(np.abs(a1)), 1.0)

    def test_dense_source_uses_dense_operator(self):
        rng = np.random.default_rng(9)
        I = hyperbolic_cross(2, 1.0, 2.0)
        pts = rng.random((5 * len(I), 2))
        plan = SamplePlan(points=pts, weights=np.full(len(pts), 1 / len(pts)))
        f = DenseOperator(pts, I).forward(crandn(rng, len(I)))
        a, diag = reconstruct(plan, I, f,
                              SolverConfig(max_iterations=200,
                                           residual_tolerance=1e-14))
        assert diag.operator_kind == "dense"
        assert diag.weighted_residual < 1e-10

    def test_bss_selection_source(self):
        rng = np.random.default_rng(10)
        I, lat, plan = tight_setup(2, 1.0, 2.0, seed=15)
        rho = density_weights(plan, I, I, 1.5)
        sel = random_subsample(plan, rho, n=8 * len(I), seed=16)
        out = plain_bss_subsample(sel, I, b=3.0)
        op = LatticeOperator(lat, I).masked(out.indices)
        a_true = crandn(rng, len(I))
        f = op.forward(a_true)
        a, _ = reconstruct(out, I, f, SolverConfig(max_iterations=300,
                                                   residual_tolerance=1e-14))
        assert np.max(np.abs(a - a_true)) < 1e-8
