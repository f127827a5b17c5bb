"""Collocation pipeline: Z assembly with pivoted LU, quadrature tables, the
four-step matvec, and the Kronecker fast path."""

import time

import numpy as np
import pytest
import scipy.sparse as sp

from klexpand.bspline import BasisSpace, uniform_knot_vector
from klexpand.collocation import (
    apply_collocation,
    build_collocation,
    eval_eigenfunction,
    kernel_stage,
    l2_normalize,
)
from klexpand.geometry import half_cylinder, unit_box, unit_interval, unit_square
from klexpand.kernel import CovarianceKernel
from klexpand.reference import assemble_collocation_dense, standard_form_dense

from helpers import dense


def setup_1d(p=2, elements=4, kind="exponential", b=1.0, **kw):
    trial = BasisSpace((uniform_knot_vector(p, elements),))
    return build_collocation(
        trial, unit_interval(), CovarianceKernel(kind, 1.0, b), **kw
    )


class TestBuild:
    def test_hats_identity_z(self):
        setup = setup_1d(p=1, elements=4)
        np.testing.assert_allclose(dense(setup.z_matrix), np.eye(5), atol=1e-15)

    def test_bernstein_z(self):
        setup = setup_1d(p=2, elements=1)
        np.testing.assert_allclose(
            dense(setup.z_matrix),
            [[1, 0, 0], [0.25, 0.5, 0.25], [0, 0, 1]],
            atol=1e-15,
        )

    def test_quadrature_measures_volume(self):
        g = half_cylinder(1.0, 2.0, 10.0)
        kvs = tuple(
            uniform_knot_vector(2, e, interior_multiplicity=1) for e in (4, 8, 4)
        )
        setup = build_collocation(BasisSpace(kvs), g, CovarianceKernel("gaussian"))
        vol = np.pi * 1.5 * 10.0
        assert abs((setup.quad_weights * setup.jac_at_quad).sum() - vol) < 1e-8 * vol

    def test_default_quadrature_count(self):
        setup = setup_1d(p=3, elements=5)
        assert setup.n_quad == 5 * 4

    def test_r_table_column_sparsity(self):
        trial = BasisSpace((uniform_knot_vector(2, 3), uniform_knot_vector(2, 4)))
        setup = build_collocation(
            trial, unit_square(), CovarianceKernel("gaussian"), nq_per_dir=3
        )
        per_qp = np.diff(setup.basis_at_quad.indptr)
        assert per_qp.max() <= 9  # (p+1)^d

    def test_lu_roundtrip(self):
        setup = setup_1d(p=3, elements=6)
        rng = np.random.default_rng(0)
        v = rng.standard_normal(setup.n)
        z = dense(setup.z_matrix)
        assert np.abs(setup.solve_z(z @ v) - v).max() < 1e-10

    def test_pivoted_lu_reconstructs_z(self):
        setup = setup_1d(p=4, elements=5)
        slu = setup._z_solver
        n = setup.n
        pr = sp.csc_matrix((np.ones(n), (slu.perm_r, np.arange(n))))
        pc = sp.csc_matrix((np.ones(n), (np.arange(n), slu.perm_c)))
        recon = (pr.T @ (slu.L @ slu.U) @ pc.T).toarray()
        z = dense(setup.z_matrix)
        assert np.abs(recon - z).max() <= 1e-11 * np.abs(z).max()


class TestApply:
    def test_zero(self):
        setup = setup_1d()
        np.testing.assert_array_equal(
            apply_collocation(setup, np.zeros(setup.n)), np.zeros(setup.n)
        )

    def test_constant_kernel_rank_one(self):
        setup = setup_1d(kind="constant", p=2, elements=5)
        n = setup.n
        mat = np.column_stack(
            [apply_collocation(setup, np.eye(n)[:, j]) for j in range(n)]
        )
        vals = np.sort(np.abs(np.linalg.eigvals(mat)))
        assert abs(vals[-1] - 1.0) < 1e-12
        assert vals[:-1].max() < 1e-12

    @pytest.mark.parametrize(
        "p,elements,kind", [(1, 6, "exponential"), (2, 5, "gaussian"), (3, 4, "exponential")]
    )
    def test_matches_dense_assembly_1d(self, p, elements, kind):
        setup = setup_1d(p=p, elements=elements, kind=kind)
        system = assemble_collocation_dense(
            setup.trial_space, setup.geometry, setup.kernel
        )
        aprime = standard_form_dense(system)
        n = setup.n
        cols = np.column_stack(
            [apply_collocation(setup, np.eye(n)[:, j]) for j in range(n)]
        )
        assert np.abs(cols - aprime).max() <= 1e-10 * np.abs(aprime).max()

    def test_2d_rational_matches_dense(self):
        g = half_cylinder(1.0, 2.0, 4.0)
        # single-patch quadratic NURBS trial equal to the geometry space
        trial = BasisSpace(
            g.space.knotvectors, weights=g.space.weights
        )
        setup = build_collocation(trial, g, CovarianceKernel("exponential", 1.0, 5.0))
        system = assemble_collocation_dense(trial, g, setup.kernel)
        aprime = standard_form_dense(system)
        n = setup.n
        cols = np.column_stack(
            [apply_collocation(setup, np.eye(n)[:, j]) for j in range(n)]
        )
        assert np.abs(cols - aprime).max() <= 1e-10 * np.abs(aprime).max()

    def test_constant_reproduction_at_quadrature(self):
        # step 1 applied to the coefficients of 1 gives ones (partition of unity)
        g = half_cylinder(1.0, 2.0, 4.0)
        trial = BasisSpace(g.space.knotvectors, weights=g.space.weights)
        setup = build_collocation(trial, g, CovarianceKernel("gaussian"))
        ones_at_quad = setup.basis_at_quad @ np.ones(setup.n)
        np.testing.assert_allclose(ones_at_quad, 1.0, atol=1e-13)

    def test_shape_error(self):
        setup = setup_1d()
        with pytest.raises(ValueError):
            apply_collocation(setup, np.ones(setup.n + 2))


class TestBsplineZFastPath:
    def test_matches_sparse_route_on_box(self):
        trial = BasisSpace((uniform_knot_vector(2, 4), uniform_knot_vector(2, 3)))
        g = unit_box([2.0, 1.0])
        kern = CovarianceKernel("exponential", 1.0, 0.8)
        plain = build_collocation(trial, g, kern, bspline_z=False)
        fast = build_collocation(trial, g, kern, bspline_z=True)
        rng = np.random.default_rng(5)
        v = rng.standard_normal(plain.n)
        a = apply_collocation(plain, v)
        b = apply_collocation(fast, v)
        assert np.abs(a - b).max() <= 1e-11 * np.abs(a).max()

    def test_rejects_rational_trial(self):
        g = half_cylinder()
        trial = BasisSpace(g.space.knotvectors, weights=g.space.weights)
        with pytest.raises(ValueError):
            build_collocation(trial, g, CovarianceKernel("gaussian"), bspline_z=True)


class TestQuadratureCostScaling:
    def test_kernel_stage_scales_with_quadrature_count(self):
        # doubling nq per direction multiplies the step-1+3 cost by about 2^d
        trial = BasisSpace((uniform_knot_vector(3, 24), uniform_knot_vector(3, 24)))
        g = unit_square()
        kern = CovarianceKernel("gaussian", 1.0, 0.4)

        def best_time(nq):
            setup = build_collocation(trial, g, kern, nq_per_dir=nq)
            v = np.random.default_rng(0).standard_normal(setup.n)
            kernel_stage(setup, v)
            kernel_stage(setup, v)
            times = []
            for _ in range(15):
                t0 = time.perf_counter()
                kernel_stage(setup, v)
                times.append(time.perf_counter() - t0)
            return float(np.min(times))

        t1 = best_time(2)
        t2 = best_time(4)
        ratio = t2 / t1
        assert 0.7 * 4.0 <= ratio <= 1.3 * 4.0


class TestEigenfunctionUtilities:
    def test_l2_normalize(self):
        setup = setup_1d(p=2, elements=6)
        rng = np.random.default_rng(1)
        coeffs = l2_normalize(setup, rng.standard_normal(setup.n))
        at_quad = setup.basis_at_quad @ coeffs
        norm2 = (setup.quad_weights * setup.jac_at_quad) @ (at_quad * at_quad)
        assert abs(norm2 - 1.0) < 1e-12

    def test_eval_constant_function(self):
        g = half_cylinder(1.0, 2.0, 4.0)
        trial = BasisSpace(g.space.knotvectors, weights=g.space.weights)
        setup = build_collocation(trial, g, CovarianceKernel("gaussian"))
        ones = np.ones(setup.n)
        for xhat in ([0.2, 0.3, 0.7], [0.5, 0.5, 0.5]):
            assert eval_eigenfunction(setup, ones, xhat) == pytest.approx(1.0, abs=1e-13)
