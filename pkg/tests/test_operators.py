import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyprec import (
    DenseOperator,
    GramOperator,
    MatvecOperator,
    PolynomialCoefficients,
    apply_polynomial,
    b_norm_sq,
    elementary_symmetric,
    exact_traces,
    jacobi_eigh,
    spectral_decomposition,
    stochastic_trace,
)
from conftest import random_spd


class TestMatvec:
    def test_diagonal_action(self):
        op = DenseOperator(np.diag([3.0, 2.0, 1.0]))
        assert np.allclose(op.matvec(np.ones(3)), [3.0, 2.0, 1.0])

    def test_zero_vector(self, rng):
        op = random_spd(rng, 5)
        assert np.allclose(op.matvec(np.zeros(5)), 0.0)

    def test_direct_2x2(self):
        op = DenseOperator(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(op.matvec(np.array([1.0, -1.0])), [1.0, -1.0])

    def test_counter_increments(self, rng):
        op = random_spd(rng, 4)
        op.matvec(np.ones(4))
        op.matvec(np.ones(4))
        assert op.matvecs == 2

    def test_dimension_mismatch(self, rng):
        op = random_spd(rng, 4)
        with pytest.raises(ValueError, match="dimension"):
            op.matvec(np.ones(5))

    def test_symmetry_all_kinds(self, rng):
        dense = random_spd(rng, 6)
        gram = GramOperator(rng.standard_normal((9, 6)))
        wrapped = MatvecOperator(6, lambda v: dense.to_dense() @ v)
        for op in (dense, gram, wrapped):
            for _ in range(5):
                u = rng.standard_normal(6)
                v = rng.standard_normal(6)
                lhs = float(op.matvec(u) @ v)
                rhs = float(u @ op.matvec(v))
                assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(u) * np.linalg.norm(v)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            DenseOperator(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestApplyPolynomial:
    def test_constant_is_identity(self, rng):
        op = random_spd(rng, 4)
        v = rng.standard_normal(4)
        p = PolynomialCoefficients([1.0])
        assert np.allclose(apply_polynomial(p, op, v), v)
        assert op.matvecs == 0

    def test_trace_shifted(self):
        op = DenseOperator(np.diag([3.0, 2.0, 1.0]))
        p = PolynomialCoefficients([6.0, -1.0])
        assert np.allclose(apply_polynomial(p, op, np.ones(3)), [3.0, 4.0, 5.0])

    def test_degree_two(self):
        op = DenseOperator(np.diag([3.0, 2.0, 1.0]))
        p = PolynomialCoefficients([11.0, -6.0, 1.0])
        assert np.allclose(apply_polynomial(p, op, np.ones(3)), [2.0, 3.0, 6.0])

    def test_matvec_budget_is_degree(self, rng):
        op = random_spd(rng, 5)
        p = PolynomialCoefficients(rng.standard_normal(5))
        apply_polynomial(p, op, rng.standard_normal(5))
        assert op.matvecs == 4

    def test_matches_power_accumulation(self, rng):
        # Oracle: explicit sum of matrix powers.
        for _ in range(10):
            n = int(rng.integers(2, 9))
            op = random_spd(rng, n)
            degree = int(rng.integers(0, 7))
            coeffs = rng.standard_normal(degree + 1)
            v = rng.standard_normal(n)
            expected = np.zeros(n)
            power = np.eye(n)
            for c in coeffs:
                expected += c * (power @ v)
                power = power @ op.to_dense()
            got = apply_polynomial(PolynomialCoefficients(coeffs), op, v)
            assert np.allclose(got, expected, rtol=1e-10, atol=1e-12)


class TestTraces:
    def test_diag_321(self):
        op = DenseOperator(np.diag([3.0, 2.0, 1.0]))
        assert np.allclose(exact_traces(op, 2), [6.0, 14.0])

    def test_identity_powers(self):
        op = DenseOperator(np.eye(4))
        assert np.allclose(exact_traces(op, 3), [4.0, 4.0, 4.0])

    def test_diag_12(self):
        op = DenseOperator(np.diag([1.0, 2.0]))
        assert np.allclose(exact_traces(op, 1), [3.0])

    def test_matrix_free_rejected(self):
        op = MatvecOperator(3, lambda v: v)
        with pytest.raises(ValueError, match="dense"):
            exact_traces(op, 2)


class TestStochasticTrace:
    def test_scaled_identity_exact(self):
        op = DenseOperator(2.5 * np.eye(6))
        assert stochastic_trace(op, 1, samples=3, seed=0) == pytest.approx(15.0)

    def test_montecarlo_close(self):
        op = DenseOperator(np.diag([3.0, 2.0, 1.0]))
        est = stochastic_trace(op, 1, samples=100_000, seed=7)
        assert abs(est - 6.0) <= 0.02 * 6.0

    def test_deterministic(self, rng):
        op = random_spd(rng, 5)
        a = stochastic_trace(op, 2, samples=1, seed=3)
        b = stochastic_trace(op, 2, samples=1, seed=3)
        assert a == b

    def test_unbiased_within_three_se(self):
        op = DenseOperator(np.diag([5.0, 2.0, 1.0, 0.5]))
        rng = np.random.default_rng(11)
        n = op.dim
        draws = rng.standard_normal((100_000, n))
        draws /= np.linalg.norm(draws, axis=1, keepdims=True)
        per_sample = n * np.einsum("ij,ij->i", draws @ op.to_dense(), draws)
        se = per_sample.std(ddof=1) / np.sqrt(per_sample.size)
        est = stochastic_trace(op, 1, samples=100_000, seed=11)
        assert abs(est - 8.5) <= 3.0 * se


class TestElementarySymmetric:
    def test_known_321(self):
        sums = elementary_symmetric([3.0, 2.0, 1.0], 3)
        assert np.allclose(sums.unscaled(), [1.0, 6.0, 11.0, 6.0])

    def test_known_21(self):
        sums = elementary_symmetric([2.0, 1.0], 2)
        assert np.allclose(sums.unscaled(), [1.0, 3.0, 2.0])

    def test_order_zero(self, rng):
        values = rng.uniform(0.5, 3.0, 6)
        assert elementary_symmetric(values, 0).sigma[0] == 1.0

    def test_k_max_too_large(self):
        with pytest.raises(ValueError, match="exceeds"):
            elementary_symmetric([1.0, 2.0], 3)

    @given(
        st.lists(st.floats(min_value=0.1, max_value=50.0), min_size=1, max_size=7)
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_enumeration(self, values):
        k_max = len(values)
        sums = elementary_symmetric(values, k_max).unscaled()
        for k in range(k_max + 1):
            expected = sum(
                float(np.prod(c)) for c in itertools.combinations(values, k)
            )
            assert sums[k] == pytest.approx(expected, rel=1e-10)

    def test_newton_girard_crosscheck(self, rng):
        # sigma rebuilt from power sums must match the direct recurrence.
        for _ in range(20):
            m = int(rng.integers(1, 9))
            values = rng.uniform(0.2, 6.0, m)
            direct = elementary_symmetric(values, m).unscaled()
            power_sums = [float(np.sum(values**i)) for i in range(1, m + 1)]
            rebuilt = [1.0]
            for k in range(1, m + 1):
                total = 0.0
                for i in range(1, k + 1):
                    total += (-1) ** (i - 1) * rebuilt[k - i] * power_sums[i - 1]
                rebuilt.append(total / k)
            assert np.allclose(direct, rebuilt, rtol=1e-9)


class TestSpectralDecomposition:
    def test_diagonal_input(self):
        op = DenseOperator(np.diag([1.0, 2.0, 3.0]))
        dec = spectral_decomposition(op)
        assert np.allclose(dec.eigenvalues, [3.0, 2.0, 1.0])
        assert np.allclose(np.abs(dec.eigenvectors), np.eye(3)[:, ::-1])

    def test_2x2_exact(self):
        op = DenseOperator(np.array([[2.0, 1.0], [1.0, 2.0]]))
        dec = spectral_decomposition(op)
        assert np.allclose(dec.eigenvalues, [3.0, 1.0])

    def test_identity(self):
        op = DenseOperator(np.eye(5))
        assert np.allclose(spectral_decomposition(op).eigenvalues, 1.0)

    def test_invariants_vs_numpy(self, rng):
        # Independent oracle for the Jacobi path.
        for _ in range(10):
            n = int(rng.integers(2, 30))
            op = random_spd(rng, n, lam_low=0.1, lam_high=100.0)
            dec = spectral_decomposition(op)
            q = dec.eigenvectors
            assert np.allclose(q.T @ q, np.eye(n), atol=1e-9)
            recon = q @ np.diag(dec.eigenvalues) @ q.T
            assert np.allclose(recon, op.to_dense(), rtol=1e-8, atol=1e-8)
            assert np.allclose(
                dec.eigenvalues,
                np.sort(np.linalg.eigvalsh(op.to_dense()))[::-1],
                rtol=1e-9,
                atol=1e-10,
            )

    def test_jacobi_rejects_nonsymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            jacobi_eigh(np.array([[1.0, 2.0], [0.5, 1.0]]))


class TestBNormSq:
    def test_identity(self):
        op = DenseOperator(np.eye(2))
        assert b_norm_sq(op, np.array([3.0, 4.0])) == pytest.approx(25.0)

    def test_diag(self):
        op = DenseOperator(np.diag([3.0, 2.0, 1.0]))
        assert b_norm_sq(op, np.ones(3)) == pytest.approx(6.0)

    def test_zero(self, rng):
        op = random_spd(rng, 4)
        assert b_norm_sq(op, np.zeros(4)) == 0.0

    def test_rejects_indefinite(self):
        op = MatvecOperator(2, lambda v: -v)
        with pytest.raises(ValueError, match="positive"):
            b_norm_sq(op, np.array([1.0, 0.0]))
