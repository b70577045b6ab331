"""Matrix-free symmetric operators, spectral utilities, and symmetric polynomials."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "SymmetricOperator",
    "DenseOperator",
    "MatvecOperator",
    "GramOperator",
    "SpectralDecomposition",
    "PolynomialCoefficients",
    "ElementarySymmetricSums",
    "jacobi_eigh",
    "spectral_decomposition",
    "apply_polynomial",
    "exact_traces",
    "stochastic_trace",
    "stochastic_traces",
    "elementary_symmetric",
    "b_norm_sq",
]


class SymmetricOperator:
    """A symmetric positive definite operator exposed through matrix-vector products.

    The ``matvecs`` attribute counts products applied through :meth:`matvec`
    and is the cost unit reported by all solvers. Operators are otherwise
    immutable; runs that need isolated counts should use separate instances
    (the benchmark harness builds one problem per run).
    """

    def __init__(self, dim: int):
        if dim <= 0:
            raise ValueError(f"operator dimension must be positive, got {dim}")
        self.dim = int(dim)
        self.matvecs = 0

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(
                f"vector shape {v.shape} does not match operator dimension {self.dim}"
            )
        self.matvecs += 1
        return self._apply(v)

    def _apply(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_dense(self) -> bool:
        """Whether a dense matrix (and hence an eigendecomposition) is available."""
        return False

    def to_dense(self) -> np.ndarray:
        raise ValueError("operator is matrix-free; no dense representation available")


class DenseOperator(SymmetricOperator):
    """Operator backed by an explicit symmetric matrix."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
        asym = np.max(np.abs(matrix - matrix.T))
        scale = max(np.max(np.abs(matrix)), 1.0)
        if asym > 1e-10 * scale:
            raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
        super().__init__(matrix.shape[0])
        self.matrix = 0.5 * (matrix + matrix.T)
        self._spectral: SpectralDecomposition | None = None

    def _apply(self, v):
        return self.matrix @ v

    @property
    def is_dense(self):
        return True

    def to_dense(self):
        return self.matrix


class MatvecOperator(SymmetricOperator):
    """Operator defined by a user-supplied matvec callable."""

    def __init__(self, dim: int, fn: Callable[[np.ndarray], np.ndarray]):
        super().__init__(dim)
        self._fn = fn

    def _apply(self, v):
        return np.asarray(self._fn(v), dtype=float)


class GramOperator(SymmetricOperator):
    """The Gram matrix of a data matrix, applied as two products with the data.

    One application counts as a single matvec: the Gram matrix is the
    curvature operator and its products are the unit of cost.
    """

    def __init__(self, design: np.ndarray):
        design = np.asarray(design, dtype=float)
        if design.ndim != 2:
            raise ValueError("design matrix must be two-dimensional")
        super().__init__(design.shape[1])
        self.design = design
        self._dense: np.ndarray | None = None

    def _apply(self, v):
        return self.design.T @ (self.design @ v)

    @property
    def is_dense(self):
        return True

    def to_dense(self):
        if self._dense is None:
            self._dense = self.design.T @ self.design
        return self._dense


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues sorted descending and the matching orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]

    @property
    def lam_max(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lam_min(self) -> float:
        return float(self.eigenvalues[-1])


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted descending.
    Convergence is declared when the off-diagonal Frobenius mass drops below
    ``tol`` relative to the total Frobenius norm. Intended for moderate sizes
    (up to a few hundred); raises if the sweep cap is hit, which in practice
    signals a non-symmetric input.
    """
    a = np.asarray(matrix, dtype=float).copy()
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if np.max(np.abs(a - a.T)) > 1e-10 * max(np.max(np.abs(a)), 1.0):
        raise ValueError("matrix must be symmetric")
    q = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), q

    total = np.linalg.norm(a)
    if total == 0.0:
        return np.zeros(n), q

    for _ in range(max_sweeps):
        # Off-diagonal mass measured directly; the norm-difference form
        # cancels catastrophically once nearly converged.
        off = np.linalg.norm(a - np.diag(a.diagonal()))
        if off <= tol * total:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if abs(apr) <= 1e-300:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                row_p, row_r = a[p, :].copy(), a[r, :].copy()
                a[p, :] = c * row_p - s * row_r
                a[r, :] = s * row_p + c * row_r
                col_p, col_r = a[:, p].copy(), a[:, r].copy()
                a[:, p] = c * col_p - s * col_r
                a[:, r] = s * col_p + c * col_r
                a[p, r] = 0.0
                a[r, p] = 0.0
                qp, qr = q[:, p].copy(), q[:, r].copy()
                q[:, p] = c * qp - s * qr
                q[:, r] = s * qp + c * qr
    else:
        raise RuntimeError(
            f"Jacobi eigensolver did not converge in {max_sweeps} sweeps"
        )

    vals = a.diagonal().copy()
    order = np.argsort(vals)[::-1]
    return vals[order], q[:, order]


def spectral_decomposition(op: SymmetricOperator) -> SpectralDecomposition:
    """Full eigendecomposition of a dense-capable operator, cached per operator."""
    cached = getattr(op, "_spectral", None)
    if cached is not None:
        return cached
    if not op.is_dense:
        raise ValueError("spectral decomposition requires a dense-capable operator")
    vals, vecs = jacobi_eigh(op.to_dense())
    dec = SpectralDecomposition(eigenvalues=vals, eigenvectors=vecs)
    try:
        op._spectral = dec
    except AttributeError:
        pass
    return dec


@dataclass(frozen=True)
class PolynomialCoefficients:
    """Coefficients of a polynomial in the operator, lowest degree first.

    ``scale`` is the factor divided out when the coefficients were normalized;
    ``coeffs * scale`` recovers the unnormalized polynomial.
    """

    coeffs: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs, dtype=float)))
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ValueError("coefficients must be a nonempty 1-d sequence")
        if not (self.scale > 0):
            raise ValueError("scale must be positive")

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def unnormalized(self) -> np.ndarray:
        return self.coeffs * self.scale

    def __call__(self, s):
        """Evaluate the (normalized) polynomial at scalar or array argument."""
        return np.polynomial.polynomial.polyval(s, self.coeffs)


def apply_polynomial(
    p: PolynomialCoefficients, op: SymmetricOperator, v: np.ndarray
) -> np.ndarray:
    """Apply a polynomial in the operator to a vector by the Horner scheme.

    Uses exactly ``p.degree`` matvecs.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (op.dim,):
        raise ValueError(
            f"vector shape {v.shape} does not match operator dimension {op.dim}"
        )
    c = p.coeffs
    result = c[-1] * v
    for i in range(c.size - 2, -1, -1):
        result = op.matvec(result) + c[i] * v
    return result


def exact_traces(op: SymmetricOperator, k_max: int) -> np.ndarray:
    """Traces of the first ``k_max`` operator powers via the dense eigendecomposition."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if not op.is_dense:
        raise ValueError("exact traces require a dense-capable operator")
    lam = spectral_decomposition(op).eigenvalues
    return np.array([float(np.sum(lam**k)) for k in range(1, k_max + 1)])


def stochastic_traces(
    op: SymmetricOperator, k_max: int, samples: int, seed: int
) -> np.ndarray:
    """Monte-Carlo estimates of the traces of the first ``k_max`` operator powers.

    Averages ``n * <B^k u, u>`` over unit-sphere directions u drawn as
    normalized Gaussians, sharing the draws across powers so each sample
    costs ``k_max`` matvecs. Deterministic for a fixed seed; unbiased.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if k_max < 1:
        raise ValueError("power must be at least 1")
    rng = np.random.default_rng(seed)
    n = op.dim
    draws = rng.standard_normal((samples, n))
    draws /= np.linalg.norm(draws, axis=1, keepdims=True)
    estimates = np.empty((samples, k_max))
    for i in range(samples):
        u = draws[i]
        w = u
        for k in range(k_max):
            w = op.matvec(w)
            estimates[i, k] = n * float(w @ u)
    return np.mean(estimates, axis=0)


def stochastic_trace(op: SymmetricOperator, k: int, samples: int, seed: int) -> float:
    """Monte-Carlo estimate of the trace of the k-th operator power."""
    return float(stochastic_traces(op, k, samples, seed)[-1])


@dataclass(frozen=True)
class ElementarySymmetricSums:
    """Elementary symmetric polynomial values of pre-scaled inputs.

    ``sigma[k]`` is the k-th elementary symmetric polynomial of the inputs
    divided by ``scale``; ratios at equal k are therefore scale-free, and
    ``unscaled()`` restores the raw values when they fit in double precision.
    """

    sigma: np.ndarray
    scale: float

    def unscaled(self) -> np.ndarray:
        return self.sigma * self.scale ** np.arange(self.sigma.size)


def elementary_symmetric(values, k_max: int) -> ElementarySymmetricSums:
    """All elementary symmetric polynomials up to order ``k_max``.

    Standard prefix recurrence; inputs are divided by their maximum first
    because the raw values grow combinatorially.
    """
    values = np.asarray(values, dtype=float)
    m = values.size
    if k_max > m:
        raise ValueError(f"k_max={k_max} exceeds the number of values {m}")
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    if m and np.min(values) <= 0:
        raise ValueError("values must be positive")
    scale = float(np.max(values)) if m else 1.0
    scaled = values / scale
    sigma = np.zeros(k_max + 1)
    sigma[0] = 1.0
    for i in range(m):
        v = scaled[i]
        top = min(k_max, i + 1)
        for k in range(top, 0, -1):
            sigma[k] += v * sigma[k - 1]
    return ElementarySymmetricSums(sigma=sigma, scale=scale)


def b_norm_sq(op: SymmetricOperator, v: np.ndarray) -> float:
    """Squared norm of a vector in the metric of the operator (one matvec)."""
    v = np.asarray(v, dtype=float)
    value = float(op.matvec(v) @ v)
    if value < -1e-12 * float(v @ v):
        raise ValueError(f"operator is not positive semidefinite: <Bv, v> = {value:.3e}")
    return value
