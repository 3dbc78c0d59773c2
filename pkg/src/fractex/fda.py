"""B-spline functional representation of descriptor curves.

A descriptor curve is projected onto a clamped B-spline basis by least
squares; the projection coefficients (alpha) can replace the raw
descriptors as features. A second variant multiplies alpha by the
Cholesky factor S of the basis Gram matrix Phi(k,l) = integral of
phi_k * phi_l, folding the basis geometry into the feature space
(beta = S alpha by default; beta = S^T alpha is available as an opt-in
convention, which is the one that makes ||beta|| the fitted function's
L2 norm).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

from .descriptors import DescriptorCurve
from .errors import ConditioningError, UnderdeterminedError

_PIVOT_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class BasisSpec:
    """A clamped B-spline basis: `count` functions of order `order` on `domain`.

    The knot vector has length count + order, with each end knot repeated
    `order` times and the interior knots strictly increasing. Order p means
    polynomial degree p - 1.
    """

    order: int
    count: int
    domain: tuple[float, float]
    knots: np.ndarray

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if self.count < self.order:
            raise ValueError(f"count must be >= order, got count={self.count} order={self.order}")
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError(f"degenerate domain {self.domain}")
        kn = np.asarray(self.knots, dtype=np.float64).copy()
        p, q = self.order, self.count
        if kn.shape != (q + p,):
            raise ValueError(f"knot vector must have length count + order = {q + p}, got {kn.shape}")
        if np.any(np.diff(kn) < 0):
            raise ValueError("knots must be nondecreasing")
        if np.any(kn[:p] != lo) or np.any(kn[-p:] != hi):
            raise ValueError(f"end knots must repeat the domain bounds {self.order} times")
        interior = kn[p:-p]
        if interior.size and (np.any(np.diff(interior) <= 0)
                              or interior[0] <= lo or interior[-1] >= hi):
            raise ValueError("interior knots must be strictly increasing inside the domain")
        object.__setattr__(self, "knots", _readonly(kn))

    @property
    def degree(self) -> int:
        return self.order - 1


def make_basis(order: int, count: int, domain: tuple[float, float]) -> BasisSpec:
    """Clamped basis with uniformly spaced interior knots."""
    lo, hi = float(domain[0]), float(domain[1])
    if not lo < hi:
        raise ValueError(f"degenerate domain {domain}")
    interior = np.linspace(lo, hi, count - order + 2)[1:-1]
    knots = np.concatenate([np.full(order, lo), interior, np.full(order, hi)])
    return BasisSpec(order=order, count=count, domain=(lo, hi), knots=knots)


def make_basis_for_samples(order: int, count: int, ts) -> BasisSpec:
    """Clamped basis with interior knots at sample quantiles.

    On irregular grids (the log-radius grid is much sparser at small t than
    at large t) uniform knots leave whole basis supports without samples,
    which makes the least-squares fit rank-deficient for moderate counts.
    Quantile placement keeps roughly equally many samples per span.
    """
    ts = np.sort(np.asarray(ts, dtype=np.float64))
    if ts.size < 2:
        raise ValueError("need at least 2 samples to place knots")
    lo, hi = float(ts[0]), float(ts[-1])
    if not lo < hi:
        raise ValueError("samples span a degenerate domain")
    n_interior = count - order
    fractions = np.arange(1, n_interior + 1) / (n_interior + 1)
    interior = np.quantile(ts, fractions)
    if interior.size and (np.any(np.diff(interior) <= 0)
                          or interior[0] <= lo or interior[-1] >= hi):
        raise ConditioningError(
            f"cannot place {n_interior} distinct interior knots from {ts.size} samples; "
            "reduce count or deduplicate samples")
    knots = np.concatenate([np.full(order, lo), interior, np.full(order, hi)])
    return BasisSpec(order=order, count=count, domain=(lo, hi), knots=knots)


def basis_matrix(basis: BasisSpec, ts) -> np.ndarray:
    """Collocation matrix: value of every basis function at every t.

    Cox-de Boor recursion, vectorized over evaluation points. Functions
    are left-continuous at the right domain end (the last basis equals 1
    there), and at most `order` entries per row are nonzero.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    lo, hi = basis.domain
    if np.any(ts < lo) or np.any(ts > hi):
        bad = ts[(ts < lo) | (ts > hi)][0]
        raise ValueError(f"evaluation point {bad} outside domain [{lo}, {hi}]")
    kn = basis.knots
    # degree-0 indicators on half-open spans, closed at the right domain end
    vals = ((kn[None, :-1] <= ts[:, None]) & (ts[:, None] < kn[None, 1:])).astype(np.float64)
    at_end = ts == hi
    if at_end.any():
        closing = (kn[1:] == hi) & (kn[:-1] < kn[1:])
        vals[np.ix_(at_end, closing)] = 1.0
    for k in range(1, basis.order):
        left_den = kn[k:-1] - kn[:-k - 1]
        right_den = kn[k + 1:] - kn[1:-k]
        left = np.zeros_like(vals[:, :-1])
        np.divide(ts[:, None] - kn[None, :-k - 1], left_den[None, :],
                  out=left, where=left_den[None, :] > 0)
        right = np.zeros_like(vals[:, :-1])
        np.divide(kn[None, k + 1:] - ts[:, None], right_den[None, :],
                  out=right, where=right_den[None, :] > 0)
        vals = left * vals[:, :-1] + right * vals[:, 1:]
    return vals


def evaluate_basis(basis: BasisSpec, t: float) -> np.ndarray:
    """Values of all basis functions at a single point."""
    return basis_matrix(basis, [t])[0]


@dataclass(frozen=True)
class FunctionalCoefficients:
    basis: BasisSpec
    alpha: np.ndarray
    fit_residual: float
    beta: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", _readonly(np.asarray(self.alpha, dtype=np.float64).copy()))
        if self.beta is not None:
            object.__setattr__(self, "beta", _readonly(np.asarray(self.beta, dtype=np.float64).copy()))


@dataclass(frozen=True)
class GramFactor:
    """Gram matrix of the basis and its lower-triangular Cholesky factor."""

    basis: BasisSpec
    phi: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi", _readonly(np.asarray(self.phi)))
        object.__setattr__(self, "s", _readonly(np.asarray(self.s)))


def _empty_span(basis: BasisSpec, ts: np.ndarray) -> tuple[float, float] | None:
    kn = basis.knots
    for a, b in zip(kn[:-1], kn[1:]):
        if a < b and not np.any((ts >= a) & (ts < b)) and not (b == basis.domain[1] and np.any(ts == b)):
            return float(a), float(b)
    return None


def fit_alpha(basis: BasisSpec, desc: DescriptorCurve) -> FunctionalCoefficients:
    """Least-squares projection of (t, u) onto the basis.

    Solves the normal equations by Cholesky; if the collocation Gram is
    ill-conditioned (relative pivot below 1e-12) the solve falls back to an
    orthogonal decomposition of the collocation matrix. A rank-deficient
    system raises ConditioningError naming an empty knot span when one
    exists.
    """
    t, u = desc.t, desc.u
    m, q = t.size, basis.count
    if m < q:
        raise UnderdeterminedError(f"{m} samples cannot determine {q} coefficients")
    b_mat = basis_matrix(basis, t)
    gram = b_mat.T @ b_mat
    rhs = b_mat.T @ u
    alpha = None
    try:
        chol = np.linalg.cholesky(gram)
        diag = np.diag(chol)
        if (diag.min() / diag.max()) ** 2 >= _PIVOT_TOL:
            alpha = solve_triangular(chol.T, solve_triangular(chol, rhs, lower=True), lower=False)
    except np.linalg.LinAlgError:
        pass
    if alpha is None:
        alpha, _, rank, _ = np.linalg.lstsq(b_mat, u, rcond=None)
        if rank < q:
            span = _empty_span(basis, t)
            detail = (f"; knot span [{span[0]:.6g}, {span[1]:.6g}) contains no sample"
                      if span else "")
            raise ConditioningError(
                f"collocation matrix is rank-deficient (rank {rank} < {q}){detail}")
    resid = b_mat @ alpha - u
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return FunctionalCoefficients(basis=basis, alpha=alpha, fit_residual=rms)


def cholesky_lower(mat: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = mat; ConditioningError if not SPD."""
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise ConditioningError("matrix is not positive definite") from None


def gram_factor(basis: BasisSpec) -> GramFactor:
    """Gram matrix Phi(k,l) = integral of phi_k phi_l over the domain, factored.

    Integration is Gauss-Legendre per knot span with `order` nodes, exact
    for the degree-2(order-1) integrand. Basis supports keep Phi banded:
    entries with |k - l| >= order are exactly zero.
    """
    nodes, weights = np.polynomial.legendre.leggauss(basis.order)
    kn = basis.knots
    q = basis.count
    phi = np.zeros((q, q))
    for a, b in zip(kn[:-1], kn[1:]):
        if a == b:
            continue
        x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        w = 0.5 * (b - a) * weights
        vals = basis_matrix(basis, x)
        phi += vals.T @ (w[:, None] * vals)
    try:
        s = cholesky_lower(phi)
    except ConditioningError:
        raise ConditioningError(
            "Gram matrix failed Cholesky factorization; check for duplicate interior "
            "knots or a degenerate domain") from None
    return GramFactor(basis=basis, phi=phi, s=s)


def transform_beta(coef: FunctionalCoefficients, gf: GramFactor,
                   convention: str = "s") -> FunctionalCoefficients:
    """Attach beta = S alpha (convention 's') or S^T alpha ('st') to the fit."""
    if gf.basis.count != coef.basis.count or gf.basis.order != coef.basis.order \
            or not np.array_equal(gf.basis.knots, coef.basis.knots):
        raise ValueError("Gram factor was built from a different basis")
    if convention == "s":
        beta = gf.s @ coef.alpha
    elif convention == "st":
        beta = gf.s.T @ coef.alpha
    else:
        raise ValueError(f"unknown beta convention {convention!r} (use 's' or 'st')")
    return replace(coef, beta=beta)
