"""Riemannian conjugate gradient on the complex Stiefel manifold.

Maximizes ``f(theta) = 2 Re{theta^T chi} - theta^T V theta^*`` where
``theta = vec(X^T)`` and ``X`` is a ``(p Mbar) x Mbar`` matrix with
orthonormal columns.  For ``p = 1`` ``X`` is the unitary tile pattern
itself; for ``p = L`` it stacks the sector blocks ``[Theta_1; ...; Theta_L]``
so that ``X^H X = sum_l Theta_l^H Theta_l``.

The metric is ``<A, B> = Re tr(A^H B)``; with it the Euclidean gradient is
twice the conjugate Wirtinger derivative.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import gram_deviation, unvec, vec


class RetractionError(ArithmeticError):
    """``X + Z`` lost rank; retry with a shorter step."""


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 200
    gtol: float = 1e-6
    c1: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    restart: int = None
    ftol: float = 1e-8
    patience: int = 5
    max_backtracks: int = 60

    def __post_init__(self):
        if self.gtol <= 0 or self.ftol <= 0 or not 0 < self.backtrack < 1:
            raise ValueError("tolerances must be positive and 0 < backtrack < 1")


class StiefelResult(NamedTuple):
    X: np.ndarray
    trace: list
    converged: bool
    iterations: int
    max_gram_deviation: float


def _theta(X):
    return vec(X.T)


def objective(X, V, chi):
    th = _theta(X)
    return float(2.0 * np.real(th @ chi) - np.real(th @ (V @ th.conj())))


def egrad(X, V, chi):
    """Conjugate Wirtinger derivative ``df/d(theta^*) = chi^* - V^T theta`` in matrix form.

    ``df = 2 Re <egrad, dX>``.  Raises ``ValueError`` on shape mismatch.
    """
    X = np.asarray(X)
    n = X.size
    if V.shape != (n, n) or np.shape(chi) != (n,):
        raise ValueError(f"V {V.shape} / chi {np.shape(chi)} do not match point of size {n}")
    th = _theta(X)
    g = np.conj(chi) - V.T @ th
    return unvec(g, X.shape[1], X.shape[0]).T


def project_tangent(X, Z):
    """Project ``Z`` onto the tangent space at ``X``: ``Z - X sym(X^H Z)``."""
    xz = X.conj().T @ Z
    return Z - X @ (0.5 * (xz + xz.conj().T))


def retract(X, Z):
    """QR retraction with the diagonal of ``R`` made positive.

    Computed as Cholesky QR: ``R = chol((X+Z)^H (X+Z))``.  For tangent ``Z``
    the Gram matrix is ``I + Z^H Z``, so the factorization is well conditioned.
    """
    y = X + Z
    try:
        r = np.linalg.cholesky(y.conj().T @ y)
    except np.linalg.LinAlgError as exc:
        raise RetractionError("retraction lost rank") from exc
    d = np.abs(np.diagonal(r))
    if d.min() <= 1e-12 * max(1.0, d.max()):
        raise RetractionError("retraction lost rank")
    # r is lower triangular with y^H y = r r^H, so Q = y r^-H
    return np.linalg.solve(r.conj(), y.T).T


def _inner(a, b):
    return float(np.real(np.vdot(a, b)))


def _fused(X, V, chi):
    # objective and matrix-form egrad sharing one product; vec(X^T) is X.ravel()
    th = X.ravel()
    w = V @ th.conj()
    f = 2.0 * np.real(th @ chi) - np.real(th @ w)
    return float(f), np.conj(chi - w).reshape(X.shape)


def maximize(V, chi, init, opts=None):
    """Maximize ``2 Re{theta^T chi} - theta^T V theta^*`` from the feasible point ``init``.

    ``V`` must be Hermitian (callers pass ``-V`` to maximize a positive
    quadratic).  Armijo backtracking makes the objective trace non-decreasing.
    Stops when the Riemannian gradient norm drops below ``gtol`` times the
    initial Euclidean gradient norm, when the relative objective change stays
    below ``ftol`` for ``patience`` iterations, or at ``max_iters``.

    Returns
    -------
    StiefelResult
        Final point, objective trace (one entry per accepted iterate, starting
        at ``init``), convergence flag, iteration count and the largest Gram
        deviation seen along the way.
    """
    opts = opts or SolverOptions()
    X = np.array(init, dtype=complex)
    if X.ndim != 2 or X.shape[0] < X.shape[1]:
        raise ValueError("init must be a tall (p*Mbar) x Mbar matrix")
    V = np.asarray(V)
    chi = np.asarray(chi)
    if V.shape != (X.size, X.size) or chi.shape != (X.size,):
        raise ValueError(f"V {V.shape} / chi {chi.shape} do not match point of size {X.size}")
    restart = opts.restart or max(1, 2 * X.size - X.shape[1] ** 2)

    f, e = _fused(X, V, chi)
    scale = 2.0 * np.linalg.norm(e)
    grad = project_tangent(X, 2.0 * e)
    d = grad
    trace = [f]
    worst = gram_deviation(X)
    # curvature scale of the objective on the manifold; the first trial step is initial_step / lip
    lip = 2.0 * np.linalg.norm(V) + scale
    alpha0 = opts.initial_step / (lip if lip > 0 else 1.0)
    stall = 0
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        gnorm = np.linalg.norm(grad)
        if scale == 0.0 or gnorm <= opts.gtol * scale:
            converged = True
            it -= 1
            break
        slope = _inner(grad, d)
        if slope <= 0.0 or (it - 1) % restart == 0:
            d, slope = grad, gnorm ** 2
        alpha = alpha0
        for _ in range(opts.max_backtracks):
            try:
                Xn = retract(X, alpha * d)
            except RetractionError:
                alpha *= opts.backtrack
                continue
            fn, e = _fused(Xn, V, chi)
            if fn >= f + opts.c1 * alpha * slope:
                break
            alpha *= opts.backtrack
        else:
            # no ascent step found; the point is stationary to working precision
            converged = True
            it -= 1
            break
        grad_new = project_tangent(Xn, 2.0 * e)
        old = project_tangent(Xn, grad)
        # Barzilai-Borwein guess for the next trial step
        sv = project_tangent(Xn, alpha * d)
        sy = _inner(sv, old - grad_new)
        alpha0 = np.linalg.norm(sv) ** 2 / sy if sy > 0 else 2.0 * alpha
        beta = max(0.0, _inner(grad_new, grad_new - old) / gnorm ** 2)
        d = grad_new + beta * project_tangent(Xn, d)
        rel = abs(fn - f) / max(abs(fn), abs(f), 1e-300)
        X, f, grad = Xn, fn, grad_new
        trace.append(f)
        worst = max(worst, gram_deviation(X))
        stall = stall + 1 if rel < opts.ftol else 0
        if stall >= opts.patience:
            converged = True
            break
    return StiefelResult(X=X, trace=trace, converged=converged, iterations=it,
                         max_gram_deviation=worst)


def mm_step(V, chi, X, shift=None):
    """One minorize-maximize step for ``2 Re{theta^T chi} - theta^T V theta^*``.

    On the manifold ``||theta||^2 = Mbar`` is constant, so with
    ``lam >= lambda_max(V)`` the objective equals the convex function
    ``2 Re{theta^T chi} + theta^T (lam I - V) theta^* - lam Mbar``.  Its
    linearization at ``X`` is a global lower bound, and maximizing a linear
    function over the Stiefel manifold is a polar decomposition.  The
    objective therefore never decreases.

    ``shift`` overrides ``lam``; pass 0 when ``-V`` is known to be PSD.
    """
    X = np.asarray(X)
    th = X.ravel()
    if shift is None:
        shift = max(0.0, float(np.linalg.eigvalsh(V)[-1]))
    c = chi - V @ th.conj() + shift * th.conj()
    # maximize Re sum(X * C) = Re tr(B^H X) with B = conj(C): X = polar(B)
    u, _, vh = np.linalg.svd(np.conj(c).reshape(X.shape), full_matrices=False)
    return u @ vh
