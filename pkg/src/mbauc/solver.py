"""Elastic-net regularized quadratic program over pairwise moments.

Minimizes ``0.5 w^T sigma w - w^T mu + lambda1 |w|_1 + lambda2/2 |w|_2^2`` by
cyclic coordinate descent. Each coordinate step is an exact minimization
(soft-thresholding), so no step size is involved. Once the sign pattern of
the iterate settles, the reduced linear system on the support is solved
directly and kept only if it passes the full optimality check; this avoids
the slow tail of coordinate descent on ill-conditioned problems.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as sla

from .errors import ConvergenceError, NumericalError
from .model import RankerModel, RegularizationSpec
from .moments import MomentAccumulator

log = logging.getLogger(__name__)

# Dense eigendecomposition up to this size; Lanczos above it.
_EIGH_MAX_D = 2000
# Sweeps between attempts at an exact solve on the current support.
_REFINE_EVERY = 5


@dataclass(frozen=True)
class SolverOptions:
    step_tol: float = 1e-8
    kkt_tol: float = 1e-8
    max_sweeps: int = 10_000
    allow_singular: bool = False
    # Skip the eigenvalue screen (e.g. when the caller already checked it).
    check_spectrum: bool = True


def objective(w, acc: MomentAccumulator, reg: RegularizationSpec) -> float:
    w = np.asarray(w, dtype=np.float64)
    return _objective(w, acc.sigma, acc.mu, reg)


def _objective(w, sigma, mu, reg) -> float:
    return float(
        0.5 * w @ sigma @ w - w @ mu
        + reg.lambda1 * np.abs(w).sum()
        + 0.5 * reg.lambda2 * (w @ w)
    )


def kkt_residual(w, sigma, mu, reg: RegularizationSpec) -> float:
    """Largest per-coordinate distance of zero from the subdifferential."""
    g = sigma @ w + reg.lambda2 * w - mu
    nz = w != 0
    r = np.empty_like(g)
    r[nz] = np.abs(g[nz] + reg.lambda1 * np.sign(w[nz]))
    r[~nz] = np.maximum(np.abs(g[~nz]) - reg.lambda1, 0.0)
    return float(r.max()) if r.size else 0.0


def soft_threshold(x, t):
    """``sign(x) * max(|x| - t, 0)``; exact ties at ``|x| == t`` go to zero."""
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _extreme_eigenvalues(sigma: np.ndarray) -> tuple[float, float]:
    d = sigma.shape[0]
    if d <= _EIGH_MAX_D:
        ev = np.linalg.eigvalsh(sigma)
        return float(ev[0]), float(max(abs(ev[0]), abs(ev[-1])))
    lo = sla.eigsh(sigma, k=1, which="SA", return_eigenvectors=False)[0]
    hi = sla.eigsh(sigma, k=1, which="LM", return_eigenvectors=False)[0]
    return float(lo), float(abs(hi))


def _screen(sigma, reg: RegularizationSpec, opts: SolverOptions) -> bool:
    """Reject corrupted or non-unique problems; True when the minimizer is unique."""
    lo, norm = _extreme_eigenvalues(sigma)
    if lo < -1e-6 * norm:
        raise NumericalError(
            f"second-moment matrix is indefinite (min eigenvalue {lo:.3e}, norm {norm:.3e})"
        )
    if reg.lambda2 > 0:
        return True
    if norm > 0 and lo > 1e-10 * norm:
        return True
    if not opts.allow_singular:
        raise NumericalError(
            "second-moment matrix is singular and lambda2 = 0, so the minimizer is not "
            "unique; set lambda2 > 0 or allow_singular"
        )
    return False


def _support_solve(A, mu, w, lam1):
    """Solve the optimality equations restricted to ``w``'s support and signs."""
    active = np.flatnonzero(w)
    out = np.zeros_like(w)
    if active.size == 0:
        return out
    sign = np.sign(w[active])
    rhs = mu[active] - lam1 * sign
    sub = A[np.ix_(active, active)]
    try:
        sol = la.solve(sub, rhs, assume_a="sym")
    except (la.LinAlgError, ValueError):
        sol = la.lstsq(sub, rhs)[0]
    if not np.all(np.isfinite(sol)) or np.any(np.sign(sol) != sign):
        return None
    out[active] = sol
    return out


def coordinate_descent(sigma, mu, reg: RegularizationSpec, opts: SolverOptions = SolverOptions(),
                       w0=None):
    """Return ``(w, sweeps, residual)``. ``sigma`` must be a full symmetric matrix."""
    d = mu.size
    A = np.array(sigma, dtype=np.float64)
    A[np.diag_indices(d)] += reg.lambda2
    diag = A.diagonal().copy()
    lam1 = reg.lambda1
    w = np.zeros(d) if w0 is None else np.array(w0, dtype=np.float64)
    Aw = A @ w
    kkt_target = opts.kkt_tol * max(1.0, float(np.abs(mu).max(initial=0.0)))
    residual = np.inf
    for sweep in range(1, opts.max_sweeps + 1):
        max_change = 0.0
        for i in range(d):
            a = diag[i]
            wi = w[i]
            if a <= 0.0:
                # Zero-variance coordinate: the objective does not depend on it.
                new = 0.0
            else:
                rho = mu[i] - (Aw[i] - a * wi)
                if rho > lam1:
                    new = (rho - lam1) / a
                elif rho < -lam1:
                    new = (rho + lam1) / a
                else:
                    new = 0.0
            delta = new - wi
            if delta != 0.0:
                w[i] = new
                Aw += delta * A[i]
                if abs(delta) > max_change:
                    max_change = abs(delta)
        Aw = A @ w
        residual = kkt_residual(w, sigma, mu, reg)
        if max_change <= opts.step_tol * max(1.0, float(np.abs(w).max(initial=0.0))) \
                and residual <= kkt_target:
            return w, sweep, residual
        if (sweep - 1) % _REFINE_EVERY == 0:
            cand = _support_solve(A, mu, w, lam1)
            if cand is not None:
                cand_res = kkt_residual(cand, sigma, mu, reg)
                if cand_res <= kkt_target:
                    return cand, sweep, cand_res
    raise ConvergenceError(
        f"coordinate descent did not converge in {opts.max_sweeps} sweeps "
        f"(KKT residual {residual:.3e})",
        w=w, residual=residual, iters=opts.max_sweeps,
    )


def solve(acc: MomentAccumulator, reg: RegularizationSpec, opts: SolverOptions = SolverOptions(),
          seed: int | None = None, w0=None) -> RankerModel:
    if acc.count < 1:
        raise NumericalError("no pairs absorbed; cannot solve")
    sigma, mu = acc.sigma, acc.mu
    unique = _screen(sigma, reg, opts) if opts.check_spectrum else True
    if not unique and reg.lambda1 == 0:
        # Research fallback: minimum-norm minimizer of the unregularized problem.
        w = la.pinvh(sigma) @ mu
        sweeps, residual, method = 0, kkt_residual(w, sigma, mu, reg), "pinv"
    else:
        w, sweeps, residual = coordinate_descent(sigma, mu, reg, opts, w0=w0)
        method = "coordinate-descent"
    log.debug("solve: %s converged in %d sweeps, residual %.2e", method, sweeps, residual)
    return RankerModel(
        w=w, reg=reg, pairs_seen=acc.count, seed=seed,
        objective_value=_objective(w, sigma, mu, reg),
        solver={"method": method, "iters": sweeps, "residual": residual},
    )


def solve_ridge_direct(acc: MomentAccumulator, lambda2: float, seed: int | None = None) -> RankerModel:
    """Closed-form ridge path: Cholesky solve of ``(sigma + lambda2 I) w = mu``."""
    if not lambda2 > 0:
        raise NumericalError("direct ridge solve needs lambda2 > 0")
    if acc.count < 1:
        raise NumericalError("no pairs absorbed; cannot solve")
    sigma, mu = acc.sigma, acc.mu
    A = sigma.copy()
    A[np.diag_indices(acc.d)] += lambda2
    try:
        w = la.cho_solve(la.cho_factor(A, lower=True, check_finite=True), mu)
    except (la.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Cholesky factorization failed: {exc}") from exc
    reg = RegularizationSpec(0.0, lambda2)
    return RankerModel(
        w=w, reg=reg, pairs_seen=acc.count, seed=seed,
        objective_value=_objective(w, sigma, mu, reg),
        solver={"method": "cholesky", "iters": 1, "residual": kkt_residual(w, sigma, mu, reg)},
    )
