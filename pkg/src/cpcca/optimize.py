"""Local optimizers used to refine the PCCA+ transformation.

Nelder-Mead is scipy's implementation with a fixed initial simplex. The
Gauss-Newton and Levenberg-Marquardt variants are small damped solvers that
work with fewer residuals than parameters (MINPACK's ``lm`` cannot), using a
forward-difference Jacobian.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

FD_STEP = 1e-7


@dataclass
class OptimizeOutcome:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool


def initial_simplex(x0, spread=0.05):
    x0 = np.asarray(x0, dtype=float)
    sim = np.tile(x0, (x0.size + 1, 1))
    for i in range(x0.size):
        sim[i + 1, i] += spread * x0[i] if x0[i] != 0 else spread
    return sim


def nelder_mead(fun, x0, max_evals=None, ftol=1e-10, spread=0.05) -> OptimizeOutcome:
    """Minimize ``fun`` from ``x0``; stops when the simplex values agree to ``ftol``."""
    x0 = np.asarray(x0, dtype=float)
    if max_evals is None:
        max_evals = 200 * x0.size
    res = minimize(fun, x0, method="Nelder-Mead",
                   options={"initial_simplex": initial_simplex(x0, spread),
                            "maxfev": max_evals, "maxiter": max_evals,
                            "fatol": ftol, "xatol": np.inf, "adaptive": False})
    return OptimizeOutcome(np.asarray(res.x), float(res.fun), int(res.nit),
                           int(res.nfev), bool(res.status == 0))


def fd_jacobian(residual, x, r0=None):
    """Forward differences with step ``1e-7 * (1 + |x_i|)``."""
    x = np.asarray(x, dtype=float)
    r0 = residual(x) if r0 is None else r0
    J = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = FD_STEP * (1.0 + abs(x[i]))
        xh = x.copy()
        xh[i] += h
        J[:, i] = (residual(xh) - r0) / h
    return J


def gauss_newton(residual, x0, max_iter=100, ftol=1e-12, xtol=1e-12,
                 max_halvings=40) -> OptimizeOutcome:
    """Gauss-Newton with minimum-norm steps, step halving and a gradient fallback."""
    x = np.asarray(x0, dtype=float).copy()
    r = residual(x)
    f = float(r @ r)
    nfev = 1
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = fd_jacobian(residual, x, r)
        nfev += x.size
        moved = False
        # the gradient direction is tried when the Gauss-Newton step finds no
        # decrease, which happens at kinks of piecewise-smooth residuals
        for step in (np.linalg.lstsq(J, -r, rcond=None)[0], -J.T @ r):
            t = 1.0
            for _ in range(max_halvings):
                xn = x + t * step
                rn = residual(xn)
                nfev += 1
                fn = float(rn @ rn)
                if fn < f:
                    moved = True
                    break
                t *= 0.5
            if moved:
                break
        if not moved:
            converged = True
            break
        dx = np.linalg.norm(xn - x)
        df = f - fn
        x, r, f = xn, rn, fn
        if df <= ftol * (1.0 + f) or dx <= xtol * (1.0 + np.linalg.norm(x)):
            converged = True
            break
    return OptimizeOutcome(x, f, it, nfev, converged)


def levenberg_marquardt(residual, x0, max_iter=200, ftol=1e-12, xtol=1e-12,
                        damping=1e-3) -> OptimizeOutcome:
    """Levenberg-Marquardt with multiplicative damping updates."""
    x = np.asarray(x0, dtype=float).copy()
    r = residual(x)
    f = float(r @ r)
    nfev = 1
    J = fd_jacobian(residual, x, r)
    nfev += x.size
    mu = damping * max(1.0, float(np.max(np.sum(J * J, axis=0))))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = J.T @ r
        H = J.T @ J
        step = np.linalg.solve(H + mu * np.eye(x.size), -g)
        xn = x + step
        rn = residual(xn)
        nfev += 1
        fn = float(rn @ rn)
        if fn < f:
            dx = np.linalg.norm(step)
            df = f - fn
            x, r, f = xn, rn, fn
            mu = max(mu / 3.0, 1e-15)
            if df <= ftol * (1.0 + f) or dx <= xtol * (1.0 + np.linalg.norm(x)):
                converged = True
                break
            J = fd_jacobian(residual, x, r)
            nfev += x.size
        else:
            mu *= 4.0
            if mu > 1e16:
                converged = True
                break
    return OptimizeOutcome(x, f, it, nfev, converged)
