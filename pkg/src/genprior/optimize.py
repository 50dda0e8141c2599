"""Quasi-Newton maximization (BFGS with backtracking line search).

Shared by the latent MAP, the expansion-point latent search and the
unknown-variance MAP. Non-convergence is reported in the result, not raised:
callers in nonconvex latent landscapes still use the best point found.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class OptResult:
    x: np.ndarray
    value: float
    grad_inf_norm: float
    iterations: int
    converged: bool


def maximize(value_and_grad, x0: np.ndarray, gtol: float = 1e-8,
             max_iter: int = 500) -> OptResult:
    """Maximize f via BFGS on -f with an Armijo backtracking line search.

    ``value_and_grad(x)`` returns (f(x), grad f(x)). Stops when the gradient
    infinity norm drops below ``gtol`` or after ``max_iter`` iterations.
    Near an optimum the objective improvement falls below floating-point
    resolution before the gradient does; steps that leave the value
    unchanged at that resolution but strictly shrink the gradient are still
    accepted, so tight gradient tolerances remain reachable.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    f, g = value_and_grad(x)
    f, g = -float(f), -np.asarray(g, dtype=float)
    H = np.eye(n)
    iters = 0
    first_update = True
    stalls = 0
    while iters < max_iter:
        gnorm = float(np.max(np.abs(g))) if n else 0.0
        if gnorm < gtol:
            return OptResult(x, -f, gnorm, iters, True)
        p = -(H @ g)
        slope = float(g @ p)
        if slope >= 0.0:
            # Inverse-Hessian approximation lost descent; restart from steepest.
            H = np.eye(n)
            p = -g
            slope = float(g @ p)
            first_update = True
        noise = 1e-12 * max(1.0, abs(f))
        t = 1.0
        accepted = None
        while t > 1e-20:
            cand = x + t * p
            fc, gc = value_and_grad(cand)
            fc, gc = -float(fc), -np.asarray(gc, dtype=float)
            if np.isfinite(fc) and fc <= f + 1e-4 * t * slope:
                accepted = (t, fc, gc)
                break
            # Objective improvement is below fp resolution but the step
            # still shrinks the gradient: take it instead of grinding on.
            if (np.isfinite(fc) and fc <= f + noise
                    and float(np.max(np.abs(gc))) < 0.9 * gnorm):
                accepted = (t, fc, gc)
                break
            t *= 0.5
        if accepted is None:
            break
        t, fx_new, gx_new = accepted
        stalls = stalls + 1 if f - fx_new <= noise else 0
        s = t * p
        yv = gx_new - g
        x = x + s
        f, g = fx_new, gx_new
        iters += 1
        if stalls >= 10:
            break
        sy = float(s @ yv)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            if first_update:
                H = (sy / float(yv @ yv)) * np.eye(n)
                first_update = False
            rho = 1.0 / sy
            Hy = H @ yv
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) \
                + rho * rho * float(yv @ Hy) * np.outer(s, s) \
                + rho * np.outer(s, s)
    gnorm = float(np.max(np.abs(g))) if n else 0.0
    return OptResult(x, -f, gnorm, iters, bool(gnorm < gtol))
