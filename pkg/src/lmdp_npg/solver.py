"""Minimisation of g' F g - 2 g' b over a Euclidean ball.

This is the per-iteration fit of the natural-gradient update weight.  F is a
positive semi-definite sum of score outer products, so the objective is convex
and projected gradient descent with step 1/(2 lambda_max) descends
monotonically.  Descent starts from the best of a few closed-form candidates
(origin, projected least-squares solution, scaled gradient direction), which
makes interior problems exact after the first check and warm-starts boundary
problems.
"""

from __future__ import annotations

import math

import numpy as np


def quadratic_objective(f_hat: np.ndarray, nabla_hat: np.ndarray, g: np.ndarray) -> float:
    return float(g @ f_hat @ g - 2.0 * g @ nabla_hat)


def _project(g: np.ndarray, radius: float) -> np.ndarray:
    norm = float(np.linalg.norm(g))
    if norm <= radius:
        return g
    return g * (radius / norm)


def solve_constrained_quadratic(
    f_hat: np.ndarray,
    nabla_hat: np.ndarray,
    radius: float,
    tol: float = 1e-10,
    max_iters: int = 5000,
) -> np.ndarray:
    """argmin_{||g|| <= radius} g' F g - 2 g' b, F symmetric PSD.

    ``tol`` bounds the per-iteration displacement (relative to the radius) at
    which descent stops; ``max_iters`` caps the work on badly conditioned
    systems, where the leftover error lives in statistically meaningless
    low-curvature directions.
    """
    if radius <= 0.0:
        raise ValueError("ball radius must be positive")
    f_hat = np.asarray(f_hat, dtype=float)
    b = np.asarray(nabla_hat, dtype=float)
    d = b.shape[0]

    eigmax = float(np.linalg.eigvalsh(f_hat)[-1])
    if eigmax <= 0.0:
        # objective is linear: walk to the boundary along b, or stay at 0
        bnorm = float(np.linalg.norm(b))
        if bnorm == 0.0:
            return np.zeros(d)
        return b * (radius / bnorm)

    candidates = [np.zeros(d)]
    lstsq_sol, *_ = np.linalg.lstsq(f_hat, b, rcond=None)
    candidates.append(_project(lstsq_sol, radius))
    bnorm = float(np.linalg.norm(b))
    if bnorm > 0.0:
        candidates.append(b * (radius / bnorm))
    if float(np.linalg.norm(lstsq_sol)) > radius:
        # boundary regime: projected ridge solutions make far better starting
        # points than the projected least-squares one when F is ill-conditioned
        scale = float(np.trace(f_hat)) / d
        eye = np.eye(d)
        for mu in (1e-1, 1e-2, 1e-3, 1e-4):
            try:
                cand = np.linalg.solve(f_hat + (mu * scale) * eye, b)
            except np.linalg.LinAlgError:
                continue
            candidates.append(_project(cand, radius))
    g = min(candidates, key=lambda x: quadratic_objective(f_hat, b, x))

    step = 1.0 / (2.0 * eigmax + 1e-12)
    dot = np.dot
    fg = dot(f_hat, g)
    obj = float(dot(g, fg) - 2.0 * dot(g, b))
    # stop on step displacement: objective decrease shrinks quadratically
    # faster than the distance to the optimum, so it cannot certify accuracy
    threshold = tol * max(1.0, radius)
    r2 = radius * radius
    for _ in range(max_iters):
        g_next = g - step * (2.0 * fg - 2.0 * b)
        nrm2 = float(dot(g_next, g_next))
        if nrm2 > r2:
            g_next *= radius / math.sqrt(nrm2)
        fg_next = dot(f_hat, g_next)
        obj_next = float(dot(g_next, fg_next) - 2.0 * dot(g_next, b))
        if obj_next > obj:  # numerical floor reached
            break
        move = g_next - g
        g, fg, obj = g_next, fg_next, obj_next
        if float(dot(move, move)) < threshold * threshold:
            break
    return g
