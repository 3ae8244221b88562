"""Slow, independent verification routines used by the test suite.

Nothing here shares a code path with the certified implementations it
checks: membership is decided by exhaustive support enumeration instead of
the simplex, growth constants by rejection sampling of actual objective
values, derivatives by central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import expr as ex
from .problem import Problem, check_feasible, evaluate_objective

__all__ = [
    "TooFewFeasibleSamples", "GrowthProbe",
    "growth_probe", "hull_membership_bruteforce", "fd_check",
    "fd_gradient", "fd_hessian",
]


class TooFewFeasibleSamples(Exception):
    def __init__(self, found: int, needed: int = 50):
        self.found = found
        super().__init__(f"only {found} feasible samples (need {needed})")


@dataclass
class GrowthProbe:
    order: int
    n_feasible: int
    refuted: bool
    constant: float | None       # fitted growth constant, None when refuted
    worst_point: list | None

    def to_json(self):
        return {"order": self.order, "n_feasible": self.n_feasible,
                "refuted": self.refuted, "constant": self.constant,
                "worst_point": self.worst_point}


def _equality_frame(A, d):
    """Orthonormal basis of the affine-equality null space (identity when
    there are no equalities), so samples stay on the affine part of A."""
    if not A.E:
        return np.eye(d)
    E = np.asarray(A.E, dtype=float)
    _, s, Vt = np.linalg.svd(E)
    rank_E = int(np.sum(s > 1e-12))
    return Vt[rank_E:].T  # d x (d - rank_E)


def growth_probe(P: Problem, x, order: int = 1, n_samples: int = 2000,
                 radius: float = 0.1, seed: int = 0,
                 eps: float = 1e-9, min_feasible: int = 50) -> GrowthProbe:
    """Sample feasible points near x and fit the growth constant
    min (F(y) - F(x)) / |y - x|^order; any strictly lower objective value
    refutes local optimality outright."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    x = np.asarray(x, dtype=float)
    F0, _ = evaluate_objective(P, x)
    rng = np.random.default_rng(seed + 17)
    frame = _equality_frame(P.set_A, P.d)
    k = frame.shape[1]
    if k == 0:
        raise TooFewFeasibleSamples(0, min_feasible)
    kept = 0
    best = math.inf
    worst_point = None
    refuted = False
    for _ in range(n_samples):
        u = rng.standard_normal(k)
        norm = np.linalg.norm(u)
        if norm < 1e-12:
            continue
        step = radius * rng.random() ** (1.0 / k) * (u / norm)
        y = x + frame @ step
        if not check_feasible(P, y).feasible:
            continue
        dist = float(np.linalg.norm(y - x))
        if dist < 1e-12:
            continue
        kept += 1
        Fy, _ = evaluate_objective(P, y)
        if Fy < F0 - eps:
            refuted = True
            worst_point = y.tolist()
            break
        quotient = (Fy - F0) / dist ** order
        if quotient < best:
            best = quotient
            worst_point = y.tolist()
    if refuted:
        return GrowthProbe(order=order, n_feasible=kept, refuted=True,
                           constant=None, worst_point=worst_point)
    if kept < min_feasible:
        raise TooFewFeasibleSamples(kept, min_feasible)
    return GrowthProbe(order=order, n_feasible=kept, refuted=False,
                       constant=float(best), worst_point=worst_point)


def hull_membership_bruteforce(target, hull, cone=(), eps: float = 1e-9) -> bool:
    """Decide target in co(hull) + cone(cone) by exhaustive enumeration of
    candidate supports (at most d+1 hull points and d cone rays suffice),
    solving each small linear system directly.  Intended for instances with
    at most a handful of generators."""
    target = np.asarray(target, dtype=float)
    d = target.shape[0]
    hull = [np.asarray(v, dtype=float) for v in hull]
    cone = [np.asarray(v, dtype=float) for v in cone]
    if not hull:
        return False
    scale = max(1.0, float(np.linalg.norm(target)),
                max(float(np.linalg.norm(v)) for v in hull + cone))
    nh, nc = len(hull), len(cone)
    for h_count in range(1, min(nh, d + 1) + 1):
        for h_idx in combinations(range(nh), h_count):
            for c_count in range(0, min(nc, d) + 1):
                for c_idx in combinations(range(nc), c_count):
                    cols = [hull[i] for i in h_idx] + [cone[j] for j in c_idx]
                    A = np.zeros((d + 1, len(cols)))
                    for j, v in enumerate(cols):
                        A[:d, j] = v
                    A[d, :h_count] = 1.0
                    b = np.concatenate([target, [1.0]])
                    w, *_ = np.linalg.lstsq(A, b, rcond=None)
                    if np.any(w < -eps):
                        continue
                    w = np.maximum(w, 0.0)
                    total = sum(w[:h_count])
                    if abs(total - 1.0) > 1e-7:
                        continue
                    recon = sum(wi * v for wi, v in zip(w, cols))
                    if np.linalg.norm(recon - target) <= 1e-7 * scale:
                        return True
    return False


def fd_gradient(e: ex.Expression, x, step: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    g = np.zeros(d)
    for i in range(d):
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (ex.eval_value(e, xp) - ex.eval_value(e, xm)) / (2 * step)
    return g


def fd_hessian(e: ex.Expression, x, step: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    H = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            xpp, xpm, xmp, xmm = (x.copy() for _ in range(4))
            xpp[i] += step
            xpp[j] += step
            xpm[i] += step
            xpm[j] -= step
            xmp[i] -= step
            xmp[j] += step
            xmm[i] -= step
            xmm[j] -= step
            H[i, j] = (ex.eval_value(e, xpp) - ex.eval_value(e, xpm)
                       - ex.eval_value(e, xmp) + ex.eval_value(e, xmm)) \
                / (4 * step * step)
    return H


def fd_check(e: ex.Expression, x, grad_step: float = 1e-5,
             hess_step: float = 1e-4):
    """Max relative errors of the forward-mode gradient and Hessian against
    central differences.  Returns (grad_error, hess_error)."""
    x = np.asarray(x, dtype=float)
    dual = ex.eval2(e, x)
    g_fd = fd_gradient(e, x, grad_step)
    h_fd = fd_hessian(e, x, hess_step)
    g_scale = max(1.0, float(np.max(np.abs(g_fd))))
    h_scale = max(1.0, float(np.max(np.abs(h_fd))))
    g_err = float(np.max(np.abs(dual.grad - g_fd))) / g_scale
    h_err = float(np.max(np.abs(dual.hess - h_fd))) / h_scale
    return g_err, h_err
