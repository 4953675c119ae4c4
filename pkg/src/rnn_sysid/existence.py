"""Explicit near-initialization comparator matching the teacher.

For each lag t0 the teacher's transfer matrix is G C^{t0} D and the
student's is rho^{t0} B W^{t0} A.  The construction corrects A for lag 0
and spreads a correction for each lag t0 >= 1 over the t0 index pairs
(a, b) with a + b = t0 - 1:

  dW term(a, b) = rho^{-t0}/t0 * (B W0^a)^T P1[a] M_t0 P2[b] (W0^b A0)^T,
  M_t0 = G C^{t0} D - rho^{t0} B W0^{t0} A0,

where P1[a] and P2[b] invert the small Gram matrices of B W0^a and
W0^b A0.  Each matched pair reproduces M_t0 exactly through the
linearization; the unmatched cross terms vanish at rate log m / sqrt(m)
by the concentration bounds.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .linalg import frob
from .losses import sequence_loss
from .student import RescaledView, forward_rescaled
from .teacher import impulse_response


class ConditioningError(RuntimeError):
    pass


MAX_DENSE_M = 4096


@dataclass
class GramInverses:
    P1: list   # P1[a] inverts B W0^a (W0^a)^T B^T, a = 0..horizon-1
    P2: list   # P2[b] inverts (W0^b A0)^T W0^b A0
    horizon: int
    cond_max: float
    resid_max: float


@dataclass
class ComparatorParams:
    W_star: np.ndarray
    A_star: np.ndarray
    factors: list            # (coef, left m x d_y, core d_y x d, right d x m)
    dist_W: float
    dist_A: float
    distance_bound: float
    T_max: int
    b: float
    rho: float
    fit_error: float = float("nan")
    meta: dict = field(default_factory=dict)


def _propagated(W0, A0, B, horizon):
    """L[a] = B W0^a (d_y x m) and R[b] = W0^b A0 (m x d)."""
    L = [B]
    R = [A0]
    for _ in range(horizon - 1):
        L.append(L[-1] @ W0)
        R.append(W0 @ R[-1])
    return L, R


def _validated_inverse(Gram, tag):
    cond = float(np.linalg.cond(Gram))
    if not np.isfinite(cond) or cond > 1e8:
        raise ConditioningError(
            f"{tag}: Gram condition number {cond:.3g} exceeds 1e8 "
            "(m too small for this horizon)")
    P = np.linalg.solve(Gram, np.eye(Gram.shape[0]))
    resid = frob(P @ Gram - np.eye(Gram.shape[0]))
    if resid > 1e-8:
        raise ConditioningError(f"{tag}: inverse residual {resid:.3g} > 1e-8")
    return P, cond, resid


def gram_inverses(W0, A0, B, T_max):
    L, R = _propagated(W0, A0, B, T_max)
    P1, P2 = [], []
    cond_max = 0.0
    resid_max = 0.0
    for a in range(T_max):
        P, c, r = _validated_inverse(L[a] @ L[a].T, f"P1[{a}]")
        P1.append(P)
        cond_max = max(cond_max, c)
        resid_max = max(resid_max, r)
    for b in range(T_max):
        P, c, r = _validated_inverse(R[b].T @ R[b], f"P2[{b}]")
        P2.append(P)
        cond_max = max(cond_max, c)
        resid_max = max(resid_max, r)
    return GramInverses(P1=P1, P2=P2, horizon=int(T_max),
                        cond_max=cond_max, resid_max=resid_max)


def construct_comparator(W0, A0, B, teacher, rho, T_max, b=None):
    """Build (W*, A*) for lags 0..T_max-1 of the teacher's response.

    Requires rho > rho_C so the rho^{-t0} weights stay summable against
    the teacher's decay.  The W* update is kept as a list of rank-<=
    min(d, d_y) factors; the dense matrix is materialized for m <= 4096.
    """
    m = W0.shape[0]
    if b is None:
        b = math.sqrt(math.log(T_max * math.e))
    L, R = _propagated(W0, A0, B, T_max)
    grams = gram_inverses(W0, A0, B, T_max)
    ir = impulse_response(teacher, T_max)  # G C^k D, k = 0..T_max-1

    A_star = A0 + L[0].T @ (grams.P1[0] @ (ir[0] - B @ A0))

    factors = []
    for t0 in range(1, T_max):
        M = ir[t0] - rho**t0 * (L[t0] @ A0)
        coef = rho ** (-t0) / t0
        for a in range(t0):
            bb = t0 - 1 - a
            core = grams.P1[a] @ M @ grams.P2[bb]
            factors.append((coef, L[a].T, core, R[bb].T))

    if m <= MAX_DENSE_M:
        dW = np.zeros((m, m))
        for coef, left, core, right in factors:
            dW += coef * (left @ core @ right)
        W_star = W0 + dW
        dist_W = frob(dW)
    else:
        W_star = None
        dist_W = float("nan")

    comp = ComparatorParams(
        W_star=W_star,
        A_star=A_star,
        factors=factors,
        dist_W=dist_W,
        dist_A=frob(A_star - A0),
        distance_bound=2.0 * teacher.c_rho * b * T_max**2 / math.sqrt(m),
        T_max=int(T_max),
        b=float(b),
        rho=float(rho),
        meta={"cond_max": grams.cond_max, "resid_max": grams.resid_max,
              "rho_C": teacher.rho_C},
    )
    return comp


def comparator_rank_profile(comp, W0):
    """Singular values of W* - W0, for the low-rank structure check."""
    return np.linalg.svd(comp.W_star - W0, compute_uv=False)


def verify_existence(comp, teacher, dataset, loss, W0, A0, B):
    """Evaluate the comparator on real sequences.

    fit_error = max over (sequence, t <= T_max) of ||f_t(W*, A*) - y~_t||;
    the horizon cap keeps the comparison inside the lag range the
    construction covers.  Also reports the averaged loss gap to the
    teacher's own outputs and the two claimed bound values.
    """
    if comp.W_star is None:
        raise ValueError("dense W* not materialized at this m")
    view = RescaledView(W=comp.W_star, A=comp.A_star, W0=W0, A0=A0)
    T_eval = min(dataset.T, comp.T_max)
    fit_error = 0.0
    gap = 0.0
    for i in range(dataset.K):
        x = dataset.inputs[i][:T_eval]
        F = forward_rescaled(view, B, comp.rho, x)
        ytil = dataset.clean_outputs[i][:T_eval]
        yobs = dataset.observed_outputs[i][:T_eval]
        fit_error = max(fit_error, float(np.max(np.linalg.norm(F - ytil, axis=1))))
        gap += sequence_loss(loss, yobs, F) - sequence_loss(loss, yobs, ytil)
    gap /= dataset.K
    comp.fit_error = fit_error
    m = W0.shape[0]
    d = A0.shape[1]
    theorem_error_bound = (
        comp.b * d**2 * teacher.c_rho * comp.T_max**3 * math.log(m) / math.sqrt(m)
        + teacher.c_rho * comp.rho**comp.T_max / (1.0 - comp.rho)
    )
    return {
        "fit_error": fit_error,
        "loss_gap": gap,
        "dist_W": comp.dist_W,
        "dist_A": comp.dist_A,
        "distance_bound": comp.distance_bound,
        "distances_ok": bool(max(comp.dist_W, comp.dist_A) <= comp.distance_bound),
        "theorem_error_bound": theorem_error_bound,
        "T_eval": T_eval,
        "m": m,
    }


def save_comparator(comp, report, path):
    os.makedirs(path, exist_ok=True)
    doc = {
        "format_version": 1,
        "T_max": comp.T_max,
        "b": "%.17g" % comp.b,
        "rho": "%.17g" % comp.rho,
        "dist_W": "%.17g" % comp.dist_W,
        "dist_A": "%.17g" % comp.dist_A,
        "distance_bound": "%.17g" % comp.distance_bound,
        "fit_error": "%.17g" % comp.fit_error,
        "meta": {k: float(v) for k, v in comp.meta.items()},
        "report": {k: (float(v) if isinstance(v, (int, float)) else v)
                   for k, v in (report or {}).items()},
    }
    with open(os.path.join(path, "comparator.json"), "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True, default=float)
        f.write("\n")
