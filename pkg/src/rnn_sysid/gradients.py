"""Derivatives of the rescaled forward map and of sequence losses.

Directional derivatives (JVPs) run a tangent copy of the forward
recurrence; full loss gradients use the reverse-mode adjoint recursion.
Literal power-series sums exist only as small-scale test oracles.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import DimensionError, frob
from .losses import eval_loss


@dataclass
class GradientPair:
    grad_W: np.ndarray   # m x m, rescaled parameterization
    grad_A: np.ndarray   # m x d
    meta: dict = field(default_factory=dict)

    @property
    def grad_W_tilde(self):
        # chain rule for W = W~/rho
        return self.grad_W / self.meta["rho"]


def _states(view, rho, x):
    T = x.shape[0]
    m = view.W.shape[0]
    G = np.zeros((T + 1, m))  # G[0] = g_0 = 0
    for t in range(T):
        G[t + 1] = rho * (view.W @ G[t]) + view.A @ x[t]
    return G


def jvp_f_wrt_W(view, B, rho, x, t, Z):
    """Directional derivative of f_t w.r.t. W in direction Z (m x m).

    Tangent recurrence u_s = rho W u_{s-1} + rho Z g_{s-1}; result B u_t.
    """
    x = np.asarray(x, dtype=float)
    if Z.shape != view.W.shape:
        raise DimensionError(f"direction must be {view.W.shape}, got {Z.shape}")
    G = _states(view, rho, x)
    u = np.zeros(view.W.shape[0])
    for s in range(t):
        u = rho * (view.W @ u) + rho * (Z @ G[s])
    return B @ u


def jvp_f_wrt_A(view, B, rho, x, t, Z):
    """Directional derivative of f_t w.r.t. A in direction Z (m x d)."""
    x = np.asarray(x, dtype=float)
    if Z.shape != view.A.shape:
        raise DimensionError(f"direction must be {view.A.shape}, got {Z.shape}")
    u = np.zeros(view.W.shape[0])
    for s in range(t):
        u = rho * (view.W @ u) + Z @ x[s]
    return B @ u


def jvp_f_all_t(view, B, rho, x, Z_W=None, Z_A=None):
    """JVP of every f_t in one pass; either direction may be None (zero)."""
    x = np.asarray(x, dtype=float)
    T = x.shape[0]
    m = view.W.shape[0]
    G = _states(view, rho, x)
    out = np.empty((T, B.shape[0]))
    u = np.zeros(m)
    for t in range(T):
        u = rho * (view.W @ u)
        if Z_W is not None:
            u = u + rho * (Z_W @ G[t])
        if Z_A is not None:
            u = u + Z_A @ x[t]
        out[t] = B @ u
    return out


def loss_gradients_bptt(view, B, rho, x, y, loss):
    """(1/T) sum_t grad L(y_t, f_t) w.r.t. (W, A) by the adjoint recursion.

    lambda_t = (1/T) B^T r_t + rho W^T lambda_{t+1};
    grad_W = rho sum_t lambda_t g_{t-1}^T, grad_A = sum_t lambda_t x_t^T.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    T = x.shape[0]
    m = view.W.shape[0]
    G = _states(view, rho, x)
    R = np.empty((T, B.shape[0]))
    total = 0.0
    for t in range(T):
        v, g = eval_loss(loss, y[t], B @ G[t + 1])
        total += v
        R[t] = g
    Lam = np.zeros((T, m))
    lam = np.zeros(m)
    for t in range(T - 1, -1, -1):
        lam = (B.T @ R[t]) / T + rho * (view.W.T @ lam)
        Lam[t] = lam
    grad_W = rho * (Lam[1:].T @ G[1:T]) if T > 1 else np.zeros((m, m))
    grad_A = Lam.T @ x
    return GradientPair(
        grad_W=grad_W,
        grad_A=grad_A,
        meta={"rho": rho, "loss": loss.kind, "seq_loss": total / T},
    )


def finite_difference_check(scalar_fn, params, direction, analytic,
                            h_grid=(1e-3, 1e-4, 1e-5)):
    """Central differences of scalar_fn along `direction` vs `analytic`.

    scalar_fn maps a parameter array (same shape as params) to a float.
    Returns a report dict with per-h relative errors and their minimum.
    """
    params = np.asarray(params, dtype=float)
    direction = np.asarray(direction, dtype=float)
    rows = []
    for h in h_grid:
        fp = scalar_fn(params + h * direction)
        fm = scalar_fn(params - h * direction)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError("non-finite function value in finite differences")
        numeric = (fp - fm) / (2.0 * h)
        denom = max(abs(analytic), abs(numeric), 1e-300)
        relerr = abs(numeric - analytic) / denom
        rows.append({"h": h, "numeric": numeric, "analytic": analytic,
                     "relerr": relerr})
    return {"rows": rows, "min_relerr": min(r["relerr"] for r in rows)}


# ---------------------------------------------------------------------------
# literal-sum oracles, O(T^2 m^3); keep m <= 64, T <= 8

def brute_jvp_W(view, B, rho, x, t, Z):
    """Triple sum: sum over t0 and i+j = t-t0-1 of rho^{t-t0} B W^i Z W^j A x_t0.

    Indexing convention W^0 = I; validated against finite differences.
    """
    x = np.asarray(x, dtype=float)
    m = view.W.shape[0]
    powers = [np.eye(m)]
    for _ in range(t):
        powers.append(view.W @ powers[-1])
    out = np.zeros(B.shape[0])
    for t0 in range(1, t):  # input time, 1-indexed
        lag = t - t0        # number of W factors in the chain, >= 1
        for i in range(lag):
            j = lag - 1 - i
            out += rho**lag * (B @ powers[i] @ Z @ powers[j] @ view.A @ x[t0 - 1])
    return out


def brute_jvp_A(view, B, rho, x, t, Z):
    x = np.asarray(x, dtype=float)
    m = view.W.shape[0]
    out = np.zeros(B.shape[0])
    P = np.eye(m)
    for j in range(t):
        out += rho**j * (B @ P @ Z @ x[t - 1 - j])
        P = view.W @ P
    return out


def brute_forward_powers(view, B, rho, x):
    """f_t by explicitly powered matrices (closed-form series oracle)."""
    x = np.asarray(x, dtype=float)
    T = x.shape[0]
    m = view.W.shape[0]
    powers = [np.eye(m)]
    for _ in range(T):
        powers.append(view.W @ powers[-1])
    F = np.zeros((T, B.shape[0]))
    for t in range(1, T + 1):
        for t0 in range(t):
            F[t - 1] += rho**t0 * (B @ powers[t0] @ view.A @ x[t - 1 - t0])
    return F
