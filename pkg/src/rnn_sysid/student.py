"""Over-parameterized linear RNN student.

Hidden recurrence h_t = W~ h_{t-1} + A x_t with readout f~_t = B h_t.
Most analysis-facing code works in the rescaled parameterization
W = W~ / rho, where f_t = sum_{t0} rho^t0 B W^t0 A x_{t-t0}; the rescaled
recurrence g_t = rho W g_{t-1} + A x_t evaluates the same series without
explicit matrix powers.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .linalg import DimensionError, frob
from .teacher import ParameterError


@dataclass
class StudentRNN:
    W_tilde: np.ndarray   # m x m
    A: np.ndarray         # m x d
    B: np.ndarray         # d_y x m, frozen after init
    rho: float
    seed: int = 0
    step: int = 0

    @property
    def m(self):
        return self.W_tilde.shape[0]

    @property
    def d(self):
        return self.A.shape[1]

    @property
    def d_y(self):
        return self.B.shape[0]


@dataclass
class RescaledView:
    """W = W_tilde / rho plus the frozen initialization anchors.

    dist_W / dist_A cache the Frobenius distances to the anchors; they are
    refreshed by set_params so radius queries are O(1).
    """

    W: np.ndarray
    A: np.ndarray
    W0: np.ndarray = None
    A0: np.ndarray = None
    dist_W: float = 0.0
    dist_A: float = 0.0

    def set_params(self, W, A):
        self.W = W
        self.A = A
        self.dist_W = frob(W - self.W0)
        self.dist_A = frob(A - self.A0)


def init_student(m, d, d_y, rho, seed):
    """W~ ~ N(0, rho/m), A ~ N(0, 1/m), B ~ N(0, 1/d_y), all i.i.d."""
    if not (0.0 < rho < 1.0):
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")
    if m < 1 or d < 1 or d_y < 1:
        raise DimensionError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    W_tilde = rng.normal(0.0, np.sqrt(rho / m), size=(m, m))
    A = rng.normal(0.0, np.sqrt(1.0 / m), size=(m, d))
    B = rng.normal(0.0, np.sqrt(1.0 / d_y), size=(d_y, m))
    return StudentRNN(W_tilde=W_tilde, A=A, B=B, rho=float(rho), seed=int(seed))


def rescaled_view(rnn):
    view = RescaledView(W=rnn.W_tilde / rnn.rho, A=rnn.A.copy())
    view.W0 = view.W.copy()
    view.A0 = view.A.copy()
    return view


def _check_inputs(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != d:
        raise DimensionError(f"inputs must be T x {d}, got {x.shape}")
    return x


def forward(rnn, x):
    """Exact recurrence in the raw parameterization; returns (hidden, outputs)."""
    x = _check_inputs(x, rnn.d)
    T = x.shape[0]
    H = np.empty((T, rnn.m))
    F = np.empty((T, rnn.d_y))
    h = np.zeros(rnn.m)
    for t in range(T):
        h = rnn.W_tilde @ h + rnn.A @ x[t]
        H[t] = h
        F[t] = rnn.B @ h
    return H, F


def forward_rescaled(view, B, rho, x, return_states=False):
    """f_t(W, A) via the rescaled recurrence g_t = rho W g_{t-1} + A x_t."""
    x = _check_inputs(x, view.A.shape[1])
    T = x.shape[0]
    m = view.W.shape[0]
    G = np.empty((T, m))
    F = np.empty((T, B.shape[0]))
    g = np.zeros(m)
    for t in range(T):
        g = rho * (view.W @ g) + view.A @ x[t]
        G[t] = g
        F[t] = B @ g
    if return_states:
        return G, F
    return F


def _lag_ladder(W, A, rho, tau):
    """M_j = rho^j W^j A for j = 0..tau, built by repeated multiplication."""
    ladder = [A]
    M = A
    for _ in range(tau):
        M = rho * (W @ M)
        ladder.append(M)
    return ladder


def truncated_forward(view, B, rho, x, tau):
    """f_t^tau: the rescaled series cut after lag tau (missing inputs are 0)."""
    if tau < 0:
        raise ParameterError("tau must be >= 0")
    x = _check_inputs(x, view.A.shape[1])
    T = x.shape[0]
    ladder = _lag_ladder(view.W, view.A, rho, min(tau, T - 1))
    N = [B @ M for M in ladder]  # d_y x d per lag
    F = np.zeros((T, B.shape[0]))
    for t in range(1, T + 1):
        for j in range(min(tau, t - 1) + 1):
            F[t - 1] += N[j] @ x[t - 1 - j]
    return F


def linearized_forward(W0, A0, W, A, B, rho, x, tau=None):
    """First-order expansion of f_t (or f_t^tau) around (W0, A0).

    The directional terms are evaluated with tangent recurrences, so no
    m x m gradient is ever materialized.
    """
    x = _check_inputs(x, A0.shape[1])
    dW = W - W0
    dA = A - A0
    T = x.shape[0]
    m = W0.shape[0]
    if tau is None:
        # u_t carries both directional terms through the same recurrence:
        # u_t = rho W0 u_{t-1} + rho dW g_{t-1} + dA x_t, f^lin = B (g_t + u_t)
        F = np.empty((T, B.shape[0]))
        g = np.zeros(m)
        u = np.zeros(m)
        for t in range(T):
            u = rho * (W0 @ u) + rho * (dW @ g) + dA @ x[t]
            g = rho * (W0 @ g) + A0 @ x[t]
            F[t] = B @ (g + u)
        return F
    if tau < 0:
        raise ParameterError("tau must be >= 0")
    # truncated variant via per-lag ladders:
    #   M_j = rho^j W0^j A0, MA_j the same with dA in place of A0,
    #   S_j = rho W0 S_{j-1} + rho dW M_{j-1}  (W-directional term at lag j)
    tau_eff = min(tau, T - 1)
    M = A0
    MA = dA
    S = np.zeros((m, A0.shape[1]))
    N = [B @ (M + MA + S)]
    for _ in range(tau_eff):
        S = rho * (W0 @ S) + rho * (dW @ M)
        M = rho * (W0 @ M)
        MA = rho * (W0 @ MA)
        N.append(B @ (M + MA + S))
    F = np.zeros((T, B.shape[0]))
    for t in range(1, T + 1):
        for j in range(min(tau, t - 1) + 1):
            F[t - 1] += N[j] @ x[t - 1 - j]
    return F


# ---------------------------------------------------------------------------
# checkpoint serialization: checkpoint.json + one .bin blob per matrix

_BLOBS = ("W_tilde", "A", "B", "W0", "A0")


def save_checkpoint(rnn, view, path):
    os.makedirs(path, exist_ok=True)
    mats = {
        "W_tilde": rnn.W_tilde,
        "A": rnn.A,
        "B": rnn.B,
        "W0": view.W0,
        "A0": view.A0,
    }
    header = {
        "format_version": 1,
        "m": rnn.m,
        "d": rnn.d,
        "d_y": rnn.d_y,
        "rho": "%.17g" % rnn.rho,
        "seed": rnn.seed,
        "step": rnn.step,
        "blobs": {},
    }
    for name in _BLOBS:
        M = np.ascontiguousarray(mats[name], dtype="<f8")
        fname = name + ".bin"
        header["blobs"][name] = {
            "file": fname,
            "shape": list(M.shape),
            "length": int(M.size),
        }
        M.tofile(os.path.join(path, fname))
    with open(os.path.join(path, "checkpoint.json"), "w") as f:
        json.dump(header, f, indent=1, sort_keys=True)
        f.write("\n")


def load_checkpoint(path):
    """Returns (rnn, view) with anchors restored from the saved blobs."""
    with open(os.path.join(path, "checkpoint.json")) as f:
        header = json.load(f)
    mats = {}
    for name in _BLOBS:
        spec = header["blobs"][name]
        M = np.fromfile(os.path.join(path, spec["file"]), dtype="<f8")
        if M.size != spec["length"]:
            raise IOError(f"blob {name} has {M.size} values, expected {spec['length']}")
        mats[name] = M.reshape(spec["shape"])
    rho = float(header["rho"])
    rnn = StudentRNN(
        W_tilde=mats["W_tilde"],
        A=mats["A"],
        B=mats["B"],
        rho=rho,
        seed=int(header["seed"]),
        step=int(header["step"]),
    )
    view = RescaledView(W=rnn.W_tilde / rho, A=rnn.A.copy())
    view.W0 = mats["W0"]
    view.A0 = mats["A0"]
    view.set_params(view.W, view.A)
    return rnn, view
