"""Stable linear dynamic systems (the teacher) and dataset generation.

The teacher is the recurrence p_t = C p_{t-1} + D x_t with output
y~_t = G p_t, certified stable via max_k ||C^k D|| / rho_C^k.
"""

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .linalg import DimensionError, operator_norm, spectral_radius

INPUT_SPECS = ("iid_gaussian_unit", "iid_uniform_sphere")

# rho(C) == rho_C exactly for the orthogonal teacher construction, so the
# certificate accepts equality up to roundoff.
_RADIUS_SLACK = 1e-9


class ParameterError(ValueError):
    pass


@dataclass
class StableLinearSystem:
    C: np.ndarray       # d_p x d_p state transition
    D: np.ndarray       # d_p x d input map
    G: np.ndarray       # d_y x d_p output map
    rho_C: float
    c_rho: float = 0.0
    opnorm_D: float = 0.0
    opnorm_G: float = 0.0

    @property
    def d_p(self):
        return self.C.shape[0]

    @property
    def d(self):
        return self.D.shape[1]

    @property
    def d_y(self):
        return self.G.shape[0]

    def system_hash(self):
        h = hashlib.sha256()
        for M in (self.C, self.D, self.G):
            h.update(np.ascontiguousarray(M, dtype="<f8").tobytes())
        h.update(repr(float(self.rho_C)).encode())
        return h.hexdigest()


def stability_certificate(sys, horizon):
    """max_{0<=k<=horizon} ||C^k D|| / rho_C^k and a decay-rate flag.

    ok means the spectral radius of C does not exceed rho_C (up to
    roundoff), so the maximum over the certified horizon is the global one.
    """
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    if not (0.0 < sys.rho_C < 1.0):
        raise ParameterError(f"rho_C must lie in (0, 1), got {sys.rho_C}")
    M = sys.D.copy()
    c_est = operator_norm(M)
    for k in range(1, horizon + 1):
        M = sys.C @ M
        c_est = max(c_est, operator_norm(M) / sys.rho_C**k)
    ok = spectral_radius(sys.C) <= sys.rho_C * (1.0 + _RADIUS_SLACK)
    return float(c_est), bool(ok)


def random_stable_system(d_p, d, d_y, rho_C, seed, cert_horizon=200):
    """Teacher with C = rho_C * Q for Haar-orthogonal Q.

    The orthogonal factor makes spectral_radius(C) == rho_C exactly and
    ||C^k D|| == rho_C^k ||D||, so c_rho == ||D||.  D and G are Gaussian,
    rescaled to unit operator norm.
    """
    if not (0.0 < rho_C < 1.0):
        raise ParameterError(f"rho_C must lie in (0, 1), got {rho_C}")
    if min(d_p, d, d_y) < 1:
        raise DimensionError("dimensions must be positive")
    from .linalg import haar_orthogonal

    rng = np.random.default_rng(seed)
    C = rho_C * haar_orthogonal(d_p, rng)
    D = rng.normal(size=(d_p, d))
    D /= operator_norm(D)
    G = rng.normal(size=(d_y, d_p))
    G /= operator_norm(G)
    sys = StableLinearSystem(C=C, D=D, G=G, rho_C=rho_C)
    sys.opnorm_D = operator_norm(D)
    sys.opnorm_G = operator_norm(G)
    sys.c_rho, ok = stability_certificate(sys, cert_horizon)
    assert ok
    return sys


def simulate(sys, inputs):
    """Run the state recurrence over one input sequence.

    Returns (states, outputs) with p_0 = 0.
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 2 or x.shape[1] != sys.d:
        raise DimensionError(f"inputs must be T x {sys.d}, got {x.shape}")
    T = x.shape[0]
    P = np.empty((T, sys.d_p))
    Y = np.empty((T, sys.d_y))
    p = np.zeros(sys.d_p)
    for t in range(T):
        p = sys.C @ p + sys.D @ x[t]
        P[t] = p
        Y[t] = sys.G @ p
    return P, Y


def impulse_response(sys, nlag):
    """Per-lag transfer matrices G C^k D for k = 0..nlag-1."""
    out = []
    M = sys.D.copy()
    for _ in range(nlag):
        out.append(sys.G @ M)
        M = sys.C @ M
    return out


@dataclass
class SequenceDataset:
    inputs: np.ndarray           # K x T x d
    clean_outputs: np.ndarray    # K x T x d_y
    observed_outputs: np.ndarray
    noise_sigma: float
    seed: int
    input_spec: str
    system_hash: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def K(self):
        return self.inputs.shape[0]

    @property
    def T(self):
        return self.inputs.shape[1]

    @property
    def d(self):
        return self.inputs.shape[2]

    @property
    def d_y(self):
        return self.clean_outputs.shape[2]


def _draw_inputs(rng, T, d, input_spec):
    if input_spec == "iid_gaussian_unit":
        x = rng.normal(size=(T, d)) / np.sqrt(d)
        norms = np.linalg.norm(x, axis=1)
        big = norms > 1.0
        x[big] /= norms[big][:, None]
        return x
    if input_spec == "iid_uniform_sphere":
        x = rng.normal(size=(T, d))
        norms = np.linalg.norm(x, axis=1)
        norms[norms == 0.0] = 1.0
        return x / norms[:, None]
    raise ParameterError(f"unknown input_spec {input_spec!r}")


def generate_dataset(sys, input_spec, noise_sigma, T, K, seed):
    """K i.i.d. sequences; inputs in the unit ball, observation noise N(0, sigma^2).

    Each sequence draws from its own sub-stream seeded by (seed, i), so
    generation is independent of iteration order.
    """
    if T <= 0 or K <= 0:
        raise ParameterError("T and K must be positive")
    if noise_sigma < 0:
        raise ParameterError("noise_sigma must be >= 0")
    if input_spec not in INPUT_SPECS:
        raise ParameterError(f"unknown input_spec {input_spec!r}")
    X = np.empty((K, T, sys.d))
    Yc = np.empty((K, T, sys.d_y))
    Yo = np.empty((K, T, sys.d_y))
    for i in range(K):
        rng = np.random.default_rng([int(seed), i])
        x = _draw_inputs(rng, T, sys.d, input_spec)
        _, y = simulate(sys, x)
        X[i] = x
        Yc[i] = y
        if noise_sigma > 0:
            Yo[i] = y + rng.normal(0.0, noise_sigma, size=y.shape)
        else:
            Yo[i] = y
    return SequenceDataset(
        inputs=X,
        clean_outputs=Yc,
        observed_outputs=Yo,
        noise_sigma=float(noise_sigma),
        seed=int(seed),
        input_spec=input_spec,
        system_hash=sys.system_hash(),
    )


# ---------------------------------------------------------------------------
# serialization: directory with meta.json + data.csv

def _fmt(x):
    return "%.17g" % float(x)


def _matrix_to_lists(M):
    return [[_fmt(v) for v in row] for row in np.asarray(M)]


def _matrix_from_lists(rows):
    return np.array([[float(v) for v in row] for row in rows], dtype=float)


def save_dataset(ds, sys, path):
    os.makedirs(path, exist_ok=True)
    meta = {
        "format_version": 1,
        "d_p": sys.d_p,
        "d": sys.d,
        "d_y": sys.d_y,
        "T": ds.T,
        "K": ds.K,
        "noise_sigma": _fmt(ds.noise_sigma),
        "seed": ds.seed,
        "input_spec": ds.input_spec,
        "rho_C": _fmt(sys.rho_C),
        "c_rho": _fmt(sys.c_rho),
        "system_hash": ds.system_hash,
        "system": {
            "C": _matrix_to_lists(sys.C),
            "D": _matrix_to_lists(sys.D),
            "G": _matrix_to_lists(sys.G),
        },
    }
    with open(os.path.join(path, "meta.json"), "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)
        f.write("\n")
    with open(os.path.join(path, "data.csv"), "w", newline="") as f:
        w = csv.writer(f)
        header = (
            ["i", "t"]
            + [f"x{j}" for j in range(ds.d)]
            + [f"y{j}" for j in range(ds.d_y)]
            + [f"ytilde{j}" for j in range(ds.d_y)]
        )
        w.writerow(header)
        for i in range(ds.K):
            for t in range(ds.T):
                row = (
                    [i, t]
                    + [_fmt(v) for v in ds.inputs[i, t]]
                    + [_fmt(v) for v in ds.observed_outputs[i, t]]
                    + [_fmt(v) for v in ds.clean_outputs[i, t]]
                )
                w.writerow(row)


def load_dataset(path):
    """Returns (dataset, system) from a directory written by save_dataset."""
    with open(os.path.join(path, "meta.json")) as f:
        meta = json.load(f)
    sys = StableLinearSystem(
        C=_matrix_from_lists(meta["system"]["C"]),
        D=_matrix_from_lists(meta["system"]["D"]),
        G=_matrix_from_lists(meta["system"]["G"]),
        rho_C=float(meta["rho_C"]),
        c_rho=float(meta["c_rho"]),
    )
    T, K, d, d_y = meta["T"], meta["K"], meta["d"], meta["d_y"]
    X = np.empty((K, T, d))
    Yc = np.empty((K, T, d_y))
    Yo = np.empty((K, T, d_y))
    with open(os.path.join(path, "data.csv"), newline="") as f:
        r = csv.reader(f)
        next(r)
        for row in r:
            i, t = int(row[0]), int(row[1])
            vals = [float(v) for v in row[2:]]
            X[i, t] = vals[:d]
            Yo[i, t] = vals[d : d + d_y]
            Yc[i, t] = vals[d + d_y :]
    ds = SequenceDataset(
        inputs=X,
        clean_outputs=Yc,
        observed_outputs=Yo,
        noise_sigma=float(meta["noise_sigma"]),
        seed=int(meta["seed"]),
        input_spec=meta["input_spec"],
        system_hash=meta["system_hash"],
        meta=meta,
    )
    return ds, sys
