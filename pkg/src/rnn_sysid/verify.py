"""Monte-Carlo verification of the random-matrix, linearization, and
truncation bounds that the SGD analysis rests on.

Each verifier samples fresh initializations from per-trial sub-seeds,
evaluates the claimed inequality on every (trial, grid-point) instance,
and scores the fraction of instances that satisfy it.  Probabilistic
claims are asserted via pass fractions, never per-trial hard assertions.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .linalg import (fit_loglog_slope, frob, matrix_power_opnorm,
                     operator_norm, operator_norm_fast)
from .schedule import rho_1_of_m, theory_schedule
from .student import RescaledView, forward_rescaled, linearized_forward

REPORT_FORMAT_VERSION = 1
DEFAULT_THRESHOLD = 0.95


@dataclass
class LemmaReport:
    lemma_id: str
    m: int
    trials: int
    seed: int
    tau: int = 0
    params: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    observed: dict = field(default_factory=dict)
    bound_formula: str = ""
    pass_fraction: float = 0.0
    threshold: float = DEFAULT_THRESHOLD
    passed: bool = False
    format_version: int = REPORT_FORMAT_VERSION

    def to_dict(self):
        return dict(self.__dict__)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True, default=float)
            f.write("\n")


def _check_entry(flags, extra=None):
    flags = list(flags)
    entry = {
        "n_instances": len(flags),
        "pass_fraction": float(np.mean(flags)) if flags else None,
        "status": "ok" if flags else "skipped",
    }
    if extra:
        entry.update(extra)
    return entry


def _finish(report, asserted):
    """Overall pass fraction = worst asserted check; skipped checks ignored."""
    fractions = [report.checks[name]["pass_fraction"]
                 for name in asserted
                 if report.checks[name]["status"] == "ok"]
    report.pass_fraction = float(min(fractions)) if fractions else 1.0
    report.passed = report.pass_fraction >= report.threshold
    return report


def _log_spaced_ints(lo, hi, n):
    if hi <= lo:
        return [lo]
    ks = np.unique(np.round(np.geomspace(lo, hi, n)).astype(int))
    return [int(k) for k in ks]


def _unit_frob(rng, shape):
    M = rng.normal(size=shape)
    return M / frob(M)


def _unit_vec(rng, n):
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


def sample_W0(rng, m):
    return rng.normal(0.0, np.sqrt(1.0 / m), size=(m, m))


# ---------------------------------------------------------------------------
# spectral bounds on powers of the random initialization


def verify_spectral(m, rho_0=0.9, trials=20, seed=0, grid_points=8,
                    power_iters=6, threshold=DEFAULT_THRESHOLD):
    """Checks on ||W0^k|| and on ||rho^t W^t|| for perturbed W.

    (a) ||W0^k|| <= rho_1^{-k} for k >= L;  (b) <= rho_1^{-L} for k < L;
    (c) <= 2 sqrt(k) for k <= 2L;
    (d) ||rho^t W^t|| <= 2 sqrt(t) rho_0^t for W within Frobenius distance
        omega_0 of W0, with rho = rho_1 rho_0^2.

    Pass fractions are scored per (trial, k) instance: the 2 sqrt(k) bound
    sits exactly on the asymptotic edge at k = 1, so trial-level
    conjunctions would be dominated by that single knife-edge instance.
    """
    rho_1 = rho_1_of_m(m)
    L = max(1, int(np.sqrt(m) / np.log(m)))
    omega_0 = 1.0 / rho_0 - 1.0
    rho = rho_1 * rho_0**2
    ks_c = _log_spaced_ints(1, 2 * L, grid_points)
    ks_ab = sorted(set(ks_c) | {4 * L})
    ks_all = list(ks_ab)

    flags = {"a": [], "b": [], "c": [], "d": []}
    neg_flags = []
    per_trial_c = []
    max_ratio_c = 0.0
    for r in range(trials):
        rng = np.random.default_rng([int(seed), r])
        W0 = sample_W0(rng, m)
        norms = {}
        for k in ks_all:
            if k == 1:
                norms[k] = operator_norm_fast(W0)
            else:
                # the 2 sqrt(k) bound is tightest at small k; beyond 2L the
                # rho_1^{-k} bound is very loose, so taper the iterations
                if k <= 3:
                    iters = power_iters
                elif k <= 2 * L:
                    iters = max(3, power_iters - 2)
                else:
                    iters = 2
                norms[k] = matrix_power_opnorm(W0, k, iters=iters, block=8,
                                               seed=int(1000 + r))
        trial_c_ok = True
        for k in ks_ab:
            if k >= L:
                flags["a"].append(norms[k] <= rho_1 ** (-k))
            else:
                flags["b"].append(norms[k] <= rho_1 ** (-L))
        for k in ks_c:
            ok = norms[k] <= 2.0 * np.sqrt(k)
            flags["c"].append(ok)
            trial_c_ok = trial_c_ok and ok
            max_ratio_c = max(max_ratio_c, norms[k] / (2.0 * np.sqrt(k)))
            # negative control: doubling the matrix must break the bound
            neg_flags.append(2.0 ** k * norms[k] > 2.0 * np.sqrt(k))
        per_trial_c.append(trial_c_ok)
        # perturbed matrix on the boundary of the omega_0 ball
        W = W0 + omega_0 * _unit_frob(rng, (m, m))
        s1 = rho * operator_norm_fast(W)
        for t in ks_c:
            bound = 2.0 * np.sqrt(t) * rho_0**t
            if s1**t <= bound:  # submultiplicative upper bound, never false-passes
                flags["d"].append(True)
            else:
                est = matrix_power_opnorm(W, t, scale=rho, iters=power_iters,
                                          seed=int(2000 + r))
                flags["d"].append(est <= bound)

    report = LemmaReport(
        lemma_id="spectral", m=int(m), trials=int(trials), seed=int(seed),
        params={"rho_0": rho_0, "rho_1": rho_1, "rho": rho, "L": L,
                "omega_0": omega_0, "k_grid": ks_all},
        bound_formula="||W0^k|| <= min(rho_1^{-max(k,L)}, 2 sqrt(k)); "
                      "||rho^t W^t|| <= 2 sqrt(t) rho_0^t",
        threshold=threshold,
    )
    for name in ("a", "b", "c", "d"):
        report.checks[name] = _check_entry(flags[name])
    report.checks["negative_control_c"] = _check_entry(
        neg_flags, {"expected": "fail rate > 0 for scaled input"})
    report.observed = {
        "max_ratio_c": max_ratio_c,
        "trial_level_c_pass_fraction": float(np.mean(per_trial_c)),
        "negative_control_violation_fraction": float(np.mean(neg_flags)),
    }
    return _finish(report, asserted=("a", "b", "c", "d"))


# ---------------------------------------------------------------------------
# norm concentration, readout bounds, cross terms, Gram near-isometry


def verify_concentration(m=4096, tau=8, d=4, d_y=2, trials=20, seed=0,
                         delta=math.exp(-1.0), threshold=DEFAULT_THRESHOLD):
    """Concentration of propagated directions at initialization.

    (a) ||W0^t A0 v|| and sqrt(d_y/m) ||(W0^T)^t B^T v|| in [0.9, 1.1];
    (b) ||B W0^t A0||_op <= sqrt(d log(tau d / delta));
    (c) |u^T (W0^t A0)^T (W0^t' A0) v| <= 24 tau d^2 log m / sqrt(m), t != t';
    (d) ||F^T F - I|| <= log m / sqrt(m) for F = W0^t A0, asserted for
        t <= 1 and recorded for the full range.

    The near-isometry induction that extends (d) past its base case needs
    sqrt(m) > 100 tau log^2 m, far beyond desk widths, and the downstream
    argument only invokes (d) at t = 0, 1; at larger t the deviation grows
    like sqrt(t/m) and overtakes the log m / sqrt(m) level, so the full
    range is reported without assertion.  The analogous B-side cross terms
    are likewise recorded only: the proof's final display supports only
    the A-side scaling.
    """
    flags = {"a": [], "b": [], "c": [], "d": [], "d_all_t": []}
    cross_bound = 24.0 * tau * d**2 * np.log(m) / np.sqrt(m)
    b_bound = np.sqrt(d * np.log(tau * d / delta))
    iso_bound = np.log(m) / np.sqrt(m)
    cross_b_max = 0.0
    cross_a_max = 0.0
    for r in range(trials):
        rng = np.random.default_rng([int(seed), r])
        W0 = sample_W0(rng, m)
        A0 = rng.normal(0.0, np.sqrt(1.0 / m), size=(m, d))
        B = rng.normal(0.0, np.sqrt(1.0 / d_y), size=(d_y, m))
        v2 = _unit_vec(rng, d)
        u2 = _unit_vec(rng, d)
        v1 = _unit_vec(rng, d_y)
        u1 = _unit_vec(rng, d_y)
        Fs = [A0]
        for _ in range(tau - 1):
            Fs.append(W0 @ Fs[-1])
        Ps = [B.T]
        for _ in range(tau - 1):
            Ps.append(W0.T @ Ps[-1])
        for t in range(tau):
            F = Fs[t]
            flags["a"].append(0.9 <= np.linalg.norm(F @ v2) <= 1.1)
            flags["a"].append(
                0.9 <= np.sqrt(d_y / m) * np.linalg.norm(Ps[t] @ v1) <= 1.1)
            flags["b"].append(operator_norm(B @ F) <= b_bound)
            iso_ok = operator_norm(F.T @ F - np.eye(d)) <= iso_bound
            if t <= 1:
                flags["d"].append(iso_ok)
            flags["d_all_t"].append(iso_ok)
        for t in range(tau):
            for tp in range(tau):
                if t == tp:
                    continue
                val = abs(u2 @ (Fs[t].T @ Fs[tp]) @ v2)
                flags["c"].append(val <= cross_bound)
                cross_a_max = max(cross_a_max, val)
                val_b = abs(u1 @ (Ps[t].T @ Ps[tp]) @ v1) * (d_y / m)
                cross_b_max = max(cross_b_max, val_b)

    report = LemmaReport(
        lemma_id="concentration", m=int(m), trials=int(trials), seed=int(seed),
        tau=int(tau),
        params={"d": d, "d_y": d_y, "delta": delta,
                "regime_ok": bool(m > tau**3 * d)},
        bound_formula="norms in [0.9,1.1]; ||B W0^t A0|| <= sqrt(d log(tau d/delta)); "
                      "cross <= 24 tau d^2 log m / sqrt(m); ||F^T F - I|| <= log m/sqrt(m)",
        threshold=threshold,
    )
    for name in ("a", "b", "c", "d", "d_all_t"):
        report.checks[name] = _check_entry(flags[name])
    report.checks["d"]["t_range"] = "0..1 (in-regime base case)"
    report.checks["d_all_t"]["asserted"] = False
    report.observed = {
        "cross_a_max": cross_a_max,
        "cross_a_bound": cross_bound,
        "cross_b_max_scaled": cross_b_max,
        "b_side_asserted": False,
    }
    return _finish(report, asserted=("a", "b", "c", "d"))


# ---------------------------------------------------------------------------
# geometric tails of the rescaled series


def verify_tail(m=256, tau_grid=(1, 2, 4, 8, 16, 30), trials=20, seed=0,
                rho_0=0.9, d=4, d_y=2, threshold=DEFAULT_THRESHOLD):
    """Tail sums of the rescaled series against the explicit 4- and
    32-constant bounds, with rho = rho_1 rho_0^2 and W perturbed to the
    boundary of the omega_0 ball.

    single: || sum_{t >= tau} rho^t B W^t Q Z_t || <= 4 sqrt(m) tau rho_0^tau
            / (1-rho_0)^2 ||Q||
    double: || sum_{t0 >= tau} sum_{t1+t2=t0} rho^t0 B W^{t1-1} Q2 W^{t2-1}
            A0 Z_t0 || <= 32 sqrt(m) tau^2 rho_0^tau / (1-rho_0)^3 ||Q2||
    """
    tau_grid = sorted(tau_grid)
    rho_1 = rho_1_of_m(m)
    rho = rho_1 * rho_0**2
    omega_0 = 1.0 / rho_0 - 1.0
    N = max(tau_grid) + 40
    flags = {"single": [], "double": [], "monotone": []}
    loose_max = 0.0
    for r in range(trials):
        rng = np.random.default_rng([int(seed), r])
        W0 = sample_W0(rng, m)
        A0 = rng.normal(0.0, np.sqrt(1.0 / m), size=(m, d))
        B = rng.normal(0.0, np.sqrt(1.0 / d_y), size=(d_y, m))
        W = W0 + omega_0 * _unit_frob(rng, (m, m))
        Q = rng.normal(size=(m, d))
        Q /= operator_norm(Q)
        Q2 = rng.normal(size=(m, m))
        Q2 /= operator_norm(Q2)
        Z = np.array([_unit_vec(rng, d) for _ in range(N + 1)])

        # single tail: backward Horner from the cap, then apply (rho W)^tau
        singles = {}
        for tau in tau_grid:
            h = np.zeros(m)
            for t in range(N, tau - 1, -1):
                h = Q @ Z[t] + rho * (W @ h)
            v = h
            for _ in range(tau):
                v = rho * (W @ v)
            singles[tau] = np.linalg.norm(B @ v)

        # double tail: term-by-term with interleaved Horner accumulators
        doubles = {}
        vecs = {}
        for t0 in range(2, N + 1):
            a = A0 @ Z[t0]
            c = np.zeros(m)
            wa = a
            for _ in range(t0 - 1):
                c = W @ c + Q2 @ wa
                wa = W @ wa
            vecs[t0] = rho**t0 * (B @ c)
        for tau in tau_grid:
            s = np.zeros(d_y)
            for t0 in range(max(2, tau), N + 1):
                s += vecs[t0]
            doubles[tau] = np.linalg.norm(s)

        prev_s, prev_d = np.inf, np.inf
        for tau in tau_grid:
            b1 = 4.0 * np.sqrt(m) * tau * rho_0**tau / (1.0 - rho_0) ** 2
            b2 = 32.0 * np.sqrt(m) * tau**2 * rho_0**tau / (1.0 - rho_0) ** 3
            flags["single"].append(singles[tau] <= b1)
            flags["double"].append(doubles[tau] <= b2)
            loose_max = max(loose_max, singles[tau] / b1, doubles[tau] / b2)
            flags["monotone"].append(singles[tau] <= prev_s * (1 + 1e-12)
                                     and doubles[tau] <= prev_d * (1 + 1e-12))
            prev_s, prev_d = singles[tau], doubles[tau]

    report = LemmaReport(
        lemma_id="tail", m=int(m), trials=int(trials), seed=int(seed),
        tau=int(max(tau_grid)),
        params={"rho_0": rho_0, "rho": rho, "tau_grid": list(tau_grid),
                "d": d, "d_y": d_y, "series_cap": N},
        bound_formula="4 sqrt(m) tau rho_0^tau/(1-rho_0)^2; "
                      "32 sqrt(m) tau^2 rho_0^tau/(1-rho_0)^3",
        threshold=threshold,
    )
    for name in ("single", "double", "monotone"):
        report.checks[name] = _check_entry(flags[name])
    report.observed = {"max_tail_to_bound_ratio": loose_max}
    return _finish(report, asserted=("single", "double", "monotone"))


# ---------------------------------------------------------------------------
# linearization residual


def verify_linearization(m=1024, omega_grid=(1e-3, 3e-3, 1e-2, 3e-2),
                         trials=20, seed=0, rho_0=0.9, T=12, d=4, d_y=2,
                         threshold=DEFAULT_THRESHOLD):
    """Residual of the first-order expansion of f_t around initialization.

    Bound 768 sqrt(m) omega^2 / (1-rho_0)^5 per instance; the log-log slope
    of residual vs omega should be 2 (checked per trial when the grid has
    at least two points).  Uses the practical decay rho = rho_0.
    """
    omega_grid = sorted(omega_grid)
    omega_0 = 1.0 / rho_0 - 1.0
    rho = rho_0
    flags = {"bound": [], "slope": []}
    slopes = []
    for r in range(trials):
        rng = np.random.default_rng([int(seed), r])
        W0 = sample_W0(rng, m)
        A0 = rng.normal(0.0, np.sqrt(1.0 / m), size=(m, d))
        B = rng.normal(0.0, np.sqrt(1.0 / d_y), size=(d_y, m))
        U = _unit_frob(rng, (m, m))
        V = _unit_frob(rng, (m, d))
        x = rng.normal(size=(T, d)) / np.sqrt(d)
        residuals = []
        for omega in omega_grid:
            if omega > omega_0:
                raise ValueError(f"omega {omega} exceeds omega_0 {omega_0}")
            W = W0 + omega * U
            A = A0 + omega * V
            view = RescaledView(W=W, A=A, W0=W0, A0=A0)
            F = forward_rescaled(view, B, rho, x)
            Flin = linearized_forward(W0, A0, W, A, B, rho, x)
            res = float(np.max(np.linalg.norm(F - Flin, axis=1)))
            residuals.append(res)
            bound = 768.0 * np.sqrt(m) * omega**2 / (1.0 - rho_0) ** 5
            flags["bound"].append(res <= bound)
        if len(omega_grid) >= 2 and all(v > 0 for v in residuals):
            slope = fit_loglog_slope(omega_grid, residuals)
            slopes.append(slope)
            flags["slope"].append(abs(slope - 2.0) <= 0.2)

    report = LemmaReport(
        lemma_id="linearization", m=int(m), trials=int(trials), seed=int(seed),
        params={"rho_0": rho_0, "rho": rho, "omega_grid": list(omega_grid),
                "T": T, "d": d, "d_y": d_y},
        bound_formula="768 sqrt(m) omega^2 / (1-rho_0)^5; slope 2.0 +- 0.2",
        threshold=threshold,
    )
    for name in ("bound", "slope"):
        report.checks[name] = _check_entry(flags[name])
    report.observed = {"slopes": slopes,
                       "mean_slope": float(np.mean(slopes)) if slopes else None}
    return _finish(report, asserted=("bound", "slope"))


# ---------------------------------------------------------------------------
# truncation error of the linearized series


def verify_truncation(m=1024, tau_grid=(4, 8, 12, 16, 20, 24, 28, 32),
                      trials=20, seed=0, rho_0=0.9, d=4, d_y=2,
                      omega=0.05, epsilon=0.05, delta=math.exp(-1.0),
                      threshold=DEFAULT_THRESHOLD):
    """max_t ||f^lin_t - f^{lin,tau}_t|| across a tau grid.

    Asserts the 8 sqrt(m) tau rho_0^tau / (1-rho_0)^3 bound and the
    geometric decay slope log(rho_0) +- 20% at the practical rate
    rho = rho_0, plus the schedule-level check: with tau = T_max and the
    theory rate rho = rho_1 rho_0^2, the error is <= epsilon / b.
    """
    tau_grid = sorted(tau_grid)
    T = max(tau_grid) + 16
    flags = {"bound": [], "slope_per_trial": [], "app": []}
    slopes = []
    err_rows = []
    sched = theory_schedule(epsilon, delta, rho_0, c_rho=1.0, m=m)
    T_app = sched.T_max + 24
    for r in range(trials):
        rng = np.random.default_rng([int(seed), r])
        W0 = sample_W0(rng, m)
        A0 = rng.normal(0.0, np.sqrt(1.0 / m), size=(m, d))
        B = rng.normal(0.0, np.sqrt(1.0 / d_y), size=(d_y, m))
        W = W0 + omega * _unit_frob(rng, (m, m))
        A = A0 + omega * _unit_frob(rng, (m, d))
        x = rng.normal(size=(T, d)) / np.sqrt(d)
        Flin = linearized_forward(W0, A0, W, A, B, rho_0, x)
        errs = []
        for tau in tau_grid:
            Ftau = linearized_forward(W0, A0, W, A, B, rho_0, x, tau=tau)
            err = float(np.max(np.linalg.norm(Flin - Ftau, axis=1)))
            errs.append(err)
            bound = 8.0 * np.sqrt(m) * tau * rho_0**tau / (1.0 - rho_0) ** 3
            flags["bound"].append(err <= bound)
        err_rows.append(errs)
        if len(tau_grid) >= 2 and all(v > 0 for v in errs):
            # log err vs tau is linear with slope log(rho_0)
            slope = float(np.polyfit(tau_grid, np.log(errs), 1)[0])
            slopes.append(slope)
            flags["slope_per_trial"].append(abs(slope - np.log(rho_0))
                                            <= 0.2 * abs(np.log(rho_0)))
        # Eq.-level approximation check at the schedule's own rate
        x_app = rng.normal(size=(T_app, d)) / np.sqrt(d)
        Fl = linearized_forward(W0, A0, W, A, B, sched.rho, x_app)
        Ft = linearized_forward(W0, A0, W, A, B, sched.rho, x_app,
                                tau=sched.T_max)
        err_app = float(np.max(np.linalg.norm(Fl - Ft, axis=1)))
        flags["app"].append(err_app <= sched.epsilon / sched.b)

    report = LemmaReport(
        lemma_id="truncation", m=int(m), trials=int(trials), seed=int(seed),
        tau=int(max(tau_grid)),
        params={"rho_0": rho_0, "tau_grid": list(tau_grid), "omega": omega,
                "T": T, "d": d, "d_y": d_y, "epsilon": epsilon, "delta": delta,
                "T_max": sched.T_max, "b": sched.b, "rho_theory": sched.rho},
        bound_formula="8 sqrt(m) tau rho_0^tau/(1-rho_0)^3; slope log(rho_0) "
                      "+- 20%; error at tau=T_max <= epsilon/b",
        threshold=threshold,
    )
    # The asserted slope is fit on the per-tau median error across trials;
    # single-trial slopes wobble ~0.015 around it and are recorded only.
    med_errs = np.median(np.asarray(err_rows), axis=0)
    pooled_slope = float(np.polyfit(tau_grid, np.log(med_errs), 1)[0])
    flags["slope"] = [abs(pooled_slope - np.log(rho_0))
                      <= 0.2 * abs(np.log(rho_0))]
    for name in ("bound", "slope", "slope_per_trial", "app"):
        report.checks[name] = _check_entry(flags[name])
    report.checks["slope_per_trial"]["asserted"] = False
    report.observed = {"slopes": slopes,
                       "pooled_slope": pooled_slope,
                       "mean_slope": float(np.mean(slopes)) if slopes else None,
                       "target_slope": float(np.log(rho_0))}
    return _finish(report, asserted=("bound", "slope", "app"))


ALL_LEMMAS = {
    "spectral": verify_spectral,
    "concentration": verify_concentration,
    "tail": verify_tail,
    "linearization": verify_linearization,
    "truncation": verify_truncation,
}


def run_lemma(name, **kwargs):
    if name not in ALL_LEMMAS:
        raise ValueError(f"unknown lemma {name!r}; choose from {sorted(ALL_LEMMAS)}")
    return ALL_LEMMAS[name](**kwargs)
