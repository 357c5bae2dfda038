"""Profile estimating equations for H(.; beta) and the score-type equation for beta.

With beta fixed, H is the step function solving, at each distinct event time t_k,

    sum_i R_i(t_k) r(t_k, Y_i, delta_i) [Lambda{Z_i'beta + H(t_k)} - Lambda{Z_i'beta + H(t_{k-1})}] = d_k

starting from H(t_0) = -inf. Plugging H back in gives U(beta), solved by damped
Newton with a central-difference Jacobian.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve
from scipy.optimize import brentq
from scipy.special import logsumexp

from .config import SolverOptions
from .errors import (
    BracketFailureError,
    InvalidArgumentError,
    NumericalError,
    SingularRiskSetError,
)
from .links import LinkKind, TransformationLink
from .survival import Cohort, StepSurvivor, WeightScale, km_censoring_survivor, risk_weights

# Jacobians with a larger condition number are flagged as near-singular
COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class MonotoneStep:
    """Non-decreasing step function with jumps at the distinct event times; -inf before t_1."""
    event_times: np.ndarray
    values: np.ndarray

    def __call__(self, t: Any) -> Any:
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.event_times, t, side="right")
        out = np.where(idx == 0, -np.inf, self.values[np.maximum(idx - 1, 0)])
        return float(out) if out.ndim == 0 else out

    def pairs(self) -> List[Tuple[float, float]]:
        return [(float(t), float(h)) for t, h in zip(self.event_times, self.values)]


@dataclass
class FitResult:
    beta: np.ndarray
    H: MonotoneStep
    score_norm: float
    iterations: int
    converged: bool
    diagnostics: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class RiskDesign:
    """Everything in the estimating equations that does not depend on covariates or beta.

    The weight matrix is kept only for subjects with some positive weight: every
    subject at risk at an event time under delayed entry, the failures under the
    length-bias weightings.
    """
    cohort: Cohort
    survivor: Optional[StepSurvivor]   # None under delayed entry
    scale: WeightScale
    times: np.ndarray        # t_1 < ... < t_K
    counts: np.ndarray       # d_k
    rows: np.ndarray         # subjects with a nonzero row of weights
    G: np.ndarray            # R_i(t_k) r(t_k, Y_i, delta_i), shape (len(rows), K)

    @classmethod
    def build(cls, cohort: Cohort, scale: WeightScale = WeightScale.DELAYED) -> "RiskDesign":
        scale = WeightScale(scale)
        surv = None if scale is WeightScale.DELAYED else km_censoring_survivor(cohort)
        times, counts = cohort.event_times, cohort.event_counts
        G = risk_weights(cohort, surv, times, scale)
        rows = np.flatnonzero(G.any(axis=1))
        Gr = G[rows]
        empty = np.flatnonzero(Gr.sum(axis=0) <= 0)
        if empty.size:
            raise SingularRiskSetError(float(times[empty[0]]))
        Gr.flags.writeable = False
        return cls(cohort, surv, scale, times, counts, rows, Gr)


def _design(cohort: Cohort, options: SolverOptions, design: Optional[RiskDesign]) -> RiskDesign:
    if design is not None:
        if design.cohort is not cohort:
            raise InvalidArgumentError("risk design was built for a different cohort")
        return design
    return RiskDesign.build(cohort, options.weight_scale)


def _covariates(Z: Any, cohort: Cohort) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[0] != cohort.n:
        raise InvalidArgumentError(f"covariate matrix has {Z.shape[0]} rows, cohort has {cohort.n}")
    return Z


def _coef(beta: Any, p: int) -> np.ndarray:
    b = np.atleast_1d(np.asarray(beta, dtype=float))
    if b.shape != (p,):
        raise InvalidArgumentError(f"beta has length {b.size}, covariates have p={p}")
    if not np.all(np.isfinite(b)):
        raise InvalidArgumentError("beta must be finite")
    return b


# ---------- profile step function ----------

def _profile_ph(eta: np.ndarray, design: RiskDesign) -> np.ndarray:
    # exp H(t_k) = exp H(t_{k-1}) + d_k / sum_i g_ik exp(eta_i), accumulated in log space
    log_s = logsumexp(eta[:, None], b=design.G, axis=0)
    return np.logaddexp.accumulate(np.log(design.counts) - log_s)


def _bracket(f, start: float, lower_known: bool, max_doublings: int) -> Tuple[float, float]:
    """Find lo < hi with f(lo) < 0 <= f(hi) by doubling steps away from ``start``."""
    step = 1.0
    if lower_known:
        lo = start
        for _ in range(max_doublings):
            hi = start + step
            if f(hi) >= 0:
                return lo, hi
            lo, step = hi, 2 * step
        raise BracketFailureError(f"no upper bracket after {max_doublings} doublings from {start:g}")
    if f(start) >= 0:
        hi = start
        for _ in range(max_doublings):
            lo = start - step
            if f(lo) < 0:
                return lo, hi
            hi, step = lo, 2 * step
        raise BracketFailureError(f"no lower bracket after {max_doublings} doublings from {start:g}")
    return _bracket(f, start, True, max_doublings)


def _profile_general(
    eta: np.ndarray, design: RiskDesign, link: TransformationLink, options: SolverOptions
) -> np.ndarray:
    K = design.times.size
    H = np.empty(K)
    prev = -np.inf
    for k in range(K):
        g = design.G[:, k]
        act = g > 0
        ga, ea = g[act], eta[act]
        base = 0.0 if prev == -np.inf else float(ga @ link.cum_hazard(ea + prev))
        target = base + design.counts[k]

        def f(h: float) -> float:
            return float(ga @ link.cum_hazard(ea + h)) - target

        if prev == -np.inf:
            lo, hi = _bracket(f, -float(ea.max()), False, options.max_doublings)
        else:
            lo, hi = _bracket(f, prev, True, options.max_doublings)
        if f(hi) == 0:
            H[k] = hi
        else:
            H[k] = brentq(f, lo, hi, xtol=options.root_xtol, maxiter=options.root_maxiter,
                          disp=False)
        # round-off must not undo the ordering the recursion guarantees
        prev = H[k] = max(H[k], prev)
    return H


def profile_H(
    Z: Any,
    cohort: Cohort,
    link: TransformationLink,
    beta: Any,
    options: Optional[SolverOptions] = None,
    design: Optional[RiskDesign] = None,
) -> MonotoneStep:
    options = options or SolverOptions()
    design = _design(cohort, options, design)
    Z = _covariates(Z, cohort)
    b = _coef(beta, Z.shape[1])
    eta = Z[design.rows] @ b
    if link.kind is LinkKind.PH:
        values = _profile_ph(eta, design)
    else:
        values = _profile_general(eta, design, link, options)
    return MonotoneStep(design.times, values)


def _increments(eta: np.ndarray, H: np.ndarray, link: TransformationLink) -> np.ndarray:
    L = link.cum_hazard(eta[:, None] + H[None, :])
    return np.diff(L, axis=1, prepend=0.0)


def step_residuals(
    Z: Any,
    cohort: Cohort,
    link: TransformationLink,
    beta: Any,
    H: MonotoneStep,
    options: Optional[SolverOptions] = None,
    design: Optional[RiskDesign] = None,
) -> np.ndarray:
    """Left minus right side of the H equation at every event time."""
    options = options or SolverOptions()
    design = _design(cohort, options, design)
    Z = _covariates(Z, cohort)
    eta = Z[design.rows] @ _coef(beta, Z.shape[1])
    return (design.G * _increments(eta, H.values, link)).sum(axis=0) - design.counts


def score(
    Z: Any,
    cohort: Cohort,
    link: TransformationLink,
    beta: Any,
    H: MonotoneStep,
    options: Optional[SolverOptions] = None,
    design: Optional[RiskDesign] = None,
) -> np.ndarray:
    """U(beta) = sum_i sum_k Z_i [dN_i(t_k) - R_i(t_k) r(t_k, Y_i, delta_i) dLambda_ik]."""
    options = options or SolverOptions()
    design = _design(cohort, options, design)
    Z = _covariates(Z, cohort)
    b = _coef(beta, Z.shape[1])
    if H.values.shape != design.times.shape:
        raise InvalidArgumentError(
            f"H has {H.values.size} jumps, cohort has {design.times.size} event times"
        )
    Zr = Z[design.rows]
    compensator = (design.G * _increments(Zr @ b, H.values, link)).sum(axis=1)
    return Z.T @ cohort.status.astype(float) - Zr.T @ compensator


# ---------- beta solver ----------

def _evaluate(Z, cohort, link, beta, options, design) -> Tuple[np.ndarray, MonotoneStep]:
    H = profile_H(Z, cohort, link, beta, options, design)
    return score(Z, cohort, link, beta, H, options, design), H


def _jacobian(Z, cohort, link, beta, options, design) -> np.ndarray:
    p = beta.size
    J = np.empty((p, p))
    for j in range(p):
        h = options.fd_step * (1.0 + abs(beta[j]))
        e = np.zeros(p)
        e[j] = h
        up, _ = _evaluate(Z, cohort, link, beta + e, options, design)
        dn, _ = _evaluate(Z, cohort, link, beta - e, options, design)
        J[:, j] = (up - dn) / (2 * h)
    return J


def _cond(J: np.ndarray) -> float:
    with np.errstate(all="ignore"):
        c = np.linalg.cond(J)
    return float(c) if np.isfinite(c) else float("inf")


def solve_beta(
    Z: Any,
    cohort: Cohort,
    link: TransformationLink,
    options: Optional[SolverOptions] = None,
    design: Optional[RiskDesign] = None,
) -> FitResult:
    options = options or SolverOptions()
    design = _design(cohort, options, design)
    Z = _covariates(Z, cohort)
    p = Z.shape[1]
    beta = np.zeros(p) if options.beta_init is None else _coef(options.beta_init, p).copy()

    U, H = _evaluate(Z, cohort, link, beta, options, design)
    norm = float(np.max(np.abs(U)))
    diag: Dict[str, Any] = {"ridge_steps": 0, "halvings": 0, "stalled": False, "jacobian_cond": None}
    it = 0
    J = None
    while norm > options.tol and it < options.max_iter:
        J = _jacobian(Z, cohort, link, beta, options, design)
        cond = _cond(J)
        diag["jacobian_cond"] = cond
        if cond > COND_LIMIT:
            J = J + options.ridge * np.eye(p)
            diag["ridge_steps"] += 1
        try:
            step = solve(J, -U)
        except LinAlgError:
            step = solve(J + options.ridge * np.eye(p), -U)
            diag["ridge_steps"] += 1
        if not np.all(np.isfinite(step)):
            diag["stalled"] = True
            break
        t = 1.0
        accepted = False
        for _ in range(options.max_halvings + 1):
            cand = beta + t * step
            try:
                Uc, Hc = _evaluate(Z, cohort, link, cand, options, design)
                nc = float(np.max(np.abs(Uc)))
            except (NumericalError, InvalidArgumentError, FloatingPointError):
                nc = np.inf
            if np.isfinite(nc) and nc < norm:
                beta, U, H, norm = cand, Uc, Hc, nc
                accepted = True
                break
            t /= 2
            diag["halvings"] += 1
        it += 1
        if not accepted:
            diag["stalled"] = True
            break

    converged = norm <= options.tol
    if J is None:
        J = _jacobian(Z, cohort, link, beta, options, design)
        diag["jacobian_cond"] = _cond(J)
    diag["near_singular"] = bool(diag["jacobian_cond"] is None or diag["jacobian_cond"] > COND_LIMIT)
    return FitResult(beta=beta, H=H, score_norm=norm, iterations=it, converged=converged,
                     diagnostics=diag)


def fit_naive(
    cohort: Cohort,
    link: TransformationLink,
    options: Optional[SolverOptions] = None,
    design: Optional[RiskDesign] = None,
) -> FitResult:
    """Estimator that plugs the error-prone surrogate W in place of X."""
    return solve_beta(cohort.W, cohort, link, options, design)


def fit_true(
    cohort: Cohort,
    link: TransformationLink,
    options: Optional[SolverOptions] = None,
    design: Optional[RiskDesign] = None,
) -> FitResult:
    """Baseline fit on the true covariates (simulated cohorts only)."""
    if cohort.X is None:
        raise InvalidArgumentError("cohort carries no true covariates")
    return solve_beta(cohort.X, cohort, link, options, design)
