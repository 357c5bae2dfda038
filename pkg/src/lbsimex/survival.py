"""Observed prevalent-cohort data, the censoring Kaplan-Meier and the length-bias weights."""
from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from .errors import (
    CohortValidationError,
    DegenerateInputError,
    DegenerateWeightError,
    InvalidArgumentError,
    Violation,
)


class WeightScale(str, Enum):
    """Risk-set weighting R_i(t) r(t, Y_i, delta_i) in the estimating equations.

    ``delayed`` gives every subject unit weight over A <= t <= Y. The two
    length-bias weightings need the censoring Kaplan-Meier and assume
    stationary truncation.
    """
    DELAYED = "delayed"     # r = 1, risk set A <= t <= Y
    RESIDUAL = "residual"   # delta w(t - A) / w(Y - A), risk set A <= t <= Y
    ONSET = "onset"         # delta w(t) / w(Y), risk set t <= Y


class SubjectRecord(BaseModel):
    trunc_time: float
    obs_time: float
    status: int
    surrogate: List[float]
    truth: Optional[List[float]] = None
    id: Optional[str] = Field(default=None)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Cohort:
    trunc_time: np.ndarray          # A, shape (n,)
    obs_time: np.ndarray            # Y, shape (n,)
    status: np.ndarray              # delta in {0, 1}, shape (n,)
    W: np.ndarray                   # surrogate covariates, shape (n, p)
    X: Optional[np.ndarray] = None  # true covariates (simulation only)
    ids: Optional[Sequence[str]] = None
    _events: Any = field(default=None, repr=False, compare=False)

    @classmethod
    def from_arrays(
        cls,
        trunc_time: Any,
        obs_time: Any,
        status: Any,
        W: Any,
        X: Any = None,
        ids: Optional[Sequence[str]] = None,
    ) -> "Cohort":
        A = np.asarray(trunc_time, dtype=float).ravel()
        Y = np.asarray(obs_time, dtype=float).ravel()
        d_raw = np.asarray(status, dtype=float).ravel()
        Wm = np.asarray(W, dtype=float)
        if Wm.ndim == 1:
            Wm = Wm[:, None]
        Xm = None
        if X is not None:
            Xm = np.asarray(X, dtype=float)
            if Xm.ndim == 1:
                Xm = Xm[:, None]
        violations = _check_arrays(A, Y, d_raw, Wm, Xm)
        if violations:
            raise CohortValidationError(violations)
        return cls(
            trunc_time=_frozen(A.copy()),
            obs_time=_frozen(Y.copy()),
            status=_frozen(d_raw.astype(np.int8)),
            W=_frozen(Wm.copy()),
            X=None if Xm is None else _frozen(Xm.copy()),
            ids=None if ids is None else list(ids),
        )

    # ---------- derived accessors ----------

    @property
    def n(self) -> int:
        return int(self.obs_time.shape[0])

    @property
    def p(self) -> int:
        return int(self.W.shape[1])

    @property
    def residual(self) -> np.ndarray:
        """V = Y - A, the time from recruitment to exit."""
        return self.obs_time - self.trunc_time

    @property
    def n_events(self) -> int:
        return int(self.status.sum())

    def _event_table(self):
        if self._events is None:
            t, d = np.unique(self.obs_time[self.status == 1], return_counts=True)
            object.__setattr__(self, "_events", (_frozen(t), _frozen(d.astype(float))))
        return self._events

    @property
    def event_times(self) -> np.ndarray:
        """Distinct uncensored times t_1 < ... < t_K."""
        return self._event_table()[0]

    @property
    def event_counts(self) -> np.ndarray:
        """Multiplicities d_k of the event times."""
        return self._event_table()[1]

    def at_risk(self, t: float) -> np.ndarray:
        """R_i(t) = I(A_i <= t <= Y_i)."""
        return (self.trunc_time <= t) & (t <= self.obs_time)

    def counting(self, t: float) -> np.ndarray:
        """N_i(t) = I(Y_i <= t, delta_i = 1)."""
        return (self.obs_time <= t) & (self.status == 1)

    @property
    def subjects(self) -> List[SubjectRecord]:
        out = []
        for i in range(self.n):
            out.append(SubjectRecord(
                trunc_time=float(self.trunc_time[i]),
                obs_time=float(self.obs_time[i]),
                status=int(self.status[i]),
                surrogate=self.W[i].tolist(),
                truth=None if self.X is None else self.X[i].tolist(),
                id=None if self.ids is None else str(self.ids[i]),
            ))
        return out

    def take(self, idx: Any) -> "Cohort":
        """Subset/resample rows without re-validating (rows were valid already)."""
        idx = np.asarray(idx, dtype=int)
        return Cohort(
            trunc_time=_frozen(self.trunc_time[idx]),
            obs_time=_frozen(self.obs_time[idx]),
            status=_frozen(self.status[idx]),
            W=_frozen(self.W[idx]),
            X=None if self.X is None else _frozen(self.X[idx]),
            ids=None if self.ids is None else [self.ids[i] for i in idx],
        )


def _check_arrays(A, Y, d, W, X) -> List[Violation]:
    out: List[Violation] = []
    n = Y.shape[0]
    if n == 0:
        return [Violation(None, "empty", "cohort has no subjects")]
    if A.shape[0] != n or d.shape[0] != n or W.shape[0] != n:
        return [Violation(None, "shape", "time, status and covariate arrays differ in length")]
    if X is not None and X.shape != W.shape:
        out.append(Violation(None, "dimension", "truth covariates do not match surrogate shape"))
    for i in np.flatnonzero(~np.isfinite(A) | ~np.isfinite(Y)):
        out.append(Violation(int(i), "non_finite_time", "non-finite time"))
    finite = np.isfinite(A) & np.isfinite(Y)
    for i in np.flatnonzero(finite & (A < 0)):
        out.append(Violation(int(i), "negative_time", "negative truncation time"))
    for i in np.flatnonzero(finite & (Y <= 0)):
        out.append(Violation(int(i), "negative_time", "non-positive observed time"))
    for i in np.flatnonzero(finite & (A > Y)):
        out.append(Violation(int(i), "trunc_exceeds_obs", "truncation exceeds observed time"))
    bad_status = ~np.isin(d, (0.0, 1.0))
    for i in np.flatnonzero(bad_status):
        out.append(Violation(int(i), "status", "status must be 0 or 1"))
    for i in np.flatnonzero(finite & (d == 1) & (A == Y)):
        out.append(Violation(int(i), "event_at_entry", "event observed at entry time"))
    for i in np.flatnonzero(~np.all(np.isfinite(W), axis=1)):
        out.append(Violation(int(i), "non_finite_covariate", "non-finite covariate"))
    if X is not None and X.shape == W.shape:
        for i in np.flatnonzero(~np.all(np.isfinite(X), axis=1)):
            out.append(Violation(int(i), "non_finite_covariate", "non-finite truth covariate"))
    if not np.any(d == 1):
        out.append(Violation(None, "no_events", "no events"))
    return out


def _field(raw: Any, name: str, default: Any = None) -> Any:
    if isinstance(raw, Mapping):
        return raw.get(name, default)
    return getattr(raw, name, default)


def validate_cohort(raw_subjects: Iterable[Union[SubjectRecord, Mapping[str, Any]]]) -> Cohort:
    """Check raw subjects row by row and build a Cohort; every violation is reported at once."""
    rows = list(raw_subjects)
    if not rows:
        raise CohortValidationError([Violation(None, "empty", "cohort has no subjects")])
    violations: List[Violation] = []
    p: Optional[int] = None
    has_truth = _field(rows[0], "truth") is not None
    A, Y, d, W, X, ids = [], [], [], [], [], []
    for i, r in enumerate(rows):
        w = list(_field(r, "surrogate") or [])
        x = _field(r, "truth")
        if p is None:
            p = len(w)
            if p == 0:
                violations.append(Violation(i, "dimension", "no surrogate covariates"))
        elif len(w) != p:
            violations.append(Violation(i, "dimension", f"expected {p} covariates, got {len(w)}"))
            continue
        if has_truth and (x is None or len(x) != p):
            violations.append(Violation(i, "dimension", "truth covariates missing or wrong length"))
            continue
        A.append(_field(r, "trunc_time", np.nan))
        Y.append(_field(r, "obs_time", np.nan))
        d.append(_field(r, "status", np.nan))
        W.append(w)
        X.append(x)
        ids.append(_field(r, "id"))
    if violations:
        raise CohortValidationError(violations)
    try:
        return Cohort.from_arrays(
            A, Y, d, np.asarray(W, dtype=float),
            np.asarray(X, dtype=float) if has_truth else None,
            ids=None if all(v is None for v in ids) else [str(v) for v in ids],
        )
    except (TypeError, ValueError) as e:
        raise CohortValidationError([Violation(None, "non_numeric", f"non-numeric field: {e}")])


# ---------- censoring survivor ----------

@dataclass(frozen=True, eq=False)
class StepSurvivor:
    """Right-continuous non-increasing step function with value 1 before the first jump.

    Beyond the last jump it holds ``tail_value``; that is 0 only when the largest
    residual time is itself a censoring event.
    """
    jump_times: np.ndarray
    values: np.ndarray
    _knots: np.ndarray = field(init=False, repr=False, compare=False)
    _levels: np.ndarray = field(init=False, repr=False, compare=False)
    _areas: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        jt = _frozen(np.asarray(self.jump_times, dtype=float).copy())
        vals = _frozen(np.asarray(self.values, dtype=float).copy())
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "values", vals)
        knots = np.concatenate(([0.0], jt))
        levels = np.concatenate(([1.0], vals))
        # area of [0, knot_j]; a jump at 0 contributes nothing
        areas = np.concatenate(([0.0], np.cumsum(levels[:-1] * np.diff(knots))))
        object.__setattr__(self, "_knots", _frozen(knots))
        object.__setattr__(self, "_levels", _frozen(levels))
        object.__setattr__(self, "_areas", _frozen(areas))

    @property
    def tail_value(self) -> float:
        return float(self.values[-1]) if self.values.size else 1.0

    def __call__(self, t: Any) -> Any:
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.jump_times, t, side="right")
        out = np.where(idx == 0, 1.0, self.values[np.maximum(idx - 1, 0)] if self.values.size else 1.0)
        return float(out) if out.ndim == 0 else out

    def integral(self, t: Any) -> Any:
        """w(t) = int_0^t S(u) du, vectorised over t >= 0."""
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self._knots, t, side="right") - 1
        j = np.maximum(j, 0)
        out = self._areas[j] + self._levels[j] * (t - self._knots[j])
        return float(out) if out.ndim == 0 else out


def km_censoring_survivor(cohort: Cohort) -> StepSurvivor:
    """Product-limit estimate of S_C from (Y - A, 1 - delta).

    A failure censors C; tied residual times share one risk set, with the
    censoring events counted before the failures leave it. Subjects censored
    at entry (V = 0) are never at risk at a positive time and are left out, so
    S_C(0) = 1.
    """
    v = cohort.residual
    keep = v > 0
    if not np.any(keep):
        raise DegenerateInputError("all residual times Y - A are zero; S_C is not estimable")
    v = v[keep]
    c_event = 1.0 - cohort.status[keep].astype(float)
    times, inv = np.unique(v, return_inverse=True)
    counts = np.bincount(inv)
    d = np.bincount(inv, weights=c_event)
    at_risk = np.cumsum(counts[::-1])[::-1]
    surv = np.cumprod(1.0 - d / at_risk)
    jumps = d > 0
    return StepSurvivor(jump_times=times[jumps], values=surv[jumps])


def w_integral(survivor: StepSurvivor, t: Any) -> Any:
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidArgumentError("w(t) needs finite t >= 0")
    return survivor.integral(arr)


def weight_r(
    survivor: Optional[StepSurvivor],
    t: float,
    Y_i: float,
    delta_i: int,
    A_i: float = 0.0,
    scale: WeightScale = WeightScale.DELAYED,
) -> float:
    """r(t, Y_i, delta_i): 1 under delayed entry, else delta_i w(t) / w(Y_i) on the chosen time axis."""
    if t < 0:
        raise InvalidArgumentError("weight time must be non-negative")
    scale = WeightScale(scale)
    if scale is WeightScale.DELAYED:
        return 1.0
    if not delta_i:
        return 0.0
    if survivor is None:
        raise InvalidArgumentError(f"{scale.value} weights need the censoring survivor")
    if scale is WeightScale.RESIDUAL:
        num, den = max(t - A_i, 0.0), Y_i - A_i
    else:
        num, den = t, Y_i
    w_den = survivor.integral(den)
    if not w_den > 0:
        raise DegenerateWeightError(f"integrated censoring survivor is zero at {den:g}")
    return float(survivor.integral(num)) / float(w_den)


def risk_weights(
    cohort: Cohort,
    survivor: Optional[StepSurvivor],
    times: np.ndarray,
    scale: WeightScale = WeightScale.DELAYED,
) -> np.ndarray:
    """Matrix G[i, k] = R_i(t_k) r(t_k, Y_i, delta_i) for all subjects and the given times."""
    scale = WeightScale(scale)
    A, Y = cohort.trunc_time, cohort.obs_time
    t = np.asarray(times, dtype=float)[None, :]
    if scale is WeightScale.DELAYED:
        return ((A[:, None] <= t) & (t <= Y[:, None])).astype(float)
    if survivor is None:
        raise InvalidArgumentError(f"{scale.value} weights need the censoring survivor")
    G = np.zeros((cohort.n, t.shape[1]))
    ev = np.flatnonzero(cohort.status == 1)
    if ev.size == 0:
        return G
    if scale is WeightScale.RESIDUAL:
        at_risk = (A[ev, None] <= t) & (t <= Y[ev, None])
        num = survivor.integral(np.clip(t - A[ev, None], 0.0, None))
        den = survivor.integral(Y[ev] - A[ev])
    else:
        at_risk = t <= Y[ev, None]
        num = survivor.integral(np.broadcast_to(t, at_risk.shape))
        den = survivor.integral(Y[ev])
    den = np.atleast_1d(den)
    if np.any(den <= 0):
        row = int(ev[np.flatnonzero(den <= 0)[0]])
        raise DegenerateWeightError(f"integrated censoring survivor is zero for subject {row}")
    G[ev] = np.where(at_risk, num / den[:, None], 0.0)
    return G
