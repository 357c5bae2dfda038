"""Reproducible randomness and index-ordered parallel execution.

Every random draw in lbsimex comes from a substream keyed by
``(seed, *path)``, the path being a run of ``stream_key`` segments. The key
feeds a ``SeedSequence`` whose state keys a Philox counter-based generator,
so a stream depends only on its key and never on which worker ran it or in
what order.
"""
from __future__ import annotations
from enum import IntEnum
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

import joblib
import numpy as np
from scipy.linalg import LinAlgError, cholesky

from .errors import InvalidCovarianceError

T = TypeVar("T")
R = TypeVar("R")


class Stream(IntEnum):
    """Tags separating the independent uses of one seed.

    A substream path is a sequence of segments, each a tag followed by exactly
    ``arity`` indices, so no two distinct paths flatten to the same key.
    """
    CONTAMINATE = 1    # (b)
    BOOTSTRAP = 2      # (resample)
    COHORT = 3         # (replicate, attempt)
    CALIBRATION = 5    # ()
    SIMEX = 6          # (replicate, attempt)

    @property
    def arity(self) -> int:
        return _ARITY[self]


_ARITY = {
    Stream.CONTAMINATE: 1,
    Stream.BOOTSTRAP: 1,
    Stream.COHORT: 2,
    Stream.CALIBRATION: 0,
    Stream.SIMEX: 2,
}


def stream_key(tag: Stream, *index: int) -> Tuple[int, ...]:
    """One path segment: the tag, then its indices."""
    tag = Stream(tag)
    if len(index) != tag.arity:
        raise ValueError(f"{tag.name} takes {tag.arity} indices, got {len(index)}")
    return (int(tag), *(int(i) for i in index))


def substream(seed: int, *path: int) -> np.random.Generator:
    key = tuple(int(k) for k in path)
    if any(k < 0 for k in key):
        raise ValueError("substream keys must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def parallel_map(
    fn: Callable[..., R],
    items: Sequence[T] | Iterable[T],
    workers: int = 1,
    on_result: Optional[Callable[[R], Any]] = None,
) -> List[R]:
    """Map ``fn`` over ``items``; the output order is the input order regardless of workers."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        out: List[R] = []
        for it in items:
            res = fn(it)
            if on_result is not None:
                on_result(res)
            out.append(res)
        return out
    runner = joblib.Parallel(n_jobs=min(workers, len(items)), return_as="generator")
    out = []
    for res in runner(joblib.delayed(fn)(it) for it in items):
        if on_result is not None:
            on_result(res)
        out.append(res)
    return out


def noise_factor(cov: Any, jitter: float = 1e-12) -> np.ndarray:
    """Lower factor L with L L' = cov, used to colour standard-normal draws.

    An all-zero covariance yields L = 0 exactly; otherwise Cholesky is tried
    as is and then with ``jitter`` on the diagonal.
    """
    S = np.atleast_2d(np.asarray(cov, dtype=float))
    if S.shape[0] != S.shape[1] or not np.all(np.isfinite(S)):
        raise InvalidCovarianceError(f"covariance must be a finite square matrix, got shape {S.shape}")
    if not np.allclose(S, S.T, rtol=1e-10, atol=1e-12):
        raise InvalidCovarianceError("covariance matrix is not symmetric")
    if not np.any(S):
        return np.zeros_like(S)
    for eps in (0.0, jitter):
        try:
            return cholesky(S + eps * np.eye(S.shape[0]), lower=True)
        except LinAlgError:
            continue
    raise InvalidCovarianceError("covariance matrix is not positive semi-definite")
