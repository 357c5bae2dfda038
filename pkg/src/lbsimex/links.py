"""Error-distribution links of the transformation model H(T) = -X'beta + eps.

``cum_hazard`` is Lambda, ``hazard`` its derivative lambda and ``hazard_deriv``
the derivative lambda'. PH takes eps extreme-value (Lambda = exp), PO takes eps
logistic (Lambda = log(1 + exp)).
"""
from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy.special import expit

from .errors import InvalidArgumentError

ArrayLike = Union[float, np.ndarray]

# exp(PH_CAP) is the largest power of e that stays finite in double precision;
# PH values above it saturate instead of overflowing to inf.
PH_CAP = 709.78
# beyond |x| > PO_SWITCH the softplus is evaluated through its asymptotes
PO_SWITCH = 35.0


class LinkKind(str, Enum):
    PH = "ph"
    PO = "po"


def _checked(x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("link functions need finite arguments")
    return arr


def _out(arr: np.ndarray, scalar: bool) -> ArrayLike:
    return float(arr) if scalar else arr


def _softplus(x: np.ndarray) -> np.ndarray:
    big = x > PO_SWITCH
    small = x < -PO_SWITCH
    mid = ~(big | small)
    out = np.empty_like(x)
    out[big] = x[big] + np.exp(-x[big])
    out[small] = np.exp(x[small])
    out[mid] = np.log1p(np.exp(x[mid]))
    return out


@dataclass(frozen=True)
class TransformationLink:
    kind: LinkKind = LinkKind.PH

    @classmethod
    def of(cls, kind: Union[str, LinkKind, "TransformationLink"]) -> "TransformationLink":
        if isinstance(kind, TransformationLink):
            return kind
        try:
            return cls(LinkKind(str(getattr(kind, "value", kind)).lower()))
        except ValueError:
            raise InvalidArgumentError(f"unknown link '{kind}' (expected ph or po)") from None

    @property
    def name(self) -> str:
        return self.kind.value.upper()

    def cum_hazard(self, x: ArrayLike) -> ArrayLike:
        arr = _checked(x)
        flat = np.atleast_1d(arr)
        if self.kind is LinkKind.PH:
            out = np.exp(np.minimum(flat, PH_CAP))
        else:
            out = _softplus(flat)
        return _out(out.reshape(arr.shape), arr.ndim == 0)

    def hazard(self, x: ArrayLike) -> ArrayLike:
        arr = _checked(x)
        if self.kind is LinkKind.PH:
            out = np.exp(np.minimum(arr, PH_CAP))
        else:
            out = expit(arr)
        return _out(np.asarray(out), arr.ndim == 0)

    def hazard_deriv(self, x: ArrayLike) -> ArrayLike:
        arr = _checked(x)
        if self.kind is LinkKind.PH:
            out = np.exp(np.minimum(arr, PH_CAP))
        else:
            out = expit(arr) * expit(-arr)
        return _out(np.asarray(out), arr.ndim == 0)


PH = TransformationLink(LinkKind.PH)
PO = TransformationLink(LinkKind.PO)


def cum_hazard(link: TransformationLink, x: ArrayLike) -> ArrayLike:
    return link.cum_hazard(x)


def hazard(link: TransformationLink, x: ArrayLike) -> ArrayLike:
    return link.hazard(x)


def hazard_deriv(link: TransformationLink, x: ArrayLike) -> ArrayLike:
    return link.hazard_deriv(x)
