import math

import numpy as np
import pytest

from lbsimex.errors import InvalidArgumentError
from lbsimex.links import PH, PH_CAP, PO, TransformationLink, cum_hazard, hazard, hazard_deriv


def test_ph_is_exponential_everywhere():
    x = np.array([-3.0, 0.0, 1.5])
    assert np.allclose(PH.cum_hazard(x), np.exp(x))
    assert np.allclose(PH.hazard(x), np.exp(x))
    assert np.allclose(PH.hazard_deriv(x), np.exp(x))


def test_po_values_at_zero():
    assert PO.cum_hazard(0.0) == pytest.approx(math.log(2.0))
    assert PO.hazard(0.0) == pytest.approx(0.5)
    assert PO.hazard_deriv(0.0) == pytest.approx(0.25)


def test_scalars_in_scalars_out():
    assert isinstance(PO.cum_hazard(1.0), float)
    assert isinstance(PH.hazard(np.float64(2.0)), float)
    assert PH.cum_hazard(np.zeros(3)).shape == (3,)


def test_ph_saturates_instead_of_overflowing():
    big = PH.cum_hazard(1000.0)
    assert np.isfinite(big)
    assert big == pytest.approx(math.exp(PH_CAP))


def test_po_tails_follow_asymptotes():
    assert PO.cum_hazard(100.0) == pytest.approx(100.0, rel=1e-15)
    assert PO.cum_hazard(-100.0) == pytest.approx(math.exp(-100.0), rel=1e-12)
    assert PO.cum_hazard(-100.0) > 0
    # continuity across the asymptotic switch
    lo, hi = PO.cum_hazard(34.999999), PO.cum_hazard(35.000001)
    assert abs(hi - lo) < 1e-5


def test_po_derivatives_match_finite_differences():
    x = np.linspace(-5, 5, 11)
    h = 1e-6
    fd = (PO.cum_hazard(x + h) - PO.cum_hazard(x - h)) / (2 * h)
    assert np.allclose(fd, PO.hazard(x), atol=1e-7)
    fd2 = (PO.hazard(x + h) - PO.hazard(x - h)) / (2 * h)
    assert np.allclose(fd2, PO.hazard_deriv(x), atol=1e-7)


@pytest.mark.parametrize("link", [PH, PO], ids=["ph", "po"])
def test_derivatives_match_finite_differences_on_a_wide_grid(link):
    x = np.linspace(-30.0, 30.0, 1000)
    h = 1e-5
    lam = link.hazard(x)
    fd = (link.cum_hazard(x + h) - link.cum_hazard(x - h)) / (2 * h)
    assert np.all(np.abs(fd - lam) <= 1e-6 * (1.0 + lam))
    dlam = link.hazard_deriv(x)
    fd2 = (link.hazard(x + h) - link.hazard(x - h)) / (2 * h)
    assert np.all(np.abs(fd2 - dlam) <= 1e-6 * (1.0 + np.abs(dlam)))


def test_cumulative_hazard_is_increasing():
    x = np.linspace(-40, 40, 401)
    for link in (PH, PO):
        assert np.all(np.diff(link.cum_hazard(x)) > 0)


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
def test_non_finite_arguments_are_rejected(bad):
    with pytest.raises(InvalidArgumentError):
        PH.cum_hazard(bad)
    with pytest.raises(InvalidArgumentError):
        PO.hazard(np.array([0.0, bad]))


def test_of_resolves_names_and_rejects_unknown():
    assert TransformationLink.of("ph") is not None
    assert TransformationLink.of("PO") == PO
    assert TransformationLink.of(PH) is PH
    with pytest.raises(InvalidArgumentError):
        TransformationLink.of("aft")


def test_module_level_helpers_delegate():
    assert cum_hazard(PO, 0.0) == PO.cum_hazard(0.0)
    assert hazard(PH, 1.0) == PH.hazard(1.0)
    assert hazard_deriv(PO, 1.0) == PO.hazard_deriv(1.0)
