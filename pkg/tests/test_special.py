import pytest
from scipy import special as sp

from pathint.special import (
    hyp1f1_series,
    lower_incomplete_gamma,
    lower_incomplete_gamma_kummer,
    regularized_lower_gamma,
)


@pytest.mark.parametrize("a", [0.3, 1.0, 2.5, 7.0])
@pytest.mark.parametrize("x", [0.01, 0.5, 2.0, 9.0, 30.0])
def test_regularized_gamma_matches_scipy(a, x):
    assert regularized_lower_gamma(a, x) == pytest.approx(sp.gammainc(a, x), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("a", [0.4, 1.7, 3.0])
@pytest.mark.parametrize("x", [0.2, 1.3, 5.0])
def test_kummer_form_agrees(a, x):
    ref = sp.gammainc(a, x) * sp.gamma(a)
    assert lower_incomplete_gamma(a, x) == pytest.approx(ref, rel=1e-12)
    assert lower_incomplete_gamma_kummer(a, x) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("a,b,z", [(0.5, 1.5, -2.0), (1.0, 2.0, 3.0), (2.2, 3.2, -9.0)])
def test_hyp1f1(a, b, z):
    assert hyp1f1_series(a, b, z) == pytest.approx(sp.hyp1f1(a, b, z), rel=1e-12)


def test_exact_small_case():
    # gamma(1, x) = 1 - e^-x
    assert lower_incomplete_gamma(1.0, 2.0) == pytest.approx(0.8646647167633873, rel=1e-14)
