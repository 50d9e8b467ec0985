import math

import numpy as np
import pytest
from pydantic import ValidationError

from cs_extension import (CS_COLUMNS, ExtensionProblem, FourierMode, FourierSeries, dtn_apply, extend,
                          extension_energy, fit_symbol_constant, lateral_inner, mode_residual, spectral_fractional,
                          symbol_report, with_data)
from fem.errors import DomainError


def _symbol_constant(s):
    return 2.0 ** (1.0 - 2.0 * s) * math.gamma(1.0 - s) / math.gamma(s)


@pytest.mark.unit
def test_alpha_must_match_s():
    data = FourierSeries.cosine(1)
    assert ExtensionProblem(s=0.25, boundary_data=data).alpha == 0.5
    with pytest.raises(ValidationError, match="1 - 2s"):
        ExtensionProblem(s=0.25, alpha=0.4, boundary_data=data)


@pytest.mark.unit
def test_grid_checks():
    with pytest.raises(ValidationError):
        ExtensionProblem(s=0.5, boundary_data=FourierSeries.cosine(1), n_y=33)
    with pytest.raises(ValidationError):
        ExtensionProblem(s=0.5, boundary_data=FourierSeries.cosine(9), n_y=32)
    problem = ExtensionProblem(s=0.5, boundary_data=FourierSeries.cosine(2) + FourierSeries.sine(4), n_y=32)
    assert problem.strip_height == pytest.approx(4.0)
    assert problem.x[0] == 0.0 and problem.x[-1] == pytest.approx(4.0)
    assert np.all(np.diff(problem.x) > 0)


@pytest.mark.unit
def test_fourier_series_algebra():
    v = FourierSeries(modes=[FourierMode(k=1, cos=1.0), FourierMode(k=1, cos=-1.0), FourierMode(k=3, sin=2.0)])
    assert v.active_modes == [3]
    assert v.max_mode == 3
    y = np.linspace(0.0, 2 * math.pi, 7)
    assert np.allclose(v.scaled(0.5).evaluate(y), np.sin(3 * y))


@pytest.mark.unit
def test_spectral_fractional_multiplier():
    v = FourierSeries.cosine(2) + FourierSeries(modes=[FourierMode(k=0, cos=5.0)])
    out = spectral_fractional(v, 0.5).combined()
    assert out[2].cos == pytest.approx(2.0)
    assert out[0].cos == 0.0
    assert spectral_fractional(FourierSeries.sine(4), 0.25).combined()[4].sin == pytest.approx(2.0)
    with pytest.raises(DomainError):
        spectral_fractional(v, 1.0)


@pytest.mark.unit
def test_fit_symbol_constant_is_least_squares():
    t = [np.array([1.0, 0.0]), np.array([0.0, 2.0])]
    f = [3.0 * t[0], 3.0 * t[1]]
    assert fit_symbol_constant(f, t) == pytest.approx(3.0)


@pytest.mark.unit
def test_mode_residual_is_relative_to_the_symbol():
    t = np.array([2.0, -2.0, 2.0, -2.0])
    assert mode_residual(1.02 * t, t, 1.0) == pytest.approx(0.02)
    # a collapsed constant reports the whole mode as error
    assert mode_residual(t, t, 0.0) == pytest.approx(1.0)


@pytest.mark.unit
def test_with_data_validates_the_new_data():
    problem = ExtensionProblem(s=0.5, boundary_data=FourierSeries.cosine(1), strip_height=4.0, n_x=16, n_y=16)
    swapped = with_data(problem, FourierSeries.cosine(3, 2.0))
    assert swapped.strip_height == 4.0 and swapped.alpha == problem.alpha
    assert swapped.boundary_data.active_modes == [3]
    with pytest.raises(ValidationError):
        with_data(problem, FourierSeries.cosine(5))


@pytest.mark.integration
@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_energy_identity(s):
    problem = ExtensionProblem(s=s, boundary_data=FourierSeries.cosine(1) + FourierSeries.sine(3, 0.5),
                               n_x=96, n_y=32)
    field = extend(problem)
    assert np.allclose(field.at(0), problem.boundary_data.evaluate(problem.y))
    assert np.allclose(field.at(problem.n_x), 0.0, atol=1e-14)
    f = dtn_apply(problem, field)
    data = problem.boundary_data.evaluate(problem.y)
    # discrete pairing and energy agree to the 1% the identity is checked at
    assert lateral_inner(f, data, problem.n_y) == pytest.approx(extension_energy(field), rel=1e-2)


@pytest.mark.integration
def test_half_order_extension_recovers_unit_constant():
    problem = ExtensionProblem(s=0.5, boundary_data=FourierSeries.cosine(2), n_x=128, n_y=32)
    f = dtn_apply(problem)
    assert f == pytest.approx(2.0 * np.cos(2.0 * problem.y), abs=0.05)
    same = dtn_apply(with_data(problem, FourierSeries.cosine(2, 3.0)))
    assert np.allclose(same, 3.0 * f)


@pytest.mark.integration
def test_symbol_report_rows():
    frame = symbol_report([0.5], [1, 2], [(64, 16), (128, 32)])
    assert list(frame.columns) == CS_COLUMNS
    assert len(frame) == 4
    assert frame.H.unique().tolist() == [8.0]
    assert frame.fitted_c.to_numpy() == pytest.approx(1.0, rel=0.02)
    with pytest.raises(DomainError):
        symbol_report([0.5], [0, 1], [(64, 16)])


@pytest.mark.slow
@pytest.mark.parametrize("s", [0.25, 0.75])
def test_symbol_law_for_other_orders(s):
    frame = symbol_report([s], [1, 2, 3, 4], [(256, 64)])
    assert frame.rel_error.max() < 0.02
    assert frame.fitted_c.iloc[0] == pytest.approx(_symbol_constant(s), rel=0.05)
