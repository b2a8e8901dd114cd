import numpy as np
import pytest

from src.environment.env_model import composite_env
from src.errors import QuadratureError
from src.rates.quadrature import (
    QuadConfig,
    complex_expm1,
    damped_window,
    exp_window,
    frequency_edges,
    integrate_frequency,
    integrate_panels,
)


def test_polynomial_is_exact():
    value, error = integrate_panels(lambda x: x ** 5 - 2 * x, [0.0, 2.0], 1e-14, 1e-14, 100)
    assert value == pytest.approx(64.0 / 6.0 - 4.0, rel=1e-13)
    assert error < 1e-12


def test_vector_valued_complex_integrand():
    def func(x):
        return np.stack([np.exp(1j * x), x ** 2], axis=-1)

    value, _ = integrate_panels(func, np.linspace(0.0, np.pi, 4), 1e-13, 1e-12, 1000)
    assert value.shape == (2,)
    assert value[0] == pytest.approx(2j, abs=1e-12)
    assert value[1] == pytest.approx(np.pi ** 3 / 3.0, rel=1e-12)


def test_oscillatory_integral_with_resolved_panels():
    t = 50.0
    value, _ = integrate_frequency(lambda w: np.cos(w * t), 10.0, 1e-12, 1e-10, 100_000, oscillation=t)
    assert value == pytest.approx(np.sin(10.0 * t) / t, abs=1e-11)


def test_frequency_edges_respect_oscillation_and_breakpoints():
    edges = frequency_edges(40.0, oscillation=10.0, breakpoints=[1.0, 55.0])
    assert edges[0] == 0.0 and edges[-1] == 40.0
    assert np.max(np.diff(edges)) <= np.pi / 10.0 + 1e-12
    assert 1.0 in edges
    assert 55.0 not in edges


def test_sub_ohmic_head_mapping_removes_singularity():
    value, _ = integrate_frequency(lambda w: w ** -0.5, 1.0, 1e-13, 1e-11, 10_000, exponent=0.5)
    assert value == pytest.approx(2.0, rel=1e-9)


def test_panel_budget_raises_with_error_bound():
    with pytest.raises(QuadratureError) as info:
        integrate_panels(lambda x: np.cos(400.0 * x), [0.0, 1.0], 1e-14, 1e-14, 4)
    assert info.value.error_bound > 0


def test_quad_config_window_and_tightening():
    env = composite_env(1e-2, 1e-3, 1.0, 1.0, omega_c=10.0)
    cfg = QuadConfig()
    assert cfg.omega_max(env) == pytest.approx(400.0)
    tight = cfg.tighter(10.0)
    assert tight.abs_tol == pytest.approx(1e-11)
    assert tight.rel_tol == pytest.approx(1e-7)
    assert tight.omega_max_factor == cfg.omega_max_factor


def test_complex_expm1_small_argument():
    z = np.array([1e-10 + 2e-10j, -3e-9j, 0.5 - 0.25j])
    expected = np.array([z[0] + z[0] ** 2 / 2, z[1] + z[1] ** 2 / 2, np.exp(z[2]) - 1.0])
    np.testing.assert_allclose(complex_expm1(z), expected, rtol=1e-12)


def test_exp_window_limits():
    assert exp_window(0.0, 3.0) == pytest.approx(3.0)
    z = 0.3 - 0.7j
    assert exp_window(z, 2.0) == pytest.approx((np.exp(2.0 * z) - 1.0) / z, rel=1e-13)


@pytest.mark.parametrize("gamma_t", [1e-8, 0.5, 5.0, 299.0, 301.0, 800.0])
def test_damped_window_matches_direct_formula(gamma_t):
    t, delta = 10.0, 0.37
    gamma = gamma_t / t
    z = 1j * delta + gamma
    direct = (np.exp((1j * delta - gamma) * t) - np.exp(-2.0 * gamma * t)) / z
    assert damped_window(delta, gamma, t) == pytest.approx(direct, rel=1e-9, abs=1e-300)


def test_adaptive_path_handles_complex_vectors():
    def func(w):
        return np.stack([np.exp(1j * w), w ** 2], axis=-1)

    value, error = integrate_frequency(func, np.pi, 1e-13, 1e-12, 1000)
    assert value.shape == (2,)
    assert value[0] == pytest.approx(2j, abs=1e-11)
    assert value[1] == pytest.approx(np.pi ** 3 / 3.0, rel=1e-11)
    assert error >= 0.0


def test_vectorised_and_adaptive_paths_agree():
    def func(w):
        return np.exp(-w / 3.0) * np.exp(1j * 7.0 * w) / (0.01 + (w - 2.0) ** 2)

    adaptive, _ = integrate_frequency(func, 20.0, 1e-12, 1e-10, 10_000, oscillation=7.0, breakpoints=[2.0])
    panels, _ = integrate_frequency(func, 20.0, 1e-12, 1e-10, 10_000, oscillation=7.0, breakpoints=[2.0],
                                    vectorised=True)
    assert adaptive == pytest.approx(panels, rel=1e-8)


def test_breakpoint_below_first_panel_bounds_the_mapped_head():
    assert frequency_edges(1.0, breakpoints=[0.01])[1] == 0.01

    # 2 sqrt(0.01) = 0.2
    def step(w):
        return np.where(w < 0.01, 1.0 / np.sqrt(np.maximum(w, 1e-300)), 0.0)

    for vectorised in (False, True):
        value, _ = integrate_frequency(step, 1.0, 1e-12, 1e-10, 8, breakpoints=[0.01],
                                       exponent=0.5, vectorised=vectorised)
        assert value == pytest.approx(0.2, rel=1e-10)


def test_adaptive_budget_raises_with_error_bound():
    with pytest.raises(QuadratureError) as info:
        integrate_frequency(lambda w: np.cos(400.0 * w), 1.0, 1e-300, 1e-300, 4)
    assert info.value.error_bound > 0
