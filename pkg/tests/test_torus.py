import numpy as np
import pytest

from cocyclelab.errors import NonSmoothLambda, StepTooLarge
from cocyclelab.torus import (
    Harmonic,
    SMPoint,
    TorusMetric,
    flat_closed_geodesics,
    frame_apply,
    grid_coords,
    integrate_geodesic,
    torus_distance,
)


def curved_metric(n=64, amp=0.1):
    return TorusMetric.from_harmonics(n, n, 1.0, 1.0, [Harmonic(amp, 1, 0)])


def test_gauss_curvature_analytic():
    """K = -e^{-2 lam} (lam_xx + lam_yy); for lam = a cos(2 pi x / Lx) this is
    e^{-2 lam} (2 pi / Lx)^2 a cos(2 pi x / Lx)."""
    met = curved_metric(128)
    xg, _ = grid_coords(128, 128, 1.0, 1.0)
    lam = 0.1 * np.cos(2 * np.pi * xg)
    expected = np.exp(-2 * lam) * (2 * np.pi) ** 2 * lam
    assert np.abs(met.gauss - expected).max() < 1e-9


def test_gauss_zero_on_flat():
    met = TorusMetric.flat(32, 48, 2.0, 1.0)
    assert np.abs(met.gauss).max() < 1e-14


def test_area_is_conformal_volume():
    met = curved_metric(96)
    expected = np.exp(2 * met.lam).mean() * 1.0
    assert abs(met.area() - expected) < 1e-14


def test_frame_brackets():
    """[V, X] = H, [H, V] = X and [X, H] = K V on a band-limited sample."""
    met = TorusMetric.from_harmonics(
        128, 128, 1.0, 1.0, [Harmonic(0.1, 1, 0), Harmonic(0.05, 0, 1, 0.7, 0.2)]
    )
    ntheta = 16
    theta = met.theta_grid(ntheta)
    xg, yg = grid_coords(128, 128, 1.0, 1.0)
    f = (
        np.cos(theta)[:, None, None] * np.cos(2 * np.pi * xg)[None]
        + np.sin(2 * theta)[:, None, None] * np.sin(2 * np.pi * yg)[None]
        + 0.3
    )
    scale = np.abs(f).max()

    def brk(op1, op2):
        return frame_apply(met, frame_apply(met, f, op2), op1) - frame_apply(
            met, frame_apply(met, f, op1), op2
        )

    h = frame_apply(met, f, "H")
    x = frame_apply(met, f, "X")
    v = frame_apply(met, f, "V")
    assert np.abs(brk("V", "X") - h).max() / scale < 1e-7
    assert np.abs(brk("H", "V") - x).max() / scale < 1e-7
    assert np.abs(brk("X", "H") - met.gauss[None] * v).max() / scale < 1e-7


def test_nonsmooth_lambda_rejected():
    rng = np.random.default_rng(0)
    lam = 0.05 * rng.normal(size=(32, 32))  # white noise has Nyquist content
    with pytest.raises(NonSmoothLambda):
        TorusMetric.from_grid(1.0, 1.0, lam)


def test_min_grid_size():
    with pytest.raises(ValueError):
        TorusMetric.flat(8, 32)


def test_flat_geodesics_are_straight_lines():
    met = TorusMetric.flat(32, 32)
    p0 = SMPoint(0.3, 0.8, 1.1)
    path = integrate_geodesic(met, p0, 2.0, 1e-3)
    end = path.endpoint()
    assert abs(end.x - (0.3 + 2.0 * np.cos(1.1))) < 1e-12
    assert abs(end.y - (0.8 + 2.0 * np.sin(1.1))) < 1e-12
    assert abs(end.theta - 1.1) < 1e-14


def test_geodesic_lands_exactly_on_t_final():
    met = TorusMetric.flat(32, 32)
    path = integrate_geodesic(met, SMPoint(0, 0, 0.5), 1.0, dt=3e-3)
    assert path.times[-1] == pytest.approx(1.0, abs=0)


def test_geodesic_momentum_conservation():
    """For lam = lam(x) the quantity e^{lam} sin(theta) is conserved
    (y-translation invariance)."""
    met = curved_metric(64)
    path = integrate_geodesic(met, SMPoint(0.2, 0.1, 0.9), 8.0, 1e-3)
    lam = 0.1 * np.cos(2 * np.pi * path.xs)
    p_y = np.exp(lam) * np.sin(path.thetas)
    assert np.abs(p_y - p_y[0]).max() < 1e-10


def test_geodesic_unit_speed():
    met = curved_metric(64)
    path = integrate_geodesic(met, SMPoint(0.4, 0.7, 2.3), 5.0, 1e-3)
    assert path.unit_speed_residual() < 1e-5


def test_geodesic_fourth_order():
    met = curved_metric(64)
    p0 = SMPoint(0.15, 0.55, 0.77)
    ref = integrate_geodesic(met, p0, 3.0, 1e-4).endpoint()

    def err(dt):
        e = integrate_geodesic(met, p0, 3.0, dt).endpoint()
        return np.hypot(e.x - ref.x, e.y - ref.y) + abs(e.theta - ref.theta)

    ratio = err(8e-3) / err(4e-3)
    assert 12.0 < ratio < 20.0


def test_geodesic_reversibility():
    met = curved_metric(64)
    p0 = SMPoint(0.31, 0.62, 1.41)
    fwd = integrate_geodesic(met, p0, 4.0, 1e-3).endpoint()
    back = integrate_geodesic(met, fwd, -4.0, 1e-3).endpoint()
    assert abs(back.x - p0.x) < 1e-9
    assert abs(back.y - p0.y) < 1e-9
    assert abs(back.theta - p0.theta) < 1e-9


def test_step_too_large():
    met = curved_metric(64)
    with pytest.raises(StepTooLarge):
        integrate_geodesic(met, SMPoint(0, 0, 0), 1.0, dt=0.5)


def test_flat_closed_geodesics_close():
    met = TorusMetric.flat(32, 32, 1.0, 2.0)
    for p0, t_close in flat_closed_geodesics(met, 6, seed=3):
        end = integrate_geodesic(met, p0, t_close, 1e-3).endpoint()
        assert torus_distance(met, end, p0) < 1e-10


def test_flat_closed_geodesics_needs_flat():
    with pytest.raises(ValueError):
        flat_closed_geodesics(curved_metric(), 2)


def test_lambda_and_grad_exact_trig():
    met = curved_metric(64)
    rng = np.random.default_rng(1)
    xs = rng.uniform(0, 1, 50)
    ys = rng.uniform(0, 1, 50)
    lam, lx, ly = met.lambda_and_grad_at(xs, ys)
    assert np.abs(lam - 0.1 * np.cos(2 * np.pi * xs)).max() < 1e-14
    assert np.abs(lx + 0.1 * 2 * np.pi * np.sin(2 * np.pi * xs)).max() < 1e-14
    assert np.abs(ly).max() < 1e-14


def test_lambda_and_grad_interpolated_route():
    """A metric built from a raw grid must agree with the trig route."""
    trig = curved_metric(96)
    grid = TorusMetric.from_grid(1.0, 1.0, trig.lam)
    rng = np.random.default_rng(2)
    xs = rng.uniform(0, 1, 80)
    ys = rng.uniform(0, 1, 80)
    a = trig.lambda_and_grad_at(xs, ys)
    b = grid.lambda_and_grad_at(xs, ys)
    for u, v in zip(a, b):
        assert np.abs(u - v).max() < 1e-7


def test_torus_distance_wraps():
    met = TorusMetric.flat(32, 32)
    p = SMPoint(0.01, 0.99, 0.1)
    q = SMPoint(0.99, 0.01, 0.1 + 2 * np.pi)
    assert torus_distance(met, p, q) < 0.03
