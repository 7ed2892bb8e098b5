import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from spinspec.errors import InvalidArgumentError
from spinspec.schedule import (
    PulseSchedule,
    filter_dc_slope,
    filter_peak,
    filter_transform,
    make_equidistant,
    make_schedule,
    make_uhrig,
    toggling,
)


def quad_transform(tf, f):
    """Brute-force windowed Fourier transform, one quad call per interval."""
    re = im = 0.0
    u = tf.breakpoints
    for a, b, s in zip(u[:-1], u[1:], tf.signs):
        re += s * quad(lambda t: math.cos(2 * math.pi * f * t), a, b, limit=200)[0]
        im -= s * quad(lambda t: math.sin(2 * math.pi * f * t), a, b, limit=200)[0]
    return complex(re, im)


@st.composite
def schedules(draw):
    T = draw(st.floats(1e-3, 0.2))
    n = draw(st.integers(0, 12))
    fr = sorted(draw(st.lists(st.floats(0.01, 0.99), min_size=n, max_size=n, unique=True)))
    times = np.array(fr) * T
    if n > 1 and np.min(np.diff(times)) <= 1e-9 * T:
        times = np.linspace(0, T, n + 2)[1:-1]
    return PulseSchedule(T, times)


# ---------------------------------------------------------------- construction

def test_equidistant_times():
    s = make_equidistant(3, 100.0)
    assert s.total_duration == pytest.approx(0.02)
    np.testing.assert_allclose(s.pulse_times, [0.005, 0.010, 0.015])
    assert s.n == 3


def test_equidistant_five_ms_spacing():
    s = make_equidistant(19, 100.0)
    assert s.total_duration == pytest.approx(0.1)
    np.testing.assert_allclose(np.diff(s.pulse_times), 0.005)
    assert make_equidistant(0, 5.0).total_duration == pytest.approx(0.1)
    assert make_equidistant(0, 5.0).n == 0


def test_uhrig_times():
    np.testing.assert_allclose(make_uhrig(1, 1.0).pulse_times, [0.5])
    np.testing.assert_allclose(make_uhrig(3, 1.0).pulse_times,
                               [math.sin(math.pi / 8) ** 2, 0.5, math.sin(3 * math.pi / 8) ** 2])
    s = make_uhrig(2, 1.0)
    np.testing.assert_allclose(s.pulse_times, [0.25, 0.75])
    s = make_uhrig(1, 0.3)
    np.testing.assert_allclose(s.pulse_times, [0.15])


def test_shared_duration_rule():
    for scheme in ("equidistant", "uhrig"):
        s = make_schedule(scheme, 11, 100.0)
        assert s.total_duration == pytest.approx(0.06)
    assert make_schedule("uhrig", 0, 50.0).n == 0


@pytest.mark.parametrize("times", [[0.5, 0.2], [0.0, 0.5], [0.5, 1.0], [0.3, 0.3], [1.2]])
def test_invalid_times_rejected(times):
    with pytest.raises(InvalidArgumentError):
        PulseSchedule(1.0, times)


def test_invalid_arguments():
    with pytest.raises(InvalidArgumentError):
        PulseSchedule(0.0, [])
    with pytest.raises(InvalidArgumentError):
        make_equidistant(-1, 100.0)
    with pytest.raises(InvalidArgumentError):
        make_equidistant(3, 0.0)
    with pytest.raises(InvalidArgumentError):
        make_uhrig(0, 1.0)
    with pytest.raises(InvalidArgumentError):
        make_schedule("cpmg", 3, 100.0)


def test_schedule_is_immutable():
    s = make_equidistant(3, 100.0)
    with pytest.raises(ValueError):
        s.pulse_times[0] = 0.0


def test_csv_export():
    text = make_equidistant(2, 50.0).to_csv()
    lines = text.splitlines()
    assert lines[0] == "index,time_s"
    assert len(lines) == 3
    assert "\r" not in text


def test_toggling_structure():
    tf = toggling(PulseSchedule(1.0, []))
    np.testing.assert_array_equal(tf.breakpoints, [0.0, 1.0])
    np.testing.assert_array_equal(tf.signs, [1])
    tf = toggling(PulseSchedule(1.0, [0.5]))
    np.testing.assert_array_equal(tf.breakpoints, [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(tf.signs, [1, -1])
    tf = toggling(make_equidistant(2, 1.5))
    np.testing.assert_allclose(tf.breakpoints, [0, 1 / 3, 2 / 3, 1])
    np.testing.assert_array_equal(tf.signs, [1, -1, 1])


def test_toggling_values():
    tf = toggling(make_equidistant(3, 100.0))
    np.testing.assert_array_equal(tf.signs, [1, -1, 1, -1])
    assert tf(0.001) == 1 and tf(0.006) == -1 and tf(0.019) == -1
    assert tf.total_duration == pytest.approx(0.02)


# ---------------------------------------------------------------- filter transform

def test_free_evolution_transform():
    tf = toggling(PulseSchedule(0.01, []))
    assert filter_transform(tf, 0.0) == pytest.approx(0.01)
    f = 37.0
    expected = 0.01 * np.exp(-1j * math.pi * f * 0.01) * np.sinc(f * 0.01)
    assert filter_transform(tf, f) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("scheme,n,f_mod,f", [
    ("equidistant", 1, 100.0, 100.0),
    ("equidistant", 11, 100.0, 93.7),
    ("uhrig", 5, 80.0, 150.0),
    ("uhrig", 20, 157.5, 109.6),
])
def test_matches_direct_quadrature(scheme, n, f_mod, f):
    tf = toggling(make_schedule(scheme, n, f_mod))
    got = complex(filter_transform(tf, f))
    ref = quad_transform(tf, f)
    assert abs(got - ref) <= 1e-9 * tf.total_duration


def test_vectorized_matches_scalar():
    tf = toggling(make_uhrig(7, 0.05))
    f = np.array([0.0, 12.5, 80.0, 333.3])
    vec = filter_transform(tf, f)
    assert vec.shape == f.shape
    for fi, vi in zip(f, vec):
        assert filter_transform(tf, fi) == pytest.approx(vi, abs=1e-15)


@pytest.mark.parametrize("scheme,n", [("equidistant", 5), ("uhrig", 6)])
def test_parseval(scheme, n):
    # the toggling function squares to 1, so the spectral energy equals T
    tf = toggling(make_schedule(scheme, n, 100.0))
    T = tf.total_duration
    f = np.linspace(-4000.0, 4000.0, 400_001)
    energy = np.trapezoid(np.abs(filter_transform(tf, f)) ** 2, f)
    assert energy == pytest.approx(T, rel=0.02)


def test_continuous_at_zero():
    tf = toggling(make_uhrig(4, 0.04))
    F0 = filter_transform(tf, 0.0)
    assert F0 == pytest.approx(np.sum(tf.signs * tf.widths), abs=1e-15)
    for eps in (1e-3, 1e-6, 1e-9):
        assert abs(filter_transform(tf, eps) - F0) < 1e-3 * eps
    assert abs(abs(filter_transform(tf, 5e-7)) - abs(F0)) < 1e-9 * tf.total_duration


def test_dc_slope_examples():
    assert abs(filter_dc_slope(toggling(PulseSchedule(1.0, [0.5])))) == pytest.approx(math.pi / 2)
    assert abs(filter_dc_slope(toggling(PulseSchedule(1.0, [])))) == pytest.approx(math.pi)


def test_echo_cancels_dc():
    assert abs(filter_transform(toggling(PulseSchedule(0.37, [0.185])), 0.0)) < 1e-15


def test_dc_slope_matches_finite_difference():
    for sched in (make_uhrig(3, 0.03), make_equidistant(4, 120.0), PulseSchedule(0.02, [0.003, 0.011])):
        tf = toggling(sched)
        h = 1e-4
        fd = (filter_transform(tf, h) - filter_transform(tf, -h)) / (2 * h)
        assert filter_dc_slope(tf) == pytest.approx(fd, rel=1e-6, abs=1e-12)


def test_equidistant_odd_n_has_zero_dc_value():
    # odd n gives an even number of equal intervals with alternating signs
    tf = toggling(make_equidistant(3, 100.0))
    assert abs(filter_transform(tf, 0.0)) < 1e-15


@st.composite
def long_schedules(draw):
    T = draw(st.floats(1e-3, 0.2))
    n = draw(st.integers(0, 25))
    gaps = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=n + 1, max_size=n + 1)))
    times = T * np.cumsum(gaps)[:-1] / gaps.sum()
    return PulseSchedule(T, times)


@settings(max_examples=25, deadline=None)
@given(long_schedules(), st.floats(0.0, 2.0))
def test_quadrature_equivalence(sched, f_scaled):
    tf = toggling(sched)
    f = f_scaled * (sched.n + 1) / sched.total_duration
    ref = quad_transform(tf, f)
    got = complex(filter_transform(tf, f))
    assert abs(got - ref) <= 1e-8 * max(abs(ref), 1e-3 * sched.total_duration)


@settings(max_examples=60, deadline=None)
@given(schedules(), st.floats(-500.0, 500.0))
def test_transform_bounded_and_hermitian(sched, f):
    tf = toggling(sched)
    F = filter_transform(tf, f)
    assert abs(F) <= sched.total_duration * (1 + 1e-12)
    assert filter_transform(tf, -f) == pytest.approx(np.conj(F), abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(schedules(), st.floats(0.0, 300.0))
def test_time_reversal_preserves_magnitude(sched, f):
    T = sched.total_duration
    rev = PulseSchedule(T, np.sort(T - sched.pulse_times))
    a = abs(filter_transform(toggling(sched), f))
    b = abs(filter_transform(toggling(rev), f))
    assert a == pytest.approx(b, rel=1e-9, abs=1e-15)


# ---------------------------------------------------------------- peaks

def brute_force_peak(tf, lo, hi, points=40_001):
    f = np.linspace(lo, hi, points)
    a = np.abs(filter_transform(tf, f))
    i = int(np.argmax(a))
    g = np.linspace(f[max(i - 1, 0)], f[min(i + 1, points - 1)], 20_001)
    b = np.abs(filter_transform(tf, g))
    return g[np.argmax(b)], b.max()


@pytest.mark.parametrize("n", [3, 7, 11, 19])
def test_equidistant_peak_matches_brute_force(n):
    T = 0.0667
    f0 = (n + 1) / (2 * T)
    tf = toggling(make_equidistant(n, f0))
    f_peak, mag = filter_peak(tf, 1e-6, 2 * f0, 0.25 / T)
    ref_f, ref_m = brute_force_peak(tf, 1e-6, 2 * f0)
    assert f_peak == pytest.approx(ref_f, abs=2e-3)
    assert mag == pytest.approx(ref_m, rel=1e-9)


def test_equidistant_peak_approaches_fundamental():
    # the finite window pulls the maximum slightly below (n+1)/(2T); the
    # offset shrinks with n and the height tends to the square-wave value 2T/pi
    T = 0.0667
    offsets = []
    for n in (7, 11, 19, 39):
        f0 = (n + 1) / (2 * T)
        f_peak, mag = filter_peak(toggling(make_equidistant(n, f0)), 0.5 * f0, 1.5 * f0, 0.25 / T)
        offsets.append(abs(f_peak - f0) / f0)
        assert mag / T == pytest.approx(2 / math.pi, rel=0.02)
    assert offsets[0] < 0.02
    assert all(a > b for a, b in zip(offsets, offsets[1:]))


def test_fundamental_amplitude_at_100hz():
    tf = toggling(make_equidistant(19, 100.0))
    assert tf.total_duration == pytest.approx(0.1)
    assert abs(filter_transform(tf, 100.0)) == pytest.approx(2 / math.pi * 0.1, rel=0.02)


def test_echo_peak_matches_brute_force():
    T = 0.02
    tf = toggling(make_equidistant(1, 1 / T))
    f_peak, _ = filter_peak(tf, 1e-6, 2 / T, 0.25 / T)
    ref_f, _ = brute_force_peak(tf, 1e-6, 2 / T)
    assert f_peak == pytest.approx(ref_f, abs=2e-3)


def test_reference_filter_peaks():
    T = 0.0667
    f_peak, _ = filter_peak(toggling(make_equidistant(19, 20 / (2 * T))), 50.0, 300.0, 0.25)
    assert f_peak == pytest.approx(150.0, abs=1.0)
    f_peak, mag = filter_peak(toggling(make_uhrig(20, T)), 50.0, 300.0, 0.25)
    assert f_peak == pytest.approx(109.6, abs=1.0)
    assert 0.40 <= mag / T <= 0.44


def test_peak_refines_beyond_grid():
    tf = toggling(make_equidistant(19, 150.0))
    coarse, _ = filter_peak(tf, 100.0, 200.0, 3.0)
    fine, _ = filter_peak(tf, 100.0, 200.0, 0.01)
    assert coarse == pytest.approx(fine, abs=0.01)


def test_free_evolution_peak_at_zero():
    tf = toggling(PulseSchedule(0.05, []))
    f_peak, mag = filter_peak(tf, 0.0, 100.0, 0.5)
    assert f_peak == pytest.approx(0.0, abs=1e-3)
    assert mag == pytest.approx(0.05)


def test_peak_empty_range():
    tf = toggling(make_equidistant(3, 100.0))
    with pytest.raises(InvalidArgumentError):
        filter_peak(tf, 200.0, 100.0, 1.0)
