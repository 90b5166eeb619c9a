import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leobeam.array import ArrayGeometry, steering_vector
from leobeam.geom import ArrivalDirection
from leobeam.link import (
    BeamformingMode,
    LinkBudget,
    beam_gain,
    channel,
    fspl_amplitude,
    fspl_db,
    sinr,
    sinr_batch,
    throughput,
    total_capacity,
)

BUDGET = LinkBudget()
LAM = BUDGET.wavelength_m
G = ArrayGeometry(4, 4)


def _feasible(rng, n, size=None):
    shape = (n,) if size is None else (size, n)
    w = rng.random(shape) * np.exp(2j * np.pi * rng.random(shape))
    return w / np.sum(np.abs(w), axis=-1, keepdims=True)


def test_budget_defaults_and_noise():
    assert LAM == pytest.approx(299_792_458.0 / 1.575e9)
    assert BUDGET.noise_power_w == pytest.approx(1.38e-23 * 20e6 * 290)
    b = LinkBudget(bandwidth_hz=10e6)
    assert b.noise_power_w == pytest.approx(BUDGET.noise_power_w / 2)
    with pytest.raises(ValueError):
        LinkBudget(bandwidth_hz=0.0)


def test_lambda_factor():
    assert BeamformingMode.ANALOG.lambda_factor(4) == 0.25
    assert BeamformingMode.DIGITAL.lambda_factor(4) == 1.0
    with pytest.raises(ValueError):
        BeamformingMode.ANALOG.lambda_factor(0)


# -- path loss ------------------------------------------------------------------------

def test_fspl_normalisation():
    assert fspl_amplitude(4 * math.pi, 1.0) == pytest.approx(1.0)


def test_fspl_l_band_800_km():
    lam = 0.19
    L = fspl_amplitude(lam, 8e5) ** 2
    # the power-domain loss is (0.19 / (4 pi 8e5))^2 = 3.57e-16 (-154.5 dB)
    assert L == pytest.approx((0.19 / (4 * math.pi * 8e5)) ** 2, rel=1e-12)
    assert L == pytest.approx(3.57e-16, rel=2e-3)
    f = 299_792_458.0 / lam
    oracle_db = 20 * math.log10(8e5) + 20 * math.log10(f) - 147.55
    assert fspl_db(lam, 8e5) == pytest.approx(oracle_db, abs=0.01)


def test_fspl_inverse_square():
    assert fspl_db(LAM, 2e6) - fspl_db(LAM, 1e6) == pytest.approx(20 * math.log10(2), abs=1e-12)
    with pytest.raises(ValueError):
        fspl_amplitude(LAM, 0.0)


# -- channel ------------------------------------------------------------------------------

def test_channel_composition():
    # wavelength 4*pi m at 1 m range gives unit loss; boresight gives unit phases
    h = channel(G, ArrivalDirection(0.0, 0.0, 1e-3), 4 * math.pi)
    assert np.allclose(h, 1.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        d = ArrivalDirection(rng.uniform(0, 6.28), rng.uniform(0, 1.2), rng.uniform(500, 3000))
        h = channel(G, d, LAM)
        amp = fspl_amplitude(LAM, d.range_km * 1e3)
        assert np.allclose(np.abs(h / amp), 1.0, atol=1e-12)
        assert np.allclose(h, amp * steering_vector(G, d, LAM), rtol=1e-14)


# -- SINR -------------------------------------------------------------------------------------

def _user(rng):
    d = ArrivalDirection(rng.uniform(0, 6.28), rng.uniform(0, 0.9), rng.uniform(800, 2000))
    return channel(G, d, LAM)


def test_matched_filter_snr_against_scalar_budget():
    rng = np.random.default_rng(1)
    h = _user(rng)
    w = np.conj(h) / np.sum(np.abs(h))
    P, sigma2 = 10.0, BUDGET.noise_power_w
    gamma = sinr(w, h, P, np.zeros((0, 16)), [], sigma2)
    # scalar budget: P * array gain MN * per-element power loss / noise
    L = np.abs(h[0]) ** 2
    assert gamma == pytest.approx(P * 16 * L / sigma2, rel=1e-12)


def test_null_at_user_gives_zero():
    rng = np.random.default_rng(2)
    h = _user(rng)
    w = _feasible(rng, 16)
    w = w - (w @ h) / (np.conj(h) @ h) * np.conj(h)  # remove the component seen by h
    assert sinr(w, h, 10.0, np.zeros((0, 16)), [], BUDGET.noise_power_w) == pytest.approx(0.0, abs=1e-20)


def test_co_located_interferer_gives_zero_db():
    rng = np.random.default_rng(3)
    h = _user(rng)
    w = _feasible(rng, 16)
    assert sinr(w, h, 5.0, h[None, :], [5.0], 0.0) == pytest.approx(1.0, rel=1e-12)


def test_sinr_scale_invariance():
    rng = np.random.default_rng(4)
    h, hi = _user(rng), _user(rng)[None, :]
    for _ in range(50):
        w = _feasible(rng, 16)
        alpha = rng.uniform(0.01, 5) * np.exp(2j * np.pi * rng.random())
        a = sinr(w, h, 10.0, hi, [100.0], BUDGET.noise_power_w)
        b = sinr(alpha * w, h, 10.0, hi, [100.0], BUDGET.noise_power_w)
        assert b == pytest.approx(a, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), p1=st.floats(0, 1e4), dp=st.floats(0, 1e4))
def test_sinr_non_increasing_in_interferer_power(seed, p1, dp):
    rng = np.random.default_rng(seed)
    h, hi = _user(rng), np.stack([_user(rng), _user(rng)])
    w = _feasible(rng, 16)
    a = sinr(w, h, 10.0, hi, [p1, 3.0], BUDGET.noise_power_w)
    b = sinr(w, h, 10.0, hi, [p1 + dp, 3.0], BUDGET.noise_power_w)
    assert b <= a * (1 + 1e-12)


def test_matched_filter_beats_random_weights():
    rng = np.random.default_rng(5)
    h = _user(rng)
    w0 = np.conj(h) / np.sum(np.abs(h))
    best = sinr(w0, h, 10.0, np.zeros((0, 16)), [], BUDGET.noise_power_w)
    W = _feasible(rng, 16, size=10_000)
    g = sinr_batch(W, h, [10.0], np.zeros((0, 16)), [], BUDGET.noise_power_w)[:, 0]
    assert np.all(g <= best * (1 + 1e-12))


def test_sinr_batch_matches_scalar_and_per_stream_form():
    rng = np.random.default_rng(6)
    Hu = np.stack([_user(rng), _user(rng)])
    Hi = np.stack([_user(rng) for _ in range(3)])
    Pi = [1.0, 50.0, 200.0]
    W = _feasible(rng, 16, size=5)
    g = sinr_batch(W, Hu, [10.0, 20.0], Hi, Pi, BUDGET.noise_power_w)
    for p in range(5):
        for k in range(2):
            assert g[p, k] == pytest.approx(
                sinr(W[p], Hu[k], [10.0, 20.0][k], Hi, Pi, BUDGET.noise_power_w), rel=1e-12)
    g2 = sinr_batch(np.repeat(W[:, None, :], 2, axis=1), Hu, [10.0, 20.0], Hi, Pi, BUDGET.noise_power_w)
    assert np.allclose(g, g2, rtol=1e-12)


def test_sinr_input_checks():
    rng = np.random.default_rng(7)
    h = _user(rng)
    with pytest.raises(ValueError):
        sinr([], h, 1.0, np.zeros((0, 16)), [], 1.0)
    with pytest.raises(ValueError):
        sinr(_feasible(rng, 16), h, -1.0, np.zeros((0, 16)), [], 1.0)
    assert sinr(np.zeros(16), h, 1.0, np.zeros((0, 16)), [], 1.0) == 0.0


def test_beam_gain():
    rng = np.random.default_rng(8)
    h = _user(rng)
    w = _feasible(rng, 16)
    assert beam_gain(w, h) == pytest.approx(abs(w @ h) ** 2)


# -- capacity -----------------------------------------------------------------------------

def test_throughput_cases():
    assert throughput(0.0, 20e6) == 0.0
    assert throughput(1.0, 1e6) == pytest.approx(1e6)
    assert throughput(15.0, 20e6) == pytest.approx(80e6)
    with pytest.raises(ValueError):
        throughput(-1.0, 1e6)


def test_total_capacity_lambda():
    assert total_capacity(BeamformingMode.ANALOG, [5.0]) == total_capacity(BeamformingMode.DIGITAL, [5.0])
    assert total_capacity(BeamformingMode.ANALOG, [3.0, 3.0]) == pytest.approx(3.0)
    assert total_capacity(BeamformingMode.DIGITAL, [3.0, 3.0]) == pytest.approx(6.0)
    caps = np.random.default_rng(9).uniform(0, 1e7, 3)
    assert total_capacity(BeamformingMode.ANALOG, caps) == pytest.approx(sum(caps) / 3)
    with pytest.raises(ValueError):
        total_capacity(BeamformingMode.DIGITAL, [])


def test_digital_reusing_analog_weights_dominates():
    rng = np.random.default_rng(10)
    for K in (1, 2, 5):
        Hu = np.stack([_user(rng) for _ in range(K)])
        w = _feasible(rng, 16)
        caps = throughput(sinr_batch(w[None], Hu, np.full(K, 10.0), np.zeros((0, 16)), [],
                                     BUDGET.noise_power_w)[0], BUDGET.bandwidth_hz)
        assert total_capacity(BeamformingMode.DIGITAL, caps) >= total_capacity(BeamformingMode.ANALOG, caps)
