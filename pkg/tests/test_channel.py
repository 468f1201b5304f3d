import numpy as np
import pytest

from jcsim.channel import ChannelScenario, comm_received, complex_awgn, radar_return
from jcsim.errors import ParameterError, ScenarioError
from jcsim.modulation import FskSfConfig, QamFmcwConfig, modulate, random_symbols, waveform_at
from jcsim.waveform import SPEED_OF_LIGHT, FmcwCarrier, SfCarrier, cis, pulse_times

FS = 40e6
QCFG = QamFmcwConfig(16, 8, FmcwCarrier(29.98e12, 60e-6))
FCFG = FskSfConfig(8, 8, SfCarrier.matching(FmcwCarrier(29.98e12, 60e-6), 512))


@pytest.fixture
def sym():
    return random_symbols(np.random.default_rng(11), QCFG)


def test_zero_distance_noiseless_is_identity(sym):
    r = radar_return(sym, QCFG, ChannelScenario(0.0), FS)
    np.testing.assert_array_equal(r.samples, modulate(sym, QCFG, FS).samples)


@pytest.mark.parametrize("cfg", [QCFG, FCFG], ids=["qam", "fsk"])
def test_echo_is_analytic_delay(cfg):
    sym = random_symbols(np.random.default_rng(2), cfg)
    tau = 2 * 100.0 / SPEED_OF_LIGHT
    assert tau == pytest.approx(0.667e-6, rel=1e-3)
    r = radar_return(sym, cfg, ChannelScenario(100.0), FS)
    t = pulse_times(cfg.carrier.Tp, FS)
    np.testing.assert_allclose(r.samples, waveform_at(sym, cfg, t - tau), atol=1e-12)
    # nothing before the echo arrives
    assert np.all(r.samples[t < tau] == 0)


def test_rf_carrier_adds_constant_phase(sym):
    tau = 2 * 100.0 / SPEED_OF_LIGHT
    a = radar_return(sym, QCFG, ChannelScenario(100.0), FS).samples
    b = radar_return(sym, QCFG, ChannelScenario(100.0, carrier_frequency=77e9), FS).samples
    np.testing.assert_allclose(b, a * cis(-77e9 * tau), atol=1e-12)


def test_target_beyond_window(sym):
    with pytest.raises(ScenarioError):
        radar_return(sym, QCFG, ChannelScenario(9000.0), FS)


def test_scenario_validation():
    with pytest.raises(ParameterError):
        ChannelScenario(-1.0)
    with pytest.raises(ParameterError):
        ChannelScenario(1.0, gain=0)
    with pytest.raises(ParameterError):
        ChannelScenario(1.0, N0=-1)
    s = ChannelScenario.from_noise_power(10.0, 2.0, FS)
    assert s.noise_variance(FS) == pytest.approx(2.0)
    assert s.one_way_delay * 2 == pytest.approx(s.round_trip_delay)


def test_noise_power_monte_carlo():
    w = complex_awgn(np.random.default_rng(5), 10 ** 6, 3.0)
    assert np.mean(np.abs(w) ** 2) == pytest.approx(3.0, rel=0.01)
    # circular: real and imaginary parts carry half each and are uncorrelated
    assert np.var(w.real) == pytest.approx(1.5, rel=0.01)
    assert abs(np.mean(w.real * w.imag)) < 0.01


def test_comm_snr_within_tenth_db(sym):
    scen = ChannelScenario.from_noise_power(100.0, 0.1, FS, seed=4)
    n = 0
    clean = modulate(sym, QCFG, FS).samples
    err = []
    while n < 10 ** 5:
        rx = comm_received(sym, QCFG, scen, FS, np.random.default_rng(n))
        err.append(rx.samples - clean)
        n += len(rx)
    noise = np.mean(np.abs(np.concatenate(err)) ** 2)
    # unit average signal power against the configured noise power 0.1
    snr_db = 10 * np.log10(1.0 / noise)
    assert snr_db == pytest.approx(10.0, abs=0.1)


def test_comm_gain_scaling_and_identity(sym):
    clean = modulate(sym, QCFG, FS).samples
    np.testing.assert_array_equal(comm_received(sym, QCFG, ChannelScenario(50.0), FS).samples, clean)
    rx = comm_received(sym, QCFG, ChannelScenario(50.0, gain=4.0), FS)
    np.testing.assert_allclose(rx.samples, 2 * clean)


def test_seeded_noise_is_reproducible(sym):
    scen = ChannelScenario(100.0, N0=1e-8, seed=123)
    a = radar_return(sym, QCFG, scen, FS).samples
    b = radar_return(sym, QCFG, scen, FS).samples
    np.testing.assert_array_equal(a, b)
