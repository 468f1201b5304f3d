import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jcsim.errors import ParameterError
from jcsim.modulation import (FSK, QAM, FskSfConfig, QamFmcwConfig, SymbolStream, bits_to_ints,
                              fsk_map, fsk_sf_at, fsk_step_frequencies, ints_to_bits, modulate,
                              modulate_fsk_sf, modulate_qam_fmcw, qam_constellation, qam_decide,
                              qam_demap, qam_map, random_symbols)
from jcsim.waveform import FmcwCarrier, SfCarrier, synthesize_carrier

CHIRP = FmcwCarrier(29.98e12, 60e-6)


def test_config_invariants():
    cfg = QamFmcwConfig(16, 8, CHIRP)
    assert cfg.Ts == pytest.approx(7.5e-6)
    assert cfg.bits_per_symbol == 4
    for bad in (8, 32, 3, 1):
        with pytest.raises(ParameterError):
            QamFmcwConfig(bad, 8, CHIRP)
    with pytest.raises(ParameterError):
        QamFmcwConfig(4, 0, CHIRP)
    sf = SfCarrier.matching(CHIRP, 512)
    fcfg = FskSfConfig(8, 8, sf)
    assert fcfg.steps_per_symbol == 64
    assert fcfg.tone_spacing == pytest.approx(sf.delta_f / 8)
    with pytest.raises(ParameterError):
        FskSfConfig(8, 7, sf)
    with pytest.raises(ParameterError):
        FskSfConfig(6, 8, sf)


@pytest.mark.parametrize("M", [4, 16, 64])
def test_constellation_unit_energy_and_distinct(M):
    pts = qam_constellation(M)
    assert pts.size == M
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)
    assert np.unique(np.round(pts, 12)).size == M


def test_qpsk_is_constant_modulus():
    s = qam_map([0, 0], 4)
    assert abs(s.points[0]) == pytest.approx(1.0)
    np.testing.assert_allclose(np.abs(qam_constellation(4)), 1.0)


@pytest.mark.parametrize("M", [4, 16, 64])
def test_gray_neighbours_differ_in_one_bit(M):
    # exhaustive: every pair of nearest neighbours differs in exactly one bit
    pts = qam_constellation(M)
    k = M.bit_length() - 1
    dmin = np.min(np.abs(pts[:, None] - pts[None, :])[~np.eye(M, dtype=bool)])
    for a, b in itertools.combinations(range(M), 2):
        if abs(pts[a] - pts[b]) < dmin * 1.01:
            assert bin(a ^ b).count("1") == 1, (a, b)


@pytest.mark.parametrize("M", [4, 16, 64])
def test_map_demap_round_trip_exhaustive(M):
    k = M.bit_length() - 1
    labels = np.arange(M)
    bits = ints_to_bits(labels, k)
    sym = qam_map(bits, M)
    np.testing.assert_array_equal(sym.symbols, labels)
    np.testing.assert_array_equal(qam_demap(sym.points, M), bits)


def test_map_length_mismatch():
    with pytest.raises(ParameterError):
        qam_map([0, 1, 1], 16)
    with pytest.raises(ParameterError):
        bits_to_ints([0, 2], 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.lists(st.integers(0, 1), min_size=0, max_size=60))
def test_bits_ints_round_trip(half, raw):
    k = 2 * half
    bits = np.array(raw[: len(raw) - len(raw) % k], dtype=int)
    np.testing.assert_array_equal(ints_to_bits(bits_to_ints(bits, k), k), bits)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([4, 16, 64]), st.complex_numbers(max_magnitude=0.01))
def test_decision_is_robust_to_small_perturbation(M, eps):
    pts = qam_constellation(M)
    np.testing.assert_array_equal(qam_decide(pts + eps, M), np.arange(M))


def test_symbol_stream_validation():
    with pytest.raises(ParameterError):
        SymbolStream(QAM, 4, [0, 4])
    with pytest.raises(ParameterError):
        SymbolStream("PSK", 4, [0])
    s = SymbolStream(FSK, 8, [1, 2])
    assert s.points is None and len(s) == 2


def test_qam_fmcw_constant_envelope_and_rotation():
    cfg = QamFmcwConfig(4, 8, CHIRP)
    sym = SymbolStream(QAM, 4, np.zeros(8, dtype=int))
    s = modulate_qam_fmcw(sym, cfg, 40e6)
    np.testing.assert_allclose(np.abs(s.samples), 1.0)
    # rotating every symbol rotates the waveform pointwise
    rng = np.random.default_rng(0)
    sym = random_symbols(rng, cfg)
    rot = SymbolStream(QAM, 4, sym.symbols, sym.points * np.exp(0.7j))
    np.testing.assert_allclose(modulate(rot, cfg, 40e6).samples,
                               modulate(sym, cfg, 40e6).samples * np.exp(0.7j), atol=1e-12)


def test_qam_fmcw_amplitude_follows_symbol_periods():
    cfg = QamFmcwConfig(16, 4, FmcwCarrier(1e12, 8e-6))
    sym = SymbolStream(QAM, 16, [0, 5, 10, 15])
    s = modulate_qam_fmcw(sym, cfg, 10e6)
    base = synthesize_carrier(cfg.carrier, 10e6).samples
    ratio = s.samples / base
    np.testing.assert_allclose(ratio, np.repeat(sym.points, 20), atol=1e-12)


def test_wrong_symbol_count_raises():
    cfg = QamFmcwConfig(4, 8, CHIRP)
    with pytest.raises(ParameterError):
        modulate_qam_fmcw(SymbolStream(QAM, 4, [0] * 7), cfg, 40e6)
    with pytest.raises(ParameterError):
        modulate_qam_fmcw(SymbolStream(QAM, 16, [0] * 8), cfg, 40e6)


SMALL_SF = FskSfConfig(4, 2, SfCarrier(delta_f=2e6, delta_t=2e-6, K=8))


def test_fsk_zero_symbols_is_bare_ladder():
    sym = SymbolStream(FSK, 4, [0, 0])
    np.testing.assert_allclose(modulate_fsk_sf(sym, SMALL_SF, 32e6).samples,
                               synthesize_carrier(SMALL_SF.carrier, 32e6).samples, atol=1e-9)


def test_fsk_constant_modulus_and_step_table():
    sym = fsk_map([0, 1, 1, 1], 4)
    np.testing.assert_array_equal(sym.symbols, [1, 3])
    s = modulate_fsk_sf(sym, SMALL_SF, 32e6)
    np.testing.assert_allclose(np.abs(s.samples), 1.0)
    f = fsk_step_frequencies(sym, SMALL_SF)
    # steps 0-3 carry symbol 1, steps 4-7 symbol 3
    expected = np.arange(8) * 2e6 + np.repeat([1, 3], 4) * 0.5e6
    np.testing.assert_allclose(f, expected)


def test_fsk_per_step_dft_oracle():
    fs = 32e6
    sym = SymbolStream(FSK, 4, [2, 1])
    s = modulate_fsk_sf(sym, SMALL_SF, fs)
    per = int(round(SMALL_SF.carrier.delta_t * fs))
    nfft = 64 * per
    expected = fsk_step_frequencies(sym, SMALL_SF)
    for k in range(SMALL_SF.carrier.K):
        seg = s.samples[k * per:(k + 1) * per]
        kk = np.argmax(np.abs(np.fft.fft(seg, nfft)))
        f = kk * fs / nfft
        f = f - fs if f >= fs / 2 else f
        assert f == pytest.approx(expected[k], abs=fs / nfft)


def test_fsk_symbol_out_of_range():
    with pytest.raises(ParameterError):
        fsk_sf_at(SymbolStream(FSK, 8, [0, 1]), SMALL_SF, [0.0])
