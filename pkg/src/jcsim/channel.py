"""Point-target radar echo and synchronized communication link with AWGN."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ParameterError, ScenarioError
from .modulation import (QAM, QamFmcwConfig, SchemeConfig, SymbolStream, _check_stream,
                         symbol_index, waveform_at)
from .waveform import SPEED_OF_LIGHT, ComplexSignal, cis, fmcw_phase, pulse_times


@dataclass(frozen=True)
class ChannelScenario:
    """Stationary target at ``distance`` metres; noise given as a PSD ``N0`` (W/Hz).

    The per-sample noise variance at sample rate ``fs`` is ``N0 * fs``.
    ``carrier_frequency`` is the RF centre the baseband model stands for; it
    is never sampled and only contributes the echo phase ``-f_rf * tau``.
    """

    distance: float
    gain: float = 1.0
    N0: float = 0.0
    c: float = SPEED_OF_LIGHT
    seed: Optional[int] = None
    carrier_frequency: float = 0.0

    def __post_init__(self):
        if self.distance < 0:
            raise ParameterError(f"distance must be >= 0, got {self.distance}")
        if not self.gain > 0:
            raise ParameterError(f"gain must be positive, got {self.gain}")
        if self.N0 < 0:
            raise ParameterError(f"N0 must be >= 0, got {self.N0}")
        if not self.c > 0:
            raise ParameterError(f"c must be positive, got {self.c}")
        if self.carrier_frequency < 0:
            raise ParameterError("carrier_frequency must be >= 0")

    @classmethod
    def from_noise_power(cls, distance: float, noise_power: float, sample_rate: float,
                         **kw) -> "ChannelScenario":
        """Scenario whose per-sample noise variance at ``sample_rate`` is ``noise_power``."""
        return cls(distance=distance, N0=noise_power / sample_rate, **kw)

    @property
    def round_trip_delay(self) -> float:
        return 2.0 * self.distance / self.c

    @property
    def one_way_delay(self) -> float:
        return self.distance / self.c

    def noise_variance(self, sample_rate: float) -> float:
        return self.N0 * sample_rate


def complex_awgn(rng: np.random.Generator, n: int, variance: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian noise with ``E|w|^2 = variance``."""
    if variance == 0:
        return np.zeros(n, dtype=complex)
    # consecutive (re, im) pairs, same draws as a (n, 2) array
    return rng.standard_normal(2 * n).view(np.complex128) * np.sqrt(variance / 2)


def _rng(scen: ChannelScenario, rng: Optional[np.random.Generator]) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(scen.seed)


@lru_cache(maxsize=16)
def _delayed_chirp(carrier, sample_rate: float, n: int, tau: float) -> np.ndarray:
    u = np.arange(n) / sample_rate - tau
    on = (u >= 0) & (u < carrier.Tp)
    out = np.zeros(n, dtype=complex)
    out[on] = cis(fmcw_phase(u[on], carrier))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def _delayed_symbol_index(cfg: QamFmcwConfig, sample_rate: float, n: int, tau: float) -> np.ndarray:
    # index Ns points at an appended zero before the echo arrives
    u = np.arange(n) / sample_rate - tau
    idx = np.full(n, cfg.Ns, dtype=np.int64)
    on = (u >= 0) & (u < cfg.carrier.Tp)
    idx[on] = symbol_index(u[on], cfg.Ts, cfg.Ns)
    idx.setflags(write=False)
    return idx


def _delayed_waveform(sym, cfg, sample_rate, t, tau):
    if isinstance(cfg, QamFmcwConfig):
        # cached chirp and symbol timing; only the symbol values change per pulse
        _check_stream(sym, cfg, QAM)
        fs = float(sample_rate)
        env = np.append(sym.points, 0)[_delayed_symbol_index(cfg, fs, t.size, tau)]
        return env * _delayed_chirp(cfg.carrier, fs, t.size, tau)
    return waveform_at(sym, cfg, t - tau)


def radar_return(sym: SymbolStream, cfg: SchemeConfig, scen: ChannelScenario,
                 sample_rate: float, rng: Optional[np.random.Generator] = None) -> ComplexSignal:
    """Echo of one pulse from a point target, sampled over the transmit window.

    The delayed waveform is evaluated analytically at ``t - 2d/c``, so
    fractional-sample delays are exact. Samples before the echo arrives hold
    noise only. Pass ``rng`` to draw noise from an existing generator instead
    of ``scen.seed``.
    """
    Tp = cfg.carrier.Tp
    tau = scen.round_trip_delay
    if tau >= Tp:
        raise ScenarioError(
            f"target beyond unambiguous processing window (tau={tau:.3e} s >= Tp={Tp:.3e} s)")
    t = pulse_times(Tp, sample_rate)
    echo = np.sqrt(scen.gain) * _delayed_waveform(sym, cfg, sample_rate, t, tau)
    if scen.carrier_frequency:
        echo = echo * cis(-scen.carrier_frequency * tau)
    noise = complex_awgn(_rng(scen, rng), t.size, scen.noise_variance(sample_rate))
    return ComplexSignal(echo + noise, sample_rate)


def comm_received(sym: SymbolStream, cfg: SchemeConfig, scen: ChannelScenario,
                  sample_rate: float, rng: Optional[np.random.Generator] = None) -> ComplexSignal:
    """Signal at the perfectly synchronized communication receiver.

    Synchronization removes the one-way delay ``d/c``, leaving gain and noise.
    """
    t = pulse_times(cfg.carrier.Tp, sample_rate)
    rx = np.sqrt(scen.gain) * _delayed_waveform(sym, cfg, sample_rate, t, 0.0)
    rx = rx + complex_awgn(_rng(scen, rng), t.size, scen.noise_variance(sample_rate))
    return ComplexSignal(rx, sample_rate)
