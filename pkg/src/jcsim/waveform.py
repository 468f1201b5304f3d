"""Unmodulated FMCW and step-frequency carriers in complex baseband.

Phases are kept in cycles throughout; the factor 2*pi only appears when a
complex exponential is formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import DomainError, ParameterError

SPEED_OF_LIGHT = 299_792_458.0

# relative slack when checking t against the pulse support
_EDGE_RTOL = 1e-12


@dataclass(frozen=True)
class FmcwCarrier:
    """Linear chirp ``f(t) = slope * t + f0`` over ``[0, Tp]``."""

    slope: float
    Tp: float
    f0: float = 0.0
    theta0: float = 0.0

    def __post_init__(self):
        if not (self.slope > 0 and np.isfinite(self.slope)):
            raise ParameterError(f"slope must be positive and finite, got {self.slope}")
        if not (self.Tp > 0 and np.isfinite(self.Tp)):
            raise ParameterError(f"Tp must be positive and finite, got {self.Tp}")
        if self.f0 < 0:
            raise ParameterError(f"f0 must be >= 0, got {self.f0}")

    @property
    def bandwidth(self) -> float:
        """Swept bandwidth ``slope * Tp`` in Hz."""
        return self.slope * self.Tp


@dataclass(frozen=True)
class SfCarrier:
    """Step-frequency ladder of ``K`` steps, ``delta_t`` long, ``delta_f`` apart."""

    delta_f: float
    delta_t: float
    K: int
    f0: float = 0.0
    theta0: float = 0.0

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ParameterError(f"K must be a positive integer, got {self.K}")
        if not self.delta_f > 0:
            raise ParameterError(f"delta_f must be positive, got {self.delta_f}")
        if not self.delta_t > 0:
            raise ParameterError(f"delta_t must be positive, got {self.delta_t}")
        if self.f0 < 0:
            raise ParameterError(f"f0 must be >= 0, got {self.f0}")

    @property
    def Tp(self) -> float:
        return self.K * self.delta_t

    @property
    def bandwidth(self) -> float:
        return self.K * self.delta_f

    @classmethod
    def matching(cls, fmcw: FmcwCarrier, K: int) -> "SfCarrier":
        """SF ladder with the same duration and bandwidth as ``fmcw``."""
        return cls(delta_f=fmcw.bandwidth / K, delta_t=fmcw.Tp / K, K=K,
                   f0=fmcw.f0, theta0=fmcw.theta0)


Carrier = Union[FmcwCarrier, SfCarrier]


@dataclass(frozen=True, eq=False)
class ComplexSignal:
    """Uniformly sampled complex signal; sample ``n`` sits at ``t_start + n / sample_rate``."""

    samples: np.ndarray
    sample_rate: float
    t_start: float = 0.0
    _times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 1:
            raise ParameterError("samples must be one-dimensional")
        if not self.sample_rate > 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        times = self.t_start + np.arange(samples.size) / self.sample_rate
        times.setflags(write=False)
        object.__setattr__(self, "_times", times)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples) -> "ComplexSignal":
        """Same time base, new sample values."""
        return ComplexSignal(samples, self.sample_rate, self.t_start)


def num_samples(duration: float, sample_rate: float) -> int:
    """Samples needed to cover ``duration`` at ``sample_rate``."""
    if not sample_rate > 0:
        raise ParameterError(f"sample_rate must be positive, got {sample_rate}")
    return int(round(duration * sample_rate))


def pulse_times(Tp: float, sample_rate: float) -> np.ndarray:
    return np.arange(num_samples(Tp, sample_rate)) / sample_rate


def _check_support(t: np.ndarray, Tp: float) -> None:
    slack = _EDGE_RTOL * Tp
    if np.any(t < -slack) or np.any(t > Tp + slack):
        raise DomainError(f"time outside pulse support [0, {Tp}]")


def fmcw_phase(t, c: FmcwCarrier):
    """Chirp phase in cycles, ``slope*t**2/2 + f0*t + theta0``.

    Raises
    ------
    DomainError
        If any ``t`` lies outside ``[0, Tp]``.
    """
    t = np.asarray(t, dtype=float)
    _check_support(t, c.Tp)
    return 0.5 * c.slope * t * t + c.f0 * t + c.theta0


def step_index(t, delta_t: float, K: int) -> np.ndarray:
    """Zero-based step index ``min(K-1, floor(t / delta_t))``."""
    t = np.asarray(t, dtype=float)
    return np.minimum(K - 1, np.floor(t / delta_t).astype(np.int64))


def sf_frequency(t, c: SfCarrier):
    """Instantaneous frequency of the SF ladder; step ``k`` (1-based) sits at ``(k-1)*delta_f + f0``."""
    t = np.asarray(t, dtype=float)
    _check_support(t, c.Tp)
    return step_index(t, c.delta_t, c.K) * c.delta_f + c.f0


def piecewise_phase(t, step_freqs: np.ndarray, delta_t: float, theta0: float = 0.0):
    """Continuous phase (cycles) of a piecewise-constant frequency ladder.

    ``step_freqs[i]`` holds on ``[i*delta_t, (i+1)*delta_t)``; the phase is
    the running integral of frequency so it never jumps at step edges.
    """
    t = np.asarray(t, dtype=float)
    step_freqs = np.asarray(step_freqs, dtype=float)
    # phase accumulated at the start of each step
    start = np.concatenate(([0.0], np.cumsum(step_freqs[:-1] * delta_t)))
    i = step_index(t, delta_t, step_freqs.size)
    return theta0 + start[i] + step_freqs[i] * (t - i * delta_t)


def sf_phase(t, c: SfCarrier):
    """Continuous phase (cycles) of the unmodulated SF ladder."""
    t = np.asarray(t, dtype=float)
    _check_support(t, c.Tp)
    freqs = np.arange(c.K) * c.delta_f + c.f0
    return piecewise_phase(t, freqs, c.delta_t, c.theta0)


def carrier_phase(t, c: Carrier):
    if isinstance(c, FmcwCarrier):
        return fmcw_phase(t, c)
    if isinstance(c, SfCarrier):
        return sf_phase(t, c)
    raise ParameterError(f"unknown carrier type {type(c).__name__}")


def cis(cycles) -> np.ndarray:
    """``exp(j*2*pi*cycles)``, with the integer part dropped first for accuracy."""
    cycles = np.asarray(cycles, dtype=float)
    return np.exp(2j * np.pi * np.mod(cycles, 1.0))


def synthesize_carrier(c: Carrier, sample_rate: float) -> ComplexSignal:
    """Unit-amplitude carrier sampled at ``n / sample_rate`` over one pulse."""
    if not sample_rate > 0:
        raise ParameterError(f"sample_rate must be positive, got {sample_rate}")
    t = pulse_times(c.Tp, sample_rate)
    return ComplexSignal(cis(carrier_phase(t, c)), sample_rate)


@lru_cache(maxsize=32)
def _carrier_samples(c: Carrier, sample_rate: float, n: int, t_start: float) -> np.ndarray:
    t = t_start + np.arange(n) / sample_rate
    out = cis(carrier_phase(t, c))
    out.setflags(write=False)
    return out


def carrier_samples(c: Carrier, r: ComplexSignal) -> np.ndarray:
    """Unit carrier on the time base of ``r``; cached, since receivers reuse it every pulse."""
    return _carrier_samples(c, float(r.sample_rate), len(r), float(r.t_start))
