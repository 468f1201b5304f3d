"""QAM over an FMCW chirp and FSK over a step-frequency ladder."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .errors import ParameterError
from .waveform import (ComplexSignal, FmcwCarrier, SfCarrier, cis, fmcw_phase,
                       piecewise_phase, pulse_times)

QAM = "QAM"
FSK = "FSK"


def _log2_int(M: int) -> int:
    k = int(M).bit_length() - 1
    if M < 2 or (1 << k) != M:
        raise ParameterError(f"order must be a power of two >= 2, got {M}")
    return k


def _check_square_qam(M: int) -> int:
    k = _log2_int(M)
    if k % 2:
        raise ParameterError(f"square QAM needs M = 4**n, got {M}")
    return k


@dataclass(frozen=True)
class QamFmcwConfig:
    M: int
    Ns: int
    carrier: FmcwCarrier

    def __post_init__(self):
        _check_square_qam(self.M)
        if int(self.Ns) != self.Ns or self.Ns < 1:
            raise ParameterError(f"Ns must be a positive integer, got {self.Ns}")

    @property
    def Ts(self) -> float:
        return self.carrier.Tp / self.Ns

    @property
    def bits_per_symbol(self) -> int:
        return _log2_int(self.M)


@dataclass(frozen=True)
class FskSfConfig:
    M: int
    Ns: int
    carrier: SfCarrier

    def __post_init__(self):
        _log2_int(self.M)
        if int(self.Ns) != self.Ns or self.Ns < 1:
            raise ParameterError(f"Ns must be a positive integer, got {self.Ns}")
        if self.carrier.K % self.Ns:
            raise ParameterError(f"K={self.carrier.K} is not a multiple of Ns={self.Ns}")

    @property
    def steps_per_symbol(self) -> int:
        return self.carrier.K // self.Ns

    @property
    def Ts(self) -> float:
        return self.carrier.Tp / self.Ns

    @property
    def bits_per_symbol(self) -> int:
        return _log2_int(self.M)

    @property
    def tone_spacing(self) -> float:
        return self.carrier.delta_f / self.M


SchemeConfig = Union[QamFmcwConfig, FskSfConfig]


@dataclass(frozen=True, eq=False)
class SymbolStream:
    """Integer symbols in ``[0, M)``; QAM streams also carry their constellation points."""

    scheme: str
    M: int
    symbols: np.ndarray
    points: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.scheme not in (QAM, FSK):
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        symbols = np.asarray(self.symbols, dtype=np.int64)
        if symbols.ndim != 1:
            raise ParameterError("symbols must be one-dimensional")
        if np.any(symbols < 0) or np.any(symbols >= self.M):
            raise ParameterError(f"symbols must lie in [0, {self.M})")
        symbols.setflags(write=False)
        object.__setattr__(self, "symbols", symbols)
        if self.scheme == QAM:
            points = (qam_constellation(self.M)[symbols] if self.points is None
                      else np.asarray(self.points, dtype=complex))
            if points.shape != symbols.shape:
                raise ParameterError("points and symbols differ in length")
            points.setflags(write=False)
            object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.symbols.size


# --- bit <-> integer helpers -------------------------------------------------

def bits_to_ints(bits, k: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if np.any((bits != 0) & (bits != 1)):
        raise ParameterError("bits must be 0 or 1")
    if bits.size % k:
        raise ParameterError(f"{bits.size} bits do not split into {k}-bit symbols")
    weights = 1 << np.arange(k - 1, -1, -1)
    return bits.reshape(-1, k) @ weights


def ints_to_bits(values, k: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1)
    return ((values[:, None] >> shifts) & 1).ravel()


def _gray_decode(g: np.ndarray) -> np.ndarray:
    b = g.copy()
    shift = g >> 1
    while np.any(shift):
        b ^= shift
        shift >>= 1
    return b


@lru_cache(maxsize=None)
def _qam_table(M: int) -> np.ndarray:
    k = _check_square_qam(M)
    half = k // 2
    side = 1 << half
    ints = np.arange(M)
    # high half of the label picks I, low half picks Q; each half is Gray coded
    i_level = _gray_decode(ints >> half)
    q_level = _gray_decode(ints & (side - 1))
    pts = (2 * i_level - (side - 1)) + 1j * (2 * q_level - (side - 1))
    pts = pts / np.sqrt(2 * (M - 1) / 3)
    pts.setflags(write=False)
    return pts


def qam_constellation(M: int) -> np.ndarray:
    """Unit-average-energy Gray-coded square constellation, indexed by symbol label."""
    return _qam_table(M)


def qam_map(bits, M: int) -> SymbolStream:
    """Map a bit sequence (MSB first per symbol) to Gray-coded QAM symbols."""
    k = _check_square_qam(M)
    labels = bits_to_ints(bits, k)
    return SymbolStream(QAM, M, labels)


def qam_decide(z, M: int) -> np.ndarray:
    """Minimum-distance decision; returns symbol labels."""
    z = np.asarray(z, dtype=complex)
    table = qam_constellation(M)
    d = np.abs(z.reshape(-1, 1) - table[None, :])
    return np.argmin(d, axis=1).reshape(z.shape)


def qam_demap(points, M: int) -> np.ndarray:
    """Hard-decide ``points`` and return the bit sequence."""
    return ints_to_bits(qam_decide(points, M).ravel(), _check_square_qam(M))


def fsk_map(bits, M: int) -> SymbolStream:
    """Natural-binary mapping of bits to FSK tone indices."""
    return SymbolStream(FSK, M, bits_to_ints(bits, _log2_int(M)))


def random_symbols(rng: np.random.Generator, cfg: SchemeConfig) -> SymbolStream:
    """One pulse worth of i.i.d. uniform symbols."""
    scheme = QAM if isinstance(cfg, QamFmcwConfig) else FSK
    return SymbolStream(scheme, cfg.M, rng.integers(0, cfg.M, size=cfg.Ns))


def _check_stream(sym: SymbolStream, cfg: SchemeConfig, scheme: str) -> None:
    if sym.scheme != scheme:
        raise ParameterError(f"expected {scheme} symbols, got {sym.scheme}")
    if sym.M != cfg.M:
        raise ParameterError(f"symbol order {sym.M} does not match config M={cfg.M}")
    if len(sym) != cfg.Ns:
        raise ParameterError(f"need exactly Ns={cfg.Ns} symbols, got {len(sym)}")


# --- analytic waveform evaluation --------------------------------------------

def symbol_index(t, Ts: float, Ns: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.clip(np.floor(t / Ts).astype(np.int64), 0, Ns - 1)


def qam_fmcw_at(sym: SymbolStream, cfg: QamFmcwConfig, t) -> np.ndarray:
    """Evaluate the QAM-FMCW pulse at arbitrary times; zero outside ``[0, Tp)``."""
    _check_stream(sym, cfg, QAM)
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    on = (t >= 0) & (t < cfg.carrier.Tp)
    tt = t[on]
    out[on] = sym.points[symbol_index(tt, cfg.Ts, cfg.Ns)] * cis(fmcw_phase(tt, cfg.carrier))
    return out


def fsk_step_frequencies(sym: SymbolStream, cfg: FskSfConfig) -> np.ndarray:
    """Frequency of every step, ladder plus the symbol's fine offset ``m*delta_f/M``."""
    _check_stream(sym, cfg, FSK)
    c = cfg.carrier
    step = np.arange(c.K)
    # 1-based step k belongs to 1-based symbol ceil(k*Ns/K)
    m = sym.symbols[step // cfg.steps_per_symbol]
    return step * c.delta_f + c.f0 + m * cfg.tone_spacing


def fsk_sf_at(sym: SymbolStream, cfg: FskSfConfig, t) -> np.ndarray:
    """Evaluate the phase-continuous FSK-SF pulse at arbitrary times; zero outside ``[0, Tp)``."""
    freqs = fsk_step_frequencies(sym, cfg)
    c = cfg.carrier
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    on = (t >= 0) & (t < c.Tp)
    out[on] = cis(piecewise_phase(t[on], freqs, c.delta_t, c.theta0))
    return out


def waveform_at(sym: SymbolStream, cfg: SchemeConfig, t) -> np.ndarray:
    if isinstance(cfg, QamFmcwConfig):
        return qam_fmcw_at(sym, cfg, t)
    if isinstance(cfg, FskSfConfig):
        return fsk_sf_at(sym, cfg, t)
    raise ParameterError(f"unknown scheme config {type(cfg).__name__}")


def modulate_qam_fmcw(sym: SymbolStream, cfg: QamFmcwConfig, sample_rate: float) -> ComplexSignal:
    """One QAM-FMCW pulse: ``A[floor(t/Ts)] * exp(j*2*pi*theta(t))``."""
    return ComplexSignal(qam_fmcw_at(sym, cfg, pulse_times(cfg.carrier.Tp, sample_rate)),
                         sample_rate)


def modulate_fsk_sf(sym: SymbolStream, cfg: FskSfConfig, sample_rate: float) -> ComplexSignal:
    """One FSK-SF pulse with continuous phase across steps."""
    return ComplexSignal(fsk_sf_at(sym, cfg, pulse_times(cfg.carrier.Tp, sample_rate)),
                         sample_rate)


def modulate(sym: SymbolStream, cfg: SchemeConfig, sample_rate: float) -> ComplexSignal:
    if isinstance(cfg, QamFmcwConfig):
        return modulate_qam_fmcw(sym, cfg, sample_rate)
    return modulate_fsk_sf(sym, cfg, sample_rate)
