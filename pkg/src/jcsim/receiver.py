"""Communication receivers for QAM-FMCW and FSK-SF under perfect synchronization."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ParameterError
from .modulation import (FSK, QAM, FskSfConfig, QamFmcwConfig, SymbolStream, ints_to_bits,
                         qam_constellation, qam_decide, symbol_index)
from .waveform import ComplexSignal, carrier_samples, cis, num_samples


@dataclass(frozen=True, eq=False)
class DemodResult:
    """Decided symbols plus error counts against a reference, when one was given."""

    symbols: SymbolStream
    soft: np.ndarray
    symbol_errors: Optional[int] = None
    bit_errors: Optional[int] = None
    evm: Optional[float] = None

    @property
    def n_symbols(self) -> int:
        return len(self.symbols)

    @property
    def n_bits(self) -> int:
        return len(self.symbols) * (self.symbols.M.bit_length() - 1)


def _check_length(r: ComplexSignal, Tp: float) -> None:
    n = num_samples(Tp, r.sample_rate)
    if len(r) != n:
        raise ParameterError(f"expected {n} samples for one pulse, got {len(r)}")


def _count_errors(decided: SymbolStream, reference: Optional[SymbolStream]):
    if reference is None:
        return None, None
    if reference.M != decided.M or len(reference) != len(decided):
        raise ParameterError("reference symbols do not match the configuration")
    k = decided.M.bit_length() - 1
    sym_err = int(np.count_nonzero(decided.symbols != reference.symbols))
    bit_err = int(np.count_nonzero(ints_to_bits(decided.symbols, k)
                                   != ints_to_bits(reference.symbols, k)))
    return sym_err, bit_err


def demod_qam_fmcw(r: ComplexSignal, cfg: QamFmcwConfig,
                   reference: Optional[SymbolStream] = None, gain: float = 1.0) -> DemodResult:
    """Remove the chirp, integrate over each symbol period and slice.

    ``gain`` is the known channel power gain; the receiver scales by
    ``1/sqrt(gain)`` before the minimum-distance decision.
    """
    _check_length(r, cfg.carrier.Tp)
    t = r.times
    base = r.samples * np.conj(carrier_samples(cfg.carrier, r)) / np.sqrt(gain)
    idx = symbol_index(t, cfg.Ts, cfg.Ns)
    counts = np.bincount(idx, minlength=cfg.Ns)
    if np.any(counts == 0):
        raise ParameterError("sample rate too low: some symbol periods hold no samples")
    z = (np.bincount(idx, base.real, cfg.Ns) + 1j * np.bincount(idx, base.imag, cfg.Ns)) / counts
    labels = qam_decide(z, cfg.M)
    decided = SymbolStream(QAM, cfg.M, labels)
    evm = float(np.sqrt(np.mean(np.abs(z - qam_constellation(cfg.M)[labels]) ** 2)))
    sym_err, bit_err = _count_errors(decided, reference)
    return DemodResult(decided, z, sym_err, bit_err, evm)


@lru_cache(maxsize=16)
def _tone_bank(cfg: FskSfConfig, sample_rate: float, n: int):
    """Block start indices and the conjugate FSK tones, timed from each block start."""
    t = np.arange(n) / sample_rate
    block = symbol_index(t, cfg.Ts, cfg.Ns)
    starts = np.flatnonzero(np.diff(block, prepend=-1))
    t_rel = t - block * cfg.Ts
    bank = cis(-np.outer(t_rel, np.arange(cfg.M) * cfg.tone_spacing))
    bank.setflags(write=False)
    return starts, bank


def demod_fsk_sf(r: ComplexSignal, cfg: FskSfConfig,
                 reference: Optional[SymbolStream] = None) -> DemodResult:
    """Mix each step down by its ladder frequency and pick the strongest FSK tone.

    Detection is a noncoherent bank of ``M`` correlators at ``m*delta_f/M``
    over each symbol; exact ties go to the smaller ``m``.
    """
    c = cfg.carrier
    _check_length(r, c.Tp)
    t = r.times
    # the ladder LO is phase-continuous like the transmitter
    mixed = r.samples * np.conj(carrier_samples(c, r))
    starts, bank = _tone_bank(cfg, float(r.sample_rate), len(r))
    if starts.size != cfg.Ns:
        raise ParameterError("sample rate too low: some symbol periods hold no samples")
    corr = np.add.reduceat(mixed[:, None] * bank, starts, axis=0)
    power = corr.real ** 2 + corr.imag ** 2
    decided = SymbolStream(FSK, cfg.M, np.argmax(power, axis=1))
    sym_err, bit_err = _count_errors(decided, reference)
    return DemodResult(decided, corr, sym_err, bit_err)
