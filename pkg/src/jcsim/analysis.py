"""Closed-form performance metrics and spectral occupancy measurements.

Covers the QAM bit-error bound, the approximate capacity and throughput of
the JCS link, Cramer-Rao bounds for beat-frequency and range estimation, and
averaged-periodogram PSD estimates used to check how bandwidth splits
between the symbol stream and the chirp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal, special

from .errors import ParameterError
from .modulation import QamFmcwConfig, SymbolStream, modulate_qam_fmcw, random_symbols
from .waveform import SPEED_OF_LIGHT, ComplexSignal, num_samples

# 99% power width of sinc^2(f*Ts), in units of 1/Ts
SINC2_99_WIDTH = 20.5716


def q_function(x):
    """Gaussian tail probability ``Q(x) = erfc(x/sqrt(2))/2``."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def _check_order(M: int) -> float:
    k = int(M).bit_length() - 1
    if M < 4 or (1 << k) != M:
        raise ParameterError(f"M must be a power of two >= 4, got {M}")
    return float(k)


def qam_ber_bound(M: int, snr):
    """Upper bound ``4*Q(sqrt(3*log2(M)/(M-1) * snr))`` on the QAM bit error rate.

    Parameters
    ----------
    M : int
        Constellation order.
    snr : float or array_like
        Received power over noise PSD, dimensionless.

    Notes
    -----
    The bound is vacuous (greater than one) at low SNR and is returned as
    computed; clamp it at the call site if a probability is needed.
    """
    k = _check_order(M)
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ParameterError("snr must be >= 0")
    return 4.0 * q_function(np.sqrt(3.0 * k / (M - 1) * snr))


def q_approx(x):
    """Chernoff-style approximation ``exp(-x**2/2)/12`` of the Q function."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ParameterError("x must be >= 0")
    return np.exp(-x * x / 2.0) / 12.0


def x_arg(M: int, Pt: float, G: float, N0: float, Ns: int) -> float:
    """SNR argument ``sqrt(3*log2(M)/(M-1) * Pt*G/(N0*Ns))``."""
    k = _check_order(M)
    if N0 <= 0:
        return float("inf")
    return float(np.sqrt(3.0 * k / (M - 1) * Pt * G / (N0 * Ns)))


def capacity_approx(x):
    """Approximate capacity per channel use, ``1 - exp(-x**2/2)/3``.

    This treats the crossover probability as if it were the capacity loss,
    which is looser than ``1 - H(p)`` but keeps the closed form simple.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ParameterError("x must be >= 0")
    return 1.0 - np.exp(-x * x / 2.0) / 3.0


def throughput(Ns: int, Tp: float, M: int, x) -> float:
    """Data throughput ``(Ns/Tp) * capacity_approx(x) * log2(M)`` in bit/s."""
    if Ns < 1:
        raise ParameterError(f"Ns must be >= 1, got {Ns}")
    if not Tp > 0:
        raise ParameterError(f"Tp must be positive, got {Tp}")
    k = int(M).bit_length() - 1
    if M < 2 or (1 << k) != M:
        raise ParameterError(f"M must be a power of two, got {M}")
    return Ns / Tp * capacity_approx(x) * k


@dataclass(frozen=True)
class CommMetrics:
    ber_upper: float
    x_arg: float
    capacity_bits: float
    throughput_bps: float

    @classmethod
    def compute(cls, M: int, Ns: int, Tp: float, Pt: float = 1.0, G: float = 1.0,
                N0: float = 1.0) -> "CommMetrics":
        """All link metrics for received power ``Pr = Pt*G``."""
        x = x_arg(M, Pt, G, N0, Ns)
        snr = Pt * G / N0 if N0 > 0 else float("inf")
        return cls(ber_upper=float(qam_ber_bound(M, snr)), x_arg=x,
                   capacity_bits=float(capacity_approx(x)),
                   throughput_bps=float(throughput(Ns, Tp, M, x)))


# --- Cramer-Rao bounds -------------------------------------------------------

def crb_frequency(gamma, N, asymptotic: bool = False):
    """Variance bound (cycles/sample squared) for the frequency of a tone in noise.

    Exact ``12/((2*pi)**2 * gamma * N * (N**2 - 1))``; ``asymptotic=True``
    returns the large-``N`` form with ``N**3``. Divide by the squared sample
    period to get Hz^2.
    """
    gamma = np.asarray(gamma, dtype=float)
    N = np.asarray(N, dtype=float)
    if np.any(gamma <= 0):
        raise ParameterError("gamma must be positive")
    if np.any(N < 2):
        raise ParameterError("N must be >= 2")
    denom = N ** 3 if asymptotic else N * (N * N - 1)
    return 12.0 / ((2 * np.pi) ** 2 * gamma * denom)


def crb_range_mse(S: float, gamma, N, sample_period: float = 1.0, asymptotic: bool = False,
                  printed: bool = False, c: float = SPEED_OF_LIGHT):
    """Lower bound on the range MSE (m^2) from ``N`` beat samples.

    Parameters
    ----------
    S : float
        Chirp slope in Hz/s.
    gamma : float or array_like
        Per-sample SNR.
    N : int or array_like
        Number of beat samples.
    sample_period : float
        Time between beat samples; 1.0 keeps the bound in the
        sample-index units of the closed form.
    asymptotic : bool
        Use ``3c^2 / (16 pi^2 S^2 gamma N^3)``.
    printed : bool
        Use the misprinted denominator ``N*(N + 1*(2N+1))`` instead of
        ``N*(N+1)*(2N+1)``; kept only for comparison.

    Notes
    -----
    The bound does not depend on how many symbols share the pulse, since
    only the average symbol energy enters the Fisher information.
    """
    if not S > 0:
        raise ParameterError(f"S must be positive, got {S}")
    gamma = np.asarray(gamma, dtype=float)
    N = np.asarray(N, dtype=float)
    if np.any(gamma <= 0):
        raise ParameterError("gamma must be positive")
    if np.any(N < 1):
        raise ParameterError("N must be >= 1")
    if asymptotic:
        return 3 * c ** 2 / (16 * np.pi ** 2 * (S * sample_period) ** 2 * gamma * N ** 3)
    denom = N * (N + 1 * (2 * N + 1)) if printed else N * (N + 1) * (2 * N + 1)
    return 3 * c ** 2 / (8 * np.pi ** 2 * (S * sample_period) ** 2 * gamma * denom)


@dataclass(frozen=True)
class CrbResult:
    freq_var_lb: float
    range_mse_lb: float
    gamma: float
    N: int

    @classmethod
    def compute(cls, S: float, gamma: float, N: int, sample_period: float = 1.0,
                c: float = SPEED_OF_LIGHT) -> "CrbResult":
        fv = float(crb_frequency(gamma, max(N, 2))) / sample_period ** 2
        rm = float(crb_range_mse(S, gamma, N, sample_period, c=c))
        return cls(fv, rm, float(gamma), int(N))


# --- spectra -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PsdEstimate:
    """Two-sided PSD on an ascending frequency grid."""

    freqs: np.ndarray
    density: np.ndarray
    occupied_bw_99: float

    @property
    def power(self) -> float:
        return float(np.sum(self.density) * (self.freqs[1] - self.freqs[0]))


def occupied_bandwidth(freqs, density, fraction: float = 0.99) -> float:
    """Width of the band leaving ``(1-fraction)/2`` of the power in each tail.

    The cumulative power is interpolated linearly between bins, so a line
    spectrum reports a width below one bin.
    """
    freqs = np.asarray(freqs, dtype=float)
    density = np.asarray(density, dtype=float)
    if not 0 < fraction < 1:
        raise ParameterError("fraction must lie in (0, 1)")
    cum = np.cumsum(density)
    if cum[-1] <= 0:
        raise ParameterError("spectrum carries no power")
    cum = cum / cum[-1]
    df = freqs[1] - freqs[0]
    # cum[i] is the power up to the upper edge of bin i
    edges = freqs + df / 2
    tail = (1 - fraction) / 2
    lo = np.interp(tail, np.concatenate(([0.0], cum)), np.concatenate(([edges[0] - df], edges)))
    hi = np.interp(1 - tail, np.concatenate(([0.0], cum)), np.concatenate(([edges[0] - df], edges)))
    return float(hi - lo)


def estimate_psd(s: ComplexSignal, segment_len: int) -> PsdEstimate:
    """Averaged periodogram of ``s`` over non-overlapping rectangular segments.

    With one pulse (or several whole pulses) per segment and fresh symbols
    in every pulse, the average approaches the time-averaged PSD of the
    cyclostationary JCS signal.
    """
    segment_len = int(segment_len)
    if segment_len < 2:
        raise ParameterError("segment_len must be >= 2")
    if len(s) < 4 * segment_len:
        raise ParameterError(f"need at least {4 * segment_len} samples, got {len(s)}")
    f, p = signal.welch(s.samples, fs=s.sample_rate, window="boxcar", nperseg=segment_len,
                        noverlap=0, detrend=False, return_onesided=False, scaling="density")
    order = np.argsort(f)
    f, p = f[order], np.maximum(p[order], 0.0)
    return PsdEstimate(f, p, occupied_bandwidth(f, p))


@dataclass(frozen=True)
class BandwidthReport:
    B_s: float
    B_c: float
    B_t_measured: float
    additivity_error: float


def symbol_stream(symbols: SymbolStream, samples_per_symbol: int) -> np.ndarray:
    """Rectangular baseband pulse train of the constellation points, no carrier."""
    return np.repeat(symbols.points, samples_per_symbol)


def bandwidth_partition_check(cfg: QamFmcwConfig, sample_rate: float, pulses: int = 200,
                              seed: int = 0) -> BandwidthReport:
    """Measure ``B_s``, ``B_c`` and the total occupied bandwidth of QAM-FMCW.

    ``B_s`` is the swept bandwidth ``S*Tp``. ``B_c`` is the 99% width of the
    carrier-free symbol stream (estimated over segments of at least 16
    symbols so one-symbol pulses are still resolved). The total comes from
    ``pulses`` consecutive pulses with fresh symbols, one pulse per segment.
    """
    B_s = cfg.carrier.bandwidth
    nominal = B_s + SINC2_99_WIDTH / cfg.Ts
    if not sample_rate > 2 * nominal:
        raise ParameterError(f"sample_rate {sample_rate:g} is below 2*(B_s+B_c) = {2 * nominal:g}")
    n_pulse = num_samples(cfg.carrier.Tp, sample_rate)
    sps = n_pulse // cfg.Ns
    if sps * cfg.Ns != n_pulse or sps < 1:
        raise ParameterError("pulse length must hold a whole number of samples per symbol")
    if pulses < 4:
        raise ParameterError("need at least 4 pulses")
    rng = np.random.default_rng(seed)
    streams = [random_symbols(rng, cfg) for _ in range(pulses)]
    jcs = np.concatenate([modulate_qam_fmcw(s, cfg, sample_rate).samples for s in streams])
    total = estimate_psd(ComplexSignal(jcs, sample_rate), n_pulse)

    per_seg = int(np.ceil(16 / cfg.Ns))
    base = np.concatenate([symbol_stream(s, sps) for s in streams])
    seg = min(per_seg * n_pulse, base.size // 4)
    B_c = estimate_psd(ComplexSignal(base, sample_rate), seg).occupied_bw_99

    B_t = total.occupied_bw_99
    err = abs(B_t - (B_s + B_c)) / (B_s + B_c)
    return BandwidthReport(float(B_s), float(B_c), float(B_t), float(err))
