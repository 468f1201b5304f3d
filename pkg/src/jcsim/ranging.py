"""Range estimation from the reflected JCS pulse.

QAM-FMCW: the echo is dechirped against the unmodulated chirp and the
round-trip time is read off the beat tone, either by a grid search over
known-symbol templates or by locating the spectral peak. FSK-SF: the echo
is mixed with the transmitted waveform and the frequency track of the mixer
output is fitted with the two-level step model.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateSignalError, InsufficientResolutionError, ParameterError
from .modulation import FskSfConfig, QamFmcwConfig, SymbolStream, fsk_sf_at, fsk_step_frequencies
from .waveform import SPEED_OF_LIGHT, ComplexSignal, carrier_samples, cis, fmcw_phase, num_samples


class RangingMethod(enum.Enum):
    FREQ_DOMAIN_ML = "FreqDomainML"
    CARRIER_SYNC = "CarrierSync"
    FSK_SF = "FskSf"


@dataclass(frozen=True, eq=False)
class RangeEstimate:
    tau_hat: float
    method: RangingMethod
    diagnostics: dict = field(default_factory=dict)
    c: float = SPEED_OF_LIGHT

    @property
    def d_hat(self) -> float:
        return self.c * self.tau_hat / 2


@dataclass(frozen=True, eq=False)
class FrequencyTrack:
    """Peak frequency of each STFT window, stamped at the window centre."""

    times: np.ndarray
    freqs: np.ndarray
    power: np.ndarray


@dataclass(frozen=True, eq=False)
class FskRangingTrace:
    freq_track: FrequencyTrack
    k_prime_hat: int
    t0: float
    t1_hat: float
    t2: float
    objective: np.ndarray
    offsets: np.ndarray

    @property
    def fraction(self) -> float:
        """Fractional part of ``tau / delta_t`` implied by the fit."""
        return ((self.t1_hat - self.t0) / (self.t2 - self.t0)) % 1.0


def parabolic_peak(values: np.ndarray, k: int) -> float:
    """Vertex offset (in bins, within +-0.5) of the parabola through ``k-1, k, k+1``.

    Neighbours wrap around, matching a DFT axis.
    """
    n = values.size
    a, b, c = values[(k - 1) % n], values[k], values[(k + 1) % n]
    denom = a - 2 * b + c
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))


# --- QAM-FMCW ---------------------------------------------------------------

def beat_signal(r: ComplexSignal, cfg: QamFmcwConfig) -> ComplexSignal:
    """Dechirp the echo: local unmodulated chirp times ``conj(r)``.

    For a point target at round-trip time ``tau`` the output is
    ``conj(A(t - tau)) * exp(j*2*pi*(S*tau*t - S*tau**2/2 + f0*tau))``, a tone
    at ``+tau*S`` carrying the conjugated symbols.
    """
    n = num_samples(cfg.carrier.Tp, r.sample_rate)
    if len(r) != n:
        raise ParameterError(f"expected {n} samples for one pulse, got {len(r)}")
    lo = carrier_samples(cfg.carrier, r)
    return r.with_samples(lo * np.conj(r.samples))


def beat_template(symbols: SymbolStream, cfg: QamFmcwConfig, tau: float,
                  times: np.ndarray, carrier_frequency: float = 0.0) -> np.ndarray:
    """Noiseless unit-gain beat signal for a hypothesised round-trip time."""
    c = cfg.carrier
    u = times - tau
    on = (u >= 0) & (u < c.Tp)
    env = np.zeros(times.shape, dtype=complex)
    idx = np.clip(np.floor(u[on] / cfg.Ts).astype(np.int64), 0, cfg.Ns - 1)
    env[on] = np.conj(symbols.points[idx])
    return env * cis(c.slope * tau * times + _beat_offset(cfg, tau, carrier_frequency))


def _beat_offset(cfg: QamFmcwConfig, tau, carrier_frequency: float):
    # constant beat phase (cycles): -S*tau^2/2 + (f0 + f_rf)*tau
    return -0.5 * cfg.carrier.slope * tau * tau + (cfg.carrier.f0 + carrier_frequency) * tau


def default_tau_grid(cfg: QamFmcwConfig, sample_rate: float) -> np.ndarray:
    """One DFT bin per step, covering delays whose beat stays below ``sample_rate``."""
    c = cfg.carrier
    n = num_samples(c.Tp, sample_rate)
    step = sample_rate / (n * c.slope)
    limit = min(c.Tp, sample_rate / c.slope)
    return np.arange(int(np.ceil(limit / step))) * step


def _envelopes(symbols: SymbolStream, cfg: QamFmcwConfig, times: np.ndarray, taus) -> np.ndarray:
    """Delayed symbol envelopes ``A(t - tau)``, one row per delay."""
    u = times[None, :] - np.atleast_1d(np.asarray(taus, dtype=float))[:, None]
    idx = np.floor(u * (1.0 / cfg.Ts)).astype(np.int64)
    # index Ns selects the appended zero outside the pulse
    idx[(u < 0) | (u >= cfg.carrier.Tp)] = cfg.Ns
    idx = np.minimum(idx, cfg.Ns)
    return np.append(symbols.points, 0)[idx]


def _envelope(symbols: SymbolStream, cfg: QamFmcwConfig, times: np.ndarray, tau: float):
    return _envelopes(symbols, cfg, times, tau)[0]


def range_freq_domain_ml(beat: ComplexSignal, cfg: QamFmcwConfig, symbols: SymbolStream,
                         tau_grid: Optional[Sequence[float]] = None,
                         carrier_frequency: float = 0.0,
                         c: float = SPEED_OF_LIGHT) -> RangeEstimate:
    """Grid search for the delay whose known-symbol template best matches the beat spectrum.

    The spectral mismatch is evaluated through Parseval as
    ``||b||^2 + ||b_tau||^2 - 2 Re<b, b_tau>``. Delays sharing the same
    sample-level symbol segmentation share one envelope product; when the
    grid sits on DFT bins the correlations come from a single FFT per
    segmentation. The template carries the full deterministic beat phase,
    including the RF term ``carrier_frequency * tau``. Ties go to the
    smaller delay.
    """
    if tau_grid is None:
        tau_grid = default_tau_grid(cfg, beat.sample_rate)
    grid = np.sort(np.asarray(tau_grid, dtype=float))
    if grid.size == 0:
        raise ParameterError("tau_grid is empty")
    if grid[0] < 0 or grid[-1] >= cfg.carrier.Tp:
        raise ParameterError("tau_grid must lie within [0, Tp)")
    b = beat.samples
    t = beat.times
    n = b.size
    S = cfg.carrier.slope
    # symbol boundaries in sample units decide which delays share an envelope;
    # the grid is sorted so equal segmentations form contiguous runs
    edges = np.arange(cfg.Ns + 1) * cfg.Ts
    keys = np.searchsorted(t, edges[None, :] + grid[:, None], side="left")
    change = np.any(np.diff(keys, axis=0) != 0, axis=1)
    group = np.concatenate(([0], np.cumsum(change)))
    heads = grid[np.concatenate(([0], np.flatnonzero(change) + 1))]
    envs = _envelopes(symbols, cfg, t, heads)
    energy = np.sum(np.abs(envs) ** 2, axis=1)[group]
    bins = S * grid * n / beat.sample_rate
    if np.allclose(bins, np.round(bins), rtol=0, atol=1e-6):
        spec = np.fft.fft(b[None, :] * envs, axis=1)
        corr = spec[group, np.round(bins).astype(np.int64) % n]
    else:
        corr = np.einsum("gn,gn->g", envs[group] * b[None, :], cis(-np.outer(S * grid, t)))
    phase = cis(-_beat_offset(cfg, grid, carrier_frequency))
    objective = np.sum(np.abs(b) ** 2) + energy - 2 * np.real(phase * corr)
    # clip rounding noise below zero for a perfect template match
    objective = np.maximum(objective, 0.0)
    best = int(np.argmin(objective))
    return RangeEstimate(float(grid[best]), RangingMethod.FREQ_DOMAIN_ML,
                         {"tau_grid": grid, "objective": objective}, c)


def _spectral_peak(x: np.ndarray, sample_rate: float, zero_pad: int, interpolate: bool):
    nfft = zero_pad * x.size
    power = np.abs(np.fft.fft(x, nfft)) ** 2
    k = int(np.argmax(power))
    delta = parabolic_peak(power, k) if interpolate else 0.0
    f = ((k + delta) / nfft * sample_rate) % sample_rate
    return f, power


def _strip_weights(env: np.ndarray, strip: str) -> np.ndarray:
    """Multiplier that removes the conjugated symbols from the beat."""
    if strip == "matched":
        return env
    # zero forcing: x / conj(A); samples outside the echo stay zero
    mag2 = env.real ** 2 + env.imag ** 2
    out = np.zeros_like(env)
    np.divide(env, mag2, out=out, where=mag2 > 0)
    return out


def _acquire_delay(x, symbols, cfg, times, sample_rate, tau_raw, strip, chunk=64):
    """Strip delay whose envelope gives the strongest beat peak.

    Candidates are spaced a quarter symbol apart over the delays whose beat
    fits below ``sample_rate``, plus ``tau_raw`` from the unstripped peak.
    """
    c = cfg.carrier
    limit = min(c.Tp, sample_rate / c.slope)
    cands = np.append(np.arange(0.0, limit, cfg.Ts / 4), tau_raw)
    best, best_tau = -1.0, tau_raw
    for i in range(0, cands.size, chunk):
        taus = cands[i:i + chunk]
        w = _strip_weights(_envelopes(symbols, cfg, times, taus), strip)
        # unpadded spectra are enough to rank candidates
        spec = np.fft.fft(x * w, axis=1)
        peaks = (spec.real ** 2 + spec.imag ** 2).max(axis=1)
        j = int(np.argmax(peaks))
        if peaks[j] > best:
            best, best_tau = float(peaks[j]), float(taus[j])
    return best_tau


def range_carrier_sync(beat: ComplexSignal, cfg: QamFmcwConfig,
                       symbols: Optional[SymbolStream] = None, zero_pad: int = 4,
                       interpolate: bool = True, passes: int = 2, strip: str = "zf",
                       c: float = SPEED_OF_LIGHT) -> RangeEstimate:
    """Beat-tone peak picking: ``tau = f_c / S``.

    The periodogram is zero padded ``zero_pad`` times and read on
    ``[0, sample_rate)`` since the delay is non-negative. Without
    ``symbols`` the raw beat is used. With ``symbols`` the known modulation
    is stripped first (data-aided): the strip delay is acquired on a
    quarter-symbol grid, then refined from the peak ``passes`` times.

    ``strip='zf'`` divides out the symbols, leaving a pure tone whose noise
    is scaled by ``1/|A|**2``, so amplitude-varying constellations pay a
    penalty. ``strip='matched'`` multiplies by the symbols instead.
    """
    if strip not in ("zf", "matched"):
        raise ParameterError(f"strip must be 'zf' or 'matched', got {strip!r}")
    x = beat.samples
    if not np.any(x):
        raise DegenerateSignalError("beat signal is identically zero")
    S = cfg.carrier.slope
    fs = beat.sample_rate

    def peak_tau(y, pad=zero_pad):
        f_c, power = _spectral_peak(y, fs, pad, interpolate)
        if f_c > fs * (1 - 1 / y.size):
            # peak straddles DC from below: a zero delay, not a huge one
            f_c -= fs
        tau = max(f_c / S, 0.0)
        return (tau if tau < cfg.carrier.Tp else 0.0), f_c, power

    # with symbols the raw peak only seeds the acquisition, so skip the padding
    tau, f_c, power = peak_tau(x, 1 if symbols is not None else zero_pad)
    if symbols is not None:
        tau = _acquire_delay(x, symbols, cfg, beat.times, fs, tau, strip)
        for _ in range(passes):
            y = x * _strip_weights(_envelope(symbols, cfg, beat.times, tau), strip)
            if not np.any(y):
                break
            tau, f_c, power = peak_tau(y)
    return RangeEstimate(tau, RangingMethod.CARRIER_SYNC,
                         {"f_c": f_c, "periodogram": power, "data_aided": symbols is not None,
                          "strip": strip if symbols is not None else None}, c)


# --- STFT tracking and FSK-SF ------------------------------------------------

def stft_track(r: ComplexSignal, window_len: int, hop: int,
               nfft: Optional[int] = None) -> FrequencyTrack:
    """Peak frequency of a rectangular-window short-time DFT.

    Frequencies are signed (``[-fs/2, fs/2)``) and refined by parabolic
    interpolation on the zero-padded spectrum.
    """
    window_len = int(window_len)
    hop = int(hop)
    if window_len < 1 or hop < 1:
        raise ParameterError("window_len and hop must be positive")
    if window_len > len(r):
        raise ParameterError(f"window of {window_len} samples exceeds signal of {len(r)}")
    x = r.samples
    if not np.any(x):
        raise DegenerateSignalError("signal is identically zero")
    if nfft is None:
        nfft = max(64, 16 * (1 << (window_len - 1).bit_length()))
    frames = np.lib.stride_tricks.sliding_window_view(x, window_len)[::hop]
    spec = np.abs(np.fft.fft(frames, nfft, axis=1))
    k = np.argmax(spec, axis=1)
    rows = np.arange(frames.shape[0])
    a, b, c = spec[rows, (k - 1) % nfft], spec[rows, k], spec[rows, (k + 1) % nfft]
    denom = a - 2 * b + c
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(denom != 0, 0.5 * (a - c) / denom, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    freqs = (k + delta) / nfft
    freqs = (freqs + 0.5) % 1.0 - 0.5
    starts = rows * hop
    times = r.t_start + (starts + (window_len - 1) / 2) / r.sample_rate
    power = np.sum(np.abs(frames) ** 2, axis=1) / window_len
    return FrequencyTrack(times, freqs * r.sample_rate, power)


def _snap(q: float) -> float:
    n = np.round(q)
    return float(n) if abs(q - n) < 1e-9 else q


def mixer_frequency(t, cfg: FskSfConfig, symbols: SymbolStream, tau: float) -> np.ndarray:
    """Two-level frequency of ``LO * conj(echo)`` on each step (the step-timing model).

    On step ``k`` with ``t0 = (k-1)*dt``, ``k' = ceil(tau/dt)`` and
    ``t1 = t0 + (tau/dt - (k'-1))*dt``::

        f = (m_k - m_{k-k'})   * df/M + k'    * df   for t in [t0, t1)
        f = (m_k - m_{k-k'+1}) * df/M + (k'-1) * df  for t in [t1, t2)

    Returns NaN where the echo has not arrived yet.
    """
    c = cfg.carrier
    t = np.asarray(t, dtype=float)
    q = _snap(tau / c.delta_t)
    kp = int(np.ceil(q))
    frac = q - (kp - 1)
    k = np.minimum(c.K, np.floor(t / c.delta_t).astype(np.int64) + 1)
    t0 = (k - 1) * c.delta_t
    first = (t - t0) < frac * c.delta_t
    m = np.asarray(symbols.symbols)[np.arange(c.K) // cfg.steps_per_symbol]
    src = np.where(first, k - kp, k - kp + 1)
    valid = (src >= 1) & (t >= tau)
    m_src = m[np.clip(src - 1, 0, c.K - 1)]
    m_k = m[k - 1]
    coarse = np.where(first, kp, kp - 1)
    f = (m_k - m_src) * cfg.tone_spacing + coarse * c.delta_f
    return np.where(valid, f, np.nan)


def range_fsk_sf(r: ComplexSignal, cfg: FskSfConfig, known_symbols: SymbolStream,
                 window_len: Optional[int] = None, hop: Optional[int] = None,
                 nfft: Optional[int] = None, c: float = SPEED_OF_LIGHT) -> RangeEstimate:
    """Four-step FSK-SF ranging.

    1. Track the frequency of ``LO * conj(r)`` (LO = the transmitted pulse).
    2. Coarse step offset from the dominant ``round(f / delta_f)``; the
       candidates are that value and the next one up, since a step is split
       between the ``k'`` and ``k'-1`` levels.
    3. For each candidate, grid-search the change instant ``t1`` at sample
       spacing to minimise the squared mismatch to :func:`mixer_frequency`
       over all fully illuminated steps; ties go to the earliest ``t1``.
    4. ``tau = (k'-1)*delta_t + (t1 - t0)``.
    """
    carrier = cfg.carrier
    fs = r.sample_rate
    n = num_samples(carrier.Tp, fs)
    if len(r) != n:
        raise ParameterError(f"expected {n} samples for one pulse, got {len(r)}")
    per_step = carrier.delta_t * fs
    if window_len is None:
        window_len = max(2, int(per_step // 4))
    if hop is None:
        hop = max(1, window_len // 2)
    if per_step < window_len or (per_step - window_len) // hop + 1 < 2:
        raise InsufficientResolutionError(
            f"{per_step:.2f} samples per step cannot hold two windows of {window_len} "
            f"at hop {hop}")

    lo = fsk_sf_at(known_symbols, cfg, r.times)
    mixed = r.with_samples(lo * np.conj(r.samples))
    track = stft_track(mixed, window_len, hop, nfft)

    loud = track.power >= 0.5 * np.mean(track.power)
    levels = np.round(track.freqs[loud] / carrier.delta_f).astype(np.int64)
    levels = levels[(levels >= 0) & (levels <= carrier.K)]
    coarse = int(np.argmax(np.bincount(levels))) if levels.size else 0
    candidates = [k for k in (coarse, coarse + 1) if 0 <= k <= carrier.K]

    # only steps every candidate fully illuminates enter the fit
    use = (track.times >= (coarse + 2) * carrier.delta_t) & (track.times < carrier.Tp)
    if not np.any(use):
        use = track.times >= (coarse + 1) * carrier.delta_t
    tw, fw = track.times[use], track.freqs[use]

    n_off = int(np.floor(carrier.delta_t * fs))
    offsets = np.arange(1, n_off + 1) / fs
    if offsets.size == 0 or not np.isclose(offsets[-1], carrier.delta_t, rtol=1e-12, atol=0):
        offsets = np.append(offsets[offsets < carrier.delta_t], carrier.delta_t)

    taus, kps, offs, cost = [], [], [], []
    for kp in candidates:
        for off in offsets:
            tau = (kp - 1) * carrier.delta_t + off
            if tau < 0:
                continue
            model = mixer_frequency(tw, cfg, known_symbols, tau)
            err = np.where(np.isnan(model), 0.0, fw - np.nan_to_num(model))
            taus.append(tau)
            kps.append(kp)
            offs.append(off)
            cost.append(float(np.sum(err * err)))
    order = np.argsort(taus, kind="stable")
    taus = np.asarray(taus)[order]
    cost = np.asarray(cost)[order]
    kps = np.asarray(kps)[order]
    offs = np.asarray(offs)[order]
    best = int(np.argmin(cost))
    kp_hat = int(kps[best])
    ref = min(carrier.K, kp_hat + 1)
    t0 = (ref - 1) * carrier.delta_t
    trace = FskRangingTrace(track, kp_hat, t0, t0 + float(offs[best]),
                            ref * carrier.delta_t, cost, taus)
    tau_hat = (kp_hat - 1) * carrier.delta_t + float(offs[best])
    return RangeEstimate(max(tau_hat, 0.0), RangingMethod.FSK_SF, {"trace": trace}, c)


def fsk_beat_frequency_direct(t, cfg: FskSfConfig, symbols: SymbolStream, tau: float):
    """``f_tx(t) - f_tx(t - tau)`` straight from the step table; cross-check for
    :func:`mixer_frequency`."""
    c = cfg.carrier
    freqs = fsk_step_frequencies(symbols, cfg)
    t = np.asarray(t, dtype=float)
    i_now = np.clip(np.floor(t / c.delta_t).astype(np.int64), 0, c.K - 1)
    u = t - tau
    i_then = np.clip(np.floor(u / c.delta_t).astype(np.int64), 0, c.K - 1)
    return np.where(u >= 0, freqs[i_now] - freqs[i_then], np.nan)
