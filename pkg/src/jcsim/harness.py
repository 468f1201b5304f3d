"""Monte-Carlo sweeps over the JCS link and the figure presets built on them.

Every trial draws from its own generator seeded by ``(seed, point, trial)``,
so the output does not depend on execution order or on the worker count.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analysis import SINC2_99_WIDTH, capacity_approx, crb_range_mse, throughput, x_arg
from .channel import ChannelScenario, comm_received, radar_return
from .errors import ConfigError, JcsError, ParameterError
from .modulation import FskSfConfig, QamFmcwConfig, random_symbols
from .ranging import beat_signal, range_carrier_sync, range_freq_domain_ml, range_fsk_sf
from .receiver import demod_fsk_sf, demod_qam_fmcw
from .waveform import SPEED_OF_LIGHT, FmcwCarrier, SfCarrier, num_samples

log = logging.getLogger(__name__)

QAM_FMCW = "QAM-FMCW"
FSK_SF = "FSK-SF"
AXES = ("noise_power", "Ns", "sample_rate", "modulation_order", "bandwidth_split")
QAM_METHODS = ("CarrierSync", "FreqDomainML")

DESK_TRIALS = 1000
FULL_TRIALS = 50_000

# noise power relative to unit signal power, one point per decade
NOISE_DECADES = (1e-2, 1e-1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a base link plus the axis along which it is varied.

    ``slope`` and ``Tp`` describe the chirp; for FSK-SF the step ladder has
    the same duration and bandwidth split into ``K`` steps. ``noise_power``
    is the per-sample noise variance at ``sample_rate`` for unit signal
    power. With ``jitter`` set, each trial moves the target uniformly within
    one range cell ``c/(2*slope*Tp)`` around ``distance``.
    """

    scheme: str = QAM_FMCW
    slope: float = 29.98e12
    Tp: float = 60e-6
    f0: float = 0.0
    K: int = 512
    M: int = 16
    Ns: int = 8
    distance: float = 100.0
    gain: float = 1.0
    noise_power: float = 0.0
    carrier_frequency: float = 0.0
    sample_rate: float = 40e6
    jitter: bool = False
    comm: bool = True
    methods: tuple = ("CarrierSync",)
    axis: str = "noise_power"
    values: tuple = (0.0,)
    trials: int = DESK_TRIALS
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.scheme not in (QAM_FMCW, FSK_SF):
            raise ConfigError("experiment.scheme", f"unknown scheme {self.scheme!r}")
        if self.axis not in AXES:
            raise ConfigError("experiment.axis", f"must be one of {', '.join(AXES)}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("experiment.trials", "must be an integer >= 1")
        if len(self.values) == 0:
            raise ConfigError("experiment.values", "must not be empty")
        if self.seed < 0:
            raise ConfigError("experiment.seed", "must be >= 0")
        if self.noise_power < 0:
            raise ConfigError("scenario.noise_power", "must be >= 0")
        allowed = QAM_METHODS if self.scheme == QAM_FMCW else ("FskSf",)
        for m in self.methods:
            if m not in allowed:
                raise ConfigError("experiment.methods", f"{m!r} not available for {self.scheme}")
        if self.axis == "bandwidth_split" and not all(0 < v < 1 for v in self.values):
            raise ConfigError("experiment.values", "bandwidth splits must lie in (0, 1)")
        # build every point once so nested invariants are checked up front
        if self.axis == "noise_power" and tuple(self.values) == (self.noise_power,):
            self.link()
        else:
            for v in self.values:
                _point_config(self, v)

    def link(self):
        """``(scheme_config, scenario)`` for this configuration."""
        try:
            chirp = FmcwCarrier(self.slope, self.Tp, self.f0)
        except JcsError as exc:
            raise ConfigError("carrier", str(exc)) from exc
        try:
            if self.scheme == QAM_FMCW:
                cfg = QamFmcwConfig(int(self.M), int(self.Ns), chirp)
            else:
                cfg = FskSfConfig(int(self.M), int(self.Ns), SfCarrier.matching(chirp, int(self.K)))
        except JcsError as exc:
            raise ConfigError("modulation", str(exc)) from exc
        if not self.sample_rate > 0:
            raise ConfigError("sampling.sample_rate", "must be positive")
        try:
            scen = ChannelScenario.from_noise_power(self.distance, self.noise_power,
                                                    self.sample_rate, gain=self.gain,
                                                    carrier_frequency=self.carrier_frequency)
        except JcsError as exc:
            raise ConfigError("scenario", str(exc)) from exc
        if scen.round_trip_delay >= self.Tp:
            raise ConfigError("scenario.distance", "echo arrives after the pulse ends")
        return cfg, scen


@dataclass(frozen=True)
class SweepRecord:
    axis: float
    series: str
    mean: float
    std: float
    trials: int
    nan_count: int = 0


def _point_config(cfg: ExperimentConfig, value) -> ExperimentConfig:
    if cfg.axis == "noise_power":
        return dataclasses.replace(cfg, axis="noise_power", values=(value,), noise_power=float(value))
    if cfg.axis == "Ns":
        return dataclasses.replace(cfg, axis="noise_power", values=(cfg.noise_power,), Ns=int(value))
    if cfg.axis == "sample_rate":
        return dataclasses.replace(cfg, axis="noise_power", values=(cfg.noise_power,),
                                   sample_rate=float(value))
    if cfg.axis == "modulation_order":
        return dataclasses.replace(cfg, axis="noise_power", values=(cfg.noise_power,), M=int(value))
    # bandwidth_split: fraction of the swept bandwidth handed to the symbol stream
    total = cfg.slope * cfg.Tp
    B_c = float(value) * total
    Ns = max(1, int(round(B_c * cfg.Tp / SINC2_99_WIDTH)))
    return dataclasses.replace(cfg, axis="noise_power", values=(cfg.noise_power,), Ns=Ns,
                               slope=(total - B_c) / cfg.Tp)


# --- trials ------------------------------------------------------------------

def _trial(point: ExperimentConfig, seed: Sequence[int]) -> dict:
    """One pulse through radar and comm paths; returns metric -> value."""
    rng = np.random.default_rng(list(seed))
    cfg, scen = point.link()
    if point.jitter:
        cell = scen.c / (2 * cfg.carrier.bandwidth)
        scen = dataclasses.replace(scen, distance=scen.distance + cell * (rng.random() - 0.5))
    sym = random_symbols(rng, cfg)
    fs = point.sample_rate
    r = radar_return(sym, cfg, scen, fs, rng)
    rx = comm_received(sym, cfg, scen, fs, rng) if point.comm else None
    out = {}
    for method in point.methods:
        try:
            if method == "CarrierSync":
                est = range_carrier_sync(beat_signal(r, cfg), cfg, sym, c=scen.c)
            elif method == "FreqDomainML":
                est = range_freq_domain_ml(beat_signal(r, cfg), cfg, sym,
                                           carrier_frequency=scen.carrier_frequency, c=scen.c)
            else:
                est = range_fsk_sf(r, cfg, sym, c=scen.c)
            out[f"range_err/{method}"] = est.d_hat - scen.distance
        except JcsError:
            out[f"range_err/{method}"] = float("nan")
    if not point.comm:
        return out
    if isinstance(cfg, QamFmcwConfig):
        res = demod_qam_fmcw(rx, cfg, sym, gain=scen.gain)
    else:
        res = demod_fsk_sf(rx, cfg, sym)
    out["ser"] = res.symbol_errors / res.n_symbols
    out["ber"] = res.bit_errors / res.n_bits
    return out


def _trial_batch(args):
    point, seeds = args
    return [_trial(point, s) for s in seeds]


def _derived(point: ExperimentConfig) -> dict:
    cfg, scen = point.link()
    N0 = point.noise_power / point.sample_rate
    if point.M >= 4:
        x = x_arg(point.M, 1.0, point.gain, N0, cfg.Ns)
    else:
        x = math.inf if N0 == 0 else math.sqrt(3 * point.gain / (N0 * cfg.Ns))
    cap = float(capacity_approx(x))
    out = {"capacity_bits": cap,
           "throughput_bps": float(throughput(cfg.Ns, cfg.carrier.Tp, point.M, x))}
    if point.scheme == QAM_FMCW and point.noise_power > 0:
        n = num_samples(cfg.carrier.Tp, point.sample_rate)
        out["crb_mse"] = float(crb_range_mse(cfg.carrier.slope, point.gain / point.noise_power,
                                             n, 1.0 / point.sample_rate, c=scen.c))
    return out


def _summaries(axis_value: float, prefix: str, rows: list, trials: int) -> list:
    records = []
    for key in rows[0]:
        v = np.array([row[key] for row in rows], dtype=float)
        bad = int(np.count_nonzero(~np.isfinite(v)))
        good = v[np.isfinite(v)]
        stats = [(key, good)]
        if key.startswith("range_err/"):
            stats.append(("range_sq_err/" + key.split("/", 1)[1], good * good))
        for name, vals in stats:
            if not vals.size:
                continue
            mean = float(np.mean(vals))
            std = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
            records.append(SweepRecord(axis_value, prefix + name, mean, std, trials, bad))
        if bad:
            log.warning("%s%s: %d of %d trials produced no estimate", prefix, key, bad, trials)
            records.append(SweepRecord(axis_value, prefix + key + "/nan_trials", float(bad), 0.0,
                                       trials, bad))
    return records


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list:
    """Run ``cfg.trials`` pulses at every axis value and summarise each metric.

    Returns
    -------
    list of SweepRecord
        Per axis value: mean/std of every per-trial metric (range error and
        squared error per method, SER, BER), plus the closed-form capacity,
        throughput and, for QAM-FMCW with noise, the range CRB (std 0).
    """
    prefix = cfg.label + "/" if cfg.label else ""
    records = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for p, value in enumerate(cfg.values):
            point = _point_config(cfg, value)
            seeds = [(cfg.seed, p, t) for t in range(cfg.trials)]
            if pool is None:
                rows = _trial_batch((point, seeds))
            else:
                chunk = max(1, math.ceil(len(seeds) / (4 * workers)))
                jobs = [(point, seeds[i:i + chunk]) for i in range(0, len(seeds), chunk)]
                rows = [row for batch in pool.map(_trial_batch, jobs) for row in batch]
            records += _summaries(float(value), prefix, rows, cfg.trials)
            for name, v in _derived(point).items():
                records.append(SweepRecord(float(value), prefix + name, v, 0.0, cfg.trials))
    finally:
        if pool is not None:
            pool.shutdown()
    return records


# --- CSV -----------------------------------------------------------------------

CSV_HEADER = "axis,series,mean,std,trials"


def _num(x: float) -> str:
    return format(x, ".17g")


def records_to_csv(records: Sequence[SweepRecord]) -> str:
    lines = [CSV_HEADER]
    for r in records:
        if "," in r.series:
            raise ParameterError(f"series name {r.series!r} contains a comma")
        lines.append(f"{_num(r.axis)},{r.series},{_num(r.mean)},{_num(r.std)},{r.trials}")
    return "\n".join(lines) + "\n"


def read_csv(text: str) -> list:
    """Parse CSV produced by :func:`records_to_csv` back into records."""
    rows = text.strip().splitlines()
    if not rows or rows[0] != CSV_HEADER:
        raise ParameterError("not a sweep CSV")
    out = []
    for line in rows[1:]:
        a, s, m, sd, n = line.split(",")
        out.append(SweepRecord(float(a), s, float(m), float(sd), int(n)))
    return out


# --- figure presets ------------------------------------------------------------

FIGURES = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9")


def figure_configs(name: str, trials: int, seed: int = 0) -> list:
    """Experiment configs behind one figure, one per plotted series."""
    base = ExperimentConfig(trials=trials, seed=seed, values=NOISE_DECADES)
    if name == "fig3":
        return [dataclasses.replace(base, distance=d, carrier_frequency=77e9, jitter=True,
                                    methods=QAM_METHODS, label=f"d={d:g}")
                for d in (50.0, 100.0, 150.0)]
    if name == "fig4":
        return [dataclasses.replace(base, Ns=ns, carrier_frequency=77e9, jitter=True,
                                    methods=QAM_METHODS, label=f"Ns={ns}")
                for ns in (1, 4, 16, 64)]
    if name == "fig5":
        return [dataclasses.replace(base, sample_rate=fs, label=f"fs={fs / 1e6:g}MHz")
                for fs in (25e6, 40e6, 80e6)]
    if name == "fig6":
        return [dataclasses.replace(base, M=m, label=f"M={m}") for m in (4, 16, 64)]
    if name == "fig7":
        # 100 MHz shared between chirp and symbols, noise fixed at 10
        return [dataclasses.replace(base, M=m, slope=100e6 / 60e-6, noise_power=10.0,
                                    axis="bandwidth_split", values=(0.1, 0.25, 0.4, 0.55, 0.7),
                                    label=f"M={m}")
                for m in (4, 16)]
    if name == "fig8":
        return [dataclasses.replace(base, scheme=FSK_SF, M=m, sample_rate=136e6, K=512,
                                    noise_power=0.1, methods=("FskSf",), axis="Ns",
                                    values=(8, 16, 32, 64), label=f"M={m}")
                for m in (2, 4, 8, 16)]
    if name == "fig9":
        return [dataclasses.replace(base, values=(0.1, 0.3, 1.0, 3.0, 10.0, 30.0), comm=False,
                                    label="crb_check")]
    raise ParameterError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")


def reproduce_figure(name: str, scale: str = "desk", trials: Optional[int] = None,
                     seed: int = 0, out_dir=None, workers: int = 1) -> str:
    """Run one figure's sweeps and return (and optionally write) its CSV.

    ``scale='desk'`` uses 10^3 pulses per point, ``'full'`` 5*10^4;
    ``trials`` overrides both.
    """
    if scale not in ("desk", "full"):
        raise ParameterError(f"scale must be 'desk' or 'full', got {scale!r}")
    n = trials if trials is not None else (DESK_TRIALS if scale == "desk" else FULL_TRIALS)
    records = []
    for cfg in figure_configs(name, n, seed):
        records += run_experiment(cfg, workers)
    text = records_to_csv(records)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.csv").write_text(text)
    return text


# --- config files --------------------------------------------------------------

_SCHEMA = {
    "experiment": {"scheme": str, "axis": str, "values": "floats", "trials": int, "seed": int,
                   "methods": "words", "label": str},
    "carrier": {"slope": float, "Tp": float, "f0": float, "K": int},
    "modulation": {"M": int, "Ns": int},
    "scenario": {"distance": float, "gain": float, "noise_power": float,
                 "carrier_frequency": float, "jitter": bool},
    "receiver": {"comm": bool},
    "sampling": {"sample_rate": float},
}


def _parse(kind, raw: str, path: str):
    try:
        if kind == "floats":
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if kind == "words":
            return tuple(raw.replace(",", " ").split())
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(raw)
            return low in ("true", "yes", "1", "on")
        if kind is int:
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(path, f"cannot parse {raw!r}") from exc


def load_config(source) -> ExperimentConfig:
    """Read an INI-style config (path or text); unknown keys are errors.

    Sections: ``[experiment]``, ``[carrier]``, ``[modulation]``,
    ``[scenario]``, ``[sampling]``. Omitted keys keep their defaults.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    text = Path(source).read_text() if isinstance(source, Path) or (
        isinstance(source, str) and "\n" not in source and Path(source).exists()) else source
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from exc
    kw = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        for key, raw in parser.items(section):
            path = f"{section}.{key}"
            if key not in _SCHEMA[section]:
                raise ConfigError(path, "unknown key")
            kw[key] = _parse(_SCHEMA[section][key], raw, path)
    if "values" in kw and kw.get("axis") in ("Ns", "modulation_order"):
        kw["values"] = tuple(int(v) for v in kw["values"])
    return ExperimentConfig(**kw)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(cfg).items()}


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text that :func:`load_config` reads back to ``cfg``."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    d = dataclasses.asdict(cfg)
    for section, keys in _SCHEMA.items():
        parser[section] = {}
        for key, kind in keys.items():
            v = d[key]
            parser[section][key] = (" ".join(_num(x) if isinstance(x, float) else str(x) for x in v)
                                    if isinstance(v, tuple) else
                                    _num(v) if isinstance(v, float) else str(v))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
