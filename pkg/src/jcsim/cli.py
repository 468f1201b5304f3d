"""Command-line entry point: ``jcsim {simulate,figure,psd,crb,demod}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import SINC2_99_WIDTH, bandwidth_partition_check, crb_range_mse
from .errors import JcsError
from .harness import (DESK_TRIALS, FIGURES, FULL_TRIALS, config_to_dict, figure_configs, load_config, records_to_csv,
                      reproduce_figure, run_experiment)
from .modulation import FskSfConfig, QamFmcwConfig, random_symbols
from .channel import ChannelScenario, comm_received
from .receiver import demod_fsk_sf, demod_qam_fmcw
from .waveform import SPEED_OF_LIGHT, FmcwCarrier, SfCarrier

log = logging.getLogger("jcsim")

# scaled chirp for spectral work: 10 MHz swept in 200 us, sampled at 40 MHz
PSD_TP = 200e-6
PSD_BS = 10e6
PSD_FS = 40e6
PSD_BC = (0.1e6, 0.5e6, 1e6, 2e6)


def _write_manifest(out: Path, command: str, args, extra: dict, t0: float) -> None:
    manifest = {
        "command": command,
        "argv": getattr(args, "argv", sys.argv[1:]),
        "seed": getattr(args, "seed", None),
        "versions": {"jcsim": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": round(time.time() - t0, 3),
    }
    manifest.update(extra)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _emit(text: str, out, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def cmd_simulate(args) -> int:
    t0 = time.time()
    cfg = load_config(Path(args.config))
    if args.seed is not None or args.trials is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed if args.seed is not None else cfg.seed,
                                  trials=args.trials if args.trials is not None else cfg.trials)
    text = records_to_csv(run_experiment(cfg, args.workers))
    _emit(text, args.out, "simulate.csv")
    if args.out:
        _write_manifest(Path(args.out), "simulate", args, {"config": config_to_dict(cfg)}, t0)
    return 0


def cmd_figure(args) -> int:
    t0 = time.time()
    seed = args.seed if args.seed is not None else 0
    text = reproduce_figure(args.name, args.scale, args.trials, seed, None, args.workers)
    _emit(text, args.out, f"{args.name}.csv")
    if args.out:
        trials = args.trials or (DESK_TRIALS if args.scale == "desk" else FULL_TRIALS)
        configs = [config_to_dict(c) for c in figure_configs(args.name, trials, seed)]
        _write_manifest(Path(args.out), "figure", args,
                        {"figure": args.name, "scale": args.scale, "configs": configs}, t0)
    return 0


def psd_sweep(pulses: int = 200, seed: int = 0) -> list:
    """Bandwidth-additivity sweep on the scaled chirp; one report per target ``B_c``."""
    n_pulse = int(round(PSD_TP * PSD_FS))
    rows = []
    for target in PSD_BC:
        Ns = max(1, int(round(target * PSD_TP / SINC2_99_WIDTH)))
        while n_pulse % Ns:
            Ns += 1
        cfg = QamFmcwConfig(16, Ns, FmcwCarrier(PSD_BS / PSD_TP, PSD_TP))
        rows.append((target, Ns, bandwidth_partition_check(cfg, PSD_FS, pulses, seed)))
    return rows


def cmd_psd(args) -> int:
    t0 = time.time()
    lines = ["B_c_target,Ns,B_s,B_c,B_t_measured,additivity_error"]
    for target, Ns, r in psd_sweep(args.pulses, args.seed or 0):
        lines.append(f"{target:g},{Ns},{r.B_s:.6g},{r.B_c:.6g},{r.B_t_measured:.6g},"
                     f"{r.additivity_error:.4f}")
    _emit("\n".join(lines) + "\n", args.out, "psd.csv")
    if args.out:
        _write_manifest(Path(args.out), "psd", args, {"pulses": args.pulses}, t0)
    return 0


def cmd_crb(args) -> int:
    lines = ["snr_db,N,crb_range_mse_m2,crb_range_rmse_m"]
    for snr_db in args.snr_db:
        gamma = 10 ** (snr_db / 10)
        for N in args.samples:
            v = float(crb_range_mse(args.slope, gamma, N, 1.0 / args.sample_rate))
            lines.append(f"{snr_db:g},{N},{v:.6e},{np.sqrt(v):.6e}")
    _emit("\n".join(lines) + "\n", args.out, "crb.csv")
    return 0


def loopback(n_symbols: int = 10_000, seed: int = 0) -> dict:
    """Noiseless modulate/demodulate round trip; scheme label -> symbol errors."""
    rng = np.random.default_rng(seed)
    chirp = FmcwCarrier(29.98e12, 60e-6)
    cases = [(f"QAM-FMCW M={m}", QamFmcwConfig(m, 8, chirp), 40e6) for m in (4, 16, 64)]
    cases.append(("FSK-SF M=8", FskSfConfig(8, 8, SfCarrier.matching(chirp, 512)), 136e6))
    scen = ChannelScenario(0.0)
    out = {}
    for label, cfg, fs in cases:
        errors = 0
        for _ in range(-(-n_symbols // cfg.Ns)):
            sym = random_symbols(rng, cfg)
            rx = comm_received(sym, cfg, scen, fs, rng)
            res = (demod_qam_fmcw(rx, cfg, sym) if isinstance(cfg, QamFmcwConfig)
                   else demod_fsk_sf(rx, cfg, sym))
            errors += res.symbol_errors
        out[label] = errors
    return out


def cmd_demod(args) -> int:
    results = loopback(args.symbols, args.seed or 0)
    for label, errors in results.items():
        print(f"{label}: {errors} symbol errors in {args.symbols} symbols")
    return 0 if not any(results.values()) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--out", default=None, help="output directory (default: stdout)")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="jcsim", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one experiment config")
    s.add_argument("--config", required=True, help="INI experiment config")
    s.add_argument("--trials", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("figure", parents=[common], help="reproduce a figure sweep as CSV")
    f.add_argument("name", choices=FIGURES)
    f.add_argument("--scale", choices=("desk", "full"), default="desk")
    f.add_argument("--trials", type=int, default=None, help="override pulses per point")
    f.set_defaults(func=cmd_figure)

    q = sub.add_parser("psd", parents=[common], help="bandwidth additivity sweep")
    q.add_argument("--pulses", type=int, default=200)
    q.set_defaults(func=cmd_psd)

    c = sub.add_parser("crb", parents=[common], help="print range CRB table")
    c.add_argument("--slope", type=float, default=29.98e12, help="chirp slope, Hz/s")
    c.add_argument("--sample-rate", type=float, default=40e6)
    c.add_argument("--samples", type=int, nargs="+", default=[2400])
    c.add_argument("--snr-db", type=float, nargs="+", default=[-20, -10, 0, 10, 20])
    c.set_defaults(func=cmd_crb)

    d = sub.add_parser("demod", parents=[common], help="noiseless loopback check")
    d.add_argument("--symbols", type=int, default=10_000)
    d.set_defaults(func=cmd_demod)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except JcsError as exc:
        print(f"jcsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
