"""Command-line surface: train, evaluate, baseline-fit-covariance,
export-constellation, make-code, gen-traces."""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

from . import channel as ch
from . import fec
from .config import ConfigError, load_config
from .constellation import point_labels
from .harness import Evaluator, EvaluationSetupError, evaluate, write_results
from .lmmse import fit_covariance, load_covariance, save_covariance
from .metrics import SchemeConfig, scheme_preset
from .ofdm import GridConfig
from .training import TrainingConfig, load_checkpoint, train


def _add_config_args(p):
    p.add_argument("--config", type=Path, default=None, help="TOML run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="SECTION.KEY=VALUE", help="override a config entry")


def _load(args):
    return load_config(args.config, args.overrides)


def _resolve_code(cfg):
    if cfg.fec.alist == "builtin":
        return fec.load_builtin_code()
    return fec.LdpcCode.from_alist(cfg.fec.alist)


def _scheme_from_config(cfg) -> SchemeConfig:
    extra = {}
    if cfg.scheme.receiver:
        extra["receiver"] = cfg.scheme.receiver
    if cfg.scheme.constellation:
        extra["constellation_source"] = cfg.scheme.constellation
    return scheme_preset(
        cfg.scheme.id,
        pattern_id=cfg.scheme.pilot_pattern or None,
        bits_per_re=cfg.scheme.bits_per_re,
        code_rate=cfg.scheme.code_rate,
        n_subcarriers=cfg.grid.n_subcarriers,
        n_symbols=cfg.grid.n_symbols,
        **extra,
    )


def cmd_train(args):
    cfg = _load(args)
    t = cfg.training
    training_cfg = TrainingConfig(
        scheme=cfg.scheme.id,
        iterations=t.iterations,
        batch_frames=t.batch_frames,
        learning_rate=t.learning_rate,
        ebn0_min_db=t.ebn0_min_db,
        ebn0_max_db=t.ebn0_max_db,
        speed_min_kmh=cfg.channel.speed_min_kmh,
        speed_max_kmh=cfg.channel.speed_max_kmh,
        pilot_pattern=cfg.scheme.pilot_pattern or None,
        width=t.width,
        bits_per_re=cfg.scheme.bits_per_re,
        n_subcarriers=cfg.grid.n_subcarriers,
        n_symbols=cfg.grid.n_symbols,
        carrier_hz=cfg.channel.carrier_hz,
        subcarrier_spacing_hz=cfg.channel.subcarrier_spacing_hz,
        n_taps=cfg.channel.n_taps,
        channel=cfg.channel.generator,
        code_rate=cfg.scheme.code_rate,
        constellation_init=t.constellation_init,
        optimizer=t.optimizer,
        seed=t.seed,
        checkpoint_every=t.checkpoint_every,
        out_dir=t.out_dir,
    )
    result = train(training_cfg, printer=print)
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"loss trace: {result.trace_path}")
    return 0


def cmd_evaluate(args):
    cfg = _load(args)
    scheme = _scheme_from_config(cfg)
    covariance = load_covariance(args.covariance) if args.covariance else None
    profile = ch.MobilityProfile(
        cfg.channel.speed_min_kmh, cfg.channel.speed_max_kmh, cfg.channel.carrier_hz,
        cfg.channel.subcarrier_spacing_hz, cfg.grid.n_subcarriers)
    evaluator = Evaluator(scheme=scheme, code=_resolve_code(cfg), covariance=covariance,
                          profile=profile, n_taps=cfg.channel.n_taps,
                          channel_kind=cfg.channel.generator)
    ev = cfg.evaluate
    grids = {"esn0_grid_db": ev.esn0_grid_db} if ev.esn0_grid_db else {"ebn0_grid_db": ev.ebn0_grid_db}
    rows = evaluate(evaluator, ev.speeds_kmh, ev.frames, ev.seed,
                    max_frame_errors=ev.max_frame_errors, progress=print, **grids)
    out = Path(args.output or ev.output)
    manifest = write_results(out, rows, {
        "seed": ev.seed, "scheme": asdict(cfg.scheme), "grid": asdict(cfg.grid),
        "channel": asdict(cfg.channel), "evaluate": asdict(cfg.evaluate),
    })
    print(f"rows: {out}")
    print(f"manifest: {manifest}")
    return 0


def cmd_fit_covariance(args):
    cfg = _load(args)
    grid = GridConfig(cfg.grid.n_subcarriers, cfg.grid.n_symbols, cfg.grid.cp_length)
    profile = ch.MobilityProfile(
        cfg.channel.speed_min_kmh, cfg.channel.speed_max_kmh, cfg.channel.carrier_hz,
        cfg.channel.subcarrier_spacing_hz, cfg.grid.n_subcarriers)
    taps, _ = ch.generate_batch(profile, grid.n_samples, args.frames, args.seed,
                                cfg.channel.n_taps)
    reals = (ch.ChannelRealization(taps=taps[i]) for i in range(args.frames))
    model = fit_covariance(reals, grid)
    save_covariance(args.output, model)
    print(f"covariance ({model.frames_used} frames, n={grid.n_elements}): {args.output}")
    return 0


def cmd_export_constellation(args):
    constellation, _, _, meta = load_checkpoint(args.checkpoint)
    points = constellation.points()
    labels = point_labels(constellation.bits_per_symbol)
    lines = ["index bits re im"]
    for idx, (pt, bits) in enumerate(zip(points, labels)):
        lines.append(f"{idx} {''.join(map(str, bits))} {float(pt.real)!r} {float(pt.imag)!r}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
        print(f"constellation ({meta['scheme']}): {args.output}")
    else:
        print(text, end="")
    return 0


def cmd_make_code(args):
    h = fec.peg_construct(args.length, args.checks, var_degree=args.var_degree, seed=args.seed)
    code = fec.LdpcCode(h)
    if code.rank != args.checks:
        print(f"warning: parity-check rank {code.rank} < {args.checks}; "
              f"try another --seed", file=sys.stderr)
    Path(args.output).write_text(fec.format_alist(h))
    print(f"code n={code.n} k={code.k} rate={code.rate:.4f}: {args.output}")
    return 0


def cmd_gen_traces(args):
    cfg = _load(args)
    grid = GridConfig(cfg.grid.n_subcarriers, cfg.grid.n_symbols, cfg.grid.cp_length)
    profile = ch.MobilityProfile(args.speed, args.speed, cfg.channel.carrier_hz,
                                 cfg.channel.subcarrier_spacing_hz, cfg.grid.n_subcarriers)
    taps, _ = ch.generate_batch(profile, grid.n_samples, args.frames, args.seed,
                                cfg.channel.n_taps)
    ch.write_trace(args.output, [taps[i] for i in range(args.frames)],
                   carrier_hz=cfg.channel.carrier_hz, speed_kmh=args.speed)
    print(f"{args.frames} frames at {args.speed} km/h: {args.output}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ofdmlink",
        description="Link-level OFDM simulator: LMMSE baseline, neural receivers, "
                    "and pilot/CP-free learned constellations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a neural receiver (and constellation for gs)")
    _add_config_args(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="Monte Carlo BER/goodput over an SNR grid")
    _add_config_args(p)
    p.add_argument("--covariance", type=Path, default=None,
                   help="fitted covariance container (LMMSE receiver)")
    p.add_argument("--output", type=Path, default=None, help="CSV output path")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("baseline-fit-covariance",
                       help="fit the LMMSE covariance over generated channels")
    _add_config_args(p)
    p.add_argument("--frames", type=int, default=2000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", type=Path, required=True)
    p.set_defaults(fn=cmd_fit_covariance)

    p = sub.add_parser("export-constellation", help="dump a checkpoint's constellation as text")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--output", type=Path, default=None)
    p.set_defaults(fn=cmd_export_constellation)

    p = sub.add_parser("make-code", help="construct an LDPC code and write alist")
    p.add_argument("--length", type=int, default=1024)
    p.add_argument("--checks", type=int, default=341)
    p.add_argument("--var-degree", type=int, default=3)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--output", type=Path, required=True)
    p.set_defaults(fn=cmd_make_code)

    p = sub.add_parser("gen-traces", help="write a tap-trace file from the fading generator")
    _add_config_args(p)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--speed", type=float, required=True, help="terminal speed [km/h]")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", type=Path, required=True)
    p.set_defaults(fn=cmd_gen_traces)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, EvaluationSetupError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
