"""Command-line interface: ``mcwind generate | analyze | validate``.

Exit codes: 0 success, 1 validation failed, 2 invalid configuration or
arguments, 3 file I/O error, 4 coherence model could not be factorized.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .analysis import coherence_report, estimate_coherence
from .audio_io import read_wav, write_split, write_wav
from .config import RunConfig
from .dsp import MultichannelBuffer, WindowSpec
from .errors import ArgumentError, ConfigurationError, ModelError
from .multichannel import generate
from .scenes import SCENES, run_scene

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO, EXIT_MODEL = 0, 1, 2, 3, 4

# command-line flag -> configuration key
FLAG_KEYS = {
    "seed": "seed",
    "duration": "duration_s",
    "channels": "num_channels",
    "spacing": "mic_spacing_m",
    "speed": "freefield_speed_mps",
    "doa": "doa",
    "band_limit": "band_limit_hz",
}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--seed", metavar="INT", help="master seed")
    p.add_argument("--duration", metavar="SECONDS", help="signal duration in seconds")
    p.add_argument("--channels", metavar="N", help="number of microphones")
    p.add_argument("--spacing", metavar="METERS", help="adjacent microphone spacing in meters")
    p.add_argument("--speed", metavar="MPS", help="free-field wind speed in m/s")
    p.add_argument("--doa", metavar="ANGLE",
                   help="wind direction relative to the array axis, radians or e.g. 90deg")
    p.add_argument("--band-limit", metavar="HZ", help="upper analysis frequency in Hz")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                   help="override any configuration key (repeatable)")
    p.add_argument("--dump-config", action="store_true",
                   help="print the effective configuration and exit")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcwind",
        description="Multichannel wind noise with Corcos spatial coherence.",
        epilog="Units: meters for spacing, m/s for speed, radians (or NNdeg) for angles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize an N-channel wind noise WAV")
    _add_common(g)
    g.add_argument("--output", "-o", metavar="PATH", help="output WAV path")
    g.add_argument("--split", action="store_true", help="write one mono WAV per microphone")

    a = sub.add_parser("analyze", help="estimate coherence of a WAV and compare to the model")
    a.add_argument("input", metavar="INPUT_WAV")
    _add_common(a)
    a.add_argument("--report", metavar="PATH", help="CSV report path (default: <input>_coherence.csv)")

    v = sub.add_parser("validate", help="generate and analyze the reference scenes")
    _add_common(v)
    v.add_argument("--list", action="store_true", help="list the scenes without running them")
    v.add_argument("--alpha-mismatch", type=float, default=1.0, metavar="FACTOR",
                   help="scale the decay rates of the comparison model (fault injection)")
    return parser


def _load_config(args) -> RunConfig:
    overrides = {}
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for item in args.set:
        if "=" not in item:
            raise CliError(f"--set expects KEY=VALUE, got {item!r}", EXIT_CONFIG)
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.config and not Path(args.config).is_file():
        raise CliError(f"cannot read config file {args.config}", EXIT_IO)
    try:
        return RunConfig.load(args.config, overrides)
    except ConfigurationError as exc:
        raise CliError(f"invalid configuration: {exc}", EXIT_CONFIG) from None
    except OSError as exc:
        raise CliError(f"cannot read configuration: {exc}", EXIT_IO) from None


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    if args.dump_config:
        sys.stdout.write(cfg.dump())
        return EXIT_OK
    if not args.output:
        raise CliError("generate needs --output", EXIT_CONFIG)
    sim = cfg.simulation_config()
    try:
        out = generate(sim)
    except ModelError as exc:
        raise CliError(f"model error: {exc}", EXIT_MODEL) from None
    fmt = cfg["output_format"]
    try:
        if args.split:
            paths = write_split(args.output, out, fmt, dither_seed=sim.master_seed)
        else:
            write_wav(args.output, out, fmt, dither_seed=sim.master_seed)
            paths = [Path(args.output)]
    except OSError as exc:
        raise CliError(f"cannot write output: {exc}", EXIT_IO) from None
    print(f"seed: {sim.master_seed}")
    print(f"normalization gain: {out.normalization_gain!r}")
    for p in paths:
        print(f"wrote {p} ({out.num_channels if not args.split else 1} ch, "
              f"{out.num_samples} samples, {fmt})")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    if args.dump_config:
        sys.stdout.write(cfg.dump())
        return EXIT_OK
    try:
        data, rate = read_wav(args.input)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {args.input}: {exc}", EXIT_IO) from None
    params = cfg.corcos_params()
    if data.shape[0] != params.num_channels:
        raise CliError(f"{args.input} has {data.shape[0]} channels, configuration expects "
                       f"{params.num_channels}", EXIT_CONFIG)
    if rate != params.sample_rate_hz:
        raise CliError(f"{args.input} is sampled at {rate:g} Hz, configuration expects "
                       f"{params.sample_rate_hz:g} Hz", EXIT_CONFIG)
    buffer = MultichannelBuffer(data, rate)
    try:
        estimate = estimate_coherence(buffer, WindowSpec.hann(params.fft_length), params.fft_length)
    except ArgumentError as exc:
        raise CliError(f"{args.input}: {exc}", EXIT_CONFIG) from None
    report = coherence_report(estimate, params, cfg["band_limit_hz"])
    report_path = args.report or str(Path(args.input).with_name(Path(args.input).stem + "_coherence.csv"))
    try:
        curves, summary = report.write_csv(report_path)
    except OSError as exc:
        raise CliError(f"cannot write report: {exc}", EXIT_IO) from None
    for s in report.summary:
        print(f"nMSE mic {s.i + 1}-{s.j + 1}: {s.nmse:.6f} ({s.bins_used} bins"
              + (f", {s.bins_missing} undefined" if s.bins_missing else "") + ")")
    print(f"wrote {curves} and {summary}")
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.list:
        for s in SCENES:
            print(f"{s.name:<10} {s.description}")
        return EXIT_OK
    cfg = _load_config(args)
    if args.dump_config:
        sys.stdout.write(cfg.dump())
        return EXIT_OK
    duration = cfg["duration_s"]
    base = cfg.simulation_config()
    all_passed = True
    for scene in SCENES:
        try:
            checks, _ = run_scene(scene, base, duration_s=duration,
                                  model_alpha_scale=args.alpha_mismatch)
        except ModelError as exc:
            raise CliError(f"{scene.name}: model error: {exc}", EXIT_MODEL) from None
        for c in checks:
            print(c.line(), flush=True)
            all_passed &= c.passed
    print("ALL PASS" if all_passed else "SOME CRITERIA FAILED")
    return EXIT_OK if all_passed else EXIT_FAIL


COMMANDS = {"generate": cmd_generate, "analyze": cmd_analyze, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"mcwind: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
