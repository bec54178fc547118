"""Command-line entry point: ``qecgsm {presets,circuit,run,sweep,selftest}``."""
from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence

from .circuit import export_text
from .noise import PRESET_FIELDS, PRESETS, NoiseModel, compile_noisy, get_preset, presets_to_json
from .pauli import code_catalog, get_code
from .qec import QED_METHODS, detection_circuit
from .sweep import (MODES, QEC_METHODS, ExperimentConfig, ResultTable, atomic_write, config_from_dict,
                    read_config, run_config, table_to_csv)


class CommandError(Exception):
    """User-facing failure; the message is printed and the exit status is 2."""


def _preset_table() -> str:
    names = list(PRESETS)
    width = max(len(f) for f in PRESET_FIELDS)
    lines = [f"{'field':<{width}}  " + "  ".join(f"{n:>12}" for n in names)]
    for f in PRESET_FIELDS:
        lines.append(f"{f:<{width}}  " + "  ".join(f"{getattr(PRESETS[n], f):>12g}" for n in names))
    return "\n".join(lines)


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def cmd_presets(args) -> int:
    _emit(presets_to_json() + "\n" if args.json else _preset_table() + "\n", args.out)
    return 0


def _lookup(fn, name):
    try:
        return fn(name)
    except KeyError as exc:
        raise CommandError(exc.args[0]) from None


def cmd_circuit(args) -> int:
    code = _lookup(get_code, args.code)
    try:
        circ = detection_circuit(code, args.method)
    except ValueError as exc:
        raise CommandError(str(exc)) from None
    if args.preset:
        _lookup(get_preset, args.preset)
        circ = compile_noisy(circ, NoiseModel.from_preset(args.preset, args.perfect_control))
    _emit(export_text(circ), args.out)
    return 0


def _summary(table: ResultTable) -> list[str]:
    lines = []
    methods = list(dict.fromkeys(r["method"] for r in table.rows))
    for m in methods:
        rows = table.select(method=m)
        last = rows[-1]
        mean_rounds = sum(r["avg_readout_rounds"] for r in rows) / len(rows)
        lines.append(f"{last['code']} {m:<9} final idle {last['idle_us']:g} us: "
                     f"logical error {last['logical_error_rate']:.6g}, mean rounds {mean_rounds:.4g}")
    return lines


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        try:
            cfg = read_config(args.config)
        except FileNotFoundError:
            raise CommandError(f"config file not found: {args.config}") from None
        except (KeyError, ValueError) as exc:
            raise CommandError(f"{args.config}: {exc.args[0]}") from None
        overrides = {}
        if args.preset:
            overrides["preset"] = args.preset
        if args.perfect_control:
            overrides["perfect_control"] = True
        if args.noiseless:
            overrides["noiseless"] = True
        if overrides:
            cfg = _build_config({**cfg.to_dict(), **overrides})
        return cfg
    if not args.code:
        raise CommandError("give either --config or --code")
    mode = args.mode
    methods = args.method or (["sm", "gsm"] if mode == "qed" else list(QEC_METHODS))
    data = {"code": args.code, "methods": methods, "mode": mode, "preset": args.preset or "sycamore",
            "perfect_control": args.perfect_control, "noiseless": args.noiseless, "raw_reference": args.raw}
    if args.idle is not None:
        data["idle_us"] = args.idle
    return _build_config(data)


def _build_config(data: dict) -> ExperimentConfig:
    try:
        return config_from_dict(data)
    except KeyError as exc:
        raise CommandError(exc.args[0]) from None
    except ValueError as exc:
        raise CommandError(str(exc)) from None


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    table = run_config(cfg)
    out = args.out or cfg.output
    if out:
        atomic_write(out, table_to_csv(table))
    for line in _summary(table):
        print(line)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    out = args.out or cfg.output
    if not out:
        raise CommandError("sweep needs an output path (--out or the config's 'output')")
    table = run_config(cfg)
    atomic_write(out, table_to_csv(table))
    print(f"wrote {len(table)} rows to {out}")
    for line in _summary(table):
        print(line)
    return 0


def cmd_selftest(args) -> int:
    from .verify import corrupt_code, run_selftest

    codes = dict(code_catalog())
    if args.corrupt:
        name = _lookup(get_code, args.corrupt).name
        codes[name] = corrupt_code(codes[name])
    ok = run_selftest(quick=args.quick, codes=codes)
    print("selftest passed" if ok else "selftest FAILED")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qecgsm", description="Syndrome and codespace-projector measurement "
                                     "experiments on small stabilizer codes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("presets", help="show the hardware noise presets")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--out", help="write to this file instead of stdout")
    p.set_defaults(func=cmd_presets)

    codes = ", ".join(sorted(code_catalog()))
    p = sub.add_parser("circuit", help="export a detection circuit as OpenQASM-style text")
    p.add_argument("--code", required=True, help=f"code name ({codes})")
    p.add_argument("--method", required=True, choices=QED_METHODS)
    p.add_argument("--preset", help="insert the noise of this preset")
    p.add_argument("--perfect-control", action="store_true", help="with --preset: drop gate depolarizing noise")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_circuit)

    for name, func, text in (("run", cmd_run, "run an experiment and print a summary"),
                             ("sweep", cmd_sweep, "run a configured sweep and write CSV")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--code", help=f"code name ({codes})")
        p.add_argument("--method", action="append", choices=QED_METHODS + QEC_METHODS,
                       help="method (repeatable)")
        p.add_argument("--mode", choices=MODES, default="qed")
        p.add_argument("--preset", help=f"preset name ({', '.join(PRESETS)})")
        p.add_argument("--idle", type=float, nargs="+", help="idle grid in microseconds")
        p.add_argument("--raw", action="store_true", help="add unencoded reference rows")
        p.add_argument("--perfect-control", action="store_true", help="drop gate depolarizing noise")
        p.add_argument("--noiseless", action="store_true", help="switch every noise source off")
        p.add_argument("--out", help="CSV output path")
        p.set_defaults(func=func)

    p = sub.add_parser("selftest", help="run the built-in consistency checks")
    p.add_argument("--quick", action="store_true", help="smaller random sample")
    p.add_argument("--corrupt", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
