"""Command-line front end: validate | simulate | sweep | spec-check.

Exit codes are stable across commands: 0 ok, 1 domain violation or failed
check, 2 unreadable/malformed input, 3 unwritable output.  Set the
``SCSTIM_ASCII`` environment variable to any non-empty value to force plain
ASCII console output (CI logs).

The report path writes delimited output plus a rendered figure: ``simulate``
and ``sweep`` save a PNG next to the CSV unless ``--no-figure`` is given.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from . import __version__, control, flyback
from .checks import run_checks
from .config import ConfigError, default_config_yaml, load_config
from .engine import (ProtocolError, RegulationConfig, SimConfig, Waveform,
                     simulate)
from .load import LoadModel
from .params import validate_protocol

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INPUT = 2
EXIT_OUTPUT = 3

CSV_HEADER = "t_s,v_out_V,v_load_V,i_load_mA,phase,s1,s2,k1,k2"

SWEEP_PARAMS = ("voltage_code", "frequency", "load_r", "target_current")
SWEEP_HEADER = ("param,value,peak_v_out_V,peak_i_mA,rise_time_s,"
                "net_charge_frac,period_s,final_code,saturated")


def _ascii() -> bool:
    return bool(os.environ.get("SCSTIM_ASCII"))


def _sym(unicode_s: str, ascii_s: str) -> str:
    return ascii_s if _ascii() else unicode_s


def _fmt_time(seconds: float) -> str:
    mu = _sym("µs", "us")
    if seconds >= 1.0:
        return f"{seconds:.4g} s"
    if seconds >= 1e-3:
        return f"{seconds * 1e3:.4g} ms"
    if seconds >= 1e-6:
        return f"{seconds * 1e6:.4g} {mu}"
    return f"{seconds * 1e9:.4g} ns"


def _f6(x: float) -> str:
    return f"{x + 0.0:.6f}"    # +0.0 squashes negative zero


def _e9(x: float) -> str:
    return f"{x:.8e}"          # 9 significant digits


def write_waveform_csv(w: Waveform, path: Path) -> None:
    lines = [CSV_HEADER]
    for i in range(len(w)):
        lines.append(",".join((
            _e9(w.t[i]), _f6(w.v_out[i]), _f6(w.v_load[i]), _f6(w.i_load_ma[i]),
            w.phase[i],
            "1" if w.s1[i] else "0", "1" if w.s2[i] else "0",
            "1" if w.k1[i] else "0", "1" if w.k2[i] else "0",
        )))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _print_summary(stats, regulated: bool) -> None:
    print(f"pulses: {len(stats.pulses)}")
    print(f"peak v_out: {_f6(stats.peak_v_out)} V")
    print(f"peak |i|: {_f6(stats.peak_i_ma)} mA")
    if stats.rise_time_s is not None:
        print(f"rise time (0-90%): {_e9(stats.rise_time_s)} s ({_fmt_time(stats.rise_time_s)})")
    if stats.pulses:
        print(f"net charge / phase-1 charge (worst pulse): {stats.worst_net_fraction:.3e}")
    if regulated:
        trace = " ".join(str(c) for c in stats.code_trace)
        print(f"code trace: {trace}")
        print(f"final code: {stats.final_code}")
        if stats.compliance_limited:
            print("compliance limit: target current needs more voltage than the preset maximum")


def _load_cfg_or_exit(path: str, preset: str | None):
    try:
        return load_config(path, preset_override=preset)
    except FileNotFoundError:
        print(f"error: config file not found: {path}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT) from None
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT) from None


def cmd_validate(args) -> int:
    cfg = _load_cfg_or_exit(args.config, args.preset)
    report = validate_protocol(cfg.protocol)
    for warning in report.warnings:
        print(f"warning: {warning}")
    if report.ok:
        print("ok")
        return EXIT_OK
    for v in report.violations:
        print(f"violation: {v}")
    return EXIT_DOMAIN


def cmd_simulate(args) -> int:
    cfg = _load_cfg_or_exit(args.config, args.preset)
    try:
        w, stats = simulate(cfg)
    except ProtocolError as exc:
        print(f"protocol invalid: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.out:
        out = Path(args.out)
        try:
            write_waveform_csv(w, out)
        except OSError as exc:
            print(f"error: cannot write {out}: {exc}", file=sys.stderr)
            return EXIT_OUTPUT
        print(f"wrote {out} ({len(w)} samples)")
        if not args.no_figure and len(w):
            from .plots import save_waveform_figure
            fig_path = out.with_suffix(".png")
            try:
                save_waveform_figure(w, fig_path, title=f"{cfg.flyback_preset or 'custom'} / "
                                                        f"{cfg.load_preset or 'custom load'}")
            except OSError as exc:
                print(f"error: cannot write {fig_path}: {exc}", file=sys.stderr)
                return EXIT_OUTPUT
            print(f"wrote {fig_path}")
    _print_summary(stats, regulated=cfg.regulation.enabled)
    return EXIT_OK


def _parse_values(spec: str, as_int: bool):
    spec = spec.strip()
    if not spec:
        return []
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"range must be start:stop[:step], got {spec!r}")
        start, stop = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else 1.0
        if step <= 0:
            raise ValueError("range step must be positive")
        values = []
        v = start
        while v <= stop + step * 1e-9:
            values.append(v)
            v += step
    else:
        values = [float(tok) for tok in spec.split(",") if tok.strip()]
    return [int(round(v)) for v in values] if as_int else values


def _apply_sweep_point(cfg: SimConfig, param: str, value) -> SimConfig:
    if param == "voltage_code":
        return dataclasses.replace(cfg, protocol=cfg.protocol.with_(voltage_code=int(value)))
    if param == "frequency":
        return dataclasses.replace(cfg, protocol=cfg.protocol.with_(frequency_hz=float(value)))
    if param == "load_r":
        return dataclasses.replace(cfg, load=LoadModel.resistive(float(value)),
                                   load_preset=None, sample_policy=None)
    # target_current
    return dataclasses.replace(
        cfg, regulation=RegulationConfig(enabled=True, target_ma=float(value),
                                         gain_codes_per_ma=cfg.regulation.gain_codes_per_ma,
                                         adaptive=cfg.regulation.adaptive))


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMS:
        print(f"error: unknown sweep parameter {args.param!r}; "
              f"choose from {', '.join(SWEEP_PARAMS)}", file=sys.stderr)
        return EXIT_INPUT
    cfg = _load_cfg_or_exit(args.config, args.preset)
    try:
        values = _parse_values(args.values, as_int=args.param == "voltage_code")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    rows = []
    for value in values:
        point = _apply_sweep_point(cfg, args.param, value)
        try:
            w, stats = simulate(point)
        except ProtocolError as exc:
            print(f"protocol invalid at {args.param}={value}: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
        period = (w.pulse_starts[1] - w.pulse_starts[0]) if len(w.pulse_starts) > 1 else float("nan")
        rows.append({
            "value": value,
            "peak_v_out_V": stats.peak_v_out,
            "peak_i_mA": stats.peak_i_ma,
            "rise_time_s": stats.rise_time_s if stats.rise_time_s is not None else float("nan"),
            "net_charge_frac": stats.worst_net_fraction,
            "period_s": period,
            "final_code": stats.final_code if stats.final_code is not None else 0,
            "saturated": stats.compliance_limited,
        })

    lines = [SWEEP_HEADER]
    for r in rows:
        value_txt = str(r["value"]) if isinstance(r["value"], int) else _e9(r["value"])
        lines.append(",".join((
            args.param, value_txt, _f6(r["peak_v_out_V"]), _f6(r["peak_i_mA"]),
            _e9(r["rise_time_s"]), f"{r['net_charge_frac']:.3e}", _e9(r["period_s"]),
            str(r["final_code"]), "1" if r["saturated"] else "0",
        )))
    out = Path(args.out)
    try:
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write {out}: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    print(f"wrote {out} ({len(rows)} rows)")
    if rows and not args.no_figure:
        from .plots import save_sweep_figure
        fig_path = out.with_suffix(".png")
        try:
            save_sweep_figure([r["value"] for r in rows], rows, args.param, fig_path)
        except OSError as exc:
            print(f"error: cannot write {fig_path}: {exc}", file=sys.stderr)
            return EXIT_OUTPUT
        print(f"wrote {fig_path}")
    return EXIT_OK


def cmd_spec_check(args) -> int:
    timing = None
    preset = args.preset or "paper_120"
    if args.config:
        cfg = _load_cfg_or_exit(args.config, args.preset)
        timing = cfg.timing
        preset = cfg.flyback_preset or preset
    results = run_checks(timing=timing, preset=preset)
    ok_mark = _sym("✓", "PASS")
    fail_mark = _sym("✗", "FAIL")
    name_w = max(len(r.name) for r in results)
    failures = 0
    for r in results:
        mark = ok_mark if r.passed else fail_mark
        print(f"{mark:>4}  {r.name:<{name_w}}  target: {r.target}  measured: {r.measured}")
        if not r.passed:
            failures += 1
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return EXIT_OK if failures == 0 else EXIT_DOMAIN


def cmd_init(args) -> int:
    out = Path(args.out)
    try:
        out.write_text(default_config_yaml(), encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write {out}: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scstim",
        description="Switched-capacitor HV stimulator simulator",
        epilog="Set SCSTIM_ASCII=1 for plain ASCII console output.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True, help="YAML config file")
        sp.add_argument("--preset", default=None, choices=list(flyback.PRESET_NAMES),
                        help="override the flyback calibration preset")
        sp.add_argument("--seed", type=int, default=None,
                        help="reserved for future stochastic features")

    sp = sub.add_parser("validate", help="validate a protocol config against the envelope")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("simulate", help="run a pulse train; write CSV waveform and figure")
    common(sp)
    sp.add_argument("--out", default=None, help="output CSV path (figure lands next to it)")
    sp.add_argument("--no-figure", action="store_true", help="skip the PNG figure")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="sweep one parameter; one summary row per point")
    common(sp)
    sp.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    sp.add_argument("--values", required=True,
                    help="comma list or start:stop:step range (empty for header-only)")
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.add_argument("--no-figure", action="store_true", help="skip the PNG figure")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("spec-check", help="run the built-in verification scenarios")
    sp.add_argument("--config", default=None, help="optional config overriding timing/preset")
    sp.add_argument("--preset", default=None, choices=list(flyback.PRESET_NAMES))
    sp.add_argument("--seed", type=int, default=None, help="reserved")
    sp.set_defaults(func=cmd_spec_check)

    sp = sub.add_parser("init", help="write a commented example config")
    sp.add_argument("--out", default="scstim.yaml", help="where to write the example config")
    sp.set_defaults(func=cmd_init)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
