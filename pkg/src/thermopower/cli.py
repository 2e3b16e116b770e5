"""Command-line front end.

Subcommands: fit, model eval, model calibrate, debias, sensor-correct, gen.
Every run produces a JSON-serializable report {schema, tool, command,
inputs, results, warnings}; --json prints it instead of the human summary.
Output is byte-deterministic for fixed inputs and flags: reports carry no
timestamps, input files are identified by content digest, and ANSI styling
is dropped when stdout is not a terminal or THERMO_NO_COLOR is set.

Exit codes: 0 success; 1 computation failed (a partial report is still
emitted); 2 usage, I/O, or input-format error (message on stderr).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import warnings
from pathlib import Path

from . import __version__
from .debias import DebiasSpec, debias, fit_eta, write_debiased
from .errors import (
    NonMonotonicTime,
    NonPositiveTime,
    ThermoError,
)
from .fitting import FitKind, aggregate_error, compare_models, fit as fit_one
from .powermodel import (
    CoefficientSet,
    ModelParams,
    builtin_set,
    calibrate,
    derive_params,
)
from .sensor import SensorModel, b_factor, correct_series, model_from_json
from .trace import (
    TraceMeta,
    _fmt,
    generate_synthetic_trace,
    parse_table,
    parse_trace,
    write_trace,
)

_MODEL_FLAGS = {"linear": FitKind.LINEAR, "quad": FitKind.QUADRATIC, "exp": FitKind.EXPONENTIAL}


def _styled(text: str) -> str:
    if sys.stdout.isatty() and not os.environ.get("THERMO_NO_COLOR"):
        return f"\x1b[1m{text}\x1b[0m"
    return text


def _digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _sanitize(obj):
    """Replace non-finite floats with None so reports stay strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


class _Run:
    """Collects report material for one invocation."""

    def __init__(self, argv: list[str]):
        self.argv = list(argv)
        self.inputs: dict[str, str] = {}
        self.warnings: list[str] = []

    def read_bytes(self, path: str) -> bytes:
        data = Path(path).read_bytes()
        self.inputs[path] = _digest(data)
        return data

    def report(self, results) -> dict:
        return _sanitize(
            {
                "schema": 1,
                "tool": {"name": "thermo", "version": __version__},
                "command": self.argv,
                "inputs": self.inputs,
                "results": results,
                "warnings": self.warnings,
            }
        )


def _emit(args, report: dict, human_lines: list[str]) -> None:
    if args.out_report:
        Path(args.out_report).write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    if args.json:
        print(json.dumps(report, sort_keys=True, indent=2))
    elif not args.quiet:
        for line in human_lines:
            print(line)


def _fit_result_dict(result) -> dict:
    return {
        "kind": result.kind.value,
        "coeffs": list(result.coeffs),
        "error": result.error,
        "iterations": result.iterations,
        "converged": result.converged,
    }


def _write_plot(path: str, pairs) -> None:
    lines = ["temp_c,power_w"]
    for temp, power in sorted(pairs):
        lines.append(f"{_fmt(temp)},{_fmt(power)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- fit ---

def cmd_fit(args, run: _Run) -> tuple[int, dict, list[str]]:
    traces = [parse_trace(run.read_bytes(p)) for p in args.traces]
    lines = []
    failed = False

    if args.model == "all":
        cmp = compare_models(traces)
        per_trace = []
        for path, row in zip(args.traces, cmp.results):
            per_trace.append(
                {
                    "path": path,
                    "fits": {
                        kind.value: _fit_result_dict(r) if r else None
                        for kind, r in row.items()
                    },
                }
            )
        results = {
            "traces": per_trace,
            "aggregated": {k.value: v for k, v in cmp.aggregated.items()},
            "sign_tests": {
                f"{a.value}_vs_{b.value}": p for (a, b), p in cmp.p_values.items()
            },
            "failures": [
                {"trace": args.traces[i], "kind": kind.value, "message": msg}
                for i, kind, msg in cmp.failures
            ],
        }
        failed = bool(cmp.failures)
        if args.group_by == "proc-cores":
            groups: dict[str, list[int]] = {}
            for i, tr in enumerate(traces):
                groups.setdefault(f"{tr.meta.processor}/c{tr.meta.cores}", []).append(i)
            results["groups"] = {
                key: {
                    kind.value: _aggregate_subset(traces, cmp, kind, idxs)
                    for kind in FitKind
                }
                for key, idxs in sorted(groups.items())
            }
        for entry in per_trace:
            lines.append(_styled(entry["path"]))
            for kind_name, fd in entry["fits"].items():
                if fd is None:
                    lines.append(f"  {kind_name}: failed")
                else:
                    lines.append(
                        f"  {kind_name}: error={fd['error']!r} coeffs={fd['coeffs']!r}"
                    )
        lines.append(
            "aggregated: "
            + " ".join(f"{k}={v!r}" for k, v in results["aggregated"].items())
        )
        lines.append(
            "sign tests: "
            + " ".join(f"{k} p={v!r}" for k, v in results["sign_tests"].items())
        )
        plot_source = cmp.results[0][FitKind.EXPONENTIAL]
    else:
        kind = _MODEL_FLAGS[args.model]
        per_trace = []
        plot_source = None
        for i, (path, tr) in enumerate(zip(args.traces, traces)):
            try:
                r = fit_one(tr, kind)
            except ThermoError as exc:
                per_trace.append(
                    {"path": path, "fits": {kind.value: None},
                     "message": f"{type(exc).__name__}: {exc}"}
                )
                failed = True
                lines.append(f"{path}: {kind.value} failed: {exc}")
                continue
            if i == 0:
                plot_source = r
            per_trace.append({"path": path, "fits": {kind.value: _fit_result_dict(r)}})
            lines.append(f"{path}: error={r.error!r} coeffs={list(r.coeffs)!r}")
        results = {"traces": per_trace}

    if args.plot and plot_source is not None:
        pairs = [(t, plot_source.predict(t)) for t in traces[0].temps()]
        _write_plot(args.plot, pairs)
    return (1 if failed else 0), results, lines


def _aggregate_subset(traces, cmp, kind, idxs):
    group = [
        (traces[i], cmp.results[i][kind]) for i in idxs if cmp.results[i][kind] is not None
    ]
    return aggregate_error(group) if group else None


# --- model eval / calibrate ---

def _load_coeffs(args, run: _Run) -> CoefficientSet:
    if args.coeffs:
        return CoefficientSet.from_dict(json.loads(run.read_bytes(args.coeffs)))
    return builtin_set(args.proc)


def cmd_model_eval(args, run: _Run) -> tuple[int, dict, list[str]]:
    coeffs = _load_coeffs(args, run)
    params = derive_params(coeffs, args.freq, args.cores)
    power = params.power(args.temp)
    results = {
        "label": coeffs.label,
        "temp_c": args.temp,
        "freq_ghz": args.freq,
        "cores": args.cores,
        "params": {"a0": params.a0, "a1": params.a1, "a2": params.a2},
        "power_w": power,
    }
    return 0, results, [repr(power)]


def _load_observations(path: str, run: _Run):
    p = Path(path)
    if p.is_dir():
        files = sorted(f for f in p.iterdir() if f.suffix == ".json")
        raw = [json.loads(run.read_bytes(str(f))) for f in files]
    else:
        raw = json.loads(run.read_bytes(path))
        if not isinstance(raw, list):
            raise ValueError("a single observations file must hold a JSON list")
    obs = []
    for entry in raw:
        obs.append(
            (
                float(entry["freq_ghz"]),
                int(entry["cores"]),
                ModelParams(float(entry["a0"]), float(entry["a1"]), float(entry["a2"])),
            )
        )
    return obs


def cmd_model_calibrate(args, run: _Run) -> tuple[int, dict, list[str]]:
    obs = _load_observations(args.observations, run)
    coeffs, diag = calibrate(obs, label=args.label)
    results = {"coeffs": coeffs.to_dict(), "diagnostics": diag.to_dict()}
    if args.out:
        Path(args.out).write_text(
            json.dumps(coeffs.to_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        results["output"] = args.out
    lines = [
        f"label: {coeffs.label}",
        "m: " + " ".join(repr(v) for v in coeffs.m),
        f"a2: {coeffs.a2!r}",
        f"residuals: a1_rms={diag.a1_rms!r} a0_rms={diag.a0_rms!r}",
    ]
    if args.out:
        lines.append(f"wrote {args.out}")
    return 0, results, lines


# --- debias ---

def cmd_debias(args, run: _Run) -> tuple[int, dict, list[str]]:
    trace = parse_trace(run.read_bytes(args.trace))
    kind = _MODEL_FLAGS[args.kind]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.eta:
            spec = DebiasSpec(kind, tuple(args.eta), args.ref_temp)
        else:
            spec = fit_eta(trace, kind, args.ref_temp)
        result = debias(trace, spec)
    run.warnings.extend(str(w.message) for w in caught)

    Path(args.out).write_text(write_debiased(result), encoding="utf-8")
    if args.plot:
        _write_plot(args.plot, zip(trace.temps(), result.ref_power))
    m = result.metrics
    results = {
        "spec": {"kind": kind.value, "eta": list(spec.eta), "ref_temp_c": spec.ref_temp},
        "metrics": {"afl_percent": m.afl, "fl": m.fl, "rat": m.rat},
        "output": args.out,
    }
    lines = [
        f"afl={m.afl!r}% fl={m.fl!r} rat={m.rat!r}",
        f"wrote {args.out}",
    ]
    return 0, results, lines


# --- sensor-correct ---

def _second_divided_differences(pairs):
    pts = sorted(pairs)
    out = []
    for (x0, y0), (x1, y1), (x2, y2) in zip(pts, pts[1:], pts[2:]):
        out.append(((y2 - y1) / (x2 - x1) - (y1 - y0) / (x1 - x0)) / (x2 - x0))
    return out


def cmd_sensor_correct(args, run: _Run) -> tuple[int, dict, list[str]]:
    meta, columns, rows, _ = parse_table(run.read_bytes(args.series))
    if columns[:2] != ["time_s", "temp_c"] or len(columns) > 3 or (
        len(columns) == 3 and columns[2] != "power_w"
    ):
        raise ValueError(
            f"{args.series}: expected columns time_s,temp_c[,power_w], got {columns}"
        )
    if args.model_json:
        model = model_from_json(run.read_bytes(args.model_json))
    else:
        missing = [
            flag
            for flag, val in (
                ("--alpha", args.alpha),
                ("--a", args.a),
                ("--b", args.b),
                ("--t-init", args.t_init),
                ("--t-inf", args.t_inf),
            )
            if val is None
        ]
        if missing:
            raise ValueError(
                "sensor model needs --model-json or all of "
                "--alpha --a --b --t-init --t-inf (missing: " + " ".join(missing) + ")"
            )
        model = SensorModel(args.alpha, args.a, args.b, args.t_init, args.t_inf)

    series = [(r[0], r[1]) for r in rows]
    corrected = correct_series(model, series)

    lines_out = ["time_s,temp_c"]
    for t, temp in corrected:
        lines_out.append(f"{_fmt(t)},{_fmt(temp)}")
    Path(args.out).write_text("\n".join(lines_out) + "\n", encoding="utf-8")

    results = {
        "n_samples": len(corrected),
        "b_first": b_factor(model, corrected[0][0]),
        "b_last": b_factor(model, corrected[-1][0]),
        "output": args.out,
    }
    if len(columns) == 3 and len(rows) >= 3:
        powers = [r[2] for r in rows]
        raw = _second_divided_differences(zip((r[1] for r in rows), powers))
        fixed = _second_divided_differences(
            zip((temp for _, temp in corrected), powers)
        )
        results["convexity"] = {
            "raw_negative_fraction": sum(1 for d in raw if d < 0) / len(raw),
            "corrected_positive_fraction": sum(1 for d in fixed if d > 0) / len(fixed),
        }
    lines = [
        f"B(first)={results['b_first']!r} B(last)={results['b_last']!r}",
        f"wrote {args.out}",
    ]
    return 0, results, lines


# --- gen ---

def cmd_gen(args, run: _Run) -> tuple[int, dict, list[str]]:
    meta = TraceMeta(args.processor, args.freq, args.cores)
    trace = generate_synthetic_trace(
        meta,
        tuple(args.params),
        (args.sweep[0], args.sweep[1], int(args.sweep[2])),
        noise=args.noise,
        quantum=args.quantum,
        seed=args.seed,
    )
    text = write_trace(trace)
    Path(args.out).write_text(text, encoding="utf-8")
    digest = _digest(text.encode("utf-8"))
    results = {"output": args.out, "sha256": digest, "n_samples": len(trace)}
    return 0, results, [digest]


# --- argument parsing ---

def _csv_floats(count):
    def parse(text):
        parts = text.split(",")
        if len(parts) != count:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated values")
        return [float(p) for p in parts]

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermo",
        description="Temperature/power trace analysis: curve fits, the "
        "frequency/core-count power model, temperature-bias cancellation, "
        "and distant-sensor correction.",
    )
    parser.add_argument("--version", action="version", version=f"thermo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", help="print the JSON report")
        p.add_argument("--quiet", action="store_true", help="suppress the human summary")
        p.add_argument(
            "--out-report", metavar="PATH", help="also write the JSON report to PATH"
        )

    p = sub.add_parser("fit", help="fit temperature/power curves to traces")
    p.add_argument("traces", nargs="+", metavar="TRACE")
    p.add_argument("--model", choices=["linear", "quad", "exp", "all"], default="all")
    p.add_argument("--group-by", choices=["none", "proc-cores"], default="none")
    p.add_argument("--plot", metavar="PATH", help="write temp/fitted-power CSV")
    common(p)

    pm = sub.add_parser("model", help="evaluate or calibrate the power model")
    msub = pm.add_subparsers(dest="model_command", required=True)

    p = msub.add_parser("eval", help="evaluate model power at (temp, freq, cores)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--proc", help="built-in coefficient set label (A7 or A15)")
    src.add_argument("--coeffs", metavar="PATH", help="coefficient-set JSON file")
    p.add_argument("--temp", type=float, required=True, help="temperature in Celsius")
    p.add_argument("--freq", type=float, required=True, help="frequency in GHz")
    p.add_argument("--cores", type=int, required=True, help="active cores (1..4)")
    common(p)

    p = msub.add_parser("calibrate", help="fit a coefficient set from observations")
    p.add_argument(
        "observations",
        help="directory of observation JSON files, or one file with a JSON list",
    )
    p.add_argument("--label", default="calibrated")
    p.add_argument("--out", metavar="PATH", help="write the coefficient-set JSON")
    common(p)

    p = sub.add_parser("debias", help="transform a trace to a reference temperature")
    p.add_argument("trace", metavar="TRACE")
    p.add_argument("--ref-temp", type=float, required=True, help="reference temp (C)")
    p.add_argument("--kind", choices=["linear", "quad", "exp"], default="quad")
    p.add_argument(
        "--eta",
        type=_csv_floats_any,
        help="use these coefficients instead of fitting (comma separated)",
    )
    p.add_argument("--out", metavar="PATH", required=True, help="transformed CSV path")
    p.add_argument("--plot", metavar="PATH", help="write temp/transformed-power CSV")
    common(p)

    p = sub.add_parser("sensor-correct", help="correct a distant-sensor series")
    p.add_argument("series", metavar="CSV", help="time_s,temp_c[,power_w] input")
    p.add_argument("--model-json", metavar="PATH", help="sensor model JSON sidecar")
    p.add_argument("--alpha", type=float, help="thermal diffusivity")
    p.add_argument("--a", type=float, help="sensor distance parameter")
    p.add_argument("--b", type=float, help="hotspot time constant (s)")
    p.add_argument("--t-init", type=float, help="applied source temperature")
    p.add_argument("--t-inf", type=float, help="far-field initial temperature")
    p.add_argument("--out", metavar="PATH", required=True, help="corrected CSV path")
    common(p)

    p = sub.add_parser("gen", help="generate a synthetic exponential trace")
    p.add_argument("--params", type=_csv_floats(3), required=True, metavar="A0,A1,A2")
    p.add_argument("--sweep", type=_csv_floats(3), required=True, metavar="LO,HI,COUNT")
    p.add_argument("--noise", type=float, default=0.0, help="gaussian noise std (W)")
    p.add_argument("--quantum", type=float, default=0.0, help="power rounding step (W)")
    p.add_argument("--seed", type=int, required=True, help="RNG seed (required)")
    p.add_argument("--processor", default="SYN")
    p.add_argument("--freq", type=float, default=1.0, help="metadata freq (GHz)")
    p.add_argument("--cores", type=int, default=4, help="metadata core count")
    p.add_argument("--out", metavar="PATH", required=True, help="trace CSV path")
    common(p)

    return parser


def _csv_floats_any(text):
    return [float(p) for p in text.split(",")]


_INPUT_ERRORS = (OSError, ValueError, KeyError, json.JSONDecodeError)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    run = _Run(argv)

    if args.command == "fit":
        handler = cmd_fit
    elif args.command == "model":
        handler = cmd_model_eval if args.model_command == "eval" else cmd_model_calibrate
    elif args.command == "debias":
        handler = cmd_debias
    elif args.command == "sensor-correct":
        handler = cmd_sensor_correct
    else:
        handler = cmd_gen

    try:
        code, results, lines = handler(args, run)
    except _INPUT_ERRORS as exc:
        # str(KeyError) wraps its message in quotes; unwrap for readability
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except (NonPositiveTime, NonMonotonicTime) as exc:
        # bad input series, not a computation failure
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ThermoError as exc:
        if _is_input_stage_error(exc, args):
            print(f"error: {_name_input(args)}: {exc}", file=sys.stderr)
            return 2
        report = run.report({"error": f"{type(exc).__name__}: {exc}"})
        _emit(args, report, [f"failed: {exc}"])
        return 1

    _emit(args, run.report(results), lines)
    return code


def _name_input(args) -> str:
    for attr in ("traces", "trace", "series", "observations"):
        value = getattr(args, attr, None)
        if value:
            return value[0] if isinstance(value, list) else value
    return args.command


_PARSE_STAGE = (
    "MalformedRow",
    "EmptyTrace",
    "MissingMeta",
    "InvalidSample",
    "InvalidParams",
    "InvalidFreq",
    "InvalidCores",
)


def _is_input_stage_error(exc: ThermoError, args) -> bool:
    return type(exc).__name__ in _PARSE_STAGE


if __name__ == "__main__":
    sys.exit(main())
