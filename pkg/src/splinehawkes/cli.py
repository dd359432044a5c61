"""Command-line interface: filter -> fit -> compare -> gof -> simulate.

Every option can also be supplied through ``--config FILE`` holding
``key = value`` lines (keys are the option names with underscores); flags
given on the command line override the file.  All randomness flows from
explicit seeds and outputs carry no clocks, so identical invocations
produce byte-identical files.

Exit codes: 0 success, 1 usage or parse failure, 2 fit finished but was
flagged as not converged, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import (
    ConfigurationError,
    DomainError,
    EventSequence,
    ExponentialKernel,
    NumericalError,
    ObservationWindow,
    branching_ratio,
)
from .estimate import (
    fit_bcb,
    fit_mle,
    read_fit_json,
    regular_knots,
    write_fit_json,
)
from .gof import (
    ks_test_uniform,
    rescaled_intervals,
    second_level_ks,
    write_session_results,
    write_verdict,
)
from .simulate import write_batch
from .tickdata import (
    SessionConfig,
    filter_movements,
    jitter_timestamps,
    read_ticks_csv,
    select_active_contract,
)

PL_2H_SPACING = 7200.0
PL_30MIN_SPACING = 1800.0


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits with code 1 on usage errors."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Config-file handling
# ---------------------------------------------------------------------------


def _read_config(path) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(1, f"cannot read config file {path}: {exc}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise CliError(1, f"{path}:{lineno}: expected 'key = value'")
        key, value = stripped.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args: argparse.Namespace, schema: dict) -> argparse.Namespace:
    """Fill unset options from the config file, then from hard defaults."""
    config = _read_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(config) - set(schema)
    if unknown:
        raise CliError(1, f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, (convert, default) in schema.items():
        if getattr(args, key, None) is not None:
            continue
        if key in config:
            try:
                setattr(args, key, convert(config[key]))
            except ValueError as exc:
                raise CliError(1, f"config key {key}: {exc}")
        else:
            setattr(args, key, default)
    return args


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _str_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _load_events(path) -> EventSequence:
    try:
        return EventSequence.from_csv(path)
    except FileNotFoundError:
        raise CliError(1, f"events file not found: {path}")
    except DomainError as exc:
        raise CliError(1, str(exc))


# ---------------------------------------------------------------------------
# filter
# ---------------------------------------------------------------------------

_FILTER_SCHEMA = {
    "tick_size": (int, 5),
    "session_start": (float, 0.0),
    "session_end": (float, 22200.0),
    "jitter_seed": (int, 0),
    "sign_reference": (str, "filtered"),
    "contract": (str, ""),
}


def cmd_filter(args) -> int:
    args = _resolve(args, _FILTER_SCHEMA)
    window = ObservationWindow(args.session_start, args.session_end)
    cfg = SessionConfig(window=window, tick_size=args.tick_size, jitter_seed=args.jitter_seed)
    try:
        records = read_ticks_csv(args.input)
    except FileNotFoundError:
        raise CliError(1, f"input file not found: {args.input}")
    except DomainError as exc:
        raise CliError(1, str(exc))

    records = [r for r in records if window.start <= r.timestamp <= window.end]
    if not records:
        EventSequence(np.zeros(0), window).to_csv(args.output)
        print("no transactions in the session window; wrote empty event file")
        return 0

    contract = args.contract or select_active_contract(records, window)
    contract_records = [r for r in records if r.contract_id == contract]
    if not contract_records:
        raise CliError(3, f"no transactions for contract {contract!r}")
    if args.sign_reference not in ("filtered", "raw"):
        raise CliError(3, f"unknown sign reference {args.sign_reference!r}")
    times = filter_movements(contract_records, cfg, sign_reference=args.sign_reference)
    jittered = jitter_timestamps(times, cfg.jitter_seed)
    jittered = np.clip(jittered, window.start, window.end)
    # jitter can create boundary ties; nudge them apart deterministically
    for i in range(1, jittered.size):
        if jittered[i] <= jittered[i - 1]:
            jittered[i] = np.nextafter(jittered[i - 1], np.inf)
    seq = EventSequence(jittered, window)
    seq.to_csv(args.output)
    total = len(contract_records)
    fraction = seq.n / total if total else 0.0
    print(f"contract {contract}: retained {seq.n}/{total} transactions ({100 * fraction:.2f}%)")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

_FIT_SCHEMA = {
    "order": (int, 1),
    "k": (int, 50),
    "seed": (int, 0),
    "v_init": (float, 1.0),
    "hold_v": (lambda s: s.lower() in ("1", "true", "yes"), False),
    "curve_output": (str, ""),
}

_MODEL_CHOICES = ("const", "pl2h", "pl30", "bcb")


def _run_fit(seq: EventSequence, model: str, order: int, k: int, v_init: float, hold_v: bool):
    if model == "const":
        return fit_mle(seq, "const", M=order)
    if model == "pl2h":
        return fit_mle(seq, "pl", M=order, knots=regular_knots(seq.window, PL_2H_SPACING))
    if model == "pl30":
        return fit_mle(seq, "pl", M=order, knots=regular_knots(seq.window, PL_30MIN_SPACING))
    if model == "bcb":
        return fit_bcb(seq, M=order, k=k, V_init=v_init, hold_v=hold_v)
    raise CliError(3, f"unknown model {model!r}; choose from {', '.join(_MODEL_CHOICES)}")


def cmd_fit(args) -> int:
    args = _resolve(args, _FIT_SCHEMA)
    seq = _load_events(args.events)
    minimum = 4 if args.model == "bcb" else 1
    if seq.n < minimum:
        raise CliError(3, f"model {args.model} needs at least {minimum} events, got {seq.n}")
    try:
        fit = _run_fit(seq, args.model, args.order, args.k, args.v_init, args.hold_v)
    except (DomainError, ConfigurationError) as exc:
        raise CliError(3, str(exc))
    fit.diagnostics["seed"] = args.seed
    write_fit_json(fit, args.output)
    if args.curve_output:
        lines = ["t,mu"] + [f"{t!r},{v!r}" for t, v in fit.background_curve]
        Path(args.curve_output).write_text("\n".join(lines) + "\n")
    print(
        f"{args.model} (M={args.order}): score {fit.score:.3f}, "
        f"branching ratio {fit.branching_ratio:.3f}, converged {fit.converged}"
    )
    return 0 if fit.converged else 2


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

_COMPARE_SCHEMA = {
    "orders": (_int_list, [1]),
    "k": (int, 50),
    "v_init": (float, 1.0),
}


def cmd_compare(args) -> int:
    args = _resolve(args, _COMPARE_SCHEMA)
    seq = _load_events(args.events)
    models = args.models
    for model in models:
        if model not in _MODEL_CHOICES:
            raise CliError(3, f"unknown model {model!r}; choose from {', '.join(_MODEL_CHOICES)}")
    rows = []
    any_flagged = False
    for model in models:
        for order in args.orders:
            try:
                fit = _run_fit(seq, model, order, args.k, args.v_init, False)
                rows.append(
                    (model, order, fit.score, fit.log_likelihood, fit.branching_ratio,
                     fit.converged, "")
                )
                any_flagged |= not fit.converged
            except (DomainError, ConfigurationError, NumericalError) as exc:
                rows.append((model, order, None, None, None, False, str(exc)))
                any_flagged = True
    scores = [row[2] for row in rows if row[2] is not None]
    best = max(scores) if scores else 0.0
    lines = ["model,order,score,score_relative,log_likelihood,branching_ratio,converged,error"]
    for model, order, sc, logl, br, conv, err in rows:
        if sc is None:
            lines.append(f"{model},{order},,,,,False,{err}")
        else:
            lines.append(f"{model},{order},{sc!r},{sc - best!r},{logl!r},{br!r},{conv},")
    Path(args.output).write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return 2 if any_flagged else 0


# ---------------------------------------------------------------------------
# gof
# ---------------------------------------------------------------------------


def _session_gof(seq: EventSequence, fit) -> dict:
    taus = rescaled_intervals(seq, fit.kernel, fit.background) if seq.n >= 2 else np.zeros(0)
    result = {"n_intervals": int(taus.size), "statistic": None, "p_value": None}
    if taus.size >= 5:
        stat, p = ks_test_uniform(taus)
        result["statistic"] = stat
        result["p_value"] = p
    else:
        result["warning"] = "too few inter-event intervals for a KS test"
    return result


def cmd_gof(args) -> int:
    seq = _load_events(args.events)
    try:
        fit = read_fit_json(args.fit, events=seq)
    except FileNotFoundError:
        raise CliError(1, f"fit file not found: {args.fit}")
    except (json.JSONDecodeError, KeyError) as exc:
        raise CliError(1, f"malformed fit JSON {args.fit}: {exc}")
    except DomainError as exc:
        raise CliError(3, str(exc))
    result = _session_gof(seq, fit)
    Path(args.output).write_text(json.dumps(result, indent=2) + "\n")
    print(json.dumps(result, indent=2))
    return 0


def cmd_gof_batch(args) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise CliError(3, f"not a directory: {directory}")
    fit_files = sorted(directory.glob("*.json"))
    fit_files = [f for f in fit_files if f.with_suffix(".csv").exists()]
    if not fit_files:
        raise CliError(3, f"no paired <name>.json + <name>.csv sessions in {directory}")
    rows = []
    p_values = []
    for fit_file in fit_files:
        seq = _load_events(fit_file.with_suffix(".csv"))
        try:
            fit = read_fit_json(fit_file, events=seq)
        except (json.JSONDecodeError, KeyError) as exc:
            raise CliError(1, f"malformed fit JSON {fit_file}: {exc}")
        except DomainError as exc:
            raise CliError(3, f"{fit_file}: {exc}")
        result = _session_gof(seq, fit)
        if result["p_value"] is not None:
            rows.append((fit_file.stem, result["statistic"], result["p_value"]))
            p_values.append(result["p_value"])
    if len(p_values) < 10:
        raise CliError(3, f"need at least 10 testable sessions, got {len(p_values)}")
    verdict = second_level_ks(p_values)
    if args.sessions_output:
        write_session_results(rows, args.sessions_output)
    write_verdict(verdict, len(p_values), args.output)
    print(
        f"second-level KS over {len(p_values)} sessions: statistic {verdict.statistic:.4f}, "
        f"p={verdict.p_value:.4f}, {'PASS' if verdict.passed else 'FAIL'} at 95%"
    )
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

_SIM_SCHEMA = {
    "replicates": (int, 100),
    "seed": (int, 1),
    "workers": (int, 1),
    "alphas": (_float_list, [0.5]),
    "betas": (_float_list, [1.0]),
    "window_start": (float, 0.0),
    "window_end": (float, 22200.0),
    "mu": (float, 0.1),
    "floor_rate": (float, 0.02),
    "edge_ratio": (float, 5.0),
    "t_news": (float, -1.0),
    "base_rate": (float, 0.05),
    "jump_factor": (float, 10.0),
    "relax_fraction": (float, 0.05),
}


def cmd_simulate(args) -> int:
    args = _resolve(args, _SIM_SCHEMA)
    window = ObservationWindow(args.window_start, args.window_end)
    try:
        kernel = ExponentialKernel(args.alphas, args.betas)
    except DomainError as exc:
        raise CliError(3, str(exc))
    if branching_ratio(kernel) >= 1.0:
        raise CliError(
            3, f"unstable kernel rejected: branching ratio {branching_ratio(kernel):.3f} >= 1"
        )
    if args.scenario == "constant":
        spec = {"scenario": "constant", "mu": args.mu}
    elif args.scenario == "ushape":
        spec = {"scenario": "ushape", "floor_rate": args.floor_rate, "edge_ratio": args.edge_ratio}
    elif args.scenario == "news":
        t_news = args.t_news
        if t_news < 0:
            t_news = window.start + 0.3 * window.length
        spec = {
            "scenario": "news",
            "t_news": t_news,
            "base_rate": args.base_rate,
            "jump_factor": args.jump_factor,
            "relax_time": args.relax_fraction * window.length,
        }
    else:
        raise CliError(3, f"unknown scenario {args.scenario!r}")
    try:
        manifest = write_batch(
            args.outdir, window, spec, kernel, args.replicates, args.seed, workers=args.workers
        )
    except DomainError as exc:
        raise CliError(3, str(exc))
    counts = manifest["event_counts"]
    print(
        f"wrote {args.replicates} replicates to {args.outdir} "
        f"(events per replicate: min {min(counts)}, median {int(np.median(counts))}, "
        f"max {max(counts)})"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="splinehawkes", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="extract movement events from tick data")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--config")
    p.add_argument("--tick-size", dest="tick_size", type=int)
    p.add_argument("--session-start", dest="session_start", type=float)
    p.add_argument("--session-end", dest="session_end", type=float)
    p.add_argument("--jitter-seed", dest="jitter_seed", type=int)
    p.add_argument("--sign-reference", dest="sign_reference", choices=["filtered", "raw"])
    p.add_argument("--contract")
    p.set_defaults(handler=cmd_filter)

    p = sub.add_parser("fit", help="fit one background model to an event file")
    p.add_argument("--events", required=True)
    p.add_argument("--model", required=True, choices=list(_MODEL_CHOICES))
    p.add_argument("--output", required=True)
    p.add_argument("--config")
    p.add_argument("--order", type=int, help="number of exponentials in the kernel")
    p.add_argument("--k", type=int, help="events per spline basis function")
    p.add_argument("--seed", type=int)
    p.add_argument("--v-init", dest="v_init", type=float)
    p.add_argument("--hold-v", dest="hold_v", action="store_const", const=True)
    p.add_argument("--curve-output", dest="curve_output")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("compare", help="score several models on one event file")
    p.add_argument("--events", required=True)
    p.add_argument("--models", required=True, type=_str_list)
    p.add_argument("--output", required=True)
    p.add_argument("--config")
    p.add_argument("--orders", type=_int_list)
    p.add_argument("--k", type=int)
    p.add_argument("--v-init", dest="v_init", type=float)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("gof", help="KS residual test of one fit")
    p.add_argument("--events", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(handler=cmd_gof)

    p = sub.add_parser("gof-batch", help="second-level KS verdict over a session directory")
    p.add_argument("--directory", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--sessions-output", dest="sessions_output")
    p.set_defaults(handler=cmd_gof_batch)

    p = sub.add_parser("simulate", help="write a batch of simulated sequences")
    p.add_argument("--scenario", required=True, choices=["constant", "ushape", "news"])
    p.add_argument("--outdir", required=True)
    p.add_argument("--config")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--alphas", type=_float_list)
    p.add_argument("--betas", type=_float_list)
    p.add_argument("--window-start", dest="window_start", type=float)
    p.add_argument("--window-end", dest="window_end", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--floor-rate", dest="floor_rate", type=float)
    p.add_argument("--edge-ratio", dest="edge_ratio", type=float)
    p.add_argument("--t-news", dest="t_news", type=float)
    p.add_argument("--base-rate", dest="base_rate", type=float)
    p.add_argument("--jump-factor", dest="jump_factor", type=float)
    p.add_argument("--relax-fraction", dest="relax_fraction", type=float)
    p.set_defaults(handler=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"splinehawkes: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
