"""Command-line surface: ``hbrd {eval|optimize|closed-form|verify|simulate}``.

Exit codes: 0 success, 2 input error, 3 budget exceeded, 4 closed-form
hypothesis violation.  All subcommands are deterministic given their input
files and the seeds they carry.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import binning, config as cfgmod, optimize, regressions
from .fixtures import fixture_path
from .model import (
    COMMON_RECONSTRUCTION,
    LOSSLESS,
    ONE_DISTORTION,
    hamming,
)
from .rates import (
    CaseTag,
    HypothesisError,
    RateBreakdown,
    closed_form,
    eval_common_reconstruction,
    eval_lossless_terms,
    eval_one_distortion,
    induced_u0_channel,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BUDGET = 3
EXIT_HYPOTHESIS = 4


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _breakdown_json(rb: RateBreakdown) -> dict:
    return {
        "rate": rb.rate,
        "term_decoder1": rb.term_decoder1,
        "term_decoder2": rb.term_decoder2,
        "individual_layer": rb.individual_layer,
        "distortion1": rb.distortion1,
        "distortion2": rb.distortion2,
        "feasible": rb.feasible,
    }


def _breakdown_text(rb: RateBreakdown) -> str:
    lines = [
        f"rate:             {rb.rate:.12g}",
        f"term_decoder1:    {rb.term_decoder1:.12g}",
        f"term_decoder2:    {rb.term_decoder2:.12g}",
        f"individual_layer: {rb.individual_layer:.12g}",
        f"distortion1:      {rb.distortion1:.12g}",
    ]
    if rb.distortion2 is not None:
        lines.append(f"distortion2:      {rb.distortion2:.12g}")
    lines.append(f"feasible:         {str(rb.feasible).lower()}")
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    cfg = cfgmod.load_config(args.config)
    channel = cfgmod.load_channel(args.channel)
    if channel.cond.given_shape != cfg.source.sizes[:2]:
        raise cfgmod.ConfigError(
            f"channel conditions on alphabet sizes {channel.cond.given_shape}, "
            f"config source has {cfg.source.sizes[:2]}"
        )
    if channel.kind == LOSSLESS:
        t1, t2 = eval_lossless_terms(cfg.source, channel)
        rb = RateBreakdown(max(t1, t2), t1, t2, 0.0, 0.0, None, True)
    elif channel.kind == ONE_DISTORTION:
        rb = eval_one_distortion(cfg.source, channel, cfg.distortion.d1, cfg.D1)
    else:
        if cfg.D2 is None:
            raise cfgmod.ConfigError(
                "shared-reconstruction channel needs D2 in the config"
            )
        rb = eval_common_reconstruction(
            cfg.source, channel, cfg.distortion, cfg.D1, cfg.D2
        )
    if args.json:
        _emit(json.dumps(_breakdown_json(rb), sort_keys=True), args.out)
    else:
        _emit(_breakdown_text(rb), args.out)
    return EXIT_OK


def _is_plain_hamming(d1: np.ndarray) -> bool:
    return d1.shape[0] == d1.shape[1] and np.array_equal(d1, hamming(d1.shape[0]))


def _optimize_kind(cfg: cfgmod.ProblemConfig) -> str:
    """At a zero Hamming target the exact-recovery objective over the common
    layer alone is equivalent and far cheaper to search."""
    if (
        cfg.kind == ONE_DISTORTION
        and cfg.D1 <= 0
        and _is_plain_hamming(cfg.distortion.d1)
    ):
        return LOSSLESS
    return cfg.kind


def _parse_sweep(spec: str) -> tuple[list[float], list[float] | None]:
    d1_list: list[float] | None = None
    d2_list: list[float] | None = None
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        key, _, values = part.partition("=")
        try:
            parsed = [float(v) for v in values.split(",") if v != ""]
        except ValueError:
            raise cfgmod.ConfigError(f"--sweep: bad value list {values!r}") from None
        if key.strip() == "d1":
            d1_list = parsed
        elif key.strip() == "d2":
            d2_list = parsed
        else:
            raise cfgmod.ConfigError(f"--sweep: unknown key {key!r}")
    if not d1_list:
        raise cfgmod.ConfigError("--sweep: needs at least d1=...")
    return d1_list, d2_list


def _optimize_rows(cfg, strategy, d1_list, d2_list):
    kind = _optimize_kind(cfg)
    d1, d2 = cfg.distortion.d1, cfg.distortion.d2
    if d1_list is None:
        points = [(cfg.D1, cfg.D2)]
        if strategy == "oracle":
            results = [
                optimize.grid_oracle(
                    cfg.source, cfg.search, kind,
                    d1=None if kind == LOSSLESS else d1,
                    D1=None if kind == LOSSLESS else cfg.D1,
                    d2=d2 if kind == COMMON_RECONSTRUCTION else None,
                    D2=cfg.D2 if kind == COMMON_RECONSTRUCTION else None,
                )
            ]
        else:
            results = [
                optimize.heuristic_search(
                    cfg.source, cfg.search, kind,
                    d1=None if kind == LOSSLESS else d1,
                    D1=None if kind == LOSSLESS else cfg.D1,
                    d2=d2 if kind == COMMON_RECONSTRUCTION else None,
                    D2=cfg.D2 if kind == COMMON_RECONSTRUCTION else None,
                )
            ]
        return [
            (D1, D2, res) for (D1, D2), res in zip(points, results)
        ]
    swept = optimize.sweep_distortion(
        cfg.source, cfg.search, d1_list, cfg.kind,
        d1=d1, d2=d2, D2_list=d2_list, strategy=strategy,
    )
    return [
        (D1, d2_list[i] if d2_list else None, res)
        for i, (D1, res) in enumerate(swept)
    ]


def cmd_optimize(args) -> int:
    cfg = cfgmod.load_config(args.config)
    strategy = "oracle" if args.oracle else "heuristic"
    d1_list = d2_list = None
    if args.sweep:
        d1_list, d2_list = _parse_sweep(args.sweep)
    rows = _optimize_rows(cfg, strategy, d1_list, d2_list)

    if args.channel_out:
        if len(rows) != 1:
            raise cfgmod.ConfigError("--channel-out requires a single-point run")
        Path(args.channel_out).write_text(
            json.dumps(cfgmod.channel_to_json(rows[0][2].channel), sort_keys=True)
        )

    if args.json:
        payload = [
            {
                "D1": D1,
                "D2": D2,
                "rate": res.best.rate,
                "strategy": res.strategy,
                "evaluations": res.evaluations,
                "feasible": res.best.feasible,
                "distortion1": res.best.distortion1,
                "distortion2": res.best.distortion2,
                "channel": cfgmod.channel_to_json(res.channel),
            }
            for D1, D2, res in rows
        ]
        _emit(json.dumps(payload, sort_keys=True), args.out)
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["D1", "D2", "rate", "strategy", "evaluations", "feasible",
             "distortion1", "distortion2", "channel"]
        )
        for D1, D2, res in rows:
            writer.writerow(
                [
                    f"{D1:.12g}",
                    "" if D2 is None else f"{D2:.12g}",
                    f"{res.best.rate:.12g}",
                    res.strategy,
                    res.evaluations,
                    str(res.best.feasible).lower(),
                    f"{res.best.distortion1:.12g}",
                    "" if res.best.distortion2 is None
                    else f"{res.best.distortion2:.12g}",
                    json.dumps(cfgmod.channel_to_json(res.channel), sort_keys=True),
                ]
            )
        _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_closed_form(args) -> int:
    cfg = cfgmod.load_config(args.config)
    try:
        case = CaseTag(args.case)
    except ValueError:
        valid = ", ".join(tag.value for tag in CaseTag)
        raise cfgmod.ConfigError(
            f"--case: unknown tag {args.case!r}; valid tags: {valid}"
        ) from None
    result = closed_form(
        cfg.source, case, d1=cfg.distortion.d1, D1=cfg.D1, search=cfg.search
    )
    payload = {"case": case.value, "rate": result.value}
    if result.u0_choice is not None:
        channel = induced_u0_channel(cfg.source, result.u0_choice)
        payload["u0_choice"] = result.u0_choice
        payload["u0_channel"] = cfgmod.channel_to_json(channel)
    if args.json:
        _emit(json.dumps(payload, sort_keys=True), args.out)
    else:
        lines = [f"case: {case.value}", f"rate: {result.value:.12g}"]
        if result.u0_choice is not None:
            lines.append(f"u0_choice: {result.u0_choice}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    fixtures_dir = Path(args.fixtures) if args.fixtures else fixture_path(
        "example1"
    ).parent
    checks = regressions.run_checks(fixtures_dir)
    all_pass = all(c.passed for c in checks)
    if args.json:
        payload = [
            {
                "name": c.name,
                "expected": c.expected,
                "actual": c.actual,
                "tolerance": c.tolerance,
                "passed": c.passed,
            }
            for c in checks
        ]
        _emit(json.dumps(payload, sort_keys=True), args.out)
    else:
        width = max(len(c.name) for c in checks)
        lines = []
        for c in checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(
                f"{status}  {c.name:<{width}}  expected={c.expected:.12g} "
                f"actual={c.actual:.12g} tol={c.tolerance:g}"
            )
        lines.append(
            f"{sum(c.passed for c in checks)}/{len(checks)} checks passed"
        )
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if all_pass else 1


def cmd_simulate(args) -> int:
    cfg = cfgmod.load_config(args.config)
    if cfg.simulator is None:
        raise cfgmod.ConfigError(f"{args.config}: missing 'simulator' section")
    sim = cfg.simulator
    if args.trials is not None:
        sim = cfgmod.SimulatorSettings(
            n=sim.n, rates=sim.rates, epsilon=sim.epsilon,
            typicality=sim.typicality, trials=args.trials, seed=sim.seed,
            regen_every=sim.regen_every,
        )
    n_list = [sim.n]
    if args.n:
        try:
            n_list = [int(v) for v in args.n.split(",") if v]
        except ValueError:
            raise cfgmod.ConfigError(f"--n: bad list {args.n!r}") from None

    channel = (
        cfgmod.load_channel(args.channel)
        if args.channel
        else cfgmod.load_channel(fixture_path("channel_u0_x3_u1_x1"))
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["n", "R_total", "R2", "R0p", "R1p", "epsilon", "trials", "Pe", "avg_d1"]
    )
    for n in n_list:
        scheme = binning.BinningScheme(
            cfg.source, channel, n, sim.rates, sim.epsilon,
            flavor=sim.typicality, d1=cfg.distortion.d1,
        )
        stats = scheme.run_trials(sim.trials, sim.seed, regen_every=sim.regen_every)
        writer.writerow(
            [
                n,
                f"{stats.total_rate:.12g}",
                f"{sim.rates.r2:.12g}",
                f"{sim.rates.r0p:.12g}",
                f"{sim.rates.r1p:.12g}",
                f"{sim.epsilon:.12g}",
                stats.trials,
                f"{stats.empirical_Pe:.12g}",
                f"{stats.avg_d1:.12g}",
            ]
        )
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hbrd",
        description=(
            "Evaluate, minimize and simulate description rates for the "
            "two-decoder source coding problem with degraded reconstruction "
            "sets"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="rate of a fixed auxiliary channel")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--channel", required=True)
    p_eval.add_argument("--json", action="store_true")
    p_eval.add_argument("--out")
    p_eval.set_defaults(fn=cmd_eval)

    p_opt = sub.add_parser("optimize", help="minimize the rate over channels")
    p_opt.add_argument("--config", required=True)
    group = p_opt.add_mutually_exclusive_group()
    group.add_argument("--oracle", action="store_true")
    group.add_argument("--heuristic", action="store_true")
    p_opt.add_argument("--sweep", help="d1=a,b,c[;d2=a,b,c]")
    p_opt.add_argument("--channel-out", dest="channel_out")
    p_opt.add_argument("--json", action="store_true")
    p_opt.add_argument("--out")
    p_opt.set_defaults(fn=cmd_optimize)

    p_cf = sub.add_parser("closed-form", help="closed-form special cases")
    p_cf.add_argument("--config", required=True)
    p_cf.add_argument("--case", required=True)
    p_cf.add_argument("--json", action="store_true")
    p_cf.add_argument("--out")
    p_cf.set_defaults(fn=cmd_closed_form)

    p_ver = sub.add_parser("verify", help="run the built-in regression checks")
    p_ver.add_argument("--fixtures", help="override the bundled fixture dir")
    p_ver.add_argument("--json", action="store_true")
    p_ver.add_argument("--out")
    p_ver.set_defaults(fn=cmd_verify)

    p_sim = sub.add_parser("simulate", help="Monte-Carlo binning simulation")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--channel")
    p_sim.add_argument("--n", help="comma-separated blocklengths")
    p_sim.add_argument("--trials", type=int)
    p_sim.add_argument("--out")
    p_sim.set_defaults(fn=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except HypothesisError as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (optimize.BudgetError, binning.BudgetError) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (cfgmod.ConfigError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
