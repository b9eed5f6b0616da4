"""Command-line interface: ``zefchan <subcommand> ...``.

Every subcommand prints JSON with sorted keys (or writes it with ``-o``).
Exit codes: 0 success, 1 a check failed (``verify`` violations, ``report``
rows that do not pass), 2 bad input or a library error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .capacity import blahut_arimoto
from .codebook import evaluate_code, search_code
from .dmc import analyze
from .errors import IncompatibleArtifacts, MaxIterExceeded, ZefchanError
from .files import (
    channel_hash,
    code_hash,
    dumps,
    load_channel,
    load_code,
    load_session,
    provenance,
    read_json,
    triple_json,
    write_json,
)
from .protocol import GammaSchedule, NoiselessSessionConfig, NoisySessionConfig
from .sim import comparison_rows, explore_exhaustive, monte_carlo, predict_session


def _emit(obj, out: str | None) -> None:
    if out:
        write_json(obj, out)
    else:
        sys.stdout.write(dumps(obj))


def _gamma_arg(value: str):
    return "auto" if value == "auto" else int(value)


def _channel_report(ch) -> dict:
    cap = _capacity(ch)
    rep = analyze(ch, cap.q_star)
    dec = rep.decomposable_on_support
    cyc = rep.witness_cycle
    return {
        "c0u_positive": rep.c0u_positive,
        "capacity": cap.to_json(),
        "channel": channel_hash(ch),
        "decomposable": dec is not None,
        "decomposition": None
        if dec is None
        else {"a": list(dec.a), "b": list(dec.b), "support": sorted(list(e) for e in dec.support)},
        "disprovers": [triple_json(t) for t in rep.disprovers],
        "has_nonconfusable_pair": rep.has_nonconfusable_pair,
        "name": ch.name,
        "witness_cycle": None
        if cyc is None
        else {"deviation": cyc.deviation, "edges": [list(e) for e in cyc.edges]},
    }


def _capacity(ch, tol: float = 1e-9, max_iter: int = 100_000):
    try:
        return blahut_arimoto(ch, tol=tol, max_iter=max_iter)
    except MaxIterExceeded as exc:
        print(f"warning: {exc}", file=sys.stderr)
        return exc.result


def cmd_analyze(args) -> int:
    _emit(_channel_report(load_channel(args.channel)), args.output)
    return 0


def cmd_capacity(args) -> int:
    ch = load_channel(args.channel)
    res = _capacity(ch, args.tol, args.max_iter)
    _emit(res.to_json() | {"converged": res.converged}, args.output)
    return 0


def cmd_code_build(args) -> int:
    ch = load_channel(args.channel)
    code, quality = search_code(
        ch, args.n, args.messages, strategy=args.strategy, budget=args.budget, seed=args.seed
    )
    write_json(code.to_json(), args.output)
    sys.stdout.write(dumps({"code": code_hash(code), "quality": quality.to_json()}))
    return 0


def cmd_code_eval(args) -> int:
    ch = load_channel(args.channel)
    code = load_code(args.code)
    if args.mc:
        quality = evaluate_code(code, ch, method="mc", samples=args.mc, seed=args.seed)
    else:
        quality = evaluate_code(code, ch, method="exact")
    _emit({"code": code_hash(code), "quality": quality.to_json()}, args.output)
    return 0


def _session_from_args(args):
    if args.config:
        return load_session(args.config)
    if not (args.channel and args.code):
        raise ZefchanError("predict needs --config or both --channel and --code")
    gamma = GammaSchedule(_gamma_arg(args.gamma))
    code = load_code(args.code)
    if args.backward:
        return NoisySessionConfig(
            load_channel(args.channel), load_channel(args.backward), code,
            gamma=gamma, disprover_policy=args.disprover_policy,
        )
    return NoiselessSessionConfig(
        load_channel(args.channel), code, gamma=gamma, disprover_policy=args.disprover_policy
    )


def cmd_predict(args) -> int:
    cfg = _session_from_args(args)
    pred = predict_session(cfg)
    _emit(
        {
            "prediction": pred.to_json(),
            "provenance": provenance(cfg),
            "quality": cfg.quality.to_json(),
        },
        args.output,
    )
    return 0


def cmd_simulate(args) -> int:
    cfg = load_session(args.config)
    stats = monte_carlo(cfg, args.messages, args.seed, record=bool(args.transcript))
    _emit({"provenance": provenance(cfg), "stats": stats.to_json()}, args.output)
    if args.transcript:
        with open(args.transcript, "w", encoding="utf-8") as fh:
            for rec in stats.transcript:
                fh.write(json.dumps(rec.to_json(), sort_keys=True, separators=(",", ":")) + "\n")
    if args.csv:
        Path(args.csv).write_text("\n".join(stats.csv_rows()) + "\n", encoding="utf-8")
    return 0 if stats.undetected_errors == 0 else 1


def cmd_verify(args) -> int:
    cfg = load_session(args.config)
    if not isinstance(cfg, NoisySessionConfig):
        raise ZefchanError("verify explores the noisy-feedback scheme; set mode to 'noisy'")
    rep = explore_exhaustive(cfg, args.max_rounds)
    _emit({"provenance": provenance(cfg), "report": rep.to_json()}, args.output)
    return 0 if rep.safe and rep.liveness_ok else 1


def build_report(stats_doc: dict, pred_doc: dict, tolerance: float = 0.02) -> dict:
    """Bundle prediction and simulation with a computed comparison table."""
    for doc, what in ((stats_doc, "stats"), (pred_doc, "prediction")):
        if what not in doc or "provenance" not in doc:
            raise IncompatibleArtifacts(f"{what} file lacks {what!r} or provenance")
    if not stats_doc["stats"].get("messages_sent"):
        raise IncompatibleArtifacts("stats file holds no messages")
    ps, pp = stats_doc["provenance"], pred_doc["provenance"]
    if ps != pp:
        diff = sorted(k for k in set(ps) | set(pp) if ps.get(k) != pp.get(k))
        raise IncompatibleArtifacts(f"stats and prediction differ in {', '.join(diff)}")
    rows = comparison_rows(stats_doc["stats"], pred_doc["prediction"], tolerance)
    return {
        "comparison": rows,
        "prediction": pred_doc["prediction"],
        "provenance": ps,
        "quality": pred_doc.get("quality"),
        "stats": stats_doc["stats"],
        "tolerance": tolerance,
    }


def cmd_report(args) -> int:
    bundle = build_report(read_json(args.stats), read_json(args.prediction), args.tolerance)
    if args.channel:
        bundle["channels"] = [_channel_report(load_channel(p)) for p in args.channel]
    _emit(bundle, args.output)
    if args.csv:
        lines = ["quantity,predicted,empirical,delta,pass"]
        for r in bundle["comparison"]:
            lines.append(
                f"{r['quantity']},{r['predicted']!r},{r['empirical']!r},{r['delta']!r},{str(r['pass']).lower()}"
            )
        Path(args.csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0 if all(r["pass"] for r in bundle["comparison"]) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="zefchan", description="Zero-error feedback protocols over discrete memoryless channels."
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("analyze", help="disprovers, confusability and decomposability of a channel")
    s.add_argument("channel")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("capacity", help="Shannon capacity by Blahut-Arimoto")
    s.add_argument("channel")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--max-iter", type=int, default=100_000)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_capacity)

    code = sub.add_parser("code", help="build or evaluate zero-undetected-error codes")
    csub = code.add_subparsers(dest="code_command", required=True)
    s = csub.add_parser("build")
    s.add_argument("--channel", required=True)
    s.add_argument("-n", type=int, required=True)
    s.add_argument("-M", "--messages", type=int, required=True)
    s.add_argument("--strategy", choices=("exhaustive", "greedy", "random"), default="greedy")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--budget", type=int, default=10**6)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_code_build)
    s = csub.add_parser("eval")
    s.add_argument("--channel", required=True)
    s.add_argument("--code", required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true")
    g.add_argument("--mc", type=int, metavar="SAMPLES")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_code_eval)

    s = sub.add_parser("predict", help="closed-form rounds, rate and delay")
    s.add_argument("--config")
    s.add_argument("--channel", help="forward channel")
    s.add_argument("--backward", help="backward channel (selects the noisy scheme)")
    s.add_argument("--code")
    s.add_argument("--gamma", default="auto")
    s.add_argument("--disprover-policy", choices=("first", "max_prob"), default="first")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("simulate", help="Monte Carlo run of a session config")
    s.add_argument("--config", required=True)
    s.add_argument("--messages", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("-o", "--output")
    s.add_argument("--transcript", help="JSON-lines round transcript")
    s.add_argument("--csv", help="per-message CSV")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("verify", help="bounded exhaustive check of the noisy scheme")
    s.add_argument("--config", required=True)
    s.add_argument("--max-rounds", type=int, required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("report", help="compare simulation against prediction")
    s.add_argument("--stats", required=True)
    s.add_argument("--prediction", required=True)
    s.add_argument("--channel", action="append", help="add a channel report (repeatable)")
    s.add_argument("--tolerance", type=float, default=0.02)
    s.add_argument("-o", "--output")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ZefchanError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
