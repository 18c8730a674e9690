"""Command-line entry points: train, eval, export, smoke."""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import yaml

from .config import BASELINES, RunConfig, apply_overrides, desk_profile, dump_yaml, load_yaml, \
    smoke_profile
from .evaluation import run_eval
from .policy_net import load_checkpoint
from .ppo_trainer import train
from .smoothing import export_curves


class CliError(Exception):
    pass


def _parse_value(text: str):
    return yaml.safe_load(text)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run config; the desk profile when omitted")
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--baseline", choices=BASELINES)
    p.add_argument("--init-weights", choices=("exp", "equal"))
    p.add_argument("--n-sv-max", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. --set reward.alpha1=2")
    p.add_argument("--print-config", action="store_true",
                   help="print the resolved config and exit")


def resolve_config(args, base: RunConfig = None) -> RunConfig:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file not found: {path}")
        try:
            cfg = load_yaml(path)
        except (yaml.YAMLError, KeyError, TypeError) as e:
            raise CliError(f"bad config {path}: {e}")
    else:
        cfg = base if base is not None else desk_profile()
    over = {}
    for item in args.set:
        if "=" not in item:
            raise CliError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        over[k.strip()] = _parse_value(v)
    flags = {"seed": args.seed, "trainer.episodes": args.episodes,
             "trainer.baseline": args.baseline, "bandit.init": args.init_weights,
             "trainer.n_sv_max": args.n_sv_max, "out": args.out}
    over.update({k: v for k, v in flags.items() if v is not None})
    try:
        cfg = apply_overrides(cfg, over)
        return cfg.validate()
    except (KeyError, ValueError, TypeError) as e:
        raise CliError(str(e))


def _summary(log_, elapsed: float) -> str:
    outcomes = log_.column("outcome")
    tail = outcomes[-min(len(outcomes), 100):]
    rate = tail.count("success") / len(tail) if tail else float("nan")
    return (f"episodes={len(outcomes)} time={elapsed:.1f}s "
            f"success(last {len(tail)})={rate:.3f}")


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    if args.print_config:
        print(dump_yaml(cfg), end="")
        return 0
    out = Path(cfg.out)
    t0 = time.time()
    res = train(cfg, out_dir=out, resume=args.resume)
    print(_summary(res.log, time.time() - t0))
    print(f"artifacts in {out}")
    return 0


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise CliError(f"checkpoint not found: {ckpt}")
    sibling = ckpt.parent / "config.yaml"
    base = load_yaml(sibling) if args.config is None and sibling.is_file() else None
    cfg = resolve_config(args, base)
    if args.print_config:
        print(dump_yaml(cfg), end="")
        return 0
    params, meta = load_checkpoint(ckpt)
    if meta.get("n_sv_max", cfg.trainer.n_sv_max) != cfg.trainer.n_sv_max:
        raise CliError(f"checkpoint was trained with n_sv_max={meta['n_sv_max']}")
    n_sv = args.n_sv if args.n_sv else list(range(cfg.trainer.n_sv_max + 1))
    try:
        report = run_eval(params, cfg, n_sv, args.trials, cfg.seed)
    except ValueError as e:
        raise CliError(str(e))
    print(report.format_table())
    out = Path(args.report) if args.report else ckpt.parent / "eval.csv"
    report.write_csv(out)
    print(f"report written to {out}")
    return 0


def cmd_export(args) -> int:
    metrics = Path(args.metrics)
    if not metrics.is_file():
        raise CliError(f"metrics log not found: {metrics}")
    out = Path(args.out) if args.out else metrics.parent
    for p in export_curves(metrics, out, args.window, args.order):
        print(p)
    return 0


def cmd_smoke(args) -> int:
    cfg = resolve_config(args, smoke_profile(out="runs/smoke"))
    if args.print_config:
        print(dump_yaml(cfg), end="")
        return 0
    out = Path(cfg.out)
    t0 = time.time()
    res = train(cfg, out_dir=out)
    print(_summary(res.log, time.time() - t0))
    report = run_eval(res.params, cfg, range(cfg.trainer.n_sv_max + 1), args.trials, cfg.seed)
    print(report.format_table())
    report.write_csv(out / "eval.csv")
    export_curves(out / "metrics.csv", out, window=5, order=2)
    print(f"artifacts in {out} ({time.time() - t0:.1f}s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="intersection-curriculum",
                                 description="Curriculum PPO for unsignalized intersections.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a policy")
    _add_run_flags(p)
    p.add_argument("--resume", action="store_true", help="continue from files in --out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    _add_run_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n-sv", type=int, nargs="+", help="scenario sizes (default: all)")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--report", help="CSV path (default: eval.csv beside the checkpoint)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="reward and arm-probability curves from a metrics log")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out")
    p.add_argument("--window", type=int, default=51)
    p.add_argument("--order", type=int, default=3)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("smoke", help="10-episode train + eval + export")
    _add_run_flags(p)
    p.add_argument("--trials", type=int, default=6)
    p.set_defaults(func=cmd_smoke)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
