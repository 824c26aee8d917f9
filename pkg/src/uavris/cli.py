"""Command-line front end: serve | eval | sweep | oracle."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bridge, oracle
from .scenario import ConfigError, ScenarioConfig, load_config_file


def _load_cfg(path) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    return load_config_file(path)


def _parse_sweep(spec: str):
    if "=" not in spec:
        raise ValueError("sweep must look like KEY=v1,v2,...")
    key, _, rest = spec.partition("=")
    values = [json.loads(v) for v in rest.split(",") if v]
    if not values:
        raise ValueError("sweep needs at least one value")
    return key, values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavris",
        description="Dual-RIS network simulator and environment service")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the environment service")
    p_serve.add_argument("--config", default=None)
    p_serve.add_argument("--transport", default="stdio",
                         help="stdio or tcp:PORT")

    p_eval = sub.add_parser("eval", help="run a baseline policy")
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--episodes", type=int, default=1)
    p_eval.add_argument("--policy", default="matched")
    p_eval.add_argument("--out", default=None)

    p_sweep = sub.add_parser("sweep", help="vary one config key")
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--episodes", type=int, default=1)
    p_sweep.add_argument("--policy", default="matched")
    p_sweep.add_argument("--sweep", required=True, metavar="KEY=v1,v2,...")
    p_sweep.add_argument("--out", default=None)

    p_oracle = sub.add_parser("oracle", help="exhaustive grid optimum")
    p_oracle.add_argument("--config", default=None)
    p_oracle.add_argument("--phase-levels", type=int, default=16)
    p_oracle.add_argument("--beam-grid", type=int, default=1)
    p_oracle.add_argument("--out", default=None)
    return parser


def _write_out(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_cfg(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "serve":
            bridge.serve(args.transport, cfg)
            return 0
        if args.command == "eval":
            traces, summary = bridge.evaluate(
                cfg, args.policy, args.episodes, args.seed)
            _write_out(bridge.emit_metrics(traces, cfg.K), args.out)
            print(summary.line(), file=sys.stderr)
            return 0
        if args.command == "sweep":
            key, values = _parse_sweep(args.sweep)
            csv_text = bridge.sweep(cfg, key, values, args.policy,
                                    args.episodes, args.seed)
            _write_out(csv_text, args.out)
            return 0
        if args.command == "oracle":
            result = oracle.oracle_exhaustive(
                cfg, args.phase_levels, args.beam_grid)
            payload = {
                "min_rate": result.min_rate,
                "combos": result.combos,
                "theta_U": [float(t) for t in result.phases.theta_U],
                "theta_R": [float(t) for t in result.phases.theta_R],
                "W_real": np.real(result.beam.W).tolist(),
                "W_imag": np.imag(result.beam.W).tolist(),
            }
            _write_out(json.dumps(payload, indent=2) + "\n", args.out)
            return 0
    except (ValueError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return 2
    except KeyboardInterrupt:
        return 130
    return 2


if __name__ == "__main__":
    sys.exit(main())
