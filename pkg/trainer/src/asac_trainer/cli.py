"""Command-line front end for training runs."""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

from .train import TrainConfig, TrainingDiverged, train, write_tiny_scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asac-train",
        description="Train the attention soft actor-critic against the "
                    "environment service")
    parser.add_argument("--endpoint", default="subprocess",
                        help="subprocess (spawn the service) or tcp:HOST:PORT")
    parser.add_argument("--config", default=None,
                        help="environment config JSON for the spawned service")
    parser.add_argument("--tiny", action="store_true",
                        help="use the bundled small scenario")
    parser.add_argument("--out-dir", default="runs/asac")
    parser.add_argument("--resume", default=None)
    parser.add_argument("--actor", default="astafer",
                        choices=("astafer", "mlp"))
    parser.add_argument("--episodes", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--gamma", type=float, default=0.99)
    parser.add_argument("--temperature", type=float, default=0.2)
    parser.add_argument("--lr-actor", type=float, default=1e-4)
    parser.add_argument("--lr-critic", type=float, default=1e-4)
    parser.add_argument("--lr-value", type=float, default=1e-4)
    parser.add_argument("--polyak", type=float, default=0.005)
    parser.add_argument("--batch", type=int, default=128)
    parser.add_argument("--buffer-capacity", type=int, default=1_000_000)
    parser.add_argument("--recency", type=float, default=0.996)
    parser.add_argument("--c-min", type=int, default=5_000)
    parser.add_argument("--alpha-per", type=float, default=0.6)
    parser.add_argument("--updates-per-phase", type=int, default=0)
    parser.add_argument("--width", type=int, default=64)
    parser.add_argument("--hidden", type=int, default=256)
    parser.add_argument("--ckpt-every", type=int, default=50)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = TrainConfig(
        gamma=args.gamma, temperature=args.temperature,
        lr_actor=args.lr_actor, lr_critic=args.lr_critic,
        lr_value=args.lr_value, polyak=args.polyak, batch=args.batch,
        buffer_capacity=args.buffer_capacity, recency=args.recency,
        c_min=args.c_min, alpha_per=args.alpha_per, episodes=args.episodes,
        updates_per_phase=args.updates_per_phase, seed=args.seed,
        actor=args.actor, width=args.width, hidden=args.hidden,
        ckpt_every=args.ckpt_every)

    config_path = args.config
    tmp = None
    if args.tiny:
        tmp = tempfile.NamedTemporaryFile(
            mode="w", suffix=".json", delete=False)
        tmp.close()
        config_path = write_tiny_scenario(tmp.name)

    def progress(row):
        ep, mean_reward, min_rate, jv, jq, jpi = row
        print(f"episode {ep:4d}  reward/slot {mean_reward:9.4f}  "
              f"min_rate {min_rate:9.4f}  Jv {jv:8.3f} Jq {jq:8.3f} "
              f"Jpi {jpi:8.3f}", flush=True)

    try:
        result = train(cfg, endpoint=args.endpoint, config_path=config_path,
                       out_dir=args.out_dir, resume=args.resume,
                       progress=progress)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if tmp:
            os.unlink(tmp.name)
    print(f"wrote {os.path.join(args.out_dir, 'curve.csv')} and "
          f"{result.checkpoint_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
