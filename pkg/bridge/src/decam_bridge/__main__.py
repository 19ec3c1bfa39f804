"""CLI: decam-bridge --model <id> [--weights ...] [--device ...] [--seed N]."""

import argparse
import sys

from .bridge import serve
from .models import BridgeConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="decam-bridge",
        description="Serve an image classifier over the scorer wire protocol",
    )
    parser.add_argument(
        "--model",
        required=True,
        help="tiny | vgg19 | resnet50 | mobilenet_v2",
    )
    parser.add_argument(
        "--weights",
        default="random",
        help="'pretrained', 'random' (seeded init), or a state-dict path",
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--seed", type=int, default=0, help="seed for random init")
    parser.add_argument("--max-forward-batch", type=int, default=64)
    args = parser.parse_args(argv)
    cfg = BridgeConfig(
        model=args.model,
        weights=args.weights,
        device=args.device,
        seed=args.seed,
        max_forward_batch=args.max_forward_batch,
    )
    print(f"serving {cfg.model} (weights={cfg.weights}) on {cfg.device}", file=sys.stderr)
    return serve(cfg)


if __name__ == "__main__":
    sys.exit(main())
