"""Command line entry point: run an MSE-vs-n experiment and write a CSV."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from typing import List, Optional

from .domains import DOMAINS
from .experiment import ESTIMATORS, ExperimentConfig, run_experiment, write_csv


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {text!r}")


def _j_set(text: str):
    if text in ("default", "binary"):
        return text
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if tok in ("inf", "infinity"):
            out.append(math.inf)
        else:
            try:
                out.append(int(tok))
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad return length {tok!r} in --j-set")
    return tuple(out)


def _threads(text: str) -> Optional[int]:
    if text == "auto":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--threads takes an integer or 'auto', got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("--threads must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="magic-ope", description=__doc__)
    p.add_argument("--domain", required=True, choices=sorted(DOMAINS))
    p.add_argument("--estimators", default="AM,DR,WDR,MAGIC",
                   help=f"comma separated subset of {','.join(ESTIMATORS)}")
    p.add_argument("--n-grid", type=_int_list, default=[2 ** k for k in range(3, 13)],
                   help="ascending dataset sizes, e.g. 64,1024,4096 (default 8..4096)")
    p.add_argument("--trials", type=int, default=128, help="independent datasets per n")
    p.add_argument("--data-mode", choices=("full", "half"), default="full")
    p.add_argument("--kappa", type=int, default=200, help="bootstrap resamples for MAGIC")
    p.add_argument("--delta", type=float, default=0.1, help="confidence level parameter of the clamp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--j-set", type=_j_set, default="default",
                   help="'default' (-1..L-1, inf), 'binary' (-1, inf) or a list; write lists as --j-set=-1,0,3,inf")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--threads", type=_threads, default=1, help="worker processes, or 'auto'")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = ExperimentConfig(
            domain=args.domain,
            estimators=tuple(e.strip() for e in args.estimators.split(",") if e.strip()),
            n_grid=tuple(args.n_grid),
            trials=args.trials,
            data_mode=args.data_mode,
            kappa=args.kappa,
            delta=args.delta,
            base_seed=args.seed,
            j_set=args.j_set,
        )
    except ValueError as exc:
        print(f"magic-ope: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        rows = run_experiment(config, threads=args.threads)
        write_csv(rows, args.out)
    except (OSError, ValueError) as exc:
        print(f"magic-ope: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
