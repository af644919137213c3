"""Command line entry point: ``skewconv verify|simulate|kernels``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, build, load_config, with_seed
from .harness import format_report, run_simulate, run_verify
from .semigroup import DomainError, kernel_g, kernel_k, kernel_p

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def kernel_table(kind: str, params: list[str]) -> str:
    """Tab-separated table of ``g``, ``p`` or ``k`` over the product of parameter lists.

    ``g`` takes ``d``, ``s``, ``x`` (``x`` is the distance from the origin when
    ``d = 2``); ``p`` takes ``s``, ``x``, ``y``; ``k`` takes ``s``, ``y``.
    """
    kw = {}
    for item in params:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"parameter {item!r} must look like name=v1,v2")
        kw[key.strip()] = _floats(val)
    cols = {"g": ("d", "s", "x"), "p": ("s", "x", "y"), "k": ("s", "y")}
    if kind not in cols:
        raise ValueError(f"unknown kernel {kind!r}; expected g, p or k")
    names = cols[kind]
    if kind == "g":
        kw.setdefault("d", [1.0])
    missing = [n for n in names if n not in kw]
    extra = sorted(set(kw) - set(names))
    if missing or extra:
        raise ValueError(f"kernel {kind} needs {', '.join(names)} (missing {missing}, extra {extra})")
    rows = [("\t".join(names + (kind,)))]
    grids = np.meshgrid(*[np.asarray(kw[n]) for n in names], indexing="ij")
    for combo in zip(*(g.ravel() for g in grids)):
        if kind == "g":
            d, s, x = combo
            val = kernel_g(int(d), s, [x] + [0.0] * (int(d) - 1))
        elif kind == "p":
            val = kernel_p(*combo)
        else:
            val = kernel_k(*combo)
        rows.append("\t".join(format(float(v), ".17g") for v in combo + (val,)))
    return "\n".join(rows) + "\n"


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", type=Path)
    common.add_argument("--seed", type=int, default=None, help="override simulation.seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for ensembles")
    common.add_argument("--out", type=Path, default=None, help="override outputs.dir")

    p = argparse.ArgumentParser(prog="skewconv", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run the verification suites")
    sub.add_parser("simulate", parents=[common], help="simulate an OU ensemble to CSV")
    k = sub.add_parser("kernels", help="tabulate a heat kernel")
    k.add_argument("kind", choices=("g", "p", "k"))
    k.add_argument("params", nargs="+", help="name=v1,v2,... lists")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "kernels":
        try:
            sys.stdout.write(kernel_table(args.kind, args.params))
        except (ValueError, DomainError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    try:
        cfg = with_seed(load_config(args.config), args.seed)
        exp = build(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or Path(cfg.outputs.dir)
    if args.command == "verify":
        checks = run_verify(exp, jobs=args.jobs)
        report = format_report(checks)
        sys.stdout.write(report)
        if args.out is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "verify.tsv").write_text(report, encoding="utf-8")
        return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL
    files = run_simulate(exp, out_dir, jobs=args.jobs)
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
