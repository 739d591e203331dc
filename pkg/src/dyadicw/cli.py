"""``dyadicw <command> [--config FILE] [overrides]``.

Exit codes: 0 on success, 2 on a configuration error, 3 when ``--check`` is
given and one of the report's checks fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ._config import apply_thread_cap
from .errors import AdmissibilityError, ConfigError, DimensionError, ResolutionError
from .experiments import EXPERIMENTS, resolve_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3

_OVERRIDES = ("p", "q", "alpha", "beta", "depth", "levels", "trials", "seed", "format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyadicw", description="Matrix-weighted dyadic experiments.")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    for name, spec in EXPERIMENTS.items():
        doc = (spec.func.__doc__ or "").strip().splitlines()[0]
        p = sub.add_parser(name, help=doc, description=doc)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--p", type=float, help="integrability exponent")
        p.add_argument("--q", type=float, help="secondary exponent")
        p.add_argument("--alpha", type=float, help="first exponent of diag(x^alpha, x^beta)")
        p.add_argument("--beta", type=float, help="second exponent (default -alpha)")
        p.add_argument("--depth", type=int, help="maximal dyadic level or generation")
        p.add_argument("--levels", help="level list: '4:12' (inclusive) or '6,8,10'")
        p.add_argument("--trials", type=int, help="number of random trials")
        p.add_argument("--seed", type=int, help="seed for every random draw")
        p.add_argument("--out", type=Path, help="write the report here instead of stdout")
        p.add_argument("--format", choices=("csv", "json"), help="output format")
        p.add_argument("--check", action="store_true", help="exit with status 3 if any check fails")
    return parser


def _load(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    apply_thread_cap()
    try:
        raw = _load(args.config)
        overrides = {k: getattr(args, k) for k in _OVERRIDES}
        if args.out is not None:
            overrides["output_path"] = str(args.out)
        cfg = resolve_config(args.command, raw, overrides)
        report = EXPERIMENTS[args.command].func(cfg)
    except (ConfigError, AdmissibilityError, ResolutionError, DimensionError) as exc:
        print(f"dyadicw {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = report.render(cfg.format)
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if args.check and not report.passed:
        failed = sorted(k for k, v in report.checks.items() if not v)
        print(f"dyadicw {args.command}: checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
