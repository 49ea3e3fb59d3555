"""Command line: ``rcpolar construct | ppa | simulate | harq``.

Exit status is 0 on success, 2 for invalid arguments or configuration and 3
for failures while running.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .construction import bec_bit_channels, ga_construct, read_index_file, write_reliabilities
from .puncturing import Criterion, ppa_for_rate, write_order
from .sim import (
    ConfigError,
    harq_csv,
    load_config,
    provenance,
    run_harq_sweep,
    run_sweep,
    sweep_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _channel(text: str) -> tuple[str, float | None]:
    kind, _, val = text.partition(":")
    kind = kind.lower()
    if kind == "bec":
        try:
            eps = float(val)
        except ValueError:
            raise argparse.ArgumentTypeError("bec needs an erasure probability, e.g. bec:0.5") from None
        if not 0.0 <= eps <= 1.0:
            raise argparse.ArgumentTypeError("erasure probability must lie in [0, 1]")
        return "bec", eps
    if kind == "awgn" and not val:
        return "awgn", None
    raise argparse.ArgumentTypeError(f"expected bec:EPS or awgn, got {text!r}")


def _header(lines: list[str]) -> str:
    return "\n".join(ln[2:] if ln.startswith("# ") else ln for ln in lines)


def cmd_construct(args) -> int:
    kind, eps = args.channel
    punct = ()
    if args.punct:
        punct = read_index_file(args.punct)
    if kind == "bec":
        rel = bec_bit_channels(args.n, eps, punct)
        extra = {"n": args.n, "channel": f"bec:{eps}"}
    else:
        if args.design_snr_db is None:
            raise ConfigError("--design-snr-db is required for the awgn channel")
        rel = ga_construct(args.n, args.design_snr_db, punct)
        extra = {"n": args.n, "channel": "awgn", "design_snr_db": args.design_snr_db}
    write_reliabilities(args.out, rel, _header(provenance("construct", "reliability-v1", extra=extra)))
    return EXIT_OK


def cmd_ppa(args) -> int:
    if not 1 <= args.k <= 1 << args.base_n:
        raise ConfigError(f"--k must lie in [1, {1 << args.base_n}]")
    if args.criterion == "ga":
        crit = Criterion.ga(args.design_snr_db)
    else:
        if args.eps is None:
            raise ConfigError("--eps is required with --criterion bec")
        crit = Criterion.bec(args.eps)
    order = ppa_for_rate(args.base_n, args.k, crit, args.m_design)
    write_order(args.out, order, _header(provenance("ppa", "puncture-order-v1")))
    return EXIT_OK


def _sim_config(args):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"run.workers={args.workers}")
    return load_config(args.config, overrides)


def cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    Path(args.out).write_text(sweep_csv(run_sweep(cfg), cfg))
    return EXIT_OK


def cmd_harq(args) -> int:
    cfg = _sim_config(args)
    scheme = args.scheme or cfg.scheme
    t = args.t or cfg.t
    cfg = cfg.with_(scheme=scheme, t=t)
    Path(args.out).write_text(harq_csv(run_harq_sweep(cfg), cfg, t))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rcpolar", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"rcpolar {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("construct", help="bit-channel reliabilities of a mother code")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--channel", type=_channel, default=("awgn", None), help="bec:EPS or awgn")
    c.add_argument("--design-snr-db", type=float)
    c.add_argument("--punct", help="file of punctured output indices")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_construct)

    p = sub.add_parser("ppa", help="progressive puncturing order of a base code")
    p.add_argument("--base-n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--design-snr-db", type=float, default=3.5)
    p.add_argument("--criterion", choices=("ga", "bec"), default="ga")
    p.add_argument("--eps", type=float)
    p.add_argument("--m-design", type=int, default=0,
                   help="choose the info set on the code punctured by this many outputs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ppa)

    for name, func, hlp in (("simulate", cmd_simulate, "BER/FER sweep"),
                            ("harq", cmd_harq, "HARQ throughput sweep")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", required=True)
        s.add_argument("--seed", type=int)
        s.add_argument("--workers", type=int)
        s.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config entry (repeatable)")
        s.add_argument("--out", required=True)
        if name == "harq":
            s.add_argument("--scheme", choices=("cc", "ir"))
            s.add_argument("--t", type=int)
        s.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "n", 0) < 0 or getattr(args, "base_n", 0) < 0:
            raise ConfigError("code length exponent must be >= 0")
        return args.func(args)
    except ConfigError as exc:
        print(f"rcpolar: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"rcpolar: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
