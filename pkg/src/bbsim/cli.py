"""``simulate`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ScenarioConfig, load_config
from .engine import ConfigurationError
from .experiment import SweepError, run_experiment

log = logging.getLogger("bbsim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def parse_seeds(text: str) -> tuple[int, ...]:
    """``1..5`` is an inclusive range, ``1,4,9`` a list; the two forms can be mixed."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                a, b = (int(x) for x in part.split(".."))
                if b < a:
                    raise ValueError
                out.extend(range(a, b + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigurationError(f"--seeds: cannot read {part!r}") from None
    if not out:
        raise ConfigurationError("--seeds: no seeds given")
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="simulate",
                                 description="Sweep the heterogeneous sensor network over modes, loads and seeds.")
    ap.add_argument("--config", help="key = value scenario file; omitted keys keep their defaults")
    ap.add_argument("--modes", help="comma list, e.g. NONE,LIFETIME_BB")
    ap.add_argument("--loads", help="comma list of per-device rates in packets/s")
    ap.add_argument("--seeds", help="e.g. 1..5 or 1,2,7")
    ap.add_argument("--duration", type=float, help="simulated seconds per run")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--trace", action="store_true", help="write one event trace per run")
    ap.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    ap.add_argument("-q", "--quiet", action="store_true")
    return ap


def resolve_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    over: dict = {}
    if args.modes:
        over["scenario.modes"] = args.modes
    if args.loads:
        over["scenario.loads"] = args.loads
    if args.seeds:
        over["scenario.seeds"] = parse_seeds(args.seeds)
    if args.duration is not None:
        over["scenario.duration_s"] = args.duration
    return cfg.replace(**over) if over else cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        if args.jobs < 1:
            raise ConfigurationError("--jobs must be >= 1")
    except ConfigurationError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG

    def progress(r):
        log.info("%-12s load=%-4g seed=%-3d pdr=%s thr=%.1f pps", r.mode.value, r.load, r.seed,
                 "-" if r.summary.pdr is None else f"{r.summary.pdr:.3f}", r.summary.throughput_pps)

    try:
        res = run_experiment(cfg, args.out, trace=args.trace, jobs=args.jobs, progress=progress)
    except (SweepError, OSError) as e:
        log.error("runtime error: %s", e)
        return EXIT_RUNTIME
    log.info("wrote %d runs to %s/runs.csv and %s/summary.csv", len(res.rows), args.out, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
