"""Command line entry point.

Exit codes: 0 on success, 1 for invalid input, 2 for runtime or numerical
failures.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace

from . import harness
from .geometry import GeometryError
from .transceiver import SearchSpaceError

log = logging.getLogger("ucaris")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="reference",
                   help="scenario JSON file or shipped scenario name (default: reference)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", default="-", help="output file, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=1, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ucaris", description="UCA multi-RIS LOS MIMO simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("error-surface", help="approximation error over a rotation grid")
    _common(p)
    p.add_argument("--mode", choices=harness.ERROR_SURFACE_MODES, default="segment")
    p.add_argument("--points", type=int, help="grid points per axis")
    p.add_argument("--compare", action="store_true",
                   help="append the direct-over-split error ratio at the grid maximum")

    p = sub.add_parser("angle-range", help="largest rotations within an error budget")
    _common(p)
    p.add_argument("--rho", type=_floats, help="comma-separated thresholds")

    p = sub.add_parser("ber", help="Monte Carlo bit error rate sweep")
    _common(p)
    p.add_argument("--detector", choices=harness.BER_DETECTORS, default="proposed")
    p.add_argument("--snr", type=_floats, help="comma-separated SNR points in dB")
    p.add_argument("--n", type=int, help="antennas per array")
    p.add_argument("--trials", type=int)

    p = sub.add_parser("capacity", help="capacity versus N and SNR")
    _common(p)
    p.add_argument("--n-list", type=_ints)
    p.add_argument("--snr", type=_floats)

    p = sub.add_parser("complexity", help="operation-count tables")
    _common(p)
    p.add_argument("--n-list", type=_ints, default=[20])
    p.add_argument("--v-list", type=_ints, default=[4])

    p = sub.add_parser("circulant-check", help="circulant deviation over random poses")
    _common(p)
    p.add_argument("--n-list", type=_ints)
    p.add_argument("--poses", type=int, default=20)
    p.add_argument("--max-rotation-deg", type=float, default=20.0)
    return parser


def _run(args) -> list[harness.SimRecord]:
    sc = harness.load_scenario(args.config)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    w = args.workers
    cmd = args.command
    if cmd == "error-surface":
        grid = harness.rotation_grid(sc, args.points) if args.points else None
        records = harness.run_error_surface(sc, grid, args.mode, workers=w)
        if args.compare:
            total = min(sc.grid_max * len(sc.segments), math.pi / 3)
            records.append(harness.compare_split_vs_direct(sc, total, index=len(records)))
        return records
    if cmd == "angle-range":
        return [harness.run_angle_range(sc, rho, i, workers=w)
                for i, rho in enumerate(args.rho or sc.thresholds)]
    if cmd == "ber":
        return harness.run_ber_sweep(sc, args.snr, args.detector, args.n, args.trials, w)
    if cmd == "capacity":
        return harness.run_capacity_sweep(sc, args.n_list, args.snr, w)
    if cmd == "complexity":
        return harness.run_complexity_table(args.n_list, args.v_list, sc)
    if cmd == "circulant-check":
        return harness.run_circulant_check(sc, args.n_list, args.poses,
                                           math.radians(args.max_rotation_deg))
    raise AssertionError(cmd)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        records = _run(args)
        harness.emit(records, args.format, args.out)
    except (harness.ScenarioError, GeometryError, SearchSpaceError, ValueError) as exc:
        print(f"ucaris: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - any numerical failure maps to exit 2
        log.debug("runtime failure", exc_info=True)
        print(f"ucaris: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %d records to %s", len(records), args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
