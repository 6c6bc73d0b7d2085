"""
Command-line interface.

    auvsitl run --scenario data/scenarios/default.json --seed 1 --out output/
    auvsitl replay --tlog output/run.tlog --csv output/messages.csv
    auvsitl selftest
    auvsitl batch --scenarios data/scenarios --out output/batch

Exit codes: 0 success, 1 I/O or self-test failure, 2 invalid scenario,
3 simulation divergence.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from auvsitl import harness, scenario, selftest, tlog

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_DIVERGED = 3


def _load(path):
    if path is None:
        return scenario.default_scenario()
    return scenario.load_scenario_file(path)


def write_outputs(out_dir, result, pdf=False, prefix="run"):
    """Write <prefix>.tlog, <prefix>.csv and the report JSON (and PDF) into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{prefix}.tlog").write_bytes(result.tlog)
    (out_dir / f"{prefix}.csv").write_text(result.csv, encoding="utf-8")
    report_name = "report" if prefix == "run" else f"{prefix}_report"
    with open(out_dir / f"{report_name}.json", "w", encoding="utf-8") as f:
        json.dump(result.report.to_dict(), f, indent=2)
        f.write("\n")
    if pdf:
        # pylint: disable=import-outside-toplevel
        from auvsitl import report_pdf

        report_pdf.render_run_pdf(str(out_dir / f"{report_name}.pdf"), result.report, result.trace)
    logging.info("wrote %s outputs to %s", prefix, out_dir)


def cmd_run(args):
    scen = _load(args.scenario).with_overrides(seed=args.seed, duration=args.duration, udp=args.udp)
    result = harness.run(scen)
    write_outputs(args.out, result, pdf=args.pdf)
    print(json.dumps(result.report.to_dict(), indent=2))
    return EXIT_OK


def cmd_replay(args):
    data = Path(args.tlog).read_bytes()
    text = tlog.replay_csv(data)
    Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
    Path(args.csv).write_text(text, encoding="utf-8")
    logging.info("replayed %s to %s", args.tlog, args.csv)
    return EXIT_OK


def cmd_selftest(_args):
    results = selftest.run_selftest()
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_IO


def cmd_batch(args):
    root = Path(args.scenarios)
    files = sorted(root.rglob("*.json")) if root.is_dir() else [root]
    if not files:
        logging.error("no scenario files found in %s", root)
        return EXIT_IO
    scenarios = [scenario.load_scenario_file(p).with_overrides(seed=args.seed) for p in files]
    results = harness.run_batch(scenarios, workers=args.workers)
    for scen, result in zip(scenarios, results):
        write_outputs(args.out, result, pdf=args.pdf, prefix=scen.name)
        print(f"{scen.name}: gate_passed={result.report.gate_passed} final_phase={result.report.final_phase}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="auvsitl", description="AUV software-in-the-loop simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("--scenario", help="scenario JSON file (default: built-in default mission)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--duration", type=float, help="override the simulated duration, s")
    p.add_argument("--out", default="output", help="output folder")
    p.add_argument("--udp", help="mirror controller telemetry to host:port")
    p.add_argument("--pdf", action="store_true", help="also write a PDF run report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="decode a tlog to CSV")
    p.add_argument("--tlog", required=True, help="tlog file")
    p.add_argument("--csv", required=True, help="CSV file to write")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("selftest", help="CRC vectors and golden frames")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("batch", help="run every scenario in a folder")
    p.add_argument("--scenarios", required=True, help="scenario file or folder")
    p.add_argument("--seed", type=int, help="override every scenario seed")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--out", default="output/batch", help="output folder")
    p.add_argument("--pdf", action="store_true", help="also write PDF run reports")
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(message)s",
        handlers=[logging.StreamHandler()],
    )
    try:
        code = args.func(args)
    except scenario.ParseError as e:
        logging.error("Failed to parse scenario: %s", e)
        code = EXIT_INVALID
    except scenario.ValidationError as e:
        logging.error("Invalid scenario:")
        for err in e.errors:
            logging.error("  - %s", err)
        code = EXIT_INVALID
    except harness.SimulationDiverged as e:
        logging.error("%s", e)
        code = EXIT_DIVERGED
    except (tlog.CorruptLog, tlog.NonMonotonicTimestamp) as e:
        logging.error("Failed to read tlog: %s", e)
        code = EXIT_IO
    except OSError as e:
        logging.error("I/O error: %s", e)
        code = EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
