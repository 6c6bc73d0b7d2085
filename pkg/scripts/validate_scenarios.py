#!/usr/bin/env python3
"""
validate_scenarios.py

Script to validate scenario JSON files.
Can validate either:
- All JSON files in a directory (and its subfolders)
- A single JSON file

Validation is the same as `auvsitl run` performs before simulating.
"""
import argparse
import logging
import os
import sys
from pathlib import Path

sys.path.insert(
    0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "src"))
)

# pylint: disable=wrong-import-position,import-error
from auvsitl import scenario

show_info = True  # Print a short summary of each valid scenario


def find_json_files(root_dir):
    """Recursively find all .json files under root_dir."""
    return sorted(Path(root_dir).rglob("*.json"))


def validate_file(file_path):
    """Return a list of error messages (empty if valid)."""
    try:
        scen = scenario.load_scenario_file(file_path)
    except scenario.ParseError as e:
        return [f"Could not parse JSON: {e}"]
    except scenario.ValidationError as e:
        return e.errors
    except OSError as e:
        return [f"Could not read file: {e}"]

    if show_info:
        labels = ", ".join(o.label for o in scen.objects) or "none"
        print(f"Info for {file_path}:")
        print(f"Name: {scen.name}, seed {scen.seed}, duration {scen.duration:.0f} s")
        print(f"Objects: {labels}")
        print(f"Link latency: {scen.link.latency * 1000:.0f} ms")
        print("-" * 40)
    return []


def main(input_path=None):
    """
    Validate scenario file(s).

    Args:
        input_path: A scenario file, a folder of them, or None for data/scenarios.
    """
    if input_path is None:
        input_path = Path(__file__).parent.parent / "data" / "scenarios"

    input_path = Path(input_path)

    if input_path.is_file():
        if input_path.suffix != ".json":
            print(f"Error: {input_path} is not a JSON file.")
            sys.exit(1)
        json_files = [input_path]
    elif input_path.is_dir():
        json_files = find_json_files(input_path)
        if not json_files:
            print(f"No JSON files found in {input_path}")
            sys.exit(1)
    else:
        print(f"Error: {input_path} does not exist.")
        sys.exit(1)

    all_ok = True
    for file_path in json_files:
        errors = validate_file(file_path)
        if errors:
            print(f"[FAIL] {file_path}:")
            for err in errors:
                print(f"   - {err}")
            all_ok = False
        else:
            print(f"[OK]   {file_path}")
            print()
    if all_ok:
        print("\nAll files passed validation.")
        sys.exit(0)
    else:
        print("\nSome files failed validation.")
        sys.exit(2)


if __name__ == "__main__":

    logging.basicConfig(
        level=logging.WARNING,
        format="%(asctime)s [%(levelname)s] %(message)s",
        handlers=[logging.StreamHandler()],
    )

    parser = argparse.ArgumentParser(
        description="Validate scenario files. Can validate a single file or all files in a directory."
    )
    parser.add_argument(
        "input_path",
        nargs="?",
        help="Path to either a JSON file or a folder containing JSON files",
    )
    args = parser.parse_args()

    main(args.input_path)
