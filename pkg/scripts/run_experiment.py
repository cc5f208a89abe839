"""Run one experiment described by a JSON file of the form
``{"command": <cli subcommand>, "config": <run configuration>}``.

Usage: python scripts/run_experiment.py scripts/configs/cantor_convergence.json [--output-dir DIR]
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from fractalbem.cli import run_command
from fractalbem.experiments import RunConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("experiment", type=Path)
    parser.add_argument("--output-dir", default=None)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    plan = json.loads(args.experiment.read_text())
    config = dict(plan["config"])
    config["output_dir"] = args.output_dir or str(Path("runs") / args.experiment.stem)
    cfg = RunConfig.from_dict(config)
    summary = run_command(plan["command"], cfg, args.experiment.stem)
    print(json.dumps(summary, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
