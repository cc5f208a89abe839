"""Run every experiment in scripts/configs and print a one-line summary of each."""

import json
import sys
import time
from pathlib import Path

from fractalbem.cli import run_command
from fractalbem.experiments import RunConfig

HERE = Path(__file__).resolve().parent


def main() -> int:
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs")
    for path in sorted((HERE / "configs").glob("*.json")):
        experiment = json.loads(path.read_text())
        cfg = RunConfig.from_dict({**experiment["config"], "output_dir": str(out_root / path.stem)})
        start = time.perf_counter()
        summary = run_command(experiment["command"], cfg, path.stem)
        print(f"{path.stem}: {time.perf_counter() - start:.0f}s "
              f"{json.dumps(summary.get('summary', {}), default=str)}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
