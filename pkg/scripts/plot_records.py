"""Print a records CSV as an aligned table, optionally restricted to some columns.

Usage: python scripts/plot_records.py runs/cantor_convergence/cantor_convergence.csv j N err_near err_far
"""

import csv
import sys


def main() -> int:
    path, columns = sys.argv[1], sys.argv[2:]
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("(no records)")
        return 0
    columns = columns or list(rows[0])
    table = [columns] + [[_short(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(columns))]
    for row in table:
        print("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    return 0


def _short(text: str) -> str:
    try:
        value = float(text)
    except ValueError:
        return text
    return text if value.is_integer() and "." not in text else f"{value:.4g}"


if __name__ == "__main__":
    sys.exit(main())
