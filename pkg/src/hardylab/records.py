"""CSV output: comma separated, header row, LF endings, 17 significant digits."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


ADMISSIBILITY_HEADER = ("check_name", "probe", "level", "value", "verdict")
RAYLEIGH_HEADER = ("n_cells", "r_lo", "r_hi", "best_value", "claimed_K", "margin", "verdict")
SWEEP_HEADER = ("lambda", "lambda_over_K", "final_over_initial", "apriori_margin", "apriori_status",
                "blow_up", "status")
