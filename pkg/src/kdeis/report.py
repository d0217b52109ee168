"""CSV and metadata writers for experiment rows."""

import csv
import json
import math
from pathlib import Path

__all__ = ["COLUMNS", "format_value", "write_rows", "write_outputs", "read_rows"]

COLUMNS = ("experiment", "regime", "N", "n", "delta_mode", "delta_value", "h", "replicate",
           "metric", "value", "reference", "ci_lo", "ci_hi", "failures", "check")


def format_value(v):
    """Shortest round-trip text for floats; ints and strings as is."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if hasattr(v, "item"):
        return format_value(v.item())
    return str(v)


def write_rows(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([format_value(row.get(c, "")) for c in COLUMNS])


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def write_outputs(out_dir, experiment, raw, agg, meta):
    """Write ``<experiment>_raw.csv``, ``<experiment>_agg.csv`` and ``<experiment>_meta.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "raw": out / f"{experiment}_raw.csv",
        "agg": out / f"{experiment}_agg.csv",
        "meta": out / f"{experiment}_meta.json",
    }
    write_rows(paths["raw"], raw)
    write_rows(paths["agg"], agg)
    with open(paths["meta"], "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
