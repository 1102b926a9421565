"""
TSV and plain-text report writers: metric reports, epoch logs, embeddings and ANP tables.
"""
import csv
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

from glycocc.errors import FormatError
from glycocc.models.dataset import PerformanceTensor
from glycocc.services.anp import anp, raw_scores

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
REPORT_COLUMNS = ("model", "dataset", "subset", "rows", "metric", "value")


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _write_tsv(path: PathLike, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_value(v) for v in row])
    return path


def write_metric_report(records: Sequence[Dict], path: PathLike) -> Path:
    return _write_tsv(path, REPORT_COLUMNS, [[r[c] for c in REPORT_COLUMNS] for r in records])


def read_metric_report(path: PathLike) -> List[Dict]:
    path = str(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f, delimiter="\t"))
    except OSError as e:
        raise FormatError(f"Cannot read report: {e}", path=path) from e
    if not rows or tuple(rows[0]) != REPORT_COLUMNS:
        raise FormatError("Header must be " + "\t".join(REPORT_COLUMNS), line=1, path=path)
    records = []
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(REPORT_COLUMNS):
            raise FormatError(f"Expected {len(REPORT_COLUMNS)} columns, found {len(row)}", line=line, path=path)
        record = dict(zip(REPORT_COLUMNS, row))
        try:
            record["value"] = float(record["value"])
        except ValueError:
            raise FormatError(f"Bad metric value {row[-1]!r}", line=line, path=path)
        records.append(record)
    return records


def format_metric_table(records: Sequence[Dict]) -> str:
    """Aligned human-readable table of a metric report."""
    body = [[str(r[c]) if c != "value" else f"{r[c]:.4f}" for c in REPORT_COLUMNS] for r in records]
    widths = [max(len(c), *(len(row[i]) for row in body)) if body else len(c) for i, c in enumerate(REPORT_COLUMNS)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(REPORT_COLUMNS, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in body)
    return "\n".join(lines)


def write_epoch_log(log: Sequence[Dict[str, float]], path: PathLike) -> Path:
    columns: List[str] = []
    for row in log:
        for key in row:
            if key not in columns:
                columns.append(key)
    rows = [[int(row["epoch"]) if k == "epoch" else row.get(k, "") for k in columns] for row in log]
    return _write_tsv(path, columns, rows)


def write_embeddings(rows: Sequence[Sequence[str]], path: PathLike) -> Path:
    width = max((len(r) - 4 for r in rows), default=0)
    header = ["id", "rank", "cell", "monosaccharide"] + [f"h{i}" for i in range(width)]
    return _write_tsv(path, header, rows)


def anp_rows(P: PerformanceTensor) -> List[Dict]:
    """Per-model ANP and raw totals, best ANP first."""
    scores = anp(P)
    raw = raw_scores(P)
    rows = [{"model": m, "anp": a, "raw": r} for m, a, r in zip(P.models, scores, raw)]
    return sorted(rows, key=lambda row: (-row["anp"], row["model"]))


def write_anp_report(P: PerformanceTensor, path: PathLike) -> Path:
    rows = anp_rows(P)
    return _write_tsv(path, ("model", "anp", "raw"), [[r["model"], r["anp"], r["raw"]] for r in rows])


def format_anp_table(P: PerformanceTensor) -> str:
    rows = anp_rows(P)
    width = max(len("model"), *(len(r["model"]) for r in rows))
    lines = [f"{'model'.ljust(width)}  {'ANP':>8}  {'raw':>8}"]
    lines.extend(f"{r['model'].ljust(width)}  {r['anp']:8.4f}  {r['raw']:8.4f}" for r in rows)
    lines.append(f"({len(P.metrics)} metrics x {len(P.datasets)} datasets)")
    return "\n".join(lines)
