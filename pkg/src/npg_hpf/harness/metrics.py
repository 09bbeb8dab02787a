import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

"""The metrics log of a training run.

One CSV file with a header row and one row per evaluation point, UTF-8 with
'.' as the decimal separator. Floats are written with six decimals. Columns
that do not apply to a run (selection frequencies of a single learner, loss
terms it does not use, losses before the first training step) are empty.
"""


@dataclass(frozen=True)
class MetricsRow:
    step: int
    episode: int
    train_return: float | None
    test_return_median: float
    test_return_q25: float
    test_return_q75: float
    epsilon: float
    select_alpha: float | None = None
    select_beta: float | None = None
    loss_total: float | None = None
    loss_td_tot: float | None = None
    loss_td_jt: float | None = None
    loss_instructive: float | None = None


METRICS_COLUMNS = tuple(f.name for f in dataclasses.fields(MetricsRow))


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, int)) and not isinstance(value, float):
        return str(value)
    return f"{float(value):.6f}"


def write_metrics(path: Path | str, rows: list[MetricsRow]):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow(
                format_value(getattr(row, name)) for name in METRICS_COLUMNS
            )


def read_metrics(path: Path | str) -> list[dict[str, str]]:
    """Read a metrics log as rows of strings keyed by column."""
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != METRICS_COLUMNS:
            raise ValueError(
                f"{path} is not a metrics log, columns {reader.fieldnames}"
            )
        return list(reader)
