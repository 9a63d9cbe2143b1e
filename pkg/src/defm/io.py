"""On-disk formats: series/forecast/score CSVs, YAML configs, JSON sidecars.

Floats are written with repr(), the shortest digit string that round
trips to the same double, so repeated runs with identical inputs produce
byte-identical files. Nothing here embeds timestamps.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import yaml

from .embedding import SeriesMatrix


class CsvFormatError(ValueError):
    """A CSV cell failed to parse; the message names row and column."""


def _fmt(x) -> str:
    return repr(float(x))


def write_series_csv(path, series: SeriesMatrix) -> None:
    """Time-major CSV: header ``time,<var...>``, one row per sample."""
    path = Path(path)
    names = series.var_names or [f"v{j}" for j in range(series.n)]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + list(names))
        for i in range(series.m):
            writer.writerow([_fmt(i * series.dt)] + [_fmt(v) for v in series.data[:, i]])


def read_series_csv(path) -> SeriesMatrix:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        if len(header) < 2:
            raise CsvFormatError(f"{path}: header must name a time column and "
                                 "at least one variable")
        names = header[1:]
        rows = []
        times = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(f"{path}: row {line_no} has {len(row)} cells, "
                                     f"expected {len(header)}")
            parsed = []
            for col_no, cell in enumerate(row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {line_no}, column {header[col_no]!r}: "
                        f"cannot parse {cell!r} as a number") from None
            times.append(parsed[0])
            rows.append(parsed[1:])
    if len(rows) < 2:
        raise CsvFormatError(f"{path}: need at least two data rows")
    dt = times[1] - times[0] if len(times) > 1 else 1.0
    return SeriesMatrix.from_time_major(np.asarray(rows), dt=dt if dt > 0 else 1.0,
                                        var_names=names)


def write_forecast_csv(path, result) -> None:
    """Columns: time_index, estimate, spread, then truth when known."""
    path = Path(path)
    has_truth = getattr(result, "truth", None) is not None
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["time_index", "estimate", "spread"]
        if has_truth:
            header.append("truth")
        writer.writerow(header)
        for i in range(len(result.estimates)):
            row = [str(int(result.time_indices[i])), _fmt(result.estimates[i]),
                   _fmt(result.spreads[i])]
            if has_truth:
                row.append(_fmt(result.truth[i]))
            writer.writerow(row)


def read_forecast_csv(path) -> dict[str, np.ndarray]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        columns: dict[str, list[float]] = {name: [] for name in header}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(f"{path}: row {line_no} has {len(row)} cells, "
                                     f"expected {len(header)}")
            for name, cell in zip(header, row):
                try:
                    columns[name].append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {line_no}, column {name!r}: "
                        f"cannot parse {cell!r} as a number") from None
    return {name: np.asarray(vals) for name, vals in columns.items()}


def write_long_term_csv(path, result, truth: np.ndarray | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["time_index", "estimate"]
        if truth is not None:
            header.append("truth")
        writer.writerow(header)
        for i in range(len(result.estimates)):
            row = [str(int(result.time_indices[i])), _fmt(result.estimates[i])]
            if truth is not None:
                row.append(_fmt(truth[i]))
            writer.writerow(row)


def write_scores_csv(path, rows: list[dict], fields: list[str]) -> None:
    """Benchmark table; None renders as the empty cell."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            out = []
            for name in fields:
                value = row.get(name)
                if value is None:
                    out.append("")
                elif isinstance(value, float):
                    out.append(_fmt(value))
                else:
                    out.append(str(value))
            writer.writerow(out)


def write_train_log_csv(path, report) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "determined", "consistency", "total"])
        for i in range(report.epochs_run):
            writer.writerow([str(i), _fmt(report.ds_losses[i]),
                             _fmt(report.fc_losses[i]), _fmt(report.total_losses[i])])


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def load_config(path) -> dict:
    """YAML config file as a nested dict (empty file gives {})."""
    with open(path) as fh:
        loaded = yaml.safe_load(fh)
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ValueError(f"{path}: config must be a mapping at the top level")
    return loaded


def merge_options(defaults: dict, file_values: dict, flag_values: dict) -> dict:
    """Flags beat the config file, which beats built-in defaults.

    Only keys present in ``defaults`` are accepted from the file;
    unknown keys raise so typos fail loudly. Flag values equal to None
    mean "not given on the command line".
    """
    merged = dict(defaults)
    for key, value in file_values.items():
        if key not in defaults:
            raise ValueError(f"unknown config key {key!r}")
        merged[key] = value
    for key, value in flag_values.items():
        if value is not None:
            if key not in defaults:
                raise ValueError(f"unknown option {key!r}")
            merged[key] = value
    return merged
