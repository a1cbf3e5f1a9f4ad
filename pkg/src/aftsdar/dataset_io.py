"""Dataset CSV reading and writing.

Layout: a header row, a ``status`` column (1 = event, 0 = censored), and
exactly one of ``time`` (raw positive time, log-transformed on load) or
``logtime`` (used as is). Every other column is a covariate, kept in file
order. Row numbers in errors count the header as row 1.
"""
import csv
import math

import numpy as np

from .errors import CsvFormatError, InputDataError
from .survival_data import SurvivalDataset


class MissingColumnError(CsvFormatError):
    pass


class AmbiguousTimeColumnError(CsvFormatError):
    pass


class RaggedRowError(CsvFormatError):
    pass


class NonNumericCellError(CsvFormatError):
    pass


class InvalidStatusError(CsvFormatError):
    pass


class NonPositiveTimeError(CsvFormatError):
    pass


def _number(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCellError(f"cannot parse {text!r} as a number", row, column) from None
    if not math.isfinite(value):
        raise NonNumericCellError(f"non-finite value {text!r}", row, column)
    return value


def parse_dataset_csv(path):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputDataError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MissingColumnError("empty file, expected a header row", row=1)
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dup = sorted({h for h in header if header.count(h) > 1})
            raise CsvFormatError(f"duplicate column names {dup}", row=1)
        if "time" in header and "logtime" in header:
            raise AmbiguousTimeColumnError(
                "both 'time' and 'logtime' present; keep exactly one", row=1)
        if "time" not in header and "logtime" not in header:
            raise MissingColumnError("missing required column 'time' (or 'logtime')", row=1)
        if "status" not in header:
            raise MissingColumnError("missing required column 'status'", row=1)
        time_col = "time" if "time" in header else "logtime"
        t_idx = header.index(time_col)
        s_idx = header.index("status")
        cov_idx = [j for j, h in enumerate(header) if j not in (t_idx, s_idx)]

        ys, deltas, rows = [], [], []
        for row_no, fields in enumerate(reader, start=2):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                raise RaggedRowError(
                    f"expected {len(header)} fields, found {len(fields)}", row=row_no)
            t = _number(fields[t_idx].strip(), row_no, time_col)
            if time_col == "time":
                if t <= 0:
                    raise NonPositiveTimeError(f"time must be positive, got {t}", row_no, "time")
                t = math.log(t)
            s = _number(fields[s_idx].strip(), row_no, "status")
            if s not in (0.0, 1.0):
                raise InvalidStatusError(
                    f"status must be 0 or 1, got {fields[s_idx].strip()!r}", row_no, "status")
            ys.append(t)
            deltas.append(int(s))
            rows.append([_number(fields[j].strip(), row_no, header[j]) for j in cov_idx])

    if len(ys) < 2:
        raise InputDataError(f"{path}: need at least 2 data rows, found {len(ys)}")
    if not cov_idx:
        raise MissingColumnError("no covariate columns", row=1)
    return SurvivalDataset(
        y=np.array(ys),
        delta=np.array(deltas, dtype=np.int64),
        X=np.array(rows, dtype=np.float64).reshape(len(ys), len(cov_idx)),
        feature_names=[header[j] for j in cov_idx],
    )


def write_dataset_csv(dataset, path):
    """Write with a ``logtime`` column; floats use shortest round-trip repr."""
    names = dataset.names()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["logtime", "status", *names])
        for i in range(dataset.n):
            w.writerow([repr(float(dataset.y[i])), int(dataset.delta[i]),
                        *(repr(float(v)) for v in dataset.X[i])])
