"""CSV readers and writers with locale-independent numeric formatting."""

from __future__ import annotations

import csv
import io
import math

import numpy as np

FLOAT_FORMAT = ".14e"


def fmt(x) -> str:
    """Scientific notation with 15 significant digits; ``nan`` for missing."""
    if x is None:
        return "nan"
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, FLOAT_FORMAT)


def write_rows(path_or_file, header, rows):
    """Write a header-first CSV; floats are formatted with :func:`fmt`."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def read_rows(path):
    """Return ``(header, rows)`` with numeric cells parsed as float."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for row in reader:
            parsed = []
            for v in row:
                try:
                    parsed.append(float(v))
                except ValueError:
                    parsed.append(v)
            rows.append(parsed)
    return header, rows


def matrix_to_csv(mat) -> str:
    """Row-major ``re,im`` pairs, one matrix row per line."""
    mat = np.asarray(mat)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in mat:
        cells = []
        for z in row:
            cells += [fmt(z.real), fmt(z.imag)]
        writer.writerow(cells)
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    vals = np.array([[float(v) for v in r] for r in rows])
    return vals[:, 0::2] + 1j * vals[:, 1::2]


def trajectory_header(indices):
    cols = ["t"]
    for a in indices:
        for b in indices:
            cols += [f"re(rho_{a}_{b})", f"im(rho_{a}_{b})"]
    return cols


def write_trajectory(path, trajectory, indices=None):
    """One row per sample: ``t`` then row-major ``re, im`` of ``rho[a, b]``.

    ``indices`` selects a subset of basis states (default: all).
    """
    n = trajectory.states.shape[-1]
    idx = np.arange(n) if indices is None else np.asarray(indices, dtype=int)
    rows = []
    for t, rho in zip(trajectory.times, trajectory.states):
        if rho.ndim == 1:
            rho = np.outer(rho, rho.conj())
        sub = rho[np.ix_(idx, idx)]
        flat = np.column_stack([sub.real.ravel(), sub.imag.ravel()]).ravel()
        rows.append([t, *flat])
    write_rows(path, trajectory_header(idx.tolist()), rows)
