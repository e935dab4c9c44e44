"""Profile/config parsing and trace serialization."""
from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Optional, TextIO

from .model import FlywheelParams, PowerProfile, ProfileError

PROFILE_HEADER = ["slot", "power_w"]
TRACE_COLUMNS = ["k", "t_s", "e_j", "case", "flag"]
COMPARE_COLUMNS = TRACE_COLUMNS + ["e_ref_j", "gap_j", "bound_j"]
BOUND_COLUMNS = ["k", "t_s", "e_ref_j", "e_j", "gap_j", "bound_j", "satisfied"]
CLASSIFY_COLUMNS = ["k", "p_in_w", "p_prev_w", "case", "eta_in", "eta_prev", "eta_eff",
                    "t_change_s"]

# config key -> FlywheelParams field
CONFIG_KEYS = {
    "t_loss_s": "T_loss",
    "t_cont_s": "T_cont",
    "e_c": "e_c",
    "e_d": "e_d",
    "e_init_j": "E_init",
    "e_cap_j": "E_cap",
    "p_rated_w": "P_rated",
    "delta_s": "delta",
    "p_prev_init_w": "P_prev_init",
}


class FormatError(ValueError):
    """Malformed input file contents."""


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def parse_profile(text: str, delta: float, P_rated: Optional[float] = None) -> PowerProfile:
    lines = text.splitlines()
    if not lines or [c.strip() for c in lines[0].split(",")] != PROFILE_HEADER:
        raise FormatError("line 1: expected header 'slot,power_w'")
    powers = []
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise FormatError(f"line {lineno}: expected 2 fields, got {len(row)}")
        try:
            slot = int(row[0])
        except ValueError:
            raise FormatError(f"line {lineno}: slot {row[0]!r} is not an integer") from None
        if slot != len(powers) + 1:
            raise FormatError(
                f"line {lineno}: slot {slot} out of sequence (expected {len(powers) + 1})")
        try:
            p = float(row[1])
        except ValueError:
            raise FormatError(f"line {lineno}: slot {slot}: power {row[1]!r} is not numeric") from None
        if not math.isfinite(p):
            raise FormatError(f"line {lineno}: slot {slot}: power {row[1]!r} is not finite")
        if P_rated is not None and abs(p) > P_rated:
            raise ProfileError(f"slot {slot}: |power| {abs(p)!r} W exceeds rated power {P_rated!r} W")
        powers.append(p)
    if not powers:
        raise ProfileError("empty profile")
    return PowerProfile(delta=delta, powers=powers)


def load_profile(path, delta: float, P_rated: Optional[float] = None) -> PowerProfile:
    """Read a ``slot,power_w`` CSV with contiguous slots 1..K."""
    with open(path, newline="") as fh:
        return parse_profile(fh.read(), delta, P_rated)


def parse_config(text: str) -> dict:
    """Parse flat ``key=value`` lines into FlywheelParams keyword arguments.

    Blank lines and ``#`` comments are ignored.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in CONFIG_KEYS:
            raise FormatError(f"config line {lineno}: unrecognised entry {raw.strip()!r}")
        try:
            out[CONFIG_KEYS[key]] = float(value)
        except ValueError:
            raise FormatError(f"config line {lineno}: {key} value {value.strip()!r} is not numeric") from None
    return out


def load_config(path) -> dict:
    with open(path) as fh:
        return parse_config(fh.read())


def params_from_mapping(values: dict) -> FlywheelParams:
    missing = [k for k, f in CONFIG_KEYS.items() if f not in values and f != "P_prev_init"]
    if missing:
        raise FormatError(f"missing parameters: {', '.join(missing)}")
    return FlywheelParams(**values)


def write_table(rows: Iterable[dict], columns: list, fmt_name: str, stream: TextIO) -> None:
    """Write rows as CSV or as a JSON array of flat objects.

    Floats are written with 17 significant digits in both formats.
    """
    rows = list(rows)
    if fmt_name == "csv":
        stream.write(",".join(columns) + "\n")
        for row in rows:
            stream.write(",".join(_cell(row[c]) for c in columns) + "\n")
    elif fmt_name == "json":
        stream.write("[\n")
        for i, row in enumerate(rows):
            body = ", ".join(f'"{c}": {_json_value(row[c])}' for c in columns)
            stream.write("  {" + body + "}" + (",\n" if i < len(rows) - 1 else "\n"))
        stream.write("]\n")
    else:
        raise ValueError(f"unknown output format {fmt_name!r}")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return fmt(v)
    return str(v)


def _json_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"cannot serialize non-finite value {v!r}")
        return fmt(v)
    if isinstance(v, int):
        return str(v)
    return '"' + str(v) + '"'


def trace_rows(trace) -> list:
    rows = []
    for k in range(len(trace)):
        tr = trace.transitions[k - 1] if k > 0 else None
        rows.append({
            "k": k,
            "t_s": float(trace.time[k]),
            "e_j": float(trace.energy[k]),
            "case": str(tr.case_tag) if tr else "",
            "flag": bool(trace.saturated[k - 1]) if k > 0 else False,
        })
    return rows


def read_trace_csv(text: str) -> dict:
    """Read back a trace CSV; returns column name -> list of strings."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or header[:len(TRACE_COLUMNS)] != TRACE_COLUMNS:
        raise FormatError("line 1: expected trace header " + ",".join(TRACE_COLUMNS))
    cols = {c: [] for c in header}
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise FormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        for c, v in zip(header, row):
            cols[c].append(v)
    for lineno, k in enumerate(cols["k"], start=2):
        if int(k) != lineno - 2:
            raise FormatError(f"line {lineno}: slot index {k} out of sequence")
    return cols
