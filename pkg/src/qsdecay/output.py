"""CSV writers with a ``#`` provenance header.

Numbers are written with 12 significant digits.  The header echoes the
resolved configuration, so a file can be regenerated from its own header.
Set ``SOURCE_DATE_EPOCH`` to pin the timestamp and make whole files
byte-identical between runs; otherwise only the data rows are.
"""

from __future__ import annotations

import datetime as _dt
import math
import os
import tempfile
from pathlib import Path

import numpy as np

UNITS = "atomic units (hbar = m_e = |e| = 1); energies in Hartree, times in hbar/Hartree"


def version() -> str:
    from . import __version__
    return __version__


def timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        t = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        t = _dt.datetime.now(tz=_dt.timezone.utc)
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


def provenance(command: str, config_text: str, extra: dict | None = None) -> list[str]:
    lines = [
        f"qsdecay {version()}",
        f"command: {command}",
        f"timestamp: {timestamp()}",
        f"units: {UNITS}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    lines.append("config:")
    lines.extend("  " + s if s else "" for s in config_text.rstrip("\n").splitlines())
    return lines


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return "%.12g" % v
    s = str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, columns, rows, header_lines=()) -> Path:
    """Write ``rows`` (iterable of sequences) under a commented header, atomically."""
    path = Path(path)
    out = ["# " + h if h else "#" for h in header_lines]
    out.append(",".join(columns))
    for row in rows:
        out.append(",".join(fmt(v) for v in row))
    _atomic_write(path, "\n".join(out) + "\n")
    return path


def write_table(path, table: dict, header_lines=()) -> Path:
    """Column-oriented variant: ``{name: 1-D array}`` with equal lengths."""
    cols = list(table)
    data = [np.asarray(table[c]) for c in cols]
    n = len(data[0]) if data else 0
    if any(len(d) != n for d in data):
        raise ValueError("columns differ in length")
    rows = ([d[i].item() if hasattr(d[i], "item") else d[i] for d in data] for i in range(n))
    return write_csv(path, cols, rows, header_lines)


def write_key_values(path, pairs, header_lines=()) -> Path:
    """Two-column ``quantity,value`` file for scalar summaries."""
    return write_csv(path, ["quantity", "value"], list(pairs), header_lines)


def read_csv(path):
    """Read a file written by :func:`write_csv` into ``(columns, rows of str)``."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    cols = lines[0].split(",")
    return cols, [ln.split(",") for ln in lines[1:]]


def config_from_header(path) -> str:
    """Recover the echoed configuration text from a file header."""
    text = []
    inside = False
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        if not ln.startswith("#"):
            break
        body = ln[2:] if ln.startswith("# ") else ln[1:]
        if body == "config:":
            inside = True
            continue
        if inside:
            text.append(body[2:] if body.startswith("  ") else body)
    return "\n".join(text) + "\n"
