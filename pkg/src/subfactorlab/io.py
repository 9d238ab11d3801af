"""Text formats: density matrices in, line-delimited JSON records and CSV out.

Density files hold one or more sections::

    # comment
    state rho_plus
    dim 2
    weight 0.5          (optional)
    blocks 1 1          (optional block sizes)
    1 0  0 0
    0 0  0 0
    end

Each matrix row lists ``dim`` complex entries as ``re im`` pairs.
"""
import csv
import datetime
import hashlib
import io as _io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import __version__

INF_TOKEN = "inf"
NAN_TOKEN = "nan"
LOG2 = math.log(2)


class ParseError(ValueError):
    """Malformed input file."""


@dataclass
class StateSection:
    label: str
    matrix: np.ndarray
    weight: float = None
    blocks: tuple = None


def _parse_section(lines, label, where):
    dim = weight = blocks = None
    rows = []
    for lineno, text in lines:
        head, _, rest = text.partition(" ")
        if head == "dim":
            dim = int(rest)
            if dim < 1:
                raise ParseError(f"{where}:{lineno}: dim must be positive")
        elif head == "weight":
            weight = float(rest)
        elif head == "blocks":
            blocks = tuple(int(b) for b in rest.split())
        else:
            try:
                vals = [float(v) for v in text.split()]
            except ValueError as exc:
                raise ParseError(f"{where}:{lineno}: cannot parse matrix row") from exc
            rows.append((lineno, vals))
    if dim is None:
        raise ParseError(f"{where}: state {label!r} has no dim line")
    if len(rows) != dim:
        raise ParseError(f"{where}: state {label!r} has {len(rows)} rows, expected {dim}")
    mat = np.zeros((dim, dim), dtype=complex)
    for r, (lineno, vals) in enumerate(rows):
        if len(vals) != 2 * dim:
            raise ParseError(f"{where}:{lineno}: expected {2 * dim} numbers, got {len(vals)}")
        mat[r] = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
    if blocks is not None and sum(blocks) != dim:
        raise ParseError(f"{where}: block sizes of {label!r} do not add up to {dim}")
    if blocks is not None:
        mask = np.ones((dim, dim), dtype=bool)
        start = 0
        for b in blocks:
            mask[start:start + b, start:start + b] = False
            start += b
        if np.any(mat[mask]):
            raise ParseError(f"{where}: state {label!r} has entries outside its declared blocks")
    if weight is not None and not 0 <= weight <= 1:
        raise ParseError(f"{where}: weight of {label!r} must lie in [0, 1]")
    if not np.any(mat.imag):
        mat = mat.real.copy()
    return StateSection(label, mat, weight, blocks)


def parse_states(text, where="<string>"):
    """Parse every ``state ... end`` section of ``text``."""
    sections = []
    current = None
    label = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.split()[0] == "state":
            if current is not None:
                raise ParseError(f"{where}:{lineno}: nested state section")
            label = line[5:].strip() or f"state{len(sections)}"
            current = []
        elif line == "end":
            if current is None:
                raise ParseError(f"{where}:{lineno}: 'end' without 'state'")
            sections.append(_parse_section(current, label, where))
            current = None
        elif current is None:
            raise ParseError(f"{where}:{lineno}: content outside a state section")
        else:
            current.append((lineno, " ".join(line.split())))
    if current is not None:
        raise ParseError(f"{where}: unterminated state section {label!r}")
    if not sections:
        raise ParseError(f"{where}: no state sections found")
    return sections


def read_states(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_states(text, str(path))


def format_states(sections):
    """Inverse of :func:`parse_states` (full double precision)."""
    out = []
    for s in sections:
        mat = np.asarray(s.matrix, dtype=complex)
        out.append(f"state {s.label}")
        out.append(f"dim {mat.shape[0]}")
        if s.weight is not None:
            out.append(f"weight {float(s.weight)!r}")
        if s.blocks is not None:
            out.append("blocks " + " ".join(str(b) for b in s.blocks))
        for row in mat:
            out.append("  ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in row))
        out.append("end")
    return "\n".join(out) + "\n"


# ------------------------------------------------------------------ records


def _encode(value):
    if isinstance(value, dict):
        return {str(k): _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return NAN_TOKEN
        if math.isinf(value):
            return INF_TOKEN if value > 0 else "-" + INF_TOKEN
        return value
    return value


def _decode(value):
    if isinstance(value, dict):
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    if value == INF_TOKEN:
        return math.inf
    if value == "-" + INF_TOKEN:
        return -math.inf
    if value == NAN_TOKEN:
        return math.nan
    return value


def with_bits(results, keys):
    """Add ``<key>_bits`` (value divided by log 2) next to each nat-valued key."""
    out = dict(results)
    for key in keys:
        if key in out and isinstance(out[key], (int, float)) and out[key] is not None:
            out[key + "_bits"] = out[key] / LOG2
    return out


def payload_hash(command, config, results):
    payload = json.dumps(_encode({"command": command, "config": config, "results": results}),
                         sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def make_record(command, config, results, seed=None):
    """Report record with config echo, results and provenance.

    ``payload_sha256`` covers command, config and results only, so repeated
    runs with the same config and seed hash identically.
    """
    return {
        "command": command,
        "config": _encode(config),
        "results": _encode(results),
        "payload_sha256": payload_hash(command, config, results),
        "provenance": {
            "version": __version__,
            "seed": seed,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        },
    }


def dumps_records(records):
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def parse_records(text):
    """Decode line-delimited records, mapping the ``inf`` token back to ``math.inf``."""
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            out.append(_decode(json.loads(line)))
    return out


def dumps_csv(records):
    """One CSV row per record with flattened ``config.*`` and ``results.*`` columns."""
    rows = []
    for r in records:
        row = {"command": r["command"], "payload_sha256": r["payload_sha256"]}
        for section in ("config", "results"):
            for k, v in r[section].items():
                row[f"{section}.{k}"] = json.dumps(v) if isinstance(v, (dict, list)) else v
        rows.append(row)
    columns = []
    for row in rows:
        columns += [c for c in row if c not in columns]
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
