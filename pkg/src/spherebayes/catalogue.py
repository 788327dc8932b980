"""Reading directional catalogues from text files."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import angles_from_vectors, canonical_angles

MAX_REJECT_FRACTION = 0.10
NORM_WINDOW = (0.9, 1.1)


class CatalogueFormat(enum.Enum):
    ANGLES = "angles"
    VECTORS = "vectors"


@dataclass(frozen=True)
class ParseReport:
    lines: int
    accepted: int
    rejected: int
    reasons: tuple = ()


@dataclass(frozen=True)
class Catalogue:
    records: np.ndarray  # (n, 2) canonical [theta, phi]
    source: str = ""
    report: ParseReport = field(default_factory=lambda: ParseReport(0, 0, 0))
    values: np.ndarray | None = None  # responses when read with values=True

    def __len__(self) -> int:
        return self.records.shape[0]


class IngestError(ValueError):
    def __init__(self, message: str, report: ParseReport):
        super().__init__(message)
        self.report = report


def _parse_angles(fields):
    if len(fields) != 2:
        return None, "expected 2 fields"
    theta, phi = (float(f) for f in fields)
    if not (math.isfinite(theta) and math.isfinite(phi)):
        return None, "non-finite angle"
    if not 0.0 <= theta <= math.pi:
        return None, "colatitude outside [0, pi]"
    t, p = canonical_angles(np.array([theta]), np.array([phi]))
    return (float(t[0]), float(p[0])), None


def _parse_vector(fields):
    if len(fields) != 3:
        return None, "expected 3 fields"
    v = np.array([float(f) for f in fields])
    if not np.all(np.isfinite(v)):
        return None, "non-finite component"
    norm = float(np.linalg.norm(v))
    if not NORM_WINDOW[0] <= norm <= NORM_WINDOW[1]:
        return None, f"norm {norm:.3g} outside [{NORM_WINDOW[0]}, {NORM_WINDOW[1]}]"
    t, p = angles_from_vectors(v / norm)
    return (float(t[0]), float(p[0])), None


def ingest(path, fmt=CatalogueFormat.ANGLES, values: bool = False) -> Catalogue:
    """Read one direction per line.

    ANGLES rows are ``theta,phi`` in radians, VECTORS rows are ``x,y,z``.
    With ``values=True`` every row carries one more column, the response.
    Blank lines and lines starting with ``#`` are ignored; a first data line
    containing letters is taken as a header.  Every other line counts toward
    the report, and more than 10% rejects raises ``IngestError``.
    """
    fmt = fmt if isinstance(fmt, CatalogueFormat) else CatalogueFormat(str(fmt).lower())
    parse = _parse_angles if fmt is CatalogueFormat.ANGLES else _parse_vector
    text = Path(path).read_text()
    records, responses, reasons = [], [], []
    lines = 0
    seen_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not seen_data and any(ch.isalpha() for ch in line.replace("e", "").replace("E", "")):
            seen_data = True
            continue
        seen_data = True
        lines += 1
        fields = [f.strip() for f in line.replace(";", ",").split(",")]
        try:
            value = None
            if values:
                value = float(fields.pop()) if len(fields) > 1 else math.nan
            rec, why = parse(fields)
            if rec is not None and values and not math.isfinite(value):
                rec, why = None, "missing or non-finite response"
        except ValueError:
            rec, why = None, "unparseable number"
        if rec is None:
            reasons.append((lineno, why))
        else:
            records.append(rec)
            responses.append(value)
    report = ParseReport(lines, len(records), len(reasons), tuple(reasons))
    if lines and report.rejected > MAX_REJECT_FRACTION * lines:
        raise IngestError(
            f"{report.rejected} of {lines} lines rejected (limit 10%); first: {reasons[:3]}", report
        )
    arr = np.array(records, dtype=float).reshape(-1, 2)
    vals = np.array(responses, dtype=float) if values else None
    return Catalogue(arr, str(path), report, vals)


def write_catalogue(path, points, fmt=CatalogueFormat.ANGLES) -> None:
    """Write directions in the format ``ingest`` reads, with 17 significant digits."""
    fmt = fmt if isinstance(fmt, CatalogueFormat) else CatalogueFormat(str(fmt).lower())
    pts = np.asarray(points, dtype=float)
    with open(path, "w") as fh:
        if fmt is CatalogueFormat.ANGLES:
            fh.write("theta,phi\n")
            for t, p in pts:
                fh.write(f"{t:.17g},{p:.17g}\n")
        else:
            fh.write("x,y,z\n")
            st = np.sin(pts[:, 0])
            xyz = np.column_stack([st * np.cos(pts[:, 1]), st * np.sin(pts[:, 1]), np.cos(pts[:, 0])])
            for x, y, z in xyz:
                fh.write(f"{x:.17g},{y:.17g},{z:.17g}\n")
