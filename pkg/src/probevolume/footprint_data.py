"""Footprint ingestion: CSV records, virtual cordon crop, label filtering."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

CSV_FIELDS = ("position_m", "speed_mps", "label")


@dataclass(frozen=True)
class FootprintRecord:
    """One recorded point datum: position along the segment axis plus speed.

    No probe identifier exists; an optional nominal label tags the recording
    window (for example "july-2023").
    """

    position: float
    speed: float
    label: str | None = None

    def __post_init__(self):
        if not math.isfinite(self.position):
            raise ValueError(f"position must be finite, got {self.position}")
        if not (self.speed > 0.0):
            raise ValueError(f"speed must be positive, got {self.speed}")


@dataclass(frozen=True)
class CordonSpec:
    """A virtual cordon: half-open interval (start, start + length]."""

    start: float
    length: float
    label_filter: str | None = None

    def __post_init__(self):
        if not (self.length > 0.0):
            raise ValueError(f"cordon length must be positive, got {self.length}")


@dataclass(frozen=True)
class CordonSample:
    """Speed readings captured inside one cordon for one observation window."""

    speeds: tuple[float, ...]
    d: float
    t: float

    def __post_init__(self):
        if not (self.d > 0.0):
            raise ValueError(f"d must be positive, got {self.d}")
        if not (self.t > 0.0):
            raise ValueError(f"t must be positive, got {self.t}")
        if any(s <= 0.0 for s in self.speeds):
            raise ValueError("all sampled speeds must be positive")


@dataclass(frozen=True)
class CropResult:
    sample: CordonSample
    dropped_nonpositive: int = 0


def crop_to_cordon(records, cordon: CordonSpec, t: float) -> CropResult:
    """Keep records with start < position <= start + length and matching label.

    Records with non-positive speed are dropped (and counted) rather than
    rejected; field data needs cleaning and the estimator requires s > 0.
    """
    if not (t > 0.0):
        raise ValueError(f"t must be positive, got {t}")
    lo = cordon.start
    hi = cordon.start + cordon.length
    kept: list[float] = []
    dropped = 0
    for rec in records:
        if cordon.label_filter is not None and rec.label != cordon.label_filter:
            continue
        if not (lo < rec.position <= hi):
            continue
        if rec.speed <= 0.0:
            dropped += 1
            continue
        kept.append(rec.speed)
    if dropped:
        log.warning("dropped %d in-cordon records with non-positive speed", dropped)
    return CropResult(
        sample=CordonSample(speeds=tuple(kept), d=cordon.length, t=t),
        dropped_nonpositive=dropped,
    )


@dataclass
class CsvReadResult:
    records: list[FootprintRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def read_footprints_csv(path: str | Path, strict: bool = False) -> CsvReadResult:
    """Read footprints from CSV with header ``position_m,speed_mps[,label]``.

    Rows that fail to parse are skipped and reported with their line number;
    with ``strict=True`` the first bad row raises instead.
    """
    result = CsvReadResult()
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return result
        header = [h.strip() for h in header]
        if header[:2] != ["position_m", "speed_mps"]:
            raise ValueError(
                f"{path}: expected header position_m,speed_mps[,label], got {','.join(header)}"
            )
        has_label = len(header) >= 3 and header[2] == "label"
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                position = float(row[0])
                speed = float(row[1])
                label = row[2].strip() or None if has_label and len(row) > 2 else None
                result.records.append(FootprintRecord(position, speed, label))
            except (IndexError, ValueError) as exc:
                msg = f"{path}:{lineno}: skipped unparseable row {row!r} ({exc})"
                if strict:
                    raise ValueError(msg) from exc
                result.warnings.append(msg)
                log.warning("%s", msg)
    return result


def write_footprints_csv(path: str | Path, records) -> None:
    """Write footprints at full float precision so round-trips are lossless."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for rec in records:
            writer.writerow([repr(rec.position), repr(rec.speed), rec.label or ""])
