"""Corpus ingestion, fingerprinting, splitting, and text ablations."""

from __future__ import annotations

import csv
import hashlib
import math
import random
import re
from dataclasses import dataclass
from pathlib import Path

from .geo import Coordinate

GROUND_TRUTH_HEADER = ["row_id", "abstract_text", "word_count", "sha256", "truth_lat", "truth_lon"]
"""Bit-exact column header for ground-truth/results CSV files."""


class MalformedRow(ValueError):
    """Raised for rows with missing columns or bad coordinate values."""


class DuplicateId(ValueError):
    """Raised when a loaded file repeats a row_id."""


class SampleTooLarge(ValueError):
    """Raised when a sample larger than the source set is requested."""


def fingerprint(text: str) -> str:
    """Lowercase hex SHA-256 of the exact UTF-8 bytes of ``text``."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def word_count(text: str) -> int:
    """Number of maximal nonempty whitespace-separated tokens."""
    return len(text.split())


@dataclass(frozen=True)
class GrantAbstract:
    """One corpus row: id, text, derived metadata, optional ground truth."""

    row_id: str
    text: str
    word_count: int
    fingerprint: str
    ground_truth: Coordinate | None = None

    @classmethod
    def from_text(cls, row_id: str, text: str, ground_truth: Coordinate | None = None) -> "GrantAbstract":
        return cls(row_id, text, word_count(text), fingerprint(text), ground_truth)


@dataclass(frozen=True)
class SplitConfig:
    seed: int = 42
    dev_fraction: float = 0.20

    def __post_init__(self):
        if not 0.0 < self.dev_fraction < 1.0:
            raise ValueError("dev_fraction must lie strictly between 0 and 1")


@dataclass(frozen=True)
class EvalSet:
    name: str
    members: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.members)) != len(self.members):
            raise ValueError(f"evalset {self.name!r} has duplicate members")

    def __len__(self) -> int:
        return len(self.members)


def load_ground_truth(path: str | Path) -> list[GrantAbstract]:
    """Load a ground-truth CSV into GrantAbstract records.

    The file must carry the exact GROUND_TRUTH_HEADER. word_count and
    sha256 are recomputed from the text; nonempty stated values that
    disagree are rejected. Rows with both truth fields empty carry no
    ground truth; a half-filled pair is malformed.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise MalformedRow(f"{path}: empty file, header required") from exc
        if header != GROUND_TRUTH_HEADER:
            raise MalformedRow(f"{path}: bad header {header!r}")

        records: list[GrantAbstract] = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(GROUND_TRUTH_HEADER):
                raise MalformedRow(f"{path}:{lineno}: expected {len(GROUND_TRUTH_HEADER)} columns, got {len(row)}")
            row_id, text, wc, sha, lat_txt, lon_txt = row
            if not row_id:
                raise MalformedRow(f"{path}:{lineno}: empty row_id")
            if row_id in seen:
                raise DuplicateId(f"{path}:{lineno}: duplicate row_id {row_id!r}")
            seen.add(row_id)

            if wc:
                try:
                    stated = int(wc)
                except ValueError as exc:
                    raise MalformedRow(f"{path}:{lineno}: bad word_count {wc!r}") from exc
                if stated != word_count(text):
                    raise MalformedRow(f"{path}:{lineno}: stated word_count {wc} != {word_count(text)}")
            if sha and sha.lower() != fingerprint(text):
                raise MalformedRow(f"{path}:{lineno}: sha256 mismatch")

            truth = None
            if lat_txt or lon_txt:
                if not (lat_txt and lon_txt):
                    raise MalformedRow(f"{path}:{lineno}: half-filled ground truth")
                try:
                    truth = Coordinate(float(lat_txt), float(lon_txt))
                except ValueError as exc:
                    raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
            records.append(GrantAbstract.from_text(row_id, text, truth))
    return records


def write_ground_truth(path: str | Path, rows: list[GrantAbstract]) -> None:
    """Write records in the ground-truth CSV schema (UTF-8, RFC 4180)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GROUND_TRUTH_HEADER)
        for r in rows:
            lat = f"{r.ground_truth.lat:.6f}" if r.ground_truth else ""
            lon = f"{r.ground_truth.lon:.6f}" if r.ground_truth else ""
            writer.writerow([r.row_id, r.text, r.word_count, r.fingerprint, lat, lon])


def split_corpus(rows: list[GrantAbstract], cfg: SplitConfig = SplitConfig()) -> tuple[EvalSet, EvalSet]:
    """Deterministic dev/test partition of the corpus.

    row_ids are sorted lexicographically, shuffled with
    ``random.Random(seed)`` (Fisher-Yates), and the first
    floor(n * dev_fraction) ids form the dev set. Membership depends
    only on the id set and the seed.
    """
    if not rows:
        raise ValueError("cannot split an empty corpus")
    ids = sorted(r.row_id for r in rows)
    rng = random.Random(cfg.seed)
    rng.shuffle(ids)
    n_dev = math.floor(len(ids) * cfg.dev_fraction)
    dev = EvalSet("dev", tuple(sorted(ids[:n_dev])))
    test = EvalSet("test", tuple(sorted(ids[n_dev:])))
    return dev, test


def sample_fixed(evalset: EvalSet, n: int, seed: int, name: str | None = None) -> EvalSet:
    """Seeded sample of ``n`` members without replacement, sorted by row_id."""
    if n > len(evalset.members):
        raise SampleTooLarge(f"n={n} exceeds |{evalset.name}|={len(evalset.members)}")
    rng = random.Random(seed)
    picked = rng.sample(sorted(evalset.members), n)
    return EvalSet(name or f"{evalset.name}-n{n}-s{seed}", tuple(sorted(picked)))


# Leading all-caps name segment before the first comma: uppercase words,
# initials, and ampersands. Abstracts open with the patentee in capitals.
_PATENTEE_RE = re.compile(r"^(\s*)((?:[A-Z][A-Z'.\-]*|&)(?:\s+(?:[A-Z][A-Z'.\-]*|&))*)\s*,")


def redact_patentee(text: str, extra_names: list[str] | tuple[str, ...] = ()) -> str:
    """Mask patentee names with ``[NAME]``.

    The leading all-caps segment before the first comma is replaced;
    every entry of ``extra_names`` is additionally replaced
    case-sensitively. Idempotent.
    """
    m = _PATENTEE_RE.match(text)
    if m:
        text = f"{m.group(1)}[NAME],{text[m.end():]}"
    for name in extra_names:
        if name:
            text = text.replace(name, "[NAME]")
    return text
