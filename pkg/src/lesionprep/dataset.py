"""Dataset ingestion, deterministic stratified train/val splitting, and
manifest I/O.

Expected directory layout: root/{train,test}/{benign,malignant}/<image files>.
Manifests are CSV lines `path,label,split` sorted by path, so reruns with the
same seed are byte-identical.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

LABELS = ("benign", "malignant")
SPLITS = ("train", "val", "test")
_TOP_DIRS = ("train", "test")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    split: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class SplitConfig:
    seed: int
    train_fraction: float = 0.75

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")


def _splitmix64(state: int):
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


class Xoshiro256StarStar:
    """xoshiro256** seeded from a SplitMix64 stream of the 64-bit seed.

    Fixed, documented generator so split assignments are reproducible across
    platforms and library versions.
    """

    def __init__(self, seed: int):
        sm = _splitmix64(seed & _MASK64)
        self._s = [next(sm) for _ in range(4)]

    def next_u64(self) -> int:
        s = self._s
        result = (((s[1] * 5) & _MASK64) << 7 | ((s[1] * 5) & _MASK64) >> 57) & _MASK64
        result = (result * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = ((s[3] << 45) | (s[3] >> 19)) & _MASK64
        return result

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _MASK64 - (_MASK64 + 1) % n
        while True:
            r = self.next_u64()
            if r <= limit:
                return r % n


def _shuffle(items: list, rng: Xoshiro256StarStar) -> None:
    """In-place Fisher-Yates."""
    for i in range(len(items) - 1, 0, -1):
        j = rng.below(i + 1)
        items[i], items[j] = items[j], items[i]


def scan_dataset(root: str | Path) -> list[ManifestEntry]:
    """One entry per image file under root/{train,test}/{benign,malignant},
    in lexicographic path order. Paths are stored relative to root."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    entries = []
    for top in sorted(p for p in root.iterdir() if p.is_dir()):
        if top.name not in _TOP_DIRS:
            continue
        for class_dir in sorted(p for p in top.iterdir() if p.is_dir()):
            if class_dir.name not in LABELS:
                raise ValueError(f"unknown class directory {class_dir}")
            for f in sorted(class_dir.rglob("*")):
                if f.is_file() and not f.name.startswith("."):
                    entries.append(
                        ManifestEntry(
                            path=f.relative_to(root).as_posix(),
                            label=class_dir.name,
                            split=top.name,
                        )
                    )
    if not entries:
        raise ValueError(f"no images found under {root}")
    entries.sort(key=lambda e: e.path)
    return entries


def split_train_val(entries: Sequence[ManifestEntry], config: SplitConfig) -> list[ManifestEntry]:
    """Reassign split=train entries to train/val, stratified per class.

    Per class the entries are shuffled (xoshiro256**, Fisher-Yates) and the
    first floor(n * train_fraction) stay train; the remainder become val.
    Deterministic for a given seed; output is sorted by path.
    """
    if not entries:
        raise ValueError("no entries to split")
    for e in entries:
        if e.split != "train":
            raise ValueError(f"entry {e.path!r} has split {e.split!r}, expected train")
    rng = Xoshiro256StarStar(config.seed)
    out = []
    for label in LABELS:
        group = sorted((e for e in entries if e.label == label), key=lambda e: e.path)
        if not group:
            continue
        _shuffle(group, rng)
        n_train = int(len(group) * config.train_fraction)
        for i, e in enumerate(group):
            out.append(
                ManifestEntry(e.path, e.label, "train" if i < n_train else "val")
            )
    out.sort(key=lambda e: e.path)
    return out


MANIFEST_HEADER = ["path", "label", "split"]


def format_manifest(entries: Iterable[ManifestEntry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_HEADER)
    for e in sorted(entries, key=lambda x: x.path):
        writer.writerow([e.path, e.label, e.split])
    return buf.getvalue()


def parse_manifest(text: str) -> list[ManifestEntry]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != MANIFEST_HEADER:
        raise ValueError(f"bad manifest header {header!r}")
    entries = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ValueError(f"line {lineno}: expected 3 fields, got {len(row)}")
        path, label, split = row
        if path in seen:
            raise ValueError(f"line {lineno}: duplicate path {path!r}")
        seen.add(path)
        entries.append(ManifestEntry(path, label, split))
    return entries


def write_manifest(entries: Iterable[ManifestEntry], path: str | Path) -> None:
    Path(path).write_text(format_manifest(entries))


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    return parse_manifest(Path(path).read_text())
