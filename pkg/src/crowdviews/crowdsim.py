"""Synthetic colored-digit corpus and simulated annotators.

Items are small RGB images of a single digit glyph drawn in one of ten
wheel colors on black, with per-item position jitter and pixel noise,
all reproducible from (manifest seed, item id). Simulated workers judge
triplets from the ground-truth labels (never the pixels) under three
decision rules; a rule with no unique answer yields an invalid query,
which the sampler discards.

File formats (both consumed elsewhere in the package):
  manifest  '# key value' header lines, then one record per line:
            item_id, digit, color index, split  (tab-separated).
  triplets  one record per line: worker_id, i, j, k (tab-separated),
            meaning the worker chose pair (i, j) as most similar.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import SimulationError
from .objective import TripletAnnotation

COLOR_NAMES = (
    "Red",
    "Orange",
    "Yellow",
    "Yellow-green",
    "Green",
    "Blue-green",
    "Blue",
    "Blue-purple",
    "Purple",
    "Red-purple",
)
NUM_COLORS = len(COLOR_NAMES)

COLOR_RGB = np.array(
    [
        (1.0, 0.0, 0.0),
        (1.0, 0.5, 0.0),
        (1.0, 1.0, 0.0),
        (0.5, 1.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, 0.75, 0.75),
        (0.0, 0.0, 1.0),
        (0.29, 0.0, 0.51),
        (0.5, 0.0, 0.5),
        (0.78, 0.0, 0.38),
    ]
)

# 5x7 digit glyphs, one string row per pixel row.
_GLYPHS = {
    0: ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    1: ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    2: ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    3: ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    4: ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    5: ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    6: ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    7: ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    8: ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    9: ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}
GLYPH_H, GLYPH_W = 7, 5


class ItemLabel(NamedTuple):
    digit: int
    color: int


@dataclass(frozen=True)
class ItemRecord:
    item_id: str
    digit: int
    color: int
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    seed: int
    height: int
    width: int
    noise_sigma: float
    jitter: int
    glyph_scale: int
    records: tuple

    def split(self, tag: str) -> tuple:
        return tuple(r for r in self.records if r.split == tag)

    def label_of(self, item_id: str) -> ItemLabel:
        try:
            return self._labels[item_id]
        except AttributeError:
            object.__setattr__(
                self, "_labels", {r.item_id: ItemLabel(r.digit, r.color) for r in self.records}
            )
            return self._labels[item_id]


def color_distance(a: int, b: int) -> int:
    """Circular distance on the 10-color wheel."""
    d = abs(a - b)
    return min(d, NUM_COLORS - d)


def digit_distance(a: int, b: int) -> int:
    return abs(a - b)


@dataclass(frozen=True)
class SimWorkerSpec:
    """Decision rule of a simulated worker.

    kind 'exact-match' answers iff exactly one pair matches on `view`;
    'distance' answers the pair with the strictly smallest `view`
    distance; 'weighted' mixes both label distances with the given
    weights. No unique answer means an invalid query (None).
    """

    kind: str
    view: Optional[str] = None
    color_weight: float = 0.0
    number_weight: float = 0.0

    def __post_init__(self):
        if self.kind not in ("exact-match", "distance", "weighted"):
            raise ValueError(f"unknown worker kind {self.kind!r}")
        if self.kind in ("exact-match", "distance"):
            if self.view not in ("color", "number"):
                raise ValueError(f"worker kind {self.kind!r} needs view color|number")
        else:
            if self.color_weight < 0 or self.number_weight < 0:
                raise ValueError("weights must be nonnegative")
            if abs(self.color_weight + self.number_weight - 1.0) > 1e-9:
                raise ValueError("weights must sum to 1")


_PAIRS = ((0, 1), (0, 2), (1, 2))
_TIE_EPS = 1e-9

# sampling gives up when fewer than VALID_RATE_FLOOR of MIN_DRAWS draws
# produced a valid query
MIN_DRAWS = 1_000_000
VALID_RATE_FLOOR = 0.001


def _unique_argmin(values) -> Optional[int]:
    order = sorted(range(3), key=lambda i: values[i])
    if values[order[1]] - values[order[0]] <= _TIE_EPS:
        return None
    return order[0]


def simulate_answer(spec: SimWorkerSpec, labels) -> Optional[tuple]:
    """Pair chosen by the rule, as 0-based slots, or None for an invalid query."""
    la, lb, lc = labels
    triple = (la, lb, lc)
    if spec.kind == "exact-match":
        attr = 1 if spec.view == "color" else 0
        matches = [i for i, (x, y) in enumerate(_PAIRS) if triple[x][attr] == triple[y][attr]]
        return _PAIRS[matches[0]] if len(matches) == 1 else None
    if spec.kind == "distance":
        if spec.view == "color":
            dists = [color_distance(triple[x].color, triple[y].color) for x, y in _PAIRS]
        else:
            dists = [digit_distance(triple[x].digit, triple[y].digit) for x, y in _PAIRS]
    else:
        dists = [
            spec.color_weight * color_distance(triple[x].color, triple[y].color)
            + spec.number_weight * digit_distance(triple[x].digit, triple[y].digit)
            for x, y in _PAIRS
        ]
    win = _unique_argmin(dists)
    return _PAIRS[win] if win is not None else None


def setting_workers(setting: int) -> dict:
    """The simulated worker rosters of the three simulation settings."""
    if setting == 1:
        return {
            "w1": SimWorkerSpec("exact-match", view="color"),
            "w2": SimWorkerSpec("exact-match", view="number"),
        }
    if setting == 2:
        return {
            "w1": SimWorkerSpec("distance", view="color"),
            "w2": SimWorkerSpec("distance", view="number"),
        }
    if setting == 3:
        return {
            "w1": SimWorkerSpec("distance", view="color"),
            "w2": SimWorkerSpec("weighted", color_weight=0.7, number_weight=0.3),
            "w3": SimWorkerSpec("weighted", color_weight=0.3, number_weight=0.7),
            "w4": SimWorkerSpec("distance", view="number"),
        }
    raise ValueError(f"setting must be 1, 2 or 3, got {setting}")


def generate_dataset(
    seed: int,
    items_per_category: int,
    split: str = "train",
    height: int = 16,
    width: int = 16,
) -> DatasetManifest:
    """Manifest for one split: every (digit, color) pair times
    `items_per_category`, ids '{split}-{index:04d}' in category order."""
    if items_per_category < 1:
        raise ValueError("items_per_category must be >= 1")
    records = []
    idx = 0
    for digit in range(10):
        for color in range(NUM_COLORS):
            for _ in range(items_per_category):
                records.append(ItemRecord(f"{split}-{idx:04d}", digit, color, split))
                idx += 1
    return DatasetManifest(seed, height, width, 0.02, 1, 2, tuple(records))


def generate_corpus(seed: int, items_per_category: int, height: int = 16, width: int = 16) -> DatasetManifest:
    """Train and test splits in one manifest (what the CLI writes)."""
    train = generate_dataset(seed, items_per_category, "train", height, width)
    test = generate_dataset(seed, items_per_category, "test", height, width)
    return DatasetManifest(seed, height, width, 0.02, 1, 2, train.records + test.records)


def render_item(manifest: DatasetManifest, record: ItemRecord) -> np.ndarray:
    """Rasterize one item; deterministic in (manifest.seed, item_id).

    The 5x7 glyph bitmap is drawn at `glyph_scale` (each bit becomes a
    scale x scale block) and centered. The per-item stream is PCG64
    seeded with (seed, crc32(item_id)); draw order is x jitter, y
    jitter, then the noise field.
    """
    s = manifest.glyph_scale
    if manifest.height < GLYPH_H * s + 2 * manifest.jitter or manifest.width < GLYPH_W * s + 2 * manifest.jitter:
        raise ValueError("image too small for glyph plus jitter")
    rng = np.random.default_rng([manifest.seed, zlib.crc32(record.item_id.encode())])
    jx = int(rng.integers(-manifest.jitter, manifest.jitter + 1))
    jy = int(rng.integers(-manifest.jitter, manifest.jitter + 1))
    img = np.zeros((manifest.height, manifest.width, 3))
    top = (manifest.height - GLYPH_H * s) // 2 + jy
    left = (manifest.width - GLYPH_W * s) // 2 + jx
    rgb = COLOR_RGB[record.color]
    for r, row in enumerate(_GLYPHS[record.digit]):
        for c, bit in enumerate(row):
            if bit == "1":
                img[top + r * s : top + (r + 1) * s, left + c * s : left + (c + 1) * s] = rgb
    img += rng.normal(0.0, manifest.noise_sigma, img.shape)
    return np.clip(img, 0.0, 1.0)


def render_items(manifest: DatasetManifest, split: Optional[str] = None) -> dict:
    records = manifest.records if split is None else manifest.split(split)
    return {r.item_id: render_item(manifest, r) for r in records}


def sample_triplets(
    manifest: DatasetManifest,
    workers: dict,
    n_per_worker: int,
    seed: int,
    split: str = "train",
) -> list:
    """Draw uniform random distinct triples per worker, keep the valid
    answers, reorder each as (chosen pair, remainder).

    Aborts with a diagnostic if fewer than 0.1% of a million draws for
    one worker were valid queries.
    """
    records = manifest.split(split)
    if not records:
        raise ValueError(f"manifest has no items in split {split!r}")
    ids = [r.item_id for r in records]
    labels = [ItemLabel(r.digit, r.color) for r in records]
    out = []
    for w_idx, (worker_id, spec) in enumerate(workers.items()):
        rng = np.random.default_rng([seed, w_idx])
        kept = 0
        draws = 0
        while kept < n_per_worker:
            draws += 1
            t = rng.choice(len(ids), size=3, replace=False)
            ans = simulate_answer(spec, (labels[t[0]], labels[t[1]], labels[t[2]]))
            if ans is None:
                if draws >= MIN_DRAWS and kept < VALID_RATE_FLOOR * draws:
                    raise SimulationError(
                        f"worker {worker_id!r}: only {kept} valid answers in {draws} draws"
                    )
                continue
            a, b = ans
            c = 3 - a - b
            out.append(
                TripletAnnotation(worker_id, ids[t[a]], ids[t[b]], ids[t[c]])
            )
            kept += 1
    return out


# --- file formats ---


def save_manifest(manifest: DatasetManifest, path) -> None:
    lines = ["# crowdviews-manifest v1"]
    for key in ("seed", "height", "width", "noise_sigma", "jitter", "glyph_scale"):
        lines.append(f"# {key} {getattr(manifest, key)}")
    for r in manifest.records:
        lines.append(f"{r.item_id}\t{r.digit}\t{r.color}\t{r.split}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_manifest(path) -> DatasetManifest:
    meta = {}
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2:
                    meta[parts[0]] = parts[1]
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            records.append(
                ItemRecord(fields[0], int(fields[1]), int(fields[2]), fields[3])
            )
    try:
        return DatasetManifest(
            seed=int(meta["seed"]),
            height=int(meta["height"]),
            width=int(meta["width"]),
            noise_sigma=float(meta["noise_sigma"]),
            jitter=int(meta["jitter"]),
            glyph_scale=int(meta["glyph_scale"]),
            records=tuple(records),
        )
    except KeyError as e:
        raise ValueError(f"{path}: missing manifest header {e}") from e


def write_triplets(triplets, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triplets:
            fh.write(format_triplet_line(t) + "\n")


def format_triplet_line(t: TripletAnnotation) -> str:
    return f"{t.worker}\t{t.i}\t{t.j}\t{t.k}"


def read_triplets(path) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            out.append(TripletAnnotation(*fields))
    return out
