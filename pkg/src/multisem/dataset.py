"""Two-level-label datasets: COCO ingestion, filtering, synthetic generation, manifests.

An image is kept only when all of its non-public fine labels agree on a
single coarse category; that category becomes the image-level label.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from multisem.errors import ConfigError, ParseError, UnknownLabel
from multisem.hierarchy import LabelHierarchy, Resolution, coarse_of

SPLITS = ("train", "test")


@dataclass(frozen=True)
class ImageAnnotationView:
    image_id: int
    fine_names: frozenset


@dataclass(frozen=True)
class SampleRecord:
    id: str
    split: str
    fine: frozenset
    coarse: str

    def to_dict(self):
        return {"id": self.id, "split": self.split, "fine": sorted(self.fine), "coarse": self.coarse}


@dataclass
class BuildStats:
    kept: int = 0
    excluded_mixed: int = 0
    excluded_public_only: int = 0
    excluded_empty: int = 0
    per_coarse: dict = field(default_factory=dict)

    @property
    def total(self):
        return self.kept + self.excluded_mixed + self.excluded_public_only + self.excluded_empty

    def merge(self, other):
        per = Counter(self.per_coarse)
        per.update(other.per_coarse)
        return BuildStats(
            self.kept + other.kept,
            self.excluded_mixed + other.excluded_mixed,
            self.excluded_public_only + other.excluded_public_only,
            self.excluded_empty + other.excluded_empty,
            dict(per),
        )

    def to_dict(self):
        return {
            "kept": self.kept,
            "excluded_mixed": self.excluded_mixed,
            "excluded_public_only": self.excluded_public_only,
            "excluded_empty": self.excluded_empty,
            "total": self.total,
            "per_coarse": dict(sorted(self.per_coarse.items())),
        }


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int = 2000
    t_fine: int = 12
    m_coarse: int = 4
    max_fines_per_image: int = 3
    feature_dim: int = 4
    noise_std: float = 0.1
    seed: int = 0
    public_prob: float = 0.3
    test_fraction: float = 0.2

    def check(self):
        if self.n_samples < 0:
            raise ConfigError("n_samples must be >= 0")
        if not self.t_fine >= self.m_coarse >= 1:
            raise ConfigError("need t_fine >= m_coarse >= 1")
        if not 1 <= self.max_fines_per_image <= self.t_fine:
            raise ConfigError("need 1 <= max_fines_per_image <= t_fine")
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        if not (self.noise_std >= 0 and np.isfinite(self.noise_std)):
            raise ConfigError("noise_std must be finite and >= 0")
        if not 0 <= self.public_prob <= 1:
            raise ConfigError("public_prob must lie in [0, 1]")
        if not 0 <= self.test_fraction <= 1:
            raise ConfigError("test_fraction must lie in [0, 1]")


def parse_coco_instances(data, h: LabelHierarchy, source=None):
    """One view per image of a COCO "instances" document.

    ``data`` may be bytes, str, or an already-decoded dict. Category names
    are resolved through the hierarchy's alias table.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}", source=source) from None
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON: {exc.msg}", line=exc.lineno, source=source) from None
    if not isinstance(data, dict):
        raise ParseError("top-level JSON value must be an object", source=source)
    for key in ("images", "annotations", "categories"):
        if not isinstance(data.get(key), list):
            raise ParseError(f"missing required array {key!r}", source=source)

    try:
        raw_names = {c["id"]: c["name"] for c in data["categories"]}
        image_ids = [img["id"] for img in data["images"]]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"category/image entry missing field {exc}", source=source) from None
    cat_names = {cid: h.resolve(name) for cid, name in raw_names.items()}

    present = {i: set() for i in image_ids}
    for ann in data["annotations"]:
        try:
            img, cat = ann["image_id"], ann["category_id"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"annotation missing field {exc}", source=source) from None
        if cat not in cat_names:
            raise UnknownLabel(f"category_id {cat}")
        if img in present:
            present[img].add(cat_names[cat])
    return [ImageAnnotationView(i, frozenset(present[i])) for i in image_ids]


def _record_id(image_id):
    if isinstance(image_id, int):
        return f"{image_id:012d}"
    return str(image_id)


def filter_and_label(views, h: LabelHierarchy, split: str):
    if split not in SPLITS:
        raise ConfigError(f"split must be one of {SPLITS}, got {split!r}")
    records = []
    stats = BuildStats()
    per = Counter()
    for view in views:
        res = coarse_of(h, view.fine_names)
        if res.outcome is Resolution.UNIQUE:
            records.append(SampleRecord(_record_id(view.image_id), split, frozenset(view.fine_names), res.coarse))
            per[res.coarse] += 1
            stats.kept += 1
        elif res.outcome is Resolution.MIXED:
            stats.excluded_mixed += 1
        elif res.outcome is Resolution.PUBLIC_ONLY:
            stats.excluded_public_only += 1
        else:
            stats.excluded_empty += 1
    stats.per_coarse = dict(per)
    return records, stats


def synth_hierarchy(cfg: SynthConfig) -> LabelHierarchy:
    """Random valid hierarchy over ``t_fine`` fine and ``m_coarse`` coarse labels.

    Fine label 0 is public whenever there are more fine labels than coarse
    ones; every coarse label receives at least one non-public fine label.
    """
    cfg.check()
    rng = np.random.default_rng([cfg.seed, 0])
    fine = [f"f{i:02d}" for i in range(cfg.t_fine)]
    coarse = [f"c{j}" for j in range(cfg.m_coarse)]
    has_public = cfg.t_fine > cfg.m_coarse
    mapped = fine[1:] if has_public else fine
    owners = np.concatenate([np.arange(cfg.m_coarse), rng.integers(0, cfg.m_coarse, len(mapped) - cfg.m_coarse)])
    owners = rng.permutation(owners)
    mapping = {f: coarse[int(o)] for f, o in zip(mapped, owners)}
    return LabelHierarchy(fine, coarse, mapping, {fine[0]} if has_public else set())


def synth_dataset(cfg: SynthConfig):
    """Deterministic synthetic dataset.

    Returns ``(records, features, hierarchy)``. Each feature vector is the sum
    of fixed per-fine-label signature vectors plus N(0, noise_std) noise.
    """
    h = synth_hierarchy(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    signatures = rng.standard_normal((cfg.t_fine, cfg.feature_dim))
    by_coarse = {c: [f for f in h.fine_labels if h.fine_to_coarse.get(f) == c] for c in h.coarse_labels}
    public = sorted(h.public_fines)

    records = []
    features = np.empty((cfg.n_samples, cfg.feature_dim))
    for i in range(cfg.n_samples):
        coarse = h.coarse_labels[rng.integers(cfg.m_coarse)]
        pool = by_coarse[coarse]
        k = int(rng.integers(1, min(cfg.max_fines_per_image, len(pool)) + 1))
        chosen = {pool[j] for j in rng.choice(len(pool), size=k, replace=False)}
        if public and k < cfg.max_fines_per_image and rng.random() < cfg.public_prob:
            chosen.add(public[0])
        split = "test" if rng.random() < cfg.test_fraction else "train"
        idx = sorted(h.fine_index(f) for f in chosen)
        features[i] = signatures[idx].sum(axis=0) + cfg.noise_std * rng.standard_normal(cfg.feature_dim)
        records.append(SampleRecord(f"s{i:06d}", split, frozenset(chosen), coarse))
    return records, features, h


def check_record(record: SampleRecord, h: LabelHierarchy):
    """Raise ValueError if ``record`` violates the SampleRecord invariants."""
    if record.split not in SPLITS:
        raise ValueError(f"bad split {record.split!r}")
    if not record.fine:
        raise ValueError("empty fine set")
    if record.coarse not in h.coarse_labels:
        raise UnknownLabel(record.coarse)
    res = coarse_of(h, record.fine)
    if res.coarse != record.coarse:
        raise ValueError(f"fine set resolves to {res.outcome.value} {sorted(res.labels)}, not {record.coarse!r}")


def write_manifest(records) -> bytes:
    lines = [json.dumps(r.to_dict(), ensure_ascii=False, separators=(",", ":")) for r in records]
    return "".join(line + "\n" for line in lines).encode("utf-8")


def read_manifest(data, h: LabelHierarchy | None = None, source=None):
    """Parse manifest JSONL. With ``h`` given, every record is validated against it."""
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    records = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj["fine"], list):
                raise TypeError("fine must be a list")
            rec = SampleRecord(str(obj["id"]), obj["split"], frozenset(obj["fine"]), obj["coarse"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"bad manifest record ({exc})", line=lineno, source=source) from None
        if h is not None:
            try:
                check_record(rec, h)
            except (ValueError, KeyError) as exc:
                raise ParseError(f"invalid record {rec.id!r}: {exc}", line=lineno, source=source) from None
        records.append(rec)
    return records


def write_features(ids, features) -> bytes:
    out = []
    for sid, x in zip(ids, np.asarray(features, dtype=float)):
        out.append(json.dumps({"id": sid, "x": [float(v) for v in x]}, separators=(",", ":")) + "\n")
    return "".join(out).encode("utf-8")


def read_features(data, source=None):
    """Returns ``(ids, matrix)``."""
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    ids, rows = [], []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            ids.append(str(obj["id"]))
            rows.append([float(v) for v in obj["x"]])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad feature record ({exc})", line=lineno, source=source) from None
    if len({len(r) for r in rows}) > 1:
        raise ParseError("feature vectors have inconsistent lengths", source=source)
    return ids, np.array(rows, dtype=float).reshape(len(rows), -1)
