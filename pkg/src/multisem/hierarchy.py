"""Two-level label space: fine-grained semantics grouped under coarse categories.

A fine label either maps to exactly one coarse category or is *public*
(allowed in any image, casting no vote for a category). The COCO-derived
default keeps the 80 COCO object categories as fine labels, drops
``person`` from the coarse level and renames the remaining eleven
supercategories.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from multisem.errors import ParseError, UnknownLabel

# COCO-2017 supercategory -> coarse label. ``person`` has no entry: it is public.
SUPERCATEGORY_RENAMES = {
    "vehicle": "transport",
    "outdoor": "outdoor sign",
    "animal": "animal",
    "accessory": "accessory",
    "sports": "sports",
    "kitchen": "dining tools",
    "furniture": "furniture decoration",
    "indoor": "indoor supply",
    "electronic": "electronic",
    "appliance": "appliance",
    "food": "food",
}

COARSE_ORDER = (
    "transport",
    "outdoor sign",
    "animal",
    "accessory",
    "sports",
    "dining tools",
    "furniture decoration",
    "indoor supply",
    "electronic",
    "appliance",
    "food",
)

# (category name, supercategory) in COCO-2017 category-id order.
COCO_CATEGORIES = (
    ("person", "person"),
    ("bicycle", "vehicle"),
    ("car", "vehicle"),
    ("motorcycle", "vehicle"),
    ("airplane", "vehicle"),
    ("bus", "vehicle"),
    ("train", "vehicle"),
    ("truck", "vehicle"),
    ("boat", "vehicle"),
    ("traffic light", "outdoor"),
    ("fire hydrant", "outdoor"),
    ("stop sign", "outdoor"),
    ("parking meter", "outdoor"),
    ("bench", "outdoor"),
    ("bird", "animal"),
    ("cat", "animal"),
    ("dog", "animal"),
    ("horse", "animal"),
    ("sheep", "animal"),
    ("cow", "animal"),
    ("elephant", "animal"),
    ("bear", "animal"),
    ("zebra", "animal"),
    ("giraffe", "animal"),
    ("backpack", "accessory"),
    ("umbrella", "accessory"),
    ("handbag", "accessory"),
    ("tie", "accessory"),
    ("suitcase", "accessory"),
    ("frisbee", "sports"),
    ("skis", "sports"),
    ("snowboard", "sports"),
    ("sports ball", "sports"),
    ("kite", "sports"),
    ("baseball bat", "sports"),
    ("baseball glove", "sports"),
    ("skateboard", "sports"),
    ("surfboard", "sports"),
    ("tennis racket", "sports"),
    ("bottle", "kitchen"),
    ("wine glass", "kitchen"),
    ("cup", "kitchen"),
    ("fork", "kitchen"),
    ("knife", "kitchen"),
    ("spoon", "kitchen"),
    ("bowl", "kitchen"),
    ("banana", "food"),
    ("apple", "food"),
    ("sandwich", "food"),
    ("orange", "food"),
    ("broccoli", "food"),
    ("carrot", "food"),
    ("hot dog", "food"),
    ("pizza", "food"),
    ("donut", "food"),
    ("cake", "food"),
    ("chair", "furniture"),
    ("couch", "furniture"),
    ("potted plant", "furniture"),
    ("bed", "furniture"),
    ("dining table", "furniture"),
    ("toilet", "furniture"),
    ("tv", "electronic"),
    ("laptop", "electronic"),
    ("mouse", "electronic"),
    ("remote", "electronic"),
    ("keyboard", "electronic"),
    ("cell phone", "electronic"),
    ("microwave", "appliance"),
    ("oven", "appliance"),
    ("toaster", "appliance"),
    ("sink", "appliance"),
    ("refrigerator", "appliance"),
    ("book", "indoor"),
    ("clock", "indoor"),
    ("vase", "indoor"),
    ("scissors", "indoor"),
    ("teddy bear", "indoor"),
    ("hair drier", "indoor"),
    ("toothbrush", "indoor"),
)

# Prose spellings -> canonical COCO-2017 names.
ALIASES = {
    "motorbike": "motorcycle",
    "suit": "suitcase",
    "kit": "kite",
    "ski": "skis",
    "hotdog": "hot dog",
    "sofa": "couch",
    "television": "tv",
    "cellphone": "cell phone",
    "hairdryer": "hair drier",
}


class Resolution(enum.Enum):
    UNIQUE = "unique"
    MIXED = "mixed"
    PUBLIC_ONLY = "public_only"
    EMPTY = "empty"


@dataclass(frozen=True)
class CoarseResolution:
    outcome: Resolution
    labels: frozenset = frozenset()

    @property
    def coarse(self):
        """The coarse label for a UNIQUE outcome, otherwise None."""
        if self.outcome is Resolution.UNIQUE:
            return next(iter(self.labels))
        return None

    @classmethod
    def unique(cls, label):
        return cls(Resolution.UNIQUE, frozenset([label]))

    @classmethod
    def mixed(cls, labels):
        return cls(Resolution.MIXED, frozenset(labels))


@dataclass(frozen=True)
class LabelHierarchy:
    fine_labels: tuple
    coarse_labels: tuple
    fine_to_coarse: Mapping[str, str]
    public_fines: frozenset
    aliases: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "fine_labels", tuple(self.fine_labels))
        object.__setattr__(self, "coarse_labels", tuple(self.coarse_labels))
        object.__setattr__(self, "fine_to_coarse", dict(self.fine_to_coarse))
        object.__setattr__(self, "public_fines", frozenset(self.public_fines))
        object.__setattr__(self, "aliases", dict(self.aliases))
        object.__setattr__(self, "_fine_index", {n: i for i, n in enumerate(self.fine_labels)})
        object.__setattr__(self, "_coarse_index", {n: i for i, n in enumerate(self.coarse_labels)})

    @property
    def n_fine(self):
        return len(self.fine_labels)

    @property
    def n_coarse(self):
        return len(self.coarse_labels)

    def resolve(self, name):
        """Canonical fine-label name for ``name`` (alias-aware)."""
        if name in self._fine_index:
            return name
        canonical = self.aliases.get(name)
        if canonical is not None and canonical in self._fine_index:
            return canonical
        raise UnknownLabel(name)

    def fine_index(self, name):
        return self._fine_index[self.resolve(name)]

    def coarse_index(self, name):
        try:
            return self._coarse_index[name]
        except KeyError:
            raise UnknownLabel(name) from None

    def fine_indices(self, names):
        return frozenset(self.fine_index(n) for n in names)

    def to_dict(self):
        return {
            "fine": list(self.fine_labels),
            "coarse": list(self.coarse_labels),
            "map": {f: self.fine_to_coarse[f] for f in self.fine_labels if f in self.fine_to_coarse},
            "public": sorted(self.public_fines),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data, aliases=None):
        try:
            fine, coarse, mapping = data["fine"], data["coarse"], data["map"]
            public = data.get("public", [])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"hierarchy JSON missing key {exc}") from None
        if not (isinstance(fine, list) and isinstance(coarse, list) and isinstance(mapping, dict)):
            raise ParseError("hierarchy JSON has wrong field types")
        return cls(fine, coarse, mapping, public, aliases or {})

    @classmethod
    def from_json(cls, text, aliases=None):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed hierarchy JSON: {exc.msg}", line=exc.lineno) from None
        return cls.from_dict(data, aliases)


def default_coco_hierarchy():
    """80 COCO fine labels, 11 renamed coarse categories, ``person`` public."""
    fine = [name for name, _ in COCO_CATEGORIES]
    mapping = {
        name: SUPERCATEGORY_RENAMES[sup] for name, sup in COCO_CATEGORIES if sup != "person"
    }
    return LabelHierarchy(fine, COARSE_ORDER, mapping, {"person"}, ALIASES)


def load_hierarchy(source):
    """``"builtin"`` or a path to a hierarchy JSON file."""
    if source in (None, "builtin"):
        return default_coco_hierarchy()
    with open(source, encoding="utf-8") as fh:
        return LabelHierarchy.from_json(fh.read(), aliases=ALIASES)


def coarse_of(h: LabelHierarchy, fines: Iterable[str]) -> CoarseResolution:
    names = {h.resolve(f) for f in fines}
    if not names:
        return CoarseResolution(Resolution.EMPTY)
    votes = {h.fine_to_coarse[f] for f in names if f not in h.public_fines}
    if not votes:
        return CoarseResolution(Resolution.PUBLIC_ONLY)
    if len(votes) == 1:
        return CoarseResolution.unique(votes.pop())
    return CoarseResolution.mixed(votes)


def validate(h: LabelHierarchy) -> list[str]:
    """Violated invariants as messages; an empty list means the hierarchy is valid."""
    problems = []
    if len(set(h.fine_labels)) != len(h.fine_labels):
        problems.append("duplicate fine label")
    if len(set(h.coarse_labels)) != len(h.coarse_labels):
        problems.append("duplicate coarse label")
    fine_set = set(h.fine_labels)
    mapped = set(h.fine_to_coarse)
    if h.public_fines & mapped:
        problems.append("public/mapped overlap")
    unassigned = fine_set - mapped - h.public_fines
    if unassigned:
        problems.append(f"fine label neither public nor mapped: {sorted(unassigned)}")
    stray = (mapped | h.public_fines) - fine_set
    if stray:
        problems.append(f"mapped or public label not in fine list: {sorted(stray)}")
    bad_targets = {c for c in h.fine_to_coarse.values() if c not in set(h.coarse_labels)}
    if bad_targets:
        problems.append(f"map target not a coarse label: {sorted(bad_targets)}")
    if h.public_fines & set(h.coarse_labels):
        problems.append("public fine label reused as coarse label")
    return problems
