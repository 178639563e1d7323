"""Human-understandable token properties and the ordered property space.

Each token gets its segment plus, per conjunction group, an identifier like
``Question|NNP`` or ``Hypothesis|NN|Overlapping``.  Tags come from a merged
Penn Treebank universe (25 tags by default); comparative/superlative and
inflected forms collapse onto a head tag so the feature space stays small.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .types import AnnotatedInstance, SEGMENTS_BY_TASK, Segment, Task

UNKNOWN_TAG = "Unknown"

# Alphabetical; 25 entries.  The conjunction ordering follows this list.
DEFAULT_MERGED_TAGS: tuple[str, ...] = (
    "-LRB-", "-RRB-", "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "LS", "MD",
    "NN", "NNP", "PDT", "POS", "PRP", "PRP$", "PUNCT", "RB", "RP", "SYM",
    "TO", "UH", "VB", "W",
)

DEFAULT_MERGE_MAP: dict[str, str] = {
    "JJ": "JJ", "JJR": "JJ", "JJS": "JJ",
    "NN": "NN", "NNS": "NN",
    "NNP": "NNP", "NNPS": "NNP",
    "RB": "RB", "RBR": "RB", "RBS": "RB",
    "VB": "VB", "VBD": "VB", "VBG": "VB", "VBN": "VB", "VBP": "VB", "VBZ": "VB",
    "WDT": "W", "WP": "W", "WP$": "W", "WRB": "W",
    ".": "PUNCT", ",": "PUNCT", ":": "PUNCT", "``": "PUNCT", "''": "PUNCT",
    "#": "PUNCT", "$": "PUNCT", "HYPH": "PUNCT", "NFP": "PUNCT",
}


class PropertyGroup(str, Enum):
    SEGMENT = "segment"
    SEGMENT_TAG = "segment_tag"
    SEGMENT_TAG_OVERLAP = "segment_tag_overlap"


class OverlapFlag(str, Enum):
    OVERLAPPING = "Overlapping"
    NON_OVERLAPPING = "NonOverlapping"


@dataclass(frozen=True)
class TagUniverse:
    merged_tags: tuple[str, ...]
    merge_map: dict[str, str]

    def __post_init__(self) -> None:
        for raw, merged in self.merge_map.items():
            if merged not in self.merged_tags:
                raise ValueError(f"merge rule {raw}->{merged} targets a tag outside the universe")


def default_universe() -> TagUniverse:
    return TagUniverse(merged_tags=DEFAULT_MERGED_TAGS, merge_map=dict(DEFAULT_MERGE_MAP))


def load_universe(path: str | Path) -> TagUniverse:
    """Read a universe file: one merged tag per line, merge rules as RAW->MERGED."""
    tags: list[str] = []
    rules: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "->" in line:
            raw, merged = (part.strip() for part in line.split("->", 1))
            rules[raw] = merged
        else:
            tags.append(line)
    return TagUniverse(merged_tags=tuple(tags), merge_map=rules)


def merge_tag(raw: str, universe: TagUniverse) -> str:
    """Map a raw Penn tag onto the merged universe; unmapped tags pass through
    when already in the universe, otherwise become Unknown."""
    if raw in universe.merge_map:
        return universe.merge_map[raw]
    if raw in universe.merged_tags:
        return raw
    return UNKNOWN_TAG


@dataclass(frozen=True)
class PropertyScheme:
    task: Task
    groups: tuple[PropertyGroup, ...]
    universe: TagUniverse


def default_scheme(task: Task, universe: TagUniverse | None = None) -> PropertyScheme:
    universe = universe or default_universe()
    if task == Task.QA:
        groups = (PropertyGroup.SEGMENT, PropertyGroup.SEGMENT_TAG)
    else:
        groups = (PropertyGroup.SEGMENT, PropertyGroup.SEGMENT_TAG_OVERLAP)
    return PropertyScheme(task=task, groups=groups, universe=universe)


def _segment_name(segment: Segment) -> str:
    return segment.value.capitalize()


def property_space(scheme: PropertyScheme) -> list[str]:
    """Ordered property identifiers: segments in task order, then conjunctions
    in (segment, tag, overlap) order with tags in universe order."""
    segments = SEGMENTS_BY_TASK[scheme.task]
    space = [_segment_name(s) for s in segments]
    for group in scheme.groups:
        if group == PropertyGroup.SEGMENT:
            continue
        for seg in segments:
            for tag in scheme.universe.merged_tags:
                if group == PropertyGroup.SEGMENT_TAG:
                    space.append(f"{_segment_name(seg)}|{tag}")
                else:
                    for flag in (OverlapFlag.NON_OVERLAPPING, OverlapFlag.OVERLAPPING):
                        space.append(f"{_segment_name(seg)}|{tag}|{flag.value}")
    return space


def overlap_flags(instance: AnnotatedInstance) -> list[OverlapFlag]:
    """NLI-only: a token is Overlapping when its lowercased text occurs in both
    the premise and the hypothesis."""
    if instance.task != Task.NLI:
        raise ValueError("overlap flags are defined for NLI instances only")
    premise = {t.text.lower() for t in instance.tokens if t.segment == Segment.PREMISE}
    hypothesis = {t.text.lower() for t in instance.tokens if t.segment == Segment.HYPOTHESIS}
    both = premise & hypothesis
    return [
        OverlapFlag.OVERLAPPING if t.text.lower() in both else OverlapFlag.NON_OVERLAPPING
        for t in instance.tokens
    ]


@dataclass(frozen=True)
class TokenProperties:
    per_token: tuple[frozenset[str], ...]

    def __len__(self) -> int:
        return len(self.per_token)


def annotate(instance: AnnotatedInstance, scheme: PropertyScheme) -> TokenProperties:
    """Assign each token its segment property plus one conjunction identifier
    per conjunction group.  Tokens with an unknown merged tag keep only the
    properties of groups that need no tag; tokens missing a raw tag under a
    tag-requiring scheme are an error.
    """
    needs_tag = any(g != PropertyGroup.SEGMENT for g in scheme.groups)
    if needs_tag:
        missing = [i for i, t in enumerate(instance.tokens) if t.raw_tag is None]
        if missing:
            raise ValueError(f"tokens missing raw_tag at indices {missing}")

    flags = overlap_flags(instance) if any(
        g == PropertyGroup.SEGMENT_TAG_OVERLAP for g in scheme.groups
    ) else None

    per_token: list[frozenset[str]] = []
    for i, tok in enumerate(instance.tokens):
        props = {_segment_name(tok.segment)}
        for group in scheme.groups:
            if group == PropertyGroup.SEGMENT:
                continue
            merged = merge_tag(tok.raw_tag, scheme.universe)
            if merged == UNKNOWN_TAG:
                continue
            if group == PropertyGroup.SEGMENT_TAG:
                props.add(f"{_segment_name(tok.segment)}|{merged}")
            else:
                props.add(f"{_segment_name(tok.segment)}|{merged}|{flags[i].value}")
        per_token.append(frozenset(props))
    return TokenProperties(per_token=tuple(per_token))
