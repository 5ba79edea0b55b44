"""CRR article references: parsing, the article tree, and fuzzy set similarities.

Findings are annotated with references into the Capital Requirements
Regulation (e.g. "182(1)(f)").  Articles form a rooted tree (182 is the
parent of 182(1), which is the parent of 182(1)(f)), and reference overlap
between two findings is measured two ways:

* ``jaccard``     -- plain set Jaccard over the canonical references.
* ``hierarchical_sim`` -- Jaccard over the union of proper ancestor sets,
  so findings citing sibling points of the same article still match.

Both feed the search-space prefilter used by the retriever.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, AbstractSet, Iterable

if TYPE_CHECKING:
    from .corpus import Corpus, Finding

_REF_RE = re.compile(r"^(\d+)((?:\([0-9a-zA-Z]+\))*)$")
_PART_RE = re.compile(r"\(([0-9a-zA-Z]+)\)")


class CrrParseError(ValueError):
    """Raised for strings that are not canonical CRR references."""


@dataclass(frozen=True, order=True)
class CrrRef:
    """A parsed article reference, e.g. path ("182", "1", "f")."""

    path: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.path:
            raise CrrParseError("empty CRR reference path")
        if not self.path[0].isdigit():
            raise CrrParseError(f"article part must be numeric: {self.path[0]!r}")
        for part in self.path[1:]:
            if not part or not part.isalnum():
                raise CrrParseError(f"bad reference part: {part!r}")

    @property
    def canonical(self) -> str:
        """Canonical string form, e.g. "182(1)(f)"; round-trips via parse_crr_ref."""
        return self.path[0] + "".join(f"({p})" for p in self.path[1:])

    def ancestors(self) -> frozenset[tuple[str, ...]]:
        """Proper ancestors as path tuples, synthetic root excluded.

        "182(1)(f)" -> {("182",), ("182", "1")}; a top-level article has none.
        """
        return frozenset(self.path[:i] for i in range(1, len(self.path)))

    def __str__(self) -> str:
        return self.canonical


def parse_crr_ref(s: str) -> CrrRef:
    """Parse a canonical reference string like "182(1)(f)" or "92"."""
    m = _REF_RE.match(s.strip())
    if m is None:
        raise CrrParseError(f"not a CRR reference: {s!r}")
    parts = [p.lower() for p in _PART_RE.findall(m.group(2))]
    return CrrRef((m.group(1), *parts))


class CrrTree:
    """Directed rooted tree of article paths.

    A node's parent is its path prefix of length-1; length-1 paths hang off
    a synthetic root that never participates in similarity.
    """

    def __init__(self) -> None:
        self._nodes: set[tuple[str, ...]] = set()

    @classmethod
    def from_refs(cls, refs: Iterable[CrrRef]) -> "CrrTree":
        tree = cls()
        for ref in refs:
            tree.add(ref)
        return tree

    def add(self, ref: CrrRef) -> None:
        """Insert a reference path and every prefix on its ancestor chain."""
        for i in range(1, len(ref.path) + 1):
            self._nodes.add(ref.path[:i])

    def __contains__(self, ref: CrrRef) -> bool:
        return ref.path in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def parent(self, ref: CrrRef) -> CrrRef | None:
        """Parent reference, or None for a top-level article (child of the root)."""
        if ref not in self:
            raise KeyError(f"reference not in tree: {ref.canonical}")
        if len(ref.path) == 1:
            return None
        return CrrRef(ref.path[:-1])


def load_article_list(path) -> list[CrrRef]:
    """Read an article list file: one canonical reference per line.

    Used to pre-populate a CrrTree beyond the references observed in a
    corpus; blank lines and # comments are skipped.
    """
    refs: list[CrrRef] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if stripped and not stripped.startswith("#"):
                refs.append(parse_crr_ref(stripped))
    return refs


def jaccard(a: AbstractSet[CrrRef], b: AbstractSet[CrrRef]) -> float:
    """Set Jaccard |A∩B| / |A∪B| over canonical references; 0 when both empty."""
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def _ancestor_jaccard(pa: AbstractSet[tuple[str, ...]], pb: AbstractSet[tuple[str, ...]]) -> float:
    union = len(pa | pb)
    if union == 0:
        return 0.0
    return len(pa & pb) / union


def node_hierarchical_sim(x: CrrRef, y: CrrRef, tree: CrrTree) -> float:
    """Ancestor-set Jaccard between two single references.

    Root excluded, so two distinct top-level articles score 0; empty ancestor
    sets on both sides score 0 by the same convention as ``jaccard``.
    """
    for ref in (x, y):
        if ref not in tree:
            raise KeyError(f"reference not in tree: {ref.canonical}")
    return _ancestor_jaccard(x.ancestors(), y.ancestors())


def hierarchical_sim(a: AbstractSet[CrrRef], b: AbstractSet[CrrRef], tree: CrrTree) -> float:
    """Finding-level hierarchical similarity.

    Lifts the node-level measure to reference sets by taking the Jaccard of
    the unions of proper ancestor sets of all references on either side.
    """
    pa: set[tuple[str, ...]] = set()
    pb: set[tuple[str, ...]] = set()
    for ref in a:
        if ref not in tree:
            raise KeyError(f"reference not in tree: {ref.canonical}")
        pa |= ref.ancestors()
    for ref in b:
        if ref not in tree:
            raise KeyError(f"reference not in tree: {ref.canonical}")
        pb |= ref.ancestors()
    return _ancestor_jaccard(pa, pb)


@dataclass(frozen=True)
class PrefilterConfig:
    """Thresholds for the CRR search-space prefilter."""

    jaccard_min: float = 1.0 / 3.0
    hier_min: float = 1.0 / 3.0
    fallback_on_empty: bool = True

    def __post_init__(self) -> None:
        for name, value in (("jaccard_min", self.jaccard_min), ("hier_min", self.hier_min)):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")


def prefilter(
    query: "Finding",
    corpus: "Corpus",
    tree: CrrTree,
    cfg: PrefilterConfig,
) -> list[int]:
    """Corpus positions whose reference overlap with the query clears both thresholds.

    Returns every position when the filtered set is empty and fallback is on
    (a retrieval system must still answer); with fallback off the empty set
    is returned as-is.
    """
    q = set(query.crr_refs)
    kept = [
        i
        for i, finding in enumerate(corpus.findings)
        if jaccard(q, finding.crr_refs) >= cfg.jaccard_min
        and hierarchical_sim(q, finding.crr_refs, tree) >= cfg.hier_min
    ]
    if not kept and cfg.fallback_on_empty:
        return list(range(len(corpus.findings)))
    return kept
