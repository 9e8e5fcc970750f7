"""Column schema and the discretized domain synthetic data must live in."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import InvalidArgument, ParseError


@dataclass(frozen=True)
class ColumnSpec:
    """One column: either categorical with declared labels or numerical with bounds.

    Numerical bounds may be absent, in which case they must be extracted with
    DP budget during preprocessing.  ``structural_zeros`` lists categories
    (categorical) or [a, b] intervals (numerical) that are impossible and must
    stay impossible in generated data.
    """

    name: str
    kind: str
    categories: Optional[tuple[str, ...]] = None
    bounds: Optional[tuple[float, float]] = None
    structural_zeros: tuple = ()

    def __post_init__(self):
        if self.kind not in ("categorical", "numerical"):
            raise ParseError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.categories:
                raise ParseError(f"column {self.name!r}: categories required")
            if len(set(self.categories)) != len(self.categories):
                raise ParseError(f"column {self.name!r}: duplicate categories")
            for z in self.structural_zeros:
                if z not in self.categories:
                    raise ParseError(
                        f"column {self.name!r}: structural zero {z!r} not a category"
                    )
        else:
            if self.bounds is not None:
                lo, hi = self.bounds
                if not (lo < hi) or not _finite(lo) or not _finite(hi):
                    raise ParseError(
                        f"column {self.name!r}: bounds must be finite with lo < hi"
                    )
                for iv in self.structural_zeros:
                    a, b = iv
                    if a > b or a < lo or b > hi:
                        raise ParseError(
                            f"column {self.name!r}: structural-zero interval "
                            f"{iv!r} outside bounds"
                        )

    @property
    def has_bounds(self) -> bool:
        return self.kind == "categorical" or self.bounds is not None


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and x == x and abs(x) != float("inf")


@dataclass(frozen=True)
class Domain:
    """Ordered columns plus the post-discretization cardinality of each."""

    columns: tuple[ColumnSpec, ...]
    cardinalities: tuple[int, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ParseError("duplicate column names")
        if len(self.cardinalities) != len(self.columns):
            raise InvalidArgument("one cardinality per column required")
        if any(k < 1 for k in self.cardinalities):
            raise InvalidArgument("cardinalities must be >= 1")

    def __len__(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise InvalidArgument(f"unknown column {name!r}")

    def shape(self, attrs: Sequence[int]) -> tuple[int, ...]:
        return tuple(self.cardinalities[a] for a in attrs)

    def to_dict(self) -> dict:
        cols = []
        for c in self.columns:
            d: dict = {"name": c.name, "kind": c.kind}
            if c.categories is not None:
                d["categories"] = list(c.categories)
            if c.bounds is not None:
                d["bounds"] = list(c.bounds)
            if c.structural_zeros:
                d["structural_zeros"] = [
                    z if isinstance(z, str) else list(z) for z in c.structural_zeros
                ]
            cols.append(d)
        return {"columns": cols, "cardinalities": list(self.cardinalities)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Domain":
        base = parse_domain_document(doc)
        cards = doc.get("cardinalities")
        if cards is None:
            return base
        return Domain(columns=base.columns, cardinalities=tuple(int(k) for k in cards))


def parse_domain_document(doc: dict) -> Domain:
    """Validate a domain document and build a Domain.

    Categorical cardinality is the category count; numerical columns get a
    placeholder cardinality of 1 until discretization fixes the real one.
    """
    if not isinstance(doc, dict) or "columns" not in doc:
        raise ParseError("domain document must be an object with a 'columns' list")
    columns = []
    cards = []
    for raw in doc["columns"]:
        if "name" not in raw or "kind" not in raw:
            raise ParseError(f"column entry missing name/kind: {raw!r}")
        kind = raw["kind"]
        name = raw["name"]
        if kind == "categorical":
            cats = raw.get("categories")
            if cats is None:
                raise ParseError(f"column {name!r}: categorical requires categories")
            spec = ColumnSpec(
                name=name,
                kind="categorical",
                categories=tuple(str(c) for c in cats),
                structural_zeros=tuple(str(z) for z in raw.get("structural_zeros", ())),
            )
            cards.append(len(spec.categories))
        elif kind == "numerical":
            bounds = raw.get("bounds")
            spec = ColumnSpec(
                name=name,
                kind="numerical",
                bounds=tuple(float(b) for b in bounds) if bounds is not None else None,
                structural_zeros=tuple(
                    (float(iv[0]), float(iv[1])) for iv in raw.get("structural_zeros", ())
                ),
            )
            cards.append(1)
        else:
            raise ParseError(f"column {name!r}: unknown kind {kind!r}")
        columns.append(spec)
    return Domain(columns=tuple(columns), cardinalities=tuple(cards))


def load_domain(path_or_text) -> Domain:
    """Load and validate a domain document from a JSON file path or raw text."""
    if hasattr(path_or_text, "read"):
        text = path_or_text.read()
    else:
        try:
            with open(path_or_text, "r", encoding="utf-8") as fh:
                text = fh.read()
        except (OSError, ValueError):
            text = str(path_or_text)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"domain document is not valid JSON: {exc}") from exc
    return parse_domain_document(doc)
