"""Label vocabulary shared by every stage of the pipeline.

Patch classifiers emit probabilities over five classes (four polyp types
plus normal/non-diagnostic tissue); slide-level diagnoses are restricted
to the four polyp types. Both enums subclass ``str`` so members compare
equal to each other and to plain strings with the same value.
"""

from __future__ import annotations

from enum import Enum


class PolypLabel(str, Enum):
    """Patch-level class: four polyp types plus normal tissue."""

    TA = "TA"
    TVA = "TVA"
    HP = "HP"
    SSA = "SSA"
    NORM = "NORM"


class Diagnosis(str, Enum):
    """Slide-level diagnosis. NORM is never a slide diagnosis."""

    TA = "TA"
    TVA = "TVA"
    HP = "HP"
    SSA = "SSA"


# Canonical index order for probability vectors and argmax tie-breaking.
LABEL_ORDER: tuple[PolypLabel, ...] = (
    PolypLabel.TA,
    PolypLabel.TVA,
    PolypLabel.HP,
    PolypLabel.SSA,
    PolypLabel.NORM,
)

# Presentation order for diagnoses (tables, confusion matrices, CSV columns).
DIAGNOSES: tuple[Diagnosis, ...] = (
    Diagnosis.TA,
    Diagnosis.TVA,
    Diagnosis.HP,
    Diagnosis.SSA,
)

ADENOMATOUS = frozenset({Diagnosis.TA, Diagnosis.TVA})
SERRATED = frozenset({Diagnosis.HP, Diagnosis.SSA})

# Reference palette used by the synthetic oracle backend and, for the four
# polyp classes, by heatmap overlays. Values are normative: tests paint
# slides with these exact colors.
LABEL_COLORS: dict[PolypLabel, tuple[int, int, int]] = {
    PolypLabel.TA: (60, 160, 60),
    PolypLabel.TVA: (60, 60, 200),
    PolypLabel.HP: (220, 200, 60),
    PolypLabel.SSA: (200, 60, 60),
    PolypLabel.NORM: (255, 255, 255),
}


def parse_diagnosis(value: str) -> Diagnosis:
    """Parse a diagnosis string, accepting surrounding whitespace."""
    try:
        return Diagnosis(value.strip().upper())
    except ValueError:
        valid = ", ".join(d.value for d in DIAGNOSES)
        raise ValueError(f"unknown diagnosis {value!r}; expected one of {valid}") from None
