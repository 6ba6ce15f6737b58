"""Rounding rules for human-facing numbers.

All percentages in tables and CSV output are rounded half-away-from-zero
to one decimal place. Raw fractions in JSON output are never rounded.
"""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal


def round1(value: float) -> float:
    """Round to one decimal place, ties away from zero.

    The value is first fixed at six decimals to absorb binary float noise
    (e.g. 86.54999999999999 for an exact 86.55) before the display rounding
    is applied.
    """
    fixed = Decimal(f"{value:.6f}")
    return float(fixed.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def percent(fraction: float) -> float:
    """Display a fraction in [0, 1] as a one-decimal percentage."""
    return round1(fraction * 100.0)
