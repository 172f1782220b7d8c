from fractions import Fraction
from typing import Any, Optional

from app.utils.errors import StructureError


def parse_rational(value: Any, field: str) -> Fraction:
    """Rationale Zahl aus dem Dokumentformat lesen (Ganzzahl oder "p/q")"""
    # bool ist eine Unterklasse von int und wird ausdrücklich abgelehnt
    if isinstance(value, bool):
        raise StructureError(f"Wahrheitswert statt Zahl: {value!r}", field=field, axiom="rational")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            num, _, den = text.partition("/")
            try:
                p, q = int(num), int(den)
            except ValueError:
                raise StructureError(f"Ungültiger Bruch: {value!r}", field=field, axiom="rational")
            if q <= 0:
                raise StructureError(f"Nenner muss positiv sein: {value!r}", field=field, axiom="rational")
            return Fraction(p, q)
        try:
            return Fraction(int(text))
        except ValueError:
            raise StructureError(f"Ungültige Zahl: {value!r}", field=field, axiom="rational")
    raise StructureError(
        f"Erwartet Ganzzahl oder \"p/q\", erhalten {type(value).__name__}",
        field=field, axiom="rational")


def fmt_rational(q: Optional[Fraction]) -> Optional[str]:
    """Kanonische Darstellung in gekürzter Form; None steht für unendlich"""
    if q is None:
        return "inf"
    return str(Fraction(q))
