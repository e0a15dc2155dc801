"""Field encoding shared by the line-delimited file formats."""

from __future__ import annotations

from decimal import ROUND_HALF_EVEN, Decimal
from urllib.parse import quote, unquote

SIX_PLACES = Decimal("0.000001")

# Everything outside this set (tabs, newlines, ';', '%') is percent-encoded.
_PATH_SAFE = "/:<>._-+@~ ,()[]{}=!$&'*"


def encode_path(path: str) -> str:
    return quote(path, safe=_PATH_SAFE)


def decode_path(field: str) -> str:
    return unquote(field)


def fixed6(value: float | Decimal) -> str:
    """Format a real as a fixed 6-decimal string."""
    return str(quantize6(value))


def quantize6(value: float | int | str | Decimal) -> Decimal:
    """Round to 6 decimal places (banker's rounding, as Decimal)."""
    if not isinstance(value, Decimal):
        value = Decimal(repr(value)) if isinstance(value, float) else Decimal(value)
    return value.quantize(SIX_PLACES, rounding=ROUND_HALF_EVEN)


def parse_int(field: str, name: str) -> int:
    try:
        return int(field)
    except ValueError:
        raise ValueError(f"{name}: expected integer, got {field!r}") from None


def parse_key_values(fields: list[str]) -> dict[str, str]:
    """Parse ``key=value`` header/footer fields."""
    out: dict[str, str] = {}
    for item in fields:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        out[key] = value
    return out
