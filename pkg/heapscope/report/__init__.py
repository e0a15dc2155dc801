# Report module
"""Per-callsite profiles built from sample files and timer logs."""

from .models import PROFILE_FORMAT_VERSION, CallsiteStats, ProfileDocument, ProfileTotals
from .render import SORT_KEYS, parse_json, render_json, render_text, sort_rows
from .aggregate import aggregate

__all__ = [
    "PROFILE_FORMAT_VERSION",
    "CallsiteStats",
    "ProfileDocument",
    "ProfileTotals",
    "SORT_KEYS",
    "parse_json",
    "render_json",
    "render_text",
    "sort_rows",
    "aggregate",
]
