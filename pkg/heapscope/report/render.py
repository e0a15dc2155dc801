"""Text and JSON rendering of profile documents."""

from __future__ import annotations

import json
from decimal import Decimal
from typing import Any, Callable, Dict, List

from heapscope.core.models import MIB, Callsite, FootprintPoint
from heapscope.cpu.attributor import CpuCounters
from heapscope.errors import FormatVersionError
from heapscope.leaks.detector import LeakReportEntry, LeakScore
from heapscope.storage.codec import fixed6, quantize6

from .models import PROFILE_FORMAT_VERSION, CallsiteStats, ProfileDocument, ProfileTotals, ns_to_seconds

AVERAGE_NOTE = "avg = time-weighted mean of sampled net contribution (sample-derived approximation)"

SORT_KEYS: Dict[str, Callable[[CallsiteStats], Any]] = {
    "cpu": lambda r: r.cpu.total_ns,
    "peak_mem": lambda r: r.peak_contribution,
    "copy": lambda r: r.copy_mbps,
    "leak_rate": lambda r: r.leak.leak_rate if r.leak is not None else -1.0,
}


def sort_rows(rows: List[CallsiteStats], sort_key: str) -> List[CallsiteStats]:
    """Rows by sort_key descending, ties by callsite.

    Raises:
        ValueError: On an unknown sort key
    """
    if sort_key not in SORT_KEYS:
        raise ValueError(f"unknown sort key '{sort_key}' (choose from {', '.join(SORT_KEYS)})")
    key = SORT_KEYS[sort_key]
    ordered = sorted(rows, key=lambda r: r.callsite)
    ordered.sort(key=key, reverse=True)
    return ordered


def _mb(nbytes: int | Decimal) -> str:
    return f"{Decimal(nbytes) / MIB:.2f}"


def render_text(document: ProfileDocument, sort_key: str = "cpu") -> str:
    """Human-readable report table."""
    rows = sort_rows(document.rows, sort_key)
    width = max([len(str(r.callsite)) for r in rows] + [8])
    lines = [
        f"heapscope profile (format {document.format_version})",
        f"threshold {document.config.get('threshold')} B, peak {_mb(document.peak_footprint)} MB, "
        f"elapsed {ns_to_seconds(document.elapsed_ns)} s, {document.sample_count} samples",
        "",
        f"{'callsite':<{width}}  {'managed s':>10}  {'native s':>10}  {'alloc MB':>9}  "
        f"{'peak MB':>9}  {'avg MB':>9}  {'managed':>7}  {'copy MB/s':>9}",
    ]
    for r in rows:
        lines.append(
            f"{str(r.callsite):<{width}}  {r.managed_seconds:>10.3f}  {r.native_seconds:>10.3f}  "
            f"{_mb(r.alloc_bytes_sampled):>9}  {_mb(r.peak_contribution):>9}  {_mb(r.avg_footprint_share):>9}  "
            f"{r.managed_alloc_fraction * 100:>6.1f}%  {r.copy_mbps:>9.3f}"
        )
    totals = document.totals
    lines.append(
        f"{'total':<{width}}  {ns_to_seconds(totals.managed_ns):>10.3f}  {ns_to_seconds(totals.native_ns):>10.3f}  "
        f"{_mb(totals.alloc_bytes_sampled):>9}"
    )
    lines += ["", AVERAGE_NOTE]
    if document.leaks:
        lines += ["", "possible leaks (highest leak rate first):"]
        for e in document.leaks:
            lines.append(
                f"  {e.callsite}: {e.probability * 100:.1f}% likely, {e.leak_rate:.3f} MB/s "
                f"(mallocs={e.score.mallocs}, frees={e.score.frees})"
            )
    if document.truncated:
        lines += ["", "warning: input truncated mid-record; complete records only"]
    return "\n".join(lines) + "\n"


def _callsite_dict(callsite: Callsite) -> Dict[str, Any]:
    out: Dict[str, Any] = {"file": callsite.file, "line": callsite.line}
    if callsite.function is not None:
        out["function"] = callsite.function
    return out


def _leak_dict(entry: LeakReportEntry) -> Dict[str, Any]:
    return {
        "callsite": _callsite_dict(entry.callsite),
        "probability": fixed6(entry.probability),
        "leak_rate_mbps": fixed6(entry.leak_rate),
        "mallocs": entry.score.mallocs,
        "frees": entry.score.frees,
    }


def _row_dict(row: CallsiteStats) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "callsite": _callsite_dict(row.callsite),
        "cpu": {
            "managed_ns": row.cpu.managed_ns,
            "native_ns": row.cpu.native_ns,
            "managed_seconds": str(row.managed_seconds),
            "native_seconds": str(row.native_seconds),
        },
        "alloc_bytes_sampled": row.alloc_bytes_sampled,
        "peak_contribution": row.peak_contribution,
        "avg_footprint_share": fixed6(row.avg_footprint_share),
        "managed_alloc_fraction": fixed6(row.managed_alloc_fraction),
        "copy_mbps": fixed6(row.copy_mbps),
    }
    if row.leak is not None:
        out["leak"] = _leak_dict(row.leak)
    return out


def to_dict(document: ProfileDocument) -> Dict[str, Any]:
    totals = document.totals
    out: Dict[str, Any] = {
        "format_version": document.format_version,
        "config": document.config,
        "trend": [[p.timestamp, p.footprint] for p in document.trend],
        "rows": [_row_dict(r) for r in document.rows],
        "totals": {
            "managed_ns": totals.managed_ns,
            "native_ns": totals.native_ns,
            "alloc_bytes_sampled": totals.alloc_bytes_sampled,
            "copy_mbps": fixed6(totals.copy_mbps),
        },
        "peak_footprint": document.peak_footprint,
        "elapsed_ns": document.elapsed_ns,
        "sample_count": document.sample_count,
        "truncated": document.truncated,
        "average_memory": AVERAGE_NOTE,
    }
    if document.leaks:
        out["leaks"] = [_leak_dict(e) for e in document.leaks]
    return out


def render_json(document: ProfileDocument) -> str:
    """Stable-key, fixed-precision JSON; identical documents give identical bytes."""
    return json.dumps(to_dict(document), sort_keys=True, indent=2) + "\n"


def _callsite_from(data: Dict[str, Any]) -> Callsite:
    return Callsite(data["file"], int(data["line"]), data.get("function"))


def _leak_from(data: Dict[str, Any]) -> LeakReportEntry:
    return LeakReportEntry(
        callsite=_callsite_from(data["callsite"]),
        probability=float(data["probability"]),
        leak_rate=float(data["leak_rate_mbps"]),
        score=LeakScore(int(data["mallocs"]), int(data["frees"])),
    )


def parse_json(text: str) -> ProfileDocument:
    """Parse render_json output back into a ProfileDocument.

    Raises:
        FormatVersionError: On a profile format version mismatch
        ValueError: On malformed JSON
    """
    data = json.loads(text)
    version = str(data.get("format_version"))
    if version != PROFILE_FORMAT_VERSION:
        raise FormatVersionError(version, PROFILE_FORMAT_VERSION)
    rows = []
    for item in data.get("rows", []):
        rows.append(CallsiteStats(
            callsite=_callsite_from(item["callsite"]),
            cpu=CpuCounters(int(item["cpu"]["managed_ns"]), int(item["cpu"]["native_ns"])),
            alloc_bytes_sampled=int(item["alloc_bytes_sampled"]),
            peak_contribution=int(item["peak_contribution"]),
            avg_footprint_share=quantize6(item["avg_footprint_share"]),
            managed_alloc_fraction=quantize6(item["managed_alloc_fraction"]),
            copy_mbps=quantize6(item["copy_mbps"]),
            leak=_leak_from(item["leak"]) if "leak" in item else None,
        ))
    totals = data["totals"]
    return ProfileDocument(
        format_version=version,
        config=dict(data.get("config", {})),
        trend=[FootprintPoint(int(t), int(fp)) for t, fp in data.get("trend", [])],
        rows=rows,
        leaks=[_leak_from(e) for e in data.get("leaks", [])],
        totals=ProfileTotals(
            managed_ns=int(totals["managed_ns"]),
            native_ns=int(totals["native_ns"]),
            alloc_bytes_sampled=int(totals["alloc_bytes_sampled"]),
            copy_mbps=quantize6(totals["copy_mbps"]),
        ),
        peak_footprint=int(data["peak_footprint"]),
        elapsed_ns=int(data["elapsed_ns"]),
        sample_count=int(data["sample_count"]),
        truncated=bool(data.get("truncated", False)),
    )
