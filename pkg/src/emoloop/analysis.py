"""Bias audit of a personalized model.

Scores every test-pool excerpt with the committee's Q2 probability, ranks
them, counts how each source type is represented among the top-k, and
reports per-type mean Q2 probability. The report mirrors the usual
two-types-by-two-metrics table.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .active_loop import PersonalizedModel
from .committee import committee_proba
from .core import DEFAULT_SOURCE_NAMES, Quadrant, SourceType, ValidationError

REPORT_SCHEMA_VERSION = 1

Q2_INDEX = Quadrant.Q2.index


@dataclass(frozen=True)
class BiasReport:
    session_id: str
    top_k: int
    requested_top_k: int
    ranking: tuple[tuple[str, float], ...]
    counts: dict[SourceType, int]
    share: dict[SourceType, float]
    mean_q2: dict[SourceType, Optional[float]]
    config: dict
    clamped: bool = False

    def to_json_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "session_id": self.session_id,
            "top_k": self.top_k,
            "requested_top_k": self.requested_top_k,
            "clamped": self.clamped,
            "ranking": [[eid, p] for eid, p in self.ranking],
            "counts": {s.value: c for s, c in self.counts.items()},
            "share": {s.value: x for s, x in self.share.items()},
            "mean_q2": {s.value: x for s, x in self.mean_q2.items()},
            "config": self.config,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "BiasReport":
        return cls(
            session_id=d["session_id"],
            top_k=d["top_k"],
            requested_top_k=d["requested_top_k"],
            clamped=d["clamped"],
            ranking=tuple((eid, p) for eid, p in d["ranking"]),
            counts={SourceType(s): c for s, c in d["counts"].items()},
            share={SourceType(s): x for s, x in d["share"].items()},
            mean_q2={SourceType(s): x for s, x in d["mean_q2"].items()},
            config=d["config"],
        )


def rank_q2(model: PersonalizedModel) -> list[tuple[str, float]]:
    """Every test excerpt with its committee Q2 probability, highest first.

    Ties break toward the lower excerpt id.
    """
    if not model.test_pool:
        raise ValidationError("cannot rank an empty test pool")
    probs = committee_proba(model.committee, model.test_features)
    scored = [(ex.id, float(p)) for ex, p in zip(model.test_pool, probs[:, Q2_INDEX])]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored


def top_k_counts(
    ranking: list[tuple[str, float]],
    top_k: int,
    pool: dict[str, SourceType],
) -> tuple[dict[SourceType, int], dict[SourceType, float], bool]:
    """Per-type counts and shares among the first top_k ranking entries.

    top_k larger than the ranking is clamped; the flag reports it.
    """
    if top_k < 1:
        raise ValidationError(f"top_k must be >= 1, got {top_k}")
    clamped = top_k > len(ranking)
    k = min(top_k, len(ranking))
    counts = {s: 0 for s in SourceType}
    for eid, _ in ranking[:k]:
        counts[pool[eid]] += 1
    share = {s: counts[s] / k for s in SourceType}
    return counts, share, clamped


def mean_q2_by_type(model: PersonalizedModel) -> dict[SourceType, Optional[float]]:
    """Mean Q2 probability over the test pool, per source type.

    A type absent from the test pool maps to None rather than 0.
    """
    probs = committee_proba(model.committee, model.test_features)[:, Q2_INDEX]
    out: dict[SourceType, Optional[float]] = {}
    for source in SourceType:
        rows = [i for i, ex in enumerate(model.test_pool) if ex.source_type is source]
        out[source] = float(np.mean(probs[rows])) if rows else None
    return out


def build_report(model: PersonalizedModel, top_k: int = 10) -> BiasReport:
    ranking = rank_q2(model)
    pool_types = {ex.id: ex.source_type for ex in model.test_pool}
    counts, share, clamped = top_k_counts(ranking, top_k, pool_types)
    return BiasReport(
        session_id=model.session_id,
        top_k=min(top_k, len(ranking)),
        requested_top_k=top_k,
        ranking=tuple(ranking),
        counts=counts,
        share=share,
        mean_q2=mean_q2_by_type(model),
        config=model.config.to_json_dict(),
        clamped=clamped,
    )


def render_report(
    report: BiasReport,
    fmt: str = "json",
    source_names: Optional[dict[SourceType, str]] = None,
) -> str:
    """Serialize a report as canonical JSON, a plain-text table, or CSV."""
    names = source_names or DEFAULT_SOURCE_NAMES
    if fmt == "json":
        return json.dumps(report.to_json_dict(), sort_keys=True, indent=2)
    if fmt == "text":
        return _render_text(report, names)
    if fmt == "csv":
        return _render_csv(report, names)
    raise ValidationError(f"unknown report format {fmt!r}")


def _fmt_pct(x: Optional[float]) -> str:
    return "n/a" if x is None else f"{100.0 * x:.2f}%"


def _render_text(report: BiasReport, names: dict[SourceType, str]) -> str:
    lines = [
        f"session {report.session_id}  (top {report.top_k}"
        + (", clamped" if report.clamped else "")
        + ")",
        f"{'':<12}{'Top ' + str(report.top_k):>24}{'Output p_avg (Q2)':>28}",
        f"{'source':<12}"
        + "".join(f"{names[s]:>12}" for s in SourceType)
        + "".join(f"{names[s]:>14}" for s in SourceType),
        f"{'share':<12}"
        + "".join(f"{_fmt_pct(report.share[s]):>12}" for s in SourceType)
        + "".join(f"{_fmt_pct(report.mean_q2[s]):>14}" for s in SourceType),
    ]
    return "\n".join(lines) + "\n"


def _render_csv(report: BiasReport, names: dict[SourceType, str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["source_type", "display_name", "top_k_count", "top_k_share", "mean_q2"])
    for s in SourceType:
        mean = report.mean_q2[s]
        writer.writerow(
            [
                s.value,
                names[s],
                report.counts[s],
                repr(report.share[s]),
                "" if mean is None else repr(mean),
            ]
        )
    return buf.getvalue()


def parse_report_csv(text: str) -> dict[SourceType, dict]:
    """Inverse of the CSV export, for round-trip checks and downstream tooling."""
    reader = csv.DictReader(io.StringIO(text))
    out = {}
    for row in reader:
        out[SourceType(row["source_type"])] = {
            "display_name": row["display_name"],
            "top_k_count": int(row["top_k_count"]),
            "top_k_share": float(row["top_k_share"]),
            "mean_q2": None if row["mean_q2"] == "" else float(row["mean_q2"]),
        }
    return out
