"""Null-model mobilization detector."""
from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, field

from .corpus import Corpus, CrossLink, day_start, members
from .matching import NoMatchError, matched_post

log = logging.getLogger(__name__)

DEFAULT_BASELINE = 1.6  # matched-thread after-to-before rate at full scale
DEFAULT_WINDOW_HOURS = 12.0
MAX_PRECOUNT_DIFF = 5  # target/matched pairs must have near-equal pre-counts


class BaselineError(Exception):
    """No eligible matched pairs; pass an explicit baseline (reference value 1.6)."""


@dataclass
class MobilizationRecord:
    crosslink: CrossLink
    before_count: int
    after_count: int
    ratio: float
    baseline: float
    verdict: str  # "mobilization" | "none"
    attackers: set[str] = field(default_factory=set)
    defenders: set[str] = field(default_factory=set)
    matched_before: int | None = None
    matched_after: int | None = None
    sentiment: str = "unlabeled"  # "negative" | "neutral" | "unlabeled"

    @property
    def id(self) -> str:
        return self.crosslink.source_post

    @classmethod
    def from_dict(cls, obj: dict) -> "MobilizationRecord":
        link = CrossLink(
            source_post=obj["source_post"],
            target_post=obj["target_post"],
            source_community=obj["source_community"],
            target_community=obj["target_community"],
            t0=obj["t0"],
            author=obj["author"],
        )
        return cls(
            crosslink=link,
            before_count=obj["before_count"],
            after_count=obj["after_count"],
            ratio=obj["ratio"],
            baseline=obj["baseline"],
            verdict=obj["verdict"],
            attackers=set(obj["attackers"]),
            defenders=set(obj["defenders"]),
            matched_before=obj.get("matched_before"),
            matched_after=obj.get("matched_after"),
            sentiment=obj.get("sentiment", "unlabeled"),
        )

    def to_dict(self) -> dict:
        link = self.crosslink
        return {
            "source_post": link.source_post,
            "target_post": link.target_post,
            "source_community": link.source_community,
            "target_community": link.target_community,
            "t0": link.t0,
            "author": link.author,
            "before_count": self.before_count,
            "after_count": self.after_count,
            "matched_before": self.matched_before,
            "matched_after": self.matched_after,
            "ratio": self.ratio,
            "baseline": self.baseline,
            "verdict": self.verdict,
            "attackers": sorted(self.attackers),
            "defenders": sorted(self.defenders),
            "sentiment": self.sentiment,
        }


def smoothed_ratio(before: int, after: int) -> float:
    """Additively smoothed after/before ratio, defined for zero counts.

    The +1 smoothing keeps every cross-link classifiable; it shifts verdicts
    only for very low-activity threads.
    """
    return (after + 1) / (before + 1)


def _thread_counts_by(corpus: Corpus, post_id: str, users: set[str], t0: float, window_s: float):
    before = after = 0
    for c in corpus.thread_comments.get(post_id, []):
        if c.author not in users:
            continue
        if t0 - window_s <= c.timestamp < t0:
            before += 1
        elif t0 <= c.timestamp < t0 + window_s:
            after += 1
    return before, after


def window_counts(
    corpus: Corpus, link: CrossLink, window_hours: float = DEFAULT_WINDOW_HOURS
) -> tuple[int, int]:
    """Comments by source members on the target thread in the half-open
    windows [t0-w, t0) and [t0, t0+w)."""
    mem = members(corpus, link.source_community, day_start(link.t0), link.target_community)
    return _thread_counts_by(corpus, link.target_post, mem, link.t0, window_hours * 3600.0)


def baseline_ratio(
    corpus: Corpus,
    links: list[CrossLink],
    window_hours: float = DEFAULT_WINDOW_HOURS,
    stat: str = "mean",
) -> float:
    """Mean (or median) smoothed after/before ratio of source-member comments
    on matched threads, over pairs with pre-count difference < 5."""
    if stat not in ("mean", "median"):
        raise ValueError(f"stat must be mean or median, got {stat!r}")
    window_s = window_hours * 3600.0
    ratios = []
    for link in links:
        try:
            match = matched_post(corpus, links, link.target_post)
        except NoMatchError:
            continue
        mem = members(corpus, link.source_community, day_start(link.t0), link.target_community)
        target_before, _ = _thread_counts_by(corpus, link.target_post, mem, link.t0, window_s)
        m_before, m_after = _thread_counts_by(corpus, match.match_id, mem, link.t0, window_s)
        if abs(target_before - m_before) >= MAX_PRECOUNT_DIFF:
            continue
        ratios.append(smoothed_ratio(m_before, m_after))
    if not ratios:
        raise BaselineError(
            "no eligible matched pairs for the null model; "
            f"pass an explicit baseline (reference value {DEFAULT_BASELINE})"
        )
    return statistics.mean(ratios) if stat == "mean" else statistics.median(ratios)


def detect(
    corpus: Corpus,
    link: CrossLink,
    baseline: float,
    links: list[CrossLink] | None = None,
    window_hours: float = DEFAULT_WINDOW_HOURS,
) -> MobilizationRecord:
    """Classify one cross-link against the baseline rate.

    Attackers are source members and defenders target members who comment on
    the target thread in [t0, t0+w). When the full link list is supplied the
    matched-thread counts are filled in as well.
    """
    if baseline <= 0:
        raise ValueError("baseline must be positive")
    window_s = window_hours * 3600.0
    day = day_start(link.t0)
    source_members = members(corpus, link.source_community, day, link.target_community)
    target_members = members(corpus, link.target_community, day, link.source_community)

    before, after = _thread_counts_by(corpus, link.target_post, source_members, link.t0, window_s)
    ratio = smoothed_ratio(before, after)

    attackers, defenders = set(), set()
    for c in corpus.thread_comments.get(link.target_post, []):
        if link.t0 <= c.timestamp < link.t0 + window_s:
            if c.author in source_members:
                attackers.add(c.author)
            elif c.author in target_members:
                defenders.add(c.author)

    matched_before = matched_after = None
    if links is not None:
        try:
            match = matched_post(corpus, links, link.target_post)
            matched_before, matched_after = _thread_counts_by(
                corpus, match.match_id, source_members, link.t0, window_s
            )
        except NoMatchError:
            log.debug("no matched thread for %s", link.target_post)

    return MobilizationRecord(
        crosslink=link,
        before_count=before,
        after_count=after,
        ratio=ratio,
        baseline=baseline,
        verdict="mobilization" if ratio > baseline else "none",
        attackers=attackers,
        defenders=defenders,
        matched_before=matched_before,
        matched_after=matched_after,
    )
