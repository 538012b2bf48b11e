"""Matched comparison posts and users (null-model controls)."""
from __future__ import annotations

import random
from dataclasses import dataclass

from .corpus import DAY, Corpus, CrossLink, day_start, members

HISTORY_GAP_DAYS = 3  # events within +/-3 days of the cross-link are ignored


class NoMatchError(Exception):
    """No eligible match exists."""


@dataclass(frozen=True)
class MatchedPair:
    subject_id: str
    match_id: str
    match_distance: float  # seconds for posts, comment-count difference for users


def crosslink_involved_posts(links: list[CrossLink]) -> set[str]:
    involved = set()
    for link in links:
        involved.add(link.source_post)
        involved.add(link.target_post)
    return involved


def matched_post(corpus: Corpus, links: list[CrossLink], post_id: str) -> MatchedPair:
    """Nearest-in-time post from the same community with no cross-link
    involvement; ties broken toward the earlier post."""
    post = corpus.posts.get(post_id)
    if post is None:
        raise KeyError(f"unknown post {post_id!r}")
    involved = crosslink_involved_posts(links)
    best = None
    for cand in corpus.community_posts.get(post.community, []):
        if cand.id == post_id or cand.id in involved:
            continue
        key = (abs(cand.timestamp - post.timestamp), cand.timestamp, cand.id)
        if best is None or key < best[0]:
            best = (key, cand)
    if best is None:
        raise NoMatchError(f"no eligible matched post for {post_id!r}")
    return MatchedPair(subject_id=post_id, match_id=best[1].id, match_distance=best[0][0])


def _history_count(corpus: Corpus, user: str, community: str, day: float, t0: float) -> int:
    """Comments by user in community during [day-30d, day), ignoring events
    within +/-3 days of t0."""
    gap = HISTORY_GAP_DAYS * DAY
    times = corpus.comment_times.get(community, {}).get(user, [])
    lo, hi = day - 30 * DAY, day
    return sum(1 for t in times if lo <= t < hi and abs(t - t0) >= gap)


def matched_user(
    corpus: Corpus,
    link: CrossLink,
    user: str,
    community: str,
    seed: int = 0,
) -> MatchedPair:
    """Same-community member with the closest 30-day comment count who did not
    comment in the cross-linked target thread; ties broken by seeded choice.

    ``community`` must be the link's source or target community; the
    membership exclusion uses the counterpart.
    """
    if community == link.source_community:
        counterpart = link.target_community
    elif community == link.target_community:
        counterpart = link.source_community
    else:
        raise ValueError(f"{community!r} is not a side of the cross-link")
    day = day_start(link.t0)
    pool = members(corpus, community, day, counterpart)
    thread_users = {c.author for c in corpus.thread_comments.get(link.target_post, [])}
    pool -= thread_users
    pool.discard(user)
    if not pool:
        raise NoMatchError(f"no eligible matched user for {user!r} in {community!r}")
    subject_count = _history_count(corpus, user, community, day, link.t0)
    dist = {u: abs(_history_count(corpus, u, community, day, link.t0) - subject_count) for u in pool}
    best = min(dist.values())
    tied = sorted(u for u, d in dist.items() if d == best)
    pick = tied[0] if len(tied) == 1 else random.Random(seed).choice(tied)
    return MatchedPair(subject_id=user, match_id=pick, match_distance=float(best))
