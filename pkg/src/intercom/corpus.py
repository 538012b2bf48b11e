"""Event-log parsing, indexing, cross-link extraction, and community membership."""
from __future__ import annotations

import json
import logging
import re
from bisect import bisect_left
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

DAY = 86400.0
MEMBER_WINDOW_DAYS = 30

# Permalink shape: an optional scheme+host prefix, then r/<community>/comments/<post_id>.
# Host is validated against the allowlist only when present; bare "r/..." always matches.
CROSSLINK_RE = re.compile(
    r"(?:https?://([\w.\-]+)/)?\br/([A-Za-z0-9_\-]+)/comments/([A-Za-z0-9_\-]+)",
    re.IGNORECASE,
)


class CorpusError(Exception):
    """Unrecoverable problem with an event-log file."""


@dataclass(frozen=True)
class Event:
    """One post or comment from the event log."""

    kind: str  # "post" | "comment"
    id: str
    author: str
    community: str
    timestamp: float  # epoch seconds, UTC
    body: str = ""
    thread_id: str | None = None  # comments only: the post the comment lives under
    parent_id: str | None = None  # comments only: post id or comment id replied to


@dataclass(frozen=True)
class CrossLink:
    """A post in one community hyperlinking a post in another community."""

    source_post: str
    target_post: str
    source_community: str
    target_community: str
    t0: float  # creation time of the source post
    author: str


@dataclass
class LoadStats:
    lines: int = 0
    posts: int = 0
    comments: int = 0
    rejected: int = 0
    dangling_comments: int = 0


@dataclass
class Corpus:
    """Immutable indexed view of an event log.

    All indexes are built once at load time; every read operation is pure,
    so concurrent reads are safe.
    """

    posts: dict[str, Event] = field(default_factory=dict)
    comments: dict[str, Event] = field(default_factory=dict)
    posts_by_time: list[Event] = field(default_factory=list)
    comments_by_time: list[Event] = field(default_factory=list)
    # post id -> comments in the thread, time-ordered
    thread_comments: dict[str, list[Event]] = field(default_factory=dict)
    # community -> posts, time-ordered
    community_posts: dict[str, list[Event]] = field(default_factory=dict)
    # community -> user -> sorted comment timestamps
    comment_times: dict[str, dict[str, list[float]]] = field(default_factory=dict)
    # user -> sorted timestamps of all comments, any community
    user_comment_times: dict[str, list[float]] = field(default_factory=dict)
    # user -> posts authored, time-ordered
    user_posts: dict[str, list[Event]] = field(default_factory=dict)
    stats: LoadStats = field(default_factory=LoadStats)

    @property
    def communities(self) -> list[str]:
        names = set(self.community_posts) | set(self.comment_times)
        return sorted(names)

    def add(self, event: Event) -> None:
        if event.kind == "post":
            self.posts[event.id] = event
        else:
            self.comments[event.id] = event

    def build_indexes(self) -> None:
        """(Re)build all derived indexes; drops comments with unknown thread ids."""
        order = lambda e: (e.timestamp, e.id)
        self.posts_by_time = sorted(self.posts.values(), key=order)

        kept = {}
        for cid, c in self.comments.items():
            if c.thread_id in self.posts:
                kept[cid] = c
            else:
                self.stats.dangling_comments += 1
        if self.stats.dangling_comments:
            log.warning("dropped %d comments with unknown thread ids", self.stats.dangling_comments)
        self.comments = kept
        self.comments_by_time = sorted(self.comments.values(), key=order)

        self.thread_comments = {}
        self.community_posts = {}
        self.comment_times = {}
        self.user_comment_times = {}
        self.user_posts = {}
        for p in self.posts_by_time:
            self.community_posts.setdefault(p.community, []).append(p)
            self.user_posts.setdefault(p.author, []).append(p)
        for c in self.comments_by_time:
            self.thread_comments.setdefault(c.thread_id, []).append(c)
            self.comment_times.setdefault(c.community, {}).setdefault(c.author, []).append(c.timestamp)
            self.user_comment_times.setdefault(c.author, []).append(c.timestamp)

        self.stats.posts = len(self.posts)
        self.stats.comments = len(self.comments)


_REQUIRED = ("kind", "id", "author", "community", "timestamp")


def _parse_record(obj: dict) -> Event | None:
    if not isinstance(obj, dict):
        return None
    for key in _REQUIRED:
        if obj.get(key) is None:
            return None
    kind = obj["kind"]
    if kind not in ("post", "comment"):
        return None
    ts = obj["timestamp"]
    if not isinstance(ts, (int, float)) or ts < 0:
        return None
    thread_id = obj.get("thread_id")
    parent_id = obj.get("parent_id")
    if kind == "comment" and (thread_id is None or parent_id is None):
        return None
    body = obj.get("body", "")
    if not isinstance(body, str):
        return None
    return Event(
        kind=kind,
        id=str(obj["id"]),
        author=str(obj["author"]),
        community=str(obj["community"]),
        timestamp=float(ts),
        body=body,
        thread_id=str(thread_id) if kind == "comment" else None,
        parent_id=str(parent_id) if kind == "comment" else None,
    )


def load_events(path) -> Corpus:
    """Load a line-delimited JSON event log into an indexed Corpus.

    Malformed lines are skipped and counted in ``corpus.stats.rejected``;
    an unreadable file raises CorpusError.
    """
    corpus = Corpus()
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read event log {path}: {exc}") from exc
    with fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            corpus.stats.lines += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                corpus.stats.rejected += 1
                continue
            event = _parse_record(obj)
            if event is None:
                corpus.stats.rejected += 1
                continue
            store = corpus.posts if event.kind == "post" else corpus.comments
            if event.id in store:  # ids are unique per kind
                corpus.stats.rejected += 1
                continue
            corpus.add(event)
    corpus.build_indexes()
    if corpus.stats.rejected:
        log.warning("skipped %d malformed lines in %s", corpus.stats.rejected, path)
    return corpus


def day_start(ts: float) -> float:
    """Midnight (UTC) of the day containing ts."""
    return ts - (ts % DAY)


def extract_crosslinks(
    corpus: Corpus,
    host_allowlist=None,
    remove_overlaps: bool = True,
    window_hours: float = 12.0,
) -> list[CrossLink]:
    """Extract cross-community links from post bodies, sorted by t0.

    At most one link per source post (the first permalink that resolves to an
    existing post in a different community). Links to unknown posts are
    dropped and counted. When ``remove_overlaps`` is set, links sharing a
    target post whose +/-window analysis intervals intersect are reduced to
    the earliest one.
    """
    allow = {h.lower() for h in host_allowlist} if host_allowlist else None
    links: list[CrossLink] = []
    dropped_unknown = 0
    for post in corpus.posts_by_time:
        for m in CROSSLINK_RE.finditer(post.body):
            host, _url_comm, target_id = m.group(1), m.group(2), m.group(3)
            if host is not None and allow is not None and host.lower() not in allow:
                continue
            target = corpus.posts.get(target_id)
            if target is None:
                dropped_unknown += 1
                continue
            if target.community == post.community:
                continue
            links.append(
                CrossLink(
                    source_post=post.id,
                    target_post=target.id,
                    source_community=post.community,
                    target_community=target.community,
                    t0=post.timestamp,
                    author=post.author,
                )
            )
            break
    if dropped_unknown:
        log.warning("dropped %d cross-links to nonexistent target posts", dropped_unknown)
    links.sort(key=lambda l: (l.t0, l.source_post))
    if remove_overlaps:
        links = remove_overlapping(links, window_hours=window_hours)
    return links


def remove_overlapping(links: list[CrossLink], window_hours: float = 12.0) -> list[CrossLink]:
    """Keep only the earliest of any links that share a target post and whose
    half-open analysis windows [t0-w, t0+w) intersect."""
    span = 2 * window_hours * 3600.0
    last_kept: dict[str, float] = {}
    kept = []
    for link in sorted(links, key=lambda l: (l.t0, l.source_post)):
        prev = last_kept.get(link.target_post)
        if prev is not None and link.t0 - prev < span:
            continue
        last_kept[link.target_post] = link.t0
        kept.append(link)
    return kept


def _has_time_in(times: list[float], lo: float, hi: float) -> bool:
    i = bisect_left(times, lo)
    return i < len(times) and times[i] < hi


def members(corpus: Corpus, community: str, day: float, excluded: str | None = None) -> set[str]:
    """Users with >=1 comment in ``community`` during [day-30d, day) and none
    in ``excluded`` during the same window."""
    by_user = corpus.comment_times.get(community)
    if by_user is None:
        log.warning("members(): unknown community %r", community)
        return set()
    lo, hi = day - MEMBER_WINDOW_DAYS * DAY, day
    found = {u for u, times in by_user.items() if _has_time_in(times, lo, hi)}
    if excluded is not None and found:
        other = corpus.comment_times.get(excluded, {})
        found = {u for u in found if not _has_time_in(other.get(u, []), lo, hi)}
    return found


def _count_in(times: list[float], lo: float, hi: float) -> int:
    return bisect_left(times, hi) - bisect_left(times, lo)


def user_activity(corpus: Corpus, user: str, community: str, window: tuple[float, float]):
    """Comment counts for a user in [t1, t2): (in-community, total, fraction)."""
    t1, t2 = window
    if not t1 < t2:
        raise ValueError(f"bad window: [{t1}, {t2})")
    total = _count_in(corpus.user_comment_times.get(user, []), t1, t2)
    in_comm = _count_in(corpus.comment_times.get(community, {}).get(user, []), t1, t2)
    fraction = in_comm / total if total else 0.0
    return in_comm, total, fraction
