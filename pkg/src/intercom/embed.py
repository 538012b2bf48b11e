"""User and community embeddings from the bipartite posting multigraph."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus

NEGATIVE_SAMPLES = 5
EMBED_DIM = 300


@dataclass
class BipartiteMultigraph:
    """One edge per post event; parallel edges preserved."""

    users: list[str]
    communities: list[str]
    edges: np.ndarray  # shape (E, 2): (user index, community index)
    user_index: dict[str, int] = field(default_factory=dict)
    community_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.user_index:
            self.user_index = {u: i for i, u in enumerate(self.users)}
        if not self.community_index:
            self.community_index = {c: i for i, c in enumerate(self.communities)}

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        du = np.bincount(self.edges[:, 0], minlength=len(self.users))
        dc = np.bincount(self.edges[:, 1], minlength=len(self.communities))
        return du, dc


def build_bipartite(corpus: Corpus) -> BipartiteMultigraph:
    """One (user, community) edge per post, in post time order."""
    users: list[str] = []
    communities: list[str] = []
    uix: dict[str, int] = {}
    cix: dict[str, int] = {}
    rows = []
    for post in corpus.posts_by_time:
        if post.author not in uix:
            uix[post.author] = len(users)
            users.append(post.author)
        if post.community not in cix:
            cix[post.community] = len(communities)
            communities.append(post.community)
        rows.append((uix[post.author], cix[post.community]))
    edges = np.asarray(rows, dtype=np.intp).reshape(-1, 2)
    return BipartiteMultigraph(users=users, communities=communities, edges=edges,
                               user_index=uix, community_index=cix)


def build_word_bipartite(corpus: Corpus, max_vocab: int | None = None) -> BipartiteMultigraph:
    """Word-community multigraph: one edge per token occurrence in a post.

    Reuses the user-community trainer to give word vectors that live in the
    same space as the community vectors (desk-scale substitute for external
    pretrained word vectors).
    """
    from .sentiment import tokenize

    counts: dict[str, int] = {}
    for post in corpus.posts_by_time:
        for tok in tokenize(post.body):
            counts[tok] = counts.get(tok, 0) + 1
    vocab = None
    if max_vocab is not None:
        top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:max_vocab]
        vocab = {w for w, _ in top}

    words: list[str] = []
    communities: list[str] = []
    wix: dict[str, int] = {}
    cix: dict[str, int] = {}
    rows = []
    for post in corpus.posts_by_time:
        if post.community not in cix:
            cix[post.community] = len(communities)
            communities.append(post.community)
        for tok in tokenize(post.body):
            if vocab is not None and tok not in vocab:
                continue
            if tok not in wix:
                wix[tok] = len(words)
                words.append(tok)
            rows.append((wix[tok], cix[post.community]))
    edges = np.asarray(rows, dtype=np.intp).reshape(-1, 2)
    return BipartiteMultigraph(users=words, communities=communities, edges=edges,
                               user_index=wix, community_index=cix)


@dataclass
class EmbeddingTable:
    users: list[str]
    communities: list[str]
    user_vectors: np.ndarray  # (n_users, d)
    community_vectors: np.ndarray  # (n_communities, d)
    dim: int
    negatives: int = NEGATIVE_SAMPLES

    def __post_init__(self):
        self._uix = {u: i for i, u in enumerate(self.users)}
        self._cix = {c: i for i, c in enumerate(self.communities)}

    def user_vector(self, user: str) -> np.ndarray:
        return self.user_vectors[self._uix[user]]

    def community_vector(self, community: str) -> np.ndarray:
        return self.community_vectors[self._cix[community]]

    def has_user(self, user: str) -> bool:
        return user in self._uix

    def has_community(self, community: str) -> bool:
        return community in self._cix


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def edge_loss(u: np.ndarray, c_pos: np.ndarray, c_negs: np.ndarray) -> float:
    """Negative-sampling loss for one positive edge and its drawn negatives.

    The printed objective's log(-sigma(x)) is undefined; this uses the
    standard skip-gram form log(sigma(-u.c_n)) for the negative term.
    """
    pos = -np.log(_sigmoid(float(u @ c_pos)))
    neg = -np.log(_sigmoid(-(c_negs @ u))).sum() if len(c_negs) else 0.0
    return float(pos + neg)


def edge_gradients(u: np.ndarray, c_pos: np.ndarray, c_negs: np.ndarray):
    """Analytic gradients of edge_loss wrt (u, c_pos, each c_neg)."""
    g_pos = _sigmoid(float(u @ c_pos)) - 1.0
    du = g_pos * c_pos
    dc_pos = g_pos * u
    dc_negs = np.zeros_like(c_negs)
    for k in range(len(c_negs)):
        g = _sigmoid(float(u @ c_negs[k]))
        du = du + g * c_negs[k]
        dc_negs[k] = g * u
    return du, dc_pos, dc_negs


def train_embeddings(
    graph: BipartiteMultigraph,
    dim: int = EMBED_DIM,
    negatives: int = NEGATIVE_SAMPLES,
    epochs: int = 100,
    lr_start: float = 0.025,
    lr_end: float = 1e-4,
    seed: int = 0,
) -> EmbeddingTable:
    """SGD over shuffled edges; per positive edge, one attraction step and
    ``negatives`` uniform repulsion steps. Deterministic for a fixed seed."""
    if graph.n_edges == 0:
        raise ValueError("cannot train embeddings on an empty graph")
    rng = np.random.default_rng(seed)
    n_users, n_comms = len(graph.users), len(graph.communities)
    U = rng.uniform(-0.5 / dim, 0.5 / dim, size=(n_users, dim))
    C = rng.uniform(-0.5 / dim, 0.5 / dim, size=(n_comms, dim))

    total_steps = epochs * graph.n_edges
    step = 0
    for _ in range(epochs):
        order = rng.permutation(graph.n_edges)
        for e in order:
            lr = lr_start - (lr_start - lr_end) * (step / max(1, total_steps - 1))
            ui, ci = int(graph.edges[e, 0]), int(graph.edges[e, 1])
            u = U[ui]
            negs = rng.integers(0, n_comms, size=negatives) if negatives else np.empty(0, dtype=np.intp)

            g_pos = _sigmoid(float(u @ C[ci])) - 1.0
            du = g_pos * C[ci]
            C[ci] -= lr * g_pos * u
            for nk in negs:
                g = _sigmoid(float(u @ C[nk]))
                du += g * C[nk]
                C[nk] -= lr * g * u
            U[ui] -= lr * du
            step += 1
        if not (np.isfinite(U).all() and np.isfinite(C).all()):
            raise FloatingPointError(
                f"non-finite embeddings after step {step} (lr now {lr:g}); lower the learning rate"
            )

    return EmbeddingTable(
        users=list(graph.users),
        communities=list(graph.communities),
        user_vectors=U,
        community_vectors=C,
        dim=dim,
        negatives=negatives,
    )


def loss(
    graph: BipartiteMultigraph,
    table: EmbeddingTable,
    seed: int = 0,
    sample_size: int | None = None,
    negatives: int | None = None,
) -> float:
    """Monte Carlo estimate of the mean per-edge objective on a seeded edge
    sample with seeded negatives."""
    if table.user_vectors.shape[1] != table.dim or table.community_vectors.shape[1] != table.dim:
        raise ValueError("embedding table dimensions are inconsistent")
    rng = np.random.default_rng(seed)
    k = table.negatives if negatives is None else negatives
    edges = graph.edges
    if sample_size is not None and sample_size < graph.n_edges:
        edges = edges[rng.choice(graph.n_edges, size=sample_size, replace=False)]
    total = 0.0
    n_comms = len(table.communities)
    for ui, ci in edges:
        negs = rng.integers(0, n_comms, size=k) if k else []
        total += edge_loss(
            table.user_vectors[ui],
            table.community_vectors[ci],
            table.community_vectors[negs] if k else np.empty((0, table.dim)),
        )
    return total / len(edges)


def nearest_communities(table: EmbeddingTable, community: str, k: int) -> list[tuple[str, float]]:
    """Top-k most cosine-similar communities, excluding the query itself."""
    if not table.has_community(community):
        raise KeyError(f"unknown community {community!r}")
    if k <= 0:
        return []
    q = table.community_vector(community)
    qn = np.linalg.norm(q)
    results = []
    for other in table.communities:
        if other == community:
            continue
        v = table.community_vector(other)
        vn = np.linalg.norm(v)
        cos = float(q @ v / (qn * vn)) if qn > 0 and vn > 0 else 0.0
        results.append((other, cos))
    results.sort(key=lambda t: (-t[1], t[0]))
    return results[:k]


def save_vectors(path, names: list[str], vectors: np.ndarray) -> None:
    """Text vector format: header ``<count> <dim>``, then ``id dim v1 .. vd``."""
    n, d = vectors.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {d}\n")
        for name, row in zip(names, vectors):
            coords = " ".join(repr(float(v)) for v in row)
            fh.write(f"{name} {d} {coords}\n")


def load_vectors(path) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: malformed vector file header")
        count, dim = int(header[0]), int(header[1])
        out = {}
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            name, d = parts[0], int(parts[1])
            if d != dim or len(parts) != 2 + dim:
                raise ValueError(f"{path}: bad vector line for {name!r}")
            out[name] = np.asarray([float(x) for x in parts[2:]])
    if len(out) != count:
        raise ValueError(f"{path}: header count {count} != {len(out)} vectors")
    return out
