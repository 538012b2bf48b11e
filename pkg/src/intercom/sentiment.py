"""Source-post sentiment features and classifier, plus community tf-idf similarity."""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import Corpus, CrossLink
from .forest import Forest, SchemaError, load_forest, train_forest  # noqa: F401

log = logging.getLogger(__name__)

TOKEN_RE = re.compile(r"[a-z0-9']+")
SENTENCE_RE = re.compile(r"[.!?]+")
PUNCT_MARKS = {
    "period": ".",
    "comma": ",",
    "exclam": "!",
    "question": "?",
    "semicolon": ";",
    "colon": ":",
    "apostrophe": "'",
    "quote": '"',
    "lparen": "(",
    "rparen": ")",
    "dash": "-",
}

LABEL_NEGATIVE = "negative"
LABEL_NEUTRAL = "neutral"


@dataclass
class Lexicon:
    name: str
    categories: dict[str, set[str]]

    def __post_init__(self):
        for cat, words in self.categories.items():
            if not words:
                raise ValueError(f"lexicon category {cat!r} is empty")
            self.categories[cat] = {w.lower() for w in words}


def load_lexicon(directory, name: str | None = None) -> Lexicon:
    """Build a Lexicon from a directory of ``<category>.txt`` word lists."""
    directory = Path(directory)
    categories = {}
    for path in sorted(directory.glob("*.txt")):
        words = {line.strip().lower() for line in path.read_text(encoding="utf-8").splitlines()}
        words.discard("")
        if words:
            categories[path.stem] = words
    if not categories:
        raise ValueError(f"no lexicon categories found in {directory}")
    return Lexicon(name=name or directory.name, categories=categories)


def builtin_lexicon() -> Lexicon:
    """The small open word lists shipped with the package."""
    root = resources.files("intercom").joinpath("data/lexicons")
    with resources.as_file(root) as path:
        return load_lexicon(path, name="builtin")


def tokenize(text: str) -> list[str]:
    return TOKEN_RE.findall(text.lower())


def strip_shared_words(source_text: str, target_text: str) -> str:
    """Drop source tokens that also occur in the target, preserving order.

    Used before feature extraction because the source post may quote the
    target post.
    """
    target_vocab = set(tokenize(target_text))
    survivors = [tok for tok in TOKEN_RE.findall(source_text.lower()) if tok not in target_vocab]
    return " ".join(survivors)


def _syllables(word: str) -> int:
    groups = re.findall(r"[aeiouy]+", word)
    return max(1, len(groups))


def flesch_reading_ease(text: str) -> float:
    tokens = tokenize(text)
    if not tokens:
        return 0.0
    sentences = max(1, len([s for s in SENTENCE_RE.split(text) if s.strip()]))
    syllables = sum(_syllables(t) for t in tokens)
    return 206.835 - 1.015 * (len(tokens) / sentences) - 84.6 * (syllables / len(tokens))


def extract_text_features(text: str, lexicon: Lexicon) -> dict[str, float]:
    """Lexicon rates and stylistic statistics for one text.

    Empty text yields an all-zero vector with the same schema.
    """
    tokens = tokenize(text)
    n = len(tokens)
    features: dict[str, float] = {}
    for cat in sorted(lexicon.categories):
        words = lexicon.categories[cat]
        hits = sum(1 for t in tokens if t in words)
        features[f"lex_{cat}"] = hits / n if n else 0.0
    features["avg_word_len"] = sum(len(t) for t in tokens) / n if n else 0.0
    features["readability"] = flesch_reading_ease(text) if n else 0.0
    for mark_name, mark in PUNCT_MARKS.items():
        features[f"punct_{mark_name}"] = float(text.count(mark)) if n else 0.0
    features["token_count"] = float(n)
    return features


def crosslink_features(corpus: Corpus, link: CrossLink, lexicon: Lexicon) -> dict[str, float]:
    """Feature vector for a cross-linking post, with target-shared words removed."""
    source_body = corpus.posts[link.source_post].body
    target_body = corpus.posts[link.target_post].body
    return extract_text_features(strip_shared_words(source_body, target_body), lexicon)


def predict_sentiment(
    forest: Forest, link: CrossLink, corpus: Corpus, lexicon: Lexicon
) -> tuple[str, float]:
    """(label, P(negative)) for a cross-link's source post."""
    if LABEL_NEGATIVE not in forest.classes:
        raise SchemaError("model was not trained with a 'negative' class")
    fv = crosslink_features(corpus, link, lexicon)
    proba = forest.predict_proba(fv)[0]
    p_neg = float(proba[forest.classes.index(LABEL_NEGATIVE)])
    return (LABEL_NEGATIVE if p_neg > 0.5 else LABEL_NEUTRAL), p_neg


def _community_tokens(corpus: Corpus) -> dict[str, list[str]]:
    docs = {}
    for community, posts in corpus.community_posts.items():
        tokens: list[str] = []
        for p in posts:
            tokens.extend(tokenize(p.body))
        docs[community] = tokens
    return docs


def community_tfidf_vectors(corpus: Corpus, vocab_size: int = 10000) -> dict[str, dict[str, float]]:
    """tf-idf vector per community over the top-``vocab_size`` corpus words.

    tf is the term count normalized by document length; idf = ln(N/df) over
    community documents.
    """
    docs = _community_tokens(corpus)
    total: dict[str, int] = {}
    df: dict[str, int] = {}
    for tokens in docs.values():
        seen = set()
        for t in tokens:
            total[t] = total.get(t, 0) + 1
            seen.add(t)
        for t in seen:
            df[t] = df.get(t, 0) + 1
    vocab = set(w for w, _ in sorted(total.items(), key=lambda kv: (-kv[1], kv[0]))[:vocab_size])
    n_docs = len(docs)
    vectors = {}
    for community, tokens in docs.items():
        counts: dict[str, int] = {}
        for t in tokens:
            if t in vocab:
                counts[t] = counts.get(t, 0) + 1
        length = len(tokens)
        vec = {}
        if length:
            for t, c in counts.items():
                idf = math.log(n_docs / df[t])
                if idf > 0.0:
                    vec[t] = (c / length) * idf
        vectors[community] = vec
    return vectors


def sparse_cosine(a: dict[str, float], b: dict[str, float]) -> float:
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    dot = sum(v * b[k] for k, v in a.items() if k in b)
    return dot / (na * nb)


def tfidf_similarity(corpus: Corpus, community_a: str, community_b: str, vocab_size: int = 10000) -> float:
    """Cosine similarity of the two communities' tf-idf post vectors, in [0, 1]."""
    for community in (community_a, community_b):
        if not corpus.community_posts.get(community):
            log.warning("tfidf_similarity: community %r has no posts", community)
            return 0.0
    vectors = community_tfidf_vectors(corpus, vocab_size)
    return sparse_cosine(vectors[community_a], vectors[community_b])
