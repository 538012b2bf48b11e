"""Command-line interface. Exit codes: 0 ok, 1 usage, 2 data error, 3 internal."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import pickle
import sys
from pathlib import Path

import numpy as np

from . import embed as embed_mod
from . import predictor as pred_mod
from .corpus import CorpusError, CrossLink, extract_crosslinks, load_events
from .forest import load_forest, train_forest
from .lstm import init_params
from .matching import NoMatchError, matched_post
from .mobilization import BaselineError, baseline_ratio, detect
from .pipeline import (
    Config,
    ConfigError,
    StageError,
    apply_overrides,
    load_config,
    run_pipeline,
    substream_seed,
)
from .replynet import build_reply_graph, echo_metrics
from .sentiment import builtin_lexicon, crosslink_features, load_lexicon, predict_sentiment
from .synth import SynthError, SynthSpec, generate_corpus

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

DATA_ERRORS = (
    CorpusError, BaselineError, NoMatchError, ConfigError, SynthError,
    FileNotFoundError, IsADirectoryError, KeyError, ValueError, json.JSONDecodeError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _load_corpus(path: str):
    """Accept either an event-log .jsonl file or an ingest --index-out dir."""
    p = Path(path)
    if p.is_dir():
        with open(p / "corpus.pkl", "rb") as fh:
            return pickle.load(fh)
    return load_events(p)


def _load_lexicon_arg(lexicon_dir: str | None):
    return load_lexicon(lexicon_dir) if lexicon_dir else builtin_lexicon()


def _out_stream(path: str | None):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _get_links(corpus, args) -> list[CrossLink]:
    hosts = [h.strip() for h in args.hosts.split(",") if h.strip()] if getattr(args, "hosts", "") else None
    return extract_crosslinks(corpus, host_allowlist=hosts,
                              window_hours=getattr(args, "window_hours", 12.0))


def _resolve_baseline(corpus, links, args) -> float:
    if args.baseline == "auto":
        return baseline_ratio(corpus, links, window_hours=args.window_hours, stat=args.stat)
    value = float(args.baseline)
    if value <= 0:
        raise ValueError("baseline must be positive")
    return value


def cmd_ingest(args) -> int:
    corpus = load_events(args.path)
    stats = corpus.stats
    out = Path(args.index_out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "corpus.pkl", "wb") as fh:
        pickle.dump(corpus, fh)
    with open(out / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(stats), fh, sort_keys=True, indent=2)
    print(f"lines={stats.lines} posts={stats.posts} comments={stats.comments} "
          f"rejected={stats.rejected} dangling={stats.dangling_comments}")
    return EXIT_OK


def cmd_crosslinks(args) -> int:
    corpus = _load_corpus(args.corpus)
    links = _get_links(corpus, args)
    stream = _out_stream(args.out)
    try:
        for link in links:
            stream.write(json.dumps(dataclasses.asdict(link), sort_keys=True) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()
    print(f"extracted {len(links)} cross-links", file=sys.stderr)
    return EXIT_OK


def cmd_detect(args) -> int:
    corpus = _load_corpus(args.corpus)
    links = _get_links(corpus, args)
    baseline = _resolve_baseline(corpus, links, args)
    stream = _out_stream(args.out)
    n_mob = 0
    try:
        for link in links:
            record = detect(corpus, link, baseline, links=links, window_hours=args.window_hours)
            n_mob += record.verdict == "mobilization"
            stream.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()
    print(f"baseline={baseline:.4f} mobilizations={n_mob}/{len(links)}", file=sys.stderr)
    return EXIT_OK


def cmd_match(args) -> int:
    corpus = _load_corpus(args.corpus)
    links = _get_links(corpus, args)
    pair = matched_post(corpus, links, args.post)
    print(json.dumps(dataclasses.asdict(pair), sort_keys=True, indent=2))
    return EXIT_OK


def cmd_sentiment(args) -> int:
    corpus = _load_corpus(args.corpus)
    lexicon = _load_lexicon_arg(args.lexicon_dir)
    links = _get_links(corpus, args)
    if args.action == "train":
        labels = {}
        with open(args.labels, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                post_id, _, label = line.partition(",")
                labels[post_id.strip()] = label.strip()
        X, y = [], []
        for link in links:
            if link.source_post in labels:
                X.append(crosslink_features(corpus, link, lexicon))
                y.append(labels[link.source_post])
        if not X:
            raise ValueError("no labeled cross-links found")
        forest = train_forest(X, y, trees=args.trees, seed=args.seed)
        forest.save(args.model)
        print(f"trained on {len(X)} examples, oob_accuracy={forest.oob_accuracy}")
        return EXIT_OK
    model = load_forest(args.model)
    stream = _out_stream(args.out)
    try:
        for link in links:
            label, p_neg = predict_sentiment(model, link, corpus, lexicon)
            stream.write(json.dumps({"source_post": link.source_post, "label": label,
                                     "p_negative": p_neg}, sort_keys=True) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()
    return EXIT_OK


def cmd_replynet(args) -> int:
    corpus = _load_corpus(args.corpus)
    links = _get_links(corpus, args)
    by_id = {l.source_post: l for l in links}
    if args.mobilization not in by_id:
        raise KeyError(f"no cross-link with source post {args.mobilization!r}")
    link = by_id[args.mobilization]
    baseline = _resolve_baseline(corpus, links, args)
    record = detect(corpus, link, baseline, window_hours=args.window_hours)
    comments = corpus.thread_comments.get(link.target_post, [])
    graph = build_reply_graph(comments, link.target_post, record.attackers, record.defenders)
    stream = _out_stream(args.out)
    try:
        for (src, dst), weight in sorted(graph.edges.items()):
            stream.write(f"{src} {dst} {weight} {graph.nodes[src]} {graph.nodes[dst]}\n")
    finally:
        if stream is not sys.stdout:
            stream.close()
    if record.attackers and record.defenders:
        echo = echo_metrics(graph)
        print(json.dumps({k: v for k, v in dataclasses.asdict(echo).items()},
                         sort_keys=True, indent=2, default=str), file=sys.stderr)
    else:
        print("verdict is not a two-sided mobilization; no echo metrics", file=sys.stderr)
    return EXIT_OK


def cmd_impact(args) -> int:
    config = Config(corpus=args.corpus, output_dir=args.out, seed=args.seed,
                    baseline=args.baseline, window_hours=args.window_hours)
    result = run_pipeline(config)
    print(f"impact outputs in {result.output_dir}")
    return EXIT_OK


def cmd_embed(args) -> int:
    corpus = _load_corpus(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graph = embed_mod.build_bipartite(corpus)
    table = embed_mod.train_embeddings(graph, dim=args.dim, negatives=args.negatives,
                                       epochs=args.epochs, seed=args.seed)
    embed_mod.save_vectors(out / "users.vec", table.users, table.user_vectors)
    embed_mod.save_vectors(out / "communities.vec", table.communities, table.community_vectors)
    if args.with_words:
        word_graph = embed_mod.build_word_bipartite(corpus, max_vocab=args.vocab_size)
        word_table = embed_mod.train_embeddings(word_graph, dim=args.dim,
                                                negatives=args.negatives,
                                                epochs=max(1, args.epochs // 2),
                                                seed=args.seed + 1)
        embed_mod.save_vectors(out / "words.vec", word_table.users, word_table.user_vectors)
    sample_loss = embed_mod.loss(graph, table, seed=args.seed,
                                 sample_size=min(2000, graph.n_edges))
    print(f"edges={graph.n_edges} users={len(table.users)} "
          f"communities={len(table.communities)} loss={sample_loss:.4f}")
    return EXIT_OK


def _load_embedding_table(directory: str, dim: int) -> tuple[embed_mod.EmbeddingTable, dict]:
    d = Path(directory)
    user_vectors = embed_mod.load_vectors(d / "users.vec")
    community_vectors = embed_mod.load_vectors(d / "communities.vec")
    word_vectors = embed_mod.load_vectors(d / "words.vec") if (d / "words.vec").exists() else {}
    names_u, names_c = sorted(user_vectors), sorted(community_vectors)
    table = embed_mod.EmbeddingTable(
        users=names_u, communities=names_c,
        user_vectors=np.vstack([user_vectors[u] for u in names_u]),
        community_vectors=np.vstack([community_vectors[c] for c in names_c]),
        dim=dim,
    )
    return table, word_vectors


def cmd_predict(args) -> int:
    corpus = _load_corpus(args.corpus)
    links = _get_links(corpus, args)

    if args.action == "train":
        baseline = _resolve_baseline(corpus, links, args)
        labels = {}
        for link in links:
            record = detect(corpus, link, baseline, window_hours=args.window_hours)
            labels[link.source_post] = 1 if record.verdict == "mobilization" else 0
        table, word_vectors = _load_embedding_table(args.embeddings, args.dim)
        dataset = pred_mod.build_dataset(corpus, links, labels, table, word_vectors,
                                         seed=args.seed, max_words=args.max_words)
        result = pred_mod.train(dataset, init_params(args.dim, args.hidden, seed=args.seed),
                                lr=args.lr, epochs=args.epochs,
                                seed=substream_seed(args.seed, "train"))
        with open(args.model, "wb") as fh:
            pickle.dump({
                "format": "intercom-lstm", "version": 1,
                "input_dim": result.params.input_dim, "hidden_dim": result.params.hidden_dim,
                "weights": result.params.weights, "seed": args.seed,
                "max_words": args.max_words, "log": result.log,
            }, fh)
        print(f"trained; best val AUC = {result.best_val_auc}")
        return EXIT_OK

    with open(args.model, "rb") as fh:
        checkpoint = pickle.load(fh)
    if checkpoint.get("format") != "intercom-lstm":
        raise ValueError(f"{args.model} is not an LSTM checkpoint")
    from .lstm import LSTMParams

    params = LSTMParams(input_dim=checkpoint["input_dim"], hidden_dim=checkpoint["hidden_dim"],
                        weights=checkpoint["weights"])
    table, word_vectors = _load_embedding_table(args.embeddings, checkpoint["input_dim"])

    if args.action == "score":
        stream = _out_stream(args.out)
        try:
            for link in links:
                try:
                    seq = pred_mod.assemble_sequence(link, corpus, table, word_vectors,
                                                     max_words=checkpoint.get("max_words", 50))
                except pred_mod.MissingEmbeddingError:
                    continue
                prob = pred_mod.predict_prob(seq, params)
                stream.write(json.dumps({"source_post": link.source_post,
                                         "p_mobilization": prob}, sort_keys=True) + "\n")
        finally:
            if stream is not sys.stdout:
                stream.close()
        return EXIT_OK

    # eval: rebuild the dataset with the checkpoint's seed and report test AUC
    baseline = _resolve_baseline(corpus, links, args)
    labels = {}
    for link in links:
        record = detect(corpus, link, baseline, window_hours=args.window_hours)
        labels[link.source_post] = 1 if record.verdict == "mobilization" else 0
    dataset = pred_mod.build_dataset(corpus, links, labels, table, word_vectors,
                                     seed=checkpoint["seed"],
                                     max_words=checkpoint.get("max_words", 50))
    scores = [pred_mod.predict_prob(dataset.sequences[i], params) for i in dataset.test_idx]
    test_labels = [int(dataset.labels[i]) for i in dataset.test_idx]
    if len(set(test_labels)) < 2:
        raise ValueError("test split has a single class; cannot compute AUC")
    print(f"test AUC = {pred_mod.auc(scores, test_labels):.4f} on {len(test_labels)} examples")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = SynthSpec(**json.load(fh))
    else:
        spec = SynthSpec()
    for name in ("n_communities", "n_crosslinks", "seed", "days",
                 "mobilization_fraction", "burst_ratio", "quiet_ratio", "matched_ratio"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(spec, name, value)
    events_path, manifest = generate_corpus(spec, args.out)
    print(f"wrote {manifest['counts']['events']} events to {events_path} "
          f"({manifest['counts']['mobilizations']} planted mobilizations)")
    return EXIT_OK


def cmd_report(args) -> int:
    config = load_config(args.config) if args.config else Config()
    overrides = dict(kv.split("=", 1) for kv in args.set)
    if args.corpus:
        overrides["corpus"] = args.corpus
    if args.out:
        overrides["output_dir"] = args.out
    apply_overrides(config, overrides)
    result = run_pipeline(config)
    cached = f" (cache hits: {', '.join(result.cache_hits)})" if result.cache_hits else ""
    print(f"report bundle in {result.output_dir}{cached}")
    return EXIT_OK


def _add_corpus_opts(p, baseline: bool = False):
    p.add_argument("--corpus", required=True, help="event log .jsonl or ingest index dir")
    p.add_argument("--hosts", default="", help="comma-separated cross-link host allowlist")
    p.add_argument("--window-hours", type=float, default=12.0, dest="window_hours")
    if baseline:
        p.add_argument("--baseline", default="auto", help="'auto' or a positive number")
        p.add_argument("--stat", choices=("mean", "median"), default="mean")


def build_parser() -> _Parser:
    parser = _Parser(prog="intercom",
                     description="Intercommunity mobilization detection and prediction toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and index an event log")
    p.add_argument("path")
    p.add_argument("--index-out", required=True, dest="index_out")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("crosslinks", help="extract cross-community links")
    _add_corpus_opts(p)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_crosslinks)

    p = sub.add_parser("detect", help="classify cross-links against the null model")
    _add_corpus_opts(p, baseline=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("match", help="debug: nearest cross-link-free post")
    _add_corpus_opts(p)
    p.add_argument("--post", required=True)
    p.set_defaults(fn=cmd_match)

    p = sub.add_parser("sentiment", help="train or apply the sentiment classifier")
    p.add_argument("action", choices=("train", "predict"))
    _add_corpus_opts(p)
    p.add_argument("--model", required=True)
    p.add_argument("--labels", help="CSV of source_post,label (train)")
    p.add_argument("--lexicon-dir", dest="lexicon_dir")
    p.add_argument("--trees", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sentiment)

    p = sub.add_parser("replynet", help="reply graph and echo metrics for one mobilization")
    _add_corpus_opts(p, baseline=True)
    p.add_argument("--mobilization", required=True, help="source post id of the cross-link")
    p.add_argument("--out", help="edge list output (src dst weight groups)")
    p.set_defaults(fn=cmd_replynet)

    p = sub.add_parser("impact", help="activity deltas, defense success, series")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--baseline", default="auto")
    p.add_argument("--window-hours", type=float, default=12.0, dest="window_hours")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_impact)

    p = sub.add_parser("embed", help="train user/community embeddings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--vocab-size", type=int, default=10000, dest="vocab_size")
    p.add_argument("--with-words", action="store_true", dest="with_words")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("predict", help="train/eval/score the mobilization predictor")
    p.add_argument("action", choices=("train", "eval", "score"))
    _add_corpus_opts(p, baseline=True)
    p.add_argument("--embeddings", required=True, help="dir with users/communities/words .vec")
    p.add_argument("--model", required=True)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--max-words", type=int, default=50, dest="max_words")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted mobilizations")
    p.add_argument("--out", required=True)
    p.add_argument("--spec", help="JSON file of SynthSpec fields")
    p.add_argument("--n-communities", type=int, dest="n_communities")
    p.add_argument("--n-crosslinks", type=int, dest="n_crosslinks")
    p.add_argument("--days", type=int)
    p.add_argument("--mobilization-fraction", type=float, dest="mobilization_fraction")
    p.add_argument("--burst-ratio", type=float, dest="burst_ratio")
    p.add_argument("--quiet-ratio", type=float, dest="quiet_ratio")
    p.add_argument("--matched-ratio", type=float, dest="matched_ratio")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("report", help="run the full pipeline and emit the report bundle")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--corpus")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc.cause, DATA_ERRORS) else EXIT_INTERNAL
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
