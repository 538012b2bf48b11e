"""Pipeline orchestration: configuration, staged execution, report bundle."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import embed as embed_mod
from . import impact as impact_mod
from . import predictor as pred_mod
from .corpus import CrossLink, extract_crosslinks, load_events
from .forest import load_forest, train_forest
from .lstm import init_params, mean_hidden
from .mobilization import BaselineError, MobilizationRecord, baseline_ratio, detect
from .replynet import build_reply_graph, echo_metrics, group_pagerank, anger_rate
from .sentiment import builtin_lexicon, community_tfidf_vectors, load_lexicon, predict_sentiment

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STAGE_ORDER = [
    "ingest", "crosslinks", "baseline", "detect", "sentiment",
    "replynet", "impact", "embed", "predict", "report",
]
# path-valued keys are excluded from the manifest echo so bundles written to
# different directories stay byte-identical
_PATH_KEYS = {"corpus", "output_dir", "lexicon_dir", "sentiment_model"}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class Config:
    corpus: str = ""
    output_dir: str = ""
    lexicon_dir: str = ""  # empty: builtin lexicon
    sentiment_model: str = ""  # empty: leave records unlabeled
    host_allowlist: str = ""  # comma separated; empty: any host
    window_hours: float = 12.0
    baseline: str = "auto"  # "auto" or a positive float literal
    baseline_stat: str = "mean"
    default_baseline: float = 1.6
    alpha: float = 0.25
    pagerank_tol: float = 1e-10
    pagerank_max_iter: int = 10000
    vocab_size: int = 10000
    embed_enabled: bool = False
    embed_dim: int = 32
    embed_epochs: int = 20
    embed_negatives: int = 5
    predict_enabled: bool = False
    hidden_size: int = 64
    predict_epochs: int = 10
    predict_lr: float = 0.01
    max_words: int = 50
    ensemble_trees: int = 100
    forest_trees: int = 400
    seed: int = 0

    def validate(self) -> None:
        checks = [
            (0 < self.window_hours <= 24 * 14, "window_hours must be in (0, 336]"),
            (0 < self.alpha < 1, "alpha must be in (0, 1)"),
            (self.pagerank_tol > 0, "pagerank_tol must be positive"),
            (self.pagerank_max_iter >= 1, "pagerank_max_iter must be >= 1"),
            (self.vocab_size >= 1, "vocab_size must be >= 1"),
            (self.embed_dim >= 1, "embed_dim must be >= 1"),
            (self.embed_epochs >= 1, "embed_epochs must be >= 1"),
            (self.embed_negatives >= 0, "embed_negatives must be >= 0"),
            (self.hidden_size >= 1, "hidden_size must be >= 1"),
            (self.predict_epochs >= 1, "predict_epochs must be >= 1"),
            (self.predict_lr > 0, "predict_lr must be positive"),
            (self.max_words >= 0, "max_words must be >= 0"),
            (self.ensemble_trees >= 1, "ensemble_trees must be >= 1"),
            (self.forest_trees >= 1, "forest_trees must be >= 1"),
            (self.default_baseline > 0, "default_baseline must be positive"),
            (self.baseline_stat in ("mean", "median"), "baseline_stat must be mean or median"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        if self.baseline != "auto":
            try:
                value = float(self.baseline)
            except ValueError:
                raise ConfigError("baseline must be 'auto' or a number") from None
            if value <= 0:
                raise ConfigError("baseline must be positive")
        if self.predict_enabled and not self.embed_enabled:
            raise ConfigError("predict_enabled requires embed_enabled")

    def hosts(self) -> list[str] | None:
        items = [h.strip() for h in self.host_allowlist.split(",") if h.strip()]
        return items or None


_FIELDS = {f.name: f for f in dataclasses.fields(Config)}


def _coerce(name: str, raw: str):
    kind = _FIELDS[name].type
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected a number, got {raw!r}") from None
    return raw


def load_config(path) -> Config:
    """Key-value config file: ``key = value`` lines, # comments."""
    config = Config()
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected 'key = value'")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in _FIELDS:
                raise ConfigError(f"{path}:{n}: unknown config key {key!r}")
            setattr(config, key, _coerce(key, raw))
    return config


def apply_overrides(config: Config, overrides: dict[str, str]) -> Config:
    """Flag overrides win over file values."""
    for key, raw in overrides.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(config, key, _coerce(key, raw))
    return config


def substream_seed(root: int, name: str) -> int:
    """Named, reproducible child seed of the root seed."""
    seq = np.random.SeedSequence([root & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])
    return int(seq.generate_state(1)[0])


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class PipelineResult:
    output_dir: Path
    manifest: dict
    cache_hits: list[str] = field(default_factory=list)


def _load_lexicon(config: Config):
    if config.lexicon_dir:
        return load_lexicon(config.lexicon_dir)
    return builtin_lexicon()


def run_pipeline(config: Config) -> PipelineResult:
    """ingest -> crosslinks -> baseline -> detect -> sentiment -> replynet ->
    impact [-> embed -> predict] -> report.

    Each stage's outputs are cached in the output directory and reused on
    re-runs; a stage failure halts the pipeline with the stage name while
    earlier outputs stay on disk.
    """
    config.validate()
    if not config.corpus:
        raise ConfigError("config.corpus is required")
    if not config.output_dir:
        raise ConfigError("config.output_dir is required")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache_hits: list[str] = []
    stage_info: dict[str, dict] = {}

    def run_stage(name: str, outputs: list[str], fn):
        paths = [out / rel for rel in outputs]
        if paths and all(p.exists() for p in paths):
            cache_hits.append(name)
            stage_info[name] = {"cached": True, "outputs": outputs}
            return None
        try:
            info = fn(paths) or {}
        except Exception as exc:  # noqa: BLE001 - halt with the stage name
            raise StageError(name, exc) from exc
        stage_info[name] = {"cached": False, "outputs": outputs, **info}
        return info

    # ingest
    corpus = load_events(config.corpus)

    def stage_ingest(paths):
        stats = corpus.stats
        _write_json(paths[0], {
            "lines": stats.lines, "posts": stats.posts, "comments": stats.comments,
            "rejected": stats.rejected, "dangling_comments": stats.dangling_comments,
        })
        return {"posts": stats.posts, "comments": stats.comments}

    run_stage("ingest", ["ingest.json"], stage_ingest)

    # crosslinks
    links_path = out / "crosslinks.jsonl"

    def stage_crosslinks(paths):
        links = extract_crosslinks(corpus, host_allowlist=config.hosts(),
                                   window_hours=config.window_hours)
        _write_jsonl(paths[0], [dataclasses.asdict(l) for l in links])
        return {"links": len(links)}

    run_stage("crosslinks", ["crosslinks.jsonl"], stage_crosslinks)
    links = [CrossLink(**json.loads(line)) for line in links_path.read_text().splitlines() if line]

    # baseline
    baseline_path = out / "baseline.json"

    def stage_baseline(paths):
        if config.baseline != "auto":
            value, mode, pairs, fallback = float(config.baseline), "fixed", 0, False
        else:
            try:
                value = baseline_ratio(corpus, links, window_hours=config.window_hours,
                                       stat=config.baseline_stat)
                mode, pairs, fallback = "auto", len(links), False
            except BaselineError:
                value, mode, pairs, fallback = config.default_baseline, "default", 0, True
                log.warning("no eligible matched pairs; using default baseline %.3f", value)
        _write_json(paths[0], {"value": value, "mode": mode, "stat": config.baseline_stat,
                               "fallback": fallback})
        return {"value": value}

    run_stage("baseline", ["baseline.json"], stage_baseline)
    baseline_value = json.loads(baseline_path.read_text())["value"]

    # detect
    detect_path = out / "mobilizations.jsonl"

    def stage_detect(paths):
        records = [detect(corpus, link, baseline_value, links=links,
                          window_hours=config.window_hours) for link in links]
        _write_jsonl(paths[0], [r.to_dict() for r in records])
        # machine-readable alert feed: just the positive verdicts
        _write_jsonl(paths[1], [r.to_dict() for r in records if r.verdict == "mobilization"])
        n_mob = sum(1 for r in records if r.verdict == "mobilization")
        return {"records": len(records), "mobilizations": n_mob}

    run_stage("detect", ["mobilizations.jsonl", "alerts.jsonl"], stage_detect)
    records = [MobilizationRecord.from_dict(json.loads(line))
               for line in detect_path.read_text().splitlines() if line]

    # sentiment
    sentiment_path = out / "sentiment.jsonl"

    def stage_sentiment(paths):
        lexicon = _load_lexicon(config)
        rows = []
        if config.sentiment_model:
            model = load_forest(config.sentiment_model)
            for record in records:
                label, p_neg = predict_sentiment(model, record.crosslink, corpus, lexicon)
                rows.append({"source_post": record.id, "label": label, "p_negative": p_neg})
        else:
            rows = [{"source_post": r.id, "label": "unlabeled", "p_negative": None}
                    for r in records]
        _write_jsonl(paths[0], rows)
        return {"labeled": bool(config.sentiment_model)}

    run_stage("sentiment", ["sentiment.jsonl"], stage_sentiment)
    sentiment_by_id = {json.loads(line)["source_post"]: json.loads(line)["label"]
                       for line in sentiment_path.read_text().splitlines() if line}
    for record in records:
        record.sentiment = sentiment_by_id.get(record.id, "unlabeled")

    mobilized = [r for r in records if r.verdict == "mobilization"]

    # replynet
    replynet_path = out / "replynet.csv"
    replynet_header = [
        "mobilization", "n_attackers", "n_defenders",
        "attacker_attacker_weight", "attacker_defender_weight",
        "defender_defender_weight", "defender_attacker_weight",
        "attacker_within_cross_ratio", "defender_within_cross_ratio", "cross_group_ratio",
        "defender_apr_zero_fraction", "defender_apr_tentimes_fraction",
        "defender_reply_fraction_to_attackers", "mean_defender_apr", "mean_attacker_dpr",
        "anger_attacker_to_defender", "anger_defender_to_attacker",
    ]

    def stage_replynet(paths):
        lexicon = _load_lexicon(config)
        rows = []
        skipped = 0
        for record in mobilized:
            comments = corpus.thread_comments.get(record.crosslink.target_post, [])
            graph = build_reply_graph(comments, record.crosslink.target_post,
                                      record.attackers, record.defenders)
            if not record.attackers or not record.defenders:
                skipped += 1
                continue
            echo = echo_metrics(graph, alpha=config.alpha, tol=config.pagerank_tol)
            apr = group_pagerank(graph, "attackers", alpha=config.alpha,
                                 tol=config.pagerank_tol, max_iter=config.pagerank_max_iter).scores
            dpr = group_pagerank(graph, "defenders", alpha=config.alpha,
                                 tol=config.pagerank_tol, max_iter=config.pagerank_max_iter).scores
            defender_out = sum(w for (i, _j), w in graph.edges.items() if i in record.defenders)
            reply_frac = (echo.defender_attacker_weight / defender_out) if defender_out else 0.0
            mean_dapr = sum(apr[u] for u in sorted(record.defenders)) / len(record.defenders)
            mean_adpr = sum(dpr[u] for u in sorted(record.attackers)) / len(record.attackers)
            rows.append([
                record.id, echo.n_attackers, echo.n_defenders,
                echo.attacker_attacker_weight, echo.attacker_defender_weight,
                echo.defender_defender_weight, echo.defender_attacker_weight,
                _clean(echo.attacker_within_cross_ratio), _clean(echo.defender_within_cross_ratio),
                _clean(echo.cross_group_ratio),
                echo.defender_apr_zero_fraction, echo.defender_apr_tentimes_fraction,
                reply_frac, mean_dapr, mean_adpr,
                anger_rate(comments, lexicon, record.attackers, record.defenders),
                anger_rate(comments, lexicon, record.defenders, record.attackers),
            ])
        _write_csv(paths[0], replynet_header, rows)
        return {"rows": len(rows), "skipped": skipped}

    run_stage("replynet", ["replynet.csv"], stage_replynet)

    # impact
    def stage_impact(paths):
        impact_seed = substream_seed(config.seed, "impact")
        outcomes = []
        rows = []
        per_id_metrics = {}
        with open(replynet_path, "r", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                per_id_metrics[row["mobilization"]] = row
        attacker_deltas, defender_deltas = [], []
        attacker_pairs, defender_pairs = [], []
        for record in mobilized:
            impacts = impact_mod.mobilization_impacts(corpus, record, seed=impact_seed)
            defenders = [i for i in impacts if i.role == "defender"]
            attackers = [i for i in impacts if i.role == "attacker"]
            attacker_deltas.extend(i.delta for i in attackers)
            defender_deltas.extend(i.delta for i in defenders)
            attacker_pairs.extend((i.delta, i.matched_delta) for i in attackers
                                  if i.matched_delta is not None)
            defender_pairs.extend((i.delta, i.matched_delta) for i in defenders
                                  if i.matched_delta is not None)
            if not defenders:
                continue
            outcome = impact_mod.defense_success(record, impacts)
            outcomes.append(outcome)
            mean = lambda xs: sum(xs) / len(xs) if xs else None
            rows.append([
                record.id, len(attackers), len(defenders),
                mean([i.delta for i in attackers]), mean([i.delta for i in defenders]),
                mean([i.matched_delta for i in attackers if i.matched_delta is not None]),
                mean([i.matched_delta for i in defenders if i.matched_delta is not None]),
                outcome.success_score, None,
            ])
        impact_mod.assign_deciles(outcomes)
        decile_by_id = {o.mobilization_id: o.decile for o in outcomes}
        for row in rows:
            row[-1] = decile_by_id.get(row[0])
        _write_csv(paths[0], [
            "mobilization", "n_attackers", "n_defenders",
            "mean_attacker_delta", "mean_defender_delta",
            "mean_attacker_matched_delta", "mean_defender_matched_delta",
            "success_score", "decile",
        ], rows)

        series_specs = [
            ("series_reply_fraction.csv", "defender_reply_fraction_to_attackers"),
            ("series_defender_apr.csv", "mean_defender_apr"),
            ("series_attacker_dpr.csv", "mean_attacker_dpr"),
            ("series_defender_anger.csv", "anger_defender_to_attacker"),
        ]
        for filename, column in series_specs:
            def metric(outcome, column=column):
                row = per_id_metrics.get(outcome.mobilization_id)
                if not row or not row.get(column):
                    return 0.0
                return float(row[column])
            series = impact_mod.decile_series(outcomes, metric)
            _write_csv(out / filename, ["success_score", column, "smoothed"],
                       [[x, y, int(series.smoothed)] for x, y in series.points])

        tests = {}
        if attacker_deltas and defender_deltas:
            u, p = impact_mod.mann_whitney_u(defender_deltas, attacker_deltas)
            tests["defender_vs_attacker_delta_mwu"] = {"U": u, "p": p}
        for name, pairs in (("attacker_delta_vs_matched_wilcoxon", attacker_pairs),
                            ("defender_delta_vs_matched_wilcoxon", defender_pairs)):
            try:
                w, p = impact_mod.wilcoxon_signed_rank(pairs)
                tests[name] = {"W": w, "p": p}
            except ValueError:
                tests[name] = None
        _write_json(out / "stat_tests.json", tests)
        return {"outcomes": len(outcomes)}

    run_stage("impact", [
        "impact.csv", "stat_tests.json", "series_reply_fraction.csv",
        "series_defender_apr.csv", "series_attacker_dpr.csv", "series_defender_anger.csv",
    ], stage_impact)

    # embed (optional)
    if config.embed_enabled:
        def stage_embed(paths):
            seed = substream_seed(config.seed, "embed")
            graph = embed_mod.build_bipartite(corpus)
            table = embed_mod.train_embeddings(
                graph, dim=config.embed_dim, negatives=config.embed_negatives,
                epochs=config.embed_epochs, seed=seed,
            )
            embed_mod.save_vectors(out / "users.vec", table.users, table.user_vectors)
            embed_mod.save_vectors(out / "communities.vec", table.communities, table.community_vectors)
            word_graph = embed_mod.build_word_bipartite(corpus, max_vocab=config.vocab_size)
            word_table = embed_mod.train_embeddings(
                word_graph, dim=config.embed_dim, negatives=config.embed_negatives,
                epochs=max(1, config.embed_epochs // 2),
                seed=substream_seed(config.seed, "words"),
            )
            embed_mod.save_vectors(out / "words.vec", word_table.users, word_table.user_vectors)
            final_loss = embed_mod.loss(graph, table, seed=seed,
                                        sample_size=min(2000, graph.n_edges))
            _write_json(out / "embed.json", {
                "dim": config.embed_dim, "edges": graph.n_edges,
                "users": len(table.users), "communities": len(table.communities),
                "words": len(word_table.users), "loss": final_loss,
            })
            return {"edges": graph.n_edges}

        run_stage("embed", ["users.vec", "communities.vec", "words.vec", "embed.json"], stage_embed)

    # predict (optional)
    if config.predict_enabled:
        def stage_predict(paths):
            import pickle

            lexicon = _load_lexicon(config)
            user_vectors = embed_mod.load_vectors(out / "users.vec")
            community_vectors = embed_mod.load_vectors(out / "communities.vec")
            word_vectors = embed_mod.load_vectors(out / "words.vec")
            names_u = sorted(user_vectors)
            names_c = sorted(community_vectors)
            table = embed_mod.EmbeddingTable(
                users=names_u,
                communities=names_c,
                user_vectors=np.vstack([user_vectors[u] for u in names_u]),
                community_vectors=np.vstack([community_vectors[c] for c in names_c]),
                dim=config.embed_dim,
                negatives=config.embed_negatives,
            )
            labels = {r.id: 1 if r.verdict == "mobilization" else 0 for r in records}
            dataset = pred_mod.build_dataset(
                corpus, links, labels, table, word_vectors,
                seed=substream_seed(config.seed, "split"), max_words=config.max_words,
            )
            result = pred_mod.train(
                dataset, init_params(config.embed_dim, config.hidden_size,
                                     seed=substream_seed(config.seed, "lstm")),
                lr=config.predict_lr, epochs=config.predict_epochs,
                seed=substream_seed(config.seed, "train"),
            )
            with open(out / "lstm_model.pkl", "wb") as fh:
                pickle.dump({
                    "format": "intercom-lstm", "version": 1,
                    "input_dim": result.params.input_dim, "hidden_dim": result.params.hidden_dim,
                    "weights": result.params.weights, "seed": config.seed,
                    "log": result.log,
                }, fh)

            tfidf_vectors = community_tfidf_vectors(corpus, config.vocab_size)
            link_by_id = {l.source_post: l for l in links}
            feats, uembs, cembs, hiddens, ys = [], [], [], [], []
            test_scores, test_labels = [], []
            split_of = {}
            for name, idx in (("train", dataset.train_idx), ("val", dataset.val_idx),
                              ("test", dataset.test_idx)):
                for i in idx:
                    split_of[i] = name
            for i, link_id in enumerate(dataset.link_ids):
                link = link_by_id[link_id]
                seq = dataset.sequences[i]
                score = pred_mod.predict_prob(seq, result.params)
                if split_of.get(i) == "test":
                    test_scores.append(score)
                    test_labels.append(int(dataset.labels[i]))
                feats.append(pred_mod.baseline_features(
                    corpus, link, lexicon, tfidf_vectors=tfidf_vectors))
                uembs.append(seq[0])
                cembs.append((seq[1], seq[2]))
                hiddens.append(mean_hidden(seq, result.params))
                ys.append(int(dataset.labels[i]))

            def forest_auc(rows):
                train_rows = [rows[i] for i in dataset.train_idx]
                train_y = [ys[i] for i in dataset.train_idx]
                if len(set(train_y)) < 2:
                    return None
                forest = train_forest(train_rows, train_y, trees=config.ensemble_trees,
                                      seed=substream_seed(config.seed, "forest"))
                test_rows = [rows[i] for i in dataset.test_idx]
                test_y = [ys[i] for i in dataset.test_idx]
                if len(set(test_y)) < 2:
                    return None
                proba = forest.predict_proba(test_rows)[:, forest.classes.index(1)]
                return pred_mod.auc(proba, test_y)

            lstm_auc = pred_mod.auc(test_scores, test_labels) if len(set(test_labels)) == 2 else None
            baseline_auc = forest_auc(feats)
            ensemble_rows = [pred_mod.ensemble_features(f, u, cs, ct, h)
                             for f, u, (cs, ct), h in zip(feats, uembs, cembs, hiddens)]
            ensemble_auc = forest_auc(ensemble_rows)
            _write_json(out / "predict.json", {
                "examples": len(ys),
                "train": int(dataset.train_idx.size),
                "val": int(dataset.val_idx.size),
                "test": int(dataset.test_idx.size),
                "backoff_count": dataset.backoff_count,
                "best_val_auc": _clean(result.best_val_auc),
                "lstm_test_auc": _clean(lstm_auc),
                "baseline_test_auc": _clean(baseline_auc),
                "ensemble_test_auc": _clean(ensemble_auc),
            })
            return {"examples": len(ys)}

        run_stage("predict", ["predict.json", "lstm_model.pkl"], stage_predict)

    # report
    def stage_report(paths):
        stage_info["report"] = {"cached": False, "outputs": ["manifest.json"]}
        config_echo = {
            k: v for k, v in dataclasses.asdict(config).items() if k not in _PATH_KEYS
        }
        files = {}
        for p in sorted(out.iterdir()):
            if p.name == "manifest.json" or p.is_dir():
                continue
            files[p.name] = _sha256(p)
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "config": config_echo,
            "stages": {k: stage_info.get(k) for k in STAGE_ORDER if k in stage_info},
            "files": files,
        }
        _write_json(paths[0], manifest)

    run_stage("report", ["manifest.json"], stage_report)
    manifest = json.loads((out / "manifest.json").read_text())
    validate_bundle(out)
    return PipelineResult(output_dir=out, manifest=manifest, cache_hits=cache_hits)


def validate_bundle(output_dir) -> None:
    """Check the report bundle against its schema: manifest shape, files
    present, hashes correct."""
    out = Path(output_dir)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise ValueError("bundle has no manifest.json")
    manifest = json.loads(manifest_path.read_text())
    for key in ("schema_version", "config", "stages", "files"):
        if key not in manifest:
            raise ValueError(f"manifest missing {key!r}")
    if manifest["schema_version"] != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {manifest['schema_version']}")
    for name, digest in manifest["files"].items():
        path = out / name
        if not path.exists():
            raise ValueError(f"bundle file missing: {name}")
        if _sha256(path) != digest:
            raise ValueError(f"bundle file hash mismatch: {name}")
