"""``llmsocial`` command line.

Every output file gets a ``<name>.meta.json`` sidecar holding the tool
version, the seed and a hash of the effective parameters, so two runs
with the same inputs produce byte-identical directories.  Outputs are
split into ``raw/``, ``reports/`` and ``figures_data/`` under ``--out``.

Exit codes: 0 success, 1 bad input or usage, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from collections import Counter, defaultdict
from pathlib import Path

import numpy as np

from . import __version__
from .core import export_jsonl, ingest_jsonl, snapshot_at
from .errors import LLMSocialError, NoRelevantPosts, UsageError, ValidationError

logger = logging.getLogger("llmsocial")

RAW, REPORTS, FIGURES = "raw", "reports", "figures_data"

DEFAULT_SIM = {
    "ticks": 90,
    "agents": [
        {"count": 10, "policy": "scripted", "params": {"topic_affinities": {"science": 1.0}, "follow_homophily": 1.0}},
        {"count": 10, "policy": "scripted", "params": {"topic_affinities": {"sports": 1.0}, "follow_homophily": 1.0,
                                                       "toxicity_rate": 0.2}},
    ],
}


# ---------------------------------------------------------------------------
# Output plumbing

def _plain(obj):
    """JSON-safe copy: numpy scalars unwrapped, NaN/inf mapped to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else repr(float(v))
    return v


def config_hash(params: dict) -> str:
    return hashlib.sha256(json.dumps(_plain(params), sort_keys=True).encode("utf-8")).hexdigest()


class OutputDir:
    """Writes files plus their provenance sidecars under one root."""

    def __init__(self, root, command: str, seed: int | None, params: dict):
        self.root = Path(root)
        self.meta = {"tool": "llmsocial", "version": __version__, "command": command, "seed": seed,
                     "config_hash": config_hash(params), "config": _plain(params)}
        self.written: list[str] = []

    def path(self, sub: str, name: str) -> Path:
        d = self.root / sub
        d.mkdir(parents=True, exist_ok=True)
        return d / name

    def seal(self, p: Path) -> None:
        Path(str(p) + ".meta.json").write_text(_dumps({**self.meta, "file": p.name}), encoding="utf-8")
        self.written.append(str(p.relative_to(self.root)))

    def json(self, sub: str, name: str, obj) -> Path:
        p = self.path(sub, name)
        p.write_text(_dumps(obj), encoding="utf-8")
        self.seal(p)
        return p

    def csv(self, sub: str, name: str, header, rows) -> Path:
        p = self.path(sub, name)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(v) for v in r])
        self.seal(p)
        return p


# ---------------------------------------------------------------------------
# Config

def _load_config(path) -> dict:
    if path is None:
        return {}
    from .sim import load_config_file

    try:
        raw = load_config_file(path)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from exc
    except Exception as exc:  # yaml errors do not share a base we import eagerly
        if type(exc).__module__.startswith("yaml"):
            raise UsageError(f"cannot parse config {path}: {exc}") from exc
        raise
    if not isinstance(raw, dict):
        raise UsageError("config file must hold a mapping")
    return raw


def _params(args, cfg: dict, section: str, defaults: dict) -> dict:
    """Defaults, then the config section, then explicit command-line flags."""
    out = dict(defaults)
    node = cfg
    for key in section.split("."):
        node = node.get(key, {}) if isinstance(node, dict) else {}
    unknown = set(node) - set(defaults)
    if unknown:
        raise UsageError(f"unknown keys in config section {section!r}: {sorted(unknown)}")
    out.update(node)
    for k in defaults:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _need_seed(args) -> int:
    if args.seed is None:
        raise UsageError(f"{args.command_name} is randomized and needs an explicit --seed")
    return args.seed


def _workers(cfg: dict) -> int:
    return int(cfg.get("max_in_flight", os.cpu_count() or 1))


def _encoder(cfg: dict):
    from .text import RemoteEncoder, hashed_bow_encoder

    block = cfg.get("adapters", {}).get("encoder")
    if block:
        return RemoteEncoder(url=block["url"], D=int(block.get("dim", 384)), cache_path=block.get("cache"))
    return hashed_bow_encoder()


def _scorer(cfg: dict, lexicon=None):
    from .toxicity import RemoteScorer, lexicon_scorer

    block = cfg.get("adapters", {}).get("scorer")
    if block:
        return RemoteScorer(url=block["url"], cache_path=block.get("cache"), max_in_flight=_workers(cfg))
    return lexicon_scorer(lexicon)


def _labeler(cfg: dict):
    from .ideology import LexiconPersona, LexiconStance, RemoteLabeler

    block = cfg.get("adapters", {}).get("labeler")
    if block:
        r = RemoteLabeler(url=block["url"], cache_path=block.get("cache"))
        return r, r
    return LexiconStance(), LexiconPersona()


def _read_log(path):
    if path is None:
        raise UsageError("--log is required")
    return ingest_jsonl(path, strict=True)


# ---------------------------------------------------------------------------
# Commands

def cmd_simulate(args, cfg):
    from .sim import Simulation, config_from_dict

    seed = _need_seed(args)
    raw = cfg.get("simulation", cfg) if cfg else DEFAULT_SIM
    try:
        sim_cfg = config_from_dict(raw, seed)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"bad simulation config: {exc}") from exc
    out = OutputDir(args.out, "simulate", seed, raw)
    sim = Simulation(sim_cfg)
    log = sim.run()
    p = out.path(RAW, "events.jsonl")
    export_jsonl(log, p)
    out.seal(p)
    snap = snapshot_at(log)
    out.json(REPORTS, "simulation.json", {
        "n_events": len(log),
        "n_agents": len(snap.agents),
        "n_posts": len(snap.posts),
        "event_kinds": dict(sorted(Counter(e.kind for e in log).items())),
        "metrics": dict(sorted(log.metrics.items())),
    })
    return out


def cmd_ingest(args, cfg):
    log = ingest_jsonl(args.input, strict=not args.lenient)
    out = OutputDir(args.out, "ingest", None, {"input": Path(args.input).name, "strict": not args.lenient})
    p = out.path(RAW, "events.jsonl")
    export_jsonl(log, p)
    out.seal(p)
    out.json(REPORTS, "ingest.json", {
        "n_events": len(log),
        "event_kinds": dict(sorted(Counter(e.kind for e in log).items())),
        "last_timestamp": log.last_timestamp,
    })
    return out


def cmd_analyze_graph(args, cfg):
    from .graph import (
        FollowGraph, avg_clustering_by_degree, avg_shortest_path, connected_components,
        degree_preserving_random, degree_histogram, reciprocity,
    )
    from .errors import EmptyGraph, NoReachablePairs

    params = _params(args, cfg, "analyze.graph", {"path_policy": "auto", "path_pairs": 100_000,
                                                  "swaps_per_edge": 10})
    out = OutputDir(args.out, "analyze graph", args.seed, params)
    g = FollowGraph.from_snapshot(snapshot_at(_read_log(args.log)))
    rows = [(mode, d, c) for mode in ("in", "out", "undirected", "mutual")
            for d, c in degree_histogram(g, mode).items()]
    out.csv(FIGURES, "degree.csv", ["mode", "degree", "count"], rows)
    out.csv(FIGURES, "clustering.csv", ["degree", "avg_clustering"], avg_clustering_by_degree(g.undirected()).items())

    def paths(h, seed):
        try:
            ps = avg_shortest_path(h, params["path_policy"], int(params["path_pairs"]), seed)
            return {"mean": ps.mean, "sd": ps.sd, "n_pairs": ps.n_pairs, "n_unreachable": ps.n_unreachable,
                    "policy": ps.policy}
        except NoReachablePairs:
            return None

    # sampled paths draw random pairs, so they need the seed
    if params["path_policy"] == "sampled" or (params["path_policy"] == "auto" and len(g) > 10_000):
        _need_seed(args)
    rep = {"observed": paths(g, args.seed or 0), "components": connected_components(g)}
    try:
        rec = {"observed": reciprocity(g)}
    except EmptyGraph:
        rec = {"observed": None}
    if args.seed is not None and g.n_edges() > 1:
        null = degree_preserving_random(g, seed=args.seed, swaps_per_edge=int(params["swaps_per_edge"]))
        rep["random_baseline"] = paths(null, args.seed)
        rec["random_baseline"] = reciprocity(null)
    out.json(REPORTS, "paths.json", rep)
    out.json(REPORTS, "reciprocity.json", rec)
    return out


def cmd_analyze_homophily(args, cfg):
    from .homophily import community_homophily, individual_follow_homophily

    seed = _need_seed(args)
    params = _params(args, cfg, "analyze.homophily", {"n_random": 100, "min_community_frac": 0.01,
                                                      "window": "month", "max_nonneighbor_sample": 1000})
    out = OutputDir(args.out, "analyze homophily", seed, params)
    log = _read_log(args.log)
    enc = _encoder(cfg)
    com = community_homophily(snapshot_at(log), enc, float(params["min_community_frac"]),
                              int(params["n_random"]), seed)
    out.csv(FIGURES, "community_homophily_agents.csv", ["agent_id", "community", "E_C", "E_bar_C"],
            [(a, r["community"], r["E_C"], r["E_bar_C"]) for a, r in sorted(com.per_agent.items())])
    window = params["window"]
    window = window if window == "month" else int(window)
    ind = individual_follow_homophily(log, enc, window, int(params["max_nonneighbor_sample"]), seed)
    out.csv(FIGURES, "follow_homophily_windows.csv", ["window_start", "mean_ratio", "n"],
            [(w, v, ind.per_window_n.get(w, 0)) for w, v in sorted(ind.per_window.items())])
    out.json(REPORTS, "homophily.json", {
        "community": {"mean_ratio": com.mean_ratio, "n_communities": com.n_communities, "n_random": com.n_random,
                      "n_agents": len(com.per_agent), "excluded_small_communities": com.excluded_small_communities},
        "individual": {"overall_mean": ind.overall_mean, "n_ratios": ind.n_ratios},
    })
    return out


def cmd_analyze_influence(args, cfg):
    from .homophily import MEASURES, MONTH_MS, backstory_drift, neighbor_convergence

    params = _params(args, cfg, "analyze.influence", {"bucket_ms": MONTH_MS, "n_buckets": 12, "mode": "windowed",
                                                      "min_bucket_size": 5})
    out = OutputDir(args.out, "analyze influence", None, params)
    log = _read_log(args.log)
    enc = _encoder(cfg)
    b, m = int(params["bucket_ms"]), int(params["min_bucket_size"])
    drift = backstory_drift(log, MEASURES, b, enc, m)
    conv = neighbor_convergence(log, enc, b, int(params["n_buckets"]), params["mode"], m)
    out.csv(FIGURES, "backstory_drift.csv", ["measure", "bucket", "mean", "n"],
            [(name, *row) for name, s in drift.items() for row in s.to_rows()])
    out.csv(FIGURES, "neighbor_convergence.csv", ["cohort", "bucket", "mean", "n"],
            [(name, *row) for name, s in sorted(conv.items()) for row in s.to_rows()])

    def summary(s):
        rep = {"suppressed": s.suppressed, "n_buckets": len(s.buckets)}
        if s.buckets:
            rep["ratio_last_first"] = s.ratio_last_first()
            rep["spearman"] = s.trend() if len(s.buckets) > 1 else None
        return rep

    out.json(REPORTS, "influence.json", {
        "backstory_drift": {k: summary(s) for k, s in drift.items()},
        "neighbor_convergence": {k: summary(s) for k, s in sorted(conv.items())},
    })
    return out


def cmd_analyze_toxicity(args, cfg):
    from .graph import FollowGraph
    from .toxicity import (
        DEFAULT_THRESHOLDS, build_profiles, compare_engagement_by_toxicity, linguistic_comparison,
        toxic_engagement_gap, toxic_homophily, toxicity_concentration,
    )

    params = _params(args, cfg, "analyze.toxicity", {"lexicon": None, "thresholds": list(DEFAULT_THRESHOLDS)})
    out = OutputDir(args.out, "analyze toxicity", None, params)
    snap = snapshot_at(_read_log(args.log))
    posts = snap.posts_in_order()
    profiles = build_profiles(posts, _scorer(cfg, params["lexicon"]), snap.agents, params["thresholds"])
    out.csv(FIGURES, "profiles.csv", ["agent_id", "n_posts", "n_toxic", "mean_toxicity"],
            [(p.agent_id, p.n_posts, p.n_toxic, p.mean_toxicity) for p in profiles.values()])
    rep: dict = {"n_agents": len(profiles), "n_posts": len(posts),
                 "n_toxic_posts": sum(p.n_toxic for p in profiles.values())}

    def attempt(name, fn):
        try:
            rep[name] = fn()
        except ValidationError as exc:
            rep[name] = {"skipped": str(exc)}

    def concentration():
        c = toxicity_concentration(profiles)
        out.csv(FIGURES, "concentration.csv", ["toxic_post_bin", "share"], c.items())
        return c

    def t_test():
        r = compare_engagement_by_toxicity(profiles, posts)
        return vars(r)

    def gap():
        r = toxic_engagement_gap(profiles, posts)
        return {"frac_higher_on_nontoxic": r.frac_agents_higher_on_nontoxic,
                "frac_higher_on_toxic": r.frac_agents_higher_on_toxic, "frac_equal": r.frac_equal}

    def homophily():
        g = FollowGraph.from_snapshot(snap)
        return {str(k): vars(v) for k, v in toxic_homophily(g, profiles, params["thresholds"]).items()}

    def linguistic():
        flags = {pid: f for p in profiles.values() for pid, f in p.toxic_posts.items()}
        cmp_ = linguistic_comparison([p for p in posts if flags[p.post_id]], [p for p in posts if not flags[p.post_id]])
        out.csv(FIGURES, "linguistic.csv", ["feature", "mean_toxic", "mean_nontoxic", "delta", "t", "p"],
                [(k, v.mean_toxic, v.mean_nontoxic, v.delta, *(v.welch_t and (v.welch_t.statistic, v.welch_t.p_value)
                                                             or (None, None))) for k, v in cmp_.items()])
        return {k: v.delta for k, v in cmp_.items()}

    attempt("concentration", concentration)
    attempt("engagement_welch_t", t_test)
    attempt("engagement_gap", gap)
    attempt("toxic_homophily", homophily)
    attempt("linguistic_delta", linguistic)
    out.json(REPORTS, "toxicity.json", rep)
    return out


def _leaning_scores(snap, stance):
    from .ideology import human_leaning

    by_author = defaultdict(list)
    for p in snap.posts_in_order():
        by_author[p.author_id].append(p)
    scores = {}
    for a in sorted(by_author):
        try:
            scores[a] = human_leaning(by_author[a], stance, a)
        except NoRelevantPosts:
            continue
    return scores


def cmd_analyze_stance(args, cfg):
    from .ideology import leaning_distribution

    params = _params(args, cfg, "analyze.stance", {"n_bins": 21, "pole": 0.8})
    out = OutputDir(args.out, "analyze stance", None, params)
    snap = snapshot_at(_read_log(args.log))
    stance, _ = _labeler(cfg)
    scores = _leaning_scores(snap, stance)
    out.csv(FIGURES, "leaning.csv", ["agent_id", "pi", "n_relevant_posts"],
            [(a, s.pi, s.n_relevant_posts) for a, s in scores.items()])
    rep = {"n_agents_scored": len(scores)}
    if scores:
        d = leaning_distribution(list(scores.values()), int(params["n_bins"]), float(params["pole"]))
        out.csv(FIGURES, "leaning_hist.csv", ["bin_lo", "bin_hi", "count"],
                zip(d.edges[:-1], d.edges[1:], d.counts.tolist()))
        rep["mass_at_poles"] = d.mass_at_poles
        rep["mean_pi"] = float(np.mean([s.pi for s in scores.values()]))
    out.json(REPORTS, "stance.json", rep)
    return out


def cmd_analyze_ideology(args, cfg):
    from .errors import EmptyClass, EmptySubgraph, NoLabeledPosts
    from .ideology import (
        export_adjudication_queue, ideological_subgraph, ideology_score, label_posts, political_filter,
        polarization_suite,
    )

    params = _params(args, cfg, "analyze.ideology", {"keywords": None, "min_posts": 5, "min_abs_score": 0.25,
                                                     "weighting": "nodes", "direction": "out"})
    out = OutputDir(args.out, "analyze ideology", None, params)
    snap = snapshot_at(_read_log(args.log))
    _, persona = _labeler(cfg)
    found = political_filter(snap.posts_in_order(), params["keywords"])
    labels = label_posts(found.posts, persona, _workers(cfg))
    out.csv(FIGURES, "post_labels.csv", ["post_id", "liberal", "conservative", "moderate", "final"],
            [(l.post_id, *(l.per_persona.get(p) for p in ("liberal", "conservative", "moderate")), l.final)
             for l in labels])
    q = out.path(RAW, "adjudication_queue.csv")
    n_queue = export_adjudication_queue(labels, snap.posts, q)
    out.seal(q)
    author = {p.post_id: p.author_id for p in found.posts}
    per = defaultdict(list)
    for l in labels:
        per[author[l.post_id]].append(l.final)
    scores = {}
    for a in sorted(per):
        try:
            scores[a] = ideology_score(per[a], a)
        except NoLabeledPosts:
            continue
    out.csv(FIGURES, "ideology_scores.csv", ["agent_id", "psi", "n_political_posts"],
            [(a, s.psi, s.n_political_posts) for a, s in scores.items()])
    rep = {"n_political_posts": len(found.posts), "n_adjudication": n_queue, "n_agents_scored": len(scores)}
    try:
        sub, lab = ideological_subgraph(snap, scores, int(params["min_posts"]), float(params["min_abs_score"]))
        rep["polarization"] = vars(polarization_suite(sub, lab, params["weighting"], params["direction"]))
    except (EmptySubgraph, EmptyClass) as exc:
        rep["polarization"] = {"skipped": str(exc)}
    out.json(REPORTS, "ideology.json", rep)
    return out


def cmd_experiment_cost(args, cfg):
    from .cost import RemoteWillingness, StubWillingness, run_cost_experiment, select_and_split, write_trials_csv
    from .toxicity import build_profiles, score_texts

    seed = _need_seed(args)
    params = _params(args, cfg, "experiment.cost", {"n": 500, "tolerance": 0.05, "p_control": 0.8,
                                                    "p_treatment": 0.456, "lexicon": None})
    out = OutputDir(args.out, "experiment cost", seed, params)
    snap = snapshot_at(_read_log(args.log))
    posts = snap.posts_in_order()
    scorer = _scorer(cfg, params["lexicon"])
    scores = dict(zip((p.post_id for p in posts), score_texts(scorer, [p.text for p in posts])))
    profiles = build_profiles(posts, scorer)
    control, treatment = select_and_split(profiles, snap.posts, scores, int(params["n"]), seed,
                                          float(params["tolerance"]))
    block = cfg.get("adapters", {}).get("willingness")
    port = (RemoteWillingness(block["url"]) if block
            else StubWillingness(float(params["p_control"]), float(params["p_treatment"]), seed))
    rep = run_cost_experiment(control, treatment, port, _workers(cfg))
    p = out.path(RAW, "cost_trials.csv")
    write_trials_csv(rep.trials, p)
    out.seal(p)
    out.json(REPORTS, "cost.json", {
        "n_control": rep.n_control, "n_treatment": rep.n_treatment,
        "rate_control": rep.rate_control, "rate_treatment": rep.rate_treatment,
        "relative_reduction": rep.relative_reduction, "reduction_ci95": list(rep.reduction_ci),
        "balance": rep.balance, "two_proportion_z": vars(rep.test), "fisher_p": rep.fisher_p,
        "n_dropped": rep.n_dropped,
    })
    return out


def cmd_predict(args, cfg):
    from .prediction import LEVELS, SplitSpec, build_dataset, feature_bundles, incremental_report
    from .synthetic import prediction_corpus

    seed = _need_seed(args)
    params = _params(args, cfg, "predict", {"target": "leaning", "n_seeds": 5, "lam": 1.0, "direction": "out"})
    out = OutputDir(args.out, "predict", seed, {**params, "synthetic": bool(args.synthetic)})
    enc = _encoder(cfg)
    if args.synthetic:
        snap, scores = prediction_corpus(seed)
    else:
        snap = snapshot_at(_read_log(args.log))
        if params["target"] != "leaning":
            raise UsageError("only --target leaning is supported on event logs")
        stance, _ = _labeler(cfg)
        scores = {a: s.pi for a, s in _leaning_scores(snap, stance).items()}
    bundles = feature_bundles(snap, scores, enc, params["direction"])
    seeds = [seed + k for k in range(int(params["n_seeds"]))]
    rows = incremental_report(lambda level, s: build_dataset(None, scores, None, level, SplitSpec(seed=s),
                                                             bundles=bundles),
                              LEVELS, seeds, float(params["lam"]))
    out.csv(REPORTS, "prediction.csv",
            ["level", "rmse_mean", "rmse_sd", "accuracy_mean", "accuracy_sd", "f1_mean", "f1_sd", "improved_rmse"],
            [(r.level, *(x for k in ("rmse", "accuracy", "f1") for x in r.metrics[k]),
              "" if r.improved_rmse is None else int(r.improved_rmse)) for r in rows])
    out.json(REPORTS, "prediction.json", {r.level: {"metrics": r.metrics, "per_seed": r.per_seed} for r in rows})
    return out


def cmd_report(args, cfg):
    root = Path(args.out) / REPORTS
    if not root.is_dir():
        raise UsageError(f"{root} does not exist; run an analysis first")
    summary = {}
    for p in sorted(root.glob("*.json")):
        if p.name.endswith(".meta.json") or p.name == "summary.json":
            continue
        summary[p.stem] = json.loads(p.read_text(encoding="utf-8"))
    out = OutputDir(args.out, "report", None, {"sources": sorted(summary)})
    out.json(REPORTS, "summary.json", summary)
    lines = ["# llmsocial report", ""]
    for name, body in summary.items():
        lines.append(f"## {name}")
        lines.append("")
        for k, v in sorted(body.items()):
            if not isinstance(v, (dict, list)):
                lines.append(f"- {k}: {v}")
        lines.append("")
    p = out.path(REPORTS, "summary.md")
    p.write_text("\n".join(lines), encoding="utf-8")
    out.seal(p)
    return out


# ---------------------------------------------------------------------------
# Parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="llmsocial", description="Simulate and analyze social platforms populated by model agents.")
    p.add_argument("--version", action="version", version=f"llmsocial {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, log=True):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--config", help="JSON or YAML config file")
        sp.add_argument("--seed", type=int)
        if log:
            sp.add_argument("--log", help="event log (JSONL)")

    sp = sub.add_parser("simulate", help="run a simulation and write its event log")
    common(sp, log=False)
    sp.set_defaults(fn=cmd_simulate, command_name="simulate")

    sp = sub.add_parser("ingest", help="validate an event log and re-export it")
    sp.add_argument("--input", required=True)
    sp.add_argument("--lenient", action="store_true", help="ignore unknown fields with a warning instead of failing")
    common(sp, log=False)
    sp.set_defaults(fn=cmd_ingest, command_name="ingest")

    an = sub.add_parser("analyze", help="run one analysis over an event log")
    kinds = an.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    k = kinds.add_parser("graph")
    common(k)
    k.add_argument("--path-policy", dest="path_policy", choices=("auto", "exact", "sampled"))
    k.add_argument("--path-pairs", dest="path_pairs", type=int)
    k.add_argument("--swaps-per-edge", dest="swaps_per_edge", type=int)
    k.set_defaults(fn=cmd_analyze_graph, command_name="analyze graph")
    k = kinds.add_parser("homophily")
    common(k)
    k.add_argument("--n-random", dest="n_random", type=int)
    k.add_argument("--min-community-frac", dest="min_community_frac", type=float)
    k.add_argument("--window", help="'month' or a window width in milliseconds")
    k.set_defaults(fn=cmd_analyze_homophily, command_name="analyze homophily")
    k = kinds.add_parser("influence")
    common(k)
    k.add_argument("--bucket-ms", dest="bucket_ms", type=int)
    k.add_argument("--n-buckets", dest="n_buckets", type=int)
    k.add_argument("--mode", choices=("windowed", "cumulative"))
    k.add_argument("--min-bucket-size", dest="min_bucket_size", type=int)
    k.set_defaults(fn=cmd_analyze_influence, command_name="analyze influence")
    k = kinds.add_parser("toxicity")
    common(k)
    k.add_argument("--lexicon")
    k.set_defaults(fn=cmd_analyze_toxicity, command_name="analyze toxicity")
    k = kinds.add_parser("stance")
    common(k)
    k.add_argument("--pole", type=float)
    k.set_defaults(fn=cmd_analyze_stance, command_name="analyze stance")
    k = kinds.add_parser("ideology")
    common(k)
    k.add_argument("--keywords")
    k.add_argument("--min-posts", dest="min_posts", type=int)
    k.add_argument("--min-abs-score", dest="min_abs_score", type=float)
    k.set_defaults(fn=cmd_analyze_ideology, command_name="analyze ideology")

    ex = sub.add_parser("experiment", help="run a controlled prompt experiment")
    exs = ex.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    k = exs.add_parser("cost")
    common(k)
    k.add_argument("--n", type=int, help="agents across both arms")
    k.add_argument("--p-control", dest="p_control", type=float)
    k.add_argument("--p-treatment", dest="p_treatment", type=float)
    k.set_defaults(fn=cmd_experiment_cost, command_name="experiment cost")

    sp = sub.add_parser("predict", help="incremental feature-level prediction report")
    common(sp)
    sp.add_argument("--synthetic", action="store_true", help="use a generated corpus instead of --log")
    sp.add_argument("--target", choices=("leaning",))
    sp.add_argument("--n-seeds", dest="n_seeds", type=int)
    sp.add_argument("--lam", type=float)
    sp.set_defaults(fn=cmd_predict, command_name="predict")

    sp = sub.add_parser("report", help="collect reports/*.json into a summary")
    sp.add_argument("--out", required=True)
    sp.add_argument("--config")
    sp.set_defaults(fn=cmd_report, command_name="report")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _load_config(getattr(args, "config", None))
        out = args.fn(args, cfg)
    except (ValidationError, ValueError, FileNotFoundError) as exc:
        # ValidationError is itself a ValueError; plain ValueErrors come from bad parameters
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (LLMSocialError, Exception) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for f in out.written:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
