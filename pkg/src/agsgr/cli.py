"""Command-line entry point: ``agsgr {ingest,train,recommend,evaluate,oracle-check}``.

Exit codes: 0 ok, 1 other error, 2 format or configuration error, 3 I/O
error, 4 no training data, 5 no valid group, 6 unknown target user,
7 oracle mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import pickle
import sys
from pathlib import Path

from . import config as cfg
from .attention import AttentiveBPR
from .dataset import load_dataset, save_dataset
from .evaluation import run_experiment
from .exceptions import AGSGRError, ConfigError, EmptyResult, FormatError, NoTrainingData, UnknownUser
from .ingest import (
    dataset_stats,
    ensure_dir,
    extract_implicit_groups,
    parse_checkins,
    parse_edges,
    parse_groups,
    split,
    write_checkins,
    write_edges,
    write_group_events,
)
from .graph import GeoSocialNetwork
from .oracles import run_oracle_checks
from .recommender import GeoSocialGroupRecommender

logger = logging.getLogger("agsgr")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FORMAT = 2
EXIT_IO = 3
EXIT_NO_TRAINING_DATA = 4
EXIT_EMPTY_RESULT = 5
EXIT_UNKNOWN_USER = 6
EXIT_ORACLE_MISMATCH = 7

DATASET_FILE = "dataset.npz"
INDEX_CACHE_VERSION = 1


def _require_file(path, what: str) -> Path:
    if path is None:
        raise ConfigError(f"{what} path is not configured")
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} file not found: {p}")
    return p


def _recommender(c: dict) -> GeoSocialGroupRecommender:
    return GeoSocialGroupRecommender(
        core=c["core"],
        group_size=c["group_size"],
        top_k=c["top_k"],
        cap=c["cap"],
        require_friendship=not c["relax_friendship"],
        dim=c["dim"],
        learning_rate=c["lr"],
        epochs=c["epochs"],
        l2=c["l2"],
        neg_ratio=c["neg_ratio"],
        n_alt_groups=c["n_alt_groups"],
        train_targets=c["train_targets"],
        random_state=c["seed"],
    )


def _load(c: dict):
    return load_dataset(_require_file(Path(c["data_dir"]) / DATASET_FILE, "dataset"))


# --- subcommands -------------------------------------------------------------------


def cmd_ingest(c: dict, out) -> int:
    chk_path = _require_file(c["checkins"], "checkins")
    edge_path = _require_file(c["edges"], "edges")
    parsed = parse_checkins(chk_path)
    edges = parse_edges(edge_path)
    network = GeoSocialNetwork.from_edges(edges.edges, pois=parsed.pois, checkins=parsed.checkins)
    if c["groups"]:
        events = parse_groups(_require_file(c["groups"], "groups"))
        known = set(network.users)
        kept = [e for e in events if all(u in known for u in e.members) and e.poi in network.pois]
        if len(kept) < len(events):
            logger.warning("dropped %d explicit groups with unknown users or POIs", len(events) - len(kept))
        events = kept
    else:
        events = extract_implicit_groups(network.checkins, network, c["window"])
    sp = split(events, c["train_fraction"])

    data = ensure_dir(c["data_dir"])
    save_dataset(data / DATASET_FILE, network, sp)
    write_checkins(network, data / "checkins.csv")
    write_edges(network, data / "edges.csv")
    write_group_events(events, data / "group_events.csv")
    write_group_events(sp.train_events, data / "train_events.csv")
    write_group_events(sp.test_events, data / "test_events.csv")
    stats = dataset_stats(network, events).report()
    (data / "stats.txt").write_text(stats, encoding="utf-8")
    out.write(stats)
    out.write(
        f"malformed rows skipped: {parsed.n_malformed} check-ins, {edges.n_malformed} edges\n"
        f"split {sp.policy}: {len(sp.train_events)} train / {len(sp.test_events)} test events\n"
    )
    return EXIT_OK


def cmd_train(c: dict, out) -> int:
    ds = _load(c)
    rec = _recommender(c)
    data = rec.training_data(ds.network, ds.split.train_events, ds.train_checkins())
    model = rec.make_model().fit(data)
    model_path = Path(c["model"])
    ensure_dir(model_path.parent)
    model.save(model_path)
    report = ensure_dir(c["report_dir"])
    lines = ["epoch,loss"] + [f"{i},{v!r}" for i, v in enumerate(model.loss_history_)]
    (report / "loss.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for i, v in enumerate(model.loss_history_):
        sys.stderr.write(f"epoch {i} loss {v:.10g}\n")
    out.write(f"model written to {model_path} ({len(data)} training triples, w={model.w_:.6g}, c={model.c_:.6g})\n")
    return EXIT_OK


def _load_index_cache(rec: GeoSocialGroupRecommender, path) -> None:
    p = Path(path)
    if not p.is_file():
        return
    with open(p, "rb") as fh:
        blob = pickle.load(fh)
    if blob.get("version") == INDEX_CACHE_VERSION and blob.get("key") == (rec.origin_, rec.fanout, len(rec.network_.pois)):
        rec.indexes_.update(blob["indexes"])


def _save_index_cache(rec: GeoSocialGroupRecommender, path) -> None:
    blob = {"version": INDEX_CACHE_VERSION, "key": (rec.origin_, rec.fanout, len(rec.network_.pois)), "indexes": rec.indexes_}
    ensure_dir(Path(path).parent)
    with open(path, "wb") as fh:
        pickle.dump(blob, fh)


def cmd_recommend(c: dict, out) -> int:
    if c["target_user"] is None:
        raise ConfigError("target_user is required for recommend")
    ds = _load(c)
    model = AttentiveBPR.load(_require_file(c["model"], "model"))
    rec = _recommender(c).fit(ds.network, model=model)
    if c["index_cache"]:
        _load_index_cache(rec, c["index_cache"])
    result = rec.recommend(c["target_user"])
    if c["index_cache"]:
        _save_index_cache(rec, c["index_cache"])
    out.write(result.to_text())
    return EXIT_OK


def cmd_evaluate(c: dict, out) -> int:
    ds = _load(c)
    model = AttentiveBPR.load(_require_file(c["model"], "model"))
    rec = _recommender(c).fit(ds.network, checkins=ds.train_checkins(), model=model)
    report = run_experiment(
        rec,
        ds.split.test_events,
        n_targets=c["eval.n_targets"],
        seed=c["eval.seed"],
        k_range=c["eval.k_range"],
        h_range=c["eval.h_range"],
        K_range=c["eval.K_range"],
        threads=c["threads"],
    )
    rdir = ensure_dir(c["report_dir"])
    (rdir / "metrics.csv").write_text(report.to_csv(), encoding="utf-8")
    (rdir / "metrics.txt").write_text(report.report(), encoding="utf-8")
    out.write(report.report())
    return EXIT_OK


def cmd_oracle_check(c: dict, out, inject_fault: bool = False) -> int:
    results = run_oracle_checks(c["trials"], c["seed"], inject_fault=inject_fault)
    code = EXIT_OK
    for r in results:
        out.write(r.line() + "\n")
        if not r.passed:
            code = EXIT_ORACLE_MISMATCH
            rdir = ensure_dir(c["report_dir"])
            path = rdir / f"oracle_failure_{r.name}.json"
            path.write_text(json.dumps(r.first_failure, sort_keys=True, default=str), encoding="utf-8")
            out.write(f"  failing instance written to {path}\n")
    return code


COMMANDS = {
    "ingest": (cmd_ingest, "parse raw CSVs, extract group events, write the normalized dataset"),
    "train": (cmd_train, "train the topic ranker and write a checkpoint"),
    "recommend": (cmd_recommend, "recommend a group, topic and locations for target_user"),
    "evaluate": (cmd_evaluate, "run the metric grid over sampled test targets"),
    "oracle-check": (cmd_oracle_check, "compare optimized routines against brute-force oracles"),
}


# --- argument handling -------------------------------------------------------------


def _flag_type(key: cfg.Key):
    def conv(s):
        try:
            return key.parse(s)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    conv.__name__ = key.name
    return conv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"config file (default: ${cfg.ENV_VAR})")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    for key in cfg.KEYS:
        common.add_argument(key.flag, dest=key.dest, type=_flag_type(key), default=None, metavar="VALUE", help=key.help)

    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="agsgr",
        description="Geo-social group recommendation: friend group, activity topic and venues.",
        epilog=cfg.keys_help(),
        formatter_class=fmt,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, desc) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=desc, description=desc, epilog=cfg.keys_help(), formatter_class=fmt)
        if name == "oracle-check":
            sp.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (FormatError, ConfigError)):
        return EXIT_FORMAT
    if isinstance(exc, NoTrainingData):
        return EXIT_NO_TRAINING_DATA
    if isinstance(exc, EmptyResult):
        return EXIT_EMPTY_RESULT
    if isinstance(exc, UnknownUser):
        return EXIT_UNKNOWN_USER
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, ValueError):
        return EXIT_FORMAT
    return EXIT_ERROR


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_FORMAT
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        path = cfg.config_path(args.config)
        file_values = cfg.read_config_file(path) if path else {}
        flags = {key.name: getattr(args, key.dest) for key in cfg.KEYS}
        c = cfg.resolve(flags, file_values)
        fn = COMMANDS[args.command][0]
        if args.command == "oracle-check":
            return fn(c, out, inject_fault=args.inject_fault)
        return fn(c, out)
    except (AGSGRError, OSError, ValueError) as exc:
        code = _exit_code(exc)
        if isinstance(exc, UnknownUser):
            msg = f"unknown user {exc.args[0] if exc.args else ''}"
        else:
            msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        sys.stderr.write(f"agsgr: error: {msg}\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
