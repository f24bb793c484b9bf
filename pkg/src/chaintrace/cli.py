"""Command-line front end: simulate, ingest, pseudonymize, detect, train,
score, metrics, reveal, export.

Exit codes: 0 success / no alert, 3 partial kill chain, 4 full kill
chain, >= 64 on errors. Every run writes a JSON manifest next to its
primary output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from importlib import resources

from . import features as feats
from . import ocsvm
from .errors import ChaintraceError
from .events import LogEvent, decode_event, encode_event, parse_raw_line, RawLine, render_raw_line
from .graph import apply_rules, build_graph, export_graph, load_rules
from .killchain import (
    exit_code_for,
    identify_adversary,
    load_killchain,
    match_killchain,
    reconstruct_attack,
)
from .secretshare import read_share_file, write_share_file
from .simulate import (
    GroundTruth,
    SimConfig,
    expand_with_noise,
    read_truth_file,
    simulate,
    write_truth_file,
)
from .store import EventStore
from .vault import PseudonymVault, create_vault

EXIT_ERROR = 64


def _default_resource(name: str) -> str:
    return str(resources.files("chaintrace.data") / name)


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(command: str, args: argparse.Namespace, outputs: list[str],
                    t0: float, status: int) -> None:
    primary = next((p for p in outputs if p and os.path.exists(p)), None)
    if primary is None:
        return
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "seed": getattr(args, "seed", None),
        "outputs": {
            p: _sha256_file(p) for p in outputs if p and os.path.isfile(p)
        },
        "elapsed_seconds": round(time.monotonic() - t0, 3),
        "exit_status": status,
    }
    path = os.path.join(os.path.dirname(os.path.abspath(primary)),
                        f"manifest.{command}.json")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    os.replace(tmp, path)


def _load_config(args: argparse.Namespace) -> SimConfig:
    data = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    cfg = SimConfig.from_dict(data)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "attack", None) is not None:
        cfg.attack = args.attack
    return cfg


def _write_events(path: str, events) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(encode_event(e))
            fh.write("\n")
            n += 1
    return n


def _read_events(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            yield decode_event(line)


# --- subcommands ---

def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    events, truth = simulate(cfg)
    if args.expand_factor > 1:
        id_map: dict[int, int] = {}
        expanded = expand_with_noise(events, args.expand_factor, cfg.seed, id_map)
        _write_events(args.out, expanded)
        truth = GroundTruth(
            labels=[(id_map[i], lab) for i, lab in truth.labels],
            victim_hosts=truth.victim_hosts,
            attacker_ip=truth.attacker_ip,
        )
    else:
        _write_events(args.out, events)
    write_truth_file(args.truth, truth)
    if args.raw:
        with open(args.raw, "w", encoding="utf-8") as fh:
            for e in events:
                raw = render_raw_line(e)
                fh.write(f"{raw.source_kind}\t{raw.text}\n")
    return 0


def cmd_ingest(args) -> int:
    store = EventStore(args.store)
    if args.format == "canonical":
        stream = _read_events(args.events)
    else:
        def raw_stream():
            with open(args.events, "r", encoding="utf-8") as fh:
                next_id = store.last_id + 1
                for line in fh:
                    kind, text = line.rstrip("\n").split("\t", 1)
                    yield parse_raw_line(RawLine(kind, text), next_id)
                    next_id += 1
        stream = raw_stream()
    n = store.append(stream)
    store.close()
    print(f"ingested {n} events into {args.store}")
    return 0


def cmd_pseudonymize(args) -> int:
    if os.path.exists(args.vault):
        vault = PseudonymVault.load(args.vault)
    else:
        vault, shares = create_vault(args.threshold, args.shares)
        os.makedirs(args.shares_dir, exist_ok=True)
        for share in shares:
            write_share_file(
                os.path.join(args.shares_dir, f"share-{share.x:03d}.txt"), share
            )
    def stream():
        for e in _read_events(args.events):
            yield vault.pseudonymize_event(e)
    _write_events(args.out, stream())
    vault.save(args.vault)
    return 0


def cmd_detect(args) -> int:
    rules = load_rules(args.rules or _default_resource("default_rules.json"))
    model = load_killchain(
        args.killchain or _default_resource("default_killchain.json"), rules
    )
    if args.store:
        store = EventStore(args.store)
        events = store.query_all()
        big = store.count() > args.lite_threshold
    else:
        events = _read_events(args.events)
        big = False

    if big:
        # very large runs: skip per-event graph nodes, feed rules directly
        graph = build_graph(events, include_events=False)
        store2 = EventStore(args.store)
        apply_rules(graph, rules, events=store2.query_all())
    else:
        graph = build_graph(events, include_events=True)
        apply_rules(graph, rules)

    matches = match_killchain(graph, model)
    report_rows = []
    for m in matches:
        if m.status in ("partial", "full"):
            try:
                identify_adversary(m, graph, model)
            except ChaintraceError:
                pass
        row = m.to_report(model)
        row["reconstruction"] = reconstruct_attack(m, graph, model)
        report_rows.append(row)
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in report_rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")
    if args.export:
        with open(args.export, "w", encoding="utf-8") as fh:
            fh.write(export_graph(graph, args.format))
    code = exit_code_for(matches)
    alerts = [m for m in matches if m.status != "none"]
    print(f"{len(matches)} candidate host(s), {len(alerts)} alert(s), exit {code}")
    return code


def _vectors_from_args(args):
    if args.store:
        store = EventStore(args.store)
        events = store.query_all()
    else:
        events = _read_events(args.events)
    return feats.extract_features(events, window=args.window_secs)


def cmd_train(args) -> int:
    vectors = _vectors_from_args(args)
    X = feats.matrix_of(vectors)
    model = ocsvm.fit(
        X, nu=args.nu, gamma=args.gamma, source_set=args.source_set
    )
    model.save(args.out)
    print(f"trained on {len(vectors)} windows, "
          f"{model.support_vectors.shape[0]} support vectors")
    return 0


def cmd_score(args) -> int:
    model = ocsvm.OneClassSvmModel.load(args.model)
    vectors = _vectors_from_args(args)
    X = feats.matrix_of(vectors)
    decisions = model.decision(X)
    with open(args.out, "w", encoding="utf-8") as fh:
        for fv, f in zip(vectors, decisions):
            fh.write(json.dumps({
                "user": fv.user,
                "window_start": fv.window_start,
                "decision": float(f),
                "anomalous": bool(f < 0),
            }, sort_keys=True))
            fh.write("\n")
    return 0


def cmd_metrics(args) -> int:
    truth = read_truth_file(args.truth)
    labeled_ids = truth.labeled_ids()
    labeled_events = [
        e for e in _read_events(args.events) if e.id in labeled_ids
    ]
    scored = []
    with open(args.scored, "r", encoding="utf-8") as fh:
        for line in fh:
            scored.append(json.loads(line))
    vectors = [
        feats.FeatureVector(r["user"], r["window_start"], None) for r in scored
    ]
    labels = feats.label_windows(vectors, labeled_events, window=args.window_secs)
    predictions = [r["anomalous"] for r in scored]
    metrics = feats.evaluate(predictions, labels)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_reveal(args) -> int:
    vault = PseudonymVault.load(args.vault, read_only=True)
    shares = [read_share_file(p) for p in args.share]
    plaintext = vault.reveal(args.token, shares)
    print(plaintext)
    return 0


def cmd_export(args) -> int:
    rules = load_rules(args.rules or _default_resource("default_rules.json"))
    if args.store:
        store = EventStore(args.store)
        events = store.query_all()
    else:
        events = _read_events(args.events)
    graph = build_graph(events)
    apply_rules(graph, rules)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(export_graph(graph, args.format))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chaintrace")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("simulate", help="generate an event stream + ground truth")
    add_common(sp)
    sp.add_argument("--config", help="JSON SimConfig overrides")
    sp.add_argument("--attack", type=lambda v: v.lower() in ("1", "true", "yes"),
                    default=None)
    sp.add_argument("--expand-factor", type=float, default=1.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--raw", help="also write raw source lines here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ingest", help="append an event file to a store")
    add_common(sp)
    sp.add_argument("--store", required=True)
    sp.add_argument("--events", required=True)
    sp.add_argument("--format", choices=("canonical", "raw"), default="canonical")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("pseudonymize", help="tokenize identity fields")
    add_common(sp)
    sp.add_argument("--events", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--vault", required=True)
    sp.add_argument("--shares-dir", default="shares")
    sp.add_argument("-k", "--threshold", type=int, default=3)
    sp.add_argument("-n", "--shares", type=int, default=5)
    sp.set_defaults(func=cmd_pseudonymize)

    sp = sub.add_parser("detect", help="kill-chain detection over a store")
    add_common(sp)
    sp.add_argument("--store")
    sp.add_argument("--events")
    sp.add_argument("--rules")
    sp.add_argument("--killchain")
    sp.add_argument("--out", required=True)
    sp.add_argument("--export")
    sp.add_argument("--format", choices=("dot", "graphml"), default="dot")
    sp.add_argument("--lite-threshold", type=int, default=500_000)
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("train", help="train the one-class SVM on clean windows")
    add_common(sp)
    sp.add_argument("--store")
    sp.add_argument("--events")
    sp.add_argument("--out", required=True)
    sp.add_argument("--nu", type=float, default=0.05)
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--window-secs", type=int, default=3600)
    sp.add_argument("--source-set", choices=sorted(feats.SOURCE_SETS),
                    default="combined")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("score", help="score user windows against a model")
    add_common(sp)
    sp.add_argument("--store")
    sp.add_argument("--events")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--window-secs", type=int, default=3600)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("metrics", help="compare scored windows to ground truth")
    add_common(sp)
    sp.add_argument("--scored", required=True)
    sp.add_argument("--events", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--window-secs", type=int, default=3600)
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("reveal", help="re-identify a pseudonym token")
    add_common(sp)
    sp.add_argument("--vault", required=True)
    sp.add_argument("--token", required=True)
    sp.add_argument("--share", action="append", required=True,
                    help="share file; repeat for each share")
    sp.set_defaults(func=cmd_reveal)

    sp = sub.add_parser("export", help="export the event graph")
    add_common(sp)
    sp.add_argument("--store")
    sp.add_argument("--events")
    sp.add_argument("--rules")
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("dot", "graphml"), default="dot")
    sp.set_defaults(func=cmd_export)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.monotonic()
    try:
        status = args.func(args)
    except ChaintraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_ERROR + 1
    outputs = [getattr(args, name, None) for name in
               ("out", "truth", "raw", "export", "model")]
    _write_manifest(args.command, args, [o for o in outputs if o], t0, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
