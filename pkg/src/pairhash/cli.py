"""``pairhash`` command line: train, encode, eval, synth, selfcheck, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data, linalg, metrics, plotting, selfcheck
from .encode import encode_linear
from .pipeline import ALGOS, train_model
from .sdh import TrainConfig

log = logging.getLogger("pairhash")


class CommandError(Exception):
    """Problem with the inputs of a command; reported without a traceback."""


def _write_json(path, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def cmd_train(args) -> int:
    x = data.load_features(args.features)
    labels = data.load_labels(args.labels)
    if labels.n != x.shape[0]:
        raise CommandError(f"{x.shape[0]} feature rows but {labels.n} label lines")
    if args.anchors > x.shape[0]:
        raise CommandError(f"--anchors {args.anchors} exceeds the {x.shape[0]} training rows")
    if args.batch > x.shape[0]:
        raise CommandError(f"--batch {args.batch} exceeds the {x.shape[0]} training rows")
    cfg = TrainConfig(m=args.bits, p=args.anchors, n_b=args.batch, beta=args.beta,
                      L1=args.l1, L2=args.l2, seed=args.seed, ridge=args.ridge)
    multi = True if args.multi_label else None
    model, h, diag = train_model(x, labels, cfg, algo=args.algo, multi_label=multi,
                                 bandwidth=args.bandwidth, encoder=args.encoder)
    data.save_model(model, args.out)
    diag_path = args.diagnostics or f"{args.out}.diag.jsonl"
    with open(diag_path, "w") as f:
        for rec in diag.records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    if args.codes_out:
        data.save_codes(args.codes_out, h)
    last = diag.records[-1]
    log.info("trained %s: %d outer iterations, final code change %s",
             args.algo, last["iteration"], last["code_change"])
    return 0


def cmd_encode(args) -> int:
    model = data.load_model(args.model)
    x = data.load_features(args.features)
    data.save_codes(args.out, encode_linear(model, x))
    return 0


def cmd_eval(args) -> int:
    db = data.load_codes(args.db_codes)
    queries = data.load_codes(args.query_codes)
    db_labels = data.load_labels(args.db_labels)
    q_labels = data.load_labels(args.query_labels)
    if db.m != queries.m:
        raise CommandError(f"database codes have {db.m} bits, queries {queries.m}")
    if db.n != db_labels.n:
        raise CommandError(f"{db.n} database codes but {db_labels.n} database labels")
    if queries.n != q_labels.n:
        raise CommandError(f"{queries.n} query codes but {q_labels.n} query labels")
    multi = True if args.multi_label else None
    result = metrics.evaluate(queries, db, q_labels, db_labels, R=args.top, radius=args.radius,
                              multi_label=multi)
    _write_json(args.out, result.to_dict())
    print(f"map={result.map:.6f} ndcg={result.ndcg:.6f} acg={result.acg:.6f} "
          f"precision={result.precision:.6f} recall={result.recall:.6f}")
    return 0


def cmd_synth(args) -> int:
    total = args.n + args.queries
    x, labels = data.synth_clusters(total, args.d, args.classes, args.spread, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    y = labels.single()
    splits = {"train": np.arange(args.n), "query": np.arange(args.n, total)}
    for name, idx in splits.items():
        if idx.size == 0:
            continue
        data.save_features(out / f"{name}.phsh", x[idx])
        with open(out / f"{name}.labels", "w") as f:
            f.writelines(f"{v}\n" for v in y[idx])
    return 0


def cmd_selfcheck(args) -> int:
    checks = selfcheck.run_all(seed=args.seed, trials=args.trials,
                               corrupt_gamma=args.corrupt_gamma)
    lines = [c.line() for c in checks]
    print("\n".join(lines))
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    return 0 if all(c.passed for c in checks) else 1


def cmd_report(args) -> int:
    if not args.diagnostics and not args.metrics:
        raise CommandError("report needs --diagnostics and/or --metrics")
    written = []
    if args.diagnostics:
        written += plotting.convergence_report(plotting.read_diagnostics(args.diagnostics), args.out)
    if args.metrics:
        with open(args.metrics) as f:
            written += plotting.retrieval_report(json.load(f), args.out)
    for p in written:
        print(p)
    return 0


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def _non_negative(kind):
    def parse(text):
        value = kind(text)
        if value < 0:
            raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
        return value
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairhash", description="Supervised discrete hashing.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    threads = argparse.ArgumentParser(add_help=False)
    threads.add_argument("--threads", type=_positive(int), default=1,
                         help="worker threads for matrix products (results do not change)")

    t = sub.add_parser("train", parents=[threads], help="learn a hash model")
    t.add_argument("--algo", choices=ALGOS, default="gsdh_p")
    t.add_argument("--bits", type=_positive(int), default=16)
    t.add_argument("--anchors", type=_positive(int), default=1000)
    t.add_argument("--batch", type=_positive(int), default=100)
    t.add_argument("--beta", type=_non_negative(float), default=10.0)
    t.add_argument("--l1", type=_positive(int), default=20)
    t.add_argument("--l2", type=_positive(int), default=3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--features", required=True)
    t.add_argument("--labels", required=True)
    t.add_argument("--out", required=True, help="model file")
    t.add_argument("--diagnostics", help="JSON-lines convergence log (default: <out>.diag.jsonl)")
    t.add_argument("--codes-out", help="also write the learned training codes")
    t.add_argument("--encoder", choices=("linear", "least-squares"), default="linear")
    t.add_argument("--ridge", type=_non_negative(float), default=None)
    t.add_argument("--bandwidth", type=_positive(float), default=None)
    t.add_argument("--multi-label", action="store_true",
                   help="use common-label counts even when every item has one label")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("encode", parents=[threads], help="hash features with a trained model")
    e.add_argument("--model", required=True)
    e.add_argument("--features", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_encode)

    v = sub.add_parser("eval", parents=[threads], help="Hamming-ranking retrieval metrics")
    v.add_argument("--db-codes", required=True)
    v.add_argument("--query-codes", required=True)
    v.add_argument("--db-labels", required=True)
    v.add_argument("--query-labels", required=True)
    v.add_argument("--top", type=_positive(int), default=100, help="rank cutoff R")
    v.add_argument("--radius", type=_non_negative(int), default=2)
    v.add_argument("--multi-label", action="store_true")
    v.add_argument("--out", required=True, help="metrics JSON")
    v.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write a synthetic clustered dataset")
    s.add_argument("--n", type=_positive(int), default=5000)
    s.add_argument("--queries", type=_non_negative(int), default=500)
    s.add_argument("--d", type=_positive(int), default=16)
    s.add_argument("--classes", type=int, default=10)
    s.add_argument("--spread", type=_non_negative(float), default=0.2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("selfcheck", help="numerical identity and brute-force checks")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--trials", type=_positive(int), default=100)
    c.add_argument("--out", help="also write the report here")
    c.add_argument("--corrupt-gamma", action="store_true", help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_selfcheck)

    r = sub.add_parser("report", help="plot convergence and retrieval curves")
    r.add_argument("--diagnostics")
    r.add_argument("--metrics")
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    linalg.set_threads(getattr(args, "threads", 1))
    try:
        return args.func(args)
    except (CommandError, data.FormatError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"pairhash {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
