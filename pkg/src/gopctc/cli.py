"""Command-line entry point.

One executable with subcommands covering the whole pipeline: feature
extraction, scorer training, prediction, evaluation, posterior
interpolation, speaker clustering, and a CTC likelihood debugging tool.

Exit codes: 0 success, 1 usage error, 2 input/format error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import clustering, formats, gop, metrics, ordinal, scorer
from .errors import GopCtcError, NumericError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="gopctc",
        description="Alignment-free CTC pronunciation features, ordinal scoring "
        "and speaker pseudo-labeling.",
    )
    parser.add_argument("--seed", type=int, default=42, help="RNG seed (default 42)")
    parser.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker threads for extraction (default: all cores)",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("extract", help="compute per-letter features for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=gop.MODES, default="optimized")
    p.add_argument("--clamp", type=float, default=gop.DEFAULT_CLAMP,
                   help="bound on likelihood-ratio features (default 50.0)")
    p.add_argument("--apply-log-softmax", action="store_true",
                   help="renormalize emission rows before validation")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("train", help="train the linear utterance scorer")
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--dev-features")
    p.add_argument("--dev-manifest")
    p.add_argument("--no-dev", action="store_true",
                   help="train to the final epoch without checkpoint selection")
    p.add_argument("--alpha", type=float, default=0.5,
                   help="ordinal distance exponent (paper default 0.5)")
    p.add_argument("--class-weights", choices=["balanced", "uniform"], default="balanced",
                   help="balanced = inverse class frequencies (paper default)")
    p.add_argument("--loss", choices=list(ordinal.LOSS_KINDS), default="ordinal",
                   help="ordinal (default) or plain ce for the ablation")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=10, help="paper default 10")
    p.add_argument("--batch", type=int, default=64, help="paper default 64")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="score utterances with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="compare predictions against reference scores")
    p.add_argument("--predictions", required=True)
    p.add_argument("--manifest", required=True, help="manifest with reference scores")
    p.add_argument("--out", help="write the report document here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("interpolate", help="convex combination of prediction posteriors")
    p.add_argument("--predictions", nargs="+", required=True, metavar="CSV")
    p.add_argument("--weights", nargs="+", type=float,
                   help="one weight per system, summing to 1")
    p.add_argument("--optimize", action="store_true",
                   help="grid-search weights maximizing UAR on --manifest")
    p.add_argument("--manifest", help="reference scores for --optimize")
    p.add_argument("--step", type=float, default=0.1, help="grid step for --optimize")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_interpolate)

    p = sub.add_parser("cluster", help="pseudo-speaker labels from embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--p", type=float, default=0.01,
                   help="row pruning fraction (paper default 0.01)")
    p.add_argument("--kmin", type=int, default=40, help="paper default 40")
    p.add_argument("--kmax", type=int, default=45, help="paper default 45")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=100)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("ctc-ll", help="print the canonical log-likelihood of a word")
    p.add_argument("--emissions", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--lpr", action="store_true", help="also print the LPR tables")
    p.add_argument("--clamp", type=float, default=gop.DEFAULT_CLAMP)
    p.add_argument("--apply-log-softmax", action="store_true")
    p.set_defaults(func=_cmd_ctc_ll)

    return parser


def _progress(args, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


def _resolve(base_file: str, path: str) -> Path:
    """Relative paths inside a manifest are resolved against the manifest."""
    p = Path(path)
    if p.is_absolute():
        return p
    return Path(base_file).parent / p


def _cmd_extract(args) -> int:
    vocab = formats.read_vocab(args.vocab)
    rows = formats.read_manifest(args.manifest, require_scores=False)
    fingerprint = formats.vocab_fingerprint(vocab)

    def one(row: formats.ManifestRow) -> gop.GopFeatureSet:
        try:
            em = formats.read_emissions(
                _resolve(args.manifest, row.emission_path),
                apply_log_softmax=args.apply_log_softmax,
            )
            labels = formats.word_to_labels(row.word, vocab)
            return gop.assemble_features(
                row.utt_id, em, labels, vocab=vocab, mode=args.mode, clamp=args.clamp
            )
        except (GopCtcError, OSError) as exc:
            raise type(exc)(f"utterance {row.utt_id!r}: {exc}") from exc

    threads = max(1, args.threads)
    if threads == 1:
        feature_sets = [one(row) for row in rows]
        for fs in feature_sets:
            _progress(args, f"extracted {fs.utt_id}")
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(one, row) for row in rows]
            feature_sets = []
            for fut in futures:
                fs = fut.result()
                feature_sets.append(fs)
                _progress(args, f"extracted {fs.utt_id}")
    formats.write_features(args.out, feature_sets, fingerprint=fingerprint)
    _progress(args, f"wrote {len(feature_sets)} feature sets to {args.out}")
    return EXIT_OK


def _pair_features_with_scores(feature_file, manifest_path):
    rows = formats.read_manifest(manifest_path, require_scores=True)
    scores = {row.utt_id: row.score for row in rows}
    by_id = {fs.utt_id: fs for fs in feature_file.feature_sets}
    missing = sorted(set(scores) - set(by_id))
    if missing:
        raise GopCtcError(f"no features for scored utterances: {missing[:5]}")
    return [(by_id[u], scores[u]) for u in sorted(scores)]


def _cmd_train(args) -> int:
    feature_file = formats.read_features(args.features)
    train_set = _pair_features_with_scores(feature_file, args.manifest)

    dev_set = None
    if args.no_dev:
        if args.dev_features or args.dev_manifest:
            raise GopCtcError("--no-dev conflicts with --dev-features/--dev-manifest")
    else:
        if not (args.dev_features and args.dev_manifest):
            raise GopCtcError("provide --dev-features and --dev-manifest, or pass --no-dev")
        dev_file = formats.read_features(args.dev_features)
        if dev_file.vocab_fingerprint != feature_file.vocab_fingerprint:
            raise GopCtcError(
                "vocab fingerprint mismatch between training and development features"
            )
        dev_set = _pair_features_with_scores(dev_file, args.dev_manifest)

    if args.class_weights == "balanced":
        counts = np.bincount([y for _, y in train_set], minlength=6)[1:]
        class_weights = ordinal.balanced_class_weights(counts)
    else:
        class_weights = None

    cfg = scorer.TrainConfig(
        alpha=args.alpha,
        class_weights=class_weights,
        class_weights_mode=args.class_weights,
        lr=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        loss=args.loss,
    )
    model, stats = scorer.train_detailed(
        train_set, dev_set, cfg, vocab_fingerprint=feature_file.vocab_fingerprint
    )
    for st in stats:
        dev = "n/a" if st.dev_uar is None else f"{st.dev_uar:.1f}"
        _progress(args, f"epoch {st.epoch}: loss={st.mean_loss:.6f} dev_uar={dev}")
    formats.write_model(args.out, model)
    _progress(args, f"wrote model to {args.out}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = formats.read_model(args.model)
    feature_file = formats.read_features(args.features)
    if model.vocab_fingerprint != feature_file.vocab_fingerprint:
        raise GopCtcError("vocab fingerprint mismatch between features and model")
    predictions = scorer.predict_many(model, feature_file.feature_sets)
    formats.write_predictions(args.out, predictions)
    _progress(args, f"wrote {len(predictions)} predictions to {args.out}")
    return EXIT_OK


def _read_refs(manifest_path) -> dict[str, int]:
    return {
        row.utt_id: row.score
        for row in formats.read_manifest(manifest_path, require_scores=True)
    }


def _cmd_evaluate(args) -> int:
    predictions = formats.read_predictions(args.predictions)
    refs = _read_refs(args.manifest)
    pred_ids = {p.utt_id for p in predictions}
    if pred_ids != set(refs):
        diff = sorted(pred_ids.symmetric_difference(refs))[:5]
        raise GopCtcError(f"predictions and manifest cover different utterances (e.g. {diff})")
    ordered = sorted(predictions, key=lambda p: p.utt_id)
    report = metrics.evaluate(
        [refs[p.utt_id] for p in ordered], [p.predicted_class for p in ordered]
    )
    print(report.format_table())
    if args.out:
        formats.write_report(args.out, report)
        _progress(args, f"wrote report to {args.out}")
    return EXIT_OK


def _cmd_interpolate(args) -> int:
    if args.optimize == (args.weights is not None):
        raise GopCtcError("pass exactly one of --weights or --optimize")
    systems = []
    for path in args.predictions:
        preds = formats.read_predictions(path)
        systems.append({p.utt_id: p.posterior for p in preds})
    if args.optimize:
        if not args.manifest:
            raise GopCtcError("--optimize requires --manifest with reference scores")
        refs = _read_refs(args.manifest)
        weights = scorer.optimize_interpolation(systems, refs, step=args.step)
        print("weights: " + " ".join(repr(float(w)) for w in weights))
    else:
        weights = np.asarray(args.weights, dtype=np.float64)
    combined = scorer.interpolate(systems, weights)
    formats.write_predictions(args.out, combined)
    _progress(args, f"wrote {len(combined)} interpolated predictions to {args.out}")
    return EXIT_OK


def _cmd_cluster(args) -> int:
    embeddings = formats.read_embeddings(args.embeddings)
    cfg = clustering.ClusterConfig(
        p=args.p,
        k_min=args.kmin,
        k_max=args.kmax,
        kmeans_restarts=args.restarts,
        kmeans_max_iters=args.max_iters,
        seed=args.seed,
    )
    result = clustering.cluster(embeddings, cfg)
    formats.write_clusters(args.out, embeddings.ids, result.labels)
    print(f"clusters: {result.k}")
    _progress(args, f"eigengaps over [{args.kmin}, {args.kmax}]: "
              + " ".join(f"{g:.6g}" for g in result.gaps))
    _progress(args, f"wrote {embeddings.count} assignments to {args.out}")
    return EXIT_OK


def _cmd_ctc_ll(args) -> int:
    vocab = formats.read_vocab(args.vocab)
    em = formats.read_emissions(args.emissions, apply_log_softmax=args.apply_log_softmax)
    labels = formats.word_to_labels(args.word, vocab)
    lpp = gop.compute_lpp(em, labels)
    print(f"{lpp:.6f}")
    if args.lpr:
        features = gop.assemble_features(
            "cli", em, labels, vocab=vocab, mode="optimized", clamp=args.clamp
        )
        letters = vocab.letters
        print("lpr_sub (rows = canonical letters, cols = " + " ".join(letters) + "):")
        word = args.word.lower()
        for i, ch in enumerate(word):
            row = " ".join(f"{x:.6f}" for x in features.lpr_sub[i])
            print(f"  {ch}: {row}")
        print("lpr_del:")
        for i, ch in enumerate(word):
            print(f"  {ch}: {features.lpr_del[i]:.6f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"gopctc: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GopCtcError, OSError) as exc:
        print(f"gopctc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
