"""Command line front end: cluster, evaluate, synth, simreport.

Data goes to files, logs to stderr. Exit codes: 0 success, 1 usage,
2 data error, 3 internal error. Defaults for the pipeline flags can be
overridden with SPEAKERCLUSTER_* environment variables (for example
SPEAKERCLUSTER_MIN_CLUSTER_SIZE=8).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .core import PipelineParams
from .io import (
    FileFormatError,
    load_assignments,
    load_embeddings,
    result_from_assignments,
    save_assignments,
    save_embeddings,
    save_report,
)
from .io import _atomic_write
from .metrics import evaluate, similarity_report
from .pipeline import cap_speaker_duration, run_pipeline
from .synthgen import SynthSpec, generate

log = logging.getLogger("speakercluster")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

ENV_PREFIX = "SPEAKERCLUSTER_"

_DEFAULTS = PipelineParams()


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _env_default(name: str, cast, fallback):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise _UsageError(
            f"environment variable {ENV_PREFIX + name}={raw!r} is not "
            f"a valid {cast.__name__}"
        ) from None


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline parameters")
    group.add_argument(
        "--partial-set-size", type=int,
        default=_env_default("PARTIAL_SET_SIZE", int,
                             _DEFAULTS.partial_set_size),
        help="utterances clustered per chunk (default: %(default)s)")
    group.add_argument(
        "--min-cluster-size", type=int,
        default=_env_default("MIN_CLUSTER_SIZE", int,
                             _DEFAULTS.min_cluster_size),
        help="smallest grouping considered a cluster "
             "(default: %(default)s)")
    group.add_argument(
        "--min-samples", type=int,
        default=_env_default("MIN_SAMPLES", int, _DEFAULTS.min_samples),
        help="neighborhood size for core points (default: %(default)s)")
    group.add_argument(
        "--fit-noise-on-similarity", type=float,
        default=_env_default("FIT_NOISE_ON_SIMILARITY", float,
                             _DEFAULTS.fit_noise_on_similarity),
        help="minimum centroid similarity for adopting a noise point "
             "(default: %(default)s)")
    group.add_argument(
        "--merge-start", type=float,
        default=_env_default("MERGE_START", float, _DEFAULTS.merge_start),
        help="first merge threshold (default: %(default)s)")
    group.add_argument(
        "--merge-end", type=float,
        default=_env_default("MERGE_END", float, _DEFAULTS.merge_end),
        help="last merge threshold (default: %(default)s)")
    group.add_argument(
        "--merge-step", type=float,
        default=_env_default("MERGE_STEP", float, _DEFAULTS.merge_step),
        help="threshold decay per merge level (default: %(default)s)")
    group.add_argument(
        "--big-cluster-std-factor", type=float,
        default=_env_default("BIG_CLUSTER_STD_FACTOR", float,
                             _DEFAULTS.big_cluster_std_factor),
        help="size z-score above which a cluster is re-split "
             "(default: %(default)s)")


def _params_from(args) -> PipelineParams:
    try:
        return PipelineParams(
            partial_set_size=args.partial_set_size,
            min_cluster_size=args.min_cluster_size,
            min_samples=args.min_samples,
            fit_noise_on_similarity=args.fit_noise_on_similarity,
            merge_start=args.merge_start,
            merge_end=args.merge_end,
            merge_step=args.merge_step,
            big_cluster_std_factor=args.big_cluster_std_factor,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subparser's default from clobbering a top-level -v
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true",
                        default=argparse.SUPPRESS,
                        help="log progress to stderr")
    parser = _Parser(
        prog="speakercluster",
        description="Cluster unlabeled speaker embeddings and evaluate "
                    "the result.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cluster = sub.add_parser(
        "cluster", help="run the clustering pipeline over an embeddings "
                        "file", parents=[common])
    cluster.add_argument("--embeddings", required=True,
                         help="input embeddings file (text or binary)")
    cluster.add_argument("--out-assignments", required=True,
                         help="output: one cluster id per utterance")
    cluster.add_argument("--out-log", default=None,
                         help="optional output: per-stage provenance log")
    cluster.add_argument("--renormalize", action="store_true",
                         help="scale input vectors to unit norm instead "
                              "of rejecting them")
    cluster.add_argument(
        "--threads", type=int,
        default=_env_default("THREADS", int, 0),
        help="partitions clustered in parallel, 0 = auto "
             "(default: %(default)s)")
    cluster.add_argument("--apply-cap", action="store_true",
                         help="flag per-cluster utterances beyond the "
                              "duration cap as excess")
    cluster.add_argument(
        "--cap-seconds", type=float,
        default=_env_default("CAP_SECONDS", float,
                             _DEFAULTS.speaker_duration_cap_seconds),
        help="per-cluster duration cap used with --apply-cap "
             "(default: %(default)s)")
    _add_pipeline_flags(cluster)

    ev = sub.add_parser(
        "evaluate", help="score saved assignments against ground-truth "
                         "labels", parents=[common])
    ev.add_argument("--assignments", required=True)
    ev.add_argument("--embeddings", required=True,
                    help="embeddings file carrying speaker labels")
    ev.add_argument("--out-report", required=True)
    ev.add_argument("--min-utterances", type=int, default=30,
                    help="drop clusters smaller than this before scoring "
                         "(default: %(default)s)")
    ev.add_argument("--top-fraction", type=float, default=0.8,
                    help="cluster share used by the coverage statistic "
                         "(default: %(default)s)")
    ev.add_argument("--weighted", action="store_true",
                    help="report utterance-weighted average purity")
    ev.add_argument("--renormalize", action="store_true")

    synth = sub.add_parser(
        "synth", help="generate a labeled synthetic corpus",
        parents=[common])
    synth.add_argument("--out", required=True)
    synth.add_argument("--speakers", type=int, default=80,
                       help="number of speakers (default: %(default)s)")
    synth.add_argument("--utterances", type=int, default=150,
                       help="utterances per speaker (default: %(default)s)")
    synth.add_argument("--utterances-min", type=int, default=None,
                       help="with --utterances-max, draw per-speaker "
                            "counts uniformly from this range")
    synth.add_argument("--utterances-max", type=int, default=None)
    synth.add_argument("--dimension", type=int, default=256)
    synth.add_argument("--spread", type=float, default=0.35,
                       help="angular jitter around each speaker direction "
                            "(default: %(default)s)")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--duration-mean", type=float, default=6.0)
    synth.add_argument("--confusable-fraction", type=float, default=0.0,
                       help="fraction of speakers placed in confusable "
                            "pairs (default: %(default)s)")
    synth.add_argument("--confusable-similarity", type=float, default=0.9)
    synth.add_argument("--no-shuffle", action="store_true",
                       help="keep utterances grouped by speaker")
    synth.add_argument("--format", choices=("text", "binary"),
                       default="text")

    sim = sub.add_parser(
        "simreport", help="same- vs different-speaker similarity "
                          "histogram", parents=[common])
    sim.add_argument("--embeddings", required=True,
                     help="embeddings file carrying speaker labels")
    sim.add_argument("--out", required=True)
    sim.add_argument("--bins", type=int, default=80)
    sim.add_argument("--max-pairs", type=int, default=None,
                     help="subsample at most this many pairs")
    sim.add_argument("--renormalize", action="store_true")
    return parser


def cmd_cluster(args) -> int:
    params = _params_from(args)
    if args.threads < 0:
        raise _UsageError("--threads must be >= 0")
    threads = args.threads if args.threads > 0 else (os.cpu_count() or 1)
    if args.apply_cap and args.cap_seconds <= 0:
        raise _UsageError("--cap-seconds must be > 0")

    corpus = load_embeddings(args.embeddings, renormalize=args.renormalize)
    log.info("loaded %d utterances (D=%d)", len(corpus), corpus.dimension)
    result = run_pipeline(corpus, params, threads=threads)
    log.info("found %d clusters, %d noise points",
             len(result.clusters), len(result.noise))

    cap = None
    if args.apply_cap:
        cap = cap_speaker_duration(result, corpus, args.cap_seconds)
    save_assignments(result, corpus, args.out_assignments, cap=cap)
    if args.out_log:
        _write_stage_log(result, args.out_log)
    return EXIT_OK


def _write_stage_log(result, path) -> None:
    def write(fh):
        fh.write("stage\tclusters_before\tclusters_after\tnoise\n")
        for record in result.stage_log:
            fh.write(f"{record.stage}\t{record.clusters_before}\t"
                     f"{record.clusters_after}\t{record.noise_count}\n")

    _atomic_write(path, write)


def cmd_evaluate(args) -> int:
    corpus = load_embeddings(args.embeddings, renormalize=args.renormalize)
    rows = load_assignments(args.assignments)
    result = result_from_assignments(rows, corpus)
    report = evaluate(result, corpus, min_utterances=args.min_utterances,
                      top_fraction=args.top_fraction,
                      weighted=args.weighted)
    save_report(report, args.out_report)
    log.info("purity %.4f, uniqueness %.4f, noise %.4f",
             report.average_purity, report.cluster_uniqueness,
             report.noise_fraction)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.speakers < 1:
        raise _UsageError("--speakers must be >= 1")
    if (args.utterances_min is None) != (args.utterances_max is None):
        raise _UsageError("--utterances-min and --utterances-max must be "
                          "given together")
    if args.utterances_min is not None:
        per_speaker = (args.utterances_min, args.utterances_max)
    else:
        per_speaker = args.utterances
    try:
        spec = SynthSpec(
            num_speakers=args.speakers,
            utterances_per_speaker=per_speaker,
            dimension=args.dimension,
            angular_spread=args.spread,
            seed=args.seed,
            duration_mean_seconds=args.duration_mean,
            confusable_fraction=args.confusable_fraction,
            confusable_similarity=args.confusable_similarity,
            shuffle=not args.no_shuffle,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    corpus = generate(spec)
    save_embeddings(corpus, args.out, fmt=args.format)
    log.info("wrote %d utterances for %d speakers to %s",
             len(corpus), args.speakers, args.out)
    return EXIT_OK


def cmd_simreport(args) -> int:
    corpus = load_embeddings(args.embeddings, renormalize=args.renormalize)
    report = similarity_report(corpus, num_bins=args.bins,
                               max_pairs=args.max_pairs)

    def write(fh):
        fh.write(f"# same_mean={report.same_mean:.6f} "
                 f"same_std={report.same_std:.6f}\n")
        fh.write(f"# different_mean={report.different_mean:.6f} "
                 f"different_std={report.different_std:.6f}\n")
        fh.write(f"# overlap_fraction={report.overlap_fraction:.6f}\n")
        fh.write("bin_lo\tbin_hi\tsame_count\tdifferent_count\n")
        for lo, hi, same, diff in zip(report.bin_edges[:-1],
                                      report.bin_edges[1:],
                                      report.same_counts,
                                      report.different_counts):
            fh.write(f"{lo:.6f}\t{hi:.6f}\t{same}\t{diff}\n")

    _atomic_write(args.out, write)
    return EXIT_OK


_COMMANDS = {
    "cluster": cmd_cluster,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "simreport": cmd_simreport,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        stream=sys.stderr,
        level=(logging.INFO if getattr(args, "verbose", False)
               else logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileFormatError, FileNotFoundError, IsADirectoryError,
            PermissionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
