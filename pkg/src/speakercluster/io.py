"""File formats: embeddings (text and binary), assignments, reports.

Embeddings, text variant (UTF-8, LF, `#` lines are comments):

    id<TAB>duration<TAB>speaker<TAB>v1,v2,...,vD

with empty fields for absent optionals. Binary variant, little-endian:

    magic b"SEMB" | version u16 | D u32 | count u64
    | id_width u16 | speaker_width u16

then one fixed-width record per utterance: the id NUL-padded to
id_width, duration as float32 (NaN = absent), the speaker label
NUL-padded to speaker_width, and D float32 values.

Assignments and reports are tab-separated text with a header row.
All writers go through a temp file and an atomic rename.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    Cluster,
    ClusteringResult,
    Corpus,
    LOAD_NORM_TOLERANCE,
    Utterance,
)
from .metrics import EvaluationReport
from .pipeline import CapSelection

BINARY_MAGIC = b"SEMB"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sHIQHH")

NOISE_MARKER = "-1"


class FileFormatError(ValueError):
    """Malformed input file; message carries the offending row."""


def _atomic_write(path, write_fn, binary=False):
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp.{os.getpid()}")
    try:
        mode = "wb" if binary else "w"
        kwargs = {} if binary else {"encoding": "utf-8", "newline": "\n"}
        with open(tmp, mode, **kwargs) as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _format_float(x: float) -> str:
    # repr round-trips float64 exactly and is deterministic
    return repr(float(x))


def save_embeddings(corpus: Corpus, path, fmt: str = "text") -> None:
    if fmt == "text":
        _atomic_write(path, lambda fh: _write_text(corpus, fh))
    elif fmt == "binary":
        _atomic_write(path, lambda fh: _write_binary(corpus, fh),
                      binary=True)
    else:
        raise ValueError(f"unknown embeddings format {fmt!r}")


def _write_text(corpus: Corpus, fh) -> None:
    for utt in corpus.utterances:
        duration = ("" if utt.duration_seconds is None
                    else _format_float(utt.duration_seconds))
        speaker = utt.true_speaker or ""
        values = ",".join(_format_float(v) for v in utt.embedding)
        fh.write(f"{utt.id}\t{duration}\t{speaker}\t{values}\n")


def _write_binary(corpus: Corpus, fh) -> None:
    ids = [utt.id.encode("utf-8") for utt in corpus.utterances]
    speakers = [(utt.true_speaker or "").encode("utf-8")
                for utt in corpus.utterances]
    id_width = max(len(b) for b in ids)
    spk_width = max((len(b) for b in speakers), default=0)
    fh.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, corpus.dimension,
                          len(corpus), id_width, spk_width))
    for utt, raw_id, raw_spk in zip(corpus.utterances, ids, speakers):
        fh.write(raw_id.ljust(id_width, b"\x00"))
        duration = (math.nan if utt.duration_seconds is None
                    else utt.duration_seconds)
        fh.write(struct.pack("<f", duration))
        fh.write(raw_spk.ljust(spk_width, b"\x00"))
        fh.write(utt.embedding.astype("<f4").tobytes())


def load_embeddings(path, renormalize: bool = False) -> Corpus:
    """Read a corpus from either interchange format.

    The format is detected from the binary magic. Unless `renormalize`
    is set, vectors whose norm strays more than 1e-3 from 1 are rejected
    with their row number; with it, every vector is scaled to unit norm.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == BINARY_MAGIC:
        return _load_binary(path, renormalize)
    return _load_text(path, renormalize)


def _finish_row(row_num, utt_id, duration, speaker, values, seen_ids,
                dimension, renormalize):
    if utt_id in seen_ids:
        raise FileFormatError(f"row {row_num}: duplicate id {utt_id!r}")
    if dimension is not None and values.shape[0] != dimension:
        raise FileFormatError(
            f"row {row_num}: dimension {values.shape[0]} does not match "
            f"earlier rows ({dimension})"
        )
    if not np.all(np.isfinite(values)):
        raise FileFormatError(f"row {row_num}: non-finite embedding value")
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        raise FileFormatError(f"row {row_num}: zero embedding vector")
    if renormalize:
        values = values / norm
    elif abs(norm - 1.0) > LOAD_NORM_TOLERANCE:
        raise FileFormatError(
            f"row {row_num}: embedding norm {norm:.6f} deviates more than "
            f"{LOAD_NORM_TOLERANCE} from 1 (pass renormalize to accept)"
        )
    seen_ids.add(utt_id)
    return Utterance(id=utt_id, embedding=values,
                     duration_seconds=duration, true_speaker=speaker)


def _load_text(path, renormalize: bool) -> Corpus:
    utterances: list[Utterance] = []
    seen: set[str] = set()
    dimension = None
    with open(path, encoding="utf-8") as fh:
        for row_num, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise FileFormatError(
                    f"row {row_num}: expected 4 tab-separated fields, "
                    f"got {len(parts)}"
                )
            utt_id, dur_text, speaker, value_text = parts
            if not utt_id:
                raise FileFormatError(f"row {row_num}: empty id")
            try:
                duration = float(dur_text) if dur_text else None
            except ValueError:
                raise FileFormatError(
                    f"row {row_num}: bad duration {dur_text!r}"
                ) from None
            try:
                values = np.array(
                    [float(v) for v in value_text.split(",")],
                    dtype=np.float64,
                )
            except ValueError:
                raise FileFormatError(
                    f"row {row_num}: bad embedding value"
                ) from None
            utterances.append(_finish_row(
                row_num, utt_id, duration, speaker or None, values,
                seen, dimension, renormalize,
            ))
            dimension = utterances[-1].embedding.shape[0]
    if not utterances:
        raise FileFormatError(f"{path}: no utterances found")
    return Corpus(utterances)


def _load_binary(path, renormalize: bool) -> Corpus:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FileFormatError(f"{path}: truncated header")
        magic, version, dim, count, id_width, spk_width = \
            _HEADER.unpack(header)
        if magic != BINARY_MAGIC:
            raise FileFormatError(f"{path}: bad magic {magic!r}")
        if version != BINARY_VERSION:
            raise FileFormatError(f"{path}: unsupported version {version}")
        record = struct.Struct(f"<{id_width}sf{spk_width}s{dim}f")
        utterances: list[Utterance] = []
        seen: set[str] = set()
        for row_num in range(1, count + 1):
            raw = fh.read(record.size)
            if len(raw) < record.size:
                raise FileFormatError(
                    f"record {row_num}: truncated (expected {count} records)"
                )
            fields = record.unpack(raw)
            utt_id = fields[0].rstrip(b"\x00").decode("utf-8")
            duration = fields[1]
            speaker = fields[2].rstrip(b"\x00").decode("utf-8")
            values = np.array(fields[3:], dtype=np.float64)
            utterances.append(_finish_row(
                row_num, utt_id,
                None if math.isnan(duration) else float(duration),
                speaker or None, values, seen, dim if row_num > 1 else None,
                renormalize,
            ))
    if not utterances:
        raise FileFormatError(f"{path}: no utterances found")
    return Corpus(utterances)


@dataclass(frozen=True)
class AssignmentRow:
    id: str
    cluster: int
    excess: bool | None = None


def save_assignments(result: ClusteringResult, corpus: Corpus, path,
                     cap: dict[int, CapSelection] | None = None) -> None:
    """One row per utterance in corpus order: id, cluster id (-1 for
    noise), and the duration-cap excess flag when a cap was computed."""
    labels = result.labels(len(corpus))
    excess_idx: set[int] = set()
    if cap is not None:
        for selection in cap.values():
            excess_idx.update(selection.excess)

    def write(fh):
        fh.write("id\tcluster\texcess\n")
        for i, utt in enumerate(corpus.utterances):
            if cap is None or labels[i] < 0:
                flag = ""
            else:
                flag = "1" if i in excess_idx else "0"
            fh.write(f"{utt.id}\t{labels[i]}\t{flag}\n")

    _atomic_write(path, write)


def load_assignments(path) -> list[AssignmentRow]:
    rows: list[AssignmentRow] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split("\t")[:2] != ["id", "cluster"]:
            raise FileFormatError(f"{path}: unexpected header {header!r}")
        for row_num, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FileFormatError(
                    f"row {row_num}: expected 3 fields, got {len(parts)}"
                )
            utt_id, cluster_text, flag = parts
            try:
                cluster = int(cluster_text)
            except ValueError:
                raise FileFormatError(
                    f"row {row_num}: bad cluster id {cluster_text!r}"
                ) from None
            rows.append(AssignmentRow(
                id=utt_id, cluster=cluster,
                excess=None if flag == "" else flag == "1",
            ))
    return rows


def result_from_assignments(rows: list[AssignmentRow], corpus: Corpus
                            ) -> ClusteringResult:
    """Rebuild a ClusteringResult (centroids recomputed) from saved rows."""
    index_of = {utt.id: i for i, utt in enumerate(corpus.utterances)}
    members: dict[int, list[int]] = {}
    noise: set[int] = set()
    for row in rows:
        if row.id not in index_of:
            raise FileFormatError(
                f"assignment id {row.id!r} not present in the corpus"
            )
        idx = index_of[row.id]
        if row.cluster < 0:
            noise.add(idx)
        else:
            members.setdefault(row.cluster, []).append(idx)
    if len(rows) != len(corpus):
        raise FileFormatError(
            f"assignments cover {len(rows)} utterances, corpus has "
            f"{len(corpus)}"
        )
    clusters = [
        Cluster.from_members(cid, idxs, corpus.embedding_matrix,
                             origin="loaded")
        for cid, idxs in sorted(members.items())
    ]
    result = ClusteringResult(clusters=clusters, noise=frozenset(noise))
    result.validate(len(corpus))
    return result


# Report keys mirror the results table, plus the coverage statistic.
_REPORT_KEYS = (
    "num_clusters_identified",
    "average_cluster_purity_pct",
    "num_speakers_in_one_cluster",
    "cluster_uniqueness_pct",
    "noise_pct",
    "coverage_pct",
)


def save_report(report: EvaluationReport, path) -> None:
    values = {
        "num_clusters_identified": str(report.num_clusters_after_filter),
        "average_cluster_purity_pct": f"{report.average_purity * 100:.2f}",
        "num_speakers_in_one_cluster": str(
            report.speakers_with_one_dominant_cluster),
        "cluster_uniqueness_pct": f"{report.cluster_uniqueness * 100:.2f}",
        "noise_pct": f"{report.noise_fraction * 100:.2f}",
        "coverage_pct": f"{report.coverage * 100:.2f}",
    }

    def write(fh):
        fh.write("metric\tvalue\n")
        for key in _REPORT_KEYS:
            fh.write(f"{key}\t{values[key]}\n")

    _atomic_write(path, write)


def load_report(path) -> dict[str, float]:
    out: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "metric\tvalue":
            raise FileFormatError(f"{path}: unexpected header {header!r}")
        for row_num, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                key, value = line.split("\t")
                out[key] = float(value)
            except ValueError:
                raise FileFormatError(
                    f"row {row_num}: bad report line {line!r}"
                ) from None
    missing = set(_REPORT_KEYS) - set(out)
    if missing:
        raise FileFormatError(f"{path}: missing keys {sorted(missing)}")
    return out
