"""Labeled synthetic speaker-embedding corpora for testing and benchmarks.

Each speaker is a random direction on the unit sphere; utterances are
that direction plus isotropic gaussian jitter, renormalized. A
confusable-pair mode places pairs of speaker directions at a fixed
similarity to mimic hard-to-separate voices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Corpus, Utterance


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic corpus. Fully determined by the seed.

    angular_spread is dimension-independent: the jitter vector's expected
    norm, so expected same-speaker similarity is roughly
    1 / (1 + angular_spread^2) at any dimension.
    """

    num_speakers: int
    utterances_per_speaker: int | tuple[int, int] | list[int] = 100
    dimension: int = 256
    angular_spread: float = 0.35
    seed: int = 0
    duration_mean_seconds: float = 6.0
    confusable_fraction: float = 0.0
    confusable_similarity: float = 0.9
    shuffle: bool = True

    def __post_init__(self):
        if self.num_speakers < 1:
            raise ValueError("num_speakers must be >= 1")
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")
        if self.angular_spread < 0:
            raise ValueError("angular_spread must be >= 0")
        if self.duration_mean_seconds <= 0:
            raise ValueError("duration_mean_seconds must be > 0")
        if not 0.0 <= self.confusable_fraction <= 1.0:
            raise ValueError("confusable_fraction must be in [0, 1]")
        if not -1.0 < self.confusable_similarity < 1.0:
            raise ValueError("confusable_similarity must be in (-1, 1)")
        if isinstance(self.utterances_per_speaker, list):
            if len(self.utterances_per_speaker) != self.num_speakers:
                raise ValueError("per-speaker utterance list must have "
                                 "num_speakers entries")
            if any(u < 1 for u in self.utterances_per_speaker):
                raise ValueError("utterance counts must be >= 1")
        elif isinstance(self.utterances_per_speaker, tuple):
            lo, hi = self.utterances_per_speaker
            if not 1 <= lo <= hi:
                raise ValueError("utterance range must satisfy 1 <= lo <= hi")
        elif self.utterances_per_speaker < 1:
            raise ValueError("utterances_per_speaker must be >= 1")


def _speaker_counts(spec: SynthSpec, rng) -> list[int]:
    if isinstance(spec.utterances_per_speaker, list):
        return list(spec.utterances_per_speaker)
    if isinstance(spec.utterances_per_speaker, tuple):
        lo, hi = spec.utterances_per_speaker
        return rng.integers(lo, hi + 1, size=spec.num_speakers).tolist()
    return [spec.utterances_per_speaker] * spec.num_speakers


def _speaker_directions(spec: SynthSpec, rng) -> np.ndarray:
    d = spec.dimension
    directions = rng.normal(size=(spec.num_speakers, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    pairs = int(spec.num_speakers * spec.confusable_fraction) // 2
    s = spec.confusable_similarity
    for p in range(pairs):
        a, b = 2 * p, 2 * p + 1
        base = directions[a]
        # component of b orthogonal to a, renormalized
        ortho = directions[b] - (directions[b] @ base) * base
        norm = np.linalg.norm(ortho)
        if norm < 1e-12:
            ortho = np.zeros(d)
            ortho[(np.argmax(np.abs(base)) + 1) % d] = 1.0
            ortho -= (ortho @ base) * base
            norm = np.linalg.norm(ortho)
        ortho /= norm
        directions[b] = s * base + np.sqrt(1.0 - s * s) * ortho
    return directions


def generate(spec: SynthSpec) -> Corpus:
    """Deterministic corpus with ground-truth speaker labels and durations."""
    rng = np.random.default_rng(spec.seed)
    counts = _speaker_counts(spec, rng)
    directions = _speaker_directions(spec, rng)

    # per-coordinate sigma such that the jitter norm is ~angular_spread
    sigma = spec.angular_spread / np.sqrt(spec.dimension)
    utterances: list[Utterance] = []
    for k, count in enumerate(counts):
        speaker = f"spk{k:03d}"
        raw = directions[k] + sigma * rng.normal(
            size=(count, spec.dimension))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        durations = rng.gamma(shape=4.0,
                              scale=spec.duration_mean_seconds / 4.0,
                              size=count)
        for j in range(count):
            utterances.append(Utterance(
                id=f"{speaker}_utt{j:04d}",
                embedding=raw[j],
                duration_seconds=float(max(durations[j], 0.1)),
                true_speaker=speaker,
            ))
    if spec.shuffle:
        order = rng.permutation(len(utterances))
        utterances = [utterances[i] for i in order]
    return Corpus(utterances)
