import numpy as np
import pytest

from speakercluster.core import PipelineParams
from speakercluster.geometry import cosine_similarity
from speakercluster.metrics import similarity_report
from speakercluster.pipeline import run_pipeline
from speakercluster.synthgen import SynthSpec, generate


class TestGenerate:
    def test_same_seed_bitwise_identical(self):
        spec = SynthSpec(num_speakers=4, utterances_per_speaker=6,
                         dimension=16, seed=7)
        a, b = generate(spec), generate(spec)
        assert [u.id for u in a.utterances] == [u.id for u in b.utterances]
        assert np.array_equal(a.embedding_matrix, b.embedding_matrix)
        assert [u.duration_seconds for u in a.utterances] == \
            [u.duration_seconds for u in b.utterances]

    def test_different_seed_differs(self):
        a = generate(SynthSpec(num_speakers=3, utterances_per_speaker=4,
                               dimension=16, seed=1))
        b = generate(SynthSpec(num_speakers=3, utterances_per_speaker=4,
                               dimension=16, seed=2))
        assert not np.array_equal(a.embedding_matrix, b.embedding_matrix)

    def test_unit_norms(self):
        corpus = generate(SynthSpec(num_speakers=5,
                                    utterances_per_speaker=10,
                                    dimension=32, seed=3))
        norms = np.linalg.norm(corpus.embedding_matrix, axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-9)

    def test_zero_spread_collapses_speakers(self):
        corpus = generate(SynthSpec(num_speakers=3,
                                    utterances_per_speaker=5,
                                    dimension=64, angular_spread=0.0,
                                    seed=4, shuffle=False))
        matrix = corpus.embedding_matrix
        for k in range(3):
            block = matrix[k * 5:(k + 1) * 5]
            assert np.all(block == block[0])
        # cross-speaker similarity small in high dimension
        cross = abs(cosine_similarity(matrix[0], matrix[5]))
        assert cross < 0.5

    def test_same_speaker_similarity_dominates(self):
        corpus = generate(SynthSpec(num_speakers=6,
                                    utterances_per_speaker=12,
                                    dimension=64, seed=5))
        report = similarity_report(corpus)
        assert report.same_mean > report.different_mean

    def test_confusable_pair_directions(self):
        spec = SynthSpec(num_speakers=6, utterances_per_speaker=4,
                         dimension=32, angular_spread=0.0, seed=6,
                         confusable_fraction=1 / 3,
                         confusable_similarity=0.9, shuffle=False)
        corpus = generate(spec)
        matrix = corpus.embedding_matrix
        # speakers 0 and 1 form the single confusable pair
        assert cosine_similarity(matrix[0], matrix[4]) == pytest.approx(
            0.9, abs=1e-9)

    def test_durations_positive_around_mean(self):
        corpus = generate(SynthSpec(num_speakers=4,
                                    utterances_per_speaker=200,
                                    dimension=8, seed=8,
                                    duration_mean_seconds=6.0))
        durations = np.array([u.duration_seconds
                              for u in corpus.utterances])
        assert np.all(durations > 0)
        assert durations.mean() == pytest.approx(6.0, rel=0.15)

    def test_per_speaker_count_list_and_range(self):
        corpus = generate(SynthSpec(num_speakers=3,
                                    utterances_per_speaker=[2, 3, 4],
                                    dimension=8, seed=9))
        assert len(corpus) == 9
        ranged = generate(SynthSpec(num_speakers=10,
                                    utterances_per_speaker=(5, 8),
                                    dimension=8, seed=10))
        counts = {}
        for utt in ranged.utterances:
            counts[utt.true_speaker] = counts.get(utt.true_speaker, 0) + 1
        assert all(5 <= c <= 8 for c in counts.values())

    def test_labels_always_present(self):
        corpus = generate(SynthSpec(num_speakers=2,
                                    utterances_per_speaker=3,
                                    dimension=8, seed=11))
        assert corpus.has_labels()

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SynthSpec(num_speakers=0)
        with pytest.raises(ValueError):
            SynthSpec(num_speakers=2, angular_spread=-0.5)
        with pytest.raises(ValueError):
            SynthSpec(num_speakers=2, utterances_per_speaker=[1])

    def test_end_to_end_recovery(self):
        corpus = generate(SynthSpec(num_speakers=2,
                                    utterances_per_speaker=4,
                                    dimension=16, angular_spread=0.05,
                                    seed=12))
        result = run_pipeline(corpus, PipelineParams())
        assert len(result.clusters) == 2
        labels = corpus.true_speakers
        for cluster in result.clusters:
            assert len({labels[i] for i in cluster.members}) == 1
