import itertools

import numpy as np
import pytest

from speakercluster.core import Cluster, Corpus, PipelineParams, Utterance
from speakercluster.geometry import cosine_similarity
from speakercluster.pipeline import (
    MergeSchedule,
    assign_noise,
    cap_speaker_duration,
    cluster_partition,
    find_big_clusters,
    merge_clusters,
    partition_corpus,
    run_pipeline,
    split_big_cluster,
)

from oracles import blob_matrix, random_unit_vectors


def corpus_from_points(points, labels=None, durations=None):
    utterances = []
    for i, row in enumerate(points):
        utterances.append(Utterance(
            id=f"utt{i:05d}",
            embedding=np.asarray(row, dtype=float),
            duration_seconds=None if durations is None else durations[i],
            true_speaker=None if labels is None else str(labels[i]),
        ))
    return Corpus(utterances)


def singleton_clusters(points, ids=None):
    matrix = np.asarray(points, dtype=float)
    ids = ids or range(len(matrix))
    return [Cluster.from_members(cid, [i], matrix)
            for i, cid in enumerate(ids)], matrix


class TestMergeSchedule:
    def test_default_levels(self):
        schedule = MergeSchedule.from_range(0.96, 0.90, 0.01)
        assert schedule.thresholds == (0.96, 0.95, 0.94, 0.93, 0.92,
                                       0.91, 0.90)

    def test_single_level(self):
        assert MergeSchedule.from_range(0.9, 0.9, 0.01).thresholds == (0.9,)

    def test_rejects_ascending(self):
        with pytest.raises(ValueError):
            MergeSchedule((0.9, 0.95))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            MergeSchedule((1.2,))


class TestPartitionCorpus:
    def test_three_partitions(self):
        assert partition_corpus(25000, 10000, 4) == [
            range(0, 10000), range(10000, 20000), range(20000, 25000)
        ]

    def test_below_threshold_single_range(self):
        assert partition_corpus(9999, 10000, 4) == [range(0, 9999)]

    def test_short_tail_merges_into_previous(self):
        assert partition_corpus(10002, 10000, 4) == [range(0, 10002)]

    def test_tail_at_min_size_stays(self):
        assert partition_corpus(10004, 10000, 4) == [
            range(0, 10000), range(10000, 10004)
        ]

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            partition_corpus(0, 10000, 4)

    def test_partial_set_smaller_than_min_cluster(self):
        with pytest.raises(ValueError):
            partition_corpus(10, 2, 4)

    def test_all_ranges_cover_corpus(self):
        rng = np.random.default_rng(30)
        for _ in range(50):
            n = int(rng.integers(1, 5000))
            size = int(rng.integers(4, 1200))
            spans = partition_corpus(n, size, 4)
            flat = [i for span in spans for i in span]
            assert flat == list(range(n))
            if len(spans) > 1:
                assert all(len(span) >= 4 for span in spans)


class TestClusterPartition:
    def test_two_blobs(self):
        rng = np.random.default_rng(31)
        points, truth = blob_matrix(rng, [4, 4], 8, 0.02)
        corpus = corpus_from_points(points)
        got = cluster_partition(corpus, range(0, 8), PipelineParams())
        assert len(got.clusters) == 2
        assert not got.noise
        got.validate(8)

    def test_identical_embeddings(self):
        corpus = corpus_from_points(np.tile([1.0, 0.0], (4, 1)))
        got = cluster_partition(corpus, range(0, 4), PipelineParams())
        assert len(got.clusters) == 1

    def test_orthogonal_spray_invariant_only(self):
        # regular simplex directions: all pairwise similarities negative
        basis = np.eye(6)
        center = basis.mean(axis=0)
        points = basis - center
        points /= np.linalg.norm(points, axis=1, keepdims=True)
        corpus = corpus_from_points(points)
        got = cluster_partition(corpus, range(0, 6), PipelineParams())
        got.validate(6)

    def test_offsets_are_global(self):
        rng = np.random.default_rng(32)
        points, _ = blob_matrix(rng, [4, 4], 8, 0.02)
        corpus = corpus_from_points(points)
        got = cluster_partition(corpus, range(4, 8), PipelineParams(),
                                id_start=17, partition_index=3)
        assert all(c.id >= 17 for c in got.clusters)
        members = set().union(*(c.members for c in got.clusters)) | got.noise
        assert members == set(range(4, 8))
        assert all(c.origin == "partition:3" for c in got.clusters)

    def test_too_small_partition(self):
        corpus = corpus_from_points([[1.0, 0.0]])
        with pytest.raises(ValueError):
            cluster_partition(corpus, range(0, 1), PipelineParams())


class TestMergeClusters:
    def test_identical_singletons_merge(self):
        clusters, matrix = singleton_clusters([[1.0, 0.0], [1.0, 0.0]])
        got = merge_clusters(clusters, MergeSchedule.from_range(0.96, 0.9, 0.01),
                             matrix)
        assert len(got) == 1
        assert got[0].size == 2
        assert got[0].id == 0

    def test_below_final_threshold_unchanged(self):
        theta = np.arccos(0.89)
        clusters, matrix = singleton_clusters(
            [[1.0, 0.0], [np.cos(theta), np.sin(theta)]]
        )
        got = merge_clusters(clusters, MergeSchedule.from_range(0.96, 0.9, 0.01),
                             matrix)
        assert len(got) == 2

    def test_hand_traced_second_merge_at_last_level(self):
        # A at angle 0, B at arccos(.97), C further at arccos(.95) from B.
        # After A+B merge, the centroid sits halfway; by hand
        # cos(t1/2 + t2) = 0.9046... so the pair merges only at 0.90.
        t1, t2 = np.arccos(0.97), np.arccos(0.95)
        angles = [0.0, t1, t1 + t2]
        clusters, matrix = singleton_clusters(
            [[np.cos(a), np.sin(a)] for a in angles]
        )
        expected_second = np.cos(t1 / 2 + t2)
        assert 0.90 <= expected_second < 0.91
        got = merge_clusters(clusters, MergeSchedule.from_range(0.96, 0.9, 0.01),
                             matrix)
        assert len(got) == 1
        assert got[0].members == frozenset({0, 1, 2})

    def test_hand_traced_second_merge_never_happens(self):
        t1, t2 = np.arccos(0.97), np.arccos(0.91)
        angles = [0.0, t1, t1 + t2]
        clusters, matrix = singleton_clusters(
            [[np.cos(a), np.sin(a)] for a in angles]
        )
        assert np.cos(t1 / 2 + t2) < 0.90
        got = merge_clusters(clusters, MergeSchedule.from_range(0.96, 0.9, 0.01),
                             matrix)
        assert len(got) == 2
        assert sorted(c.size for c in got) == [1, 2]

    def test_merged_takes_smaller_id(self):
        clusters, matrix = singleton_clusters([[1.0, 0.0], [1.0, 0.0]],
                                              ids=[5, 9])
        got = merge_clusters(clusters, MergeSchedule((0.9,)), matrix)
        assert got[0].id == 5

    def test_idempotent(self):
        rng = np.random.default_rng(33)
        points, _ = blob_matrix(rng, [3, 3, 3, 3], 8, 0.12)
        clusters, matrix = singleton_clusters(points)
        schedule = MergeSchedule.from_range(0.96, 0.9, 0.01)
        once = merge_clusters(clusters, schedule, matrix)
        twice = merge_clusters(once, schedule, matrix)
        assert [c.members for c in once] == [c.members for c in twice]

    def test_never_shrinks_never_grows_count(self):
        rng = np.random.default_rng(34)
        for _ in range(20):
            points = random_unit_vectors(rng, 12, 6)
            clusters, matrix = singleton_clusters(points)
            got = merge_clusters(clusters, MergeSchedule.from_range(0.9, 0.5, 0.1),
                                 matrix)
            assert len(got) <= len(clusters)
            total = sum(c.size for c in got)
            assert total == 12

    def test_empty_input(self):
        assert merge_clusters([], MergeSchedule((0.9,)),
                              np.zeros((0, 4))) == []


class TestFindBigClusters:
    def make(self, sizes):
        # one dummy direction per cluster; members on distinct indices
        rng = np.random.default_rng(35)
        total = sum(sizes)
        matrix = random_unit_vectors(rng, total, 4)
        clusters, start = [], 0
        for cid, size in enumerate(sizes):
            clusters.append(Cluster.from_members(
                cid, range(start, start + size), matrix))
            start += size
        return clusters

    def test_zero_variance(self):
        assert find_big_clusters(self.make([10, 10, 10]), 2.0) == set()

    def test_population_std_cutoff(self):
        clusters = self.make([10, 10, 10, 100])
        # mean 32.5, population std ~38.97: only std_factor 1.0 flags
        assert find_big_clusters(clusters, 2.0) == set()
        assert find_big_clusters(clusters, 1.0) == {3}

    def test_single_cluster(self):
        assert find_big_clusters(self.make([7]), 2.0) == set()

    def test_empty(self):
        assert find_big_clusters([], 2.0) == set()


class TestSplitBigCluster:
    def test_fused_two_blob_cluster_splits(self):
        rng = np.random.default_rng(36)
        directions = np.eye(8)[:2]
        points, truth = blob_matrix(rng, [8, 8], 8, 0.03,
                                    directions=directions)
        corpus = corpus_from_points(points)
        fused = Cluster.from_members(0, range(16), corpus.embedding_matrix)
        pieces, noise = split_big_cluster(corpus, fused, PipelineParams(),
                                          itertools.count(100))
        assert len(pieces) == 2
        for blob in (0, 1):
            blob_indices = set(np.nonzero(truth == blob)[0].tolist())
            assert any(c.members == blob_indices for c in pieces)
        assert not noise
        assert all(c.origin == "split" for c in pieces)

    def test_homogeneous_cluster_unchanged(self):
        rng = np.random.default_rng(37)
        points, _ = blob_matrix(rng, [16], 8, 0.03)
        corpus = corpus_from_points(points)
        cluster = Cluster.from_members(4, range(16), corpus.embedding_matrix)
        pieces, noise = split_big_cluster(corpus, cluster, PipelineParams())
        assert pieces == [cluster]
        assert not noise

    def test_small_cluster_short_circuits(self):
        rng = np.random.default_rng(38)
        points, _ = blob_matrix(rng, [5], 8, 0.03)
        corpus = corpus_from_points(points)
        cluster = Cluster.from_members(0, range(5), corpus.embedding_matrix)
        pieces, noise = split_big_cluster(corpus, cluster, PipelineParams())
        assert pieces == [cluster]
        assert not noise

    def test_members_conserved(self):
        rng = np.random.default_rng(39)
        points, _ = blob_matrix(rng, [8, 8, 4], 8, 0.18)
        corpus = corpus_from_points(points)
        cluster = Cluster.from_members(0, range(20), corpus.embedding_matrix)
        pieces, noise = split_big_cluster(corpus, cluster, PipelineParams(),
                                          itertools.count(50))
        covered = set().union(*(c.members for c in pieces)) | set(noise)
        assert covered == cluster.members


class TestAssignNoise:
    def test_identical_to_centroid_assigned(self):
        points = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
        corpus = corpus_from_points(points)
        clusters = [Cluster.from_members(0, [0, 1], corpus.embedding_matrix)]
        got, remaining = assign_noise(corpus, clusters, frozenset({2}), 0.8)
        assert not remaining
        assert got[0].members == frozenset({0, 1, 2})

    def test_orthogonal_stays_noise(self):
        points = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        corpus = corpus_from_points(points)
        clusters = [Cluster.from_members(0, [0, 1], corpus.embedding_matrix)]
        got, remaining = assign_noise(corpus, clusters, frozenset({2}), 0.8)
        assert remaining == frozenset({2})
        assert got[0].members == frozenset({0, 1})

    def test_tie_goes_to_lower_cluster_id(self):
        phi = 2 * np.arccos(0.85)
        points = np.array([
            [1.0, 0.0],
            [np.cos(phi), np.sin(phi)],
            [np.cos(phi / 2), np.sin(phi / 2)],  # equally similar to both
        ])
        corpus = corpus_from_points(points)
        matrix = corpus.embedding_matrix
        clusters = [Cluster.from_members(7, [1], matrix),
                    Cluster.from_members(3, [0], matrix)]
        assert cosine_similarity(matrix[2], matrix[0]) == pytest.approx(0.85)
        assert cosine_similarity(matrix[2], matrix[1]) == pytest.approx(0.85)
        got, remaining = assign_noise(corpus, clusters, frozenset({2}), 0.8)
        assert not remaining
        by_id = {c.id: c for c in got}
        assert 2 in by_id[3].members
        assert 2 not in by_id[7].members

    def test_threshold_is_strict(self):
        theta = np.arccos(0.8)
        points = np.array([[1.0, 0.0], [np.cos(theta), np.sin(theta)]])
        corpus = corpus_from_points(points)
        clusters = [Cluster.from_members(0, [0], corpus.embedding_matrix)]
        got, remaining = assign_noise(corpus, clusters, frozenset({1}), 0.8)
        assert remaining == frozenset({1})

    def test_no_clusters(self):
        corpus = corpus_from_points([[1.0, 0.0], [0.0, 1.0]])
        got, remaining = assign_noise(corpus, [], frozenset({0, 1}), 0.8)
        assert got == []
        assert remaining == frozenset({0, 1})

    def test_matches_per_point_oracle(self):
        rng = np.random.default_rng(40)
        for _ in range(20):
            points, _ = blob_matrix(rng, [5, 5, 5], 8, 0.25)
            corpus = corpus_from_points(points)
            matrix = corpus.embedding_matrix
            clusters = [Cluster.from_members(0, [0, 1, 2], matrix),
                        Cluster.from_members(1, [5, 6, 7], matrix)]
            noise = frozenset(range(10, 15))
            got, remaining = assign_noise(corpus, clusters, noise, 0.8)
            # oracle: decide each point against the original centroids
            for p in noise:
                sims = [cosine_similarity(matrix[p], c.centroid)
                        for c in clusters]
                best = int(np.argmax(sims))
                if max(sims) > 0.8:
                    assert p in got[best].members
                    assert p not in remaining
                else:
                    assert p in remaining

    def test_never_unassigns(self):
        rng = np.random.default_rng(41)
        points, _ = blob_matrix(rng, [4, 4], 8, 0.3)
        corpus = corpus_from_points(points)
        matrix = corpus.embedding_matrix
        clusters = [Cluster.from_members(0, [0, 1, 2, 3], matrix)]
        noise = frozenset({4, 5, 6, 7})
        got, remaining = assign_noise(corpus, clusters, noise, 0.5)
        assert clusters[0].members <= got[0].members
        assert remaining <= noise


class TestRunPipeline:
    def test_ten_tight_speakers(self):
        rng = np.random.default_rng(42)
        points, truth = blob_matrix(rng, [40] * 10, 32, 0.08)
        corpus = corpus_from_points(points, labels=truth)
        result = run_pipeline(corpus, PipelineParams())
        assert len(result.clusters) == 10
        assert len(result.noise) <= 4
        for cluster in result.clusters:
            labels = {truth[i] for i in cluster.members}
            assert len(labels) == 1

    def test_single_partition_equals_manual_stages(self):
        from speakercluster.pipeline import MergeSchedule as MS
        rng = np.random.default_rng(43)
        points, _ = blob_matrix(rng, [8, 8, 8], 16, 0.1)
        corpus = corpus_from_points(points)
        params = PipelineParams()
        result = run_pipeline(corpus, params)

        partial = cluster_partition(corpus, range(len(corpus)), params,
                                    id_start=0)
        schedule = MS.from_params(params)
        matrix = corpus.embedding_matrix
        clusters = merge_clusters(partial.clusters, schedule, matrix,
                                  origin="merge:1")
        big = find_big_clusters(clusters, params.big_cluster_std_factor)
        noise = set(partial.noise)
        merged = []
        id_source = itertools.count(len(corpus))
        for c in clusters:
            if c.id in big:
                pieces, extra = split_big_cluster(corpus, c, params,
                                                  id_source)
                merged.extend(pieces)
                noise |= extra
            else:
                merged.append(c)
        merged = merge_clusters(merged, schedule, matrix, origin="merge:2")
        final, remaining = assign_noise(corpus, merged, frozenset(noise),
                                        params.fit_noise_on_similarity)
        assert result.labels(len(corpus)).tolist() == \
            ClusteringResult_labels(final, remaining, len(corpus))

    def test_speakers_split_across_partitions_reunify(self):
        rng = np.random.default_rng(44)
        speakers, per_half = 10, 20
        directions = random_unit_vectors(rng, speakers, 32)
        halves = []
        truth = []
        for _ in range(2):
            points, labels = blob_matrix(
                rng, [per_half] * speakers, 32, 0.08, directions=directions)
            halves.append(points)
            truth.extend(labels.tolist())
        corpus = corpus_from_points(np.vstack(halves), labels=truth)
        params = PipelineParams(partial_set_size=speakers * per_half)
        result = run_pipeline(corpus, params)

        stage_names = [s.stage for s in result.stage_log]
        assert stage_names == [
            "partition_clustering", "merge_pass_1", "split_big_clusters",
            "merge_pass_2", "assign_noise",
        ]
        partition_stage = result.stage_log[0]
        merge_stage = result.stage_log[1]
        assert partition_stage.clusters_after == 2 * speakers
        assert merge_stage.clusters_after == speakers

        assert len(result.clusters) == speakers
        for cluster in result.clusters:
            labels = {truth[i] for i in cluster.members}
            assert len(labels) == 1

    def test_deterministic_across_threads(self):
        rng = np.random.default_rng(45)
        points, _ = blob_matrix(rng, [15] * 4, 16, 0.1)
        corpus = corpus_from_points(points)
        params = PipelineParams(partial_set_size=20)
        one = run_pipeline(corpus, params, threads=1)
        two = run_pipeline(corpus, params, threads=3)
        assert one.labels(len(corpus)).tolist() == \
            two.labels(len(corpus)).tolist()
        assert one.stage_log == two.stage_log

    def test_partition_invariant_random_corpora(self):
        rng = np.random.default_rng(46)
        for _ in range(10):
            sizes = rng.integers(4, 20, size=rng.integers(2, 5)).tolist()
            spread = float(rng.uniform(0.05, 0.35))
            points, _ = blob_matrix(rng, sizes, 12, spread)
            corpus = corpus_from_points(points)
            result = run_pipeline(
                corpus, PipelineParams(partial_set_size=max(8, len(points) // 2))
            )
            result.validate(len(corpus))


def ClusteringResult_labels(clusters, noise, n):
    from speakercluster.core import ClusteringResult
    return ClusteringResult(clusters=list(clusters),
                            noise=noise).labels(n).tolist()


class TestCapSpeakerDuration:
    def make_result(self, durations):
        rng = np.random.default_rng(47)
        points = random_unit_vectors(rng, len(durations), 4)
        corpus = corpus_from_points(points, durations=durations)
        from speakercluster.core import ClusteringResult
        cluster = Cluster.from_members(0, range(len(durations)),
                                       corpus.embedding_matrix)
        result = ClusteringResult(clusters=[cluster], noise=frozenset())
        return result, corpus

    def test_under_cap_all_selected(self):
        result, corpus = self.make_result([60.0] * 30)  # 30 minutes
        got = cap_speaker_duration(result, corpus, 5400.0)
        assert len(got[0].selected) == 30
        assert got[0].excess == ()

    def test_overflow_flagged(self):
        result, corpus = self.make_result([60.0] * 100)
        got = cap_speaker_duration(result, corpus, 5400.0)
        assert len(got[0].selected) == 90
        assert len(got[0].excess) == 10
        assert got[0].selected == tuple(range(90))
        assert got[0].excess == tuple(range(90, 100))

    def test_exact_boundary_included(self):
        result, corpus = self.make_result([2700.0, 2700.0, 1.0])
        got = cap_speaker_duration(result, corpus, 5400.0)
        assert got[0].selected == (0, 1)
        assert got[0].excess == (2,)

    def test_missing_durations_error(self):
        rng = np.random.default_rng(48)
        points = random_unit_vectors(rng, 3, 4)
        corpus = corpus_from_points(points, durations=[60.0, None, None])
        from speakercluster.core import ClusteringResult
        cluster = Cluster.from_members(0, range(3), corpus.embedding_matrix)
        result = ClusteringResult(clusters=[cluster], noise=frozenset())
        with pytest.raises(ValueError) as exc:
            cap_speaker_duration(result, corpus, 5400.0)
        assert "utt00001" in str(exc.value)
        assert "utt00002" in str(exc.value)
