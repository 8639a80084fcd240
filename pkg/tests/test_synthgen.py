"""Synthetic generator: graphs, noise, recursion semantics, persistence."""

import json

import numpy as np
import pytest

from tscausal.errors import ConfigError, DataError, NumericError
from tscausal.synthgen import (
    GaussianMixtureNoiseSpec,
    GenerationSpec,
    MechanismSet,
    SplitSpec,
    apply_intervention,
    generate_dataset,
    load_manifest,
    load_split,
    rebuild_generation_inputs,
    sample_graph,
    sample_noise_model,
    simulate,
    simulate_with_spikes,
    validate_split_disjointness,
)
from tscausal.types import LaggedCausalGraph


class TestSampleGraph:
    def test_er_density_zero_is_empty(self):
        g = sample_graph(4, 2, "er", 0.0, np.random.default_rng(0))
        assert g.num_edges == 0

    def test_er_density_one_is_complete(self):
        g = sample_graph(4, 2, "er", 1.0, np.random.default_rng(0))
        assert g.num_edges == 2 * 4 * 4

    def test_er_graphs_are_binary(self):
        g = sample_graph(5, 3, "er", 0.3, np.random.default_rng(1))
        assert g.is_binary

    def test_er_per_lag_edge_rate(self):
        rng = np.random.default_rng(2)
        density = 0.3
        counts = np.zeros((2, 4, 4))
        reps = 400
        for _ in range(reps):
            counts += sample_graph(4, 2, "er", density, rng).edges
        rate = counts.sum() / (reps * counts.size)
        # binomial std of the pooled estimate is ~0.004
        assert abs(rate - density) < 0.015, f"edge rate {rate} far from {density}"

    def test_same_seed_reproduces(self):
        g1 = sample_graph(5, 3, "er", 0.2, np.random.default_rng(7))
        g2 = sample_graph(5, 3, "er", 0.2, np.random.default_rng(7))
        np.testing.assert_array_equal(g1.edges, g2.edges)

    def test_sf_edge_count_and_lags(self):
        g = sample_graph(6, 3, "sf", 2, np.random.default_rng(3))
        # preferential attachment with 2 edges per new node over 6 nodes
        assert g.num_edges == 2 * (6 - 2)
        ks = np.nonzero(g.edges)[0]
        assert ks.min() >= 0 and ks.max() <= 2

    def test_sf_channel_skeleton_is_acyclic(self):
        g = sample_graph(8, 2, "sf", 2, np.random.default_rng(4))
        channel_adj = g.edges.sum(axis=0) > 0
        # edges point from earlier-attached to later-attached node
        assert not np.any(channel_adj & channel_adj.T)
        js, is_ = np.nonzero(channel_adj)
        assert (js < is_).all()

    def test_bad_density_rejected(self):
        with pytest.raises(ConfigError):
            sample_graph(4, 2, "er", 1.5, np.random.default_rng(0))
        with pytest.raises(ConfigError):
            sample_graph(4, 2, "sf", 0, np.random.default_rng(0))

    def test_unknown_topology_rejected(self):
        with pytest.raises(ConfigError, match="topology"):
            sample_graph(4, 2, "ring", 0.5, np.random.default_rng(0))


class TestNoise:
    def test_sampled_spec_within_protocol_ranges(self):
        spec = sample_noise_model(6, np.random.default_rng(0))
        assert spec.num_channels == 6
        for w, m, s in zip(spec.weights, spec.means, spec.stds):
            assert 1 <= len(w) <= 5
            assert abs(w.sum() - 1) < 1e-9
            assert (m >= -1).all() and (m <= 1).all()
            assert (s >= 0.1).all() and (s <= 0.5).all()

    def test_channel_moments_match_empirical(self):
        spec = sample_noise_model(3, np.random.default_rng(1))
        draws = spec.sample(np.random.default_rng(2), 200_000)
        for c in range(3):
            assert abs(draws[:, c].mean() - spec.channel_mean(c)) < 0.01
            assert abs(draws[:, c].std() - spec.channel_std(c)) < 0.01

    def test_serialization_round_trip(self):
        spec = sample_noise_model(4, np.random.default_rng(3))
        clone = GaussianMixtureNoiseSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        for a, b in zip(spec.weights, clone.weights):
            np.testing.assert_allclose(a, b)

    def test_invalid_weights_rejected(self):
        with pytest.raises(ConfigError, match="distribution"):
            GaussianMixtureNoiseSpec(
                weights=(np.array([0.5, 0.4]),),
                means=(np.zeros(2),),
                stds=(np.ones(2),),
            )

    def test_nonpositive_std_rejected(self):
        with pytest.raises(ConfigError, match="positive"):
            GaussianMixtureNoiseSpec(
                weights=(np.array([1.0]),), means=(np.zeros(1),), stds=(np.zeros(1),)
            )


def single_edge_graph():
    """Lag-1 edge from channel 0 into channel 1, n=1, C=2."""
    edges = np.zeros((1, 2, 2))
    edges[0, 0, 1] = 1.0
    return LaggedCausalGraph(edges=edges)


class TestSimulate:
    def test_zero_edge_graph_returns_noise(self):
        graph = LaggedCausalGraph(edges=np.zeros((2, 3, 3)))
        mech = MechanismSet.linear(graph)
        spec = sample_noise_model(3, np.random.default_rng(0))
        noise = spec.sample(np.random.default_rng(1), 30)
        sim = simulate(2, mech, spec, length=30, burn_in=0, noise=noise)
        np.testing.assert_array_equal(sim.series.values, noise)

    def test_hand_recursion_single_edge(self):
        # identity mechanisms, zero noise on channel 1 -> x[t,1] == x[t-1,0]
        graph = single_edge_graph()
        mech = MechanismSet.linear(graph)
        spec = sample_noise_model(2, np.random.default_rng(0))
        noise = np.zeros((20, 2))
        noise[:, 0] = np.random.default_rng(2).normal(size=20)
        sim = simulate(1, mech, spec, length=20, burn_in=0, noise=noise)
        x = sim.series.values
        np.testing.assert_array_equal(x[1:, 1], x[:-1, 0])
        np.testing.assert_array_equal(x[:, 0], noise[:, 0])

    def test_burn_in_discards_exactly(self):
        graph = single_edge_graph()
        mech = MechanismSet.linear(graph, coef=0.5)
        spec = sample_noise_model(2, np.random.default_rng(0))
        noise = spec.sample(np.random.default_rng(3), 50)
        with_burn = simulate(1, mech, spec, length=30, burn_in=20, noise=noise)
        no_burn = simulate(1, mech, spec, length=50, burn_in=0, noise=noise)
        np.testing.assert_array_equal(with_burn.series.values, no_burn.series.values[20:])

    def test_random_mechanisms_deterministic(self):
        graph = sample_graph(4, 2, "er", 0.3, np.random.default_rng(5))
        runs = []
        for _ in range(2):
            mech = MechanismSet.random(graph, np.random.default_rng(9))
            spec = sample_noise_model(4, np.random.default_rng(10))
            sim = simulate(2, mech, spec, length=40, burn_in=10, rng=np.random.default_rng(11))
            runs.append(sim.series.values)
        np.testing.assert_array_equal(runs[0], runs[1])

    def test_divergence_names_step_and_channel(self):
        graph = single_edge_graph()
        # overflow past float range once history hits the clip bound
        mech = MechanismSet.linear(graph, coef=1e308)
        spec = sample_noise_model(2, np.random.default_rng(0))
        noise = np.zeros((10, 2))
        noise[0, 0] = 1e6
        with pytest.raises(NumericError, match=r"t=\d+, channel=1"):
            simulate(1, mech, spec, length=10, burn_in=0, noise=noise)

    def test_shared_mechanisms_apply_one_network(self):
        graph = LaggedCausalGraph(edges=np.ones((1, 2, 2)))
        mech = MechanismSet.random(graph, np.random.default_rng(0), hidden=8, shared=True)
        out = mech.edge_f.apply(np.array([0.7, 0.7, 0.7, 0.7]))
        assert np.allclose(out, out[0])

    def test_needs_rng_or_noise(self):
        graph = single_edge_graph()
        mech = MechanismSet.linear(graph)
        spec = sample_noise_model(2, np.random.default_rng(0))
        with pytest.raises(ConfigError):
            simulate(1, mech, spec, length=10)


class TestIntervention:
    def _sim(self, graph, coef=1.0, length=30, seed=0):
        mech = MechanismSet.linear(graph, coef=coef)
        spec = sample_noise_model(graph.num_channels, np.random.default_rng(42))
        sim = simulate(
            graph.n_lags, mech, spec, length=length, burn_in=5,
            rng=np.random.default_rng(seed),
        )
        return sim, mech, spec

    def test_zero_edge_graph_changes_only_treated_entry(self):
        graph = LaggedCausalGraph(edges=np.zeros((2, 3, 3)))
        sim, mech, spec = self._sim(graph)
        do, record = apply_intervention(
            sim, 2, mech, spec, t1=10, t2=14, rng=np.random.default_rng(1), channels=(2,)
        )
        diff = do.values != sim.series.values
        assert diff.sum() == 1
        assert diff[10, 2]
        assert record.channels == (2,)

    def test_point_intervention_diff_before_t1(self):
        graph = single_edge_graph()
        sim, mech, spec = self._sim(graph)
        do, record = apply_intervention(
            sim, 1, mech, spec, t1=12, t2=12, rng=np.random.default_rng(2), channels=(0,)
        )
        diff = do.values != sim.series.values
        # nothing before or at t1 changes except the treated cell
        assert diff[:13].sum() == 1 and diff[12, 0]
        # the edge 0->1 propagates the change to channel 1 at t1+1
        assert diff[13, 1]

    def test_propagation_follows_shared_noise_recursion(self):
        graph = single_edge_graph()
        sim, mech, spec = self._sim(graph, coef=0.8)
        do, record = apply_intervention(
            sim, 1, mech, spec, t1=6, t2=8, rng=np.random.default_rng(3), channels=(0,)
        )
        x = do.values
        noise = sim.noise[sim.burn_in :]
        # channel 1 must equal 0.8 * previous channel 0 + its own base noise draw
        np.testing.assert_allclose(x[7:, 1], 0.8 * x[6:-1, 0] + noise[7:, 1])

    def test_bad_extent_rejected(self):
        graph = single_edge_graph()
        sim, mech, spec = self._sim(graph)
        with pytest.raises(ConfigError):
            apply_intervention(sim, 1, mech, spec, t1=8, t2=5, rng=np.random.default_rng(0))
        with pytest.raises(ConfigError):
            apply_intervention(sim, 1, mech, spec, t1=0, t2=99, rng=np.random.default_rng(0))

    def test_replacement_recorded(self):
        graph = LaggedCausalGraph(edges=np.zeros((1, 2, 2)))
        sim, mech, spec = self._sim(graph)
        do, record = apply_intervention(
            sim, 1, mech, spec, t1=4, t2=6, rng=np.random.default_rng(5)
        )
        c = record.channels[0]
        assert do.values[4, c] == record.values[0]


class TestSpikes:
    def test_spike_adds_scaled_std_to_noise(self):
        graph = LaggedCausalGraph(edges=np.zeros((1, 2, 2)))
        mech = MechanismSet.linear(graph)
        spec = sample_noise_model(2, np.random.default_rng(0))
        base = spec.sample(np.random.default_rng(77), 25)
        result, truth = simulate_with_spikes(
            1, mech, spec, length=20, spikes=[(7, 1, 8.0)], burn_in=5,
            rng=np.random.default_rng(77),
        )
        assert truth == [(7, 1)]
        expected = base.copy()
        expected[5 + 7, 1] += 8.0 * spec.channel_std(1)
        np.testing.assert_allclose(result.noise, expected)

    def test_spike_time_validated(self):
        graph = LaggedCausalGraph(edges=np.zeros((1, 2, 2)))
        mech = MechanismSet.linear(graph)
        spec = sample_noise_model(2, np.random.default_rng(0))
        with pytest.raises(ConfigError):
            simulate_with_spikes(
                1, mech, spec, length=10, spikes=[(10, 0, 8.0)], rng=np.random.default_rng(0)
            )


def tiny_spec(seed=0, tmp_suffix=""):
    return GenerationSpec(
        node_sizes=(3,),
        n_lags=2,
        topology="er",
        density=0.25,
        length=40,
        burn_in=20,
        seed=seed,
        splits={
            "train": SplitSpec(graphs=3, series_per_graph=2, interventions=True),
            "val": SplitSpec(graphs=2, series_per_graph=1, interventions=True),
            "test": SplitSpec(graphs=2, series_per_graph=1, interventions=False),
        },
    )


class TestDatasetPersistence:
    def test_generate_load_round_trip(self, tmp_path):
        manifest = generate_dataset(tiny_spec(), tmp_path)
        assert set(manifest["splits"]) == {"train", "val", "test"}
        split = load_split(tmp_path, "train")
        assert split.num_series == 6
        assert len(split.graphs) == 3
        assert len(split.intervened) == 6
        assert len(split.records) == 6
        for series in split.series:
            assert series.values.shape == (40, 3)
            assert series.series_id in split.intervened

    def test_manifest_is_byte_identical_across_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        generate_dataset(tiny_spec(seed=5), a)
        generate_dataset(tiny_spec(seed=5), b)
        assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
        for rel in ["train/graphs.jsonl", "train/noise.jsonl", "train/interventions.jsonl"]:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
        m = load_manifest(a)
        one = m["splits"]["train"]["series"][0]["file"]
        assert (a / one).read_bytes() == (b / one).read_bytes()

    def test_different_seed_changes_data(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        generate_dataset(tiny_spec(seed=1), a)
        generate_dataset(tiny_spec(seed=2), b)
        assert (a / "manifest.json").read_bytes() != (b / "manifest.json").read_bytes()

    def test_checksums_verify(self, tmp_path):
        generate_dataset(tiny_spec(), tmp_path)
        load_manifest(tmp_path, verify=True)

    def test_corrupted_series_detected(self, tmp_path):
        manifest = generate_dataset(tiny_spec(), tmp_path)
        rel = manifest["splits"]["train"]["series"][0]["file"]
        blob = bytearray((tmp_path / rel).read_bytes())
        blob[-1] ^= 0xFF
        (tmp_path / rel).write_bytes(bytes(blob))
        with pytest.raises(DataError, match="checksum"):
            load_manifest(tmp_path, verify=True)

    def test_missing_series_file_rejected(self, tmp_path):
        manifest = generate_dataset(tiny_spec(), tmp_path)
        rel = manifest["splits"]["val"]["series"][0]["file"]
        (tmp_path / rel).unlink()
        with pytest.raises(DataError, match="missing"):
            load_split(tmp_path, "val")

    def test_duplicate_graph_ids_across_splits_rejected(self, tmp_path):
        manifest = generate_dataset(tiny_spec(), tmp_path)
        doctored = json.loads(json.dumps(manifest))
        doctored["splits"]["val"]["graphs"][0]["graph_id"] = manifest["splits"]["train"][
            "graphs"
        ][0]["graph_id"]
        with pytest.raises(DataError, match="appears in splits"):
            validate_split_disjointness(doctored)

    def test_unknown_format_version_rejected(self, tmp_path):
        generate_dataset(tiny_spec(), tmp_path)
        path = tmp_path / "manifest.json"
        payload = json.loads(path.read_text())
        payload["format_version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(DataError, match="format_version"):
            load_manifest(tmp_path)

    def test_rebuild_generation_inputs_replays_exactly(self, tmp_path):
        manifest = generate_dataset(tiny_spec(), tmp_path)
        split = load_split(tmp_path, "train")
        entry = manifest["splits"]["train"]["series"][3]
        graph, mech, noise_spec = rebuild_generation_inputs(tmp_path, entry["graph_id"])
        np.testing.assert_array_equal(graph.edges, split.graphs[entry["graph_id"]].edges)
        # replaying the stored seed path regenerates identical series bytes
        spec = GenerationSpec.from_dict(manifest["spec"])
        _, _, gi, si = entry["seed_path"]
        sim = simulate(
            spec.n_lags, mech, noise_spec, spec.length, burn_in=spec.burn_in,
            rng=np.random.default_rng(np.random.SeedSequence(entry["seed_path"][:1] + [2, gi, si])),
        )
        stored = next(s for s in split.series if s.series_id == entry["series_id"])
        np.testing.assert_array_equal(sim.series.values, stored.values)

    def test_intervened_series_and_records_align(self, tmp_path):
        generate_dataset(tiny_spec(), tmp_path)
        split = load_split(tmp_path, "train")
        for series in split.series:
            record = split.records[series.series_id]
            do = split.intervened[series.series_id]
            assert do.shape == series.values.shape
            # treated value at t1 matches the recorded replacement
            c = record.channels[0]
            assert do[record.t1, c] == pytest.approx(record.values[0])
