from __future__ import annotations

import itertools
import json
import math

import numpy as np
import pytest

from multikey.hashing import HashInstance, derive_seed, rng_for
from multikey.info_measures import GaussianModel, JointPmf, SizeGuardError, product, random_pmf, uniform
from multikey.output_statistics import secrecy_exponent
from multikey.protocol import (
    DecodeError,
    Instances,
    ProtocolConfig,
    Transcript,
    cellular_simulate,
    draw_instances,
    encode_all,
    error_exponent_bound,
    exact_leakage,
    exponent_report,
    index_digits,
    leakage_of,
    ml_decode,
    quaternary_surrogate,
    realized_size,
    run_trial,
    sample_source,
    secrecy_exponent_bounds,
    seq_index,
    simulate_trials,
    to_symbols,
)
from multikey.quantization import Quantizer


def binary_source(rng, alpha=1.0):
    return random_pmf(["B0", "B1", "B2", "B3"], [2, 2, 2, 2], rng, alpha=alpha)


def correlated_binary(flip=0.05):
    """B1, B2, B3 are noisy copies of a uniform B0."""
    table = np.zeros((2, 2, 2, 2))
    for b in itertools.product(range(2), repeat=4):
        table[b] = 0.5 * np.prod([flip if x != b[0] else 1 - flip for x in b[1:]])
    return JointPmf(["B0", "B1", "B2", "B3"], table)


def config_for(source, n=2, bins=(1.0, 1.0, 1.0), keys=(0.2, 0.2), **kw):
    return ProtocolConfig(source=source, n=n, bin_rates=bins, key_rates=keys, **kw)


def constant_instances(config):
    bins = {t: HashInstance(config.bin_family(t), np.zeros(config.bin_family(t).domain_size, np.int64))
            for t in config.binned}
    keys = {t: HashInstance(config.key_family(t), np.zeros(config.key_family(t).domain_size, np.int64))
            for t in config.key_terminals}
    return Instances(bins, keys)


def identity_instances(config):
    def ident(fam):
        return HashInstance(fam, np.arange(fam.domain_size, dtype=np.int64))

    return Instances({t: ident(config.bin_family(t)) for t in config.binned},
                     {t: ident(config.key_family(t)) for t in config.key_terminals})


def brute_force_decode(config, b0, transcript, inst):
    """Scores every tuple of sequences consistent with the buckets."""
    pmf = config.pmf.probs
    n, a = config.n, config.alphabet(1)
    best, arg = -math.inf, None
    seqs = list(itertools.product(range(a), repeat=n))
    for cand in itertools.product(seqs, repeat=3):
        if any(inst.bins[t](seq_index(cand[t - 1], a)) != transcript.messages[t] for t in (1, 2, 3)):
            continue
        p = math.prod(pmf[(b0[i],) + tuple(c[i] for c in cand)] for i in range(n))
        score = math.log(p) if p > 0 else -math.inf
        if score > best + 1e-9:
            best, arg = score, cand
    return arg


class TestConfig:
    """Realised sizes and validation."""

    def test_realized_size(self):
        assert realized_size(2, math.log(2)) == 4
        assert realized_size(3, 0.0) == 1
        assert realized_size(1, 0.5) == 2
        with pytest.raises(ValueError):
            realized_size(1, -0.1)

    def test_sizes_and_rates(self, rng):
        cfg = config_for(binary_source(rng), n=3, bins=(math.log(2), 0.5, 1.0), keys=(0.1, 0.3))
        assert [cfg.bin_size(t) for t in (1, 2, 3)] == [8, 5, 21]
        assert cfg.key_size(1) == 2
        rates = cfg.realized_rates()
        assert rates["bin"]["B1"] == pytest.approx(math.log(2))
        assert rates["key"]["B2"] == pytest.approx(math.log(3) / 3)

    def test_validation(self, rng):
        src = binary_source(rng)
        with pytest.raises(ValueError):
            config_for(src, n=0)
        with pytest.raises(ValueError):
            config_for(src, bins=(1.0, 1.0))
        with pytest.raises(ValueError):
            config_for(src, keys=(0.1,))
        with pytest.raises(ValueError):
            config_for(src, revealed=(1,))
        with pytest.raises(ValueError):
            config_for(GaussianModel(["A0", "A1"], np.eye(2)), bins=(1.0,), keys=(0.1,), key_terminals=(1,))

    def test_roundtrip(self, rng):
        cfg = config_for(binary_source(rng), master_seed=5, revealed=(3,))
        back = ProtocolConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert back.to_dict() == cfg.to_dict()
        assert np.allclose(back.pmf.probs, cfg.pmf.probs)

    def test_gaussian_pmf_labels(self):
        model = GaussianModel(["A0", "A1", "A2"], np.eye(3) + 0.5)
        cfg = config_for(model, bins=(1.0, 1.0), keys=(0.1,), key_terminals=(1,),
                         quantizer=Quantizer(1), pmf_samples=10_000)
        assert list(cfg.pmf.variables) == ["B0", "B1", "B2"]
        assert cfg.alphabet(2) == 3

    def test_domain_guard(self, rng):
        cfg = config_for(binary_source(rng), n=30)
        with pytest.raises(SizeGuardError):
            cfg.bin_family(1)


class TestSequences:
    """Index conversions."""

    def test_seq_index(self):
        assert seq_index([1, 0, 2], 3) == 11
        assert index_digits([11], 3, 3).tolist() == [[1, 0, 2]]

    def test_roundtrip(self):
        idx = np.arange(64)
        assert [seq_index(d, 4) for d in index_digits(idx, 4, 3)] == idx.tolist()


class TestEncoding:
    """Buckets and keys at the terminals."""

    def test_constant_hashes(self, rng):
        cfg = config_for(binary_source(rng))
        block = {t: np.array([1, 0]) for t in range(4)}
        tr = encode_all(cfg, block, constant_instances(cfg))
        assert tr.messages == {1: 1, 2: 1, 3: 1}
        assert tr.keys == {1: 1, 2: 1}

    def test_quantises_gaussian_input(self):
        model = GaussianModel(["A0", "A1", "A2", "A3"], np.eye(4))
        cfg = config_for(model, n=1, bins=(3.0, 3.0, 3.0), keys=(3.0, 3.0), quantizer=Quantizer(2))
        block = {0: np.array([0.0]), 1: np.array([0.3]), 2: np.array([-3.0]), 3: np.array([2.0])}
        tr = encode_all(cfg, block, identity_instances(cfg))
        assert tr.messages == {1: 6, 2: 1, 3: 9}
        assert tr.keys[1] == 6

    def test_deterministic(self, rng):
        cfg = config_for(binary_source(rng), master_seed=3)
        a, b = run_trial(cfg, 4), run_trial(cfg, 4)
        assert (a.messages, a.keys, a.estimates) == (b.messages, b.keys, b.estimates)

    def test_shape_mismatch(self, rng):
        cfg = config_for(binary_source(rng))
        with pytest.raises(ValueError):
            encode_all(cfg, {t: np.array([0, 1, 0]) for t in range(4)}, draw_instances(cfg, 0))

    def test_symbols_pass_through(self, rng):
        cfg = config_for(binary_source(rng))
        assert to_symbols(cfg, [1, 0]).tolist() == [1, 0]
        with pytest.raises(ValueError):
            to_symbols(cfg, np.array([0.5]))

    def test_revealed_sequence_published(self, rng):
        cfg = config_for(binary_source(rng), revealed=(3,))
        tr = encode_all(cfg, {t: np.array([t % 2, 1]) for t in range(4)}, draw_instances(cfg, 0))
        assert set(tr.messages) == {1, 2}
        assert tr.revealed[3].tolist() == [1, 1]


class TestDecoding:
    """Maximum-likelihood recovery at the base station."""

    def test_injective_recovers(self, rng):
        cfg = config_for(binary_source(rng), n=3)
        inst = identity_instances(cfg)
        for trial in range(20):
            block = {t: rng.integers(0, 2, 3) for t in range(4)}
            tr = encode_all(cfg, block, inst)
            dec = ml_decode(cfg, block[0], tr, inst)
            assert all(np.array_equal(dec[t], block[t]) for t in (1, 2, 3))

    def test_deterministic_channel(self):
        table = np.zeros((2, 2, 2, 2))
        for b0, b2, b3 in itertools.product(range(2), repeat=3):
            table[b0, b0, b2, b3] = 1 / 8
        cfg = config_for(JointPmf(["B0", "B1", "B2", "B3"], table), n=3)
        inst = constant_instances(cfg)
        b0 = np.array([1, 0, 1])
        tr = Transcript({1: 1, 2: 1, 3: 1}, {}, {})
        assert ml_decode(cfg, b0, tr, inst)[1].tolist() == [1, 0, 1]

    def test_brute_force_oracle(self, rng):
        for seed in range(10):
            cfg = config_for(binary_source(np.random.default_rng(seed), alpha=0.5), n=2,
                             bins=(0.4, 0.4, 0.4), master_seed=seed)
            inst = draw_instances(cfg, 0)
            block = {t: rng.integers(0, 2, 2) for t in range(4)}
            tr = encode_all(cfg, block, inst)
            try:
                dec = ml_decode(cfg, block[0], tr, inst)
            except DecodeError:
                assert brute_force_decode(cfg, block[0], tr, inst) is None
                continue
            oracle = brute_force_decode(cfg, block[0], tr, inst)
            assert tuple(tuple(dec[t]) for t in (1, 2, 3)) == oracle

    def test_guard(self, rng):
        cfg = config_for(binary_source(rng), n=4)
        inst = constant_instances(cfg)
        tr = Transcript({1: 1, 2: 1, 3: 1}, {}, {})
        with pytest.raises(SizeGuardError):
            ml_decode(cfg, np.zeros(4, np.int64), tr, inst, guard=100)

    def test_empty_bucket(self, rng):
        cfg = config_for(binary_source(rng))
        with pytest.raises(DecodeError):
            ml_decode(cfg, np.zeros(2, np.int64), Transcript({1: 2, 2: 1, 3: 1}, {}, {}),
                      constant_instances(cfg))

    def test_correct_decode_gives_equal_keys(self):
        cfg = config_for(correlated_binary(0.1), n=3, bins=(0.5, 0.5, 0.5), master_seed=2)
        hits = 0
        for trial in range(40):
            tr = run_trial(cfg, trial)
            block = sample_source(cfg, rng_for(derive_seed(2, trial, "source")))
            if all(np.array_equal(tr.decoded[t], block[t]) for t in cfg.key_terminals):
                hits += 1
                assert not any(tr.disagreements().values())
        assert hits > 0


class TestSimulation:
    """Batches of trials."""

    def test_injective_zero_errors(self):
        cfg = config_for(correlated_binary(0.2), n=2, bins=(3.0, 3.0, 3.0), bin_kind="modular_multiply")
        rep = simulate_trials(cfg, 50)
        assert rep.agreement_error == 0.0

    def test_starved_rates_fail(self):
        src = product(uniform(["B0"], [2]), uniform(["B1", "B2", "B3"], [2, 2, 2]))
        cfg = config_for(src, n=6, bins=(0.0, 0.0, 0.0), keys=(math.log(8) / 6, math.log(8) / 6))
        rep = simulate_trials(cfg, 200)
        assert rep.agreement_error > 0.8

    def test_thread_invariant(self):
        cfg = config_for(correlated_binary(0.1), n=3, bins=(0.4, 0.4, 0.4), master_seed=11)
        a = simulate_trials(cfg, 60, threads=1)
        b = simulate_trials(cfg, 60, threads=4)
        assert a.to_dict() == b.to_dict()

    def test_report_json(self):
        cfg = config_for(correlated_binary(0.1), n=2)
        doc = json.loads(simulate_trials(cfg, 10).to_json())
        assert set(doc) >= {"config", "realized_rates", "trials", "agreement_error", "errors"}
        low, high = doc["errors"]["K1"]["ci"]
        assert 0.0 <= low <= doc["errors"]["K1"]["estimate"] <= high <= 1.0

    def test_bad_trials(self):
        with pytest.raises(ValueError):
            simulate_trials(config_for(correlated_binary(), n=1), 0)


class TestCellular:
    """Revealing helpers."""

    def test_singleton(self):
        cfg = config_for(correlated_binary(0.1), n=3, bins=(0.5, 0.5, 0.5), master_seed=1)
        rep = cellular_simulate(cfg, [1], 40)
        assert set(rep.errors) == {1}
        assert rep.config.revealed == (2, 3)

    def test_matches_injective_helper_bucket(self):
        # a helper hashed injectively tells the decoder as much as a revealed one
        cfg = config_for(correlated_binary(0.15), n=2, bins=(0.3, 0.3, math.log(17) / 2),
                         bin_kind="modular_multiply", master_seed=4)
        assert cfg.bin_size(3) >= 17
        full = [run_trial(cfg, i).disagreements() for i in range(60)]
        cell = cfg.with_changes(revealed=(3,))
        shown = [run_trial(cell, i).disagreements() for i in range(60)]
        assert full == shown

    def test_revealing_never_hurts(self):
        cfg = config_for(correlated_binary(0.15), n=4, bins=(0.4, 0.4, 0.2), master_seed=6)
        hashed = simulate_trials(cfg, 300)
        shown = cellular_simulate(cfg, [1, 2], 300)
        assert shown.agreement_error <= hashed.agreement_error

    def test_missing_key_rate(self):
        with pytest.raises(ValueError):
            cellular_simulate(config_for(correlated_binary(), n=1), [3], 5)


class TestLeakage:
    """Exact secrecy divergences on small discrete sources."""

    def test_uniform_independent_zero(self):
        src = product(uniform(["B0"], [2]), uniform(["B1", "B2", "B3"], [2, 2, 2]))
        cfg = config_for(src, n=1, bins=(0.0, 0.0, 0.0), keys=(math.log(2), math.log(2)))
        cond, weight = _grouped(cfg, 1)
        d, _ = leakage_of(cond, weight, np.zeros(2, np.int64), np.array([0, 1]), 1, 2)
        assert d == pytest.approx(0.0, abs=1e-15)

    def test_constant_key(self, rng):
        cfg = config_for(binary_source(rng), n=2, keys=(math.log(3) / 2, 0.1))
        cond, weight = _grouped(cfg, 1)
        d, sur = leakage_of(cond, weight, np.zeros(4, np.int64), np.zeros(4, np.int64), cfg.bin_size(1), 3)
        assert d == pytest.approx(math.log(3), abs=1e-12)
        assert sur >= d

    def test_surrogate_dominates(self, rng):
        cfg = config_for(binary_source(rng), n=2, bins=(0.4, 0.4, 0.4), keys=(0.3, 0.3))
        cond, weight = _grouped(cfg, 2)
        for _ in range(50):
            bt = rng.integers(0, cfg.bin_size(2), 4)
            kt = rng.integers(0, cfg.key_size(2), 4)
            d, sur = leakage_of(cond, weight, bt, kt, cfg.bin_size(2), cfg.key_size(2))
            assert d >= 0 and sur >= d - 1e-12

    def test_matches_direct_divergence(self, rng):
        # independent route: build P(K, M, E) and take the divergence to U_K x P(M, E)
        cfg = config_for(binary_source(rng), n=2, bins=(0.4, 0.4, 0.4), keys=(0.3, 0.3))
        from multikey.info_measures import iid_extension, reorder

        pair = reorder(cfg.pmf, ["B1", "B2", "B3"])
        block = iid_extension(pair, 2).probs.reshape(4, -1)
        bt, kt = rng.integers(0, 2, 4), rng.integers(0, 2, 4)
        joint = np.zeros((2, 2, block.shape[1]))
        for x in range(4):
            joint[kt[x], bt[x]] += block[x]
        pme = joint.sum(axis=0)
        mask = joint > 0
        ref = np.sum(joint[mask] * np.log((joint / (0.5 * pme[None]))[mask]))
        cond, weight = _grouped(cfg, 1)
        assert leakage_of(cond, weight, bt, kt, 2, 2)[0] == pytest.approx(ref, abs=1e-12)

    def test_ensemble_mode(self, rng):
        cfg = config_for(binary_source(rng), n=1, bins=(0.5, 0.5, 0.5), keys=(0.5, 0.5))
        res = exact_leakage(cfg)
        assert res[1].exact_ensemble and res[1].instances == 16
        sampled = exact_leakage(cfg, budget=50, ensemble_guard=1)
        assert not sampled[1].exact_ensemble and sampled[1].instances == 50
        assert all(r.mean >= 0 for r in res.values())

    def test_gaussian_rejected(self):
        model = GaussianModel(["A0", "A1", "A2", "A3"], np.eye(4))
        cfg = config_for(model, n=1, quantizer=Quantizer(1), pmf_samples=1000)
        with pytest.raises(TypeError):
            exact_leakage(cfg)


def _grouped(cfg, t):
    from multikey.protocol import _grouped_source

    return _grouped_source(cfg, t)


class TestExponents:
    """Error and secrecy exponent bounds."""

    def test_error_clamped(self, rng):
        src = binary_source(rng)
        assert error_exponent_bound(src, (0.0, 0.0, 0.0)).exponent == 0.0

    def test_error_uniform_analytic(self):
        src = product(uniform(["B0"], [2]), uniform(["B1", "B2", "B3"], [2, 2, 2]))
        res = error_exponent_bound(src, (1.5 * math.log(2),) * 3)
        # each subset peaks at s = 1 with value |S| log(2) / 2
        assert res.exponent == pytest.approx(0.5 * math.log(2), abs=1e-9)
        assert res.per_subset[(1, 2, 3)] == pytest.approx(1.5 * math.log(2), abs=1e-9)
        assert res.prefactor == 7

    def test_error_finer_grid(self, rng):
        src = binary_source(rng)
        coarse = error_exponent_bound(src, (0.6, 0.6, 0.6), step=1e-2).exponent
        fine = error_exponent_bound(src, (0.6, 0.6, 0.6), step=1e-4).exponent
        assert abs(coarse - fine) < 1e-4

    def test_error_rate_count(self, rng):
        with pytest.raises(ValueError):
            error_exponent_bound(binary_source(rng), (0.1, 0.1))

    def test_secrecy_clamped(self, rng):
        src = binary_source(rng)
        out = secrecy_exponent_bounds(src, (0.4, 0.4), (0.4, 0.4, 0.4))
        assert out == {1: 0.0, 2: 0.0}

    def test_secrecy_uniform(self):
        src = product(uniform(["B0"], [2]), uniform(["B1", "B2", "B3"], [2, 2, 2]))
        out = secrecy_exponent_bounds(src, (0.1, 0.2), (0.1, 0.1, 0.1))
        assert out[1] == pytest.approx(math.log(2) - 0.2, abs=1e-9)
        assert out[2] == pytest.approx(math.log(2) - 0.3, abs=1e-9)

    def test_secrecy_matches_delegate(self, rng):
        src = binary_source(rng)
        out = secrecy_exponent_bounds(src, (0.05, 0.05), (0.05, 0.05, 0.05))
        direct = secrecy_exponent(src, [0.1], 0.0, eve=["B2", "B3"], terminals=["B1"])
        assert out[1] == pytest.approx(direct, abs=1e-12)

    def test_surrogate_exponents_positive(self):
        cfg = config_for(quaternary_surrogate(), n=1, bins=(1.05, 1.05, 1.05), keys=(0.1, 0.1))
        rep = exponent_report(cfg)
        assert rep["error_exponent"] > 0
        assert all(v > 0 for v in rep["secrecy_exponents"].values())

    def test_revealed_folded_into_base(self):
        cfg = config_for(correlated_binary(0.1), n=1, revealed=(3,))
        rep = exponent_report(cfg)
        assert set(rep["error_per_subset"]) == {"1", "2", "1,2"}


class TestSurrogate:
    """The quaternary stand-in source."""

    def test_normalised_and_markov(self):
        from multikey.info_measures import mutual_information

        src = quaternary_surrogate()
        assert src.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert mutual_information(src, "B1", "B2", "B3") == pytest.approx(0.0, abs=1e-12)
        assert tuple(src.alphabet_sizes) == (64, 4, 4, 4)
