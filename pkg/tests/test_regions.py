from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import markov_cov, random_cov
from multikey.info_measures import GaussianModel, gaussian_cond_mi
from multikey.quantization import Quantizer, key_entropies, standard_model
from multikey.regions import (
    SCHEME_VARIABLES,
    InfeasibleError,
    Inequality,
    LinearInequalitySystem,
    RateRegion,
    achievable_system,
    closed_form_key_region,
    completion_interval,
    contains,
    fme_eliminate,
    has_completion,
    inequality,
    is_capacity,
    project_to_keys,
    prune,
    region_cellular,
    region_mp,
    vertices_2d,
)

LABELS = ["H(B1|A2,A3)", "H(B2|A1,A3)", "H(B1|B0,B2,B3)", "H(B2|B0,B1,B3)", "H(B3|B0,B1,B2)",
          "H(B1,B2|B0,B3)", "H(B1,B3|B0,B2)", "H(B2,B3|B0,B1)", "H(B1,B2,B3|B0)"]


def symmetric_oracle(g, h):
    return {k: (g if "A" in k else h) for k in LABELS}


def random_oracle(rng):
    return {k: Fraction(int(rng.integers(1, 400)), int(rng.integers(1, 60))) for k in LABELS}


def random_system(rng, nvars=5, rows=8):
    coeffs = rng.integers(-3, 4, size=(rows, nvars))
    consts = rng.integers(-5, 15, size=rows)
    variables = [f"x{i}" for i in range(nvars)]
    ineqs = [Inequality(tuple(int(c) for c in row), int(b)) for row, b in zip(coeffs, consts)]
    return LinearInequalitySystem(variables, ineqs)


def gaussian(cov):
    return GaussianModel(["A0", "A1", "A2", "A3"], cov)


class TestInequalities:
    """Construction, normalisation and serialisation."""

    def test_ge_is_negated(self):
        q = inequality([1, 2], 3, ">=")
        assert q == Inequality((-1, -2), -3)

    def test_bad_relation(self):
        with pytest.raises(ValueError):
            inequality([1], 0, "<")

    def test_exact_normalisation(self):
        q = Inequality((3, 6), 4).normalized()
        assert q.coeffs == (1, 2) and q.const == Fraction(4, 3)
        assert isinstance(q.const, Fraction)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            LinearInequalitySystem(["x", "y"], [Inequality((1,), 0)])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            LinearInequalitySystem(["x"], [Inequality((1,), math.inf)])

    def test_json_roundtrip(self):
        sys_ = LinearInequalitySystem(["R1", "R2"], [Inequality((1.0, 1.0), 0.5), Inequality((-1.0, 0.0), 0.0)])
        doc = json.loads(sys_.to_json())
        assert doc["inequalities"][0] == {"coeffs": [1.0, 1.0], "rel": "<=", "const": 0.5}
        back = LinearInequalitySystem.from_dict(doc)
        assert back.canonical() == sys_.canonical()

    def test_describe(self):
        sys_ = LinearInequalitySystem(["R1", "R2"], [Inequality((1, 1), Fraction(1, 2)), Inequality((0, -1), 0)])
        assert sys_.describe() == ["R1 + R2 <= 0.5", "R2 >= 0"]

    def test_prune(self):
        rows = [Inequality((2, 0), 4), Inequality((1, 0), 3), Inequality((0, 0), 1), Inequality((1, 0), 2)]
        assert prune(rows) == [Inequality((1, 0), 2)]

    def test_prune_keeps_contradiction(self):
        out = prune([Inequality((0, 0), -1), Inequality((1, 0), 2)])
        assert out[0] == Inequality((0, 0), -1)


class TestFourierMotzkin:
    """Projection by variable elimination."""

    def test_hand_example(self):
        sys_ = LinearInequalitySystem(["x", "y"], [inequality([0, 1], 1, ">="), inequality([1, 1], 3)])
        out = fme_eliminate(sys_, "y")
        assert out.variables == ("x",)
        assert out.inequalities == [Inequality((1,), 2)]

    def test_one_sided_variable_vanishes(self):
        sys_ = LinearInequalitySystem(["x", "y"], [inequality([0, 1], 1, ">="), inequality([1, 1], 3, ">=")])
        assert len(fme_eliminate(sys_, "y")) == 0

    def test_unknown_variable(self):
        with pytest.raises(KeyError):
            fme_eliminate(LinearInequalitySystem(["x"], []), "y")

    def test_infeasibility_surfaces(self):
        sys_ = LinearInequalitySystem(["x"], [inequality([1], 0), inequality([1], 1, ">=")])
        assert fme_eliminate(sys_, "x").is_infeasible()

    def test_rational_mode_preserved(self, rng):
        sys_ = random_system(rng)
        assert fme_eliminate(sys_, "x0").exact

    def test_completion_interval(self):
        sys_ = LinearInequalitySystem(["x", "y"], [inequality([0, 1], 1, ">="), inequality([1, 1], 3)])
        assert completion_interval(sys_, "y", {"x": 1}) == (1, 2)
        assert not has_completion(sys_, "y", {"x": 3})

    def test_soundness_against_completion(self, rng):
        for _ in range(100):
            sys_ = random_system(rng)
            var = "x" + str(rng.integers(0, 5))
            proj = fme_eliminate(sys_, var)
            for _ in range(100):
                point = {v: Fraction(int(rng.integers(-12, 13)), 2) for v in proj.variables}
                inside, _ = proj.contains([point[v] for v in proj.variables], tol=0)
                assert inside == has_completion(sys_, var, point)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 4))
    def test_order_independent(self, seed, nvars):
        rng = np.random.default_rng(seed)
        sys_ = random_system(rng, nvars=nvars, rows=6)
        a = fme_eliminate(fme_eliminate(sys_, "x0"), "x1")
        b = fme_eliminate(fme_eliminate(sys_, "x1"), "x0")
        point_rng = np.random.default_rng(seed + 1)
        for _ in range(30):
            pt = [Fraction(int(point_rng.integers(-10, 11)), 3) for _ in a.variables]
            assert a.contains(pt, tol=0)[0] == b.contains(pt, tol=0)[0]


class TestAchievableSystem:
    """The binning and hashing rate conditions."""

    def test_symmetric_zero_delta(self):
        sys_ = achievable_system(symmetric_oracle(Fraction(2), Fraction(2)), delta=0)
        assert sys_.variables == SCHEME_VARIABLES
        assert len(sys_) == 9
        assert {abs(q.const) for q in sys_.inequalities} == {2}

    def test_delta_shift(self):
        oracle = symmetric_oracle(Fraction(3), Fraction(1))
        base = achievable_system(oracle, delta=0)
        shifted = achievable_system(oracle, delta=Fraction(1, 10))
        for a, b in zip(base.inequalities, shifted.inequalities):
            assert a.coeffs == b.coeffs
            assert b.const - a.const == -Fraction(1, 10)

    def test_missing_entry(self):
        oracle = symmetric_oracle(1, 1)
        del oracle["H(B1,B3|B0,B2)"]
        with pytest.raises(KeyError):
            achievable_system(oracle)

    def test_negative_delta(self):
        with pytest.raises(ValueError):
            achievable_system(symmetric_oracle(1, 1), delta=-0.1)

    def test_constants_from_quantised_model(self):
        ent = key_entropies(standard_model(), Quantizer(1), samples=20_000)
        oracle = {k: v.value for k, v in ent.items()}
        sys_ = achievable_system(oracle, delta=0.01)
        consts = sorted(q.const for q in sys_.inequalities)
        expected = sorted([-(oracle[k] + 0.01) for k in LABELS[2:]]
                          + [oracle["H(B1|A2,A3)"] - 0.01, oracle["H(B2|A1,A3)"] - 0.01])
        assert consts == pytest.approx(expected, abs=1e-15)


class TestProjection:
    """Key-rate region after eliminating the public rates."""

    def test_symmetric_by_hand(self):
        g, h, d = Fraction(5), Fraction(2), Fraction(1, 100)
        region = project_to_keys(achievable_system(symmetric_oracle(g, h), d))
        assert region.canonical() == frozenset({
            ((1, 0), g - h - 2 * d), ((0, 1), g - h - 2 * d), ((1, 1), 2 * g - h - 3 * d)})

    def test_random_instances_match_closed_form(self, rng):
        for _ in range(10):
            oracle = random_oracle(rng)
            d = Fraction(1, int(rng.integers(10, 1000)))
            region = dict(project_to_keys(achievable_system(oracle, d)).canonical())
            closed = dict(closed_form_key_region(oracle, d, sum_margin=3).canonical())
            # inconsistent oracles can only tighten the closed-form rows
            assert set(region) == set(closed)
            assert all(region[k] <= closed[k] for k in closed)

    def test_consistent_instances_exact(self, rng):
        # subadditive conditional entropies make the Slepian-Wolf rows consistent
        for _ in range(10):
            h1, h2, h3 = (Fraction(int(rng.integers(1, 50)), 10) for _ in range(3))
            oracle = {
                "H(B1|A2,A3)": h1 + Fraction(int(rng.integers(10, 40)), 10),
                "H(B2|A1,A3)": h2 + Fraction(int(rng.integers(10, 40)), 10),
                "H(B1|B0,B2,B3)": h1, "H(B2|B0,B1,B3)": h2, "H(B3|B0,B1,B2)": h3,
                "H(B1,B2|B0,B3)": h1 + h2, "H(B1,B3|B0,B2)": h1 + h3,
                "H(B2,B3|B0,B1)": h2 + h3, "H(B1,B2,B3|B0)": h1 + h2 + h3,
            }
            d = Fraction(1, 1000)
            region = project_to_keys(achievable_system(oracle, d))
            assert region.canonical() == closed_form_key_region(oracle, d, sum_margin=3).canonical()

    def test_delta_to_zero(self):
        oracle = symmetric_oracle(Fraction(5), Fraction(2))
        base = dict(project_to_keys(achievable_system(oracle, 0)).canonical())
        for d in (Fraction(1, 10), Fraction(1, 1000), Fraction(1, 10**6)):
            small = dict(project_to_keys(achievable_system(oracle, d)).canonical())
            assert max(abs(small[k] - base[k]) for k in base) <= 3 * d

    def test_no_duplicates(self, rng):
        region = project_to_keys(achievable_system(random_oracle(rng), Fraction(1, 100)))
        assert len(region.canonical()) == len(region)

    def test_infeasible(self):
        rows = [inequality([0, 0, 0, 0, 1], 0), inequality([0, 0, 0, 0, 1], 1, ">=")]
        with pytest.raises(InfeasibleError):
            project_to_keys(LinearInequalitySystem(SCHEME_VARIABLES, rows))


class TestModelRegions:
    """Regions computed from source models."""

    def test_independent_base(self):
        region = region_mp(gaussian(np.eye(4)))
        assert [q.const for q in region.inequalities] == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)

    def test_sum_model_log_det(self):
        load = np.array([[1, 1, 1, 1.0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]])
        cov = load @ load.T  # A0 = A1 + A2 + A3 + N
        region = region_mp(gaussian(cov))
        consts = [q.const for q in region.inequalities]
        assert consts == pytest.approx([0.5 * math.log(2), 0.5 * math.log(2), 0.5 * math.log(3)], abs=1e-12)

    def test_markov_sum_bound(self, rng):
        model = gaussian(markov_cov(rng))
        assert is_capacity(model)
        sum_row = region_mp(model).inequalities[2]
        assert sum_row.const == pytest.approx(gaussian_cond_mi(model, ["A0"], ["A1", "A2"], ["A3"]), abs=1e-12)

    def test_not_capacity(self, rng):
        assert not is_capacity(gaussian(random_cov(rng)))

    def test_missing_variable(self):
        with pytest.raises(ValueError):
            region_mp(GaussianModel(["A0", "A1", "A2"], np.eye(3)))

    def test_downward_closed(self, rng):
        region = region_mp(gaussian(markov_cov(rng)))
        for _ in range(200):
            p = rng.uniform(0, 1, 2)
            if contains(region, p)[0]:
                assert contains(region, p * rng.uniform(0, 1, 2))[0]


def cellular_model(cov):
    return GaussianModel([f"A{i}" for i in range(len(cov))], cov)


class TestCellular:
    """Inner and outer bounds for the cellular setting."""

    def test_singleton_coincide(self, rng):
        model = cellular_model(random_cov(rng, k=5))
        inner, outer = region_cellular(model, [2], "inner"), region_cellular(model, [2], "outer")
        expected = gaussian_cond_mi(model, ["A2"], ["A0"], ["A1", "A3", "A4"])
        assert inner.inequalities[0].const == pytest.approx(expected, abs=1e-12)
        assert outer.inequalities[0].const == pytest.approx(expected, abs=1e-12)

    def test_independent_terminals(self, rng):
        load = np.eye(5)
        load[0, 1:] = rng.normal(size=4)
        model = cellular_model(load @ load.T)
        inner = [q.const for q in region_cellular(model, [1, 2, 3], "inner").inequalities]
        outer = [q.const for q in region_cellular(model, [1, 2, 3], "outer").inequalities]
        assert inner == pytest.approx(outer, abs=1e-12)

    def test_inner_within_outer(self, rng):
        for _ in range(10):
            model = cellular_model(random_cov(rng, k=5))
            inner, outer = region_cellular(model, [1, 2], "inner"), region_cellular(model, [1, 2], "outer")
            for p in rng.uniform(0, 2, size=(200, 2)):
                if contains(inner, p)[0]:
                    assert contains(outer, p)[0]

    def test_specialises_helper_region(self, rng):
        for _ in range(5):
            model = gaussian(random_cov(rng))
            inner = region_cellular(model, [1, 2], "inner")
            assert [q.const for q in inner.inequalities] == pytest.approx(
                [q.const for q in region_mp(model).inequalities], abs=1e-10)
            markov = gaussian(markov_cov(rng))
            outer = region_cellular(markov, [1, 2], "outer")
            assert [q.const for q in outer.inequalities] == pytest.approx(
                [q.const for q in region_mp(markov).inequalities], abs=1e-10)

    def test_bad_subset(self, rng):
        model = cellular_model(random_cov(rng, k=4))
        with pytest.raises(ValueError):
            region_cellular(model, [4])
        with pytest.raises(ValueError):
            region_cellular(model, [])
        with pytest.raises(ValueError):
            region_cellular(model, [1], side="middle")


class TestContainsAndVertices:
    """Membership with slacks and 2-D corners."""

    def square(self):
        return RateRegion(["R1", "R2"], [Inequality((1, 0), 1.0), Inequality((0, 1), 1.0),
                                         Inequality((1, 1), 1.5)])

    def test_origin(self):
        assert contains(self.square(), (0, 0))[0]

    def test_violation(self):
        inside, slacks = contains(self.square(), (1.2, 0.0))
        assert not inside
        assert slacks[0] == pytest.approx(-0.2)
        assert slacks[1] > 0

    def test_boundary(self):
        inside, slacks = contains(self.square(), (1.0, 0.5))
        assert inside
        assert min(abs(s) for s in slacks) <= 1e-12

    def test_dimension(self):
        with pytest.raises(ValueError):
            contains(self.square(), (1.0,))

    def test_vertices(self):
        pts = vertices_2d(self.square())
        assert sorted(pts) == sorted([(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 1.0)])

    def test_vertices_need_two_dims(self):
        with pytest.raises(ValueError):
            vertices_2d(RateRegion(["R1"], [Inequality((1,), 1.0)]))
