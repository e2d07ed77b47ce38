"""Uniform scalar quantisation of Gaussian sources and entropy estimates.

The quantiser with level ``q`` has interval ``delta = 1/q`` and alphabet
``{0, 1, ..., 2 q^2}``: symbol ``b >= 1`` is the cell
``((b - 1) delta - q, b delta - q]`` and symbol ``0`` collects everything
outside ``(-q, q]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from .hashing import derive_seed, rng_for
from .info_measures import (
    DomainError,
    GaussianModel,
    JointPmf,
    MAX_CELLS,
    SizeGuardError,
    gaussian_cond_mi,
)

def _standard_covariance() -> np.ndarray:
    # A3 ~ N(0,1); A1 = .6 A3 + .8 Z1; A2 = .5 A3 + sqrt(.75) Z2;
    # A0 = .5 A1 + .5 A2 + .2 A3 + .5 Z0
    a3 = np.array([0, 0, 0, 1.0])
    a1 = 0.6 * a3 + np.array([0, 0.8, 0, 0])
    a2 = 0.5 * a3 + np.array([0, 0, math.sqrt(0.75), 0])
    # noise coordinates: (Z0, Z1, Z2, A3)
    a0 = 0.5 * a1 + 0.5 * a2 + 0.2 * a3 + np.array([0.5, 0, 0, 0])
    loadings = np.stack([a0, a1, a2, a3])
    return loadings @ loadings.T


#: Test covariance over (A0, A1, A2, A3) used by the convergence checks.
#: A3 drives A1 and A2 (so A1 - A3 - A2 is Markov) and A0 mixes all three.
STANDARD_COVARIANCE = _standard_covariance()


def standard_model() -> GaussianModel:
    return GaussianModel(["A0", "A1", "A2", "A3"], STANDARD_COVARIANCE)


@dataclass(frozen=True)
class Quantizer:
    """Scalar quantiser ``g_q`` with interval ``1/q`` on ``(-q, q]``."""

    q: int

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"quantisation level must be a positive integer, got {self.q}")

    @property
    def delta(self) -> Fraction:
        return Fraction(1, self.q)

    @property
    def alphabet_size(self) -> int:
        return 2 * self.q**2 + 1

    def edges(self) -> np.ndarray:
        """Cell boundaries ``-q, -q + delta, ..., q`` (length ``2 q^2 + 1``)."""
        return -self.q + np.arange(2 * self.q**2 + 1) / self.q

    def __call__(self, a):
        return quantize(self, a)


def quantize_scalar(quantizer: Quantizer, a: float) -> int:
    """``g_q(a)``: 0 outside ``(-q, q]``, else ``ceil(q (q + a))``.

    Evaluated in rational arithmetic on the exact value of ``a``, so points on
    a cell edge always land in the cell whose right end they are.
    """
    a = float(a)
    if math.isnan(a):
        raise ValueError("cannot quantise NaN")
    q = quantizer.q
    if a <= -q or a > q:
        return 0
    return int(math.ceil(q * (q + Fraction(a))))


def _at_or_below_edge(a: np.ndarray, k: np.ndarray, q: int) -> np.ndarray:
    """Exact test of ``a <= k / q - q`` for float ``a`` and integer ``k``."""
    a, k = np.broadcast_arrays(a, k)
    flat_a, flat_k = a.ravel(), k.ravel()
    edge = (flat_k - q * q) / q  # correctly rounded
    out = flat_a < edge
    for i in np.flatnonzero(flat_a == edge):
        out[i] = Fraction(float(flat_a[i])) <= Fraction(int(flat_k[i]) - q * q, q)
    return out.reshape(a.shape)


def quantize(quantizer: Quantizer, a) -> np.ndarray:
    """Vectorised :func:`quantize_scalar`."""
    a = np.asarray(a, dtype=float)
    if np.any(np.isnan(a)):
        raise ValueError("cannot quantise NaN")
    q = quantizer.q
    inside = (a > -q) & (a <= q)
    b = np.clip(np.ceil(q * (q + a)), 1, 2 * q * q).astype(np.int64)
    # the float candidate is off by at most one cell
    b = np.where(inside & _at_or_below_edge(a, b - 1, q), b - 1, b)
    b = np.where(inside & ~_at_or_below_edge(a, b, q), b + 1, b)
    return np.where(inside, b, 0).astype(np.int64)


def cell_probabilities(quantizer: Quantizer, mean, std) -> np.ndarray:
    """Probability of every symbol for ``N(mean, std^2)`` inputs.

    ``mean`` may be an array; the symbol axis is appended last.
    """
    mean = np.asarray(mean, dtype=float)[..., None]
    if np.any(np.asarray(std) <= 0):
        raise DomainError("degenerate conditional variance")
    edges = quantizer.edges()
    cdf = ndtr((edges - mean) / std)
    inner = np.diff(cdf, axis=-1)
    outside = cdf[..., :1] + (1.0 - cdf[..., -1:])
    return np.concatenate([outside, inner], axis=-1)


def induced_pmf(model: GaussianModel, quantizer: Quantizer, variables=None,
                samples: int = 200_000, seed: int = 0) -> JointPmf:
    """Distribution of the quantised variables.

    A single variable is computed exactly from CDF differences.  For several
    variables all but the last are sampled and the last is integrated exactly
    through its conditional Gaussian CDF, so every sample contributes a whole
    conditional row and the table sums to one.
    """
    variables = list(model.variables if variables is None else variables)
    size = quantizer.alphabet_size
    cells = size ** len(variables)
    if cells > MAX_CELLS:
        raise SizeGuardError(f"{cells} cells exceeds guard {MAX_CELLS}")
    last, outer = variables[-1], variables[:-1]
    if not outer:
        std = math.sqrt(model.block([last])[0, 0])
        return JointPmf(variables, cell_probabilities(quantizer, 0.0, std))
    coef, cov = model.conditional([last], outer)
    std = math.sqrt(cov[0, 0])
    sub = GaussianModel(outer, model.block(outer))
    rng = rng_for(derive_seed(seed, "induced"))
    table = np.zeros((size ** len(outer), size))
    chunk = 100_000
    for start in range(0, int(samples), chunk):
        k = min(chunk, int(samples) - start)
        x = sub.sample(k, rng)
        rows = quantize(quantizer, x)
        flat = np.ravel_multi_index(tuple(rows.T), (size,) * len(outer))
        probs = cell_probabilities(quantizer, x @ coef[0], std)
        np.add.at(table, flat, probs)
    table /= table.sum()
    return JointPmf(variables, table.reshape((size,) * len(variables)))


class Estimate(NamedTuple):
    value: float
    stderr: float


def _entropy_rows(probs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.sum(np.where(probs > 0, probs * np.log(probs), 0.0), axis=-1)


def mixed_cond_entropy(model: GaussianModel, quantizer: Quantizer, target: str, given=(),
                       samples: int = 200_000, seed: int = 0) -> Estimate:
    """``H(g_q(A_target) | A_given)`` with continuous conditioners.

    Conditioners are sampled; the inner entropy of the quantised target under
    its conditional Gaussian law is exact.
    """
    given = list(given)
    if not given:
        std = math.sqrt(model.block([target])[0, 0])
        return Estimate(float(_entropy_rows(cell_probabilities(quantizer, 0.0, std))), 0.0)
    coef, cov = model.conditional([target], given)
    if cov[0, 0] <= 0:
        raise DomainError("degenerate conditional variance")
    std = math.sqrt(cov[0, 0])
    sub = GaussianModel(given, model.block(given))
    rng = rng_for(derive_seed(seed, "mixed", target, *given))
    total = total_sq = 0.0
    chunk = 100_000
    for start in range(0, int(samples), chunk):
        k = min(chunk, int(samples) - start)
        h = _entropy_rows(cell_probabilities(quantizer, sub.sample(k, rng) @ coef[0], std))
        total += h.sum()
        total_sq += np.square(h).sum()
    n = int(samples)
    mean = total / n
    var = max(total_sq / n - mean**2, 0.0)
    return Estimate(float(mean), math.sqrt(var / max(n - 1, 1)))


def _pack(symbols: np.ndarray, cols) -> np.ndarray:
    key = np.zeros(symbols.shape[0], dtype=np.int64)
    for c in cols:
        key = key * (int(symbols[:, c].max()) + 1) + symbols[:, c]
    return key


def plugin_cond_entropy(symbols: np.ndarray, target_cols, given_cols) -> Estimate:
    """Miller-Madow corrected plug-in ``H(target | given)`` from sample rows.

    Computed as ``H(target, given) - H(given)``, each term corrected by
    ``(K - 1) / (2 N)`` with ``K`` the number of occupied cells.  The standard
    error is that of ``-log p_hat(target | given)`` across samples.
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    n = symbols.shape[0]
    _, joint_idx, joint_counts = np.unique(
        _pack(symbols, list(given_cols) + list(target_cols)),
        return_inverse=True, return_counts=True)
    logc = np.log(joint_counts[joint_idx])
    if given_cols:
        _, given_idx, given_counts = np.unique(
            _pack(symbols, given_cols), return_inverse=True, return_counts=True)
        logc = logc - np.log(given_counts[given_idx])
        k_given = len(given_counts)
    else:
        logc = logc - math.log(n)
        k_given = 1
    plug = -float(np.mean(logc))
    corrected = plug + (len(joint_counts) - k_given) / (2 * n)
    return Estimate(corrected, float(np.std(logc, ddof=1) / math.sqrt(n)))


def analytic_limits(model: GaussianModel) -> dict:
    """Small-interval limits of the three key-rate entropy differences."""
    mi = gaussian_cond_mi
    return {
        "H(B1|A2,A3)-H(B1|B0,B2,B3)": mi(model, ["A0"], ["A1"], ["A2", "A3"]),
        "H(B2|A1,A3)-H(B2|B0,B1,B3)": mi(model, ["A0"], ["A2"], ["A1", "A3"]),
        "H(B1|A2,A3)+H(B2|A1,A3)-H(B1,B2|B0,B3)": (
            mi(model, ["A0"], ["A1", "A2"], ["A3"]) - mi(model, ["A1"], ["A2"], ["A3"])),
    }


def key_entropies(model: GaussianModel, quantizer: Quantizer, samples: int = 1_000_000,
                  seed: int = 0, subsets=None) -> dict:
    """Entropy terms of the quantised four-terminal scheme.

    Returns a dict with :class:`Estimate` values under the keys
    ``"H(B1|A2,A3)"``, ``"H(B2|A1,A3)"`` and ``"H(B_S|B_Sc,B0)"`` entries for
    every non-empty ``S`` of ``{1, 2, 3}`` (or only ``subsets``) written as
    e.g. ``"H(B1,B3|B0,B2)"``.
    """
    if subsets is None:
        subsets = [c for r in (1, 2, 3) for c in itertools.combinations((1, 2, 3), r)]
    out = {
        "H(B1|A2,A3)": mixed_cond_entropy(model, quantizer, "A1", ["A2", "A3"], samples, seed),
        "H(B2|A1,A3)": mixed_cond_entropy(model, quantizer, "A2", ["A1", "A3"], samples, seed),
    }
    rng = rng_for(derive_seed(seed, "plugin"))
    order = ["A0", "A1", "A2", "A3"]
    idx = model.index(order)
    sub = GaussianModel(order, model.covariance[np.ix_(idx, idx)])
    symbols = quantize(quantizer, sub.sample(samples, rng))
    for subset in subsets:
        rest = [t for t in (1, 2, 3) if t not in subset]
        name = "H({}|{})".format(",".join(f"B{t}" for t in subset),
                                 ",".join(["B0"] + [f"B{t}" for t in rest]))
        out[name] = plugin_cond_entropy(symbols, list(subset), [0] + rest)
    return out


def convergence_report(model: GaussianModel, q_list, samples: int = 1_000_000,
                       seed: int = 0) -> list:
    """Rows ``q, delta, quantity, estimate, stderr, analytic_limit, gap``.

    For each quantisation level the three entropy differences that bound the
    key rates are estimated and compared to their Gaussian limits.
    """
    q_list = [int(q) for q in q_list]
    if q_list != sorted(q_list):
        raise ValueError("q_list must be ascending")
    limits = analytic_limits(model)
    rows = []
    for q in q_list:
        quant = Quantizer(q)
        ent = key_entropies(model, quant, samples, derive_seed(seed, q),
                            subsets=[(1,), (2,), (1, 2)])
        combos = {
            "H(B1|A2,A3)-H(B1|B0,B2,B3)": [("H(B1|A2,A3)", 1), ("H(B1|B0,B2,B3)", -1)],
            "H(B2|A1,A3)-H(B2|B0,B1,B3)": [("H(B2|A1,A3)", 1), ("H(B2|B0,B1,B3)", -1)],
            "H(B1|A2,A3)+H(B2|A1,A3)-H(B1,B2|B0,B3)": [
                ("H(B1|A2,A3)", 1), ("H(B2|A1,A3)", 1), ("H(B1,B2|B0,B3)", -1)],
        }
        for name, terms in combos.items():
            est = sum(sign * ent[key].value for key, sign in terms)
            se = math.sqrt(sum(ent[key].stderr ** 2 for key, _ in terms))
            rows.append({
                "q": q,
                "delta": 1.0 / q,
                "quantity": name,
                "estimate": est,
                "stderr": se,
                "analytic_limit": limits[name],
                "gap": est - limits[name],
            })
    return rows
