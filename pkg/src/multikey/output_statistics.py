"""Output statistics of hashing several correlated sources.

The leakage of hash outputs ``M_t = f_t(A_t^n)`` about side information
``E^n`` is measured by

    C_{1+s}(M | E^n) = D_{1+s}(P_{M E^n} || prod_t U_{M_t} x P_{E^n})
                     = sum_t log N_t - H_{1+s}(M | E^n).

This module computes that measure exactly for a fixed tuple of hash
instances, averages it over enumerable hash ensembles, checks the one-shot
ensemble bound on ``E[exp(s C_{1+s})]`` and evaluates the asymptotic secrecy
exponent of universal2 hashing.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .hashing import (
    derive_seed,
    enumerate_family,
    sample,
    toeplitz_columns,
    toeplitz_tables,
)
from .info_measures import (
    JointPmf,
    SizeGuardError,
    MAX_CELLS,
    check_order,
    cond_renyi_entropy,
    iid_extension,
    kl_divergence,
    marginalize,
    mutual_information,
    product,
    reorder,
    uniform,
)


@dataclass(frozen=True)
class HashSystem:
    """One hash family per terminal, applied to blocks of length ``n``."""

    families: tuple
    n: int = 1

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        if not self.families:
            raise ValueError("a hash system needs at least one terminal")
        if self.n < 1:
            raise ValueError("block length must be positive")

    @property
    def rates(self) -> tuple:
        """Hash rates ``(1/n) log N_t`` in nats per symbol."""
        return tuple(math.log(f.range_size) / self.n for f in self.families)

    @property
    def epsilon(self) -> float:
        return max(f.epsilon for f in self.families)

    @property
    def range_sizes(self) -> tuple:
        return tuple(f.range_size for f in self.families)


@dataclass
class LeakageReport:
    """Measure value with its named decomposition and, optionally, a bound."""

    c_value: float
    decomposition: list = field(default_factory=list)
    bound_rhs: float | None = None

    @property
    def slack(self) -> float | None:
        return None if self.bound_rhs is None else self.bound_rhs - self.c_value

    def total(self) -> float:
        return float(sum(v for _, v in self.decomposition))


def _split(joint: JointPmf, eve, terminals):
    eve = tuple(eve) if eve is not None else tuple(v for v in ("E",) if v in joint.variables)
    if terminals is None:
        terminals = tuple(v for v in joint.variables if v not in eve)
    terminals = tuple(terminals)
    if not terminals:
        raise ValueError("no terminal variables left after removing the eavesdropper")
    joint.axes(terminals + eve)
    return terminals, eve


def c_measure(joint_me: JointPmf, s: float, eve=None, messages=None) -> float:
    """``C_{1+s}(M | E)`` for a joint over hash outputs and side information.

    Parameters
    ----------
    joint_me : JointPmf
        Joint over the messages ``M_1..M_T`` and the side information.
    s : float
        Order parameter in ``[0, 1]``.
    eve : sequence of str, optional
        Side-information labels; defaults to ``("E",)`` when present, else none.
    messages : sequence of str, optional
        Message labels; defaults to every label not in ``eve``.  Each
        message's alphabet size is its ``N_t``.
    """
    s = check_order(s)
    messages, eve = _split(joint_me, eve, messages)
    log_n = math.log(joint_me.size(messages))
    return max(log_n - cond_renyi_entropy(joint_me, messages, eve, s), 0.0)


def kl_decomposition(joint_me: JointPmf, eve=None, messages=None) -> LeakageReport:
    """Split ``D(P_{ME} || prod U x P_E)`` into dependence, non-uniformity and leakage.

    The terms are ``I(M_t; M_1..M_{t-1})`` for ``t >= 2``, ``D(P_{M_t} || U)``
    for every ``t`` and ``I(M; E)``.  ``c_value`` is the divergence computed
    directly against the product reference distribution.
    """
    messages, eve = _split(joint_me, eve, messages)
    terms = []
    for t in range(1, len(messages)):
        terms.append((f"I({messages[t]};{','.join(messages[:t])})",
                      mutual_information(joint_me, messages[t], messages[:t])))
    for m in messages:
        pm = marginalize(joint_me, [m])
        terms.append((f"D({m}||U)", kl_divergence(pm, uniform([m], pm.alphabet_sizes))))
    if eve:
        terms.append((f"I({','.join(messages)};{','.join(eve)})",
                      mutual_information(joint_me, messages, eve)))
    ordered = reorder(joint_me, messages + eve)
    ref = uniform(messages, [joint_me.size([m]) for m in messages])
    if eve:
        ref = product(ref, reorder(joint_me, eve))
    return LeakageReport(kl_divergence(ordered, ref), terms)


# ---------------------------------------------------------------------------
# Pushforward through hash tables
# ---------------------------------------------------------------------------


def hash_pushforward(probs: np.ndarray, axis: int, table: np.ndarray, range_size: int) -> np.ndarray:
    """Replace ``axis`` of a probability array by the bucket index ``table[x]``."""
    moved = np.moveaxis(probs, axis, 0)
    out = np.zeros((range_size,) + moved.shape[1:])
    np.add.at(out, table, moved)
    return np.moveaxis(out, 0, axis)


def _block_source(source: JointPmf, terminals, eve, n: int) -> np.ndarray:
    """``P^n`` as an array with axes (terminals..., eve block)."""
    ext = iid_extension(reorder(source, terminals + eve), n).probs
    if eve:
        ext = ext.reshape(ext.shape[: len(terminals)] + (-1,))
    else:
        ext = ext[..., None]
    return ext


def c_of_tables(block: np.ndarray, tables: Sequence[np.ndarray], range_sizes, s: float) -> float:
    """``C_{1+s}`` of hashing each terminal axis of ``block`` with ``tables``."""
    probs = block
    for t, (tab, n_t) in enumerate(zip(tables, range_sizes)):
        probs = hash_pushforward(probs, t, tab, n_t)
    labels = [f"M{t + 1}" for t in range(len(tables))] + ["E"]
    return c_measure(JointPmf(labels, probs), s, eve=["E"])


def _check_system(source, system, terminals, eve):
    if len(terminals) != len(system.families):
        raise ValueError(f"{len(terminals)} terminals but {len(system.families)} hash families")
    for lab, fam in zip(terminals, system.families):
        need = source.size([lab]) ** system.n
        if fam.domain_size != need:
            raise ValueError(f"family for {lab} has domain {fam.domain_size}, blocks need {need}")


def _ensemble(source, system, terminals, eve):
    block = _block_source(source, terminals, eve, system.n)
    members = [list(enumerate_family(f)) for f in system.families]
    for combo in itertools.product(*members):
        weight = math.prod(w for _, w in combo)
        yield weight, block, [inst.table for inst, _ in combo]


def one_shot_bound(source: JointPmf, system: HashSystem, s: float, eve=None, terminals=None) -> float:
    """Right-hand side of the ensemble bound on ``E[exp(s C_{1+s})]``.

    ``eps^(sT) + sum_{S != {}} eps^(s(T-|S|)) prod_{t in S} N_t^s exp(-s n H_{1+s}(A_S|E))``.
    """
    s = check_order(s)
    terminals, eve = _split(source, eve, terminals)
    eps, big_t = system.epsilon, len(terminals)
    rhs = eps ** (s * big_t)
    for subset in _subsets(range(big_t)):
        labels = [terminals[i] for i in subset]
        h = cond_renyi_entropy(source, labels, eve, s)
        log_n = sum(math.log(system.families[i].range_size) for i in subset)
        rhs += eps ** (s * (big_t - len(subset))) * math.exp(s * log_n - s * system.n * h)
    return rhs


def exact_ensemble_expectation(source: JointPmf, system: HashSystem, s: float,
                               eve=None, terminals=None) -> tuple:
    """Exact ``E_X[exp(s C_{1+s}(M | E^n))]`` by enumerating the hash ensemble.

    Returns
    -------
    (lhs, rhs_bound, slack) : tuple of float
        The exact expectation, the one-shot bound and ``rhs - lhs``.
    """
    s = check_order(s)
    terminals, eve = _split(source, eve, terminals)
    _check_system(source, system, terminals, eve)
    lhs = 0.0
    for weight, block, tables in _ensemble(source, system, terminals, eve):
        lhs += weight * math.exp(s * c_of_tables(block, tables, system.range_sizes, s))
    rhs = one_shot_bound(source, system, s, eve, terminals)
    return lhs, rhs, rhs - lhs


def ensemble_mean_c(source: JointPmf, system: HashSystem, s: float, eve=None, terminals=None) -> float:
    """Exact ``E_X[C_{1+s}(M | E^n)]`` over an enumerable ensemble."""
    s = check_order(s)
    terminals, eve = _split(source, eve, terminals)
    _check_system(source, system, terminals, eve)
    return sum(w * c_of_tables(b, tabs, system.range_sizes, s)
               for w, b, tabs in _ensemble(source, system, terminals, eve))


def weak_secrecy_margin(source: JointPmf, system_or_rates, s: float, eve=None,
                        terminals=None) -> dict:
    """``H_{1+s}(A_S | E) - sum_{t in S} R_t`` for every non-empty subset ``S``.

    Keys are frozensets of 0-based terminal positions.  All margins positive
    is the rate condition under which ``(1/n) E[C_{1+s}] -> 0``.
    """
    s = check_order(s)
    terminals, eve = _split(source, eve, terminals)
    rates = system_or_rates.rates if isinstance(system_or_rates, HashSystem) else tuple(system_or_rates)
    if len(rates) != len(terminals):
        raise ValueError("one rate per terminal is required")
    out = {}
    for subset in _subsets(range(len(terminals))):
        h = cond_renyi_entropy(source, [terminals[i] for i in subset], eve, s)
        out[frozenset(subset)] = h - sum(rates[i] for i in subset)
    return out


def _subsets(items):
    items = list(items)
    for r in range(1, len(items) + 1):
        yield from itertools.combinations(items, r)


def maximize_1d(func, lo: float, hi: float, step: float = 1e-3) -> tuple:
    """Maximise a continuous function on ``[lo, hi]``.

    A dense grid locates the best cell, then a bounded scalar search refines
    inside the neighbouring cells.  Returns ``(argmax, max)``.
    """
    if hi <= lo:
        return lo, func(lo)
    count = max(int(round((hi - lo) / step)), 1)
    grid = np.linspace(lo, hi, count + 1)
    vals = np.array([func(x) for x in grid])
    i = int(np.argmax(vals))
    best_x, best_v = float(grid[i]), float(vals[i])
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, count)]
    if b > a:
        res = minimize_scalar(lambda x: -func(x), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-10})
        if res.success and -res.fun > best_v:
            best_x, best_v = float(res.x), float(-res.fun)
    return best_x, best_v


def secrecy_exponent(source: JointPmf, rates, s: float = 0.0, eve=None, terminals=None,
                     step: float = 1e-3) -> float:
    """Lower bound on the decay exponent of ``E[C_{1+s}]`` for universal2 hashing.

    ``max_{theta in [s, 1]} min_S theta (H_{1+theta}(A_S|E) - sum_{t in S} R_t)``,
    clamped at zero.
    """
    s = check_order(s)
    terminals, eve = _split(source, eve, terminals)
    rates = tuple(rates)
    if len(rates) != len(terminals):
        raise ValueError("one rate per terminal is required")
    subsets = [list(sub) for sub in _subsets(range(len(terminals)))]

    def objective(theta):
        if theta <= 0:
            return 0.0
        return min(theta * (cond_renyi_entropy(source, [terminals[i] for i in sub], eve, theta)
                            - sum(rates[i] for i in sub)) for sub in subsets)

    _, val = maximize_1d(objective, s, 1.0, step)
    return max(val, 0.0)


# ---------------------------------------------------------------------------
# Monte Carlo over large ensembles
# ---------------------------------------------------------------------------


@dataclass
class MonteCarloEstimate:
    """Sample mean of per-instance exact values with a normal 95% interval."""

    mean: float
    stderr: float
    values: np.ndarray

    @property
    def ci(self) -> tuple:
        return self.mean - 1.96 * self.stderr, self.mean + 1.96 * self.stderr


def _summarise(values) -> MonteCarloEstimate:
    values = np.asarray(values, dtype=float)
    se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return MonteCarloEstimate(float(values.mean()), se, values)


def is_binary_symmetric(source: JointPmf, terminals, eve) -> bool:
    """True for one uniform bit ``A`` observed through a binary symmetric channel as ``E``."""
    if len(terminals) != 1 or len(eve) != 1:
        return False
    if source.size(terminals) != 2 or source.size(eve) != 2:
        return False
    p = reorder(source, terminals + eve).probs
    return bool(abs(p[0, 0] - p[1, 1]) < 1e-15 and abs(p[0, 1] - p[1, 0]) < 1e-15)


def binary_symmetric_source(crossover: float) -> JointPmf:
    """Uniform bit ``A`` and ``E = A xor Z`` with ``Z ~ Bern(crossover)``."""
    p = float(crossover)
    return JointPmf(["A", "E"], [[(1 - p) / 2, p / 2], [p / 2, (1 - p) / 2]])


def _c_xor_batch(tables: np.ndarray, noise: np.ndarray, range_size: int, s: float) -> np.ndarray:
    """``C_{1+s}`` for linear hashes of ``A = E xor Z``: ``log N - H_{1+s}(f(Z^n))``."""
    batch = tables.shape[0]
    idx = tables + range_size * np.arange(batch)[:, None]
    pm = np.bincount(idx.ravel(), weights=np.broadcast_to(noise, tables.shape).ravel(),
                     minlength=batch * range_size).reshape(batch, range_size)
    if s == 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -np.sum(np.where(pm > 0, pm * np.log(pm), 0.0), axis=1)
    else:
        h = -np.log(np.sum(pm ** (1 + s), axis=1)) / s
    return np.maximum(math.log(range_size) - h, 0.0)


def monte_carlo_expectation(source: JointPmf, system: HashSystem, s: float, trials: int,
                            master_seed: int = 0, eve=None, terminals=None,
                            method: str = "auto", batch: int = 512) -> MonteCarloEstimate:
    """Estimate ``E_X[C_{1+s}(M | E^n)]`` from sampled hash instances.

    Instance ``i`` of terminal ``t`` is drawn with seed
    ``derive_seed(master_seed, i, t)``, so the estimate is reproducible and
    independent of batching.  Each instance's ``C_{1+s}`` is computed exactly.

    ``method="direct"`` pushes the full ``P^n_{A E}`` table through the
    hashes.  ``method="xor"`` handles a uniform bit observed through a binary
    symmetric channel with Toeplitz hashing, where linearity gives
    ``C = log N - H_{1+s}(f(Z^n))`` and only the ``2**n`` noise patterns are
    needed.  ``"auto"`` picks ``"xor"`` whenever it applies.
    """
    s = check_order(s)
    terminals, eve = _split(source, eve, terminals)
    _check_system(source, system, terminals, eve)
    xor_ok = (is_binary_symmetric(source, terminals, eve)
              and system.families[0].kind == "toeplitz_gf2")
    if method == "auto":
        method = "xor" if xor_ok else "direct"
    if method == "xor":
        if not xor_ok:
            raise ValueError("xor method needs a binary symmetric source and Toeplitz hashing")
        return _mc_xor(source, system, s, trials, master_seed, terminals, eve, batch)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    cells = math.prod(source.size([t]) ** system.n for t in terminals) * source.size(eve) ** system.n
    if cells > MAX_CELLS:
        raise SizeGuardError(f"block table needs {cells} cells, guard is {MAX_CELLS}")
    block = _block_source(source, terminals, eve, system.n)
    values = []
    for i in range(int(trials)):
        tables = [sample(f, derive_seed(master_seed, i, t)).table
                  for t, f in enumerate(system.families)]
        values.append(c_of_tables(block, tables, system.range_sizes, s))
    return _summarise(values)


def _mc_xor(source, system, s, trials, master_seed, terminals, eve, batch):
    fam = system.families[0]
    n, k, m = system.n, fam.domain_bits, fam.range_bits
    crossover = 2 * reorder(source, terminals + eve).probs[0, 1]
    weight = np.array([bin(x).count("1") for x in range(2**n)])
    noise = crossover**weight * (1 - crossover) ** (n - weight)
    values = np.empty(int(trials))
    for start in range(0, int(trials), batch):
        stop = min(start + batch, int(trials))
        bits = np.stack([sample(fam, derive_seed(master_seed, i, 0)).seed_material
                         for i in range(start, stop)])
        tables = toeplitz_tables(toeplitz_columns(bits, k, m))
        values[start:stop] = _c_xor_batch(tables, noise, fam.range_size, s)
    return _summarise(values)
