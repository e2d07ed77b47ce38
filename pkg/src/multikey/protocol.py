"""Simulation of the quantise, bin, decode and hash key-agreement scheme.

Terminals ``1..T`` each observe ``B_t^n`` (a quantised Gaussian or a finite
surrogate source) and the base station observes ``B_0^n``.  Every terminal
publishes a bucket ``m_t = f_bin_t(B_t^n)``, or its whole sequence when it is
a revealing helper.  Key terminals also compute ``K_t = f_key_t(B_t^n)``.  The
base station decodes the binned sequences by maximum likelihood and
recomputes the keys from its estimates.

Discrete sources use labels ``B0, B1, ..., BT``; Gaussian sources use
``A0, A1, ..., AT`` and are quantised before anything else.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.stats import binomtest

from .hashing import HashFamily, derive_seed, rng_for, sample
from .info_measures import (
    GaussianModel,
    JointPmf,
    MAX_CELLS,
    SizeGuardError,
    gallager_cond_entropy,
    iid_extension,
    load_model,
    reorder,
)
from .output_statistics import maximize_1d, secrecy_exponent
from .quantization import Quantizer, induced_pmf, quantize

#: Largest number of candidate tuples the ML decoder scores.
DECODE_GUARD = 2**26
#: Largest hash domain ``|B_t|^n`` handled by table-based hashing.
DOMAIN_GUARD = 2**24
#: Largest ensemble enumerated exactly in :func:`exact_leakage`.
ENSEMBLE_GUARD = 2**16
#: Scores within this distance of the maximum count as ties.
TIE_TOL = 1e-9


class DecodeError(RuntimeError):
    """No candidate is consistent with the public messages."""


def realized_size(n: int, rate: float) -> int:
    """Alphabet size ``ceil(exp(n R))`` (never below one)."""
    if rate < 0:
        raise ValueError("rates must be non-negative")
    return max(int(math.ceil(math.exp(n * rate) - 1e-9)), 1)


@dataclass
class ProtocolConfig:
    """Parameters of one protocol run.

    ``bin_rates`` has one entry per terminal; ``key_rates`` one entry per key
    terminal.  Terminals listed in ``revealed`` publish ``B_t^n`` in full and
    their bin rate is ignored.
    """

    source: object
    n: int
    bin_rates: tuple
    key_rates: tuple
    key_terminals: tuple = (1, 2)
    revealed: tuple = ()
    quantizer: Quantizer | None = None
    bin_kind: str = "fully_random_table"
    key_kind: str = "fully_random_table"
    master_seed: int = 0
    pmf_samples: int = 200_000
    _pmf: JointPmf | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("block length must be a positive integer")
        self.bin_rates = tuple(float(r) for r in self.bin_rates)
        self.key_rates = tuple(float(r) for r in self.key_rates)
        self.key_terminals = tuple(int(t) for t in self.key_terminals)
        self.revealed = tuple(sorted(int(t) for t in self.revealed))
        if isinstance(self.source, GaussianModel) and self.quantizer is None:
            raise ValueError("a Gaussian source needs a quantizer")
        terms = self.terminals
        if len(self.bin_rates) != len(terms):
            raise ValueError(f"need {len(terms)} bin rates, got {len(self.bin_rates)}")
        if len(self.key_rates) != len(self.key_terminals):
            raise ValueError("need one key rate per key terminal")
        if any(t not in terms for t in self.key_terminals + self.revealed):
            raise ValueError("key and revealed terminals must be source terminals")
        if set(self.key_terminals) & set(self.revealed):
            raise ValueError("a key terminal cannot reveal its sequence")

    @property
    def prefix(self) -> str:
        return "A" if isinstance(self.source, GaussianModel) else "B"

    @property
    def terminals(self) -> tuple:
        p = self.prefix
        labels = [v for v in self.source.variables if v.startswith(p) and v != p + "0"]
        if p + "0" not in self.source.variables:
            raise ValueError(f"source needs a base-station variable {p}0")
        return tuple(sorted(int(v[1:]) for v in labels))

    @property
    def binned(self) -> tuple:
        return tuple(t for t in self.terminals if t not in self.revealed)

    @property
    def pmf(self) -> JointPmf:
        """Discrete law of ``(B0, ..., BT)`` used by the decoder and the exponents."""
        if self._pmf is None:
            labels = ["B0"] + [f"B{t}" for t in self.terminals]
            if isinstance(self.source, GaussianModel):
                gauss = [f"A{t}" for t in (0,) + self.terminals]
                est = induced_pmf(self.source, self.quantizer, gauss, self.pmf_samples,
                                  derive_seed(self.master_seed, "pmf"))
                self._pmf = JointPmf(labels, est.probs)
            else:
                self._pmf = reorder(self.source, labels)
        return self._pmf

    def alphabet(self, t: int) -> int:
        pmf = self.pmf
        return pmf.alphabet_sizes[pmf.variables.index(f"B{t}")]

    def bin_size(self, t: int) -> int:
        return realized_size(self.n, self.bin_rates[self.terminals.index(t)])

    def key_size(self, t: int) -> int:
        return realized_size(self.n, self.key_rates[self.key_terminals.index(t)])

    def bin_family(self, t: int) -> HashFamily:
        return HashFamily(self.bin_kind, self._domain(t), self.bin_size(t))

    def key_family(self, t: int) -> HashFamily:
        return HashFamily(self.key_kind, self._domain(t), self.key_size(t))

    def _domain(self, t: int) -> int:
        d = self.alphabet(t) ** self.n
        if d > DOMAIN_GUARD:
            raise SizeGuardError(f"hash domain {d} for terminal {t} exceeds {DOMAIN_GUARD}")
        return d

    def realized_rates(self) -> dict:
        return {
            "bin": {f"B{t}": math.log(self.bin_size(t)) / self.n for t in self.binned},
            "key": {f"B{t}": math.log(self.key_size(t)) / self.n for t in self.key_terminals},
        }

    def to_dict(self) -> dict:
        return {
            "source": self.source.to_dict(),
            "n": self.n,
            "bin_rates": list(self.bin_rates),
            "key_rates": list(self.key_rates),
            "key_terminals": list(self.key_terminals),
            "revealed": list(self.revealed),
            "q": None if self.quantizer is None else self.quantizer.q,
            "bin_kind": self.bin_kind,
            "key_kind": self.key_kind,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProtocolConfig":
        source = doc["source"]
        source = load_model(source) if isinstance(source, (dict, str)) else source
        q = doc.get("q")
        return cls(
            source=source,
            n=int(doc["n"]),
            bin_rates=doc["bin_rates"],
            key_rates=doc["key_rates"],
            key_terminals=tuple(doc.get("key_terminals", (1, 2))),
            revealed=tuple(doc.get("revealed", ())),
            quantizer=None if q is None else Quantizer(int(q)),
            bin_kind=doc.get("bin_kind", "fully_random_table"),
            key_kind=doc.get("key_kind", "fully_random_table"),
            master_seed=int(doc.get("master_seed", 0)),
        )

    def with_changes(self, **changes) -> "ProtocolConfig":
        doc = {k: getattr(self, k) for k in (
            "source", "n", "bin_rates", "key_rates", "key_terminals", "revealed", "quantizer",
            "bin_kind", "key_kind", "master_seed", "pmf_samples")}
        doc.update(changes)
        new = ProtocolConfig(**doc)
        if new.source is self.source and new.quantizer == self.quantizer:
            new._pmf = self._pmf
        return new


@dataclass
class Instances:
    """Hash members of one trial, keyed by terminal."""

    bins: dict
    keys: dict


def draw_instances(config: ProtocolConfig, trial: int) -> Instances:
    """Members used in ``trial``; roles ``bin<t>`` and ``key<t>`` get their own seeds."""
    seed = config.master_seed
    bins = {t: sample(config.bin_family(t), derive_seed(seed, trial, f"bin{t}")) for t in config.binned}
    keys = {t: sample(config.key_family(t), derive_seed(seed, trial, f"key{t}"))
            for t in config.key_terminals}
    return Instances(bins, keys)


def sample_source(config: ProtocolConfig, rng: np.random.Generator) -> dict:
    """One block ``{0: X0^n, 1: X1^n, ...}``.

    Gaussian sources give real-valued arrays (quantised later by
    :func:`to_symbols`); discrete sources give symbol arrays.
    """
    n = config.n
    terms = (0,) + config.terminals
    if isinstance(config.source, GaussianModel):
        order = [f"A{t}" for t in terms]
        idx = config.source.index(order)
        cov = config.source.covariance[np.ix_(idx, idx)]
        values = GaussianModel(order, cov).sample(n, rng)
        return {t: values[:, i] for i, t in enumerate(terms)}
    pmf = config.pmf
    flat = rng.choice(pmf.probs.size, size=n, p=pmf.probs.ravel())
    syms = np.stack(np.unravel_index(flat, pmf.probs.shape), axis=1)
    return {t: syms[:, i].astype(np.int64) for i, t in enumerate(terms)}


def to_symbols(config: ProtocolConfig, seq) -> np.ndarray:
    """``g_q`` applied componentwise to real-valued input; symbols pass through."""
    seq = np.asarray(seq)
    if np.issubdtype(seq.dtype, np.floating):
        if config.quantizer is None:
            raise ValueError("real-valued input needs a quantizer")
        return quantize(config.quantizer, seq)
    return seq.astype(np.int64)


def seq_index(seq, alphabet: int) -> int:
    """Flat index of a sequence, first symbol most significant."""
    idx = 0
    for b in seq:
        idx = idx * alphabet + int(b)
    return idx


def index_digits(indices, alphabet: int, n: int) -> np.ndarray:
    """Inverse of :func:`seq_index` for an array of indices; shape ``(len, n)``."""
    indices = np.asarray(indices, dtype=np.int64)
    powers = alphabet ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (indices[:, None] // powers) % alphabet


@dataclass
class Transcript:
    """Public messages, keys and (after decoding) the base station's view.

    Bucket indices and keys are 1-indexed.
    """

    messages: dict
    revealed: dict
    keys: dict
    decoded: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)

    def disagreements(self) -> dict:
        return {t: self.keys[t] != self.estimates[t] for t in self.keys}


def encode_all(config: ProtocolConfig, block: dict, instances: Instances) -> Transcript:
    """Buckets and keys computed by the terminals from their sequences.

    Real-valued blocks (Gaussian sources) are quantised first.
    """
    msgs, keys, shown = {}, {}, {}
    for t in config.terminals:
        seq = to_symbols(config, block[t])
        if seq.shape != (config.n,):
            raise ValueError(f"terminal {t} block has shape {seq.shape}, expected ({config.n},)")
        if t in config.revealed:
            shown[t] = seq.copy()
            continue
        x = seq_index(seq, config.alphabet(t))
        msgs[t] = instances.bins[t](x)
        if t in config.key_terminals:
            keys[t] = instances.keys[t](x)
    return Transcript(msgs, shown, keys)


def ml_decode(config: ProtocolConfig, b0, transcript: Transcript, instances: Instances,
              guard: int = DECODE_GUARD) -> dict:
    """Most likely binned sequences given ``B0^n``, revealed sequences and buckets.

    Candidates are the bucket preimages of each binned terminal; the score of
    a candidate tuple is ``sum_i log P(b0_i, b_i)`` under the source law.  The
    lexicographically smallest tuple among those within ``TIE_TOL`` of the
    best score wins.
    """
    pmf = config.pmf
    n = config.n
    binned = config.binned
    cands, digits = [], []
    total = 1
    for t in binned:
        pre = np.flatnonzero(instances.bins[t].table == transcript.messages[t] - 1)
        if pre.size == 0:
            raise DecodeError(f"bucket {transcript.messages[t]} of terminal {t} is empty")
        cands.append(pre)
        digits.append(index_digits(pre, config.alphabet(t), n))
        total *= pre.size
    if total > guard:
        raise SizeGuardError(f"{total} candidate tuples exceed decode guard {guard}")
    with np.errstate(divide="ignore"):
        logp = np.log(pmf.probs)
    b0 = np.asarray(b0)
    scores = np.zeros(tuple(c.size for c in cands))
    k = len(binned)
    for i in range(n):
        # slice the log table at the known coordinates of time i
        idx = [b0[i]] + [slice(None)] * len(config.terminals)
        for t in config.revealed:
            idx[config.terminals.index(t) + 1] = transcript.revealed[t][i]
        sl = logp[tuple(idx)]
        grids = [d[:, i].reshape((-1,) + (1,) * (k - 1 - j)) for j, d in enumerate(digits)]
        scores = scores + sl[tuple(grids)]
    best = scores.max()
    if not np.isfinite(best):
        raise DecodeError("no candidate has positive probability")
    pos = np.unravel_index(int(np.flatnonzero(scores.ravel() >= best - TIE_TOL)[0]), scores.shape)
    return {t: digits[j][pos[j]] for j, t in enumerate(binned)}


def run_trial(config: ProtocolConfig, trial: int) -> Transcript:
    """Sample, encode, decode and re-derive keys for one trial."""
    rng = rng_for(derive_seed(config.master_seed, trial, "source"))
    block = sample_source(config, rng)
    inst = draw_instances(config, trial)
    tr = encode_all(config, block, inst)
    tr.decoded = ml_decode(config, to_symbols(config, block[0]), tr, inst)
    for t in config.key_terminals:
        tr.estimates[t] = inst.keys[t](seq_index(tr.decoded[t], config.alphabet(t)))
    return tr


class Rate(NamedTuple):
    """A binomial proportion with its 95% Wilson interval."""

    errors: int
    trials: int
    estimate: float
    ci: tuple


def _rate(errors: int, trials: int) -> Rate:
    ci = binomtest(int(errors), int(trials)).proportion_ci(method="wilson")
    return Rate(int(errors), int(trials), errors / trials, (float(ci.low), float(ci.high)))


@dataclass
class SimulationReport:
    """Outcome of a batch of trials."""

    config: ProtocolConfig
    trials: int
    errors: dict
    leakage: dict | None = None
    exponents: dict | None = None

    @property
    def agreement_error(self) -> float:
        return max(r.estimate for r in self.errors.values())

    def to_dict(self) -> dict:
        doc = {
            "config": self.config.to_dict(),
            "realized_rates": self.config.realized_rates(),
            "trials": self.trials,
            "agreement_error": self.agreement_error,
            "errors": {f"K{t}": {"errors": r.errors, "estimate": r.estimate, "ci": list(r.ci)}
                       for t, r in self.errors.items()},
        }
        if self.leakage is not None:
            doc["leakage"] = self.leakage
        if self.exponents is not None:
            doc["exponents"] = self.exponents
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _count_errors(config: ProtocolConfig, trials) -> np.ndarray:
    out = np.zeros(len(config.key_terminals), dtype=np.int64)
    for trial in trials:
        flags = run_trial(config, trial).disagreements()
        out += np.array([flags[t] for t in config.key_terminals], dtype=np.int64)
    return out


def simulate_trials(config: ProtocolConfig, trials: int, threads: int = 1) -> SimulationReport:
    """Key-disagreement counts over independent trials.

    Trial ``i`` draws everything from seeds derived from ``(master_seed, i)``,
    so the counts do not depend on ``threads``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    config.pmf  # build once before fanning out
    threads = max(int(threads), 1)
    chunks = np.array_split(np.arange(trials), min(threads, trials))
    if threads == 1:
        counts = [_count_errors(config, chunks[0])]
    else:
        with ThreadPoolExecutor(threads) as pool:
            counts = list(pool.map(lambda c: _count_errors(config, c), chunks))
    total = np.sum(counts, axis=0)
    errors = {t: _rate(total[i], trials) for i, t in enumerate(config.key_terminals)}
    return SimulationReport(config, trials, errors)


def cellular_simulate(config: ProtocolConfig, S, trials: int, threads: int = 1) -> SimulationReport:
    """Run with key terminals ``S`` while every other terminal reveals its sequence.

    Bin and key rates are taken from ``config`` for the terminals in ``S``.
    """
    S = tuple(sorted(int(t) for t in S))
    if not S:
        raise ValueError("S must be non-empty")
    key_rates = []
    for t in S:
        if t in config.key_terminals:
            key_rates.append(config.key_rates[config.key_terminals.index(t)])
        else:
            raise ValueError(f"no key rate configured for terminal {t}")
    cell = config.with_changes(
        key_terminals=S, key_rates=tuple(key_rates),
        revealed=tuple(t for t in config.terminals if t not in S))
    return simulate_trials(cell, trials, threads)


# ---------------------------------------------------------------------------
# Exact leakage for discrete sources
# ---------------------------------------------------------------------------


class LeakageResult(NamedTuple):
    """Ensemble mean and spread of the secrecy divergence of one key."""

    mean: float
    std: float
    surrogate_mean: float
    surrogate_std: float
    instances: int
    exact_ensemble: bool


def _grouped_source(config: ProtocolConfig, t: int):
    """``P(x, e)`` for ``x = B_t^n`` with identical conditional columns merged.

    Returns ``(cond, weight)`` where ``cond[:, g]`` is ``P(x | e)`` for group
    ``g`` and ``weight[g]`` its total probability.
    """
    others = [f"B{j}" for j in config.terminals if j != t]
    pair = reorder(config.pmf, [f"B{t}"] + others)
    cells = pair.probs.size ** config.n
    if cells > MAX_CELLS:
        raise SizeGuardError(f"{cells} joint cells exceed guard {MAX_CELLS}")
    block = iid_extension(pair, config.n).probs.reshape(config.alphabet(t) ** config.n, -1)
    pe = block.sum(axis=0)
    keep = pe > 0
    cond = block[:, keep] / pe[keep]
    _, first, inverse = np.unique(np.round(cond, 13), axis=1, return_index=True,
                                  return_inverse=True)
    weight = np.bincount(inverse.ravel(), weights=pe[keep])
    return cond[:, first], weight


def _plogp(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def leakage_of(cond, weight, bin_table, key_table, n_bins: int, n_keys: int) -> tuple:
    """``(D, surrogate)`` for fixed bin and key tables.

    ``D = log K - H(K | M, E)`` is the divergence of ``P_{K M E}`` from
    ``U_K x P_{M E}``; the surrogate is ``log K + log N - H(K, M | E)``.
    """
    y = key_table * n_bins + bin_table
    q = np.zeros((n_keys * n_bins, cond.shape[1]))
    np.add.at(q, y, cond)
    h_km = -_plogp(q).sum(axis=0)
    h_m = -_plogp(q.reshape(n_keys, n_bins, -1).sum(axis=0)).sum(axis=0)
    h_k_given = float(weight @ (h_km - h_m))
    h_km_given = float(weight @ h_km)
    d = math.log(n_keys) - h_k_given
    sur = math.log(n_keys) + math.log(n_bins) - h_km_given
    return max(d, 0.0), max(sur, 0.0)


def exact_leakage(config: ProtocolConfig, budget: int = 1000, ensemble_guard: int = ENSEMBLE_GUARD) -> dict:
    """Secrecy divergence of every key against all other terminals and the public messages.

    For key terminal ``t`` the observer holds ``B_j^n`` for every ``j != t``
    together with all buckets; since the other buckets are functions of those
    sequences, the divergence reduces to ``log K_t - H(K_t | M_t, B_others^n)``.
    Averaged exactly over the ``(bin, key)`` ensemble when it has at most
    ``ensemble_guard`` pairs, otherwise over ``budget`` sampled pairs.
    """
    if isinstance(config.source, GaussianModel):
        raise TypeError("exact leakage needs a discrete source")
    out = {}
    for t in config.key_terminals:
        cond, weight = _grouped_source(config, t)
        bfam, kfam = config.bin_family(t), config.key_family(t)
        exact = bfam.member_count() * kfam.member_count() <= ensemble_guard
        if exact:
            pairs = itertools.product(list(bfam.members()), list(kfam.members()))
        else:
            pairs = ((sample(bfam, derive_seed(config.master_seed, "leak", i, f"bin{t}")),
                      sample(kfam, derive_seed(config.master_seed, "leak", i, f"key{t}")))
                     for i in range(budget))
        vals = np.array([leakage_of(cond, weight, b.table, k.table, bfam.range_size, kfam.range_size)
                         for b, k in pairs])
        out[t] = LeakageResult(float(vals[:, 0].mean()), float(vals[:, 0].std()),
                               float(vals[:, 1].mean()), float(vals[:, 1].std()), len(vals), exact)
    return out


# ---------------------------------------------------------------------------
# Exponent bounds
# ---------------------------------------------------------------------------


class ErrorExponent(NamedTuple):
    """Decoding error exponent bound with its per-subset values.

    The error probability is at most ``prefactor * exp(-n * exponent)``.
    """

    exponent: float
    prefactor: int
    per_subset: dict


def error_exponent_bound(pmf: JointPmf, bin_rates, terminals=None, step: float = 1e-3) -> ErrorExponent:
    """``min_S max_{s in [0,1]} s (sum_{t in S} Rt_t - H^up_{1+s}(B_S | B0, B_Sc))``."""
    if terminals is None:
        terminals = tuple(sorted(int(v[1:]) for v in pmf.variables if v.startswith("B") and v != "B0"))
    terminals = tuple(terminals)
    bin_rates = tuple(bin_rates)
    if len(bin_rates) != len(terminals):
        raise ValueError("one bin rate per terminal is required")
    per = {}
    for r in range(1, len(terminals) + 1):
        for S in itertools.combinations(range(len(terminals)), r):
            target = [f"B{terminals[i]}" for i in S]
            given = ["B0"] + [f"B{terminals[i]}" for i in range(len(terminals)) if i not in S]
            rate = sum(bin_rates[i] for i in S)

            def objective(s, target=target, given=given, rate=rate):
                if s <= 0:
                    return 0.0
                return s * (rate - gallager_cond_entropy(pmf, target, given, s))

            _, val = maximize_1d(objective, 0.0, 1.0, step)
            per[tuple(terminals[i] for i in S)] = max(val, 0.0)
    return ErrorExponent(min(per.values()), 2 ** len(terminals) - 1, per)


def secrecy_exponent_bounds(pmf: JointPmf, key_rates, bin_rates, key_terminals=(1, 2),
                            step: float = 1e-3) -> dict:
    """Secrecy exponent of each key against the other terminals' sequences.

    Terminal ``t`` hashes ``B_t^n`` to ``(M_t, K_t)`` at combined rate
    ``R_t + Rt_t``; the bound is
    ``max_{theta in [0,1]} theta (H_{1+theta}(B_t | B_others) - R_t - Rt_t)``.
    """
    terminals = tuple(sorted(int(v[1:]) for v in pmf.variables if v.startswith("B") and v != "B0"))
    out = {}
    for t, r in zip(key_terminals, key_rates):
        others = [f"B{j}" for j in terminals if j != t]
        combined = r + bin_rates[terminals.index(t)]
        out[t] = secrecy_exponent(pmf, [combined], 0.0, eve=others, terminals=[f"B{t}"], step=step)
    return out


def exponent_report(config: ProtocolConfig, step: float = 1e-3) -> dict:
    """Error and secrecy exponent bounds evaluated on the configured source law."""
    pmf = reorder(config.pmf, ["B0"] + [f"B{t}" for t in config.terminals])
    # revealed sequences act as side information at the decoder
    err = error_exponent_bound(
        _with_revealed(pmf, config), [config.bin_rates[config.terminals.index(t)] for t in config.binned],
        config.binned, step)
    sec = secrecy_exponent_bounds(pmf, config.key_rates, config.bin_rates, config.key_terminals, step)
    return {
        "error_exponent": err.exponent,
        "error_prefactor": err.prefactor,
        "error_per_subset": {",".join(map(str, k)): v for k, v in err.per_subset.items()},
        "secrecy_exponents": {f"K{t}": v for t, v in sec.items()},
    }


def _with_revealed(pmf: JointPmf, config: ProtocolConfig) -> JointPmf:
    """Fold revealed terminals into the base-station variable ``B0``."""
    if not config.revealed:
        return pmf
    front = ["B0"] + [f"B{t}" for t in config.revealed]
    order = front + [f"B{t}" for t in config.binned]
    table = reorder(pmf, order).probs
    sizes = table.shape
    merged = table.reshape((int(np.prod(sizes[: len(front)])),) + sizes[len(front):])
    return JointPmf(["B0"] + [f"B{t}" for t in config.binned], merged)


def _symmetric_channel(k: int, flip: float) -> np.ndarray:
    mat = np.full((k, k), flip / (k - 1))
    np.fill_diagonal(mat, 1.0 - flip)
    return mat


def quaternary_surrogate(rho: float = 0.6, eps: float = 0.15) -> JointPmf:
    """Finite stand-in for the four-terminal Gaussian source.

    ``B3`` is uniform on four symbols and ``B1``, ``B2`` are copies of it sent
    through a quaternary symmetric channel with error ``rho``, so
    ``B1 - B3 - B2`` is Markov.  The base station sees ``B0 = (Y1, Y2, Y3)``
    (64 symbols), each ``Y_t`` a copy of ``B_t`` with error ``eps``.
    """
    helper = np.full(4, 0.25)
    spread, noise = _symmetric_channel(4, rho), _symmetric_channel(4, eps)
    terms = np.einsum("c,ca,cb->abc", helper, spread, spread)
    full = np.einsum("abc,ax,by,cz->xyzabc", terms, noise, noise, noise).reshape(64, 4, 4, 4)
    return JointPmf(["B0", "B1", "B2", "B3"], full)
