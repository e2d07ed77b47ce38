"""Discrete information measures and Gaussian differential-entropy analytics.

All quantities are in nats.  Discrete distributions are dense tables over a
declared, ordered list of variable labels (row-major, first variable slowest);
Gaussian models are zero-mean with an explicit covariance.

Conventions
-----------
* ``0 log 0 = 0`` and ``0 log(0/0) = 0``.
* ``p > 0`` where ``q = 0`` is a modelling error and raises
  :class:`DomainError` instead of returning ``inf``.
* The order parameter ``s`` lives in ``[0, 1]``; the measures have order
  ``1 + s`` and ``s = 0`` is handled by an explicit Shannon branch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

#: Largest dense table we are willing to materialise.
MAX_CELLS = 2**24

#: Conditioning guard for Gaussian covariance blocks.
MAX_CONDITION = 1e12

_SUM_TOL = 1e-12


class DomainError(ValueError):
    """Raised when a measure is undefined for its arguments."""


class SizeGuardError(ValueError):
    """Raised when a dense table would exceed :data:`MAX_CELLS`."""


def check_order(s: float) -> float:
    s = float(s)
    if not 0.0 <= s <= 1.0 or math.isnan(s):
        raise ValueError(f"order parameter s must lie in [0, 1], got {s}")
    return s


def to_bits(nats):
    """Convert nats to bits."""
    return nats / math.log(2)


# ---------------------------------------------------------------------------
# Joint probability mass functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Finite joint distribution over labelled variables.

    Parameters
    ----------
    variables : sequence of str
        Ordered variable labels.
    probs : array_like
        Either an array whose shape equals the alphabet sizes, or a flat
        row-major table (then ``alphabet_sizes`` must be given).
    alphabet_sizes : sequence of int, optional
        Per-variable cardinalities; inferred from ``probs`` when omitted.
    """

    variables: tuple
    probs: np.ndarray

    def __init__(self, variables, probs, alphabet_sizes=None):
        variables = tuple(str(v) for v in variables)
        if len(set(variables)) != len(variables):
            raise ValueError(f"duplicate variable labels in {variables}")
        arr = np.array(probs, dtype=float)
        if alphabet_sizes is not None:
            shape = tuple(int(a) for a in alphabet_sizes)
            if any(a < 1 for a in shape):
                raise ValueError("alphabet sizes must be positive")
            if arr.size != math.prod(shape):
                raise ValueError(
                    f"table has {arr.size} entries, alphabet sizes {shape} need {math.prod(shape)}")
            arr = arr.reshape(shape)
        if arr.ndim != len(variables):
            raise ValueError(f"table has {arr.ndim} axes for {len(variables)} variables")
        if arr.size > MAX_CELLS:
            raise SizeGuardError(f"table with {arr.size} cells exceeds guard {MAX_CELLS}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("probabilities must be finite and non-negative")
        total = arr.sum()
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        arr = arr / total
        arr.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "probs", arr)

    @property
    def alphabet_sizes(self) -> tuple:
        return self.probs.shape

    def __repr__(self):
        sizes = ", ".join(f"{v}:{a}" for v, a in zip(self.variables, self.alphabet_sizes))
        return f"JointPmf({sizes})"

    def axes(self, labels: Iterable[str]) -> tuple:
        """Axis indices of ``labels`` (raises ``KeyError`` on unknown labels)."""
        out = []
        for lab in labels:
            try:
                out.append(self.variables.index(lab))
            except ValueError:
                raise KeyError(f"unknown variable {lab!r}; have {self.variables}") from None
        return tuple(out)

    def size(self, labels: Iterable[str]) -> int:
        return math.prod(self.alphabet_sizes[i] for i in self.axes(labels))

    # JSON -----------------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "JointPmf":
        return cls(doc["variables"], doc["probs"], alphabet_sizes=doc["alphabet_sizes"])

    @classmethod
    def from_json(cls, source) -> "JointPmf":
        """Load from a JSON string, a path, or an already parsed dict."""
        return cls.from_dict(_load_json(source))

    def to_dict(self) -> dict:
        return {
            "variables": list(self.variables),
            "alphabet_sizes": list(self.alphabet_sizes),
            "probs": self.probs.ravel().tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _load_json(source):
    if isinstance(source, dict):
        return source
    if isinstance(source, Path):
        return json.loads(source.read_text())
    text = str(source)
    if text.lstrip().startswith("{"):
        return json.loads(text)
    return json.loads(Path(text).read_text())


def _as_labels(labels) -> tuple:
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


def _check_disjoint(*groups):
    seen = set()
    for g in groups:
        for lab in g:
            if lab in seen:
                raise ValueError(f"variable {lab!r} appears in more than one argument")
            seen.add(lab)


def _table(joint: JointPmf, labels: Sequence[str]) -> np.ndarray:
    """Marginal probabilities of ``labels`` with axes in the order given."""
    axes = joint.axes(labels)
    others = tuple(i for i in range(joint.probs.ndim) if i not in axes)
    marg = joint.probs.sum(axis=others) if others else joint.probs
    # after summing, remaining axes appear in increasing original order
    kept = sorted(axes)
    return np.transpose(marg, [kept.index(a) for a in axes])


def uniform(variables, alphabet_sizes) -> JointPmf:
    """Uniform distribution over the product alphabet."""
    shape = tuple(alphabet_sizes)
    return JointPmf(variables, np.full(shape, 1.0 / math.prod(shape)))


def random_pmf(variables, alphabet_sizes, rng: np.random.Generator, alpha: float = 1.0) -> JointPmf:
    """Dirichlet(``alpha``) draw over the product alphabet."""
    shape = tuple(alphabet_sizes)
    probs = rng.dirichlet(np.full(math.prod(shape), alpha)).reshape(shape)
    return JointPmf(variables, probs / probs.sum())


def product(*pmfs: JointPmf) -> JointPmf:
    """Independent product of joints over disjoint label sets."""
    variables = tuple(v for p in pmfs for v in p.variables)
    table = np.ones(())
    for p in pmfs:
        table = np.multiply.outer(table, p.probs)
    return JointPmf(variables, table)


def marginalize(joint: JointPmf, keep) -> JointPmf:
    """Sum out every variable not in ``keep``.

    The surviving variables keep the order they have in ``joint``.
    """
    keep = _as_labels(keep)
    joint.axes(keep)
    ordered = tuple(v for v in joint.variables if v in keep)
    return JointPmf(ordered, _table(joint, ordered))


def reorder(joint: JointPmf, labels) -> JointPmf:
    """Marginal of ``labels`` with the variables in exactly that order."""
    labels = _as_labels(labels)
    return JointPmf(labels, _table(joint, labels))


def iid_extension(joint: JointPmf, n: int) -> JointPmf:
    """Distribution of ``n`` i.i.d. copies, one block variable per label.

    Each variable ``X`` becomes a block variable with alphabet ``|X|**n``; the
    block index is row-major over time (time 1 most significant), so block
    ``(x_1, ..., x_n)`` has index ``sum x_i * |X|**(n - i)``.
    """
    n = int(n)
    if n < 1:
        raise ValueError("block length must be positive")
    cells = joint.probs.size ** n
    if cells > MAX_CELLS:
        raise SizeGuardError(f"{n}-fold extension has {cells} cells, guard is {MAX_CELLS}")
    k = joint.probs.ndim
    table = joint.probs
    for _ in range(n - 1):
        table = np.multiply.outer(table, joint.probs)
    # axes are ordered (copy, variable); regroup to (variable, copy)
    perm = [c * k + v for v in range(k) for c in range(n)]
    table = np.transpose(table, perm)
    shape = tuple(a**n for a in joint.alphabet_sizes)
    return JointPmf(joint.variables, table.reshape(shape))


# ---------------------------------------------------------------------------
# Divergences and entropies
# ---------------------------------------------------------------------------


def _aligned(p: JointPmf, q: JointPmf):
    if p.variables != q.variables or p.alphabet_sizes != q.alphabet_sizes:
        raise ValueError(
            f"shape mismatch: {p.variables}{p.alphabet_sizes} vs {q.variables}{q.alphabet_sizes}")
    pv = p.probs.ravel()
    qv = q.probs.ravel()
    support = pv > 0
    if np.any(qv[support] == 0):
        raise DomainError("p is not absolutely continuous with respect to q")
    return pv[support], qv[support]


def kl_divergence(p: JointPmf, q: JointPmf) -> float:
    """Kullback-Leibler divergence ``D(p || q)``."""
    pv, qv = _aligned(p, q)
    return max(float(np.sum(pv * (np.log(pv) - np.log(qv)))), 0.0)


def renyi_divergence(p: JointPmf, q: JointPmf, s: float) -> float:
    """Rényi divergence of order ``1 + s``; ``s = 0`` is the KL divergence."""
    s = check_order(s)
    if s == 0.0:
        return kl_divergence(p, q)
    pv, qv = _aligned(p, q)
    val = float(logsumexp((1 + s) * np.log(pv) - s * np.log(qv))) / s
    return max(val, 0.0)


def _plogp_sum(table) -> float:
    t = np.asarray(table).ravel()
    t = t[t > 0]
    return float(-np.sum(t * np.log(t)))


def entropy(joint: JointPmf, variables=None) -> float:
    """Shannon entropy of ``variables`` (all variables by default)."""
    labels = joint.variables if variables is None else _as_labels(variables)
    return _plogp_sum(_table(joint, labels))


def cond_entropy(joint: JointPmf, target, given=()) -> float:
    """Shannon conditional entropy ``H(target | given)``."""
    target, given = _as_labels(target), _as_labels(given)
    _check_disjoint(target, given)
    if not target:
        raise ValueError("target must be non-empty")
    val = entropy(joint, target + given) - (entropy(joint, given) if given else 0.0)
    return max(val, 0.0)


def mutual_information(joint: JointPmf, x, y, given=()) -> float:
    """Conditional mutual information ``I(x; y | given)``."""
    x, y, given = _as_labels(x), _as_labels(y), _as_labels(given)
    _check_disjoint(x, y, given)
    h = entropy
    val = h(joint, x + given) + h(joint, y + given) - h(joint, x + y + given)
    if given:
        val -= h(joint, given)
    return max(val, 0.0)


def _grouped(joint: JointPmf, target, given) -> np.ndarray:
    """Matrix ``P[a, e]`` with rows over target outcomes, columns over given."""
    target, given = _as_labels(target), _as_labels(given)
    _check_disjoint(target, given)
    if not target:
        raise ValueError("target must be non-empty")
    tab = _table(joint, target + given)
    return tab.reshape(joint.size(target), joint.size(given) if given else 1)


def cond_renyi_entropy(joint: JointPmf, target, given=(), s: float = 0.0) -> float:
    """Conditional Rényi entropy of order ``1 + s``.

    ``-(1/s) log sum_e P(e) sum_a P(a|e)^(1+s)`` for ``s > 0`` and the Shannon
    conditional entropy for ``s = 0``.
    """
    s = check_order(s)
    if s == 0.0:
        return cond_entropy(joint, target, given)
    pae = _grouped(joint, target, given)
    pe = pae.sum(axis=0)
    cols = pe > 0
    pae, pe = pae[:, cols], pe[cols]
    with np.errstate(divide="ignore"):
        logp = np.log(pae)
    # log sum_e P(e)^(-s) sum_a P(a,e)^(1+s)
    terms = (1 + s) * logp - s * np.log(pe)[None, :]
    return -float(logsumexp(terms)) / s


def gallager_cond_entropy(joint: JointPmf, target, given=(), s: float = 0.0) -> float:
    """Gallager's conditional Rényi entropy of order ``1 + s``.

    ``-((1+s)/s) log sum_e (sum_a P(a,e)^(1+s))^(1/(1+s))``; continuous
    extension to the Shannon conditional entropy at ``s = 0``.
    """
    s = check_order(s)
    if s == 0.0:
        return cond_entropy(joint, target, given)
    pae = _grouped(joint, target, given)
    with np.errstate(divide="ignore"):
        logp = np.log(pae)
    inner = logsumexp((1 + s) * logp, axis=0) / (1 + s)
    inner = inner[np.isfinite(inner)]
    return -(1 + s) / s * float(logsumexp(inner))


# ---------------------------------------------------------------------------
# Gaussian models
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """Zero-mean multivariate Gaussian over labelled scalar variables."""

    variables: tuple
    covariance: np.ndarray

    def __init__(self, variables, covariance):
        variables = tuple(str(v) for v in variables)
        cov = np.array(covariance, dtype=float)
        if cov.shape != (len(variables), len(variables)):
            raise ValueError(f"covariance shape {cov.shape} does not match {len(variables)} variables")
        if not np.allclose(cov, cov.T, atol=1e-10, rtol=0):
            raise ValueError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive definite") from None
        cov.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "covariance", cov)

    def __repr__(self):
        return f"GaussianModel({', '.join(self.variables)})"

    def index(self, labels) -> list:
        out = []
        for lab in _as_labels(labels):
            try:
                out.append(self.variables.index(lab))
            except ValueError:
                raise KeyError(f"unknown variable {lab!r}; have {self.variables}") from None
        return out

    def block(self, rows, cols=None) -> np.ndarray:
        r = self.index(rows)
        c = r if cols is None else self.index(cols)
        return self.covariance[np.ix_(r, c)]

    def conditional(self, target, given):
        """Regression matrix and covariance of ``target`` given ``given``.

        Returns ``(coef, cov)`` such that ``E[target | given=g] = coef @ g``
        and ``Cov[target | given] = cov``.
        """
        target, given = _as_labels(target), _as_labels(given)
        s_tt = self.block(target)
        if not given:
            return np.zeros((len(target), 0)), s_tt
        s_gg = self.block(given)
        _check_conditioning(s_gg)
        s_tg = self.block(target, given)
        fac = cho_factor(s_gg)
        coef = cho_solve(fac, s_tg.T).T
        cov = s_tt - coef @ s_tg.T
        return coef, 0.5 * (cov + cov.T)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` rows of shape ``(size, len(variables))``."""
        chol = np.linalg.cholesky(self.covariance)
        return rng.standard_normal((int(size), len(self.variables))) @ chol.T

    @classmethod
    def from_dict(cls, doc: dict) -> "GaussianModel":
        return cls(doc["variables"], doc["covariance"])

    @classmethod
    def from_json(cls, source) -> "GaussianModel":
        return cls.from_dict(_load_json(source))

    def to_dict(self) -> dict:
        return {"variables": list(self.variables), "covariance": self.covariance.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check_conditioning(mat: np.ndarray):
    if np.linalg.cond(mat) > MAX_CONDITION:
        raise DomainError("covariance block is numerically singular (condition number > 1e12)")


def _logdet(mat: np.ndarray) -> float:
    _check_conditioning(mat)
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise DomainError("singular covariance block") from None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def gaussian_entropy(model: GaussianModel, subset) -> float:
    """Differential entropy ``h(subset) = 1/2 log((2 pi e)^k det Sigma_S)``."""
    subset = _as_labels(subset)
    if not subset:
        raise ValueError("subset must be non-empty")
    k = len(subset)
    return 0.5 * (k * math.log(2 * math.pi * math.e) + _logdet(model.block(subset)))


def gaussian_cond_entropy(model: GaussianModel, target, given=()) -> float:
    """Conditional differential entropy via the Schur complement."""
    target, given = _as_labels(target), _as_labels(given)
    _check_disjoint(target, given)
    if not target:
        raise ValueError("target must be non-empty")
    _, cov = model.conditional(target, given)
    return 0.5 * (len(target) * math.log(2 * math.pi * math.e) + _logdet(cov))


def gaussian_cond_mi(model: GaussianModel, x, y, given=()) -> float:
    """``I(x; y | given)`` for a Gaussian model, in nats (clamped at zero)."""
    x, y, given = _as_labels(x), _as_labels(y), _as_labels(given)
    _check_disjoint(x, y, given)
    if not x or not y:
        raise ValueError("x and y must be non-empty")
    _, cov = model.conditional(x + y, given)
    kx = len(x)
    val = 0.5 * (_logdet(cov[:kx, :kx]) + _logdet(cov[kx:, kx:]) - _logdet(cov))
    return max(val, 0.0)


def markov_defect(model, x, y, given) -> float:
    """``I(x; y | given)``; zero exactly when ``x - given - y`` is Markov."""
    if isinstance(model, GaussianModel):
        return gaussian_cond_mi(model, x, y, given)
    if isinstance(model, JointPmf):
        return mutual_information(model, x, y, given)
    raise TypeError(f"expected GaussianModel or JointPmf, got {type(model).__name__}")


def load_model(source):
    """Load a :class:`JointPmf` or :class:`GaussianModel` from JSON."""
    doc = _load_json(source)
    if "covariance" in doc:
        return GaussianModel.from_dict(doc)
    return JointPmf.from_dict(doc)
