"""Linear inequality systems over rates and their Fourier-Motzkin projections.

Every inequality is stored as ``coeffs . x <= const``.  When all coefficients
and constants are :class:`fractions.Fraction` or ``int`` the algebra stays
exact (rational mode); otherwise floats are used.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Mapping, Sequence

import numpy as np

from .info_measures import (
    GaussianModel,
    JointPmf,
    cond_entropy,
    gaussian_cond_entropy,
    gaussian_cond_mi,
    markov_defect,
    mutual_information,
)

KEY_VARIABLES = ("R1", "R2")
SCHEME_VARIABLES = ("R1", "R2", "Rt1", "Rt2", "Rt3")


class InfeasibleError(ValueError):
    """The system reduces to a contradiction ``0 <= c`` with ``c < 0``."""


def _exact(values) -> bool:
    return all(isinstance(v, Rational) for v in values)


@dataclass(frozen=True)
class Inequality:
    """``sum(coeffs[i] * x[i]) <= const``."""

    coeffs: tuple
    const: object

    def normalized(self) -> "Inequality":
        """Scale so the first non-zero coefficient has magnitude one."""
        lead = next((c for c in self.coeffs if c != 0), None)
        if lead is None:
            return self
        scale = abs(lead)
        if _exact(self.coeffs + (self.const,)):
            scale = Fraction(scale)
        return Inequality(tuple(c / scale for c in self.coeffs), self.const / scale)

    def is_trivial(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def slack(self, point) -> object:
        return self.const - sum(c * x for c, x in zip(self.coeffs, point))

    def to_dict(self) -> dict:
        return {"coeffs": [float(c) for c in self.coeffs], "rel": "<=", "const": float(self.const)}


def inequality(coeffs, const, rel: str = "<=") -> Inequality:
    """Build an :class:`Inequality`; ``rel=">="`` is negated into ``<=`` form."""
    if rel not in ("<=", ">="):
        raise ValueError(f"relation must be '<=' or '>=', got {rel!r}")
    coeffs = tuple(coeffs)
    if rel == ">=":
        return Inequality(tuple(-c for c in coeffs), -const)
    return Inequality(coeffs, const)


class LinearInequalitySystem:
    """A conjunction of inequalities over named variables."""

    def __init__(self, variables: Sequence[str], inequalities: Sequence[Inequality] = ()):
        self.variables = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate variable labels")
        self.inequalities = []
        for ineq in inequalities:
            if len(ineq.coeffs) != len(self.variables):
                raise ValueError(
                    f"inequality has {len(ineq.coeffs)} coefficients for {len(self.variables)} variables")
            if not np.isfinite(float(ineq.const)):
                raise ValueError("inequality constants must be finite")
            self.inequalities.append(ineq)

    def __repr__(self):
        return f"{type(self).__name__}({self.variables}, {len(self.inequalities)} inequalities)"

    def __len__(self):
        return len(self.inequalities)

    @property
    def exact(self) -> bool:
        return all(_exact(q.coeffs + (q.const,)) for q in self.inequalities)

    def index(self, var: str) -> int:
        try:
            return self.variables.index(var)
        except ValueError:
            raise KeyError(f"unknown variable {var!r}") from None

    def is_infeasible(self) -> bool:
        """True when some inequality reads ``0 <= c`` with ``c < 0``."""
        return any(q.is_trivial() and q.const < 0 for q in self.inequalities)

    def contains(self, point, tol: float = 1e-12):
        """``(inside, slacks)`` for a point given in variable order."""
        point = tuple(point)
        if len(point) != len(self.variables):
            raise ValueError(f"point has {len(point)} coordinates, expected {len(self.variables)}")
        slacks = [q.slack(point) for q in self.inequalities]
        return all(sl >= -tol for sl in slacks), slacks

    def canonical(self) -> frozenset:
        """Order-independent set of normalised ``(coeffs, const)`` pairs."""
        return frozenset((q.coeffs, q.const) for q in (r.normalized() for r in self.inequalities))

    def to_dict(self) -> dict:
        return {"variables": list(self.variables),
                "inequalities": [q.to_dict() for q in self.inequalities]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict):
        ineqs = [inequality(q["coeffs"], q["const"], q.get("rel", "<=")) for q in doc["inequalities"]]
        return cls(doc["variables"], ineqs)

    def describe(self) -> list:
        """Human-readable lines such as ``R1 + R2 <= 0.31``."""
        lines = []
        for q in self.inequalities:
            q = q.normalized()
            coeffs, const, rel = q.coeffs, q.const, "<="
            if all(c <= 0 for c in coeffs) and not q.is_trivial():
                coeffs, const, rel = tuple(-c for c in coeffs), -const, ">="
            terms = []
            for c, v in zip(coeffs, self.variables):
                if c == 0:
                    continue
                mag = "" if abs(c) == 1 else f"{float(abs(c)):g} "
                sign = "-" if c < 0 else "+"
                terms.append(f"{sign} {mag}{v}")
            lhs = " ".join(terms).lstrip("+ ") or "0"
            if lhs.startswith("- "):
                lhs = "-" + lhs[2:]
            lines.append(f"{lhs} {rel} {float(const):.6g}")
        return lines


class RateRegion(LinearInequalitySystem):
    """Projected region over key rates; kept free of duplicates."""


def prune(inequalities) -> list:
    """Drop duplicates, trivially true rows, and rows dominated by a tighter constant."""
    best = {}
    contradictions = []
    for q in inequalities:
        q = q.normalized()
        if q.is_trivial():
            if q.const < 0:
                contradictions.append(q)
            continue
        if q.coeffs not in best or q.const < best[q.coeffs].const:
            best[q.coeffs] = q
    return contradictions[:1] + list(best.values())


def fme_eliminate(system: LinearInequalitySystem, var: str) -> LinearInequalitySystem:
    """Project out ``var``.

    Rows where ``var`` is absent pass through; every (upper, lower) pair is
    combined so ``var`` cancels.  A variable with bounds on one side only
    leaves no trace.
    """
    k = system.index(var)
    keep = [i for i in range(len(system.variables)) if i != k]
    upper, lower, rest = [], [], []
    for q in system.inequalities:
        c = q.coeffs[k]
        (upper if c > 0 else lower if c < 0 else rest).append(q)
    out = [Inequality(tuple(q.coeffs[i] for i in keep), q.const) for q in rest]
    for u in upper:
        for lo in lower:
            a, b = u.coeffs[k], -lo.coeffs[k]
            coeffs = tuple(b * u.coeffs[i] + a * lo.coeffs[i] for i in keep)
            out.append(Inequality(coeffs, b * u.const + a * lo.const))
    variables = tuple(system.variables[i] for i in keep)
    return type(system)(variables, prune(out))


def completion_interval(system: LinearInequalitySystem, var: str, point: Mapping):
    """Feasible interval ``(lo, hi)`` of ``var`` with all other variables fixed.

    ``lo``/``hi`` are ``None`` when unbounded.  Returns ``None`` if some row
    not involving ``var`` is already violated.
    """
    k = system.index(var)
    lo = hi = None
    for q in system.inequalities:
        rest = q.const - sum(c * point[v] for c, v in zip(q.coeffs, system.variables) if v != var)
        c = q.coeffs[k]
        if c > 0:
            hi = rest / c if hi is None else min(hi, rest / c)
        elif c < 0:
            lo = rest / c if lo is None else max(lo, rest / c)
        elif rest < 0:
            return None
    return lo, hi


def has_completion(system: LinearInequalitySystem, var: str, point: Mapping) -> bool:
    """Whether some value of ``var`` extends ``point`` to a feasible point."""
    interval = completion_interval(system, var, point)
    if interval is None:
        return False
    lo, hi = interval
    return lo is None or hi is None or lo <= hi


def _oracle(oracle: Mapping, key: str):
    try:
        return oracle[key]
    except KeyError:
        raise KeyError(f"entropy oracle has no entry {key!r}") from None


def _cond_label(subset) -> str:
    rest = [t for t in (1, 2, 3) if t not in subset]
    return "H({}|{})".format(",".join(f"B{t}" for t in subset),
                             ",".join(["B0"] + [f"B{t}" for t in rest]))


def achievable_system(oracle: Mapping, delta=Fraction(1, 1000)) -> LinearInequalitySystem:
    """Rate conditions of the quantise-bin-hash scheme over ``(R1, R2, Rt1, Rt2, Rt3)``.

    ``Rt_t`` is the public message rate of terminal ``t``.  ``oracle`` maps
    ``"H(B1|A2,A3)"``, ``"H(B2|A1,A3)"`` and ``"H(B_S|B0,B_Sc)"`` labels (as
    produced by :func:`multikey.quantization.key_entropies`, e.g.
    ``"H(B1,B3|B0,B2)"``) to entropies in nats.  Values may be
    :class:`~fractions.Fraction` for exact elimination.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    rows = []
    for r in (1, 2, 3):
        for subset in itertools.combinations((1, 2, 3), r):
            coeffs = [0, 0] + [1 if t in subset else 0 for t in (1, 2, 3)]
            rows.append(inequality(coeffs, _oracle(oracle, _cond_label(subset)) + delta, ">="))
    g1 = _oracle(oracle, "H(B1|A2,A3)")
    g2 = _oracle(oracle, "H(B2|A1,A3)")
    rows.append(inequality([1, 0, 1, 0, 0], g1 - delta))
    rows.append(inequality([0, 1, 0, 1, 0], g2 - delta))
    return LinearInequalitySystem(SCHEME_VARIABLES, rows)


def project_to_keys(system: LinearInequalitySystem) -> RateRegion:
    """Eliminate ``Rt3``, ``Rt2``, ``Rt1`` (in that order) to get a region over ``(R1, R2)``."""
    for var in ("Rt3", "Rt2", "Rt1"):
        system = fme_eliminate(system, var)
    if system.is_infeasible():
        raise InfeasibleError("rate conditions are contradictory")
    return RateRegion(system.variables, system.inequalities)


def closed_form_key_region(oracle: Mapping, delta=Fraction(1, 1000), sum_margin: int = 4) -> RateRegion:
    """The three key-rate bounds written directly from entropies.

    ``R_t <= H(B_t|A_others) - H(B_t|B0, B_others) - 2 delta`` for ``t = 1, 2`` and
    ``R1 + R2 <= sum of the first terms - H(B1,B2|B0,B3) - sum_margin * delta``.
    Exact projection of :func:`achievable_system` gives ``sum_margin = 3``;
    the default of 4 keeps one extra ``delta`` of margin on the sum row.
    """
    g1, g2 = _oracle(oracle, "H(B1|A2,A3)"), _oracle(oracle, "H(B2|A1,A3)")
    rows = [
        Inequality((1, 0), g1 - _oracle(oracle, "H(B1|B0,B2,B3)") - 2 * delta),
        Inequality((0, 1), g2 - _oracle(oracle, "H(B2|B0,B1,B3)") - 2 * delta),
        Inequality((1, 1), g1 + g2 - _oracle(oracle, "H(B1,B2|B0,B3)") - sum_margin * delta),
    ]
    return RateRegion(KEY_VARIABLES, rows)


def _terminals(model) -> list:
    labels = model.variables
    if "A0" not in labels:
        raise ValueError("model needs a base-station variable 'A0'")
    terms = sorted((v for v in labels if v != "A0" and v.startswith("A")), key=lambda v: int(v[1:]))
    return [int(v[1:]) for v in terms]


def _h(model, target, given=()) -> float:
    if isinstance(model, GaussianModel):
        return gaussian_cond_entropy(model, target, given)
    if isinstance(model, JointPmf):
        return cond_entropy(model, target, given)
    raise TypeError(f"expected GaussianModel or JointPmf, got {type(model).__name__}")


def _mi(model, x, y, given=()) -> float:
    if isinstance(model, GaussianModel):
        return gaussian_cond_mi(model, x, y, given)
    if isinstance(model, JointPmf):
        return mutual_information(model, x, y, given)
    raise TypeError(f"expected GaussianModel or JointPmf, got {type(model).__name__}")


def region_mp(model) -> RateRegion:
    """Achievable key-rate pairs with an untrusted helper ``A3``.

    ``R1 <= I(A1;A0|A2,A3)``, ``R2 <= I(A2;A0|A1,A3)`` and
    ``R1 + R2 <= I(A1,A2;A0|A3) - I(A1;A2|A3)``.  This is the capacity region
    when ``A1 - A3 - A2`` is Markov (see :func:`is_capacity`).
    """
    for v in ("A0", "A1", "A2", "A3"):
        if v not in model.variables:
            raise ValueError(f"model is missing {v}")
    rows = [
        Inequality((1, 0), _mi(model, "A1", "A0", ["A2", "A3"])),
        Inequality((0, 1), _mi(model, "A2", "A0", ["A1", "A3"])),
        Inequality((1, 1), _mi(model, ["A1", "A2"], "A0", "A3") - _mi(model, "A1", "A2", "A3")),
    ]
    return RateRegion(KEY_VARIABLES, rows)


def is_capacity(model, tol: float = 1e-10) -> bool:
    """Whether :func:`region_mp` is tight, i.e. ``I(A1;A2|A3) <= tol``."""
    return markov_defect(model, "A1", "A2", "A3") <= tol


def region_cellular(model, S, side: str = "inner") -> RateRegion:
    """Key rates of terminals ``S`` with base station ``A0`` and terminals ``A1..AT``.

    For every non-empty ``U`` within ``S`` the inner bound is
    ``sum_U R_t <= sum_U h(A_t|A_{T-t}) - h(A_U|A_{T-U}, A0)`` and the outer
    bound is ``sum_U R_t <= I(A_U; A0 | A_{T-U})``.
    """
    if side not in ("inner", "outer"):
        raise ValueError(f"side must be 'inner' or 'outer', got {side!r}")
    terminals = _terminals(model)
    S = sorted(set(int(t) for t in S))
    if not S:
        raise ValueError("S must be non-empty")
    if any(t not in terminals for t in S):
        raise ValueError(f"S={S} is not a subset of terminals {terminals}")
    label = lambda ts: [f"A{t}" for t in ts]  # noqa: E731
    rows = []
    for r in range(1, len(S) + 1):
        for U in itertools.combinations(S, r):
            comp = [t for t in terminals if t not in U]
            if side == "inner":
                const = sum(_h(model, f"A{t}", label(t2 for t2 in terminals if t2 != t)) for t in U)
                const -= _h(model, label(U), label(comp) + ["A0"])
            else:
                const = _mi(model, label(U), "A0", label(comp))
            rows.append(Inequality(tuple(1 if t in U else 0 for t in S), const))
    return RateRegion([f"R{t}" for t in S], rows)


def contains(region: LinearInequalitySystem, point, tol: float = 1e-12):
    """``(inside, slacks)``; a point on the boundary counts as inside."""
    return region.contains(point, tol)


def vertices_2d(region: LinearInequalitySystem, nonnegative: bool = True) -> list:
    """Corner points of a two-variable region (with ``R >= 0`` when ``nonnegative``)."""
    if len(region.variables) != 2:
        raise ValueError("vertex enumeration is limited to two variables")
    rows = [(np.array(q.coeffs, dtype=float), float(q.const)) for q in region.inequalities]
    if nonnegative:
        rows += [(np.array([-1.0, 0.0]), 0.0), (np.array([0.0, -1.0]), 0.0)]
    pts = []
    for (a1, b1), (a2, b2) in itertools.combinations(rows, 2):
        mat = np.stack([a1, a2])
        if abs(np.linalg.det(mat)) < 1e-14:
            continue
        x = np.linalg.solve(mat, [b1, b2])
        if all(a @ x <= b + 1e-9 for a, b in rows):
            if not any(np.allclose(x, p, atol=1e-12) for p in pts):
                pts.append(x)
    # counter-clockwise order around the centroid
    if pts:
        c = np.mean(pts, axis=0)
        pts.sort(key=lambda p: np.arctan2(p[1] - c[1], p[0] - c[0]))
    return [tuple(float(v) for v in p) for p in pts]
