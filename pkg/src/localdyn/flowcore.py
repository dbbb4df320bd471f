"""Flows, conjugate flows and the non-reversibility functional.

A :class:`Flow` is a map ``(t, u) -> u'`` over a time field. States double as
section values: every induced dynamics used here acts directly on stalk
values (vectors, residues or finite labels) with the identity as the field
isomorphism between time parameters.

The non-reversibility functional of an observable Omega at a state E is

    Xi(E) = lim_{t -> d_min} (Omega(Phi(t, E)) - Omega(Phi^c(t, E))) / t

evaluated exactly at the minimal step on Z_p and by Richardson-extrapolated
quotients on R and Q.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field, replace
from fractions import Fraction
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import (
    EvaluationError,
    InvalidInputError,
    NotConjugableError,
    UnsupportedStateSpace,
)
from .timefield import REALS, Kind, TimeField, TimeParameter, richardson

__all__ = [
    "StateSpace",
    "Flow",
    "Observable",
    "FlowViolation",
    "FlowAxiomReport",
    "NonReversibilityReport",
    "TurningPointReport",
    "DEFAULT_H",
    "check_flow_axioms",
    "check_flow_axioms_batch",
    "check_conjugacy",
    "conjugate",
    "xi",
    "xi_value",
    "xi_support_fraction",
    "symmetrize",
    "reversibility_residual",
    "detect_turning_points",
    "translation_flow",
    "linear_flow",
    "permutation_flow",
    "shift_flow",
]

DEFAULT_H = 1e-3
DEFAULT_TOL = 1e-6
RICHARDSON_LEVELS = 3


@dataclass(frozen=True)
class StateSpace:
    """What a state looks like: real/complex vectors, Z_p residues or finite labels."""

    kind: str = "real"
    dim: int | None = None
    modulus: int | None = None

    def __post_init__(self):
        if self.kind not in ("real", "complex", "residue", "finite"):
            raise InvalidInputError(f"unknown state space kind {self.kind!r}")
        if self.kind == "residue" and not self.modulus:
            raise InvalidInputError("residue states need a modulus")

    @classmethod
    def real(cls, dim: int | None = None) -> "StateSpace":
        return cls("real", dim)

    @classmethod
    def complex(cls, dim: int | None = None) -> "StateSpace":
        return cls("complex", dim)

    @classmethod
    def residue(cls, p: int, dim: int | None = None) -> "StateSpace":
        return cls("residue", dim, p)

    @classmethod
    def finite(cls, size: int) -> "StateSpace":
        return cls("finite", size)

    @property
    def exact(self) -> bool:
        return self.kind in ("residue", "finite")

    @property
    def is_module(self) -> bool:
        return self.kind != "finite"

    def distance(self, a, b) -> float:
        if self.kind == "finite":
            return 0.0 if a == b else math.inf
        if self.kind == "residue":
            diff = np.mod(np.subtract(a, b), self.modulus)
            return 0.0 if not np.any(diff) else math.inf
        return float(np.max(np.abs(np.subtract(a, b)), initial=0.0))

    def norm(self, a) -> float:
        if self.exact:
            return 0.0
        return float(np.max(np.abs(a), initial=0.0))

    def add(self, a, b):
        if self.kind == "residue":
            return np.mod(np.add(a, b), self.modulus) if isinstance(a, np.ndarray) else (a + b) % self.modulus
        return np.add(a, b)

    def half(self, a):
        if self.kind == "residue":
            if self.modulus == 2:
                raise UnsupportedStateSpace("2 has no inverse in Z_2: halving undefined")
            inv2 = pow(2, -1, self.modulus)
            return np.mod(a * inv2, self.modulus) if isinstance(a, np.ndarray) else (a * inv2) % self.modulus
        return np.multiply(a, 0.5)


@dataclass(frozen=True)
class Flow:
    """Local dynamics Phi: J x M -> M.

    ``evolve`` receives raw time values of ``field`` (see
    :mod:`localdyn.timefield`). ``exact_conjugate`` overrides the default
    time-reversal conjugate ``Phi(-t, .)``; it is required when the flow is
    not complete.
    """

    evolve: Callable[[Any, Any], Any] = dc_field(compare=False)
    field: TimeField = REALS
    space: StateSpace = StateSpace()
    time_param: TimeParameter | None = None
    exact_conjugate: Callable[[Any, Any], Any] | None = dc_field(default=None, compare=False)
    complete: bool = True
    name: str = "flow"

    @property
    def J(self) -> TimeParameter:
        return self.time_param if self.time_param is not None else TimeParameter.whole(self.field)

    def _t(self, t):
        if self.field.kind is Kind.REALS:
            return t
        return self.field.normalize(t)

    def __call__(self, t, u):
        return self.evolve(self._t(t), u)


@dataclass(frozen=True)
class Observable:
    """Scalar function Omega on states.

    ``modulus_of_continuity`` is a declared constant L with
    ``|Omega(u) - Omega(v)| <= L |u - v|`` near the states of interest; it is
    informational only.
    """

    name: str
    eval: Callable[[Any], Any] = dc_field(compare=False)
    modulus_of_continuity: float | None = None

    def __call__(self, u):
        return self.eval(u)

    @classmethod
    def identity(cls) -> "Observable":
        return cls("identity", lambda u: u)

    @classmethod
    def constant(cls, c=1.0) -> "Observable":
        return cls(f"const({c})", lambda u: c, 0.0)

    @classmethod
    def linear_combination(cls, terms: Sequence[tuple[Any, "Observable"]]) -> "Observable":
        def ev(u):
            return sum(c * o(u) for c, o in terms)

        return cls(" + ".join(f"{c}*{o.name}" for c, o in terms), ev)


# -- conjugation -----------------------------------------------------------


def _conj_name(name: str) -> str:
    return name[:-2] if name.endswith("^c") else name + "^c"


def conjugate(phi: Flow) -> Flow:
    """Conjugate flow Phi^c with Phi^c(t, B) = A whenever Phi(t, A) = B.

    Complete flows are conjugated by time reversal; otherwise the supplied
    ``exact_conjugate`` is used. Conjugating twice swaps back to the
    original evolution map.
    """
    if phi.exact_conjugate is not None:
        return replace(
            phi,
            evolve=phi.exact_conjugate,
            exact_conjugate=phi.evolve,
            name=_conj_name(phi.name),
        )
    if not phi.complete:
        raise NotConjugableError(f"{phi.name} is not complete and has no explicit conjugate")
    f, forward = phi.field, phi.evolve

    def backward(t, u):
        return forward(f.neg(t), u)

    return replace(phi, evolve=backward, exact_conjugate=forward, name=_conj_name(phi.name))


# -- axioms -----------------------------------------------------------------


@dataclass(frozen=True)
class FlowViolation:
    check: str
    t1: Any
    t2: Any
    index: int
    deviation: float


@dataclass
class FlowAxiomReport:
    flow: str
    n_checked: int = 0
    max_deviation: float = 0.0
    violations: list[FlowViolation] = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _deviation(space: StateSpace, a, b, relative: bool) -> float:
    d = space.distance(a, b)
    if relative and not space.exact:
        d /= max(space.norm(b), 1.0)
    return d


def check_flow_axioms(
    phi: Flow,
    samples: Iterable[tuple[Any, Any, Any]],
    tol: float = 1e-10,
    relative: bool = False,
) -> FlowAxiomReport:
    """Verify Phi(0, u) = u and Phi(t1 + t2, u) = Phi(t1, Phi(t2, u)).

    For complete flows the inverse law Phi(-t, Phi(t, u)) = u (group of
    transformations) is checked too. Exact state spaces are compared
    exactly; vector spaces use the max-norm, divided by ``max(|ref|, 1)``
    when ``relative``. Samples with t1, t2 or t1 + t2 outside J are
    reported as domain violations and skipped.
    """
    f, J, space = phi.field, phi.J, phi.space
    tol = 0.0 if space.exact else tol
    report = FlowAxiomReport(phi.name)

    def record(check, t1, t2, i, a, b):
        dev = _deviation(space, a, b, relative)
        report.max_deviation = max(report.max_deviation, dev)
        if dev > tol:
            report.violations.append(FlowViolation(check, t1, t2, i, dev))

    for i, (t1, t2, u) in enumerate(samples):
        s = f.add(phi._t(t1), phi._t(t2))
        if not all(x in J for x in (t1, t2, s)):
            report.violations.append(FlowViolation("domain", t1, t2, i, math.inf))
            continue
        report.n_checked += 1
        record("identity", t1, t2, i, phi(f.zero, u), u)
        record("composition", t1, t2, i, phi(t1, phi(t2, u)), phi(s, u))
        if phi.complete:
            record("inverse", t1, t2, i, phi(f.neg(phi._t(t1)), phi(t1, u)), u)
    return report


def check_flow_axioms_batch(
    phi: Flow,
    t1: np.ndarray,
    t2: np.ndarray,
    states: np.ndarray,
    tol: float = 1e-10,
    relative: bool = False,
) -> FlowAxiomReport:
    """Vectorised :func:`check_flow_axioms` for real flows over R.

    ``phi.evolve`` must accept a time array of shape (N,) together with a
    state batch of shape (N, d) and act row by row.
    """
    if phi.field.kind is not Kind.REALS or phi.space.exact:
        raise InvalidInputError("batch axiom checks are for real-vector flows over R")
    t1, t2, states = np.asarray(t1, float), np.asarray(t2, float), np.asarray(states)
    report = FlowAxiomReport(phi.name, n_checked=len(t1))

    def rows(check, a, b):
        dev = np.max(np.abs(a - b), axis=-1)
        if relative:
            dev = dev / np.maximum(np.max(np.abs(b), axis=-1), 1.0)
        report.max_deviation = max(report.max_deviation, float(np.max(dev, initial=0.0)))
        for i in np.flatnonzero(dev > tol):
            report.violations.append(FlowViolation(check, t1[i], t2[i], int(i), float(dev[i])))

    rows("identity", phi(np.zeros_like(t1), states), states)
    rows("composition", phi(t1, phi(t2, states)), phi(t1 + t2, states))
    if phi.complete:
        rows("inverse", phi(-t1, phi(t1, states)), states)
    return report


def check_conjugacy(phi: Flow, samples: Iterable[tuple[Any, Any]], tol: float = 1e-10) -> float:
    """Max deviation of Phi^c(t, Phi(t, A)) from A; raises nothing, returns the number."""
    phic = conjugate(phi)
    worst = 0.0
    for t, a in samples:
        worst = max(worst, _deviation(phi.space, phic(t, phi(t, a)), a, relative=False))
    return worst


# -- non-reversibility -------------------------------------------------------


def _finite(x) -> bool:
    if isinstance(x, (Fraction, int)):
        return True
    arr = np.asarray(x)
    if arr.dtype == object:
        return all(_finite(v) for v in arr.ravel())
    return bool(np.all(np.isfinite(arr)))


def _default_h(f: TimeField):
    if f.kind is Kind.PRIME:
        return 1
    if f.kind is Kind.RATIONALS:
        return Fraction(1, 1000)
    return DEFAULT_H


def _estimator(f: TimeField) -> str:
    return "exact-discrete" if f.is_discrete else "finite-difference"


def _quotient(omega, phi: Flow, phic: Flow, E, h):
    a, b = omega(phi(h, E)), omega(phic(h, E))
    if not (_finite(a) and _finite(b)):
        raise EvaluationError(f"non-finite observable value at step {h}")
    f = phi.field
    if f.is_discrete:
        inv = f.inv(h)
        diff = np.subtract(a, b)
        return np.mod(diff * inv, f.p) if isinstance(diff, np.ndarray) else int(diff * inv) % f.p
    return (a - b) / h


def xi_value(omega: Callable, phi: Flow, E, h=None, levels: int = RICHARDSON_LEVELS):
    """Raw value of the non-reversibility functional (scalar, complex or array).

    On Z_p, ``h`` must sit at the minimal distance from 0 (``h = [1]``).
    On R/Q the quotients at h, h/2, ..., h/2^(levels-1) are extrapolated
    with error orders 1, 2, ...
    """
    f = phi.field
    h = f.normalize(_default_h(f) if h is None else h)
    phic = conjugate(phi)
    if f.is_discrete:
        if f.distance(h, f.zero) != f.d_min:
            raise InvalidInputError(f"discrete step must satisfy d(h, 0) = d_min, got h = {h}")
        return _quotient(omega, phi, phic, E, h)
    if h == 0:
        raise ZeroDivisionError("h = 0")
    two = f.normalize(2)
    qs = [_quotient(omega, phi, phic, E, h / two**k) for k in range(levels)]
    if levels == 1:
        return qs[0]
    return richardson(qs, list(range(1, levels)), ratio=two)


def _arrow_sign(f: TimeField, value, tol: float) -> int | None:
    if f.is_discrete:
        return 0 if value % f.p == 0 else 1
    if isinstance(value, (complex, np.complexfloating)):
        if abs(value.imag) > tol:
            # No order on C.
            return None
        value = value.real
    if abs(value) <= tol:
        return 0
    return 1 if value > 0 else -1


def _jsonable(x):
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


@dataclass
class NonReversibilityReport:
    xi_value: Any
    estimator: str
    h: Any
    arrow_sign: int | None
    support_fraction: float | None = None
    observable: str = ""
    flow: str = ""
    note: str = ""

    @property
    def degenerate(self) -> bool:
        return self.arrow_sign == 0

    def to_dict(self) -> dict:
        return {
            "xi": _jsonable(self.xi_value),
            "estimator": self.estimator,
            "h": _jsonable(self.h),
            "arrow_sign": self.arrow_sign,
            "support_fraction": self.support_fraction,
            "observable": self.observable,
            "flow": self.flow,
            "note": self.note,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def xi(
    omega: Observable,
    phi: Flow,
    E,
    h=None,
    tol: float = DEFAULT_TOL,
    levels: int = RICHARDSON_LEVELS,
) -> NonReversibilityReport:
    """Evaluate Xi_Omega(E) and wrap it with its estimator, step and arrow sign."""
    f = phi.field
    h = f.normalize(_default_h(f) if h is None else h)
    value = xi_value(omega, phi, E, h, levels)
    return NonReversibilityReport(
        xi_value=value,
        estimator=_estimator(f),
        h=h,
        arrow_sign=_arrow_sign(f, value, tol),
        observable=getattr(omega, "name", ""),
        flow=phi.name,
    )


ObservableSource = Observable | Callable[[Any], Observable]


def _observable_for(omega: ObservableSource, E) -> Observable:
    return omega if isinstance(omega, Observable) else omega(E)


def xi_support_fraction(
    omega: ObservableSource,
    phi: Flow,
    states: Sequence,
    h=None,
    tol: float = DEFAULT_TOL,
    batched: bool = False,
    workers: int | None = None,
) -> float:
    """Fraction of sampled states with |Xi_Omega(E)| > tol.

    ``omega`` may be a fixed observable or a factory ``E -> Observable`` for
    observables anchored at the state. With ``batched=True`` the states are a
    single (N, d) array pushed through the flow at once (the factory then
    receives the whole batch). Otherwise evaluation may fan out over
    ``workers`` threads; results keep input order.
    """
    if len(states) == 0:
        raise InvalidInputError("empty state sample")
    if batched:
        vals = np.abs(xi_value(_observable_for(omega, states), phi, states, h))
        return float(np.mean(vals > tol))

    def one(E):
        return abs(xi_value(_observable_for(omega, E), phi, E, h))

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            vals = list(pool.map(one, states))
    else:
        vals = [one(E) for E in states]
    return sum(v > tol for v in vals) / len(vals)


def symmetrize(phi: Flow) -> Flow:
    """Sym Phi(t, E) = (Phi(t, E) + Phi^c(t, E)) / 2.

    The formula is invariant under swapping Phi and Phi^c, so the result is
    its own conjugate. It is generally *not* a group flow; it is marked
    incomplete so that conjugation never falls back to time reversal.
    """
    space = phi.space
    if not space.is_module:
        raise UnsupportedStateSpace("symmetrization needs states that can be added and halved")
    if space.kind == "residue" and space.modulus == 2:
        raise UnsupportedStateSpace("2 has no inverse in Z_2: halving undefined")
    phic = conjugate(phi)

    def sym(t, E):
        return space.half(space.add(phi(t, E), phic(t, E)))

    return replace(
        phi, evolve=sym, exact_conjugate=sym, complete=False, name=f"Sym({phi.name})"
    )


def reversibility_residual(phi: Flow, E, h=None):
    """Estimate dPhi(t, E)/dt|0 - dPhi^c(t, E)/dt|0 (a vector in state space).

    A zero residual is the derivative-criterion reversibility certificate.
    """
    if phi.space.kind == "finite":
        raise UnsupportedStateSpace("finite label sets have no tangent vectors")
    return xi_value(Observable.identity(), phi, E, h)


@dataclass
class TurningPointReport:
    xi_values: list
    signs: list[int]
    brackets: list[tuple[int, int]]
    degenerate: list[int]
    segments: list[tuple[int, int, int]]


def detect_turning_points(
    omega: Observable,
    phi: Flow,
    path: Sequence,
    h=None,
    tol: float = DEFAULT_TOL,
) -> TurningPointReport:
    """Locate turning points of the dynamical arrow along an ordered path.

    Returns brackets (i, i+1) where Xi changes strict sign, indices where
    |Xi| <= tol (degenerate, arrow sign 0) and the maximal constant-sign
    segments as (start, end, sign).
    """
    if len(path) == 0:
        raise InvalidInputError("empty path")
    f = phi.field
    values = [xi_value(omega, phi, E, h) for E in path]
    signs = [_arrow_sign(f, v, tol) for v in values]
    if any(s is None for s in signs):
        raise InvalidInputError("turning points need an ordered (real) non-reversibility value")
    brackets = [(i, i + 1) for i in range(len(signs) - 1) if signs[i] * signs[i + 1] < 0]
    degenerate = [i for i, s in enumerate(signs) if s == 0]
    segments = []
    start = 0
    for i in range(1, len(signs) + 1):
        if i == len(signs) or signs[i] != signs[start]:
            segments.append((start, i - 1, signs[start]))
            start = i
    return TurningPointReport(values, signs, brackets, degenerate, segments)


# -- reference flows ---------------------------------------------------------


def translation_flow(v, field: TimeField = REALS) -> Flow:
    """Phi(t, x) = x + v t."""
    v = np.asarray(v, dtype=float)

    def evolve(t, x):
        # t may be a per-row time array for batched states
        return np.asarray(x) + np.multiply.outer(t, v)

    return Flow(evolve, field, StateSpace.real(v.size), name=f"translation{np.atleast_1d(v).tolist()}")


def linear_flow(A) -> Flow:
    """Phi(t, x) = exp(A t) x, evaluated by the eigen/Pade exponential of scipy."""
    from scipy.linalg import expm

    A = np.asarray(A, dtype=float)

    def evolve(t, x):
        if np.ndim(t):
            return np.stack([expm(A * ti) @ xi_ for ti, xi_ in zip(t, x)])
        return expm(A * t) @ np.asarray(x)

    return Flow(evolve, REALS, StateSpace.real(A.shape[0]), name="linear")


def permutation_flow(g: Sequence[int]) -> Flow:
    """Phi(t, u) = g^t(u) for a permutation g with g^p = id, time in Z_p.

    The order of g must divide a prime p, which then is the time field.
    """
    g = tuple(int(x) for x in g)
    n = len(g)
    if sorted(g) != list(range(n)):
        raise InvalidInputError("g is not a permutation")
    order, cur = 1, g
    while cur != tuple(range(n)):
        cur = tuple(g[c] for c in cur)
        order += 1
    f = TimeField.prime(order)
    powers = [tuple(range(n))]
    for _ in range(order - 1):
        powers.append(tuple(g[c] for c in powers[-1]))

    def evolve(t, u):
        return powers[t % order][u]

    return Flow(evolve, f, StateSpace.finite(n), name=f"perm{g}")


def shift_flow(p: int, step: int = 1) -> Flow:
    """Phi(t, u) = u + step * t on residues mod p."""
    f = TimeField.prime(p)

    def evolve(t, u):
        return (u + step * t) % p

    return Flow(evolve, f, StateSpace.residue(p), name=f"shift{step}_mod{p}")
