"""Number fields used as time parameters: R, Q and the prime fields Z_p.

Each field carries its quasi-metric (valued in Q or R), the minimal distance
``d_min`` and a total order. Raw field elements are plain Python scalars
(``float`` for R, ``Fraction`` for Q, ``int`` in ``0..p-1`` for Z_p); the
:class:`FieldValue` wrapper adds field-checked arithmetic on top of them.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import (
    ContractViolation,
    FieldMismatchError,
    InvalidAutomorphismError,
    InvalidInputError,
)

__all__ = [
    "Kind",
    "TimeField",
    "FieldValue",
    "TimeParameter",
    "TimeParameterCheck",
    "AxiomViolation",
    "Automorphism",
    "Ordering",
    "REALS",
    "RATIONALS",
    "quasi_distance",
    "check_quasi_metric_axioms",
    "all_triples",
    "is_time_parameter",
    "incremental_quotient",
    "extrapolated_quotient",
    "richardson",
    "reparametrize",
    "validate_automorphism",
    "zp_order_compare",
    "ball",
    "hausdorff_ball_check",
]

# Default bound under which a continuous increment counts as "small".
DEFAULT_EPS = 1e-4


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % d for d in range(3, math.isqrt(n) + 1, 2))


class Kind(str, enum.Enum):
    REALS = "reals"
    RATIONALS = "rationals"
    PRIME = "prime"


@dataclass(frozen=True)
class TimeField:
    """Descriptor of a number field K together with its quasi-metric.

    ``tol`` is only consulted for R, where every comparison of machine
    reals goes through an explicit absolute tolerance.
    """

    kind: Kind
    p: int | None = None
    tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.PRIME:
            if not isinstance(self.p, (int, np.integer)) or not _is_prime(int(self.p)):
                raise InvalidInputError(f"Z_p requires a prime modulus, got {self.p!r}")
            object.__setattr__(self, "p", int(self.p))
        elif self.p is not None:
            raise InvalidInputError(f"{self.kind.value} takes no modulus")

    @classmethod
    def reals(cls, tol: float = 1e-12) -> "TimeField":
        return cls(Kind.REALS, tol=tol)

    @classmethod
    def rationals(cls) -> "TimeField":
        return cls(Kind.RATIONALS)

    @classmethod
    def prime(cls, p: int) -> "TimeField":
        return cls(Kind.PRIME, p)

    def __str__(self) -> str:
        return {"reals": "R", "rationals": "Q"}.get(self.kind.value, f"Z_{self.p}")

    @property
    def is_discrete(self) -> bool:
        return self.kind is Kind.PRIME

    @property
    def ordered(self) -> bool:
        return True

    @property
    def d_min(self) -> int | Fraction | float:
        if self.kind is Kind.PRIME:
            return 1
        if self.kind is Kind.RATIONALS:
            return Fraction(0)
        return 0.0

    @property
    def zero(self):
        return self.normalize(0)

    @property
    def one(self):
        return self.normalize(1)

    # raw arithmetic ---------------------------------------------------

    def normalize(self, x: Any):
        """Map ``x`` to the canonical raw representation of this field."""
        if isinstance(x, FieldValue):
            if x.field != self:
                raise FieldMismatchError(f"value of {x.field} used in {self}")
            return x.raw
        if self.kind is Kind.PRIME:
            if isinstance(x, Fraction):
                if x.denominator != 1:
                    x = x.numerator * pow(x.denominator, -1, self.p)
                else:
                    x = x.numerator
            if isinstance(x, (bool, float)) or not isinstance(x, (int, np.integer)):
                raise InvalidInputError(f"{x!r} is not a residue of {self}")
            return int(x) % self.p
        if self.kind is Kind.RATIONALS:
            if isinstance(x, float) and not math.isfinite(x):
                raise InvalidInputError("rationals are finite")
            return Fraction(x)
        return float(x)

    def add(self, a, b):
        r = a + b
        return r % self.p if self.kind is Kind.PRIME else r

    def sub(self, a, b):
        r = a - b
        return r % self.p if self.kind is Kind.PRIME else r

    def mul(self, a, b):
        r = a * b
        return r % self.p if self.kind is Kind.PRIME else r

    def neg(self, a):
        return (-a) % self.p if self.kind is Kind.PRIME else -a

    def inv(self, a):
        if self.kind is Kind.PRIME:
            if a % self.p == 0:
                raise ZeroDivisionError(f"[0] has no inverse in {self}")
            return pow(int(a), -1, self.p)
        if a == 0:
            raise ZeroDivisionError("division by zero time increment")
        return 1 / a if self.kind is Kind.REALS else Fraction(1) / a

    def equal(self, a, b) -> bool:
        if self.kind is Kind.REALS:
            return abs(a - b) <= self.tol
        return a == b

    def distance(self, a, b):
        """Quasi-distance between two raw elements (see :func:`quasi_distance`)."""
        if self.kind is Kind.PRIME:
            return abs(a % self.p - b % self.p)
        return abs(a - b)

    def elements(self) -> range:
        if self.kind is not Kind.PRIME:
            raise InvalidInputError(f"{self} is infinite")
        return range(self.p)

    def __call__(self, x) -> "FieldValue":
        return FieldValue(self, self.normalize(x))


REALS = TimeField.reals()
RATIONALS = TimeField.rationals()


@dataclass(frozen=True)
class FieldValue:
    """A scalar tagged with the field it lives in."""

    field: TimeField
    raw: Any

    def _other(self, other):
        if isinstance(other, FieldValue):
            if other.field != self.field:
                raise FieldMismatchError(f"{self.field} vs {other.field}")
            return other.raw
        return self.field.normalize(other)

    def __add__(self, other):
        return FieldValue(self.field, self.field.add(self.raw, self._other(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return FieldValue(self.field, self.field.sub(self.raw, self._other(other)))

    def __rsub__(self, other):
        return FieldValue(self.field, self.field.sub(self._other(other), self.raw))

    def __mul__(self, other):
        return FieldValue(self.field, self.field.mul(self.raw, self._other(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        inv = self.field.inv(self._other(other))
        return FieldValue(self.field, self.field.mul(self.raw, inv))

    def __neg__(self):
        return FieldValue(self.field, self.field.neg(self.raw))

    def inverse(self) -> "FieldValue":
        return FieldValue(self.field, self.field.inv(self.raw))

    def __float__(self):
        return float(self.raw)

    def __int__(self):
        return int(self.raw)

    def __repr__(self):
        if self.field.kind is Kind.PRIME:
            return f"[{self.raw}]_{self.field.p}"
        return f"{self.raw!r}@{self.field}"


def _raw_pair(f: TimeField, a, b):
    return f.normalize(a), f.normalize(b)


def quasi_distance(f: TimeField, a, b):
    """d_K(a, b): ``|a - b|`` on R and Q, ``|n0 - m0|`` on canonical representatives in Z_p.

    The result lies in the ordered codomain field (``int`` or ``Fraction``
    for the exact fields, ``float`` for R).
    """
    ra, rb = _raw_pair(f, a, b)
    return f.distance(ra, rb)


@dataclass(frozen=True)
class AxiomViolation:
    axiom: str
    triple: tuple
    detail: str


def all_triples(f: TimeField) -> Iterable[tuple[int, int, int]]:
    return itertools.product(f.elements(), repeat=3)


def check_quasi_metric_axioms(f: TimeField, sample: Iterable[tuple]) -> list[AxiomViolation]:
    """Check nonnegativity, identity of indiscernibles and the triangle inequality.

    Symmetry is deliberately not tested. Returns the (possibly empty) list of
    violations; never raises on a failing axiom.
    """
    out: list[AxiomViolation] = []
    empty = True
    for triple in sample:
        empty = False
        u, v, w = (f.normalize(x) for x in triple)
        duv, dvw, duw = f.distance(u, v), f.distance(v, w), f.distance(u, w)
        if duv < 0:
            out.append(AxiomViolation("nonnegativity", triple, f"d(u,v)={duv}"))
        same = f.equal(u, v)
        zero = duv <= f.tol if f.kind is Kind.REALS else duv == 0
        if same != zero:
            out.append(AxiomViolation("identity", triple, f"u==v is {same} but d(u,v)={duv}"))
        slack = f.tol * (1 + abs(duv) + abs(dvw)) if f.kind is Kind.REALS else 0
        if duw > duv + dvw + slack:
            out.append(AxiomViolation("triangle", triple, f"{duw} > {duv} + {dvw}"))
    if empty:
        raise InvalidInputError("empty sample")
    return out


@dataclass(frozen=True)
class TimeParameter:
    """A subset J of a field: either an explicit finite set or a closed interval.

    Intervals are only meaningful for the continuous fields; ``(-inf, inf)``
    stands for the whole field.
    """

    field: TimeField
    elements: frozenset | None = None
    interval: tuple[float, float] | None = None

    def __post_init__(self):
        if (self.elements is None) == (self.interval is None):
            raise InvalidInputError("give exactly one of elements / interval")
        if self.elements is not None:
            object.__setattr__(
                self, "elements", frozenset(self.field.normalize(e) for e in self.elements)
            )
        else:
            if self.field.is_discrete:
                raise InvalidInputError("interval time parameters need a continuous field")
            lo, hi = self.interval
            if lo > hi:
                raise InvalidInputError(f"empty interval {self.interval}")

    @classmethod
    def whole(cls, f: TimeField) -> "TimeParameter":
        if f.is_discrete:
            return cls(f, elements=frozenset(f.elements()))
        return cls(f, interval=(-math.inf, math.inf))

    @classmethod
    def of(cls, f: TimeField, elements: Iterable) -> "TimeParameter":
        return cls(f, elements=frozenset(elements))

    @classmethod
    def between(cls, f: TimeField, lo, hi) -> "TimeParameter":
        return cls(f, interval=(lo, hi))

    @property
    def is_complete(self) -> bool:
        return self == TimeParameter.whole(self.field)

    def __contains__(self, t) -> bool:
        t = self.field.normalize(t)
        if self.elements is not None:
            if self.field.kind is Kind.REALS:
                return any(self.field.equal(t, e) for e in self.elements)
            return t in self.elements
        lo, hi = self.interval
        return lo <= t <= hi


@dataclass(frozen=True)
class TimeParameterCheck:
    ok: bool
    reason: str
    degenerate: bool = False

    def __bool__(self) -> bool:
        return self.ok


def _subgroup_finite(f: TimeField, elems: frozenset) -> str | None:
    if not any(f.equal(e, f.zero) for e in elems):
        return "0 is not in J"
    members = TimeParameter(f, elements=elems)
    for a, b in itertools.product(sorted(elems), repeat=2):
        if f.add(a, b) not in members:
            return f"not closed: {a} + {b} = {f.add(a, b)} is not in J"
    for a in elems:
        if f.neg(a) not in members:
            return f"-{a} is not in J"
    return None


def _subgroup_interval(J: TimeParameter, n_pairs: int, seed: int) -> str | None:
    lo, hi = J.interval
    if not lo <= 0 <= hi:
        return "0 is not in J"
    # Endpoints break closure first for any bounded interval; random pairs
    # cover the rest.
    probes = [x for x in (lo, hi) if math.isfinite(x) and x != 0]
    rng = np.random.default_rng(seed)
    lo_s = lo if math.isfinite(lo) else -1e6
    hi_s = hi if math.isfinite(hi) else 1e6
    probes += list(rng.uniform(lo_s, hi_s, size=n_pairs))
    for a, b in itertools.chain(
        ((x, x) for x in probes), zip(probes, reversed(probes))
    ):
        if not lo <= a + b <= hi:
            return f"not closed: {a} + {b} leaves {J.interval}"
        if not lo <= -a <= hi:
            return f"-{a} leaves {J.interval}"
    return None


def is_time_parameter(
    f: TimeField,
    J: TimeParameter,
    eps: float = DEFAULT_EPS,
    n_pairs: int = 256,
    seed: int = 0,
) -> TimeParameterCheck:
    """Decide whether J is a time parameter of f.

    J must be an additive subgroup of f and every element must have a
    neighbour in J at a small distance: exactly ``d_min`` on Z_p, at most
    ``eps`` (and nonzero) on R and Q. Closure of continuous intervals is
    contract-checked on ``n_pairs`` seeded samples rather than proven.
    """
    if J.field != f:
        raise FieldMismatchError(f"J lives in {J.field}, not {f}")
    if J.elements is not None and not J.elements:
        raise InvalidInputError("empty time parameter")

    if J.elements is not None:
        why = _subgroup_finite(f, J.elements)
    else:
        why = _subgroup_interval(J, n_pairs, seed)
    if why is not None:
        return TimeParameterCheck(False, why)

    if J.interval is not None:
        lo, hi = J.interval
        if lo == hi:
            return TimeParameterCheck(False, "trivial subgroup {0}: no small nonzero step", True)
        return TimeParameterCheck(True, f"interval {J.interval} is a subgroup with small steps")

    for t1 in J.elements:
        if f.is_discrete:
            near = any(f.distance(t2, t1) == f.d_min for t2 in J.elements)
        else:
            near = any(0 < f.distance(t2, t1) <= eps for t2 in J.elements)
        if not near:
            degenerate = len(J.elements) == 1
            label = "trivial subgroup {0}: " if degenerate else ""
            return TimeParameterCheck(False, f"{label}no small step from {t1}", degenerate)
    return TimeParameterCheck(True, "subgroup with small steps")


def _sub_values(f: TimeField, a, b):
    """Difference in the target space V (residues, field values, scalars, arrays)."""
    if isinstance(a, FieldValue):
        return a - b
    if f.kind is Kind.PRIME:
        return np.mod(np.subtract(a, b), f.p) if isinstance(a, np.ndarray) else (a - b) % f.p
    return a - b


def _scale(f: TimeField, v, s):
    if isinstance(v, FieldValue):
        return v * s
    if f.kind is Kind.PRIME:
        return np.mod(v * s, f.p) if isinstance(v, np.ndarray) else (v * s) % f.p
    return v * s


def incremental_quotient(
    psi: Callable[[Any], Any],
    t1,
    h,
    f: TimeField | None = None,
    eps: float = DEFAULT_EPS,
):
    """Return ``(psi(t1 + h) - psi(t1)) * h^-1`` for a single small step ``h``.

    On Z_p the step must satisfy ``d(t1 + h, t1) == d_min``; on R and Q it
    must be nonzero with ``|h| <= eps``. ``psi`` receives raw field elements
    and returns values in a K-vector space (residues for Z_p).
    """
    if f is None:
        if isinstance(t1, FieldValue):
            f = t1.field
        else:
            raise InvalidInputError("field required for raw time values")
    t1, h = f.normalize(t1), f.normalize(h)
    if h == 0:
        raise ZeroDivisionError("h = 0")
    t2 = f.add(t1, h)
    if f.is_discrete:
        if f.distance(t2, t1) != f.d_min:
            raise ContractViolation(
                f"step {h} from {t1} is not small: d = {f.distance(t2, t1)} != {f.d_min}"
            )
    elif abs(h) > eps:
        raise ContractViolation(f"|h| = {abs(h)} exceeds eps = {eps}")
    return _scale(f, _sub_values(f, psi(t2), psi(t1)), f.inv(h))


def richardson(values: Sequence, orders: Sequence[int], ratio: float = 2.0):
    """Extrapolate ``values`` (computed at h, h/ratio, h/ratio^2, ...) to h -> 0.

    ``orders[k]`` is the power of h removed at elimination round k. Works for
    any values supporting + - and scalar * / (floats, complex, Fractions,
    numpy arrays).
    """
    vals = list(values)
    if len(vals) < 2:
        raise InvalidInputError("need at least two approximations")
    if len(orders) < len(vals) - 1:
        raise InvalidInputError("one order per elimination round")
    for p in orders[: len(vals) - 1]:
        fac = ratio**p
        vals = [(fac * vals[i + 1] - vals[i]) / (fac - 1) for i in range(len(vals) - 1)]
    return vals[0]


def extrapolated_quotient(
    psi: Callable[[Any], Any],
    t1,
    h=DEFAULT_EPS,
    f: TimeField = REALS,
    levels: int = 3,
):
    """Derivative of ``psi`` at ``t1`` on a continuous field.

    Forward quotients at ``h, h/2, ...`` are combined by Richardson
    extrapolation (error orders 1, 2, ...). On Z_p this reduces to the single
    exact quotient at the minimal step.
    """
    if f.is_discrete:
        return incremental_quotient(psi, t1, f.one, f)
    t1 = f.normalize(t1)
    h = f.normalize(h)
    two = f.normalize(2)
    steps = [h / two**k for k in range(levels)]
    qs = [incremental_quotient(psi, t1, s, f, eps=abs(h)) for s in steps]
    if levels == 1:
        return qs[0]
    return richardson(qs, list(range(1, levels)), ratio=two)


@dataclass(frozen=True)
class Automorphism:
    """Candidate field automorphism theta acting on raw elements."""

    name: str
    fn: Callable[[Any], Any] = dc_field(compare=False)

    @classmethod
    def identity(cls) -> "Automorphism":
        return cls("identity", lambda x: x)

    def __call__(self, x):
        return self.fn(x)


def _generators(f: TimeField) -> list:
    if f.kind is Kind.PRIME:
        return list(f.elements())
    base = [0, 1, -1, 2, Fraction(1, 2), 3, Fraction(-2, 3), 7, Fraction(5, 11)]
    if f.kind is Kind.REALS:
        base += [math.pi, -math.e, 0.1, 1e3]
    return [f.normalize(x) for x in base]


def validate_automorphism(theta: Automorphism, f: TimeField) -> None:
    """Raise :class:`InvalidAutomorphismError` unless theta respects +, *, 0 and 1.

    Exhaustive on Z_p (all pairs, plus bijectivity); pointwise on a fixed
    generator set for R and Q.
    """
    gens = _generators(f)

    def img(x):
        try:
            return f.normalize(theta(x))
        except Exception as exc:  # pragma: no cover - defensive
            raise InvalidAutomorphismError(f"{theta.name}: {exc}") from exc

    if not f.equal(img(f.one), f.one):
        raise InvalidAutomorphismError(
            f"{theta.name} is not multiplicative: theta(1) = {img(f.one)} != 1"
        )
    if not f.equal(img(f.zero), f.zero):
        raise InvalidAutomorphismError(f"{theta.name}: theta(0) != 0")
    for a, b in itertools.product(gens, repeat=2):
        if not f.equal(img(f.add(a, b)), f.add(img(a), img(b))):
            raise InvalidAutomorphismError(f"{theta.name} is not additive at ({a}, {b})")
        if not f.equal(img(f.mul(a, b)), f.mul(img(a), img(b))):
            raise InvalidAutomorphismError(f"{theta.name} is not multiplicative at ({a}, {b})")
    if f.kind is Kind.PRIME and len({img(a) for a in gens}) != f.p:
        raise InvalidAutomorphismError(f"{theta.name} is not bijective")


def reparametrize(theta: Automorphism, J: TimeParameter) -> TimeParameter:
    """Image theta(J) of a time parameter under a validated field automorphism."""
    f = J.field
    validate_automorphism(theta, f)
    if J.elements is not None:
        return TimeParameter(f, elements=frozenset(f.normalize(theta(e)) for e in J.elements))
    lo, hi = J.interval
    # Order-preserving on R and Q (the only automorphism is the identity);
    # the infinite ends stay put.
    new = tuple(x if math.isinf(x) else theta(x) for x in (lo, hi))
    return TimeParameter(f, interval=(min(new), max(new)))


class Ordering(enum.IntEnum):
    LT = -1
    EQ = 0
    GT = 1


def zp_order_compare(a: FieldValue, b: FieldValue) -> Ordering:
    """Order on Z_p by canonical representatives 0 <= n0 < p."""
    if not (isinstance(a, FieldValue) and isinstance(b, FieldValue)):
        raise InvalidInputError("zp_order_compare takes FieldValue arguments")
    if a.field != b.field:
        raise FieldMismatchError(f"{a.field} vs {b.field}")
    if a.field.kind is not Kind.PRIME:
        raise InvalidInputError("the representative order is defined on Z_p only")
    return Ordering((a.raw > b.raw) - (a.raw < b.raw))


def ball(f: TimeField, k, r) -> frozenset[int]:
    """Open ball {x in Z_p : d(x, k) < r}."""
    k = f.normalize(k)
    return frozenset(x for x in f.elements() if f.distance(x, k) < r)


def hausdorff_ball_check(f: TimeField, k1, k2, r) -> bool:
    """True iff the open balls of radius ``r`` about k1 and k2 are disjoint."""
    if f.normalize(k1) == f.normalize(k2):
        raise InvalidInputError("k1 and k2 must differ")
    return not (ball(f, k1, r) & ball(f, k2, r))
