"""Thermodynamic product spaces, entropy axioms and arrow comparisons.

A thermodynamic space is a product of N >= 2 configuration spaces carrying
functions P[N] whose increments become negligible against N^delta (delta < 0)
as components are added. The checks here are finite-N trend tests and
sample-based axiom checks; none of them is a proof.

The non-reversibility value that would be identified with an entropy depends
on the chosen (state, observable) pair. The functions below take the traces
as inputs and never pick a pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .errors import EvaluationError, InvalidInputError

__all__ = [
    "ThermoSpace",
    "EntropyFunction",
    "AsymptoticReport",
    "ExtensivityViolation",
    "ExtensivityReport",
    "MonotonicityViolation",
    "MonotonicityReport",
    "ArrowReport",
    "EQUILIBRIUM_NOTE",
    "asymptotic_thermo_check",
    "extensivity_check",
    "monotonicity_check",
    "arrow_coincidence",
]

EQUILIBRIUM_NOTE = (
    "entropy increments vanish within tolerance (local equilibrium); "
    "an equilibrium entropy does not sit well with a non-reversibility value "
    "that depends on the chosen section"
)

N_MAX_DEFAULT = 1000


@dataclass(frozen=True)
class ThermoSpace:
    """Product of configuration-space descriptors with a size-indexed function P[N]."""

    components: tuple
    thermo_fn: Callable[[int], float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) < 2:
            raise InvalidInputError("a thermodynamic space needs at least two components")

    @property
    def N(self) -> int:
        return len(self.components)

    def P(self, N: int | None = None) -> float:
        if self.thermo_fn is None:
            raise InvalidInputError("no thermodynamic function attached")
        return float(self.thermo_fn(self.N if N is None else N))


@dataclass(frozen=True)
class EntropyFunction:
    """Scalar Lambda(t, state) with an optional named subsystem decomposition."""

    eval: Callable[[Any, Any], float]
    name: str = "Lambda"

    def __call__(self, t, state) -> float:
        value = float(self.eval(t, state))
        if not math.isfinite(value):
            raise EvaluationError(f"{self.name} is not finite at t = {t}")
        return value


# -- asymptotic property ------------------------------------------------------


@dataclass
class AsymptoticReport:
    ok: bool
    delta: float
    N: np.ndarray
    r: np.ndarray
    head_min: float
    tail_max: float
    reason: str


def asymptotic_thermo_check(
    P: Callable[[int], float] | ThermoSpace,
    delta: float,
    N_max: int = N_MAX_DEFAULT,
) -> AsymptoticReport:
    """Trend test for P[N] - P[N-1] = o(N^delta).

    Computes r_N = (P[N] - P[N-1]) / N^delta for N = 2..N_max. Passes when
    the last quartile of |r_N| lies strictly below the first quartile, or
    when the tail increments vanish identically.
    """
    if not delta < 0:
        raise InvalidInputError("delta must be negative")
    if N_max < 10:
        raise InvalidInputError("N_max must be at least 10")
    fn = P.P if isinstance(P, ThermoSpace) else P
    N = np.arange(1, N_max + 1)
    values = np.array([float(fn(int(n))) for n in N])
    if not np.all(np.isfinite(values)):
        bad = int(N[~np.isfinite(values)][0])
        raise EvaluationError(f"P[{bad}] is not finite")
    N = N[1:]
    r = np.diff(values) / N.astype(float) ** delta
    a = np.abs(r)
    q = len(a) // 4
    head_min, tail_max = float(a[:q].min()), float(a[-q:].max())
    if tail_max == 0.0:
        ok, reason = True, "increments vanish on the tail"
    elif tail_max < head_min:
        ok, reason = True, "|r_N| decreases from the first to the last quartile"
    else:
        ok, reason = False, "|r_N| does not decrease across the tested range"
    return AsymptoticReport(ok, float(delta), N, r, head_min, tail_max, reason)


# -- entropy axioms ------------------------------------------------------------


@dataclass(frozen=True)
class ExtensivityViolation:
    index: int
    t: Any
    deficit: float


@dataclass
class ExtensivityReport:
    n_checked: int
    violations: list[ExtensivityViolation] = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def extensivity_check(
    L: EntropyFunction,
    L1: EntropyFunction,
    L2: EntropyFunction,
    samples: Sequence[tuple[Any, Any, Any]],
    tol: float = 1e-12,
) -> ExtensivityReport:
    """Check Lambda(t, (u1, u2)) >= Lambda1(t, u1) + Lambda2(t, u2) - tol on samples."""
    report = ExtensivityReport(0)
    for i, (t, u1, u2) in enumerate(samples):
        deficit = L1(t, u1) + L2(t, u2) - L(t, (u1, u2))
        if deficit > tol:
            report.violations.append(ExtensivityViolation(i, t, deficit))
        report.n_checked += 1
    return report


@dataclass(frozen=True)
class MonotonicityViolation:
    function: str
    index: int
    t: Any
    drop: float


@dataclass
class MonotonicityReport:
    n_steps: int
    violations: list[MonotonicityViolation] = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def indices(self) -> list[int]:
        return sorted({v.index for v in self.violations})


def monotonicity_check(
    L: EntropyFunction,
    trajectory: Sequence[tuple[Any, Any]],
    subsystems: Mapping[str, EntropyFunction] | None = None,
    tol: float = 1e-12,
) -> MonotonicityReport:
    """Check that Lambda and every subsystem density never drop by more than tol.

    ``trajectory`` is a list of (t, state) with strictly increasing t. A drop
    between positions i and i+1 is reported at index i+1.
    """
    times = [t for t, _ in trajectory]
    for i in range(len(times) - 1):
        if not times[i] < times[i + 1]:
            raise InvalidInputError(f"trajectory not ordered at index {i + 1}: {times[i]} then {times[i + 1]}")
    fns = {L.name: L, **dict(subsystems or {})}
    report = MonotonicityReport(max(len(trajectory) - 1, 0))
    for name, fn in fns.items():
        vals = [fn(t, s) for t, s in trajectory]
        for i in range(len(vals) - 1):
            drop = vals[i] - vals[i + 1]
            if drop > tol:
                report.violations.append(MonotonicityViolation(name, i + 1, times[i + 1], drop))
    return report


# -- arrows of time ------------------------------------------------------------


COINCIDE, OPPOSE, INDETERMINATE, TURNING = "coincide", "oppose", "indeterminate", "turning"


@dataclass
class ArrowReport:
    status: list[str]
    side: list[int]
    fraction: float | None
    side_fractions: dict[int, float | None]
    n_turning: int
    equilibrium: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "side": self.side,
            "fraction": self.fraction,
            "side_fractions": {str(k): v for k, v in self.side_fractions.items()},
            "n_turning": self.n_turning,
            "equilibrium": self.equilibrium,
            "note": self.note,
        }


def _real_trace(trace, label: str) -> np.ndarray:
    arr = np.asarray(trace)
    if np.iscomplexobj(arr):
        raise InvalidInputError(f"{label} must be real: complex values carry no arrow")
    arr = arr.astype(float)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"{label} contains non-finite values")
    return arr


def _fraction(statuses: list[str]) -> float | None:
    hits = statuses.count(COINCIDE)
    decided = hits + statuses.count(OPPOSE)
    return hits / decided if decided else None


def arrow_coincidence(xi_trace, entropy_trace, tol: float = 1e-12) -> ArrowReport:
    """Compare the dynamical arrow sign(Xi) with the entropic arrow sign(dLambda).

    Each index gets a status: ``turning`` when |Xi| <= tol, ``indeterminate``
    when |dLambda| <= tol, otherwise ``coincide`` or ``oppose``. The side
    counter increases whenever Xi changes strict sign, so coincidence is
    reported separately on each side of a turning point.
    """
    xi_arr = _real_trace(xi_trace, "xi trace")
    ds_arr = _real_trace(entropy_trace, "entropy trace")
    if xi_arr.shape != ds_arr.shape or xi_arr.ndim != 1:
        raise InvalidInputError(f"traces must be aligned 1-D sequences, got {xi_arr.shape} and {ds_arr.shape}")

    status, side = [], []
    current, last_sign = 0, 0
    for x, d in zip(xi_arr, ds_arr):
        sx = 0 if abs(x) <= tol else (1 if x > 0 else -1)
        if sx and last_sign and sx != last_sign:
            current += 1
        if sx:
            last_sign = sx
        side.append(current)
        if sx == 0:
            status.append(TURNING)
        elif abs(d) <= tol:
            status.append(INDETERMINATE)
        else:
            status.append(COINCIDE if sx == (1 if d > 0 else -1) else OPPOSE)

    sides = sorted(set(side))
    side_fractions = {
        s: _fraction([st for st, sd in zip(status, side) if sd == s]) for s in sides
    }
    equilibrium = bool(len(ds_arr)) and bool(np.all(np.abs(ds_arr) <= tol))
    return ArrowReport(
        status=status,
        side=side,
        fraction=_fraction(status),
        side_fractions=side_fractions,
        n_turning=status.count(TURNING),
        equilibrium=equilibrium,
        note=EQUILIBRIUM_NOTE if equilibrium else "",
    )
