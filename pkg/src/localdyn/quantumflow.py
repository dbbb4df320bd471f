"""Unitary evolution on C^n and the scattering H-theorem.

Two observables on the evolved state are compared:

* survival probability |<psi0|phi>|^2, whose non-reversibility vanishes;
* the bare amplitude <psi0|phi>, whose non-reversibility has modulus
  2 |<psi0|H|psi0>|.

With U(t) = exp(-iHt) the amplitude limit evaluates to -2i<H>. Some texts
write +2i<H>, which corresponds to the opposite sign convention for H (or
for the conjugate); :data:`AMPLITUDE_SIGN_NOTE` is attached to every report.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import InvalidDistributionError, InvalidInputError, InvalidSystemError
from .flowcore import (
    DEFAULT_H,
    RICHARDSON_LEVELS,
    Flow,
    NonReversibilityReport,
    Observable,
    StateSpace,
    xi,
)
from .timefield import REALS

__all__ = [
    "QuantumSystem",
    "ScatteringSystem",
    "AMPLITUDE_SIGN_NOTE",
    "RATE_FACTOR_NOTE",
    "propagator",
    "quantum_flow",
    "survival_observable",
    "amplitude_observable",
    "omega_survival",
    "quantum_xi",
    "transition_matrix",
    "scattering_entropy",
    "master_step",
    "entropy_rate",
    "htheorem_trace",
    "random_unitary",
    "random_hermitian",
    "is_irreducible",
]

AMPLITUDE_SIGN_NOTE = (
    "U(t)=exp(-iHt): amplitude Xi evaluates to -2i<H>; the +2i<H> form "
    "follows from the opposite sign convention for H or for the conjugate"
)
RATE_FACTOR_NOTE = (
    "rate uses the asymmetric weight (1 + ln(P/c)); it is reported next to "
    "the non-reversibility value, never identified with it"
)


def _hermitian_error(H: np.ndarray) -> float:
    return float(np.max(np.abs(H - H.conj().T), initial=0.0))


@dataclass(frozen=True)
class QuantumSystem:
    H: np.ndarray
    psi0: np.ndarray
    _eig: tuple = dc_field(init=False, repr=False, compare=False)

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        psi = np.asarray(self.psi0, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise InvalidSystemError("H must be square")
        if psi.shape != (H.shape[0],):
            raise InvalidSystemError("psi0 dimension does not match H")
        if _hermitian_error(H) > 1e-12:
            raise InvalidSystemError(f"H is not Hermitian (|H - H^dag| = {_hermitian_error(H):.3g})")
        if abs(np.linalg.norm(psi) - 1) > 1e-12:
            raise InvalidSystemError("psi0 must have unit norm")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "psi0", psi)
        object.__setattr__(self, "_eig", np.linalg.eigh(H))

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def expectation(self) -> complex:
        return complex(np.vdot(self.psi0, self.H @ self.psi0))


def propagator(q: QuantumSystem, t: float) -> np.ndarray:
    """U(t) = exp(-iHt) from the eigendecomposition of H."""
    if not np.isfinite(t):
        raise InvalidInputError("t must be finite")
    w, V = q._eig
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def _time(t) -> float:
    t = float(t)
    if not np.isfinite(t):
        raise InvalidInputError("t must be finite")
    return t


def quantum_flow(q: QuantumSystem) -> Flow:
    """Schroedinger flow psi -> U(t) psi with conjugate psi -> U(t)^dag psi."""

    w, V = q._eig
    Vh = V.conj().T

    # Applied in the eigenbasis so forward and backward share every rounding
    # step except the sign of the phase.
    def forward(t, psi):
        return V @ (np.exp(-1j * w * _time(t)) * (Vh @ psi))

    def backward(t, psi):
        return V @ (np.exp(1j * w * _time(t)) * (Vh @ psi))

    return Flow(forward, REALS, StateSpace.complex(q.n), exact_conjugate=backward, name="schroedinger")


def survival_observable(q: QuantumSystem) -> Observable:
    return Observable("survival", lambda phi: abs(np.vdot(q.psi0, phi)) ** 2, 2.0)


def amplitude_observable(q: QuantumSystem) -> Observable:
    return Observable("amplitude", lambda phi: complex(np.vdot(q.psi0, phi)), 1.0)


def omega_survival(q: QuantumSystem, t: float) -> float:
    return float(abs(np.vdot(q.psi0, propagator(q, t) @ q.psi0)) ** 2)


def quantum_xi(q: QuantumSystem, omega_kind: str = "amplitude", h: float = DEFAULT_H) -> NonReversibilityReport:
    """Non-reversibility of the Schroedinger flow at psi0 for one of the two observables."""
    if omega_kind == "survival":
        # |<psi|U psi>| = |<psi|U^dag psi>| for every t, so the quotient is
        # zero at each step; extrapolating would only amplify rounding.
        omega, levels = survival_observable(q), 1
    elif omega_kind == "amplitude":
        omega, levels = amplitude_observable(q), RICHARDSON_LEVELS
    else:
        raise InvalidInputError(f"omega_kind must be 'survival' or 'amplitude', not {omega_kind!r}")
    report = xi(omega, quantum_flow(q), q.psi0, h, levels=levels)
    if omega_kind == "amplitude":
        report.note = AMPLITUDE_SIGN_NOTE
    return report


# -- scattering -------------------------------------------------------------


@dataclass(frozen=True)
class ScatteringSystem:
    """Channel probabilities P evolving under the transition matrix |S|^2."""

    S: np.ndarray
    P: np.ndarray
    c: np.ndarray | None = None

    def __post_init__(self):
        S = np.asarray(self.S, dtype=complex)
        P = np.asarray(self.P, dtype=float)
        n = P.shape[0]
        c = np.ones(n) if self.c is None else np.asarray(self.c, dtype=float)
        if S.shape != (n, n):
            raise InvalidSystemError(f"S has shape {S.shape}, expected {(n, n)}")
        err = float(np.max(np.abs(S.conj().T @ S - np.eye(n))))
        if err > 1e-10:
            raise InvalidSystemError(f"S is not unitary (|S^dag S - I| = {err:.3g})")
        if np.any(P < 0):
            raise InvalidDistributionError("negative probability")
        if abs(P.sum() - 1) > 1e-12:
            raise InvalidDistributionError(f"probabilities sum to {P.sum()!r}")
        if c.shape != (n,) or np.any(c <= 0):
            raise InvalidDistributionError("normalisation constants must be positive")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.P.shape[0]


def transition_matrix(S) -> np.ndarray:
    """T[a, b] = |S[a, b]|^2; doubly stochastic when S is unitary."""
    return np.abs(np.asarray(S)) ** 2


def scattering_entropy(s: ScatteringSystem) -> float:
    """-sum P ln(P / c) with 0 ln 0 = 0."""
    P, c = s.P, s.c
    nz = P > 0
    return float(-np.sum(P[nz] * np.log(P[nz] / c[nz])))


def master_step(s: ScatteringSystem) -> ScatteringSystem:
    """One step P'_b = sum_a P_a T[a, b] of the doubly stochastic chain.

    The result is renormalised so rounding in T never drifts the total
    probability.
    """
    P = s.P @ transition_matrix(s.S)
    P = np.clip(P, 0.0, None)
    return ScatteringSystem(s.S, P / P.sum(), s.c)


def entropy_rate(s: ScatteringSystem) -> float:
    """Entropy production -sum_a (1 + ln(P_a/c_a)) sum_b (P_b T[b,a] - P_a T[a,b]).

    The off-diagonal entries of T act as transition rates. A channel with
    P_a = 0 and positive inflow contributes +inf (the slope of -p ln p at 0).
    """
    T = transition_matrix(s.S)
    P, c = s.P, s.c
    flux = P @ T - P * T.sum(axis=1)  # inflow minus outflow per channel
    # Diagonal terms cancel in the flux; the weight is the asymmetric factor.
    rate = 0.0
    for a in range(s.n):
        if flux[a] == 0:
            continue
        if P[a] == 0:
            if flux[a] > 0:
                return float("inf")
            continue
        rate -= (1 + np.log(P[a] / c[a])) * flux[a]
    return float(rate)


def htheorem_trace(s: ScatteringSystem, steps: int) -> np.ndarray:
    """Entropies S_0, ..., S_steps along the master chain."""
    out = np.empty(steps + 1)
    out[0] = scattering_entropy(s)
    for k in range(steps):
        s = master_step(s)
        out[k + 1] = scattering_entropy(s)
    return out


def is_irreducible(T: np.ndarray) -> bool:
    from scipy.sparse.csgraph import connected_components

    ncomp, _ = connected_components(np.asarray(T) > 0, directed=True, connection="strong")
    return ncomp == 1


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random n x n unitary."""
    from scipy.stats import unitary_group

    return unitary_group.rvs(n, random_state=rng)


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (Z + Z.conj().T) / 2
