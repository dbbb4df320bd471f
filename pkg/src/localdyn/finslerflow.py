"""Randers metrics F(x, y) = sqrt(a_x(y, y)) + b_x(y) and their geodesic flows.

Metric fields are plain callables that broadcast over leading axes:
``a(x)`` maps ``(..., m)`` to ``(..., m, m)`` and ``b(x)`` maps ``(..., m)``
to ``(..., m)``. Spatial derivatives are central differences. Every routine
below accepts single points or batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import GeodesicIntegrationError, InvalidInputError, InvalidMetricError
from .flowcore import Flow, Observable, StateSpace
from .timefield import REALS

__all__ = [
    "RandersMetric",
    "GeodesicState",
    "Trajectory",
    "finsler_norm",
    "finsler_xi",
    "finsler_xi_closed_form",
    "geodesic_acceleration",
    "integrate_geodesic",
    "geodesic_flow",
    "chord_energy_observable",
    "reversibility_function_lambda",
    "perturbed_randers",
]

FD_STEP = 1e-5


@dataclass(frozen=True)
class RandersMetric:
    dim: int
    a: Callable[[np.ndarray], np.ndarray] = dc_field(compare=False)
    b: Callable[[np.ndarray], np.ndarray] = dc_field(compare=False)
    fd_step: float = FD_STEP
    name: str = "randers"

    @classmethod
    def constant(cls, a, b, name: str = "randers-const") -> "RandersMetric":
        a = np.array(a, dtype=float)
        b = np.array(b, dtype=float)
        m = b.shape[0]
        if a.shape != (m, m):
            raise InvalidInputError(f"a has shape {a.shape}, expected {(m, m)}")
        return cls(
            m,
            lambda x: np.broadcast_to(a, np.shape(x)[:-1] + (m, m)),
            lambda x: np.broadcast_to(b, np.shape(x)[:-1] + (m,)),
            name=name,
        )

    @classmethod
    def riemannian(cls, a: Callable[[np.ndarray], np.ndarray], dim: int, name: str = "riemann") -> "RandersMetric":
        return cls(dim, a, lambda x: np.zeros(np.shape(x)[:-1] + (dim,)), name=name)

    def b_norm(self, x) -> np.ndarray:
        """Dual norm sqrt(b a^{-1} b) of the one-form at x."""
        x = np.asarray(x, float)
        A, B = self.a(x), self.b(x)
        return np.sqrt(np.einsum("...i,...i->...", B, np.linalg.solve(A, B[..., None])[..., 0]))

    def validate(self, points) -> None:
        """Raise :class:`InvalidMetricError` unless a is SPD and ||b|| < 1 at every point."""
        pts = np.atleast_2d(np.asarray(points, float))
        A = np.asarray(self.a(pts))
        if not np.allclose(A, np.swapaxes(A, -1, -2), atol=1e-12):
            raise InvalidMetricError("a(x) is not symmetric")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError as exc:
            raise InvalidMetricError("a(x) is not positive definite") from exc
        bn = self.b_norm(pts)
        if np.any(bn >= 1):
            i = int(np.argmax(bn))
            raise InvalidMetricError(f"||b|| = {bn[i]:.6g} >= 1 at x = {pts[i]}")

    def derivatives(self, x):
        """Central-difference spatial derivatives (da/dx_k, db/dx_k), k on axis -3 / -2."""
        x = np.asarray(x, float)
        h = self.fd_step
        da, db = [], []
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = h
            da.append((self.a(x + e) - self.a(x - e)) / (2 * h))
            db.append((self.b(x + e) - self.b(x - e)) / (2 * h))
        return np.stack(da, axis=-3), np.stack(db, axis=-2)


def perturbed_randers(b0, eps: float = 0.1, riemannian: bool = False) -> RandersMetric:
    """Smooth position-dependent Randers metric around (I, b0).

    a(x) = (1 + eps sin x_0 cos x_{m-1}) I + (eps/2) s s^T with s = sin x,
    b(x) = b0 + (eps/5) cos x (or 0 when ``riemannian``).
    """
    b0 = np.asarray(b0, float)
    m = b0.shape[0]
    eye = np.eye(m)

    def a(x):
        x = np.asarray(x, float)
        s = np.sin(x)
        scal = 1 + eps * np.sin(x[..., 0]) * np.cos(x[..., -1])
        return scal[..., None, None] * eye + 0.5 * eps * s[..., :, None] * s[..., None, :]

    def b(x):
        x = np.asarray(x, float)
        if riemannian:
            return np.zeros(x.shape)
        return b0 + 0.2 * eps * np.cos(x)

    return RandersMetric(m, a, b, name="riemann-perturbed" if riemannian else "randers-perturbed")


def _alpha_beta(F: RandersMetric, x, y):
    A, B = F.a(x), F.b(x)
    alpha = np.sqrt(np.einsum("...i,...ij,...j->...", y, A, y))
    beta = np.einsum("...i,...i->...", B, y)
    return alpha, beta


def finsler_norm(F: RandersMetric, x, y, check: bool = True):
    """F(x, y) = sqrt(y^T a(x) y) + b(x) . y for y != 0."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any(np.all(y == 0, axis=-1)):
        raise InvalidInputError("Finsler norm is evaluated off the zero section (y != 0)")
    if check and np.any(F.b_norm(x) >= 1):
        raise InvalidMetricError("||b|| >= 1: F is not positive")
    alpha, beta = _alpha_beta(F, x, y)
    return alpha + beta


@dataclass(frozen=True)
class GeodesicState:
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, float)
        v = np.asarray(self.v, float)
        if x.shape != v.shape:
            raise InvalidInputError("x and v must have the same shape")
        if not np.any(v):
            raise InvalidInputError("geodesic states need v != 0")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.v])

    @classmethod
    def from_vector(cls, u) -> "GeodesicState":
        u = np.asarray(u, float)
        m = u.shape[-1] // 2
        return cls(u[:m], u[m:])


def _xv(F: RandersMetric, s):
    if isinstance(s, GeodesicState):
        return s.x, s.v
    x, v = s
    return np.asarray(x, float), np.asarray(v, float)


def finsler_xi(F: RandersMetric, s) -> np.ndarray:
    """F^2(x, v) - F^2(x, -v), evaluated directly from the norm."""
    x, v = _xv(F, s)
    return finsler_norm(F, x, v) ** 2 - finsler_norm(F, x, -v) ** 2


def finsler_xi_closed_form(F: RandersMetric, s) -> np.ndarray:
    """4 sqrt(v^T a v) (b . v), the Randers reduction of :func:`finsler_xi`."""
    x, v = _xv(F, s)
    alpha, beta = _alpha_beta(F, x, v)
    return 4 * alpha * beta


def geodesic_acceleration(F: RandersMetric, x, v) -> np.ndarray:
    """Second derivative of x along a geodesic of the energy functional int F^2 dt.

    Solves the Euler-Lagrange system L_vv x'' = L_x - L_vx x' with L = F^2;
    v-derivatives are analytic, x-derivatives come from the metric's finite
    differences.
    """
    A, B = F.a(x), F.b(x)
    dA, dB = F.derivatives(x)
    av = np.einsum("...ij,...j->...i", A, v)
    alpha = np.sqrt(np.einsum("...i,...i->...", v, av))
    beta = np.einsum("...i,...i->...", B, v)
    Fn = alpha + beta
    al = alpha[..., None]

    Fv = av / al + B
    Fvv = (A - av[..., :, None] * av[..., None, :] / al[..., None] ** 2) / al[..., None]
    Lvv = 2 * (Fv[..., :, None] * Fv[..., None, :] + Fn[..., None, None] * Fvv)

    dAv = np.einsum("...kij,...j->...ki", dA, v)
    vdAv = np.einsum("...i,...ki->...k", v, dAv)
    Fx = vdAv / (2 * al) + np.einsum("...ki,...i->...k", dB, v)
    Lx = 2 * Fn[..., None] * Fx

    # dFv[k, i] = d/dx_k (dF/dv_i)
    dFv = dAv / al[..., None] - av[..., None, :] * vdAv[..., :, None] / (2 * al[..., None] ** 3) + dB
    Lvx_v = 2 * (Fv * np.einsum("...k,...k->...", Fx, v)[..., None]
                 + Fn[..., None] * np.einsum("...ki,...k->...i", dFv, v))
    return np.linalg.solve(Lvv, (Lx - Lvx_v)[..., None])[..., 0]


def _rhs(F: RandersMetric, u):
    m = F.dim
    x, v = u[..., :m], u[..., m:]
    return np.concatenate([v, geodesic_acceleration(F, x, v)], axis=-1)


def _rk4(F: RandersMetric, u, dt):
    k1 = _rhs(F, u)
    k2 = _rhs(F, u + 0.5 * dt * k1)
    k3 = _rhs(F, u + 0.5 * dt * k2)
    k4 = _rhs(F, u + dt * k3)
    return u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    F: np.ndarray

    def header(self) -> list[str]:
        m = self.x.shape[1]
        return ["t"] + [f"x{i}" for i in range(m)] + [f"v{i}" for i in range(m)] + ["F"]

    def rows(self):
        for i in range(len(self.t)):
            yield [self.t[i], *self.x[i], *self.v[i], self.F[i]]

    @property
    def max_relative_F_drift(self) -> float:
        return float(np.max(np.abs(self.F - self.F[0])) / abs(self.F[0]))


def integrate_geodesic(F: RandersMetric, s0: GeodesicState, T: float, steps: int) -> Trajectory:
    """Fixed-step RK4 integration of the geodesic through s0 over [0, T]."""
    if steps < 1:
        raise InvalidInputError("steps must be >= 1")
    m = F.dim
    dt = T / steps
    u = np.empty((steps + 1, 2 * m))
    u[0] = s0.to_vector()
    for i in range(steps):
        nxt = _rk4(F, u[i], dt)
        if not np.all(np.isfinite(nxt)):
            raise GeodesicIntegrationError("non-finite state", i + 1)
        u[i + 1] = nxt
    x, v = u[:, :m], u[:, m:]
    return Trajectory(np.linspace(0.0, T, steps + 1), x, v, finsler_norm(F, x, v, check=False))


def geodesic_flow(F: RandersMetric, max_step: float = 1e-2) -> Flow:
    """Geodesic flow on TM as a :class:`Flow` over R; states are (x, v) stacked.

    ``t`` may be a scalar or one time per row of a state batch; each call
    uses ceil(max|t| / max_step) RK4 steps.
    """
    m = F.dim

    def evolve(t, u):
        u = np.asarray(u, float)
        t = np.asarray(t, float)
        tmax = float(np.max(np.abs(t), initial=0.0))
        if tmax == 0:
            return u.copy()
        n = max(1, math.ceil(tmax / max_step - 1e-9))
        dt = (t / n)[..., None]
        for i in range(n):
            u = _rk4(F, u, dt)
            if not np.all(np.isfinite(u)):
                raise GeodesicIntegrationError("non-finite state", i + 1)
        return u

    return Flow(evolve, REALS, StateSpace.real(2 * m), name=f"geodesic[{F.name}]")


def chord_energy_observable(F: RandersMetric, anchor) -> Observable:
    """Energy of the straight chord from the anchor point A to the current point.

    With anchor state (A, V) and y = x - A,

        Omega(x) = |V|_a F^2(A, y) / |y|_a,

    i.e. the energy F^2 of the chord traversed at the anchor's a-speed. It is
    positively homogeneous of degree 1 in y, so along the geodesic through
    (A, V) the forward and conjugate flows yield
    Xi = F^2(A, V) - F^2(A, -V).
    """
    anchor = np.asarray(anchor, float)
    m = F.dim
    A, V = anchor[..., :m], anchor[..., m:]
    speed, _ = _alpha_beta(F, A, V)

    def ev(u):
        y = np.asarray(u, float)[..., :m] - A
        alpha, beta = _alpha_beta(F, A, y)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = speed * (alpha + beta) ** 2 / alpha
        return np.where(alpha > 0, out, 0.0)

    return Observable("chord-energy", ev)


def reversibility_function_lambda(F: RandersMetric, x, directions=None, n: int = 3600, seed: int = 0) -> float:
    """max over sampled directions y of F(x, -y) / F(x, y); 1 iff reversible on the sample.

    Directions are normalised to the unit a-sphere. Default sample: ``n``
    equally spaced angles in 2-D, ``n`` seeded Gaussian directions otherwise.
    """
    x = np.asarray(x, float)
    if directions is None:
        if F.dim == 2:
            th = np.linspace(0, 2 * np.pi, n, endpoint=False)
            directions = np.stack([np.cos(th), np.sin(th)], axis=-1)
        else:
            directions = np.random.default_rng(seed).standard_normal((n, F.dim))
    y = np.atleast_2d(np.asarray(directions, float))
    if y.shape[0] == 0:
        raise InvalidInputError("empty direction sample")
    xs = np.broadcast_to(x, y.shape)
    alpha, _ = _alpha_beta(F, xs, y)
    y = y / alpha[:, None]
    ratio = finsler_norm(F, xs, -y) / finsler_norm(F, xs, y)
    return float(np.max(ratio))
