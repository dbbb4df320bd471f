"""Command-line experiment runner.

``localdyn run <kind>`` executes one experiment and writes ``<kind>.csv``
(fixed columns, 17 significant digits) and ``<kind>.json`` (checks,
violations, scalars) into the output directory. ``localdyn report <path>``
summarises previously written JSON files.

Exit codes: 0 when every check passes, 1 on a failed check or numerical
failure, 2 on a configuration error or a missing file.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import finslerflow as ff
from . import flowcore as fc
from . import quantumflow as qf
from . import thermolab as tl
from . import timefield as tf
from .errors import LocalDynError

OUT_ENV = "LOCALDYN_OUT"
DEFAULT_OUT = "results"

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


# -- configuration --------------------------------------------------------------


def _pos_int(minimum: int) -> Callable[[Any], int]:
    def conv(v):
        if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
            raise ValueError(f"expected an integer, got {v!r}")
        out = int(v)
        if out < minimum:
            raise ValueError(f"must be >= {minimum}, got {out}")
        return out

    return conv


def _pos_float(v) -> float:
    out = float(v)
    if not (math.isfinite(out) and out > 0):
        raise ValueError(f"must be a positive finite number, got {v!r}")
    return out


def _vector(v) -> list[float]:
    items = v.split(",") if isinstance(v, str) else list(v)
    out = [float(x) for x in items]
    if not out or not all(math.isfinite(x) for x in out):
        raise ValueError(f"expected a comma-separated list of finite numbers, got {v!r}")
    return out


CONVERTERS: dict[str, Callable[[Any], Any]] = {
    "p": _pos_int(2),
    "b": _vector,
    "grid": _pos_int(2),
    "n": _pos_int(2),
    "steps": _pos_int(1),
    "h": _pos_float,
    "samples": _pos_int(1),
    "seed": _pos_int(0),
    "tol": _pos_float,
}

# Per-kind parameters and defaults; ``tol`` is the primary bound of the kind.
KINDS: dict[str, dict[str, Any]] = {
    "zp": {"p": 7},
    "flow-axioms": {"samples": 1000, "tol": 1e-6},
    "randers": {"b": [0.3, 0.0], "grid": 64, "h": 1e-4, "tol": 1e-12},
    "riemann": {"samples": 1000, "h": 1e-4, "tol": 1e-8},
    "quantum": {"samples": 100, "n": 8, "h": 1e-3, "tol": 1e-12},
    "htheorem": {"n": 16, "steps": 1000, "tol": 1e-12},
    "thermo": {"n": 16, "steps": 1000, "tol": 1e-12},
    "arrow": {"grid": 40, "h": 1e-3, "tol": 1e-8},
}
COMMON = {"seed": 0}


def resolve_config(kind: str, config: dict[str, Any], flags: dict[str, Any]) -> dict[str, Any]:
    """Merge kind defaults, config-file values and flags (flags win) and validate."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    allowed = {**COMMON, **KINDS[kind]}
    merged = dict(allowed)
    for source, values in (("config", config), ("flag", flags)):
        for key, value in values.items():
            if value is None:
                continue
            if key == "kind":
                if value != kind:
                    raise ConfigError(f"config is for kind {value!r}, not {kind!r}")
                continue
            if key not in allowed:
                raise ConfigError(f"{source} parameter {key!r} does not apply to {kind!r}")
            try:
                merged[key] = CONVERTERS[key](value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from None
    if kind == "zp" and not tf._is_prime(merged["p"]):
        raise ConfigError(f"p must be prime, got {merged['p']}")
    if kind == "randers":
        if len(merged["b"]) != 2:
            raise ConfigError("b must have two components")
        if math.hypot(*merged["b"]) >= 1:
            raise ConfigError("|b| must be < 1 for a Randers metric")
    if kind == "quantum" and merged["n"] > 64:
        raise ConfigError("n must be <= 64")
    return merged


def load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


# -- results -------------------------------------------------------------------------


@dataclass
class Result:
    header: list[str]
    rows: list[list[Any]] = dc_field(default_factory=list)
    checks: list[dict[str, Any]] = dc_field(default_factory=list)
    violations: list[dict[str, Any]] = dc_field(default_factory=list)
    scalars: dict[str, Any] = dc_field(default_factory=dict)

    def check(self, name: str, value, bound, op: str = "<=") -> bool:
        value = float(value)
        ok = {
            "<=": value <= bound,
            ">=": value >= bound,
            "==": value == bound,
        }[op]
        self.checks.append({"name": name, "value": value, "op": op, "bound": bound, "ok": bool(ok)})
        return bool(ok)

    @property
    def ok(self) -> bool:
        return all(c["ok"] for c in self.checks)


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, Fraction):
        return str(x)
    raise TypeError(f"not serialisable: {type(x).__name__}")


def write_outputs(out: Path, kind: str, params: dict[str, Any], res: Result) -> tuple[Path, Path]:
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / f"{kind}.csv", out / f"{kind}.json"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(res.header)
        for row in res.rows:
            w.writerow([_cell(x) for x in row])
    summary = {
        "kind": kind,
        "params": params,
        "ok": res.ok,
        "checks": res.checks,
        "violations": res.violations,
        "scalars": res.scalars,
        "csv": csv_path.name,
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return csv_path, json_path


# -- experiments -----------------------------------------------------------------------


def _zp_time_parameter_candidates(f: tf.TimeField):
    p = f.p
    if p <= 11:
        for mask in range(1, 1 << p):
            yield frozenset(k for k in range(p) if mask >> k & 1)
        return
    # Every subgroup of the cyclic group Z_p is generated by one element.
    seen = set()
    for a in range(p):
        sub = frozenset((a * k) % p for k in range(p))
        if sub not in seen:
            seen.add(sub)
            yield sub


def exp_zp(params, rng) -> Result:
    p = params["p"]
    f = tf.TimeField.prime(p)
    res = Result(["a", "b", "d_ab", "d_ba"])
    for a in range(p):
        for b in range(p):
            res.rows.append([a, b, f.distance(a, b), f.distance(b, a)])

    axiom_violations = tf.check_quasi_metric_axioms(f, tf.all_triples(f))
    for v in axiom_violations[:100]:
        res.violations.append({"check": "quasi-metric", "detail": str(v)})
    res.check("quasi-metric axiom violations", len(axiom_violations), 0, "==")
    res.check("d_min", f.d_min, 1, "==")

    bad_balls = [k for k in range(p) if tf.ball(f, k, 0.25) != frozenset({k})]
    overlapping = [
        (k1, k2) for k1 in range(p) for k2 in range(k1 + 1, p)
        if not tf.hausdorff_ball_check(f, k1, k2, 0.25)
    ]
    res.violations += [{"check": "ball", "center": k} for k in bad_balls]
    res.violations += [{"check": "hausdorff", "pair": list(pr)} for pr in overlapping]
    res.check("radius-1/4 balls that are not singletons", len(bad_balls), 0, "==")
    res.check("overlapping radius-1/4 ball pairs", len(overlapping), 0, "==")

    whole = frozenset(range(p))
    n_candidates, stray = 0, []
    for cand in _zp_time_parameter_candidates(f):
        n_candidates += 1
        verdict = tf.is_time_parameter(f, tf.TimeParameter.of(f, cand))
        if bool(verdict) != (cand == whole):
            stray.append(sorted(cand))
    res.violations += [{"check": "time-parameter", "set": s} for s in stray[:100]]
    res.scalars["time_parameter_candidates"] = n_candidates
    res.check("time-parameter verdicts differing from 'J = Z_p'", len(stray), 0, "==")

    shift = fc.shift_flow(p)
    rep = fc.check_flow_axioms(shift, ((t1, t2, u) for t1 in range(p) for t2 in range(p) for u in range(p)))
    res.check("shift flow axiom violations (exhaustive)", len(rep.violations), 0, "==")
    res.scalars["xi_shift_identity"] = int(fc.xi_value(lambda u: u, shift, 0))
    return res


def _linear_generator(rng, m=3):
    return 0.5 * rng.standard_normal((m, m))


def _cubic_observable(rng, m):
    c0, c1 = rng.standard_normal(), rng.standard_normal(m)
    c2, c3 = rng.standard_normal((m, m)), rng.standard_normal(m)

    def ev(x):
        x = np.asarray(x)
        return c0 + x @ c1 + np.einsum("...i,ij,...j->...", x, c2, x) + (x**3) @ c3

    return fc.Observable("cubic", ev)


def exp_flow_axioms(params, rng) -> Result:
    n, tol = params["samples"], params["tol"]
    res = Result(["flow", "check", "n", "max_deviation", "bound", "ok"])

    def record(label, check, count, dev, bound, violations=()):
        ok = res.check(f"{label} {check}", dev, bound)
        res.rows.append([label, check, count, dev, bound, ok])
        for v in list(violations)[:20]:
            res.violations.append({"flow": label, "check": v.check, "index": v.index, "deviation": v.deviation})

    t1, t2 = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)

    trans = fc.translation_flow(rng.standard_normal(3))
    rep = fc.check_flow_axioms_batch(trans, t1, t2, rng.standard_normal((n, 3)), tol, relative=True)
    record("translation", "group-law", n, rep.max_deviation, tol, rep.violations)

    A = _linear_generator(rng)
    lin = fc.linear_flow(A)
    X = rng.standard_normal((n, 3))
    rep = fc.check_flow_axioms_batch(lin, t1, t2, X, tol, relative=True)
    record("linear", "group-law", n, rep.max_deviation, tol, rep.violations)

    perm = fc.permutation_flow([1, 2, 3, 4, 5, 6, 0])
    zs = [(int(a), int(b), int(u)) for a, b, u in rng.integers(0, 7, (n, 3))]
    rep = fc.check_flow_axioms(perm, zs)
    record("perm-Z7", "group-law", n, len(rep.violations), 0, rep.violations)

    F = ff.perturbed_randers([0.3, 0.0], eps=0.1)
    geo = ff.geodesic_flow(F)
    U = np.concatenate([rng.uniform(-1, 1, (n, 2)), 0.5 * rng.standard_normal((n, 2))], axis=1)
    rep = fc.check_flow_axioms_batch(geo, 0.5 * t1, 0.5 * t2, U, tol, relative=True)
    record("randers-geodesic", "group-law", n, rep.max_deviation, tol, rep.violations)

    # (Phi^c)^c = Phi
    cc = fc.conjugate(fc.conjugate(perm))
    mismatch = sum(cc(t, u) != perm(t, u) for t, _, u in zs)
    record("perm-Z7", "double-conjugate", n, mismatch, 0)
    lin_cc = fc.conjugate(fc.conjugate(lin))
    dev = max(float(np.max(np.abs(lin_cc(t, x) - lin(t, x)))) for t, x in zip(t1, X))
    record("linear", "double-conjugate", n, dev, 1e-10)
    dev = fc.check_conjugacy(lin, zip(t1, X))
    record("linear", "conjugate-inverts", n, dev, 1e-10)

    # symmetrized flows are reversible
    worst = 0.0
    for _ in range(100):
        sym = fc.symmetrize(fc.linear_flow(_linear_generator(rng)))
        omega = _cubic_observable(rng, 3)
        worst = max(worst, abs(fc.xi_value(omega, sym, rng.standard_normal(3))))
    record("sym-linear", "xi", 100, worst, 1e-8)
    return res


def _xi_batch(F: ff.RandersMetric, U: np.ndarray, h: float) -> np.ndarray:
    return fc.xi_value(ff.chord_energy_observable(F, U), ff.geodesic_flow(F), U, h)


def exp_randers(params, rng) -> Result:
    b, grid, h, tol = np.array(params["b"]), params["grid"], params["h"], params["tol"]
    F = ff.RandersMetric.constant(np.eye(2), b)
    g = np.linspace(-1, 1, grid)
    V = np.array([(v0, v1) for v0 in g for v1 in g if v0 != 0 or v1 != 0])
    X = np.zeros_like(V)
    xi_norm = ff.finsler_xi(F, (X, V))
    xi_4ab = ff.finsler_xi_closed_form(F, (X, V))
    xi_fd = _xi_batch(F, np.concatenate([X, V], axis=1), h)
    alg = np.abs(xi_norm - xi_4ab)
    scale = np.abs(xi_4ab)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale > 0, np.abs(xi_fd - xi_4ab) / scale, np.abs(xi_fd))
    res = Result(["v0", "v1", "xi_fd", "xi_norm", "xi_4ab", "algebra_abs_err", "fd_rel_err"])
    for i in range(len(V)):
        res.rows.append([V[i, 0], V[i, 1], xi_fd[i], xi_norm[i], xi_4ab[i], alg[i], rel[i]])
    res.check("Xi max-abs-err vs closed form", alg.max(), tol)
    res.check("finite-difference Xi max-rel-err vs 4 alpha beta", rel.max(), 1e-6)
    res.scalars["lambda_at_origin"] = ff.reversibility_function_lambda(F, np.zeros(2))
    res.scalars["xi_max_abs"] = float(np.abs(xi_4ab).max())
    for i in np.flatnonzero(rel > 1e-6)[:20]:
        res.violations.append({"check": "fd", "v": V[i].tolist(), "rel_err": float(rel[i])})
    return res


def exp_riemann(params, rng) -> Result:
    n, h, tol = params["samples"], params["h"], params["tol"]
    F = ff.perturbed_randers([0.0, 0.0], eps=0.1, riemannian=True)
    U = np.concatenate([rng.uniform(-1, 1, (n, 2)), rng.standard_normal((n, 2))], axis=1)
    xi = _xi_batch(F, U, h)
    res = Result(["x0", "x1", "v0", "v1", "xi"])
    res.rows = [[*U[i], xi[i]] for i in range(n)]
    support = float(np.mean(np.abs(xi) > tol))
    res.check("Xi support fraction", support, 0.0, "==")
    lam = max(ff.reversibility_function_lambda(F, U[i, :2], n=720) for i in range(min(n, 10)))
    res.check("reversibility function lambda - 1", abs(lam - 1), 1e-12)
    res.scalars["xi_max_abs"] = float(np.abs(xi).max())
    for i in np.flatnonzero(np.abs(xi) > tol)[:20]:
        res.violations.append({"check": "xi", "state": U[i].tolist(), "xi": float(xi[i])})
    return res


def exp_quantum(params, rng) -> Result:
    n_sys, nmax, h, tol = params["samples"], params["n"], params["h"], params["tol"]
    res = Result(["trial", "n", "xi_survival", "xi_amp_re", "xi_amp_im", "two_abs_H", "amp_err"])
    for k in range(n_sys):
        n = int(rng.integers(2, nmax + 1))
        H = qf.random_hermitian(n, rng)
        psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        q = qf.QuantumSystem(H, psi / np.linalg.norm(psi))
        s = qf.quantum_xi(q, "survival", h).xi_value
        a = qf.quantum_xi(q, "amplitude", h).xi_value
        two_h = 2 * abs(q.expectation())
        res.rows.append([k, n, s, a.real, a.imag, two_h, abs(abs(a) - two_h)])
    surv = max(abs(r[2]) for r in res.rows)
    amp = max(r[6] for r in res.rows)
    res.check("|Xi_survival| max", surv, tol)
    res.check("|Xi| - 2|<H>| max", amp, 1e-6)
    diag = qf.QuantumSystem(np.diag([1.0, -1.0]), np.array([1.0, 0.0]))
    xd = qf.quantum_xi(diag, "amplitude", h)
    res.check("H=diag(1,-1): ||Xi| - 2|", abs(abs(xd.xi_value) - 2), 1e-8)
    res.scalars["diag_xi"] = [xd.xi_value.real, xd.xi_value.imag]
    res.scalars["sign_note"] = qf.AMPLITUDE_SIGN_NOTE
    return res


def _htheorem_run(n: int, steps: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Entropy trace of the chain from a delta start under a Haar-random S."""
    S = qf.random_unitary(n, rng)
    P = np.zeros(n)
    P[0] = 1.0
    return qf.htheorem_trace(qf.ScatteringSystem(S, P), steps), S


def exp_htheorem(params, rng) -> Result:
    n, steps, tol = params["n"], params["steps"], params["tol"]
    trace, S = _htheorem_run(n, steps, rng)
    irreducible = qf.is_irreducible(qf.transition_matrix(S))
    dS = np.diff(trace)
    res = Result(["step", "S", "dS"])
    res.rows = [[k, trace[k], dS[k - 1] if k else 0.0] for k in range(steps + 1)]
    res.check("min step dS", dS.min(), -tol, ">=")
    for k in np.flatnonzero(dS < -tol)[:20]:
        res.violations.append({"check": "monotone", "step": int(k + 1), "dS": float(dS[k])})
    res.scalars["irreducible"] = irreducible
    if irreducible:
        res.check("|S_final - ln n|", abs(trace[-1] - math.log(n)), 1e-6)
    had = qf.ScatteringSystem(np.array([[1, 1], [1, -1]]) / math.sqrt(2), np.array([1.0, 0.0]))
    d_had = qf.scattering_entropy(qf.master_step(had)) - qf.scattering_entropy(had)
    res.check("Hadamard delta-start |dS - ln 2|", abs(d_had - math.log(2)), 1e-12)
    res.scalars["S_final"] = float(trace[-1])
    P = rng.dirichlet(np.ones(n))
    res.scalars["entropy_rate_interior_sample"] = qf.entropy_rate(qf.ScatteringSystem(S, P))
    return res


def _value_fn(name: str) -> tl.EntropyFunction:
    return tl.EntropyFunction(lambda t, s: s, name)


def exp_thermo(params, rng) -> Result:
    n, steps, tol = params["n"], params["steps"], params["tol"]
    res = Result(["check", "case", "expected", "observed", "ok"])

    def record(check, case, expected, observed, detail=None):
        ok = expected == observed
        res.rows.append([check, case, expected, observed, ok])
        res.checks.append({"name": f"{check}: {case}", "value": observed, "op": "==", "bound": expected, "ok": ok})
        if not ok:
            res.violations.append({"check": check, "case": case, "detail": detail})

    inv_sq = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, 1001) ** 2)])
    harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, 1001))])
    families = [
        ("sum 1/k^2, delta=-1", lambda N: inv_sq[N], -1.0, True),
        ("P=N, delta=-1", lambda N: float(N), -1.0, False),
        ("P=const, delta=-0.5", lambda N: 2.5, -0.5, True),
        ("sum 1/k, delta=-1", lambda N: harmonic[N], -1.0, False),
    ]
    for name, P, delta, expected in families:
        rep = tl.asymptotic_thermo_check(P, delta)
        record("asymptotic", name, int(expected), int(rep.ok), rep.reason)

    L1 = tl.EntropyFunction(lambda t, u: float(np.sum(u**2)), "L1")
    L2 = tl.EntropyFunction(lambda t, u: float(np.sum(np.abs(u))), "L2")
    samples = [(float(rng.uniform()), rng.standard_normal(3), rng.standard_normal(3)) for _ in range(200)]
    composites = [
        ("additive", lambda t, s: L1(t, s[0]) + L2(t, s[1]), True),
        ("positive coupling", lambda t, s: L1(t, s[0]) + L2(t, s[1]) + float(s[0] @ s[1]) ** 2, True),
        ("constant deficit", lambda t, s: L1(t, s[0]) + L2(t, s[1]) - 1.0, False),
    ]
    for name, fn, expected in composites:
        rep = tl.extensivity_check(tl.EntropyFunction(fn, name), L1, L2, samples)
        record("extensivity", name, int(expected), int(rep.ok))
        if not expected:
            everywhere = len(rep.violations) == len(samples)
            record("extensivity", f"{name} fails on every sample", 1, int(everywhere))

    trace, _ = _htheorem_run(n, steps, rng)
    L = _value_fn("S")
    traj = list(enumerate(trace))
    rep = tl.monotonicity_check(L, traj, tol=tol)
    record("monotonicity", "H-theorem trace", 1, int(rep.ok))
    rep = tl.monotonicity_check(L, [(k, 1.0) for k in range(10)], tol=tol)
    record("monotonicity", "constant", 1, int(rep.ok))
    k = steps // 2
    bad = trace.copy()
    bad[k] = bad[k - 1] - 1e-3
    rep = tl.monotonicity_check(L, list(enumerate(bad)), tol=tol)
    record("monotonicity", f"injected drop at {k}", k, rep.indices[0] if len(rep.indices) == 1 else -1)

    H = qf.random_hermitian(4, rng)
    psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    q = qf.QuantumSystem(H, psi / np.linalg.norm(psi))
    xi_amp = abs(qf.quantum_xi(q, "amplitude").xi_value)
    dS = np.diff(trace)
    arrow = tl.arrow_coincidence(np.full(dS.shape, xi_amp), dS, tol)
    record("arrow", "aligned positive traces", 1.0, arrow.fraction)
    res.scalars["arrow_statuses"] = {s: arrow.status.count(s) for s in sorted(set(arrow.status))}
    return res


def exp_arrow(params, rng) -> Result:
    grid, h, tol = params["grid"], params["h"], params["tol"]
    xs = np.linspace(-1, 1, grid)
    phi = fc.translation_flow(1.0)
    omega = fc.Observable("x^2", lambda x: float(np.sum(np.asarray(x) ** 2)))
    path = [np.array([x]) for x in xs]
    rep = fc.detect_turning_points(omega, phi, path, h, tol)
    res = Result(["x", "xi", "sign"])
    res.rows = [[xs[i], rep.xi_values[i], rep.signs[i]] for i in range(grid)]
    err = max(abs(v - 4 * x) for v, x in zip(rep.xi_values, xs))
    res.check("max |Xi - 4x|", err, tol)
    res.check("number of sign-flip brackets", len(rep.brackets), 1, "==")
    if rep.brackets:
        i, j = rep.brackets[0]
        width = xs[1] - xs[0]
        res.check("bracket contains x=0", int(xs[i] <= 0 <= xs[j]), 1, "==")
        res.check("bracket width - grid spacing", abs((xs[j] - xs[i]) - width), 1e-12)
        left, right = rep.signs[: i + 1], rep.signs[j:]
        flip = all(s <= 0 for s in left) and all(s >= 0 for s in right) and left[0] == -1 and right[-1] == 1
        res.check("arrow signs flip across the bracket", int(flip), 1, "==")
        res.scalars["bracket"] = [float(xs[i]), float(xs[j])]
    res.scalars["segments"] = [list(s) for s in rep.segments]
    return res


EXPERIMENTS: dict[str, Callable[[dict, np.random.Generator], Result]] = {
    "zp": exp_zp,
    "flow-axioms": exp_flow_axioms,
    "randers": exp_randers,
    "riemann": exp_riemann,
    "quantum": exp_quantum,
    "htheorem": exp_htheorem,
    "thermo": exp_thermo,
    "arrow": exp_arrow,
}


def run_experiment(kind: str, params: dict[str, Any], out: Path) -> tuple[int, Result]:
    rng = np.random.default_rng(params["seed"])
    try:
        res = EXPERIMENTS[kind](params, rng)
    except (LocalDynError, ArithmeticError, np.linalg.LinAlgError) as exc:
        res = Result(["error"], rows=[[type(exc).__name__]])
        res.violations.append({"check": "numerical", "error": type(exc).__name__, "message": str(exc)})
        res.checks.append({"name": "numerical failure", "value": 1, "op": "==", "bound": 0, "ok": False})
    write_outputs(out, kind, params, res)
    return (EXIT_OK if res.ok else EXIT_FAIL), res


# -- report ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3g}"
    return json.dumps(v, default=_json_default)


def summarize(summary: dict[str, Any]) -> list[str]:
    lines = [f"{summary['kind']}: {'PASS' if summary['ok'] else 'FAIL'}"]
    for c in summary["checks"]:
        tag = "PASS" if c["ok"] else "FAIL"
        lines.append(f"  [{tag}] {c['name']} = {_fmt(c['value'])} ({c['op']} {_fmt(c['bound'])})")
    for key in sorted(summary.get("scalars", {})):
        lines.append(f"  {key}: {_fmt(summary['scalars'][key])}")
    if summary["violations"]:
        lines.append(f"  violations: {len(summary['violations'])}")
    return lines


def report(path: str) -> int:
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.json"))
    elif p.suffix == ".csv":
        files = [p.with_suffix(".json")]
    else:
        files = [p]
    if not files or not all(f.is_file() for f in files):
        missing = [str(f) for f in files if not f.is_file()] or [str(p)]
        print(f"error: missing result file(s): {', '.join(missing)}", file=sys.stderr)
        return EXIT_CONFIG
    ok = True
    for f in files:
        try:
            summary = json.loads(f.read_text(encoding="utf-8"))
            lines = summarize(summary)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            print(f"error: {f} is not a result summary ({exc})", file=sys.stderr)
            return EXIT_CONFIG
        ok &= bool(summary["ok"])
        print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


# -- entry point ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="localdyn", description="Local dynamics experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("kind", help=f"one of: {', '.join(KINDS)}")
    run.add_argument("--config", help="JSON file with parameters (flags take precedence)")
    run.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    run.add_argument("--seed", help="random seed")
    run.add_argument("--tol", help="primary tolerance of the experiment")
    run.add_argument("--p", help="prime modulus (zp)")
    run.add_argument("--b", help="one-form components, comma-separated (randers)")
    run.add_argument("--grid", help="grid points per axis (randers, arrow)")
    run.add_argument("--n", help="dimension or channel count (quantum, htheorem, thermo)")
    run.add_argument("--steps", help="chain steps (htheorem, thermo)")
    run.add_argument("--h", help="finite-difference step")
    run.add_argument("--samples", help="number of sampled trials")

    rep = sub.add_parser("report", help="summarise result files")
    rep.add_argument("path", help="result directory, JSON summary or CSV")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report":
        return report(args.path)
    flags = {k: getattr(args, k) for k in ("seed", "tol", "p", "b", "grid", "n", "steps", "h", "samples")}
    try:
        params = resolve_config(args.kind, load_config(args.config), flags)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    status, res = run_experiment(args.kind, params, out)
    print("\n".join(summarize({"kind": args.kind, "ok": res.ok, "checks": res.checks,
                                 "violations": res.violations, "scalars": res.scalars})))
    return status


if __name__ == "__main__":
    sys.exit(main())
