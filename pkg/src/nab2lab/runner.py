"""Experiment kinds, their parameters and CSV records."""
from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from . import lie
from .algebra import (GaugeTransform, Splitting, TwoForm, gauge_apply_splitting,
                      gauge_apply_two_form, omega_exterior_derivative)
from .bch import (ColorPath, adjoint_log_oracle, cbch_second_order, cbch_solve,
                  loop_commutator_experiment)
from .config import ConfigError, ExperimentSpec, tensor_array
from .disk import (BoundaryFourier, DiskTwoFormFT, abelian_obstruction, pure_gauge_boundary,
                   solve_extension)
from .lcg import Lcg64
from .poly import PolyField, poly_mul
from .transport import (MatrixPath, StraightenedStrip, abelian_transport_oracle,
                        conjugation_oracle, one_dim_obstruction, transport_splitting)
from .triangle import (ExactVanishing, JetTable, OmegaJet, boundary_jets_from_bulk,
                       flat_jet_extension, residual_slope, triangle_I1, triangle_I2,
                       triangle_I3)

__all__ = ["KINDS", "Context", "ResultRecord", "prepare", "run_experiment", "write_csv"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Kind:
    name: str
    description: str
    params: dict
    fields: tuple
    boundaries: tuple
    columns: tuple
    plan: Callable
    summarize: Callable


@dataclass
class ResultRecord:
    row: dict
    wall_time: float = 0.0


@dataclass
class Context:
    spec: ExperimentSpec
    kind: Kind
    p: dict
    N: int
    structure: np.ndarray | None
    fields: dict = field(default_factory=dict)
    boundaries: dict = field(default_factory=dict)


# -- helpers --------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    arr = np.asarray(v, dtype=float).ravel()
    return ";".join("%.17g" % x for x in arr)


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _slope(pairs) -> float:
    try:
        return residual_slope(pairs)
    except ExactVanishing:
        return float("inf")


def rand_poly(rng: Lcg64, shape, degree: int, cap: int, amp: float) -> PolyField:
    """Coefficients uniform in ``[-amp, amp]`` for every slot and every monomial of degree <= ``degree``."""
    c = np.zeros(tuple(shape) + (cap + 1, cap + 1))
    for slot in np.ndindex(*shape):
        for d in range(degree + 1):
            for i in range(d, -1, -1):
                c[slot + (i, d - i)] = rng.uniform(-amp, amp)
    return PolyField(c, cap)


def rand_boundary(rng: Lcg64, N: int, modes: int, amp: float, n_max: int) -> BoundaryFourier:
    table = {0: [rng.uniform(-amp, amp) for _ in range(N)]}
    for n in range(1, modes + 1):
        table[n] = [complex(rng.uniform(-amp, amp), rng.uniform(-amp, amp)) for _ in range(N)]
    return BoundaryFourier.from_modes(table, N, n_max)


def rand_antisymmetric(rng: Lcg64, N: int, amp: float) -> np.ndarray:
    C = np.zeros((N, N, N))
    for a in range(N):
        for b in range(N):
            for c in range(b + 1, N):
                C[a, b, c] = rng.uniform(-amp, amp)
                C[a, c, b] = -C[a, b, c]
    return C


def _omega(ctx: Context, cap: int) -> TwoForm:
    """2-form from the configured fields plus the constant structure tensor."""
    N = ctx.N
    parts = {"A": [N], "B_x": [N, N], "B_y": [N, N], "C": [N, N, N]}
    built = {}
    for name, shape in parts.items():
        f = ctx.fields.get(name)
        built[name] = f.with_cap(cap) if f is not None else PolyField.zeros(shape, cap)
    C = built["C"]
    if ctx.structure is not None:
        C = C + PolyField.constant(ctx.structure, cap)
    c = C.coeffs
    C = PolyField(0.5 * (c - np.swapaxes(c, 1, 2)), cap)
    return TwoForm(built["A"], built["B_x"], built["B_y"], C)


# -- disk-obstruction -------------------------------------------------------

def _plan_disk(ctx: Context, rng: Lcg64):
    p = ctx.p
    mode = p["mode"]
    n_max, k_max = p["n_max"], p["k_max"]
    N = ctx.N

    def solve(w: TwoForm, bnd: BoundaryFourier, nm: int, km: int):
        wf = DiskTwoFormFT.from_two_form(w, nm, km)
        return solve_extension(wf, bnd, p["fp_tol"], p["fp_max"])

    def row(case, nm, km, sol, ref=None, point="case"):
        r = {"point": point, "case": case, "n_max": nm, "k_max": km,
             "obstruction": sol.obstruction, "holonomy": 2 * np.pi * sol.obstruction,
             "residual": sol.residual,
             "iterations": sol.iterations}
        ok = sol.residual <= p["residual_tol"]
        if ref is not None:
            err = float(np.abs(sol.obstruction - ref).max())
            r.update(reference=ref, abs_error=err)
            ok &= err <= p["tol"]
        r["status"] = _status(ok)
        return [r]

    if mode == "fixed":
        def point():
            cap = max([f.cap for f in ctx.fields.values()] + [0])
            w = _omega(ctx, cap)
            bnd = ctx.boundaries.get("phi", BoundaryFourier.zeros(N, n_max)).with_n_max(n_max)
            sol = solve(w, bnd, n_max, k_max)
            ref = None
            if p["expected"]:
                ref = np.array(p["expected"], float)
            elif N == 1 and w.B_x.max_abs() == w.B_y.max_abs() == w.C.max_abs() == 0:
                ref = np.array([abelian_obstruction(w.A, bnd)])
            return row(0, n_max, k_max, sol, ref)
        return [point]

    if mode in ("random-abelian", "random-nonabelian"):
        seeds = rng.spawn(p["cases"])

        def make(case, seed):
            def point():
                r = Lcg64(seed)
                deg = p["degree"]
                if mode == "random-abelian":
                    A = rand_poly(r, [1], deg, deg, p["amplitude"])
                    w = TwoForm(A, PolyField.zeros([1, 1], deg), PolyField.zeros([1, 1], deg),
                                PolyField.zeros([1, 1, 1], deg))
                    bnd = rand_boundary(r, 1, p["modes"], p["boundary_amplitude"], n_max)
                    sol = solve(w, bnd, n_max, k_max)
                    return row(case, n_max, k_max, sol, np.array([abelian_obstruction(A, bnd)]))
                w = TwoForm(rand_poly(r, [N], deg, deg, p["amplitude"]),
                            rand_poly(r, [N, N], deg, deg, p["amplitude"]),
                            rand_poly(r, [N, N], deg, deg, p["amplitude"]),
                            PolyField.constant(ctx.structure, deg))
                bnd = rand_boundary(r, N, p["modes"], p["boundary_amplitude"], n_max)
                return row(case, n_max, k_max, solve(w, bnd, n_max, k_max))
            return point
        return [make(i, s) for i, s in enumerate(seeds)]

    if mode == "pure-gauge":
        # one gauge function shared by the whole K sweep
        r = Lcg64(rng.spawn(1)[0])
        quad = r.uniform_array((N, 6))      # 1, x, y, x^2, xy, y^2

        def F(x, y):
            mon = np.array([1, x, y, x * x, x * y, y * y])
            dx = np.array([0, 1, 0, 2 * x, y, 0])
            dy = np.array([0, 0, 1, 0, x, 2 * y])
            return quad @ mon, quad @ dx, quad @ dy

        S = lie.StructureTensor(ctx.structure)
        bnd = pure_gauge_boundary(S, F, p["s"], n_max)
        w = TwoForm.from_structure(ctx.structure, 0)

        def make(km):
            def point():
                sol = solve(w, bnd, n_max, km)
                rows = row(0, n_max, km, sol)
                rows[0]["norm"] = float(np.linalg.norm(sol.obstruction))
                return rows
            return point
        return [make(int(k)) for k in p["k_list"]]

    raise ConfigError(f"unknown disk-obstruction mode {mode!r}")


def _summarize_disk(ctx: Context, rows: list[dict]) -> list[dict]:
    out = []
    cases = [r for r in rows if r.get("point") == "case"]
    errs = [r["abs_error"] for r in cases if "abs_error" in r]
    if errs:
        out.append({"point": "summary", "metric": "max_abs_error", "value": max(errs)})
    res = [r["residual"] for r in cases if "residual" in r]
    if res:
        out.append({"point": "summary", "metric": "max_residual", "value": max(res)})
    ok = all(r.get("status") == "pass" for r in cases)
    if ctx.p["mode"] == "pure-gauge":
        norms = [r["norm"] for r in cases if "norm" in r]
        if len(norms) == len(ctx.p["k_list"]) and len(norms) >= 2:
            ratio = norms[-1] / norms[0] if norms[0] > 0 else 0.0
            out.append({"point": "summary", "metric": "norm_ratio", "value": ratio})
            ok &= ratio <= ctx.p["ratio_max"]
        else:
            ok = False
    out.append({"point": "summary", "metric": "all_pass", "value": int(ok), "status": _status(ok)})
    return out


# -- transport --------------------------------------------------------------

def _sup_x(c: np.ndarray, ref: np.ndarray) -> float:
    D = max(c.shape[-1], ref.shape[-1])
    a = np.zeros(c.shape[:-1] + (D,))
    b = np.zeros(ref.shape[:-1] + (D,))
    a[..., : c.shape[-1]] = c
    b[..., : ref.shape[-1]] = ref
    xs = np.linspace(0.0, 1.0, 101)
    return float(np.abs((a - b) @ (xs[None, :] ** np.arange(D)[:, None])).max())


def _plan_transport(ctx: Context, rng: Lcg64):
    p = ctx.p
    mode = p["mode"]
    seeds = rng.spawn(p["cases"])
    Y = p["Y"]

    if mode == "abelian":
        def make(case, seed):
            def point():
                r = Lcg64(seed)
                deg = p["degree"]
                A = rand_poly(r, [1], deg, deg, p["amplitude"])
                py = rand_poly(r, [1], deg, deg, p["amplitude"])
                init = r.uniform_array((1, deg + 1), -p["amplitude"], p["amplitude"])
                w = TwoForm(A, PolyField.zeros([1, 1], deg), PolyField.zeros([1, 1], deg),
                            PolyField.zeros([1, 1, 1], deg))
                strip = StraightenedStrip(w, py, init, Y)
                ref = abelian_transport_oracle(A, py, init, Y)
                rows = []
                for steps in [p["y_steps"]] + [int(s) for s in p["steps_list"]]:
                    res = transport_splitting(strip, p["x_cap"], steps)
                    err = _sup_x(res.slices[-1], ref)
                    main = steps == p["y_steps"] and not rows
                    rows.append({"point": "case" if main else "order", "case": case,
                                 "steps": steps, "result": res.slices[-1], "reference": ref,
                                 "abs_error": err, "max_dropped": res.max_dropped,
                                 "status": _status(err <= p["tol"]) if main else ""})
                return rows
            return point
        return [make(i, s) for i, s in enumerate(seeds)]

    if mode == "conjugation":
        n = p["n"]
        C = lie.gl(n).C

        def make(case, seed):
            def point():
                r = Lcg64(seed)
                M = r.uniform_array((n, n), -p["amplitude"], p["amplitude"])
                P0 = r.uniform_array((n, n), -p["amplitude"], p["amplitude"])
                cap = 1
                w = TwoForm(PolyField.zeros([n * n], cap), PolyField.zeros([n * n, n * n], cap),
                            PolyField.zeros([n * n, n * n], cap), PolyField.constant(C, cap))
                strip = StraightenedStrip(w, PolyField.constant(M.ravel(), cap),
                                          P0.reshape(-1, 1), Y)
                res = transport_splitting(strip, p["x_cap"], p["y_steps"])
                got = res.slices[-1][:, 0].reshape(n, n)
                ref = conjugation_oracle(M, P0, Y)
                err = float(np.abs(got - ref).max())
                return [{"point": "case", "case": case, "steps": p["y_steps"], "result": got,
                         "reference": ref, "abs_error": err, "max_dropped": res.max_dropped,
                         "status": _status(err <= p["tol"])}]
            return point
        return [make(i, s) for i, s in enumerate(seeds)]

    if mode == "one-dim":
        dim = p["dim"]

        def make(case, seed):
            def point():
                r = Lcg64(seed)
                coeffs = r.uniform_array((p["degree"] + 1, dim, dim), -p["amplitude"], p["amplitude"])
                path = MatrixPath.polynomial(coeffs, 0.0, Y)
                u = r.uniform_array((dim,))
                # independent high-accuracy transport of u
                sol = solve_ivp(lambda t, x: path(t) @ x, (0.0, Y), u, method="DOP853",
                                rtol=1e-13, atol=1e-13)
                v = sol.y[:, -1]
                I_flat = one_dim_obstruction(path, u, v, p["y_steps"])
                v_rand = r.uniform_array((dim,))
                I_rand = one_dim_obstruction(path, u, v_rand, p["y_steps"])
                n_flat = float(np.abs(I_flat).max())
                n_rand = float(np.abs(I_rand).max())
                return [{"point": "transported", "case": case, "steps": p["y_steps"],
                         "result": I_flat, "abs_error": n_flat,
                         "status": _status(n_flat <= p["tol"])},
                        {"point": "random", "case": case, "steps": p["y_steps"],
                         "result": I_rand, "abs_error": n_rand,
                         "status": _status(n_rand >= p["nonzero_min"])}]
            return point
        return [make(i, s) for i, s in enumerate(seeds)]

    if mode == "fixed":
        def point():
            cap = max([f.cap for f in ctx.fields.values()] + [0])
            w = _omega(ctx, cap)
            py = ctx.fields.get("transporter", PolyField.zeros([ctx.N], cap)).with_cap(cap)
            init = ctx.fields.get("initial", PolyField.zeros([ctx.N], cap))
            res = transport_splitting(StraightenedStrip(w, py, init, Y), p["x_cap"], p["y_steps"])
            return [{"point": "case", "case": 0, "steps": p["y_steps"], "result": res.slices[-1],
                     "max_dropped": res.max_dropped, "status": "pass"}]
        return [point]

    raise ConfigError(f"unknown transport mode {mode!r}")


def _summarize_transport(ctx: Context, rows: list[dict]) -> list[dict]:
    p = ctx.p
    out = []
    main = [r for r in rows if r.get("status") in ("pass", "fail", "error")]
    ok = bool(main) and all(r["status"] == "pass" for r in main)
    errs = [r["abs_error"] for r in rows if r.get("point") in ("case", "transported")]
    if errs:
        out.append({"point": "summary", "metric": "max_abs_error", "value": max(errs)})
    if p["mode"] == "abelian" and len(p["steps_list"]) >= 2:
        slopes = []
        for case in sorted({r["case"] for r in rows if r.get("point") == "order"}):
            pts = [(p["Y"] / r["steps"], r["abs_error"]) for r in rows
                   if r.get("point") == "order" and r["case"] == case]
            slopes.append(_slope(pts))
        if slopes:
            out.append({"point": "summary", "metric": "min_order_slope", "value": min(slopes)})
            ok &= min(slopes) >= p["min_slope"]
    out.append({"point": "summary", "metric": "all_pass", "value": int(ok), "status": _status(ok)})
    return out


# -- triangle-orders --------------------------------------------------------

def _plan_triangle(ctx: Context, rng: Lcg64):
    p = ctx.p
    N, J = ctx.N, p["J"]
    seeds = rng.spawn(p["cases"])

    def make(case, seed):
        def point():
            r = Lcg64(seed)
            deg = p["degree"]
            w = TwoForm(rand_poly(r, [N], deg, J, p["amplitude"]),
                        rand_poly(r, [N, N], deg, J, p["amplitude"]),
                        rand_poly(r, [N, N], deg, J, p["amplitude"]),
                        PolyField.constant(ctx.structure, J))
            axis = r.uniform_array((N, J + 1), -p["amplitude"], p["amplitude"])
            py = JetTable.from_poly(rand_poly(r, [N], J, J, p["amplitude"]))
            px = flat_jet_extension(w, axis, py, J)
            if p["perturb"]:
                d = np.array(px.d)
                d[0, 0, 1] += p["perturb"]
                px = JetTable(d)
            wj = OmegaJet.from_two_form(w)
            rows, sweeps = [], {1: [], 2: [], 3: []}
            for eps in p["eps_list"]:
                b = boundary_jets_from_bulk(px, py, eps, J)
                vals = (np.abs(triangle_I1(b)).max(), np.abs(triangle_I2(b, wj)).max(),
                        np.abs(triangle_I3(b, wj, printed=bool(p["printed"]))).max())
                for k, v in zip((1, 2, 3), vals):
                    sweeps[k].append((eps, v))
                rows.append({"point": "eps", "case": case, "eps": eps,
                             "I1": vals[0], "I2": vals[1], "I3": vals[2]})
            s = [_slope(sweeps[k]) for k in (1, 2, 3)]
            if p["perturb"]:
                ok = s[1] <= p["I2_max_perturbed"]
            else:
                ok = all(lo <= v <= hi for v, (lo, hi) in
                         zip(s, (p["I1_range"], p["I2_range"], p["I3_range"])))
            rows.append({"point": "slopes", "case": case, "I1": s[0], "I2": s[1], "I3": s[2],
                         "status": _status(ok)})
            return rows
        return point
    return [make(i, s) for i, s in enumerate(seeds)]


def _summarize_triangle(ctx: Context, rows: list[dict]) -> list[dict]:
    out = []
    slopes = [r for r in rows if r.get("point") == "slopes"]
    for k in ("I1", "I2", "I3"):
        vals = [r[k] for r in slopes]
        if vals:
            out.append({"point": "summary", "metric": f"min_slope_{k}", "value": min(vals)})
            out.append({"point": "summary", "metric": f"max_slope_{k}", "value": max(vals)})
    ok = bool(slopes) and all(r["status"] == "pass" for r in slopes)
    out.append({"point": "summary", "metric": "all_pass", "value": int(ok), "status": _status(ok)})
    return out


# -- bch-compare --------------------------------------------------------------

def _plan_bch(ctx: Context, rng: Lcg64):
    p = ctx.p
    N = ctx.N
    C = ctx.structure
    seeds = rng.spawn(p["cases"])

    if p["mode"] == "oracle":
        def make(case, seed):
            def point():
                r = Lcg64(seed)
                raw = ColorPath.polynomial(r.uniform_array((p["degree"] + 1, N)), p["T"])
                scale = p["amplitude"] / (raw.sup_norm(1001) * p["T"])
                path = ColorPath.polynomial(raw.coeffs * scale, p["T"])
                Phi = cbch_solve(path, C, p["M"], p["steps"]).final
                if not np.any(C):
                    ref = path.integral()
                else:
                    ref = adjoint_log_oracle(path, C, p["steps"]).Phi
                err = float(np.abs(Phi - ref).max())
                return [{"point": "case", "case": case, "Phi": Phi, "reference": ref,
                         "abs_error": err, "status": _status(err <= p["tol"])}]
            return point
        return [make(i, s) for i, s in enumerate(seeds)]

    if p["mode"] in ("order2", "order2-literal"):
        def make(case, seed):
            def point():
                r = Lcg64(seed)
                X, Yv = r.uniform_array((N,)), r.uniform_array((N,))
                rows, pts = [], []
                for s in p["s_list"]:
                    path = ColorPath.piecewise([0.0, 0.5, 1.0], [s * X, s * Yv])
                    Phi = cbch_solve(path, C, p["M"], p["steps"]).final
                    if p["mode"] == "order2":
                        ref = cbch_second_order(path, C)
                    else:
                        # -1/2 int int_{t1<t2} [phi(t2), phi(t1)] taken literally
                        ref = path.integral() - 0.5 * 0.25 * np.einsum("abc,b,c->a", C, s * Yv, s * X)
                    err = float(np.abs(Phi - ref).max())
                    pts.append((s, err))
                    rows.append({"point": "s", "case": case, "s": s, "Phi": Phi,
                                 "reference": ref, "abs_error": err})
                slope = _slope(pts)
                rows.append({"point": "slope", "case": case, "metric": "slope", "value": slope,
                             "status": _status(slope >= p["min_slope"])})
                return rows
            return point
        return [make(i, s) for i, s in enumerate(seeds)]

    raise ConfigError(f"unknown bch-compare mode {p['mode']!r}")


def _summarize_generic(ctx: Context, rows: list[dict]) -> list[dict]:
    out = []
    graded = [r for r in rows if r.get("status") in ("pass", "fail", "error")]
    errs = [r["abs_error"] for r in rows if "abs_error" in r]
    if errs:
        out.append({"point": "summary", "metric": "max_abs_error", "value": max(errs)})
    slopes = [r["value"] for r in rows if r.get("metric") == "slope"]
    if slopes:
        out.append({"point": "summary", "metric": "min_slope", "value": min(slopes)})
    ok = bool(graded) and all(r["status"] == "pass" for r in graded)
    out.append({"point": "summary", "metric": "all_pass", "value": int(ok), "status": _status(ok)})
    return out


# -- loop-area ------------------------------------------------------------------

def _plan_loop(ctx: Context, rng: Lcg64):
    p = ctx.p
    px, py = np.array(p["phi_x"]), np.array(p["phi_y"])
    if px.shape != (ctx.N,) or py.shape != (ctx.N,):
        raise ConfigError(f"phi_x and phi_y need {ctx.N} components")

    def make(h):
        def point():
            Phi, lead = loop_commutator_experiment(px, py, ctx.structure, h, p["steps"], p["M"],
                                                   p["orientation"])
            return [{"point": "h", "h": h, "Phi": Phi, "leading": lead,
                     "abs_error": float(np.linalg.norm(Phi - lead))}]
        return point
    return [make(h) for h in p["h_list"]]


def _summarize_loop(ctx: Context, rows: list[dict]) -> list[dict]:
    pts = [(r["h"], r["abs_error"]) for r in rows if r.get("point") == "h"]
    slope = _slope(pts) if len(pts) >= 3 else float("nan")
    ok = slope >= ctx.p["min_slope"]
    return [{"point": "summary", "metric": "slope", "value": slope},
            {"point": "summary", "metric": "all_pass", "value": int(ok), "status": _status(ok)}]


# -- gauge-check ------------------------------------------------------------------

def _plan_gauge(ctx: Context, rng: Lcg64):
    p = ctx.p
    N, cap, deg = ctx.N, p["cap"], p["degree"]
    seeds = rng.spawn(p["cases"])

    def make(case, seed):
        def point():
            r = Lcg64(seed)
            amp = p["amplitude"]
            Cc = np.zeros((N, N, N) + (cap + 1, cap + 1))
            for d in range(deg + 1):
                for i in range(d, -1, -1):
                    Cc[..., i, d - i] = rand_antisymmetric(r, N, amp)
            w = TwoForm(rand_poly(r, [N], deg, cap, amp), rand_poly(r, [N, N], deg, cap, amp),
                        rand_poly(r, [N, N], deg, cap, amp), PolyField(Cc, cap))
            phi = Splitting(rand_poly(r, [N], deg, cap, amp), rand_poly(r, [N], deg, cap, amp))
            g = PolyField.constant(np.eye(N), cap) + rand_poly(r, [N, N], deg, cap, p["g_amplitude"])
            t = GaugeTransform.from_g(g, rand_poly(r, [N], deg, cap, amp),
                                      rand_poly(r, [N], deg, cap, amp))
            lhs = omega_exterior_derivative(gauge_apply_two_form(t, w), gauge_apply_splitting(t, phi))
            rhs = poly_mul(t.g, omega_exterior_derivative(w, phi), "ab,b->a")
            # the top degree sees derivatives of the truncated inverse
            dev = (lhs - rhs).truncate(cap - 1).max_abs()
            return [{"point": "case", "case": case, "deviation": dev,
                     "status": _status(dev <= p["tol"])}]
        return point
    return [make(i, s) for i, s in enumerate(seeds)]


def _summarize_gauge(ctx: Context, rows: list[dict]) -> list[dict]:
    devs = [r["deviation"] for r in rows if "deviation" in r]
    ok = bool(devs) and all(r["status"] == "pass" for r in rows if "status" in r)
    return [{"point": "summary", "metric": "max_deviation", "value": max(devs) if devs else None},
            {"point": "summary", "metric": "all_pass", "value": int(ok), "status": _status(ok)}]


# -- registry ---------------------------------------------------------------------

_TAIL = ("status", "message", "metric", "value")

KINDS: dict[str, Kind] = {k.name: k for k in [
    Kind("disk-obstruction", "obstruction of the order-by-order disk extension",
         {"mode": "fixed", "N": 0, "structure": "", "n_max": 6, "k_max": 6, "fp_tol": 1e-12,
          "fp_max": 100, "cases": 1, "degree": 4, "modes": 5, "amplitude": 1.0,
          "boundary_amplitude": 1.0, "s": 0.05, "k_list": (4.0, 10.0), "tol": 1e-9,
          "residual_tol": 1e-10, "expected": (), "ratio_max": 0.1},
         ("A", "B_x", "B_y", "C"), ("phi",),
         ("point", "case", "n_max", "k_max", "obstruction", "holonomy", "reference",
          "abs_error", "residual", "iterations") + _TAIL,
         _plan_disk, _summarize_disk),
    Kind("transport", "transport of splittings across a strip and 1-D obstructions",
         {"mode": "abelian", "N": 0, "structure": "", "cases": 1, "degree": 6, "amplitude": 1.0,
          "x_cap": 10, "y_steps": 1000, "Y": 1.0, "steps_list": (), "tol": 1e-8,
          "min_slope": 3.7, "dim": 3, "n": 2, "nonzero_min": 1e-6},
         ("A", "B_x", "B_y", "C", "transporter", "initial"), (),
         ("point", "case", "steps", "result", "reference", "abs_error", "max_dropped") + _TAIL,
         _plan_transport, _summarize_transport),
    Kind("triangle-orders", "residual orders of the triangle integrals I1, I2, I3",
         {"N": 3, "structure": "so3", "amplitude": 0.3, "J": 6, "degree": 2,
          "eps_list": (0.1, 0.05, 0.025, 0.0125), "cases": 10, "perturb": 0.0, "printed": 0,
          "I1_range": (0.8, 1.3), "I2_range": (1.8, 2.3), "I3_range": (2.7, 3.3),
          "I2_max_perturbed": 1.3},
         (), (),
         ("point", "case", "eps", "I1", "I2", "I3") + _TAIL,
         _plan_triangle, _summarize_triangle),
    Kind("bch-compare", "continuous BCH against the adjoint-log oracle or its second order",
         {"mode": "oracle", "N": 0, "structure": "so3", "cases": 10, "degree": 2,
          "amplitude": 0.5, "T": 1.0, "M": 8, "steps": 1000, "tol": 1e-6,
          "s_list": (0.02, 0.04, 0.08), "min_slope": 2.7},
         (), (),
         ("point", "case", "s", "Phi", "reference", "abs_error") + _TAIL,
         _plan_bch, _summarize_generic),
    Kind("loop-area", "continuous BCH around a small square against the commutator term",
         {"N": 0, "structure": "so3", "phi_x": (1.0, 0.0, 0.0), "phi_y": (0.0, 1.0, 0.0),
          "h_list": (0.2, 0.1, 0.05), "steps": 1000, "M": 8, "orientation": "clockwise",
          "min_slope": 2.7},
         (), (),
         ("point", "h", "Phi", "leading", "abs_error") + _TAIL,
         _plan_loop, _summarize_loop),
    Kind("gauge-check", "gauge covariance of the omega-exterior derivative",
         {"N": 3, "cap": 8, "degree": 2, "cases": 20, "amplitude": 0.5, "g_amplitude": 0.3,
          "tol": 1e-10},
         (), (),
         ("point", "case", "deviation") + _TAIL,
         _plan_gauge, _summarize_gauge),
]}

_LIST_PARAMS = {"k_list", "steps_list", "eps_list", "s_list", "h_list", "phi_x", "phi_y",
                "expected", "I1_range", "I2_range", "I3_range"}
_SWEEPS = {"k_list", "eps_list", "s_list", "h_list"}


def _typed(key: str, raw: str, default, line: int):
    if key in _LIST_PARAMS:
        try:
            vals = tuple(float(t) for t in raw.replace(";", ",").split(",") if t.strip())
        except ValueError:
            raise ConfigError(f"bad list {raw!r} for {key}", line) from None
        if key in _SWEEPS and not vals:
            raise ConfigError(f"sweep list {key} is empty", line)
        return vals
    try:
        if isinstance(default, bool):
            return bool(int(raw))
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key}", line) from None


def _structure(name: str, spec: ExperimentSpec, N: int | None):
    if not name:
        return None
    if name in spec.tensors:
        rows = spec.tensors[name]
        n = N or (max(max(a, b, c) for a, b, c, _ in rows) + 1 if rows else 1)
        return tensor_array(rows, n, spec.lines.get(f"tensor {name}"))
    if name == "so3":
        return lie.so3().C
    if name == "sl2":
        return lie.sl2().C
    if name.startswith("gl") and name[2:].isdigit():
        return lie.gl(int(name[2:])).C
    if name.startswith("zero") and name[4:].isdigit():
        n = int(name[4:])
        return np.zeros((n, n, n))
    raise ConfigError(f"undefined structure tensor {name!r}", spec.params.get("structure", ("", None))[1])


def prepare(spec: ExperimentSpec) -> Context:
    """Checks names and parameters against the kind; raises :class:`ConfigError`."""
    if spec.kind not in KINDS:
        raise ConfigError(f"unknown kind {spec.kind!r}; see list-kinds")
    kind = KINDS[spec.kind]
    p = dict(kind.params)
    for key, (raw, line) in spec.params.items():
        if key not in kind.params:
            raise ConfigError(f"unknown parameter {key!r} for kind {spec.kind}", line)
        p[key] = _typed(key, raw, kind.params[key], line)
    for key in _SWEEPS & set(p):
        if not p[key]:
            raise ConfigError(f"sweep list {key} is empty")
    for name in spec.fields:
        if name not in kind.fields:
            raise ConfigError(f"kind {spec.kind} has no field {name!r}", spec.lines[f"field {name}"])
    for name in spec.boundaries:
        if name not in kind.boundaries:
            raise ConfigError(f"kind {spec.kind} has no boundary {name!r}",
                              spec.lines[f"boundary {name}"])
    used = {p.get("structure")}
    for name in spec.tensors:
        if name not in used:
            raise ConfigError(f"tensor {name!r} is never referenced", spec.lines[f"tensor {name}"])
    N_param = p.get("N") or None
    structure = _structure(p.get("structure", ""), spec, N_param)
    if N_param:
        N = N_param
    elif structure is not None:
        N = structure.shape[0]
    else:
        slots = [max(s) + 1 for rows in spec.fields.values() for s, *_ in rows if s]
        N = max(slots + [1])
    if structure is not None and structure.shape[0] != N:
        raise ConfigError(f"structure tensor has N = {structure.shape[0]}, expected {N}")
    ctx = Context(spec, kind, p, N, structure)
    shapes = {"A": [N], "B_x": [N, N], "B_y": [N, N], "C": [N, N, N],
              "transporter": [N], "initial": [N]}
    for name, rows in spec.fields.items():
        line = spec.lines[f"field {name}"]
        shape = shapes[name]
        for slot, i, j, _ in rows:
            if len(slot) != len(shape) or any(s >= n for s, n in zip(slot, shape)):
                raise ConfigError(f"slot {slot} does not fit field {name} of shape {shape}", line)
        cap = max([i + j for _, i, j, _ in rows] + [0])
        ctx.fields[name] = PolyField.from_rows(shape, cap, rows)
    for name, modes in spec.boundaries.items():
        line = spec.lines[f"boundary {name}"]
        n_max = p.get("n_max", max(list(modes) + [0]))
        for n, vec in modes.items():
            if len(vec) != N:
                raise ConfigError(f"boundary mode {n} has {len(vec)} colors, expected {N}", line)
            if n > n_max:
                raise ConfigError(f"boundary mode {n} exceeds n_max = {n_max}", line)
            if n == 0 and any(v.imag for v in vec):
                raise ConfigError("boundary mode 0 must be real", line)
        ctx.boundaries[name] = BoundaryFourier.from_modes(modes, N, n_max)
    return ctx


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[ResultRecord]:
    """Runs every sweep point in declared order, then appends summary records."""
    ctx = prepare(spec)
    rng = Lcg64(spec.seed)
    points = ctx.kind.plan(ctx, rng)

    def execute(point):
        t0 = time.perf_counter()
        try:
            rows = point()
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            rows = [{"point": "error", "status": "error", "message": f"{type(exc).__name__}: {exc}"}]
        return rows, time.perf_counter() - t0

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(execute, points))
    else:
        results = [execute(pt) for pt in points]
    records, rows = [], []
    for i, (point_rows, wall) in enumerate(results):
        log.info("point %d: %d rows in %.3f s", i, len(point_rows), wall)
        for r in point_rows:
            records.append(ResultRecord(r, wall))
            rows.append(r)
    records.extend(ResultRecord(r) for r in ctx.kind.summarize(ctx, rows))
    return records


def write_csv(records: list[ResultRecord], kind: str, stream) -> None:
    """Fixed header per kind; wall time is left out so output is reproducible."""
    columns = ("experiment",) + KINDS[kind].columns
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        row = dict(rec.row, experiment=kind)
        w.writerow([_fmt(row.get(c)) for c in columns])


def all_passed(records: list[ResultRecord]) -> bool:
    final = [r.row for r in records if r.row.get("metric") == "all_pass"]
    return bool(final) and bool(final[-1]["value"])
