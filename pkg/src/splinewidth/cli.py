"""Command-line experiment driver.

Each subcommand reads a JSON config describing a parameter grid, evaluates
the grid cells (optionally in a thread pool), and writes

- ``<out>/<cmd>.csv``: one row per measurement, floats with 17 significant digits,
- ``<out>/<cmd>_summary.json``: aggregated results,
- ``<out>/<cmd>_manifest.json``: config hash, version, per-cell status and wall times,
- ``<out>/<cmd>_*.svg`` for ``outliers`` and ``branches`` (rebuilt from the CSV alone).

Exit codes: 0 when every asserted cell passes, 2 on a bound violation,
3 on a config error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .functions import FunctionError, get_function
from .knots import MAX_DEGREE, KnotError, make_breaks
from .nwidth import NWidthError, class_space_compatible, eigconv_report, optimal_space, optimality_ratio
from .operators import CLASS_TAGS, MAX_GRID, MIN_GRID, FunctionClassSpec
from .projection import (HypothesisError, ProjectionError, bound_report, check_hypotheses, error_norm,
                         ritz_project_recursive, ritz_project_variational)
from .spaces import FAMILY_TAGS, ConstraintFamily, SpaceError, build_subspace, periodic_space
from .spectral import (DEFAULT_OUTLIER_THRESHOLD, branch_profile, conjecture_explorer, inverse_report,
                       outlier_report)
from .svg import Series, line_plot

MAX_DIM = 600
CROSSCHECK_RTOL = 1e-8
NWIDTH_TOL = 5e-3
CERTIFICATE_TOL = 1e-3
ORTHO_TOL = 1e-10
DECAY_FLOOR = 1e-10

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 2, 3
SKIPPED = "skipped(hypothesis)"


class ConfigError(ValueError):
    """Invalid experiment config; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------- config parsing

def _require_keys(cfg: dict, allowed: set, prefix: str = ""):
    for key in cfg:
        if key not in allowed:
            raise ConfigError(prefix + key, f"unknown key; allowed: {sorted(allowed)}")


def _int(value, name: str, lo: int | None = None, hi: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(name, f"expected an integer, got {value!r}")
    value = int(value)
    if lo is not None and value < lo:
        raise ConfigError(name, f"must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(name, f"must be <= {hi}, got {value}")
    return value


def _float(value, name: str, lo: float | None = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(name, f"expected a finite number, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(name, f"must be >= {lo}, got {value}")
    return float(value)


def _int_list(cfg: dict, key: str, default=None, lo: int | None = None, hi: int | None = None) -> list[int]:
    value = cfg.get(key, default)
    if value is None:
        raise ConfigError(key, "required")
    items = value if isinstance(value, list) else [value]
    if not items:
        raise ConfigError(key, "must not be empty")
    return [_int(v, f"{key}[{i}]", lo, hi) for i, v in enumerate(items)]


def _str_list(cfg: dict, key: str, default=None, choices=None) -> list[str]:
    value = cfg.get(key, default)
    if value is None:
        raise ConfigError(key, "required")
    items = value if isinstance(value, list) else [value]
    if not items:
        raise ConfigError(key, "must not be empty")
    for i, v in enumerate(items):
        if not isinstance(v, str):
            raise ConfigError(f"{key}[{i}]", f"expected a string, got {v!r}")
        if choices is not None and v not in choices:
            raise ConfigError(f"{key}[{i}]", f"{v!r} not in {list(choices)}")
    return list(items)


def _functions(cfg: dict, key: str = "functions", default=None) -> list[str]:
    names = _str_list(cfg, key, default)
    for i, name in enumerate(names):
        try:
            get_function(name)
        except FunctionError as exc:
            raise ConfigError(f"{key}[{i}]", str(exc)) from None
    return names


def _breaks(cfg: dict, key: str = "breaks") -> dict:
    spec = cfg.get(key, {"kind": "uniform", "n": 1})
    if not isinstance(spec, dict):
        raise ConfigError(key, "expected an object")
    _require_keys(spec, {"kind", "n", "points", "amplitude", "a", "b"}, key + ".")
    spec = dict(spec)
    kind = spec.setdefault("kind", "uniform")
    if kind not in ("uniform", "explicit", "random_perturbed"):
        raise ConfigError(key + ".kind", f"unknown break kind {kind!r}")
    if kind == "explicit":
        pts = spec.get("points")
        if not isinstance(pts, list) or len(pts) < 2:
            raise ConfigError(key + ".points", "need a list of at least two points")
        for i, v in enumerate(pts):
            _float(v, f"{key}.points[{i}]")
    else:
        spec["n"] = _int(spec.get("n"), key + ".n", 1, MAX_DIM)
    for k in ("amplitude", "a", "b"):
        if k in spec:
            spec[k] = _float(spec[k], f"{key}.{k}")
    try:
        make_breaks(**spec, seed=0)
    except KnotError as exc:
        raise ConfigError(key, str(exc)) from None
    return spec


def _n_intervals(spec: dict) -> int:
    return len(spec["points"]) - 1 if spec["kind"] == "explicit" else spec["n"]


def _check_dim(n_int: int, p: int, k: int, name: str):
    dim = n_int * (p - k) + k + 1
    if dim > MAX_DIM:
        raise ConfigError(name, f"space dimension {dim} exceeds the cap {MAX_DIM}")


def _seeds(cfg: dict) -> list[int]:
    return _int_list(cfg, "seeds", [0], lo=0)


def _M(cfg: dict, default: int = 1000) -> int:
    return _int(cfg.get("M", default), "M", MIN_GRID, MAX_GRID)


# ---------------------------------------------------------------- cells

@dataclass
class CellResult:
    params: dict
    rows: list
    status: str
    wall_time: float = 0.0
    note: str = ""


def _cell_status(rows: list[dict]) -> str:
    statuses = [r["status"] for r in rows]
    if any(s == "fail" for s in statuses):
        return "fail"
    if any(s == "pass" for s in statuses):
        return "pass"
    if statuses and all(s == SKIPPED for s in statuses):
        return SKIPPED
    return "exploratory"


@dataclass
class Command:
    name: str
    keys: set
    columns: tuple
    plan: Callable  # (cfg, args) -> list of cell params
    run: Callable  # (params) -> list of row dicts
    summarize: Callable  # (cells, cfg) -> (summary dict, aggregate ok)
    plots: Callable | None = None  # (rows from CSV) -> {suffix: svg text}
    help: str = ""


def _default_summary(cells: list[CellResult], cfg: dict):
    counts = {}
    for c in cells:
        counts[c.status] = counts.get(c.status, 0) + 1
    return {"cells": len(cells), "status_counts": counts}, True


# project ------------------------------------------------------------------

def _plan_project(cfg, args):
    br = _breaks(cfg)
    fam = cfg.get("family", "full")
    if fam not in ("full", "periodic"):
        raise ConfigError("family", f"expected 'full' or 'periodic', got {fam!r}")
    ps = _int_list(cfg, "p", lo=0, hi=MAX_DEGREE)
    for p in ps:
        _check_dim(_n_intervals(br), p, p - 1, "p")
    r = cfg.get("r", "all")
    if r != "all":
        r = _int_list(cfg, "r", lo=1, hi=40)
    funcs = _functions(cfg)
    return [{"seed": s, "p": p, "r": r, "functions": funcs, "breaks": br, "family": fam}
            for s in _seeds(cfg) for p in ps]


def _hyp_row(base: dict, exc: Exception) -> dict:
    return base | {"hypothesis": str(exc), "status": SKIPPED}


def _run_project(params):
    p = params["p"]
    br = make_breaks(**params["breaks"], seed=params["seed"])
    space = build_subspace(br, p, p - 1, ConstraintFamily.periodic() if params["family"] == "periodic" else "full")
    rs = list(range(1, p + 2)) if params["r"] == "all" else params["r"]
    rows = []
    for r in rs:
        for name in params["functions"]:
            base = {"seed": params["seed"], "family": params["family"], "p": p, "r": r, "function": name,
                    "h": br.h, "error": "", "bound": "", "ratio": ""}
            try:
                rep = bound_report(get_function(name), space, "l2", r)
            except HypothesisError as exc:
                rows.append(_hyp_row(base, exc))
                continue
            rows.append(base | {"error": rep.error, "bound": rep.bound, "ratio": rep.ratio,
                                "hypothesis": "ok", "status": "pass" if rep.holds else "fail"})
    return rows


def _summary_ratio(cells, cfg):
    out, _ = _default_summary(cells, cfg)
    ratios = [r["ratio"] for c in cells for r in c.rows if isinstance(r.get("ratio"), float)]
    out["max_ratio"] = max(ratios) if ratios else None
    out["rows"] = sum(len(c.rows) for c in cells)
    return out, True


# ritz -----------------------------------------------------------------------

def _plan_ritz(cfg, args):
    br = _breaks(cfg)
    fam = cfg.get("family", "periodic")
    if fam not in ("full", "periodic"):
        raise ConfigError("family", f"expected 'full' or 'periodic', got {fam!r}")
    ps = _int_list(cfg, "p", lo=0, hi=MAX_DEGREE)
    for p in ps:
        _check_dim(_n_intervals(br), p, p - 1, "p")
    return [{"seed": s, "p": p, "family": fam, "breaks": br,
             "r": _int_list(cfg, "r", lo=1, hi=40), "q": _int_list(cfg, "q", lo=0, hi=MAX_DEGREE),
             "ell": _int_list(cfg, "ell", [0], lo=0, hi=MAX_DEGREE), "functions": _functions(cfg)}
            for s in _seeds(cfg) for p in ps]


def _run_ritz(params):
    p = params["p"]
    br = make_breaks(**params["breaks"], seed=params["seed"])
    space = periodic_space(br, p) if params["family"] == "periodic" else build_subspace(br, p, p - 1, "full")
    rows = []
    for r in params["r"]:
        for q in params["q"]:
            for ell in params["ell"]:
                for name in params["functions"]:
                    u = get_function(name)
                    base = {"seed": params["seed"], "family": params["family"], "p": p, "r": r, "q": q,
                            "ell": ell, "function": name, "h": br.h, "error": "", "bound": "", "ratio": "",
                            "crosscheck": ""}
                    try:
                        rep = bound_report(u, space, "ritz_recursive", r, ell, q)
                    except HypothesisError as exc:
                        rows.append(_hyp_row(base, exc))
                        continue
                    ok = rep.holds
                    row = base | {"error": rep.error, "bound": rep.bound, "ratio": rep.ratio}
                    if params["family"] == "periodic" or q == 1:
                        rec = ritz_project_recursive(space, u, q).raw
                        var = ritz_project_variational(space, u, q).raw
                        diff = float(np.linalg.norm(rec - var) / max(np.linalg.norm(rec), 1e-300))
                        row["crosscheck"] = diff
                        ok = ok and diff <= CROSSCHECK_RTOL
                    rows.append(row | {"hypothesis": "ok", "status": "pass" if ok else "fail"})
    return rows


def _summary_ritz(cells, cfg):
    out, _ = _summary_ratio(cells, cfg)
    cc = [r["crosscheck"] for c in cells for r in c.rows if isinstance(r.get("crosscheck"), float)]
    out["max_crosscheck"] = max(cc) if cc else None
    return out, True


# reduced ----------------------------------------------------------------------

def _plan_reduced(cfg, args):
    br = _breaks(cfg)
    ps = _int_list(cfg, "p", lo=0, hi=MAX_DEGREE)
    for p in ps:
        _check_dim(_n_intervals(br), p, p - 1, "p")
    fams = _str_list(cfg, "families", ["odd_zero", "reduced_odd"], ("odd_zero", "reduced_odd"))
    funcs = _functions(cfg, default=["sin_2", "exp"])
    return [{"seed": s, "p": p, "families": fams, "functions": funcs, "breaks": br}
            for s in _seeds(cfg) for p in ps]


def _run_reduced(params):
    p = params["p"]
    br = make_breaks(**params["breaks"], seed=params["seed"])
    rows = []
    for fam in params["families"]:
        base0 = {"seed": params["seed"], "p": p, "family": fam}
        try:
            space = build_subspace(br, p, p - 1, fam)
        except SpaceError as exc:
            rows.extend(_hyp_row(base0 | {"function": n, "width_kind": "", "width": "", "error": "",
                                          "bound": "", "ratio": ""}, exc) for n in params["functions"])
            continue
        for name in params["functions"]:
            base = base0 | {"function": name, "width_kind": "", "width": "", "error": "", "bound": "", "ratio": ""}
            try:
                rep = bound_report(get_function(name), space, "l2", 1)
            except HypothesisError as exc:
                rows.append(_hyp_row(base, exc))
                continue
            rows.append(base | {"width_kind": rep.width_kind, "width": rep.width, "error": rep.error,
                                "bound": rep.bound, "ratio": rep.ratio, "hypothesis": "ok",
                                "status": "pass" if rep.holds else "fail"})
    return rows


# outliers -------------------------------------------------------------------

def _pk_cells(cfg, n: int, name: str = "cells") -> list[tuple[int, int]]:
    cells = cfg.get(name)
    if not isinstance(cells, list) or not cells:
        raise ConfigError(name, "need a non-empty list of [p, k] pairs")
    out = []
    for i, c in enumerate(cells):
        if not isinstance(c, list) or len(c) != 2:
            raise ConfigError(f"{name}[{i}]", f"expected [p, k], got {c!r}")
        p = _int(c[0], f"{name}[{i}][0]", 1, MAX_DEGREE)
        k = _int(c[1], f"{name}[{i}][1]", 0, p - 1)
        if n * (p - k) > MAX_DIM:
            raise ConfigError(f"{name}[{i}]", f"space dimension {n * (p - k)} exceeds the cap {MAX_DIM}")
        out.append((p, k))
    return out


def _plan_outliers(cfg, args):
    n = _int(cfg.get("n", 50), "n", 1, MAX_DIM)
    thr = args.outlier_threshold if args.outlier_threshold is not None else \
        _float(cfg.get("threshold", DEFAULT_OUTLIER_THRESHOLD), "threshold", 0.0)
    return [{"n": n, "p": p, "k": k, "threshold": thr} for p, k in _pk_cells(cfg, n)]


def _run_outliers(params):
    rep = outlier_report(params["n"], params["p"], params["k"], params["threshold"])
    spec = rep.spectrum
    ok = rep.count == rep.expected
    flagged = set(rep.indices)
    return [{"n": params["n"], "p": params["p"], "k": params["k"], "j": j, "nu_h": float(spec.nu_h[j]),
             "nu": float(spec.nu[j]), "rel_err": float(spec.rel_err[j]) if j else "",
             "outlier": int(j in flagged), "hypothesis": "ok", "status": "pass" if ok else "fail"}
            for j in range(spec.dim)]


def _summary_outliers(cells, cfg):
    out = []
    for c in cells:
        count = sum(r["outlier"] for r in c.rows)
        out.append({"p": c.params["p"], "k": c.params["k"], "dim": len(c.rows), "outliers": count,
                    "expected": c.params["p"] - c.params["k"] - 1, "threshold": c.params["threshold"],
                    "status": c.status})
    return {"cells": out}, True


def _group(rows: list[dict], keys: tuple) -> dict:
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    return groups


def _num(v) -> float:
    return float(v) if v not in ("", None) else math.nan


def _plots_outliers(rows: list[dict]) -> dict:
    out = {}
    for (p, k), grp in _group(rows, ("p", "k")).items():
        j = tuple(_num(r["j"]) for r in grp)
        series = [Series("exact", j, tuple(_num(r["nu"]) for r in grp), "blue", False, "circle"),
                  Series("Galerkin", j, tuple(_num(r["nu_h"]) for r in grp), "red", False, "star")]
        out[f"p{p}_k{k}"] = line_plot(series, f"periodic Laplacian, p={p}, k={k}", "mode j", "eigenvalue",
                                      log_y=True)
    return out


# branches -------------------------------------------------------------------

def _plan_branches(cfg, args):
    n = _int(cfg.get("n", 100), "n", 1, MAX_DIM)
    return [{"n": n, "p": p, "k": k} for p, k in _pk_cells(cfg, n)]


def _run_branches(params):
    n, p, k = params["n"], params["p"], params["k"]
    prof = branch_profile(n, p, k)
    ok = prof.branches == prof.expected and prof.spectrum.dim == n * (p - k)
    status = "pass" if ok else "fail"
    return [{"n": n, "p": p, "k": k, "j": t + 1, "x": float(prof.x[t]), "rel_err": float(prof.rel_err[t]),
             "smoothed": float(prof.smoothed[t]), "branches": prof.branches, "expected": prof.expected,
             "hypothesis": "ok", "status": status}
            for t in range(prof.x.size)]


def _summary_branches(cells, cfg):
    out = []
    for c in cells:
        r0 = c.rows[0]
        head = [r["rel_err"] for r in c.rows if r["j"] <= 50]
        out.append({"p": r0["p"], "k": r0["k"], "dim": len(c.rows) + 1, "branches": r0["branches"],
                    "expected": r0["expected"], "max_rel_err_j_le_50": max(head), "status": c.status})
    return {"cells": out}, True


def _plots_branches(rows: list[dict]) -> dict:
    colors = ("black", "blue", "red", "green", "purple", "orange")
    out = {}
    for (p,), grp in _group(rows, ("p",)).items():
        series = []
        for t, ((k,), sub) in enumerate(_group(grp, ("k",)).items()):
            series.append(Series(f"k={k}", tuple(_num(r["x"]) for r in sub),
                                 tuple(_num(r["rel_err"]) for r in sub), colors[t % len(colors)]))
        out[f"p{p}"] = line_plot(series, f"relative eigenvalue error, p={p}", "j / dim", "nu_h / nu - 1",
                                 log_y=True)
    return out


# nwidth ---------------------------------------------------------------------

def _plan_nwidth(cfg, args):
    tag = cfg.get("class")
    if tag not in CLASS_TAGS:
        raise ConfigError("class", f"expected one of {list(CLASS_TAGS)}, got {tag!r}")
    rs = _int_list(cfg, "r", lo=1, hi=MAX_DEGREE)
    ps = _int_list(cfg, "p", lo=0, hi=MAX_DEGREE)
    sp = cfg.get("space")
    if not isinstance(sp, dict):
        raise ConfigError("space", "expected an object with 'kind'")
    _require_keys(sp, {"kind", "breaks", "n"}, "space.")
    kind = sp.get("kind")
    if kind not in ("periodic", "full", "optimal"):
        raise ConfigError("space.kind", f"expected 'periodic', 'full' or 'optimal', got {kind!r}")
    if kind == "optimal":
        if tag not in ("A_r_0", "A_r_1", "A_r_2"):
            raise ConfigError("space.kind", f"optimal spaces exist for A_r_0, A_r_1, A_r_2, not {tag}")
        space_spec = {"kind": kind, "n": _int(sp.get("n"), "space.n", 1, MAX_DIM)}
    else:
        br = _breaks(sp, "breaks")
        for p in ps:
            _check_dim(_n_intervals(br), p, p - 1, "p")
        space_spec = {"kind": kind, "breaks": br}
    M = _M(cfg)
    tol = _float(cfg.get("tolerance", NWIDTH_TOL), "tolerance", 0.0)
    return [{"class": tag, "r": r, "p": p, "space": space_spec, "M": M, "tolerance": tol, "seed": s}
            for s in _seeds(cfg) for r in rs for p in ps]


def _nwidth_space(params):
    spec = params["space"]
    p = params["p"]
    if spec["kind"] == "optimal":
        i = int(params["class"][-1])
        return optimal_space(i, p, spec["n"]), True
    br = make_breaks(**spec["breaks"], seed=params["seed"])
    if spec["kind"] == "periodic":
        sp = periodic_space(br, p)
        proven = params["class"] == "A_r_per" and br.is_uniform() and sp.dim % 2 == 0
        return sp, proven
    return build_subspace(br, p, p - 1, "full"), False


def _run_nwidth(params):
    r, p, tag = params["r"], params["p"], params["class"]
    cls = FunctionClassSpec(tag, r)
    base = {"class": tag, "r": r, "p": p, "seed": params["seed"], "space": params["space"]["kind"], "n": "",
            "E": "", "d_n": "", "ratio": "", "E_2M": "", "certificate": "", "converged": ""}
    try:
        space, proven = _nwidth_space(params)
    except (NWidthError, SpaceError, KnotError) as exc:
        return [_hyp_row(base, exc)]
    base["n"] = space.dim
    if not class_space_compatible(space, cls):
        return [_hyp_row(base, NWidthError(f"{tag} shift space not contained in the spline space"))]
    rep = optimality_ratio(space, cls, params["M"], params["seed"])
    tol = params["tolerance"]
    row = base | {"E": rep.E, "d_n": rep.d_n, "ratio": rep.ratio, "E_2M": rep.norm.value_refined,
                  "certificate": rep.norm.certificate, "converged": rep.norm.converged}
    # no n-dimensional space beats the n-width; optimality is asserted only where it is proven
    ok = rep.ratio >= 1.0 - tol and rep.norm.certified
    if proven and p >= r - 1:
        ok = ok and abs(rep.ratio - 1.0) <= tol
        return [row | {"hypothesis": "ok", "status": "pass" if ok else "fail"}]
    return [row | {"hypothesis": "not an optimality configuration",
                   "status": "exploratory" if ok else "fail"}]


# inverse ----------------------------------------------------------------------

def _plan_inverse(cfg, args):
    br = _breaks(cfg)
    fams = _str_list(cfg, "families", ["periodic", "even_zero", "odd_zero", "mixed", "reduced_odd"], FAMILY_TAGS)
    ps = _int_list(cfg, "p", lo=1, hi=MAX_DEGREE)
    for p in ps:
        _check_dim(_n_intervals(br), p, p - 1, "p")
    return [{"seed": s, "p": p, "families": fams, "breaks": br} for s in _seeds(cfg) for p in ps]


def _run_inverse(params):
    br = make_breaks(**params["breaks"], seed=params["seed"])
    p = params["p"]
    rows = []
    for fam in params["families"]:
        base = {"seed": params["seed"], "family": fam, "p": p, "dim": "", "h_min": br.h_min, "ratio": "",
                "bound": "", "slack": ""}
        try:
            family = ConstraintFamily.periodic() if fam == "periodic" else ConstraintFamily(fam)
            space = build_subspace(br, p, p - 1, family)
            rep = inverse_report(space)
        except SpaceError as exc:
            rows.append(_hyp_row(base, exc))
            continue
        if rep.conforming:
            status, hyp = ("pass" if rep.holds else "fail"), "ok"
        else:
            status, hyp = "exploratory", "family not covered by the inverse inequality"
        rows.append(base | {"dim": space.dim, "ratio": rep.ratio,
                            "bound": rep.bound, "slack": rep.slack, "hypothesis": hyp, "status": status})
    return rows


# eigconv ----------------------------------------------------------------------

def _plan_eigconv(cfg, args):
    mode = cfg.get("mode", "periodic")
    if mode == "periodic":
        n = _int(cfg.get("n", 11), "n", 1, MAX_DIM)
        ps = _int_list(cfg, "p", lo=0, hi=MAX_DEGREE)
        js = _int_list(cfg, "j", list(range(1, 11)), lo=0)
        q = _int(cfg.get("q", 0), "q", 0, MAX_DEGREE)
        ell = _int(cfg.get("ell", 0), "ell", 0, MAX_DEGREE)
        for p in ps:
            _check_dim(n, p, p - 1, "p")
        return [{"mode": mode, "n": n, "p": p, "j": js, "q": q, "ell": ell} for p in ps]
    if mode == "optimal":
        i = _int(cfg.get("i"), "i", 0, 2)
        n = _int(cfg.get("n"), "n", 1, MAX_DIM)
        ps = _int_list(cfg, "p", lo=0, hi=MAX_DEGREE)
        return [{"mode": mode, "i": i, "n": n, "p": p} for p in ps]
    raise ConfigError("mode", f"expected 'periodic' or 'optimal', got {mode!r}")


def _run_eigconv(params):
    p, n = params["p"], params["n"]
    if params["mode"] == "optimal":
        rep = eigconv_report(params["i"], n, [p])
        return [{"mode": "optimal", "i": params["i"], "n": n, "j": j, "p": p, "q": "", "ell": "", "error": e,
                 "bound": "", "ratio": "", "hypothesis": "ok", "status": "exploratory"}
                for j, _, e in rep.rows()]
    q, ell = params["q"], params["ell"]
    space = periodic_space(make_breaks("uniform", n=n), p)
    h = 1.0 / n
    kind = "l2" if q == 0 else "ritz_recursive"
    rows = []
    for j in params["j"]:
        base = {"mode": "periodic", "i": "", "n": n, "j": j, "p": p, "q": q, "ell": ell, "error": "",
                "bound": "", "ratio": ""}
        u = get_function(f"psi_{j}")
        try:
            check_hypotheses(space, kind, p + 1, ell, q, u)
        except HypothesisError as exc:
            rows.append(_hyp_row(base, exc))
            continue
        err = error_norm(u, ritz_project_recursive(space, u, q), ell)
        bound = (2 * math.ceil(j / 2) * h) ** (p + 1 - ell)
        ratio = err / bound if bound else 0.0
        rows.append(base | {"error": err, "bound": bound, "ratio": ratio, "hypothesis": "ok",
                            "status": "pass" if ratio <= 1.0 + 1e-9 else "fail"})
    return rows


def _summary_eigconv(cells, cfg):
    rows = [r for c in cells for r in c.rows if isinstance(r["error"], float)]
    by_j = _group(rows, ("j",))
    decay = {}
    ok = True
    for (j,), grp in by_j.items():
        errs = [r["error"] for r in sorted(grp, key=lambda r: r["p"])]
        # a decrease is only meaningful above the roundoff floor of the projection
        mono = all(b < a or max(a, b) < DECAY_FLOOR for a, b in zip(errs, errs[1:]))
        decay[str(j)] = {"decreasing": mono, "final": errs[-1]}
        ok = ok and mono
    out, _ = _default_summary(cells, cfg)
    out["by_j"] = decay
    if cells and cells[0].params["mode"] == "optimal":
        tol = _float(cfg.get("final_tolerance", 1e-3), "final_tolerance", 0.0)
        out["final_below_tolerance"] = all(d["final"] < tol for d in decay.values())
        ok = ok and out["final_below_tolerance"]
    out["aggregate_pass"] = ok
    return out, ok


# conjecture -------------------------------------------------------------------

def _plan_conjecture(cfg, args):
    m = _int(cfg.get("m", 5), "m", 1, MAX_DIM // 2)
    q = _int(cfg.get("q", 0), "q", 0, MAX_DEGREE)
    ps = _int_list(cfg, "p", list(range(0, 10)), lo=0, hi=MAX_DEGREE)
    for p in ps:
        _check_dim(2 * m, p, p - 1, "p")
    return [{"m": m, "q": q, "p": ps}]


def _run_conjecture(params):
    rep = conjecture_explorer(params["m"], params["q"], params["p"])
    parity = dict(rep.parity_inner_products)
    rows = [{"m": rep.m, "q": rep.q, "p": r.p, "function": r.function, "error": r.error,
             "parity_inner_product": parity[r.p], "hypothesis": "exploratory",
             "status": "exploratory"} for r in rep.rows]
    ortho_ok = rep.constants_orthogonal <= ORTHO_TOL and max(parity.values()) <= ORTHO_TOL
    rows.append({"m": rep.m, "q": rep.q, "p": 0, "function": "orthogonality(constants, cos)",
                 "error": rep.constants_orthogonal, "parity_inner_product": max(parity.values()),
                 "hypothesis": "ok", "status": "pass" if ortho_ok else "fail"})
    return rows


# ---------------------------------------------------------------- registry

COMMANDS = {
    "project": Command("project", {"breaks", "family", "p", "r", "functions", "seeds"},
                       ("seed", "family", "p", "r", "function", "h", "error", "bound", "ratio", "hypothesis",
                        "status"), _plan_project, _run_project, _summary_ratio,
                       help="L2 projection error against (h/pi)^r ||d^r u||"),
    "ritz": Command("ritz", {"breaks", "family", "p", "r", "q", "ell", "functions", "seeds"},
                    ("seed", "family", "p", "r", "q", "ell", "function", "h", "error", "bound", "ratio",
                     "crosscheck", "hypothesis", "status"), _plan_ritz, _run_ritz, _summary_ritz,
                    help="Ritz projection estimates with recursive/variational cross-check"),
    "reduced": Command("reduced", {"breaks", "p", "families", "functions", "seeds"},
                       ("seed", "p", "family", "function", "width_kind", "width", "error", "bound", "ratio",
                        "hypothesis", "status"), _plan_reduced, _run_reduced, _summary_ratio,
                       help="L2 estimates on spaces with odd boundary derivatives removed"),
    "outliers": Command("outliers", {"n", "cells", "threshold"},
                        ("n", "p", "k", "j", "nu_h", "nu", "rel_err", "outlier", "hypothesis", "status"),
                        _plan_outliers, _run_outliers, _summary_outliers, _plots_outliers,
                        help="outlier modes of the periodic Laplacian"),
    "branches": Command("branches", {"n", "cells"},
                        ("n", "p", "k", "j", "x", "rel_err", "smoothed", "branches", "expected", "hypothesis",
                         "status"), _plan_branches, _run_branches, _summary_branches, _plots_branches,
                        help="spectral branches of C^k periodic splines"),
    "nwidth": Command("nwidth", {"class", "r", "p", "space", "M", "tolerance", "seeds"},
                      ("class", "r", "p", "seed", "space", "n", "E", "d_n", "ratio", "E_2M", "certificate",
                       "converged", "hypothesis", "status"), _plan_nwidth, _run_nwidth, _default_summary,
                      help="||(I - P) T|| against the Kolmogorov n-width"),
    "inverse": Command("inverse", {"breaks", "families", "p", "seeds"},
                       ("seed", "family", "p", "dim", "h_min", "ratio", "bound", "slack", "hypothesis", "status"),
                       _plan_inverse, _run_inverse, _default_summary,
                       help="inverse inequality ||s'|| <= 2 sqrt(3) / h_min ||s||"),
    "eigconv": Command("eigconv", {"mode", "n", "i", "p", "j", "q", "ell", "final_tolerance"},
                       ("mode", "i", "n", "j", "p", "q", "ell", "error", "bound", "ratio", "hypothesis", "status"),
                       _plan_eigconv, _run_eigconv, _summary_eigconv,
                       help="approximation of Laplacian eigenfunctions as p grows"),
    "conjecture": Command("conjecture", {"m", "q", "p"},
                          ("m", "q", "p", "function", "error", "parity_inner_product", "hypothesis", "status"),
                          _plan_conjecture, _run_conjecture, _default_summary,
                          help="exploratory errors for sin/cos(2 pi m x) on 2m periodic intervals"),
}


# ---------------------------------------------------------------- output

def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def rows_to_csv(rows: list[dict], columns: tuple) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([format_value(r.get(c, "")) for c in columns])
    return buf.getvalue()


def read_csv(path: str | Path) -> list[dict]:
    """Rows of a CSV written by :func:`rows_to_csv`; numeric fields parsed back."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k, v in r.items():
            try:
                r[k] = int(v)
            except ValueError:
                try:
                    r[k] = float(v)
                except ValueError:
                    pass
    return rows


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_atomic(path: Path, text: str):
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def plots_from_csv(cmd: str, csv_path: str | Path) -> dict:
    """SVG documents for ``cmd`` rebuilt from its CSV alone."""
    command = COMMANDS[cmd]
    if command.plots is None:
        return {}
    return command.plots(read_csv(csv_path))


# ---------------------------------------------------------------- driver

def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("SPLINEWIDTH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("SPLINEWIDTH_THREADS", f"expected an integer, got {env!r}") from None
    return 1


def load_config(path: str, cmd: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config", "top level must be an object")
    if cfg.get("subcommand", cmd) != cmd:
        raise ConfigError("subcommand", f"config is for {cfg['subcommand']!r}, not {cmd!r}")
    return cfg


def _evaluate(command: Command, params: dict) -> CellResult:
    t0 = time.perf_counter()
    try:
        rows = command.run(params)
    except (HypothesisError, ProjectionError) as exc:
        rows = []
        note = str(exc)
        return CellResult(params, rows, SKIPPED, time.perf_counter() - t0, note)
    return CellResult(params, rows, _cell_status(rows), time.perf_counter() - t0)


def run_command(cmd: str, cfg: dict, out: Path, threads: int = 1, outlier_threshold: float | None = None) -> int:
    """Run one subcommand on a parsed config and write all outputs under ``out``."""
    command = COMMANDS[cmd]
    _require_keys(cfg, command.keys | {"subcommand", "out", "threads"})
    args = argparse.Namespace(outlier_threshold=outlier_threshold)
    cells = command.plan(cfg, args)
    if not cells:
        raise ConfigError("config", "parameter grid is empty")
    t0 = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda p: _evaluate(command, p), cells))
    else:
        results = [_evaluate(command, p) for p in cells]
    wall = time.perf_counter() - t0
    rows = [r for c in results for r in c.rows]
    csv_path = out / f"{cmd}.csv"
    write_atomic(csv_path, rows_to_csv(rows, command.columns))
    summary, aggregate_ok = command.summarize(results, cfg)
    any_fail = any(c.status == "fail" for c in results) or not aggregate_ok
    code = EXIT_FAIL if any_fail else EXIT_OK
    write_atomic(out / f"{cmd}_summary.json", json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    for suffix, svg in plots_from_csv(cmd, csv_path).items():
        write_atomic(out / f"{cmd}_{suffix}.svg", svg)
    manifest = {
        "tool": "splinewidth", "version": __version__, "subcommand": cmd, "config_hash": config_hash(cfg),
        "threads": threads, "wall_time": wall, "exit_code": code,
        "cells": [{"params": c.params, "status": c.status, "wall_time": c.wall_time, "note": c.note}
                  for c in results],
    }
    write_atomic(out / f"{cmd}_manifest.json", json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splinewidth", description="Spline approximation experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)
    for name, command in COMMANDS.items():
        sp = sub.add_parser(name, help=command.help)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", default=None, help="output directory (default: config 'out' or ./results)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (env SPLINEWIDTH_THREADS)")
        sp.add_argument("--outlier-threshold", type=float, default=None, dest="outlier_threshold",
                        help="relative error above which a mode counts as an outlier")
    plot = sub.add_parser("plot", help="rebuild SVG plots from an existing CSV")
    plot.add_argument("kind", choices=[n for n, c in COMMANDS.items() if c.plots])
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", default=".")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "plot":
        out = Path(args.out)
        for suffix, svg in plots_from_csv(args.kind, args.csv).items():
            write_atomic(out / f"{args.kind}_{suffix}.svg", svg)
        return EXIT_OK
    try:
        cfg = load_config(args.config, args.cmd)
        out = Path(args.out or cfg.get("out", "results"))
        code = run_command(args.cmd, cfg, out, _threads(args), args.outlier_threshold)
    except ConfigError as exc:
        print(f"splinewidth: config error in field {exc.field!r}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = "all asserted cells pass" if code == EXIT_OK else "bound violation or failed check"
    print(f"splinewidth {args.cmd}: {status}; results in {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
