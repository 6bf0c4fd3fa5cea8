"""Experiment runner.

Usage::

    propspeed <subcommand> --config exp.cfg --out results/ [--mode float|exact]

Subcommands: ``propagation``, ``kernel-decay``, ``spectral-locality``,
``cosine-bounds``, ``gevrey`` (config kind ``gevrey-coefficients``).  Each run
writes one CSV (header row, floats as ``%.16e``, rationals as exact ``p/q``
strings, booleans ``true``/``false``) and a JSON summary with ``passed`` and
per-check results.  Rows are in grid order and no timings or paths are
recorded, so reruns are byte-identical.

Exit codes: 0 all checks pass, 1 some asserted inequality or invariant
failed, 2 bad configuration or usage, 3 runtime limit (dense oracle site cap,
exact-arithmetic size, quadrature accuracy).

CSV schemas
-----------
propagation
    R, max_abs_below_R, m_R, walk_count, agree_up_to, first_disagreement,
    difference_at_first, pass
kernel-decay
    R, kernel, abs_kernel, best_bound, n_star, trivial_bound, pass
    (+ moments_vanish in exact mode)
spectral-locality
    R, eps, value1, value2, measured, best_bound, n_star, trivial_bound,
    vacuous, pass (+ moments_agree in exact mode)
cosine-bounds
    check, n, x, value, bound, pass  (``x`` is ``t`` or ``R``)
gevrey-coefficients
    n, d, C_d(n)
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from propspeed import cosine_transform as ct
from propspeed import gevrey_comb as gc
from propspeed import smoothfn as sf
from propspeed.config import ConfigError, ExperimentConfig, parse_config
from propspeed.errors import DegenerateFitError, PropspeedError
from propspeed.lattice import (
    LatticeBox,
    Potential,
    SiteVector,
    dense_eigendecomposition,
    exact_kernel_entry,
    spectral_interval,
)
from propspeed.poly_calculus import gevrey_decay_fit, t41_best_bound, t41_norms, trivial_bound
from propspeed.propagation import check_vanishing, moment_agreement, shortest_walk_count
from propspeed.spectral_locality import (
    LocalityExperiment,
    interval_measure_estimate,
    oracle_interval_measure,
    t33_experiment,
)

SUBCOMMANDS = {
    "propagation": "propagation",
    "kernel-decay": "kernel-decay",
    "spectral-locality": "spectral-locality",
    "cosine-bounds": "cosine-bounds",
    "gevrey": "gevrey-coefficients",
}

_T41_SLACK = (1e-8, 1e-13)
_COEFF_SLACK = 1e-9


# ---------------------------------------------------------------------------
# formatting


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.16e" % float(v)
    return str(v)


def _json_value(v):
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


class Result:
    """CSV rows plus the JSON summary of one run."""

    def __init__(self, header):
        self.header = list(header)
        self.rows = []
        self.checks = {}
        self.summary = {}

    def row(self, *values):
        self.rows.append(values)

    def check(self, name, ok):
        self.checks[name] = bool(self.checks.get(name, True) and ok)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# builders


def build_box(cfg: ExperimentConfig) -> LatticeBox:
    return LatticeBox(cfg.d, cfg.L)


def build_potential(cfg: ExperimentConfig, box: LatticeBox, exact: bool) -> Potential:
    p = cfg.potential
    if p.type == "constant":
        return Potential.constant(box, p.value, exact=exact)
    if p.type == "sites":
        mapping = {x: v for x, v in p.sites}
        if exact:
            return Potential.from_sites(box, mapping, default=p.value, exact=True)
        return Potential.from_sites(box, {x: float(v) for x, v in mapping.items()},
                                    default=float(p.value))
    if exact:
        return Potential.rational_uniform(box, p.lo, p.hi, cfg.seed)
    return Potential.uniform(box, float(p.lo), float(p.hi), cfg.seed)


def build_function(cfg: ExperimentConfig) -> sf.SmoothFunction:
    fs = cfg.function
    if fs.family == "gaussian":
        return sf.gaussian(fs.center, fs.width)
    if fs.family == "bump":
        return sf.bump(fs.center, fs.width)
    if fs.family == "gevrey_bump":
        return sf.gevrey_bump(fs.b, fs.center, fs.width)
    if fs.family == "cosine_window":
        return sf.cosine_window(fs.omega, fs.center, fs.width)
    return sf.polynomial([float(c) for c in fs.coeffs])


def target_site(d: int, R: int) -> tuple:
    """A site at l1 distance ``R`` from the origin, spread evenly over the axes."""
    return tuple(R // d + (1 if i < R % d else 0) for i in range(d))


def _int_grid(cfg: ExperimentConfig, name: str) -> list:
    return [int(r) for r in cfg.grid_value(name)]


def _require_in_box(cfg: ExperimentConfig, Rs):
    for R in Rs:
        y = target_site(cfg.d, R)
        if max(y, default=0) > cfg.L:
            raise ConfigError(f"R={R} needs a site {y} outside the box (L={cfg.L})",
                              None, "grid.R")


# ---------------------------------------------------------------------------
# experiments


def run_propagation(cfg: ExperimentConfig) -> Result:
    exact = cfg.mode == "exact"
    box = build_box(cfg)
    v = build_potential(cfg, box, exact)
    Rs = _int_grid(cfg, "R")
    _require_in_box(cfg, Rs)
    res = Result(["R", "max_abs_below_R", "m_R", "walk_count", "agree_up_to",
                  "first_disagreement", "difference_at_first", "pass"])
    origin = (0,) * cfg.d
    residual_max = Fraction(0) if exact else 0.0
    for R in Rs:
        y = target_site(cfg.d, R)
        van = check_vanishing(box, v, SiteVector.delta(box, origin, exact),
                              SiteVector.delta(box, y, exact))
        walk = shortest_walk_count(origin, y)
        walk_ok = van.m_R == walk if exact else abs(van.m_R - walk) <= 1e-12 * walk
        agr = moment_agreement(box, v, v.added({y: cfg.params.spike}),
                               SiteVector.delta(box, origin, exact))
        first = agr.first_disagreement
        diff = None if first is None else agr.differences[first]
        ok = van.passed and walk_ok and agr.passed
        res.check("moments_vanish_below_R", van.passed)
        res.check("m_R_equals_walk_count", walk_ok)
        res.check("moments_agree_up_to_2R", agr.passed)
        residual_max = max(residual_max, van.max_residual)
        res.row(R, van.max_residual, van.m_R, walk, agr.checked_up_to, first, diff, ok)
    res.summary["residual_max"] = str(residual_max) if exact else float(residual_max)
    return res


def run_kernel_decay(cfg: ExperimentConfig) -> Result:
    exact = cfg.mode == "exact"
    box = build_box(cfg)
    v_in = build_potential(cfg, box, exact)
    v = v_in.to_float()
    f = build_function(cfg)
    Rs = _int_grid(cfg, "R")
    if any(R < 2 for R in Rs):
        raise ConfigError("kernel-decay needs R >= 2", None, "grid.R")
    _require_in_box(cfg, Rs)
    eig = dense_eigendecomposition(box, v)
    iv = spectral_interval(box, v)
    norms = t41_norms(f, iv, max(Rs))
    triv = trivial_bound(f, iv)
    header = ["R", "kernel", "abs_kernel", "best_bound", "n_star", "trivial_bound", "pass"]
    res = Result(header + (["moments_vanish"] if exact else []))
    origin = (0,) * cfg.d
    entries = []
    rel, ab = _T41_SLACK
    for R in Rs:
        y = target_site(cfg.d, R)
        k = exact_kernel_entry(eig, f, origin, y)
        n_star, bound = t41_best_bound(f, iv, R, norms)
        ok = abs(k) <= bound * (1 + rel) + ab
        res.check("t41_dominance", ok)
        extra = []
        if exact:
            van = check_vanishing(box, v_in, SiteVector.delta(box, origin, True),
                                  SiteVector.delta(box, y, True))
            res.check("moments_vanish_below_R", van.passed)
            extra = [van.passed]
        entries.append((R, k))
        res.row(R, k, abs(k), bound, n_star, triv, ok, *extra)
    try:
        fit = gevrey_decay_fit(entries, cfg.params.s)
        res.summary["decay_fit"] = dict(C=fit.C, gamma=fit.gamma, s=fit.s,
                                        residual=fit.residual, dropped=list(fit.dropped))
    except DegenerateFitError as exc:
        res.summary["decay_fit"] = dict(error=str(exc))
    res.summary["interval"] = [iv.a, iv.b]
    res.summary["eigen_residual"] = eig.residual
    return res


def run_spectral_locality(cfg: ExperimentConfig) -> Result:
    exact = cfg.mode == "exact"
    box = build_box(cfg)
    v1_in = build_potential(cfg, box, exact)
    v1 = v1_in.to_float()
    f = build_function(cfg)
    if f.support is None or f.support[0] < -1 or f.support[1] > 1:
        raise ConfigError("spectral-locality needs a profile supported in [-1, 1]",
                          None, "function.family")
    Rs = _int_grid(cfg, "R")
    if any(R < 1 for R in Rs):
        raise ConfigError("spectral-locality needs R >= 1", None, "grid.R")
    _require_in_box(cfg, Rs)
    epss = cfg.grid_value("eps")
    origin = (0,) * cfg.d
    phi = SiteVector.delta(box, origin)
    spike = cfg.params.spike
    header = ["R", "eps", "value1", "value2", "measured", "best_bound", "n_star",
              "trivial_bound", "vacuous", "pass"]
    res = Result(header + (["moments_agree"] if exact else []))
    e1 = dense_eigendecomposition(box, v1)
    brackets = []
    want_interval = cfg.params.alpha is not None and cfg.params.beta is not None
    if want_interval:
        alpha, beta = cfg.params.alpha, cfg.params.beta
        ieps = cfg.params.interval_eps or (beta - alpha) / 4
    for R in Rs:
        y = target_site(cfg.d, R)
        v2 = v1.added({y: float(spike)})
        e2 = dense_eigendecomposition(box, v2)
        extra = []
        if exact:
            agr = moment_agreement(box, v1_in, v1_in.added({y: spike}),
                                   SiteVector.delta(box, origin, True))
            res.check("moments_agree_up_to_2R", agr.passed)
            extra = [agr.passed]
        for eps in epss:
            exp = LocalityExperiment(box, phi, v1, v2, f, cfg.params.lam0, float(eps))
            rep = t33_experiment(exp, (e1, e2))
            res.check("t33_dominance", rep.passed)
            res.row(R, float(eps), rep.value1, rep.value2, rep.measured, rep.bound,
                    rep.n_star, rep.trivial_bound, rep.vacuous, rep.passed, *extra)
        if want_interval:
            for label, eig, v in (("v2", e2, v2),) + ((("v1", e1, v1),) if R == Rs[0] else ()):
                br = interval_measure_estimate(box, v, phi, (alpha, beta), ieps, eig)
                oracle = oracle_interval_measure(eig, phi, (alpha, beta))
                ok = br.contains(oracle)
                res.check("interval_bracket", ok)
                brackets.append(dict(R=R, potential=label, lower=br.lower, upper=br.upper,
                                     oracle=oracle, contains=ok))
    if want_interval:
        res.summary["interval_measure"] = brackets
    return res


def run_cosine_bounds(cfg: ExperimentConfig) -> Result:
    g = build_function(cfg)
    try:
        p = ct.CosineProfile(g)
    except ValueError as exc:
        raise ConfigError(str(exc), None, "function.family") from None
    ns = list(cfg.grid_value("n"))
    ts = [float(t) for t in cfg.grid_value("t")]
    Rs = [float(r) for r in cfg.grid_value("R")]
    if any(t <= 0 for t in ts):
        raise ConfigError("t values must be > 0", None, "grid.t")
    if any(R <= 0 for R in Rs):
        raise ConfigError("R values must be > 0", None, "grid.R")
    res = Result(["check", "n", "x", "value", "bound", "pass"])
    gauss = g.family == "gaussian" and g.center == 0.0
    for t in [0.0] + ts:
        a = ct.cosine_coefficient(p, t)
        b = ct.cosine_coefficient_lambda(p, t)
        ok = abs(a - b) <= 1e-8
        res.check("two_form_agreement", ok)
        res.row("two_form", None, t, a, b, ok)
        if gauss:
            w = g.width
            exact = w * math.exp(-(w * t) ** 2 / 4) / math.sqrt(math.pi)
            ok = abs(a - exact) <= 1e-9
            res.check("gaussian_closed_form", ok)
            res.row("closed_form", None, t, a, exact, ok)
    for n in ns:
        for t in ts:
            val = abs(ct.cosine_coefficient(p, t))
            bound = ct.coeff_decay_bound(p, n, t)
            ok = val <= bound + _COEFF_SLACK
            res.check("coeff_decay", ok)
            res.row("coeff_decay", n, t, val, bound, ok)
    lam_top = min(p.k_max(0) ** 2, 16.0)
    lam = np.linspace(0.0, lam_top, 161)
    fvals = p.f(lam)
    for R in Rs:
        tail = ct.tail_integral(p, R)
        best = math.inf
        for n in [n for n in ns if n >= 1]:
            tb = ct.t42_tail_bound(p, n, R, tail)
            best = min(best, tb.bound)
            ok = tb.quadrature <= tb.bound
            res.check("t42_tail", ok)
            res.row("t42_tail", n, R, tb.quadrature, tb.bound, ok)
        err = float(np.max(np.abs(fvals - ct.truncated_expansion(p, R, lam))))
        # the split error is bounded by the quadrature tail; allow its cutoff error
        ok = err <= tail.value + 1e-10
        res.check("roundtrip_split", ok)
        res.row("roundtrip", None, R, err, tail.value, ok)
        if math.isfinite(best):
            res.check("roundtrip_vs_t42", err <= best + 1e-10)
    if cfg.mode == "exact":
        res.summary["note"] = "quadrature is floating point in both modes"
    return res


def run_gevrey(cfg: ExperimentConfig) -> Result:
    n_max = int(cfg.grid_value("n_max"))
    res = Result(["n", "d", "C_d(n)"])
    for n in range(n_max + 1):
        tab = gc.coefficient_table(n)
        for d, v in enumerate(tab.entries):
            res.row(n, d, v)
    ind = gc.check_ind_bound(n_max)
    res.check("ind_bound", ind.passed)
    c0 = all(gc.cd(n, 0) == 2**n for n in range(max(n_max, 64) + 1))
    res.check("C0_power_of_two", c0)
    sym_n = min(cfg.params.symbolic_n_max, 14, n_max)
    sym = gc.symbolic_gn_check(sym_n)
    res.check("symbolic_oracle", sym.passed)
    inter = gc.check_intermediate_bound(min(40, n_max))
    res.check("intermediate_bound", inter.passed)
    searches = []
    for s in (1.0, 1.5, 2.0):
        cs = gc.gevrey_constant_search(s, 200)
        ok = gc.constant_search_holds(cs)
        res.check("gevrey_constant_search", ok)
        searches.append(dict(s=s, C=cs.C, argmax=list(cs.argmax), holds=ok))
    res.summary.update(
        ind_bound_pass=ind.passed,
        ind_max_ratio=ind.max_ratio,
        ind_argmax=list(ind.argmax),
        ind_violations=[list(x) for x in ind.violations],
        symbolic_n_max=sym_n,
        symbolic_mismatches=list(sym.mismatches),
        intermediate_max_ratio=inter.max_ratio,
        constant_search=searches,
    )
    if cfg.mode == "float":
        res.summary["note"] = "tables are exact integers in both modes"
    return res


RUNNERS = {
    "propagation": run_propagation,
    "kernel-decay": run_kernel_decay,
    "spectral-locality": run_spectral_locality,
    "cosine-bounds": run_cosine_bounds,
    "gevrey-coefficients": run_gevrey,
}


def run(cfg: ExperimentConfig, out_dir: str) -> int:
    """Run one experiment, write ``cfg.csv_name`` and ``cfg.json``; return the exit code."""
    res = RUNNERS[cfg.kind](cfg)
    os.makedirs(out_dir, exist_ok=True)
    summary = dict(res.summary)
    summary.update(experiment=cfg.kind, mode=cfg.mode, checks=res.checks,
                   passed=res.passed, rows=len(res.rows), csv=cfg.csv_name,
                   config=cfg.dump())
    with open(os.path.join(out_dir, cfg.csv_name), "w", newline="") as fh:
        fh.write(res.csv_text())
    with open(os.path.join(out_dir, cfg.json), "w") as fh:
        fh.write(json.dumps(_json_value(summary), indent=2, sort_keys=True) + "\n")
    return 0 if res.passed else 1


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="propspeed", description="Run verification experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--mode", choices=("float", "exact"), default=None,
                        help="scalar mode (overrides the config)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        want = SUBCOMMANDS[args.command]
        if cfg.kind != want:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand "
                              f"{args.command!r}", None, "experiment.kind")
        if args.mode is not None:
            cfg = cfg.with_mode(args.mode)
        return run(cfg, args.out)
    except (ConfigError, OSError) as exc:
        print(f"propspeed: config error: {exc}", file=sys.stderr)
        return 2
    except PropspeedError as exc:
        print(f"propspeed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
