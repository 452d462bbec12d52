"""Turn validated experiment configs into report rows."""

from __future__ import annotations

import math
import warnings
from typing import List, Optional, Tuple

import numpy as np

from . import estimators as est
from .claim_vectors import PreAsymptoticError, PreAsymptoticWarning, projection_tail, tail_prob
from .config import ExperimentConfig, RunConfig
from .processes import check_assumption_3_1, check_assumption_4_1, is_levy, laplace_exponent
from .rare_sets import ruin_to_rare
from .report import ReportRow
from .risk_model import RiskModelSpec
from .stats import EstimateReport


def seeded_rng(seed: int, salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31 + salt,)))


def _flags(*groups) -> Tuple[str, ...]:
    out = tuple(f for g in groups for f in g)
    return out or ("ok",)


def _asym(fn, *args) -> Tuple[Optional[float], Tuple[str, ...]]:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PreAsymptoticWarning)
        value = fn(*args)
    pre = any(issubclass(w.category, PreAsymptoticWarning) for w in caught)
    return value, (("pre-asymptotic",) if pre else ())


def _row(exp: ExperimentConfig, seed: int, x, t, rep: Optional[EstimateReport], asym: Optional[float],
         flags=()) -> ReportRow:
    mc = None if rep is None else rep.estimate
    ratio = None if mc is None or not asym else mc / asym
    return ReportRow(exp.id, x, t, mc, None if rep is None else rep.ci_low,
                     None if rep is None else rep.ci_high, asym, ratio, exp.n, seed,
                     _flags(flags, () if rep is None else rep.flags))


def moment_violation(spec: RiskModelSpec) -> Optional[str]:
    """Why the geometric moment certificate fails, or ``None`` when it holds."""
    if not is_levy(spec.returns):
        return "returns: moment certificate needs a Levy return process"
    try:
        check = check_assumption_4_1(spec.returns, spec.renewal, spec.claims.tail_index)
    except ValueError as exc:
        return f"returns: {exc}"
    return None if check.verdict else f"returns: {check.certificate}"


def assumption_violations(cfg: RunConfig) -> List[str]:
    """Assumption failures for the experiments that rely on them."""
    out = []
    for i, exp in enumerate(cfg.experiments):
        if exp.kind in ("global", "assumption-check"):
            msg = moment_violation(cfg.spec)
            if msg:
                out.append(f"experiments.{i} ({exp.id}): {msg}")
    return out


def _tail(claims, rare_set, x: float) -> Tuple[float, Tuple[str, ...]]:
    try:
        return tail_prob(claims, rare_set, x), ()
    except PreAsymptoticError:
        return float(projection_tail(claims, rare_set, x)), ("pre-asymptotic",)


def _grid_rows(exp, spec, seed, hits, rare_set, kind="entrance"):
    rows = []
    for i, x in enumerate(hits.x_grid):
        for k, t in enumerate(hits.t_grid):
            asym, fl = _asym(est.asymptotic_entrance_finite, spec, rare_set, float(x), float(t))
            rows.append(_row(exp, seed, float(x), float(t), hits.report(i, k, kind), asym, fl))
    return rows


def _run_global(exp, spec, seed, threads):
    a = exp.set.build()
    violation = moment_violation(spec)
    phi = laplace_exponent(spec.returns, spec.claims.tail_index) if violation is None else math.nan
    mc_t = [t if math.isfinite(t) else (est.truncation_horizon(spec.renewal, phi) if phi < 0 else math.nan)
            for t in exp.t_grid]
    sim_t = sorted({t for t in mc_t if math.isfinite(t)})
    hits = (est.simulate_hits(spec, a, exp.x_grid, sim_t, exp.n, seed, threads=threads, chunk=exp.chunk)
            if sim_t else None)
    rows = []
    for i, x in enumerate(exp.x_grid):
        for t, tm in zip(exp.t_grid, mc_t):
            rep = hits.report(i, sim_t.index(tm)) if hits is not None and math.isfinite(tm) else None
            if violation is not None:
                rows.append(_row(exp, seed, x, t, rep, None, ("assumption-violated",)))
                continue
            asym, fl = _asym(est.asymptotic_entrance_global, spec, a, x, t)
            rows.append(_row(exp, seed, x, t, rep, asym, fl))
    return rows


def _curve_rows(exp, spec, seed, curve, a, factor, extra=()):
    rows = []
    for x, hits in zip(curve.x_grid, curve.hits):
        tail, fl = _tail(spec.claims, a, x)
        rep = EstimateReport.from_counts(int(hits), curve.n, seed)
        if rep.estimate > est.PRE_ASYMPTOTIC_LEVEL and not fl:
            fl = ("pre-asymptotic",)
        rows.append(_row(exp, seed, float(x), None, rep, factor * tail, extra + fl))
    return rows


def _run_assumptions(exp, spec, seed):
    violation = moment_violation(spec)
    bound = math.nan
    ratio = math.nan
    if violation is None:
        check = check_assumption_4_1(spec.returns, spec.renewal, spec.claims.tail_index)
        bound, ratio = check.bound, max(check.ratios)
    rows = []
    for k, t in enumerate(exp.t_grid):
        pb = check_assumption_3_1(spec.returns, t, n_paths=min(exp.n, 100_000), rng=seeded_rng(seed, k))
        flags = ("assumption-violated",) if violation else ()
        # the path band of xi on [0, t] is reported in the interval columns
        rows.append(ReportRow(exp.id, None, t, None, 0.0 - pb.c1, pb.c2, bound, ratio, exp.n, seed, _flags(flags)))
    return rows


def run_experiment(exp: ExperimentConfig, spec: RiskModelSpec, seed: int,
                   threads: Optional[int] = 1) -> List[ReportRow]:
    """Simulate one experiment and return its rows, ``x`` major and ``t`` minor."""
    if exp.kind in ("entrance", "uniformity"):
        a = exp.set.build()
        hits = est.simulate_hits(spec, a, exp.x_grid, exp.t_grid, exp.n, seed, threads=threads, chunk=exp.chunk)
        return _grid_rows(exp, spec, seed, hits, a)
    if exp.kind == "ruin":
        L = exp.ruin(spec.dimension)
        a = ruin_to_rare(L, spec.allocation)
        hits = est.simulate_hits(spec, a, exp.x_grid, exp.t_grid, exp.n, seed, ruin_set=L,
                                 threads=threads, chunk=exp.chunk)
        return _grid_rows(exp, spec, seed, hits, a, kind="ruin")
    if exp.kind == "global":
        return _run_global(exp, spec, seed, threads)
    if exp.kind == "breiman":
        a, theta = exp.set.build(), exp.theta.build()
        curve = est.breiman_check(spec.claims, theta, a, exp.x_grid, exp.n, seeded_rng(seed, 0))
        return _curve_rows(exp, spec, seed, curve, a, theta.moment(spec.claims.tail_index))
    if exp.kind == "big-jump":
        a = exp.set.build()
        extra = ("assumption-violated",) if exp.comonotone else ()
        if exp.m == 1:
            # the sum is the single term: ratio one without simulation
            return [ReportRow(exp.id, float(x), None, None, None, None, _tail(spec.claims, a, x)[0], 1.0,
                              exp.n, seed, _flags(extra, _tail(spec.claims, a, x)[1])) for x in exp.x_grid]
        curve = est.single_big_jump_check(spec.claims, a, exp.m, exp.x_grid, exp.n, seeded_rng(seed, 0), exp.comonotone)
        return _curve_rows(exp, spec, seed, curve, a, float(exp.m), extra)
    if exp.kind == "assumption-check":
        return _run_assumptions(exp, spec, seed)
    raise ValueError(f"unknown experiment kind {exp.kind}")
