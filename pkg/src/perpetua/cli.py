"""Declarative experiment runner.

A YAML config names a model, coefficient functions and one experiment
kind; the runner executes the requested verification with deterministic
seeding and emits a per-replication CSV plus a JSON summary.  Replications
are processed in fixed blocks of 1024, each with its own counter-based
stream keyed by (master seed, block index), so output bytes are identical
for any worker count.  Exit codes: 0 pass, 2 statistical fail, 1 error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import apps, engine, limitlaws
from .distributions import SojournLaw
from .errors import ParseError, PerpetuaError, ValidationError
from .perpetuity import StateFns
from .semimarkov import SemiMarkovModel
from .stats import hill_index, ks_two_sample, standardize, zero_concentration_scale

SCHEMA_VERSION = 1
BLOCK_SIZE = 1024
# dedicated stream indices, far away from any block index
_REF_STREAM = 2**62
_LAW_STREAM = 2**62 + 1

KINDS = (
    "simulate",
    "verify-t1",
    "verify-t2a",
    "verify-t2b",
    "verify-t3a",
    "verify-t3b",
    "verify-t4",
    "pitchfork",
    "pitchfork-smallball",
    "ou",
    "stable-ou",
)

# artifact-local hypothesis codes used in regime diagnostics (see README)
_H_STAB = "H1: occupation-average drift must be positive"
_H_DIV = "H2: occupation-average drift must be negative"
_H_CRIT = "H3: occupation-average drift must vanish exactly"
_H_HEAVY = "H5: a dominant heavy-tail index in (1, 2) is required"
_H_CONST = "H6: decay coefficient must be state-independent"
_H_POSB = "H7: b(j) must be strictly positive"
_H_NEG = "H8: some state must have a negative decay coefficient"

_DEFAULT_TOLERANCES = {
    "simulate": {},
    "verify-t1": {"ks_d": 0.02},
    "verify-t2a": {"ks_d": 0.03, "diff_scale": 0.03},
    "verify-t2b": {"ks_d_phi": 0.03, "ks_d_i": 0.035},
    "verify-t3a": {"ks_d": 0.05, "hill_tol": 0.2},
    "verify-t3b": {"ks_d": 0.05},
    "verify-t4": {"ks_d": 0.03, "clt_z": 3.0, "max_fail_frac": 0.05, "exact_rel": 1e-10},
    "pitchfork": {"ks_d": 0.03},
    "pitchfork-smallball": {"hill_rel_tol": 0.15},
    "ou": {"ks_d": 0.03},
    "stable-ou": {"ks_d": 0.03, "hill_tol": 0.2, "sym_tol": 0.01},
}


@dataclass
class ExperimentConfig:
    """Fully resolved and validated experiment description."""

    model: SemiMarkovModel
    fns: StateFns
    kind: str
    horizon: float
    replications: int
    anchor: int
    seed: int
    workers: int
    out: str | None
    h_name: str
    alpha_star: float | None
    rho0: float
    x0: float
    steps: int
    grid: list[float]
    tolerances: dict
    var_reps: int
    kesten_reps: int
    resolved: dict = field(repr=False, default_factory=dict)

    @property
    def config_hash(self) -> str:
        doc = {k: dict(v) if isinstance(v, dict) else v for k, v in self.resolved.items()}
        # worker count and output path are execution details, not experiment identity
        doc.get("run", {}).pop("workers", None)
        doc.get("run", {}).pop("out", None)
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


_FAMILY_PARAMS = {
    "exponential": ("rate",),
    "pareto": ("shape", "scale"),
    "weibull": ("shape", "scale"),
    "gamma": ("shape", "scale"),
    "lognormal": ("mu", "sigma"),
    "uniform": ("lo", "hi"),
}


def _build_law(spec: dict) -> SojournLaw:
    family = spec.get("family")
    if family not in _FAMILY_PARAMS:
        raise ParseError(f"unknown sojourn family {family!r}")
    try:
        params = tuple(float(spec[name]) for name in _FAMILY_PARAMS[family])
    except KeyError as exc:
        raise ParseError(f"family {family!r} needs parameters {_FAMILY_PARAMS[family]}") from exc
    return SojournLaw(family, params)


def _parse_sojourn_table(raw: dict) -> dict:
    table = {}
    for key, spec in raw.items():
        try:
            i_str, j_str = str(key).split("->")
            pair = (int(i_str), int(j_str))
        except ValueError as exc:
            raise ParseError(f"sojourn key {key!r} must look like 'i->j'") from exc
        table[pair] = _build_law(dict(spec))
    return table


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse and validate one experiment config; raise with a located message.

    Overrides (seed, replications, horizon, out, workers) are applied to the
    loaded document before validation so the config hash reflects the run
    actually performed.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("config root must be a mapping")
    for section in ("model", "functions", "experiment", "run"):
        if section not in doc or not isinstance(doc[section], dict):
            raise ParseError(f"missing or malformed section {section!r}")
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("seed", "workers", "out"):
                doc["run"][key] = value
            elif key in ("replications", "horizon", "kind"):
                doc["experiment"][key] = value

    mblock = doc["model"]
    fblock = doc["functions"]
    eblock = doc["experiment"]
    rblock = doc["run"]

    try:
        sojourn = _parse_sojourn_table(mblock.get("sojourn", {}))
        model = SemiMarkovModel(
            mblock.get("transition"),
            sojourn,
            initial=mblock.get("initial"),
            states=mblock.get("states"),
        )
    except ParseError:
        raise
    except PerpetuaError as exc:
        raise ValidationError(f"{type(exc).__name__}: {exc}", cause_code=type(exc).__name__) from exc
    except (TypeError, ValueError) as exc:
        raise ParseError(f"model block: {exc}") from exc

    try:
        fns = StateFns(np.asarray(fblock.get("a"), dtype=float), np.asarray(fblock.get("b"), dtype=float))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"functions block: {exc}") from exc
    if len(fns) != model.n_states:
        raise ValidationError(
            f"functions a/b have length {len(fns)} but the model has {model.n_states} states"
        )

    kind = eblock.get("kind")
    if kind not in KINDS:
        raise ParseError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")

    tolerances = dict(_DEFAULT_TOLERANCES[kind])
    tolerances.update(eblock.get("tolerances", {}) or {})

    cfg = ExperimentConfig(
        model=model,
        fns=fns,
        kind=kind,
        horizon=float(eblock.get("horizon", 100.0)),
        replications=int(eblock.get("replications", 1000)),
        anchor=int(eblock.get("anchor", int(np.argmax(model.pi)))),
        seed=int(rblock.get("seed", 0)),
        workers=int(rblock.get("workers", 0) or _env_workers()),
        out=rblock.get("out"),
        h_name=str(fblock.get("h", "identity")),
        alpha_star=(None if fblock.get("alpha_star") is None else float(fblock["alpha_star"])),
        rho0=float(eblock.get("rho0", 1.0)),
        x0=float(eblock.get("x0", 1.0)),
        steps=int(eblock.get("steps", 2**14)),
        grid=[float(v) for v in (eblock.get("grid") or [])],
        tolerances=tolerances,
        var_reps=int(eblock.get("var_reps", 20_000)),
        kesten_reps=int(eblock.get("kesten_reps", 200_000)),
        resolved=doc,
    )
    _check_regime(cfg)
    return cfg


def _env_workers() -> int:
    try:
        return max(int(os.environ.get("PERPETUA_WORKERS", "1")), 1)
    except ValueError:
        return 1


def _check_regime(cfg: ExperimentConfig) -> None:
    """Refuse configs violating the requested kind's regime hypotheses."""
    drift = cfg.model.expected_pi_a(cfg.fns.a)
    kind = cfg.kind
    a = cfg.fns.a

    def fail(code: str, detail: str, cause: str):
        raise ValidationError(f"{cause}: [{code.split(':')[0]}] {kind} {detail} ({code})", cause_code=cause)

    if kind in ("verify-t1", "pitchfork", "pitchfork-smallball", "ou", "stable-ou"):
        if drift <= 0:
            fail(_H_STAB, f"needs E_pi a > 0, got {drift!r}", "NonConvergent")
    if kind == "verify-t2a" and drift >= 0:
        fail(_H_DIV, f"needs E_pi a < 0, got {drift!r}", "CaseMismatch")
    if kind in ("verify-t2b", "verify-t3b") and abs(drift) > 1e-12:
        fail(_H_CRIT, f"needs E_pi a = 0 exactly, got {drift!r}", "NotCritical")
    if kind in ("verify-t3a", "verify-t3b"):
        try:
            limitlaws.theorem3_params(cfg.model, cfg.fns)
        except PerpetuaError as exc:
            fail(_H_HEAVY, str(exc), type(exc).__name__)
        if kind == "verify-t3a" and drift >= 0:
            fail(_H_DIV, f"needs E_pi a < 0, got {drift!r}", "CaseMismatch")
    if kind == "verify-t4":
        if np.unique(a).size != 1 or float(a[0]) > 0:
            fail(_H_CONST, "needs a state-independent coefficient a <= 0", "NotConstantA")
    if kind in ("pitchfork", "pitchfork-smallball") and np.any(cfg.fns.b <= 0):
        fail(_H_POSB, "needs b(j) > 0 for all states", "NonPositiveB")
    if kind == "pitchfork-smallball" and float(np.min(a)) >= 0:
        fail(_H_NEG, "needs min_j a(j) < 0", "NoSignChange")
    if kind == "stable-ou":
        if cfg.alpha_star is None or not (1.0 < cfg.alpha_star < 2.0):
            fail(_H_HEAVY, f"needs alpha_star in (1, 2), got {cfg.alpha_star!r}", "UnsupportedAlpha")


@dataclass
class ResultRecord:
    """Raw per-replication columns plus the summary of one run."""

    kind: str
    header: list[str]
    columns: dict
    summary: dict
    verdict: str  # "PASS" | "FAIL" | "ERROR"
    n_errors: int

    @property
    def exit_code(self) -> int:
        return {"PASS": 0, "FAIL": 2}.get(self.verdict, 1)


def _rng_for_block(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), block & (2**64 - 1)]))


def _blocks(reps: int):
    edges = list(range(0, reps, BLOCK_SIZE)) + [reps]
    return [(i, lo, hi) for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:]))]


def _run_one_block(resolved: dict, block_idx: int, lo: int, hi: int):
    cfg = parse_config(yaml.safe_dump(resolved))
    rng = _rng_for_block(cfg.seed, block_idx)
    fn = _BLOCK_FNS[cfg.kind]
    try:
        return block_idx, fn(cfg, hi - lo, rng, lo), None
    except PerpetuaError as exc:
        return block_idx, None, f"{type(exc).__name__}: {exc}"


def run(cfg: ExperimentConfig) -> ResultRecord:
    """Execute the experiment with deterministic block-level parallelism."""
    t0 = time.monotonic()
    blocks = _blocks(cfg.replications)
    results: dict[int, dict | None] = {}
    errors: dict[int, str] = {}

    if cfg.workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_run_one_block, cfg.resolved, b, lo, hi) for b, lo, hi in blocks]
            for fut in futures:
                b, cols, err = fut.result()
                results[b] = cols
                if err:
                    errors[b] = err
    else:
        for b, lo, hi in blocks:
            b, cols, err = _run_one_block(cfg.resolved, b, lo, hi)
            results[b] = cols
            if err:
                errors[b] = err

    n_errors = sum(hi - lo for b, lo, hi in blocks if b in errors)
    columns: dict[str, np.ndarray] = {}
    good = [results[b] for b, _, _ in blocks if b not in errors]
    if good:
        for key in good[0]:
            columns[key] = np.concatenate([g[key] for g in good])
    if columns and "rep" not in columns:
        columns = {"rep": np.arange(len(next(iter(columns.values()))), dtype=np.int64), **columns}

    summary: dict = {
        "schema_version": SCHEMA_VERSION,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash,
        "replications": cfg.replications,
        "errors": n_errors,
        "error_detail": sorted(set(errors.values()))[:5],
    }

    if n_errors > 0.001 * cfg.replications:
        summary["wall_time_s"] = time.monotonic() - t0
        return ResultRecord(cfg.kind, list(columns), columns, summary, "ERROR", n_errors)

    reduce_fn = _REDUCE_FNS[cfg.kind]
    ref_rng = _rng_for_block(cfg.seed, _REF_STREAM)
    law_rng = _rng_for_block(cfg.seed, _LAW_STREAM)
    try:
        verdict = reduce_fn(cfg, columns, summary, ref_rng, law_rng)
    except PerpetuaError as exc:
        summary["reduce_error"] = f"{type(exc).__name__}: {exc}"
        verdict = "ERROR"
    summary["verdict"] = verdict
    summary["wall_time_s"] = time.monotonic() - t0
    return ResultRecord(cfg.kind, list(columns), columns, summary, verdict, n_errors)


# -- per-kind block functions (per-replication raw statistics) ---------------


def _block_simulate(cfg: ExperimentConfig, n: int, rng, offset: int = 0) -> dict:
    from .perpetuity import functional_at_times
    from .semimarkov import simulate

    grid = cfg.grid or list(np.linspace(cfg.horizon / 4.0, cfg.horizon, 4))
    rows_rep, rows_t, rows_state, rows_phi, rows_sign, rows_logi = [], [], [], [], [], []
    for r in range(n):
        traj = simulate(cfg.model, cfg.horizon, rng)
        folds = functional_at_times(traj, cfg.fns, grid)
        for t, f in zip(grid, folds):
            rows_rep.append(offset + r)
            rows_t.append(t)
            rows_state.append(traj.state_at(t))
            rows_phi.append(f.phi)
            rows_sign.append(f.i_sign)
            rows_logi.append(f.log_abs_i)
    return {
        "rep": np.array(rows_rep, dtype=np.int64),
        "t": np.array(rows_t),
        "state": np.array(rows_state, dtype=np.int64),
        "phi": np.array(rows_phi),
        "i_sign": np.array(rows_sign, dtype=np.int64),
        "log_abs_i": np.array(rows_logi),
    }


def _block_functionals(cfg: ExperimentConfig, n: int, rng, offset: int = 0) -> dict:
    bf = engine.phi_i_batch(cfg.model, cfg.horizon, n, rng, cfg.fns.a, cfg.fns.a, cfg.fns.b)
    return {
        "log_phi": bf.log_phi,
        "i_sign": bf.i_sign.astype(np.int64),
        "log_abs_i": bf.log_abs_i,
        "end_state": bf.end_state,
    }


def _block_pitchfork(cfg: ExperimentConfig, n: int, rng, offset: int = 0) -> dict:
    fns2 = StateFns(2.0 * cfg.fns.a, cfg.fns.b)
    bf = engine.phi_i_batch(cfg.model, cfg.horizon, n, rng, fns2.a, fns2.a, fns2.b)
    log_inv = np.logaddexp(-2.0 * math.log(cfg.rho0) + bf.log_phi, math.log(2.0) + bf.log_abs_i)
    return {"rho_sq": np.exp(-log_inv)}


def _block_smallball(cfg: ExperimentConfig, n: int, rng, offset: int = 0) -> dict:
    law = apps.pitchfork_stationary_law(cfg.model, cfg.fns, rng)
    return {"rho_sq_inf": law.sample(rng, n)}


def _block_ou(cfg: ExperimentConfig, n: int, rng, offset: int = 0) -> dict:
    h = apps.HTransform.by_name(cfg.h_name)
    return {"x_t": apps.gou_sample(cfg.model, cfg.fns, h, cfg.x0, cfg.horizon, rng, size=n)}


def _block_stable_ou(cfg: ExperimentConfig, n: int, rng, offset: int = 0) -> dict:
    return {
        "x_t": apps.stable_ou_sample(cfg.model, cfg.fns, cfg.alpha_star, cfg.x0, cfg.horizon, rng, size=n)
    }


_BLOCK_FNS = {
    "simulate": _block_simulate,
    "verify-t1": _block_functionals,
    "verify-t2a": _block_functionals,
    "verify-t2b": _block_functionals,
    "verify-t3a": _block_functionals,
    "verify-t3b": _block_functionals,
    "verify-t4": _block_functionals,
    "pitchfork": _block_pitchfork,
    "pitchfork-smallball": _block_smallball,
    "ou": _block_ou,
    "stable-ou": _block_stable_ou,
}


# -- per-kind reductions (verdicts + summaries) -------------------------------


def _ks_entry(summary: dict, name: str, sim, ref, tol: float) -> bool:
    rep = ks_two_sample(sim, ref)
    summary[name] = {
        "D": rep.statistic,
        "pvalue": rep.pvalue,
        "n": rep.n,
        "m": rep.m,
        "tolerance": tol,
    }
    return rep.statistic <= tol


def _reduce_simulate(cfg, columns, summary, ref_rng, law_rng) -> str:
    summary["rows"] = int(columns["t"].size)
    return "PASS"


def _sim_i_values(columns) -> np.ndarray:
    with np.errstate(over="ignore"):
        return columns["i_sign"] * np.exp(columns["log_abs_i"])


def _reduce_t1(cfg, columns, summary, ref_rng, law_rng) -> str:
    law = limitlaws.theorem1_law(cfg.model, cfg.fns, law_rng)
    ref = law.sample(ref_rng, cfg.replications)
    ok = _ks_entry(summary, "ks_i", _sim_i_values(columns), ref, cfg.tolerances["ks_d"])
    return "PASS" if ok else "FAIL"


def _reduce_t2a(cfg, columns, summary, ref_rng, law_rng) -> str:
    t = cfg.horizon
    drift = cfg.model.expected_pi_a(cfg.fns.a)
    stat_phi = (columns["log_phi"] + t * drift) / math.sqrt(t)
    stat_i = (columns["log_abs_i"] + t * drift) / math.sqrt(t)
    law = limitlaws.theorem2a_law(cfg.model, cfg.fns, law_rng, var_reps=cfg.var_reps)
    ref = law.sample(ref_rng, cfg.replications)[:, 0]
    ok1 = _ks_entry(summary, "ks_phi", stat_phi, ref, cfg.tolerances["ks_d"])
    ok2 = _ks_entry(summary, "ks_i", stat_i, ref, cfg.tolerances["ks_d"])
    diff = zero_concentration_scale(stat_phi - stat_i)
    summary["diff_concentration"] = {"scale": diff, "tolerance": cfg.tolerances["diff_scale"]}
    return "PASS" if ok1 and ok2 and diff <= cfg.tolerances["diff_scale"] else "FAIL"


def _reduce_t2b(cfg, columns, summary, ref_rng, law_rng) -> str:
    t = cfg.horizon
    stat_phi = columns["log_phi"] / math.sqrt(t)
    stat_i = columns["log_abs_i"] / math.sqrt(t)
    law = limitlaws.theorem2b_law(cfg.model, cfg.fns, law_rng, var_reps=cfg.var_reps)
    ref = law.sample(ref_rng, cfg.replications)
    ok1 = _ks_entry(summary, "ks_phi", stat_phi, ref[:, 0], cfg.tolerances["ks_d_phi"])
    ok2 = _ks_entry(summary, "ks_i", stat_i, ref[:, 1], cfg.tolerances["ks_d_i"])
    return "PASS" if ok1 and ok2 else "FAIL"


def _reduce_t3a(cfg, columns, summary, ref_rng, law_rng) -> str:
    t = cfg.horizon
    drift = cfg.model.expected_pi_a(cfg.fns.a)
    stat = columns["log_abs_i"] + t * drift
    params = limitlaws.theorem3_params(cfg.model, cfg.fns)
    law = limitlaws.theorem3a_law(params, cfg.model)
    ref = law.sample(ref_rng, cfg.replications)[:, 0]
    ok_ks = _ks_entry(summary, "ks_standardized", standardize(stat), standardize(ref), cfg.tolerances["ks_d"])

    pos = stat[stat > 0]
    k = max(min(len(pos) // 50, len(pos) // 10), 50)
    hill = hill_index(pos, k)
    summary["hill"] = {"alpha": hill.alpha, "stderr": hill.stderr, "k": hill.k, "target": params.alpha}
    ok_hill = abs(hill.alpha - params.alpha) <= cfg.tolerances["hill_tol"]

    mix_beta = float(np.dot(cfg.model.pi, params.beta))
    skew = float(_sample_skewness(stat))
    summary["skewness"] = {"sample": skew, "mixture_beta": mix_beta}
    ok_skew = mix_beta == 0 or np.sign(skew) == np.sign(mix_beta)
    return "PASS" if ok_ks and ok_hill and ok_skew else "FAIL"


def _reduce_t3b(cfg, columns, summary, ref_rng, law_rng) -> str:
    t = cfg.horizon
    params = limitlaws.theorem3_params(cfg.model, cfg.fns)
    alpha = params.alpha
    stat_phi = columns["log_phi"] / t ** (1.0 / alpha)
    stat_i = columns["log_abs_i"] / t ** (1.0 / alpha)
    law = limitlaws.theorem3b_law(params, cfg.model, steps=cfg.steps)
    ref = law.sample(ref_rng, cfg.replications)
    ok1 = _ks_entry(summary, "ks_phi", standardize(stat_phi), standardize(ref[:, 0]), cfg.tolerances["ks_d"])
    ok2 = _ks_entry(summary, "ks_i", standardize(stat_i), standardize(ref[:, 1]), cfg.tolerances["ks_d"])
    return "PASS" if ok1 and ok2 else "FAIL"


def _reduce_t4(cfg, columns, summary, ref_rng, law_rng) -> str:
    a = float(cfg.fns.a[0])
    t = cfg.horizon
    if a < 0:
        stat = columns["i_sign"] * np.exp(columns["log_abs_i"] + a * t)
        law = limitlaws.theorem4a_law(cfg.model, cfg.fns, law_rng)
        ref = law.sample(ref_rng, cfg.replications)
        ok = _ks_entry(summary, "ks_scaled_i", stat, ref, cfg.tolerances["ks_d"])
        return "PASS" if ok else "FAIL"
    report = limitlaws.theorem4b_check(cfg.model, cfg.fns, law_rng, var_reps=cfg.var_reps)
    i_over_t = _sim_i_values(columns) / t
    summary["e_pi_b"] = report.e_pi_b
    if np.unique(cfg.fns.b).size == 1:
        b = float(cfg.fns.b[0])
        rel = np.abs(_sim_i_values(columns) - b * t) / max(abs(b) * t, 1e-300)
        summary["exact_linear"] = {"max_rel_err": float(rel.max()), "tolerance": cfg.tolerances["exact_rel"]}
        return "PASS" if rel.max() <= cfg.tolerances["exact_rel"] else "FAIL"
    scale = float(np.max(report.clt_scale)) if report.clt_scale is not None else float("nan")
    bound = cfg.tolerances["clt_z"] * scale / math.sqrt(t)
    fails = int(np.sum(np.abs(i_over_t - report.e_pi_b) > bound))
    frac = fails / len(i_over_t)
    summary["clt_band"] = {"scale": scale, "bound": bound, "failures": fails, "fraction": frac}
    return "PASS" if frac <= cfg.tolerances["max_fail_frac"] else "FAIL"


def _reduce_pitchfork(cfg, columns, summary, ref_rng, law_rng) -> str:
    law = apps.pitchfork_stationary_law(cfg.model, cfg.fns, law_rng)
    ref = apps.pitchfork_stationary_sample(cfg.model, cfg.fns, law_rng, size=cfg.replications, law=law)
    ok = _ks_entry(summary, "ks_rho_sq", columns["rho_sq"], ref, cfg.tolerances["ks_d"])
    return "PASS" if ok else "FAIL"


def _reduce_smallball(cfg, columns, summary, ref_rng, law_rng) -> str:
    result = apps.smallball_exponent(cfg.model, cfg.fns, law_rng, reps=cfg.kesten_reps)
    inv = 1.0 / columns["rho_sq_inf"]
    k = max(min(len(inv) // 50, len(inv) // 10), 50)
    hill = hill_index(inv, k)
    rel = abs(hill.alpha - result.nu_star) / result.nu_star
    summary["smallball"] = {
        "nu_star": result.nu_star,
        "hill_alpha": hill.alpha,
        "hill_stderr": hill.stderr,
        "rel_gap": rel,
        "tolerance": cfg.tolerances["hill_rel_tol"],
    }
    # raw small-ball ratios at two sample thresholds, reported without a gate
    ratios = {}
    for eps in (1e-2, 1e-3):
        ratios[str(eps)] = float(eps ** (-result.nu_star) * np.mean(columns["rho_sq_inf"] < eps))
    summary["smallball_ratios"] = ratios
    return "PASS" if rel <= cfg.tolerances["hill_rel_tol"] else "FAIL"


def _reduce_ou(cfg, columns, summary, ref_rng, law_rng) -> str:
    h = apps.HTransform.by_name(cfg.h_name)
    law = limitlaws.theorem1_law(cfg.model, StateFns(2.0 * cfg.fns.a, cfg.fns.b**2), law_rng)
    ref = apps.gou_stationary_sample(cfg.model, cfg.fns, h, ref_rng, size=cfg.replications, law=law)
    ok = _ks_entry(summary, "ks_x", columns["x_t"], ref, cfg.tolerances["ks_d"])
    return "PASS" if ok else "FAIL"


def _reduce_stable_ou(cfg, columns, summary, ref_rng, law_rng) -> str:
    noise_fns = StateFns(cfg.alpha_star * cfg.fns.a, cfg.fns.b**cfg.alpha_star)
    law = limitlaws.theorem1_law(cfg.model, noise_fns, law_rng)
    ref = apps.stable_ou_stationary_sample(
        cfg.model, cfg.fns, cfg.alpha_star, ref_rng, size=cfg.replications, law=law
    )
    ok_ks = _ks_entry(summary, "ks_x", columns["x_t"], ref, cfg.tolerances["ks_d"])
    k = max(min(len(ref) // 50, len(ref) // 10), 50)
    hill = hill_index(np.abs(ref), k)
    summary["hill"] = {"alpha": hill.alpha, "stderr": hill.stderr, "target": cfg.alpha_star}
    ok_hill = abs(hill.alpha - cfg.alpha_star) <= cfg.tolerances["hill_tol"]
    sym = abs(float(np.mean(ref > 0)) - 0.5)
    summary["symmetry"] = {"gap": sym, "tolerance": cfg.tolerances["sym_tol"]}
    return "PASS" if ok_ks and ok_hill and sym <= cfg.tolerances["sym_tol"] else "FAIL"


def _sample_skewness(x: np.ndarray) -> float:
    c = x - x.mean()
    s2 = float(np.mean(c**2))
    return float(np.mean(c**3) / s2**1.5) if s2 > 0 else 0.0


_REDUCE_FNS = {
    "simulate": _reduce_simulate,
    "verify-t1": _reduce_t1,
    "verify-t2a": _reduce_t2a,
    "verify-t2b": _reduce_t2b,
    "verify-t3a": _reduce_t3a,
    "verify-t3b": _reduce_t3b,
    "verify-t4": _reduce_t4,
    "pitchfork": _reduce_pitchfork,
    "pitchfork-smallball": _reduce_smallball,
    "ou": _reduce_ou,
    "stable-ou": _reduce_stable_ou,
}


# -- emission ------------------------------------------------------------------


def _format_cell(value) -> str:
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return repr(float(value))


def emit(record: ResultRecord, path: str) -> tuple[str, str]:
    """Write <path>.csv (raw replication stats) and <path>.json (summary)."""
    base = os.fspath(path)
    os.makedirs(os.path.dirname(base) or ".", exist_ok=True)
    csv_path = base + ".csv"
    json_path = base + ".json"
    header = list(record.columns)
    cols = [record.columns[k] for k in header]
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_format_cell(v) for v in row) + "\n")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(record.summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return csv_path, json_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="perpetua",
        description="Simulate and statistically verify semi-Markov modulated perpetuities.",
    )
    parser.add_argument("kind", choices=KINDS, help="experiment kind to run")
    parser.add_argument("--config", required=True, help="YAML experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--reps", type=int, default=None, help="override experiment.replications")
    parser.add_argument("--horizon", type=float, default=None, help="override experiment.horizon")
    parser.add_argument("--out", default=None, help="override run.out output prefix")
    parser.add_argument("--workers", type=int, default=None, help="override run.workers")
    args = parser.parse_args(argv)

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
        cfg = parse_config(
            text,
            overrides={
                "seed": args.seed,
                "replications": args.reps,
                "horizon": args.horizon,
                "out": args.out,
                "workers": args.workers,
                "kind": args.kind,
            },
        )
    except (OSError, ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    record = run(cfg)
    out = cfg.out or "perpetua-result"
    csv_path, json_path = emit(record, out)
    print(f"{record.verdict}: wrote {csv_path} and {json_path}")
    for key, value in record.summary.items():
        if key in ("schema_version", "error_detail"):
            continue
        print(f"  {key}: {value}")
    return record.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
