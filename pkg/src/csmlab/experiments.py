"""Config-driven experiment runner writing CSV results plus a JSON manifest.

A config is a JSON object::

    {"experiment": "overlap-decay", "params": {...}, "seed": 0, "output": "out/"}

``run_experiment`` writes ``<output>/<experiment>.csv`` and
``<output>/<experiment>.manifest.json``. The CSV depends only on the
experiment, its parameters and the seed; the manifest adds wall-clock data.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import contextuality as ks
from . import csm
from . import itp
from . import linalg as la
from . import protocols as proto
from .errors import CSMError
from .rng import RngStream

OUTPUT_ENV = "CSMLAB_OUTPUT_DIR"
DEFAULT_OUTPUT = "csmlab-output"


class ConfigError(CSMError, ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    output: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - {"experiment", "params", "seed", "output"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in data:
            raise ConfigError("config is missing 'experiment'")
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("'params' must be an object")
        return cls(str(data["experiment"]), params, seed, data.get("output"))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "params": self.params, "seed": self.seed, "output": self.output}


@dataclass
class RunManifest:
    config: dict
    version: str
    started: str
    wall_clock_s: float
    outputs: dict[str, str]  # file name -> sha256
    summary: dict

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# ---------------------------------------------------------------- parameters


def _num(params, key, default, lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    v = params.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"parameter {key!r} must be a number, got {v!r}")
    if v < lo or v > hi or (lo_open and v == lo) or (hi_open and v == hi):
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise ConfigError(f"parameter {key!r}={v!r} outside {lb}{lo}, {hi}{rb}")
    return float(v)


def _int(params, key, default, lo=1, hi=10**9):
    v = params.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"parameter {key!r} must be an integer, got {v!r}")
    if not lo <= v <= hi:
        raise ConfigError(f"parameter {key!r}={v} outside [{lo}, {hi}]")
    return v


def _int_list(params, key, default, lo=1, hi=10**9):
    v = params.get(key, default)
    if not isinstance(v, list) or not v or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"parameter {key!r} must be a non-empty list of integers")
    if any(not lo <= x <= hi for x in v):
        raise ConfigError(f"parameter {key!r} has entries outside [{lo}, {hi}]")
    return v


def _choice(params, key, default, options):
    v = params.get(key, default)
    if v not in options:
        raise ConfigError(f"parameter {key!r}={v!r} not one of {sorted(options)}")
    return v


def _reject_unknown(params, allowed):
    extra = set(params) - set(allowed)
    if extra:
        raise ConfigError(f"unknown parameters: {sorted(extra)}")


# ---------------------------------------------------------------- experiments
# Each experiment has a parser (raw params -> checked params, raising
# ConfigError) and a runner (checked params, rng, threads) -> (columns, rows,
# summary).


def _parse_overlap_decay(p):
    _reject_unknown(p, {"overlap", "epsilon", "n_sites"})
    return {
        "overlap": _num(p, "overlap", 0.9, 0, 1),
        "epsilon": _num(p, "epsilon", 1e-6, 0, 1, lo_open=True),
        "n_sites": _int(p, "n_sites", 1000, 1, 10**6),
    }


def _run_overlap_decay(q, rng, threads):
    c, eps, n = q["overlap"], q["epsilon"], q["n_sites"]
    psi, phi = itp.uniform_pair(c, n)
    found = itp.minimal_m_for_epsilon(psi, phi, eps)
    mods = itp.site_moduli(psi, phi)
    last = found.m if found.reached else n
    prefix = np.cumprod(mods[:last])
    s = np.cumsum(1 - mods[:last])
    rows = [(m + 1, prefix[m], s[m]) for m in range(last)]
    analytic = math.ceil(math.log(eps) / math.log(c)) if 0 < c < 1 else None
    return ["M", "abs_overlap", "S_M"], rows, {
        "minimal_m": found.m,
        "final_abs_overlap": found.final_modulus,
        "analytic_ceil": analytic,
    }


def _parse_operator_suppression(p):
    _reject_unknown(p, {"overlap", "n_sites", "n_operators", "sizes"})
    n = _int(p, "n_sites", 200, 1, 10**5)
    return {
        "overlap": _num(p, "overlap", 0.95, 0, 1),
        "n_sites": n,
        "n_operators": _int(p, "n_operators", 100, 1, 10**5),
        "sizes": _int_list(p, "sizes", [s for s in (1, 2, 5, 10, 20, 50, 100, 200) if s <= n], 1, n),
    }


def _run_operator_suppression(q, rng, threads):
    c, sizes = q["overlap"], q["sizes"]
    psi, phi = itp.uniform_pair(c, q["n_sites"])
    gen = rng.generator
    rows, all_ok = [], True
    for i in range(q["n_operators"]):
        a = gen.standard_normal((2, 2)) + 1j * gen.standard_normal((2, 2))
        norm = itp.opnorm(a)
        vals = itp.suppression_sequence(a, [0], psi, phi, sizes)
        for size, v in zip(sizes, vals):
            bound = norm * c ** (size - 1)
            ok = bool(v <= bound + 1e-12)
            all_ok &= ok
            rows.append((i, size, v, bound, int(ok)))
    return ["operator", "J_size", "abs_value", "bound", "within"], rows, {"all_within_bound": all_ok}


def _site_profile(profile, c, n):
    if profile == "identical":
        return [1.0] * n
    if profile == "constant":
        return [c] * n
    if profile == "inverse-square":
        return [1 - 1 / a**2 for a in range(1, n + 1)]
    return [1 - 1 / a for a in range(1, n + 1)]  # harmonic


def _parse_sector_classify(p):
    _reject_unknown(p, {"profile", "overlap", "n_sites", "threshold_converged", "threshold_diverged"})
    return {
        "profile": _choice(p, "profile", "constant", {"identical", "constant", "inverse-square", "harmonic"}),
        "overlap": _num(p, "overlap", 0.9, 0, 1),
        "n_sites": _int(p, "n_sites", 500, 1, 10**6),
        "threshold_converged": _num(p, "threshold_converged", itp.THRESHOLD_CONVERGED, 0, math.inf, lo_open=True),
        "threshold_diverged": _num(p, "threshold_diverged", itp.THRESHOLD_DIVERGED, 0, math.inf, lo_open=True),
    }


def _run_sector_classify(q, rng, threads):
    n = q["n_sites"]
    psi, phi = itp.product_pair(_site_profile(q["profile"], q["overlap"], n))
    rep = itp.sector_classify(psi, phi, q["threshold_converged"], q["threshold_diverged"])
    rows = [(m + 1, rep.moduli[m], rep.partial_sums[m]) for m in range(n)]
    return ["M", "abs_overlap", "S_M"], rows, {
        "classification": rep.classification,
        "S_N": rep.s_n,
        "tail_increment": rep.tail_increment,
        "dyadic_ratio": rep.dyadic_ratio,
    }


def _parse_decoherence(p):
    _reject_unknown(p, {"theta", "cos_theta", "n_values", "dense_max_sites"})
    if "theta" in p and "cos_theta" in p:
        raise ConfigError("give either 'theta' or 'cos_theta', not both")
    if "cos_theta" in p:
        theta = math.acos(_num(p, "cos_theta", 0.9, -1, 1))
    else:
        theta = _num(p, "theta", math.acos(0.9))
    return {
        "theta": theta,
        "n_values": _int_list(p, "n_values", [1, 2, 4, 8, 12, 16, 100, 400], 1, 10**9),
        "dense_max_sites": _int(p, "dense_max_sites", itp.DENSE_MAX_SITES, 0, 19),
    }


def _run_decoherence(q, rng, threads):
    rep = itp.decoherence_sweep(q["theta"], q["n_values"], q["dense_max_sites"])
    rows = list(
        zip(
            rep.n_values,
            rep.method,
            rep.coherence,
            rep.predicted,
            rep.relative_coherence,
            rep.repetitions,
            rep.diagonal_dominant,
        )
    )
    cols = ["N", "method", "coherence", "predicted", "relative_coherence", "repetitions_estimate", "diagonal_dominant"]
    dense_err = max((abs(r[2] - r[3]) for r in rows if r[1] == "dense"), default=0.0)
    return cols, rows, {"theta": q["theta"], "max_dense_vs_formula": dense_err}


def _born_pair(stream: RngStream, max_dim: int, trials: int):
    gen = stream.generator
    d = int(gen.integers(2, max_dim + 1))
    state = la.random_state(d, gen)
    ctx = csm.random_context(d, stream)
    probs = ctx.probabilities(state)
    counts = np.bincount(csm.sample_outcomes(state, ctx, trials, stream), minlength=d)
    return d, probs, counts


def _parse_born_sample(p):
    _reject_unknown(p, {"n_pairs", "max_dim", "trials"})
    return {
        "n_pairs": _int(p, "n_pairs", 100, 1, 10**4),
        "max_dim": _int(p, "max_dim", 8, 2, 64),
        "trials": _int(p, "trials", 100_000, 1, 10**8),
    }


def _run_born_sample(q, rng, threads):
    trials = q["trials"]
    streams = rng.spawn(q["n_pairs"])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda s: _born_pair(s, q["max_dim"], trials), streams))
    rows, worst_sum, all_ok = [], 0.0, True
    for i, (d, probs, counts) in enumerate(results):
        worst_sum = max(worst_sum, abs(probs.sum() - 1))
        for k in range(d):
            freq = counts[k] / trials
            bound = 4 * math.sqrt(probs[k] * (1 - probs[k]) / trials)
            ok = bool(abs(freq - probs[k]) <= bound)
            all_ok &= ok
            rows.append((i, d, k, probs[k], freq, bound, int(ok)))
    cols = ["pair", "dim", "outcome", "probability", "frequency", "bound_4sigma", "within"]
    return cols, rows, {"max_probability_sum_error": worst_sum, "all_within_4sigma": all_ok}


def _parse_repeatability(p):
    _reject_unknown(p, {"dim", "n_states", "repeats"})
    return {
        "dim": _int(p, "dim", 4, 2, 4096),
        "n_states": _int(p, "n_states", 5, 1, 10**4),
        "repeats": _int(p, "repeats", 10_000, 1, 10**7),
    }


def _run_repeatability(q, rng, threads):
    d = q["dim"]
    rows = []
    for i in range(q["n_states"]):
        ctx = csm.random_context(d, rng)
        first = csm.measure(la.random_state(d, rng.generator), ctx, rng)
        post, matches = first.post_state, 0
        for _ in range(q["repeats"]):
            rec = csm.measure(post, ctx, rng)
            matches += rec.index == first.index
            post = rec.post_state
        rows.append((i, d, first.index, q["repeats"], matches))
    return ["state", "dim", "first_index", "repeats", "matches"], rows, {
        "all_repeated": all(r[3] == r[4] for r in rows)
    }


def _parse_sandwich_coherent(p):
    _reject_unknown(p, {"alphas", "n_max", "trunc_tol"})
    raw = p.get("alphas", [[2.0, 0.0]])
    if not isinstance(raw, list) or not raw:
        raise ConfigError("'alphas' must be a non-empty list of [re, im] pairs")
    alphas = []
    for a in raw:
        if not (isinstance(a, list) and len(a) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in a)):
            raise ConfigError(f"bad alpha entry {a!r}; expected [re, im]")
        alphas.append(complex(a[0], a[1]))
    return {
        "alphas": alphas,
        "n_max": _int(p, "n_max", 40, 1, 4000),
        "trunc_tol": _num(p, "trunc_tol", proto.TRUNC_TOL, 0, 1, lo_open=True),
    }


def _run_sandwich_coherent(q, rng, threads):
    space = proto.FockSpace(q["n_max"])
    rows = []
    for a in q["alphas"]:
        rep = proto.sandwich_measure_coherent(a, space, rng, trunc_tol=q["trunc_tol"])
        rows.append(
            (a.real, a.imag, space.n_max, rep.certainty_probability, rep.recovery_fidelity, rep.truncation_error, rep.record.index)
        )
    cols = ["alpha_re", "alpha_im", "n_max", "p_zero_count", "recovery_fidelity", "truncation_tail", "count"]
    return cols, rows, {"min_p_zero": min(r[3] for r in rows), "min_fidelity": min(r[4] for r in rows)}


def _parse_sandwich_bell(p):
    _reject_unknown(p, {"product_trials"})
    return {"product_trials": _int(p, "product_trials", 0, 0, 10**7)}


def _run_sandwich_bell(q, rng, threads):
    rows = []
    for name, v in proto.bell_states().items():
        rep = proto.bell_measure_sandwich(v, rng)
        rows.append((name, rep.record.index, rep.label, rep.certainty_probability, rep.recovery_fidelity))
    trials = q["product_trials"]
    if trials:
        # |01> splits evenly between Psi+ and Psi-
        idx = csm.sample_outcomes(proto.BELL_ANALYSER @ la.basis_state(4, 1), proto.two_qubit_z_context(), trials, rng)
        counts = np.bincount(idx, minlength=4)
        for k in range(4):
            rows.append(("|01>", k, proto.BELL_LABELS[k], counts[k] / trials, ""))
    cols = ["input", "outcome_index", "label", "probability", "recovery_fidelity"]
    return cols, rows, {"distinct_outcomes": len({r[1] for r in rows[:4]})}


def _register_trial(stream: RngStream, k: int, depth: int):
    u = proto.random_layered_unitary(k, depth, stream)
    target = u[:, 0]
    flipped = u @ proto.register_basis_state(k, [1] + [0] * (k - 1))
    good = proto.register_check_sandwich(target, u, stream)
    bad = proto.register_check_sandwich(flipped, u, stream)
    return good.certainty_probability, bad.certainty_probability, good.recovery_fidelity, good.passed


def _parse_sandwich_register(p):
    _reject_unknown(p, {"k", "n_unitaries", "depth"})
    return {
        "k": _int(p, "k", 10, 1, 12),
        "n_unitaries": _int(p, "n_unitaries", 20, 1, 10**4),
        "depth": _int(p, "depth", 4, 1, 1000),
    }


def _run_sandwich_register(q, rng, threads):
    k = q["k"]
    streams = rng.spawn(q["n_unitaries"])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda s: _register_trial(s, k, q["depth"]), streams))
    rows = [(i, k, pg, pb, f, int(ok)) for i, (pg, pb, f, ok) in enumerate(results)]
    cols = ["unitary", "k", "pass_prob_target", "pass_prob_flipped", "recovery_fidelity", "passed"]
    return cols, rows, {
        "min_pass_target": min(r[2] for r in rows),
        "max_pass_flipped": max(r[3] for r in rows),
    }


def _parse_ks(p):
    _reject_unknown(p, {"rayset", "randomized_checks"})
    source = p.get("rayset", "bundled")
    if not isinstance(source, str):
        raise ConfigError("'rayset' must be 'bundled' or a path to a RaySet JSON file")
    return {"rayset": source, "randomized_checks": _int(p, "randomized_checks", 5, 0, 10**4)}


def _run_ks(q, rng, threads):
    if q["rayset"] == "bundled":
        rs = ks.cabello_18()
    else:
        try:
            rs = ks.RaySet.load(q["rayset"])
        except OSError as exc:
            raise ConfigError(f"cannot read ray set {q['rayset']}: {exc}") from exc
    rows = []
    full = ks.assignment_search(rs)
    rows.append(("all", full.status, int(full.complete), full.nodes, full.trace_hash))
    for i in range(q["randomized_checks"]):
        r = ks.randomized_search(rs, rng)
        rows.append((f"randomized-{i}", r.status, int(r.complete), r.nodes, r.trace_hash))
    for ci in range(len(rs.contexts)):
        r = ks.assignment_search(rs.subset([ci]))
        rows.append((f"context-{ci}", r.status, int(r.complete), r.nodes, r.trace_hash))
    return ["case", "status", "complete", "nodes", "trace_sha256"], rows, {"status": full.status}


def _parse_exclusivity(p):
    _reject_unknown(p, {"n_contexts", "dims", "n_candidates"})
    return {
        "n_contexts": _int(p, "n_contexts", 100, 1, 10**5),
        "dims": _int_list(p, "dims", [2, 3, 4, 5, 6, 7, 8], 1, 4096),
        "n_candidates": _int(p, "n_candidates", 100, 1, 10**6),
    }


def _run_exclusivity(q, rng, threads):
    dims = q["dims"]
    rows = []
    for i in range(q["n_contexts"]):
        d = dims[i % len(dims)]
        rep = csm.assert_exclusivity_bound(csm.random_context(d, rng), rng, q["n_candidates"])
        rows.append((i, d, rep.max_residual, int(rep.passed)))
    return ["context", "dim", "max_residual", "passed"], rows, {"max_residual": max(r[2] for r in rows)}


EXPERIMENTS: dict[str, tuple[Callable, Callable]] = {
    "overlap-decay": (_parse_overlap_decay, _run_overlap_decay),
    "operator-suppression": (_parse_operator_suppression, _run_operator_suppression),
    "sector-classify": (_parse_sector_classify, _run_sector_classify),
    "decoherence": (_parse_decoherence, _run_decoherence),
    "born-sample": (_parse_born_sample, _run_born_sample),
    "repeatability": (_parse_repeatability, _run_repeatability),
    "sandwich-coherent": (_parse_sandwich_coherent, _run_sandwich_coherent),
    "sandwich-bell": (_parse_sandwich_bell, _run_sandwich_bell),
    "sandwich-register": (_parse_sandwich_register, _run_sandwich_register),
    "ks": (_parse_ks, _run_ks),
    "exclusivity": (_parse_exclusivity, _run_exclusivity),
}


# ---------------------------------------------------------------- running


def bundled_config_path(name: str) -> Path:
    return Path(str(resources.files("csmlab") / "configs" / f"{name}.json"))


def resolve_config(ref: str) -> ExperimentConfig:
    """Load a config from a path, or a bundled one by experiment name."""
    path = Path(ref)
    if not path.exists() and ref in EXPERIMENTS:
        path = bundled_config_path(ref)
    return ExperimentConfig.load(path)


def validate_config(config: ExperimentConfig) -> dict:
    """Check the experiment name and parameters; returns the parsed parameters."""
    if config.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {config.experiment!r}; known: {', '.join(EXPERIMENTS)}")
    parse, _ = EXPERIMENTS[config.experiment]
    return parse(config.params)


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_csv(columns, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(v) for v in r])
    return buf.getvalue().encode("utf-8")


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def output_dir(config: ExperimentConfig, override: str | None = None) -> Path:
    return Path(override or config.output or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def run_experiment(
    config: ExperimentConfig, out: str | None = None, seed: int | None = None, threads: int = 1
) -> tuple[RunManifest, dict[str, Path]]:
    """Run one experiment and write its CSV and manifest; returns both."""
    if seed is not None:
        config = ExperimentConfig(config.experiment, config.params, seed, config.output)
    parsed = validate_config(config)
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    t0 = time.perf_counter()
    _, runner = EXPERIMENTS[config.experiment]
    columns, rows, summary = runner(parsed, RngStream(config.seed), max(1, threads))
    data = render_csv(columns, rows)
    elapsed = time.perf_counter() - t0

    directory = output_dir(config, out)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{config.experiment}.csv"
    _atomic_write(csv_path, data)
    manifest = RunManifest(
        config=config.to_dict(),
        version=__version__,
        started=started,
        wall_clock_s=elapsed,
        outputs={csv_path.name: hashlib.sha256(data).hexdigest()},
        summary=summary,
    )
    man_path = directory / f"{config.experiment}.manifest.json"
    _atomic_write(man_path, (manifest.to_json() + "\n").encode("utf-8"))
    return manifest, {"csv": csv_path, "manifest": man_path}
