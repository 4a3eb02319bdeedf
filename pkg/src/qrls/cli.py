"""Batch experiment harness.

Configuration is plain ``key = value`` text with ``#`` comments; command-line
flags override file keys. ``n`` counts unknowns per dimension, and both ``n``
and ``l`` accept comma-separated lists. Every CSV starts with a comment line
holding the package version, a hash of the effective configuration, and the
seed, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, measure, qlsa, theory
from .blocksys import (build_block_system, verify_block_bounds, verify_block_bounds_spectral,
                       write_block_system)
from .fem import CASES, ProblemSpec, assemble, spectral_bounds
from .iterate import Scheme, required_iterations, run_iterations
from .linalg import DENSE_CAP, dense_solve, write_matrix_market, write_vector

MODES = ("assemble", "classical", "qrls", "verify", "sweep")
PIPELINES = ("classical", "qrls", "verify")
POLICY_NAMES = {"discard": "discard", "restart": "restart_with_iterate",
                "restart_with_iterate": "restart_with_iterate"}
CLASSICAL_N_CAP = 1024
# above this many block-matrix rows the bounds check uses the per-eigenvalue reduction
DENSE_SVD_ROWS = 2048


class ConfigError(ValueError):
    def __init__(self, key, where, message):
        super().__init__(f"{where}: {key}: {message}")
        self.key = key
        self.where = where


def _int(v):
    return int(v)


def _real(v):
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("not a finite number")
    return x


def _int_list(v):
    items = [s.strip() for s in str(v).split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(int(s) for s in items)


def _opt_real(v):
    return None if str(v).strip().lower() in ("", "none") else _real(v)


def _opt_int(v):
    return None if str(v).strip().lower() in ("", "none") else int(v)


_PARSERS = {
    "dim": _int, "case": str, "n": _int_list, "length": _real, "l": _int_list, "c": _opt_int,
    "eps": _real, "delta": _opt_real, "seed": _int, "reps": _int, "mode": str, "out": str,
    "policy": str, "method": str, "pipeline": str, "guess_ratio": _real,
}


@dataclass(frozen=True)
class ExperimentConfig:
    dim: int = 1
    case: str = "a"
    n: tuple[int, ...] = (16,)
    length: float = 1.0
    l: tuple[int, ...] = (4,)
    c: int | None = None
    eps: float = 0.5
    delta: float | None = None
    seed: int = 0
    reps: int = 1
    mode: str = "qrls"
    out: str = "results"
    policy: str = "discard"
    method: str = "poly_emulation"
    pipeline: str = "classical"
    guess_ratio: float = 0.3
    sources: dict = field(default_factory=dict, compare=False, repr=False)

    def copies(self, l: int) -> int:
        return l - 1 if self.c is None else self.c

    def problem(self, n: int) -> ProblemSpec:
        return ProblemSpec.from_dofs(self.dim, self.case, n, self.length)

    def canonical(self) -> str:
        """Sorted ``key=value`` text of everything that affects results (``out`` excluded)."""
        parts = []
        for f in fields(self):
            if f.name in ("sources", "out"):
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(map(str, v))
            parts.append(f"{f.name}={v!r}" if isinstance(v, float) else f"{f.name}={v}")
        return "\n".join(parts)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _validate(cfg: ExperimentConfig):
    def fail(key, msg):
        raise ConfigError(key, cfg.sources.get(key, "default"), msg)

    if cfg.dim not in CASES:
        fail("dim", "must be 1 or 2")
    if cfg.case not in CASES[cfg.dim]:
        fail("case", f"must be one of {CASES[cfg.dim]} for dim={cfg.dim}")
    if min(cfg.n) < 1:
        fail("n", "must be >= 1")
    if cfg.length <= 0:
        fail("length", "must be positive")
    if min(cfg.l) < 1:
        fail("l", "must be >= 1")
    if cfg.c is not None and cfg.c < 0:
        fail("c", "must be >= 0")
    if not 0 < cfg.eps < 1:
        fail("eps", "must lie in (0, 1)")
    if cfg.delta is not None and not 0 < cfg.delta < 1:
        fail("delta", "must lie in (0, 1)")
    if cfg.seed < 0:
        fail("seed", "must be >= 0")
    if cfg.reps < 1:
        fail("reps", "must be >= 1")
    if cfg.mode not in MODES:
        fail("mode", f"must be one of {MODES}")
    if cfg.policy not in POLICY_NAMES:
        fail("policy", "must be discard or restart")
    if cfg.method not in measure.METHODS:
        fail("method", f"must be one of {measure.METHODS}")
    if cfg.pipeline not in PIPELINES:
        fail("pipeline", f"must be one of {PIPELINES}")
    if not 0 <= cfg.guess_ratio < 1:
        fail("guess_ratio", "must lie in [0, 1)")
    if cfg.dim == 1 and max(cfg.n) > CLASSICAL_N_CAP:
        fail("n", f"at most {CLASSICAL_N_CAP} unknowns")
    if cfg.dim == 2 and max(cfg.n) ** 2 > DENSE_CAP:
        fail("n", f"at most {DENSE_CAP} unknowns in total")


def parse_config(text: str = "", overrides: dict | None = None, source: str = "config") -> ExperimentConfig:
    """Parse ``key = value`` lines, apply ``overrides`` (flag values), fill defaults, validate."""
    values, sources = {}, {}

    def put(key, raw, where):
        if key not in _PARSERS:
            raise ConfigError(key, where, "unknown key")
        try:
            values[key] = _PARSERS[key](raw.strip() if isinstance(raw, str) else raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, where, f"cannot parse {raw!r} ({exc})") from None
        sources[key] = where

    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source} line {lineno}"
        if "=" not in line:
            raise ConfigError(line, where, "expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        put(key, raw, where)
    for key, raw in (overrides or {}).items():
        if raw is not None:
            put(key, str(raw), f"flag --{key}")
    cfg = ExperimentConfig(**values, sources=sources)
    _validate(cfg)
    return cfg


# ---------------------------------------------------------------- output helpers

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def _write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_csv(path, header, rows, cfg: ExperimentConfig, note: str = "") -> Path:
    path = Path(path)
    lines = [f"# qrls {__version__} config={cfg.digest()} seed={cfg.seed}" + (f" {note}" if note else ""),
             ",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _write_atomic(path, "\n".join(lines) + "\n")
    return path


def _gnuplot(out: Path, cfg: ExperimentConfig, plots) -> Path:
    """``plots``: list of (title, xlabel, ylabel, logy, [(csv, xcol, ycol, key)])."""
    lines = [f"# qrls {__version__} config={cfg.digest()}",
             "set datafile separator ','",
             "set datafile commentschars '#'",
             "set key autotitle columnhead",
             "set terminal pngcairo size 900,600"]
    for i, (title, xl, yl, logy, series) in enumerate(plots):
        lines += [f"set output '{out.name}_{i}.png'", f"set title '{title}'",
                  f"set xlabel '{xl}'", f"set ylabel '{yl}'",
                  "set logscale y" if logy else "unset logscale y"]
        parts = [f"'{Path(csv).name}' using {x}:{y} with linespoints title '{key}'"
                 for csv, x, y, key in series]
        lines.append("plot " + ", \\\n     ".join(parts))
    path = out.with_suffix(".gp")
    _write_atomic(path, "\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------- pipelines

def _bounds(A, dim):
    if dim == 1:
        return spectral_bounds(A, "analytic")
    return spectral_bounds(A, "dense_exact")


def _setup(cfg, n):
    spec = cfg.problem(n)
    A, b = assemble(spec)
    sb = _bounds(A, cfg.dim)
    return spec, A, b, sb, Scheme.richardson(sb)


def classical_rows(cfg: ExperimentConfig, n: int):
    """``(i, ||e_i||/||e_0||, i/kappa)`` for the iteration count that reaches ``eps``."""
    spec, A, b, sb, scheme = _setup(cfg, n)
    steps = required_iterations(sb, cfg.eps)
    x_exact = dense_solve(A, b)
    traj = run_iterations(A, b, np.zeros(A.n_rows), scheme, steps, x_exact, store_iterates=False)
    rel = traj.relative_errors()
    return [(i, float(e), i / sb.kappa) for i, e in enumerate(rel)], spec, sb


def qrls_rows(cfg: ExperimentConfig, n: int, l: int):
    spec, A, b, sb, scheme = _setup(cfg, n)
    c = cfg.copies(l)
    x_tilde = dense_solve(A, b)
    x_bar = x_tilde / np.linalg.norm(x_tilde)
    sys_exact = build_block_system(A, b, np.zeros(A.n_rows), scheme, l, c)
    exact = qlsa.exact_oracle(sys_exact)
    alpha = float(exact.state.block_norms()[l])
    seeds = np.random.SeedSequence([cfg.seed, n, l]).generate_state(cfg.reps, dtype=np.uint32)
    rows, attempt_rows = [], []
    for rep, s in enumerate(seeds.tolist()):
        res = measure.run_qrls(A, b, np.zeros(A.n_rows), scheme, l, cfg.eps,
                               POLICY_NAMES[cfg.policy], s, cfg.method, cfg.delta, c=c)
        inputs = theory.TheoryInputs(l, c, cfg.eps, alpha=alpha, delta=res.delta_used)
        rep_bounds = inputs.report()
        rows.append((l, res.p_success, theory.success_lower_bound(l, c),
                     float(np.linalg.norm(res.collapsed - x_bar)), res.discrepancy_vs_classical,
                     res.delta_used, res.degree_used, res.attempts, s, rep, res.outcome_index,
                     alpha, rep_bounds["post_measurement_bound"], rep_bounds["p_prime_bound"]))
        for a in res.attempt_log:
            attempt_rows.append((l, rep, a.attempt, a.outcome_index, a.success, a.p_success,
                                 a.delta, a.norm_x_in))
    return rows, attempt_rows


QRLS_HEADER = ("l", "p_success_exact", "p_success_bound", "normalized_error", "qc_discrepancy",
               "delta_used", "degree_used", "attempts", "seed", "rep", "outcome_index",
               "alpha_l", "post_measurement_bound", "p_prime_bound")
ATTEMPT_HEADER = ("l", "rep", "attempt", "outcome_index", "success", "p_success", "delta",
                  "norm_x_in")
CLASSICAL_HEADER = ("i", "rel_error", "l_over_kappa")
VERIFY_HEADER = ("n", "l", "c", "kappa_A", "norm_M", "norm_M_inv", "kappa_M", "kappa_M_bound",
                 "bounds_method", "block_bounds_ok", "p_success", "p_success_bound",
                 "guess_ratio", "p_success_guess", "p_success_guess_bound", "delta",
                 "alpha_l", "alpha_worst_case", "collapse_error", "collapse_error_bound",
                 "p_prime", "p_prime_bound")


def verify_row(cfg: ExperimentConfig, n: int, l: int):
    """One line of bound checks: conditioning, success probability, precision propagation."""
    spec, A, b, sb, scheme = _setup(cfg, n)
    c = cfg.copies(l)
    sys0 = build_block_system(A, b, np.zeros(A.n_rows), scheme, l, c)
    if sys0.M.n_rows <= DENSE_SVD_ROWS:
        rep = verify_block_bounds(sys0.M, l, c, raise_on_violation=False)
    else:
        rep = verify_block_bounds_spectral(A, scheme, l, c, raise_on_violation=False)
    exact = qlsa.exact_oracle(sys0)
    dist = measure.register_probabilities(exact.state, l, c)

    # initial guess at relative distance guess_ratio from the solution
    x_tilde = dense_solve(A, b)
    r = cfg.guess_ratio
    direction = np.cos(np.arange(A.n_rows) + 1.0)
    direction /= np.linalg.norm(direction)
    x_in = x_tilde + r * np.linalg.norm(x_tilde) * direction
    sys_g = build_block_system(A, b, x_in, scheme, l, c)
    p_guess = measure.register_probabilities(qlsa.exact_oracle(sys_g).state, l, c).p_success

    delta = cfg.delta if cfg.delta is not None else theory.delta_for_epsilon(cfg.eps, l)
    alpha = float(exact.state.block_norms()[l])
    noisy = qlsa.exact_plus_noise(sys0, delta, l, "collapse")
    blk = noisy.state.block(l)
    err = float(np.linalg.norm(blk / np.linalg.norm(blk) - exact.state.block(l) / alpha))
    low = qlsa.exact_plus_noise(sys0, delta, l, "probability")
    p_prime = measure.register_probabilities(low.state, l, c).p_success
    bound_err = theory.post_measurement_error_bound(alpha, delta) if delta < alpha else math.nan
    return (n, l, c, sb.kappa, rep.norm_M, rep.norm_M_inv, rep.kappa_M, rep.bound_kappa, rep.method,
            rep.ok, dist.p_success, theory.success_lower_bound(l, c), r, p_guess,
            theory.success_lower_bound_with_guess(r, 1.0), delta, alpha,
            theory.worst_case_amplitude(l), err, bound_err, p_prime, theory.p_prime_bound(cfg.eps))


def _label(cfg, n):
    return f"{cfg.dim}d{cfg.case}_n{n}"


def run_classical(cfg, out: Path, stem="classical"):
    files, series = [], []
    for n in cfg.n:
        rows, spec, sb = classical_rows(cfg, n)
        path = write_csv(out / f"{stem}_{_label(cfg, n)}.csv", CLASSICAL_HEADER, rows, cfg,
                         f"kappa={sb.kappa:.16e}")
        files.append(path)
        series.append((path, 3, 2, f"n={n}"))
    files.append(_gnuplot(out / stem, cfg, [("relative error", "l / kappa", "||e_l|| / ||e_0||",
                                             True, series)]))
    return files


def run_qrls_mode(cfg, out: Path, pairs, stem="qrls", plot=True):
    files, disc, perr = [], [], []
    by_n = {}
    for n, l in pairs:
        by_n.setdefault(n, []).append(l)
    for n, ls in by_n.items():
        rows, attempts = [], []
        for l in ls:
            r, a = qrls_rows(cfg, n, l)
            rows += r
            attempts += a
        path = write_csv(out / f"{stem}_{_label(cfg, n)}.csv", QRLS_HEADER, rows, cfg)
        files += [path, write_csv(out / f"{stem}_{_label(cfg, n)}_attempts.csv", ATTEMPT_HEADER,
                                  attempts, cfg)]
        disc.append((path, 1, 5, f"n={n}"))
        perr.append((path, 1, 4, f"n={n}"))
    if not plot:
        return files
    files.append(_gnuplot(out / stem, cfg, [
        ("quantum vs classical iterate", "l", "discrepancy", True, disc),
        ("normalized error", "l", "||x_l - x||", True, perr)]))
    return files


def run_verify(cfg, out: Path, pairs, stem="verify", plot=True):
    rows = [verify_row(cfg, n, l) for n, l in pairs]
    path = write_csv(out / f"{stem}_{cfg.dim}d{cfg.case}.csv", VERIFY_HEADER, rows, cfg)
    if not plot:
        return [path]
    return [path, _gnuplot(out / stem, cfg, [("block condition number", "l", "kappa(M)", False,
                                              [(path, 2, 7, "measured"), (path, 2, 8, "bound")])])]


def run_assemble(cfg, out: Path):
    files = []
    for n in cfg.n:
        spec, A, b, sb, scheme = _setup(cfg, n)
        label = _label(cfg, n)
        comment = [f"qrls {__version__} config={cfg.digest()}"]
        write_matrix_market(out / f"A_{label}.mtx", A, comment)
        write_vector(out / f"b_{label}.mtx", b, comment)
        files += [out / f"A_{label}.mtx", out / f"b_{label}.mtx"]
        for l in cfg.l:
            sys_ = build_block_system(A, b, np.zeros(A.n_rows), scheme, l, cfg.copies(l))
            stem = f"block_{label}_l{l}"
            write_block_system(out, sys_, stem)
            files += [out / f"{stem}_M.mtx", out / f"{stem}_y.mtx", out / f"{stem}_meta.txt"]
    return files


def run_experiment(cfg: ExperimentConfig) -> list[Path]:
    """Run ``cfg.mode`` and return the files written."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    pairs = [(n, l) for n in cfg.n for l in cfg.l]
    if cfg.mode == "assemble":
        return run_assemble(cfg, out)
    if cfg.mode == "classical":
        return run_classical(cfg, out)
    if cfg.mode == "qrls":
        return run_qrls_mode(cfg, out, pairs)
    if cfg.mode == "verify":
        return run_verify(cfg, out, pairs)
    # sweep: one file per configuration of the cross product
    files = []
    if cfg.pipeline == "classical":
        for n in cfg.n:
            files += run_classical(replace(cfg, n=(n,)), out, stem="sweep_classical")[:-1]
        files.append(_gnuplot(out / "sweep_classical", cfg, [(
            "relative error", "l / kappa", "||e_l|| / ||e_0||", True,
            [(p, 3, 2, p.stem) for p in files])]))
        return files
    for n, l in pairs:
        sub = replace(cfg, n=(n,), l=(l,))
        if cfg.pipeline == "qrls":
            files += run_qrls_mode(sub, out, [(n, l)], stem=f"sweep_qrls_l{l}", plot=False)
        else:
            files += run_verify(sub, out, [(n, l)], stem=f"sweep_verify_n{n}_l{l}", plot=False)
    if cfg.pipeline == "qrls":
        series = [(p, 1, 5, p.stem) for p in files if not p.stem.endswith("_attempts")]
        plot = ("quantum vs classical iterate", "l", "discrepancy", True, series)
    else:
        series = [(p, 2, 7, p.stem) for p in files]
        plot = ("block condition number", "l", "kappa(M)", False, series)
    files.append(_gnuplot(out / f"sweep_{cfg.pipeline}", cfg, [plot]))
    return files


# ---------------------------------------------------------------- entry point

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--dim")
    common.add_argument("--case")
    common.add_argument("--n", help="unknowns per dimension; comma-separated list allowed")
    common.add_argument("--l", help="relaxation steps; comma-separated list allowed")
    common.add_argument("--c", help="copies of the last iterate (default l - 1)")
    common.add_argument("--eps")
    common.add_argument("--delta", help="fixed solve precision instead of the eps rule")
    common.add_argument("--seed")
    common.add_argument("--reps")
    common.add_argument("--out", help="output directory")
    common.add_argument("--policy", choices=("discard", "restart"))
    common.add_argument("--method", choices=measure.METHODS)
    common.add_argument("--pipeline", choices=PIPELINES, help="what sweep runs")
    p = argparse.ArgumentParser(prog="qrls", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="mode", required=True)
    for mode, help_ in (("assemble", "write A, b and block systems as Matrix Market"),
                        ("classical", "relaxation error curves against l / kappa"),
                        ("qrls", "emulated quantum runs with measurement"),
                        ("verify", "check every bound on the configured cases"),
                        ("sweep", "cross product over the n and l lists")):
        sub.add_parser(mode, parents=[common], help=help_)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        text, source = "", "config"
        if args.config is not None:
            text, source = args.config.read_text(encoding="utf-8"), str(args.config)
        overrides = {k: getattr(args, k) for k in _PARSERS if k != "mode" and hasattr(args, k)}
        overrides["mode"] = args.mode
        cfg = parse_config(text, overrides, source)
        files = run_experiment(cfg)
    except Exception as exc:  # report every failure as one machine-readable line
        err = {"error": type(exc).__name__, "message": str(exc), "mode": args.mode}
        print(json.dumps(err), file=sys.stderr)
        return 1
    print(json.dumps({"mode": cfg.mode, "config": cfg.digest(), "files": [str(f) for f in files]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
