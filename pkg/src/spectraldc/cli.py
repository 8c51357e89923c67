"""Command-line harness: experiments, SBR benchmarks, cost reports, test matrices.

Verbs::

    spectraldc experiment SPEC [--out-dir DIR]
    spectraldc bench-sbr --n N --m M [--vectors] [--seed S] [--out CSV]
    spectraldc costs --in DIR --out CSV
    spectraldc gen --kind KIND --n N --seed S --out PATH

``SPEC`` is a ``key = value`` file; keys starting with ``cfg.`` go to the
strategy configuration.  ``SPECTRALDC_SEED`` overrides every seed.  Exit
status is 0 on success, 2 for invalid input and 3 for a numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import commmodel, dense, generators, sbr, trevc
from .ledger import CostLedger
from .splitdc import (StrategyConfig, backward_error_history, line_pencil, pencil_strategy,
                      rsvd_drive, sym_strategy)

log = logging.getLogger("spectraldc")

ALGORITHMS = ("rnep", "rsep", "rgnep", "rsvd", "sbr_eig", "sbr_svd", "trevc")
SYMMETRIC_ONLY = {"rsep", "sbr_eig"}
SVD_ONLY = {"rsvd", "sbr_svd"}
RESULT_COLUMNS = ("kind", "name", "iteration", "value")
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
SEED_ENV = "SPECTRALDC_SEED"


class SpecError(ValueError):
    """Malformed or inconsistent experiment description."""


@dataclass
class ExperimentSpec:
    name: str
    generator: str
    algorithm: str
    n: int
    M: int = 3 * 64 * 64
    seed: int = 0
    gen_params: dict = field(default_factory=dict)
    cfg: StrategyConfig = field(default_factory=StrategyConfig)
    maxit: int = 60
    tol: float = 1e-10
    line: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.generator not in generators.KINDS:
            raise SpecError(f"unknown generator {self.generator!r}")
        if self.algorithm not in ALGORITHMS:
            raise SpecError(f"unknown algorithm {self.algorithm!r}")
        if self.n < 1 or self.M < 4 or self.maxit < 1:
            raise SpecError("n, M and maxit must be positive (M at least 4)")
        if self.algorithm in SYMMETRIC_ONLY and self.generator != "constructed_sym":
            raise SpecError(f"{self.algorithm} needs a symmetric generator")
        if self.algorithm in SVD_ONLY and self.generator != "constructed_svd":
            raise SpecError(f"{self.algorithm} needs the constructed_svd generator")
        if self.algorithm not in SVD_ONLY and self.generator == "constructed_svd":
            raise SpecError("constructed_svd records singular values, not eigenvalues")
        if not self.name or any(c in self.name for c in "/\\"):
            raise SpecError("name must be a plain file stem")


def _seed_override(seed):
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return seed
    try:
        return int(env)
    except ValueError:
        raise SpecError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _parse_value(text):
    t = text.strip()
    if t.lower() in ("true", "false"):
        return t.lower() == "true"
    if t.lower() in ("none", "null"):
        return None
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    if t.startswith("[") and t.endswith("]"):
        return tuple(_parse_value(p) for p in t[1:-1].split(",") if p.strip())
    return t.strip("\"'")


_GEN_KEYS = {"box", "delta", "center", "block_size"}
_LINE_KEYS = {"theta", "offset", "center_z", "radius"}


def parse_spec(text):
    """Build an :class:`ExperimentSpec` from ``key = value`` lines."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise SpecError(f"cannot parse spec: {exc}") from None
    raw = {k: _parse_value(v) for k, v in cp["experiment"].items()}
    cfg_keys = {f.name for f in fields(StrategyConfig)}
    cfg, gen, line, top = {}, {}, {}, {}
    for k, v in raw.items():
        if k.startswith("cfg."):
            if k[4:] not in cfg_keys:
                raise SpecError(f"unknown strategy option {k[4:]!r}")
            cfg[k[4:]] = v
        elif k in _GEN_KEYS:
            gen[k] = v
        elif k in _LINE_KEYS:
            line[k] = v
        else:
            top[k] = v
    missing = {"name", "generator", "algorithm", "n"} - top.keys()
    if missing:
        raise SpecError(f"missing keys: {', '.join(sorted(missing))}")
    known = {"name", "generator", "algorithm", "n", "M", "seed", "maxit", "tol"}
    extra = top.keys() - known
    if extra:
        raise SpecError(f"unknown keys: {', '.join(sorted(extra))}")
    try:
        seed = _seed_override(int(top.get("seed", 0)))
        cfg_obj = StrategyConfig(**cfg)
        if cfg_obj.rng_seed is None:
            cfg_obj = cfg_obj.with_seed(seed)
        return ExperimentSpec(
            name=str(top["name"]), generator=str(top["generator"]),
            algorithm=str(top["algorithm"]), n=int(top["n"]), M=int(top.get("M", 3 * 64 * 64)),
            seed=seed, gen_params=gen, cfg=cfg_obj, maxit=int(top.get("maxit", 60)),
            tol=float(top.get("tol", 1e-10)), line=line)
    except SpecError:
        raise
    except (TypeError, ValueError) as exc:
        raise SpecError(str(exc)) from None


def load_spec(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from None
    return parse_spec(text)


def generate(kind, n, seed, **params):
    """Matrix with its recorded spectrum (see :mod:`spectraldc.generators`)."""
    if "box" in params:
        params["box"] = tuple(params["box"])
    return generators.generate(kind, n, seed, **params)


def _match_error(computed, truth):
    """Largest distance after pairing each true value with its nearest unused estimate."""
    computed = list(np.asarray(computed, dtype=complex))
    worst = 0.0
    for t in sorted(np.asarray(truth, dtype=complex), key=lambda z: (z.real, z.imag)):
        d = [abs(c - t) for c in computed]
        i = int(np.argmin(d))
        worst = max(worst, d[i])
        computed.pop(i)
    return float(worst)


def _two_norm(A):
    return float(dense.jacobi_svd(A)[0][0]) if A.size else 0.0


def run_experiment(spec: ExperimentSpec):
    """Run one experiment; returns ``(rows, ledger)``.

    Rows follow :data:`RESULT_COLUMNS`: ``iter`` rows carry the backward
    error after each squaring step, ``summary`` rows the final metrics and
    counters.
    """
    gt = generate(spec.generator, spec.n, spec.seed, **dict(spec.gen_params))
    A = gt.matrix
    led = CostLedger(M=spec.M)
    rows = []
    summary = []
    normA = _two_norm(A)
    alg = spec.algorithm
    if alg == "rnep":
        ln = spec.line
        pencil = line_pencil(A, ln.get("theta", 0.0), ln.get("offset", 0.0),
                             ln.get("center_z", 0.0), ln.get("radius", 1.0))
        hist = backward_error_history(A, pencil, spec.cfg, led, spec.seed, spec.maxit)
        conv = -1
        for j, err, k in hist:
            rows.append(("iter", "backward_error", j, err))
            if conv < 0 and err <= spec.tol:
                conv = j
        summary += [("converged_iteration", conv),
                    ("final_backward_error", hist[-1][1] if hist else math.nan),
                    ("axis_distance", gt.axis_distance()),
                    ("split_size", hist[-1][2] if hist else 0)]
    elif alg == "rsep":
        tree = sym_strategy(A, spec.cfg, led)
        summary += [("eigenvalue_error", _match_error(tree.eigenvalues().real, gt.values) / normA),
                    ("enclosures", len(tree.enclosures()))]
    elif alg == "rgnep":
        rng = dense.make_rng(spec.seed)
        B = dense.haar_orthogonal(spec.n, "real64", rng)
        tree = pencil_strategy(B @ A, B, spec.cfg, led)
        lam = tree.eigenvalues()
        summary += [("eigenvalue_error", _match_error(lam, gt.values) / normA),
                    ("enclosures", len(tree.enclosures())),
                    ("near_singular", int(tree.near_singular))]
    elif alg == "rsvd":
        s, U, V = rsvd_drive(A, spec.cfg, led)
        summary += _svd_metrics(A, normA, s, U, V, gt.values)
    elif alg == "sbr_svd":
        s, U, V = sbr.sbr_svd(A, spec.M, True, led)
        summary += _svd_metrics(A, normA, s, U, V, gt.values)
    elif alg == "sbr_eig":
        lam, X = sbr.sbr_sym_eig(A, spec.M, True, led)
        res = dense.norms(A @ X - X * lam, "fro") / normA
        summary += [("eigenvalue_error", float(np.max(np.abs(lam - gt.values))) / normA),
                    ("residual", float(res))]
    elif alg == "trevc":
        T, Z = dense.small_schur(A)
        tv = trevc.trevc_blocked(T, led)
        V = trevc.back_transform(Z, tv, led)
        res = dense.norms(A @ V - V * tv.D, "fro") / dense.norms(A, "fro")
        summary += [("eigenvalue_error", _match_error(tv.D, gt.values) / normA),
                    ("residual", float(res))]
    summary += [("flops", led.flops), ("words", led.words_moved), ("messages", led.messages)]
    rows += [("summary", k, "", v) for k, v in summary]
    return rows, led


def _svd_metrics(A, normA, s, U, V, truth):
    rec = dense.norms(A - (U * s) @ V.conj().T, "fro") / normA
    return [("singular_value_error", float(np.max(np.abs(np.sort(s)[::-1] - truth))) / normA),
            ("reconstruction", float(rec))]


def format_rows(rows, columns=RESULT_COLUMNS):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([commmodel._fmt(v) for v in r])
    return buf.getvalue()


def ledger_artifact(led, name, n, P=1):
    return {"name": name, "M": led.M, "n": n, "P": P,
            "phases": [[ph, fl, w, m] for ph, fl, w, m in led.phase_rows()]}


def report_costs(artifacts, out=None):
    """Cost CSV (one row per phase per run) from ledger artifacts.

    ``artifacts`` holds dicts as produced by :func:`ledger_artifact` or
    paths to JSON files containing them.
    """
    rows = []
    for art in artifacts:
        if not isinstance(art, dict):
            with open(art) as fh:
                art = json.load(fh)
        for ph, fl, w, m in art["phases"]:
            rows.append((ph, fl, w, m, art["M"], art["n"], art.get("P", 1)))
    return commmodel.write_cost_csv(rows, out)


def _write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ----------------------------------------------------------------------------
# verbs

def cmd_experiment(args):
    spec = load_spec(args.spec)
    rows, led = run_experiment(spec)
    text = format_rows(rows)
    if args.out_dir is None:
        sys.stdout.write(text)
        return
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / f"{spec.name}.csv", text)
    art = json.dumps(ledger_artifact(led, spec.name, spec.n), indent=1, sort_keys=True)
    _write_text(out / f"{spec.name}.ledger.json", art + "\n")
    log.info("wrote %s", out / f"{spec.name}.csv")


def cmd_bench_sbr(args):
    if args.n < 2 or args.m < 4:
        raise SpecError("need n >= 2 and M >= 4")
    seed = _seed_override(args.seed)
    gt = generators.constructed_sym(args.n, seed)
    led = CostLedger(M=args.m)
    lam, _ = sbr.sbr_sym_eig(gt.matrix, args.m, args.vectors, led)
    err = float(np.max(np.abs(lam - gt.values)))
    log.info("max eigenvalue error %.3e", err)
    text = commmodel.write_cost_csv(commmodel.cost_rows(led, args.n))
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_costs(args):
    src = Path(getattr(args, "in"))
    if not src.is_dir():
        raise SpecError(f"{src} is not a directory")
    text = report_costs(sorted(src.glob("*.ledger.json")))
    _write_text(args.out, text)


def cmd_gen(args):
    params = {}
    for key in ("delta", "center", "block_size"):
        v = getattr(args, key)
        if v is not None:
            params[key] = v
    if args.box is not None:
        params["box"] = tuple(args.box)
    if args.n < 1:
        raise SpecError("n must be positive")
    gt = generate(args.kind, args.n, _seed_override(args.seed), **params)
    dense.write_matrix(args.out, gt.matrix)
    vals = np.asarray(gt.values, dtype=complex)
    rows = [(i, float(v.real), float(v.imag)) for i, v in enumerate(vals)]
    _write_text(args.out + ".spectrum.csv", format_rows(rows, ("index", "real", "imag")))


def build_parser():
    p = argparse.ArgumentParser(prog="spectraldc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    e = sub.add_parser("experiment", help="run one experiment description")
    e.add_argument("spec")
    e.add_argument("--out-dir", default=None)
    e.set_defaults(func=cmd_experiment)

    b = sub.add_parser("bench-sbr", help="band reduction eigensolver with cost counters")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--m", type=int, required=True, help="fast-memory words")
    b.add_argument("--vectors", action="store_true")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench_sbr)

    c = sub.add_parser("costs", help="collect ledger artifacts into one CSV")
    c.add_argument("--in", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_costs)

    g = sub.add_parser("gen", help="write a test matrix and its spectrum")
    g.add_argument("--kind", required=True, choices=generators.KINDS)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--delta", type=float)
    g.add_argument("--center", type=float)
    g.add_argument("--block-size", dest="block_size", type=int)
    g.add_argument("--box", type=float, nargs=2)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except ArithmeticError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (ValueError, TypeError, KeyError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
