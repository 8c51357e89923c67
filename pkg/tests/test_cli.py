import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectraldc import cli, dense, generators


def spec_text(**kw):
    base = {"name": "t", "generator": "near_axis", "algorithm": "rnep", "n": 12,
            "seed": 3, "maxit": 30, "delta": 1e-2}
    base.update(kw)
    return "\n".join(f"{k} = {v}" for k, v in base.items() if v is not None)


# spec parsing ----------------------------------------------------------------

def test_parse_spec_routes_keys():
    s = cli.parse_spec(spec_text(**{"cfg.tau": 1e-12, "theta": 0.5, "box": "[-1, 1]"}))
    assert s.n == 12 and s.seed == 3 and s.maxit == 30
    assert s.cfg.tau == 1e-12 and s.cfg.rng_seed == 3
    assert s.gen_params == {"delta": 1e-2, "box": (-1, 1)}
    assert s.line == {"theta": 0.5}


@pytest.mark.parametrize("bad", [
    dict(algorithm="rsep"),
    dict(algorithm="sbr_svd"),
    dict(generator="constructed_svd"),
    dict(generator="bogus"),
    dict(algorithm="lu"),
    dict(n=0),
    dict(name=None),
    dict(colour="red"),
    {"cfg.nonsense": 1},
    dict(name="a/b"),
    dict(n="twelve"),
])
def test_spec_validation(bad):
    with pytest.raises(cli.SpecError):
        cli.parse_spec(spec_text(**bad))


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "77")
    assert cli.parse_spec(spec_text()).seed == 77
    monkeypatch.setenv(cli.SEED_ENV, "x")
    with pytest.raises(cli.SpecError):
        cli.parse_spec(spec_text())


# experiments -----------------------------------------------------------------

def summary(rows):
    return {r[1]: r[3] for r in rows if r[0] == "summary"}


def test_rnep_experiment_is_byte_identical():
    s = cli.parse_spec(spec_text())
    a = cli.format_rows(cli.run_experiment(s)[0])
    b = cli.format_rows(cli.run_experiment(cli.parse_spec(spec_text()))[0])
    assert a == b
    rows = list(csv.reader(io.StringIO(a)))
    assert rows[0] == list(cli.RESULT_COLUMNS)
    assert rows[1][0] == "iter"
    summ = summary(cli.run_experiment(s)[0])
    assert summ["converged_iteration"] >= 1
    assert summ["final_backward_error"] <= 1e-10


@pytest.mark.parametrize("gen,alg", [
    ("constructed_sym", "rsep"), ("constructed_sym", "sbr_eig"),
    ("constructed_svd", "rsvd"), ("constructed_svd", "sbr_svd"),
    ("normal_random_spectrum", "trevc"), ("normal_random_spectrum", "rgnep"),
])
def test_pipeline_experiments(gen, alg):
    s = cli.parse_spec(spec_text(generator=gen, algorithm=alg, n=16, delta=None, M=768))
    rows, led = cli.run_experiment(s)
    summ = summary(rows)
    key = "singular_value_error" if alg in cli.SVD_ONLY else "eigenvalue_error"
    assert summ[key] <= 1e-8
    assert summ["flops"] == led.flops > 0


def test_numbers_use_17_significant_digits():
    text = cli.format_rows([("summary", "x", "", 1 / 3)])
    assert text.splitlines()[1] == "summary,x,,3.3333333333333331e-01"


# CLI verbs -------------------------------------------------------------------

def test_main_experiment_and_costs(tmp_path):
    spec = tmp_path / "run.spec"
    spec.write_text(spec_text(name="run"))
    out = tmp_path / "out"
    assert cli.main(["experiment", str(spec), "--out-dir", str(out)]) == 0
    first = (out / "run.csv").read_bytes()
    assert cli.main(["experiment", str(spec), "--out-dir", str(out)]) == 0
    assert (out / "run.csv").read_bytes() == first
    art = json.loads((out / "run.ledger.json").read_text())
    assert art["n"] == 12 and art["phases"]
    cost = tmp_path / "costs.csv"
    assert cli.main(["costs", "--in", str(out), "--out", str(cost)]) == 0
    rows = list(csv.reader(cost.open()))
    assert rows[0] == ["phase", "flops", "words", "messages", "M", "n", "P"]
    assert len(rows) - 1 == len(art["phases"])


def test_costs_empty_dir(tmp_path):
    cost = tmp_path / "c.csv"
    assert cli.main(["costs", "--in", str(tmp_path), "--out", str(cost)]) == 0
    assert cost.read_bytes() == b"phase,flops,words,messages,M,n,P\r\n"
    assert cli.report_costs([]) == "phase,flops,words,messages,M,n,P\r\n"


def test_costs_word_ratio_follows_cube_law():
    words = {}
    for n in (96, 192):
        s = cli.parse_spec(spec_text(generator="constructed_sym", algorithm="sbr_eig",
                                     n=n, delta=None, M=1024))
        _, led = cli.run_experiment(s)
        text = cli.report_costs([cli.ledger_artifact(led, "r", n)])
        words[n] = sum(int(r["words"]) for r in csv.DictReader(io.StringIO(text)))
    assert abs(words[192] / words[96] / 8 - 1) <= 0.3


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.spec"
    bad.write_text(spec_text(algorithm="rsep"))
    assert cli.main(["experiment", str(bad)]) == 2
    assert cli.main(["experiment", str(tmp_path / "missing.spec")]) == 2
    assert cli.main(["nosuchverb"]) == 2
    assert cli.main(["costs", "--in", str(tmp_path / "nope"), "--out", str(tmp_path / "x")]) == 2


def test_exit_code_for_numerical_failure(monkeypatch, tmp_path):
    def fail(spec):
        raise ArithmeticError("pencil is singular")

    monkeypatch.setattr(cli, "run_experiment", fail)
    spec = tmp_path / "s.spec"
    spec.write_text(spec_text())
    assert cli.main(["experiment", str(spec)]) == 3


def test_bench_sbr_prints_costs(capsys):
    assert cli.main(["bench-sbr", "--n", "40", "--m", "256"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    phases = {r[0] for r in rows[1:]}
    assert {"sym_to_band", "band_to_tridiag"} <= phases


def test_gen_writes_matrix_and_spectrum(tmp_path):
    out = str(tmp_path / "m.bin")
    assert cli.main(["gen", "--kind", "constructed_sym", "--n", "5", "--seed", "2", "--out", out]) == 0
    A = dense.read_matrix(out)
    gt = generators.constructed_sym(5, 2)
    assert np.array_equal(A, gt.matrix)
    rows = list(csv.reader(open(out + ".spectrum.csv")))
    assert rows[0] == ["index", "real", "imag"]
    assert [float(r[1]) for r in rows[1:]] == list(gt.values)


# generators ------------------------------------------------------------------

def test_constructed_sym_matches_oracle():
    gt = generators.constructed_sym(4, seed=11)
    assert np.array_equal(gt.matrix, gt.matrix.T)
    assert np.abs(dense.jacobi_sym_eig(gt.matrix)[0] - gt.values).max() <= 1e-12


@given(st.integers(1, 30), st.integers(0, 10 ** 6))
def test_normal_random_spectrum_is_normal(n, seed):
    A = generators.normal_random_spectrum(n, seed=seed).matrix
    C = A @ A.conj().T - A.conj().T @ A
    assert np.linalg.norm(C) <= 100 * n * dense.EPS * np.linalg.norm(A) ** 2


def charpoly(A):
    """Coefficients of det(zI - A), highest degree first, by Faddeev-LeVerrier."""
    n = A.shape[0]
    c = [1.0 + 0j]
    Mk = np.zeros_like(A, dtype=complex)
    I = np.eye(n)
    for k in range(1, n + 1):
        Mk = A @ Mk + c[-1] * I
        c.append(-np.trace(A @ Mk) / k)
    return np.array(c)


@pytest.mark.parametrize("n,k", [(4, 2), (6, 3), (8, 4), (5, 5)])
def test_jordan_multiplicity_small(n, k):
    gt = generators.jordan_mix(n, 0.1, k, seed=n)
    p = np.poly1d(charpoly(gt.matrix.astype(complex)))
    derivs = [abs(p.deriv(j)(0.1)) if j else abs(p(0.1)) for j in range(k + 1)]
    scale = math.factorial(k) * max(1.0, np.abs(gt.matrix).max()) ** (n - k)
    assert max(derivs[:k]) <= 1e-8 * scale
    assert derivs[k] >= 1e-3 * math.factorial(k)


def test_generator_dispatch_and_truth():
    for kind in generators.KINDS:
        gt = generators.generate(kind, 6, seed=1)
        assert gt.matrix.shape == (6, 6) and len(gt.values) == 6
    gt = generators.near_axis(10, 1e-10, seed=0)
    assert math.isclose(gt.axis_distance(), 1e-10)
    with pytest.raises(ValueError):
        generators.generate("nope", 3)
