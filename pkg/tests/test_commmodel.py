import csv
import io
import math
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectraldc import commmodel as cm
from spectraldc import dense
from spectraldc.ledger import CostLedger


# ledger ----------------------------------------------------------------------

def test_record_zero_and_additive():
    led = CostLedger(M=256)
    cm.ledger_record(led, "p", 0, 0, 0)
    assert led.flops == led.words_moved == led.messages == 0
    cm.ledger_record(led, "p", words=3, messages=1, flops=5)
    cm.ledger_record(led, "p", words=4, messages=2, flops=1)
    assert led.phases["p"].as_tuple() == (6, 7, 3)
    with pytest.raises(ValueError):
        cm.ledger_record(led, "p", words=-1)


def test_matmul_phase_total_is_sum_of_block_records():
    n, M = 64, 256
    b = math.isqrt(M // 3)
    led = CostLedger(M=M)
    A = np.random.default_rng(0).standard_normal((n, n))
    with led.in_phase("mm"):
        dense.matmul(A, A.copy(), led)
    nt = -(-n // b)
    tiles = [min(b, n - t * b) for t in range(nt)]
    flops = sum(2 * p * q * n for p in tiles for q in tiles)
    assert led.phases["mm"].flops == flops
    # every touch that misses is one message of p*q words
    assert led.phases["mm"].words >= sum(p * q for p in tiles for q in tiles)
    assert led.words_moved == led.phases["mm"].words


def test_ledger_concurrent_records_sum_exactly():
    led = CostLedger(M=1024)

    def work(k):
        for _ in range(2000):
            led.record("shared", words=k, messages=1, flops=2 * k)

    threads = [threading.Thread(target=work, args=(k,)) for k in range(1, 9)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    total = 2000 * sum(range(1, 9))
    assert led.phases["shared"].as_tuple() == (2 * total, total, 2000 * 8)
    assert (led.flops, led.words_moved, led.messages) == (2 * total, total, 16000)


# sequential formulas ---------------------------------------------------------

def test_seq_mm_spot_value():
    assert cm.seq_cost_formulas("MM", 64, 256).words == 64 ** 3 / 16


@given(st.sampled_from(cm.SEQ_KINDS), st.integers(16, 4096), st.integers(4, 1 << 16))
def test_seq_memory_exponent_law(kind, n, M):
    a = cm.seq_cost_formulas(kind, n, M, p=3)
    b = cm.seq_cost_formulas(kind, n, 2 * M, p=3)
    assert math.isclose(b.words / a.words, 2 ** -0.5, rel_tol=1e-12)
    assert math.isclose(b.messages / a.messages, 2 ** -1.5, rel_tol=1e-12)
    assert b.flops == a.flops


def test_seq_formula_errors():
    with pytest.raises(ValueError):
        cm.seq_cost_formulas("LU", 10, 100)
    with pytest.raises(ValueError):
        cm.seq_cost_formulas("MM", 0, 100)


@pytest.mark.parametrize("f0", [0.5, 0.6, 0.75, 0.9])
def test_recurrence_constant_bound(f0):
    c = cm.seq_recurrence_constant(f0)
    # T(n) = c n^3 solves T(n) = T(f0 n) + T((1-f0) n) + n^3 when
    # c (1 - f0^3 - (1-f0)^3) = 1, and 1 - f0^3 - (1-f0)^3 = 3 f0 (1-f0)
    assert math.isclose(c * (1 - f0 ** 3 - (1 - f0) ** 3), 1.0, rel_tol=1e-12)
    assert cm.seq_recurrence_total(2.0 ** 12, f0, base=1.0) <= c * 2.0 ** 36 * (1 + 1e-12)


def test_recurrence_constant_half():
    assert math.isclose(cm.seq_recurrence_constant(0.5), 4 / 3)
    assert math.isclose(cm.seq_recurrence_total(2.0 ** 10, 0.5) / 2.0 ** 30, 4 / 3 * (1 - 4.0 ** -11), rel_tol=1e-12)
    with pytest.raises(ValueError):
        cm.seq_recurrence_constant(0.4)


# parallel formulas -----------------------------------------------------------

def test_summa_spot_values():
    c = cm.par_cost_formulas("SUMMA", 1024, cm.ParallelCostParams(P=16, b=256))
    assert c.messages == 16
    assert c.words == 1024 ** 2 / 4 * 4
    assert c.flops == 1024 ** 3 / 16
    assert c.total == c.messages + c.words + c.flops


@pytest.mark.parametrize("kind", cm.PAR_KINDS)
def test_single_processor_has_no_communication(kind):
    c = cm.par_cost_formulas(kind, 100, cm.ParallelCostParams(P=1))
    assert c.messages == 0 and c.words == 0
    serial = cm.seq_recurrence_constant(0.5) if kind == "RGNEP_total" else 1.0
    assert math.isclose(c.flops, serial * 100 ** 3)


def test_rgnep_total_constant_values():
    assert cm.rgnep_total_constant(16, 0.5) == 1.5
    p = cm.ParallelCostParams(P=16, f0=0.5)
    total = cm.par_cost_formulas("RGNEP_total", 256, p)
    step = cm.par_cost_formulas("CAQR", 256, p)
    assert math.isclose(total.words, 1.5 * step.words)
    assert total.constant_factor == 1.5


def test_rgnep_unrolled_matches_constant_at_integer_depth():
    for P in (4, 16, 64):
        p = cm.ParallelCostParams(P=P, f0=0.5)
        un = cm.rgnep_total_unrolled(1000, p)
        assert math.isclose(un / (1000 ** 2 / math.sqrt(P)), cm.rgnep_total_constant(P, 0.5))


def test_ptrevc_and_param_errors():
    with pytest.raises(ValueError):
        cm.par_cost_formulas("PTREVC", 64, cm.ParallelCostParams(P=8))
    with pytest.raises(ValueError):
        cm.ParallelCostParams(P=0)
    with pytest.raises(ValueError):
        cm.par_cost_formulas("FFT", 64, cm.ParallelCostParams(P=4))
    c = cm.par_cost_formulas("PTREVC", 64, cm.ParallelCostParams(P=16))
    assert c.messages == 4 * 4 and c.words == 64 ** 2 / 4 * 4


# QR from a Schur form --------------------------------------------------------

def qr_oracle(A):
    """Householder QR (independent of the tiled kernel) with positive diagonal."""
    Q, R = np.linalg.qr(A)
    s = np.sign(np.diag(R))
    return Q * s, R * s[:, None]


def well_posed_triangular(m, rng):
    return np.linalg.qr(rng.standard_normal((m, m)))[1]


def test_s2qr_zero_x():
    R = np.triu(np.random.default_rng(0).standard_normal((4, 4))) + 3 * np.eye(4)
    Qh, Rh = cm.s2qr(R, np.zeros((3, 4)))
    assert np.allclose(np.abs(Qh), np.vstack([np.eye(4), np.zeros((3, 4))]), atol=1e-12)
    assert np.allclose(np.abs(Rh), np.abs(R), atol=1e-12)


def test_s2qr_two_by_two():
    rng = np.random.default_rng(1)
    for _ in range(5):
        R, X = well_posed_triangular(2, rng), rng.standard_normal((2, 2))
        Qh, Rh = cm.s2qr(R, X)
        Qo, Ro = qr_oracle(np.vstack([R, X]))
        assert np.abs(Rh - Ro).max() <= 1e-9
        assert np.abs(Qh - Qo).max() <= 1e-9


def test_s2qr_block_eigenvalue_identity():
    rng = np.random.default_rng(2)
    m, n = 4, 3
    R, X = well_posed_triangular(m, rng), rng.standard_normal((n, m))
    B = np.zeros((m + n, m + n))
    B[:m, :m], B[m:, :m] = R, X
    Z, T = cm.small_schur_oracle(B)
    T, Z = cm.reorder_schur(T, Z, R.diagonal())
    assert np.allclose(T.diagonal()[:m], R.diagonal(), atol=1e-10)
    assert np.allclose(T.diagonal()[m:], 0, atol=1e-10)
    assert np.linalg.norm(Z @ T @ Z.conj().T - B) <= 1e-12 * np.linalg.norm(B) * 10
    Q11 = Z[:m, :m]
    assert np.abs(np.tril(Q11, -1)).max() <= 1e-10


def test_s2qr_rank_deficient():
    R = np.diag([1.0, 0.0])
    with pytest.raises(cm.RankDeficientError):
        cm.s2qr(R, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        cm.s2qr(np.ones((2, 2)), np.zeros((2, 2)))


def test_s2qr_oracle_failure_propagates():
    def broken(B):
        raise ArithmeticError("no convergence")

    with pytest.raises(ArithmeticError):
        cm.s2qr(np.eye(2), np.ones((1, 2)), broken)


def test_s2qr_with_tree_oracle():
    rng = np.random.default_rng(3)
    R, X = well_posed_triangular(4, rng), rng.standard_normal((4, 4))
    Qh, Rh = cm.s2qr(R, X, cm.tree_schur_oracle)
    Qo, Ro = qr_oracle(np.vstack([R, X]))
    assert np.abs(Rh - Ro).max() <= 1e-8


# CSV -------------------------------------------------------------------------

def test_cost_csv_layout():
    led = CostLedger(M=256)
    led.record("a", words=10, messages=1, flops=3)
    led.record("b", flops=7)
    text = cm.write_cost_csv(cm.cost_rows(led, n=5))
    assert text.startswith("phase,flops,words,messages,M,n,P\r\n")
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[1] == ["a", "3", "10", "1", "256", "5", "1"]
    assert rows[2] == ["b", "7", "0", "0", "256", "5", "1"]
    assert cm._fmt(0.1) == "1.0000000000000001e-01"
    with pytest.raises(ValueError):
        cm.write_cost_csv([(1, 2)])
