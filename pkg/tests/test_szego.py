import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mopuc.measure import fourier_measure, grid_angles, grid_measure, lebesgue, measure_from_alphas, moments, with_atoms
from mopuc.polynomials import VerblunskySequence
from mopuc.szego import (
    MINUS_INFINITY,
    beta_n,
    det_products,
    entropy_integral,
    entropy_trace,
    hl_distance,
    hl_infimum_check,
    hl_infimum_sequence,
    jensen_check,
    left_log_beta_sequence,
    log_beta_sequence,
    rho_product,
    szego_report,
)

from corpus import full_corpus, geometric, resolvable_rmax
from oracles import (
    logm_h,
    one_alpha_density,
    random_hpd,
    random_sequence,
    random_unitary,
    scalar_bs_density,
    scalar_entropy,
    trig_density,
)

seeds = st.integers(0, 2**32 - 1)
LOG_075 = math.log(0.75)


# ------------------------------------------------------------------ entropy


def test_entropy_lebesgue():
    np.testing.assert_array_equal(entropy_integral(lebesgue(2)), np.zeros((2, 2)))
    np.testing.assert_array_equal(entropy_integral(lebesgue(2, 64)), np.zeros((2, 2)))


def test_entropy_scalar_bs():
    m = measure_from_alphas(np.array([[[0.5]]]))
    ref = scalar_entropy(lambda t: one_alpha_density(0.5, t), 2 * m.grid_size)
    assert abs(ref - LOG_075) < 1e-14
    assert entropy_integral(m)[0, 0].real == pytest.approx(ref, abs=1e-12)


def test_entropy_divergent():
    samples = np.broadcast_to(np.eye(2), (256, 2, 2)).copy()
    samples[:64, 1, 1] = 0.0  # rank-deficient on an arc
    m = grid_measure(samples, normalize=True)
    assert entropy_integral(m) is MINUS_INFINITY
    assert entropy_trace(entropy_integral(m)) == -math.inf


def test_entropy_ignores_atoms(rng):
    bs = measure_from_alphas(random_sequence(rng, 2, 2, 0.6))
    mixed = with_atoms(bs, [(0.5, 0.1 * np.eye(2))], 0.9)
    np.testing.assert_allclose(entropy_integral(mixed), entropy_integral(bs) + math.log(0.9) * np.eye(2), atol=1e-12)


def test_minus_infinity_is_a_singleton():
    import pickle

    assert pickle.loads(pickle.dumps(MINUS_INFINITY)) is MINUS_INFINITY
    assert repr(MINUS_INFINITY) == "MINUS_INFINITY"


# ------------------------------------------------------------------- beta_n


def test_beta_examples():
    seq = VerblunskySequence(np.array([[[0.5]]]))
    np.testing.assert_allclose(beta_n(seq, 0), np.eye(1), atol=1e-15)
    assert beta_n(seq, 1)[0, 0].real == pytest.approx(0.75, abs=1e-12)


@given(seeds, st.integers(1, 6), st.integers(1, 3))
def test_beta_commuting_normal(seed, n, ell):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng, ell)
    # eigenvalue moduli <= 0.6 keep the density resolvable on the default grid
    a = np.array([(u * (rng.uniform(0, 0.6, ell) * np.exp(2j * np.pi * rng.uniform(size=ell)))) @ u.conj().T for _ in range(n)])
    seq = VerblunskySequence(a)
    prod = np.eye(ell)
    for x in a:
        prod = prod @ (np.eye(ell) - x @ x.conj().T)
    np.testing.assert_allclose(beta_n(seq, n), prod, atol=1e-8)


@given(seeds, st.integers(0, 8), st.integers(1, 3))
def test_beta_bounds_and_trace_identity(seed, n, ell):
    # norms <= 0.5 keep the zeros of det phi* far enough from the circle for the default grid
    a = random_sequence(np.random.default_rng(seed), n, ell, 0.5)
    seq = VerblunskySequence(a)
    lb = log_beta_sequence(seq)
    dets = det_products(seq)
    ref = np.concatenate([[0.0], np.cumsum([np.log(np.linalg.det(np.eye(ell) - x @ x.conj().T).real) for x in a])])
    np.testing.assert_allclose(dets, ref, atol=1e-12)
    for k in range(n + 1):
        w = np.linalg.eigvalsh(lb[k])
        assert w.max() <= 1e-10
        assert abs(np.trace(lb[k]).real - dets[k]) < 1e-8
        bw = np.linalg.eigvalsh(beta_n(seq, k))
        assert bw.min() > 0 and bw.max() <= 1 + 1e-10


def test_trace_identity_needs_grid_near_circle_zeros():
    # a length-16 draw whose det phi*_16 has a zero within 1e-6 of the circle
    rng = np.random.default_rng(5)
    hard = None
    for _ in range(30):
        seq = VerblunskySequence(random_sequence(rng, 16, 1 + int(rng.integers(3)), 0.9))
        dets = det_products(seq)
        err = abs(np.trace(log_beta_sequence(seq)[16]).real - dets[16])
        if hard is None or err > hard[1]:
            hard = (seq, err)
    seq, coarse = hard
    fine = abs(np.trace(log_beta_sequence(seq, n=65536)[16]).real - det_products(seq)[16])
    assert coarse > 1e-7
    assert fine < coarse / 4


@given(seeds, st.integers(1, 5), st.integers(1, 3))
def test_left_equals_right_for_bs(seed, n, ell):
    a = random_sequence(np.random.default_rng(seed), n, ell, resolvable_rmax(ell))
    seq = VerblunskySequence(a)
    ent = entropy_integral(measure_from_alphas(seq))
    np.testing.assert_allclose(left_log_beta_sequence(seq)[-1], ent, atol=1e-7)
    np.testing.assert_allclose(log_beta_sequence(seq)[-1], ent, atol=1e-7)


def test_log_is_not_additive_for_noncommuting(rng):
    # tr log beta_n splits, log beta_n itself does not
    a = random_sequence(rng, 3, 2, 0.8)
    seq = VerblunskySequence(a)
    naive = sum(logm_h(np.eye(2) - x @ x.conj().T) for x in a)
    assert np.abs(log_beta_sequence(seq)[-1] - naive).max() > 1e-4


# ------------------------------------------------------------------- report


def test_report_lebesgue():
    r = szego_report(lebesgue(2), 6)
    for row in r.rows:
        assert row.matrix_residual < 1e-9 and row.trace_residual < 1e-9


def test_report_scalar_bs():
    r = szego_report(measure_from_alphas(np.array([[[0.5]]])), 8)
    assert r.rows[0].matrix_residual == pytest.approx(-LOG_075)
    for row in r.rows[1:]:
        assert row.matrix_residual < 1e-8
        assert row.tr_log_beta == pytest.approx(LOG_075, abs=1e-9)


def test_report_diagonal_geometric():
    full = geometric(np.diag([0.5, 0.3]), 24)
    ent = entropy_integral(measure_from_alphas(full))
    r = szego_report(measure_from_alphas(full), 12)
    assert r.rows[12].matrix_residual < 1e-5
    np.testing.assert_allclose(r.entropy, ent, atol=1e-14)


def test_report_csv_round_trip():
    r = szego_report(measure_from_alphas(np.array([np.diag([0.5, 0.3]), 0.2 * np.eye(2)])), 5)
    rows = list(csv.DictReader(io.StringIO(r.to_csv())))
    assert list(rows[0]) == list(r.CSV_COLUMNS)
    ent_tr = r.entropy_trace
    for parsed, row in zip(rows, r.rows):
        assert int(parsed["n"]) == row.n
        for col in r.CSV_COLUMNS[1:]:
            assert float(parsed[col]) == getattr(row, col)  # 17 digits: lossless
        assert abs(float(parsed["tr_log_beta"]) - float(parsed["det_product"])) < 1e-8
        assert float(parsed["tr_log_beta"]) >= ent_tr - 1e-6
    doc = json.loads(r.to_json())
    assert len(doc["rows"]) == 6 and doc["ell"] == 2


def test_report_divergent_entropy():
    samples = np.broadcast_to(np.eye(2), (256, 2, 2)).copy()
    samples[:64, 1, 1] = 0.0
    r = szego_report(grid_measure(samples, normalize=True), 4)
    assert r.entropy is MINUS_INFINITY
    assert all(math.isinf(row.matrix_residual) for row in r.rows)
    assert json.loads(r.to_json())["entropy"] is None


def test_szego_flag():
    short = szego_report(measure_from_alphas(np.array([[[0.5]]])), 10)
    assert short.rows[-1].szego_flag
    assert short.rows[-1].alpha_sum == pytest.approx(0.25, abs=1e-7)


@pytest.mark.parametrize("name", sorted(full_corpus()))
def test_lower_bound_on_corpus(name):
    r = szego_report(full_corpus()[name], 12)
    for row in r.rows:
        assert row.tr_log_beta >= r.entropy_trace - 1e-6


# --------------------------------------------------------------- HL distance


def test_hl_distance_examples():
    np.testing.assert_array_equal(hl_distance(VerblunskySequence.empty(2), 0), np.eye(2))
    seq = VerblunskySequence(np.array([0.5, 0.3]).reshape(2, 1, 1))
    assert hl_distance(seq, 2)[0, 0].real == pytest.approx(math.sqrt(0.75 * 0.91), rel=1e-14)


@given(seeds, st.integers(1, 5), st.integers(1, 3))
def test_hl_distance_matches_kappa(seed, n, ell):
    seq = VerblunskySequence(random_sequence(np.random.default_rng(seed), n, ell))
    for k in range(n + 1):
        d = hl_distance(seq, k)
        kinv = np.linalg.inv(seq.kappa_R[k])
        np.testing.assert_allclose(d @ d, kinv.conj().T @ kinv, atol=1e-9)
        p = rho_product(seq, k)
        np.testing.assert_allclose(p.conj().T @ p, d @ d, atol=1e-12)


@given(seeds, st.integers(1, 4), st.integers(1, 3))
def test_hl_distance_is_a_least_squares_minimum(seed, n, ell):
    # min over P of <1 - zP, 1 - zP>_L is the Schur complement [(T^{-1})_{00}]^{-1}
    rng = np.random.default_rng(seed)
    a = random_sequence(rng, n, ell, resolvable_rmax(ell))
    mom = moments(measure_from_alphas(a), n)
    t = mom.toeplitz(n + 1, left=True)
    schur = np.linalg.inv(np.linalg.inv(t)[:ell, :ell])
    d = hl_distance(VerblunskySequence(a), n)
    np.testing.assert_allclose(d @ d, schur, atol=1e-9)
    assert np.trace(d @ d).real == pytest.approx(np.trace(schur).real, abs=1e-9)


def test_hl_infimum_examples():
    assert tuple(hl_infimum_check(lebesgue(2), 4)) == pytest.approx((1.0, 1.0))
    bs = measure_from_alphas(np.array([[[0.5]]]))
    lhs, rhs = hl_infimum_sequence(bs, 6)
    assert lhs == pytest.approx(0.75, abs=1e-12)
    np.testing.assert_allclose(rhs[1:], 0.75, atol=1e-9)
    diag = measure_from_alphas(np.array([np.diag([0.5, 0.3])]))
    assert hl_infimum_check(diag, 3).lhs == pytest.approx(math.sqrt(0.75 * 0.91), abs=1e-12)


def test_hl_rhs_is_exp_mean_trace_log_beta(rng):
    a = random_sequence(rng, 4, 2, 0.8)
    _, rhs = hl_infimum_sequence(measure_from_alphas(a), 4)
    dets = det_products(VerblunskySequence(a))
    np.testing.assert_allclose(rhs, np.exp(dets / 2), rtol=1e-8)


# ------------------------------------------------------------------- Jensen


def test_jensen_constant():
    f = np.broadcast_to(np.diag([2.0, 0.5]), (64, 2, 2)).astype(complex)
    assert abs(jensen_check(f)) < 1e-12


def test_jensen_scalar():
    theta = grid_angles(4096)
    f = (1 + 0.5 * np.cos(theta)).reshape(-1, 1, 1).astype(complex)
    ref = -scalar_entropy(lambda t: 1 + 0.5 * np.cos(t), 8192)
    assert ref > 0
    assert jensen_check(f) == pytest.approx(ref, abs=1e-12)


@given(seeds, st.integers(1, 4))
def test_jensen_random(seed, ell):
    rng = np.random.default_rng(seed)
    m = fourier_measure(trig_density(rng, ell, strength=0.45), normalize=True)
    assert jensen_check(m.density_samples(512)) >= -1e-10
    f = np.array([random_hpd(rng, ell, 0.05, 20) for _ in range(32)])
    assert jensen_check(f) >= -1e-10


def test_scalar_bs_entropy_is_product(rng):
    a = random_sequence(rng, 4, 1, resolvable_rmax(1)).ravel()
    m = measure_from_alphas(a.reshape(4, 1, 1))
    ref = scalar_entropy(lambda t: scalar_bs_density(a, t), 8192)
    assert ref == pytest.approx(np.sum(np.log(1 - np.abs(a) ** 2)), abs=1e-12)
    assert entropy_integral(m)[0, 0].real == pytest.approx(ref, abs=1e-9)
