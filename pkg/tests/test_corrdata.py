import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collinear.corrdata import (
    AccuracyPairSet,
    CorrectnessMatrix,
    MatrixFormatError,
    MatrixValidationError,
    accuracies,
    accuracy,
    align,
    align_matrices,
    format_matrix,
    load_matrix,
    parse_matrix,
    save_matrix,
)
from collinear.synth import example2, sample_matrix


def _csv(header, rows):
    return "\n".join([header] + [f"e{n}," + ",".join(map(str, r)) for n, r in enumerate(rows)]) + "\n"


def test_all_ones_file(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text(_csv("example_id,a,b,c", [[1, 1, 1]] * 4))
    m = load_matrix(path)
    assert (m.h, m.n_examples) == (3, 4)
    assert m.bits().all()


def test_bad_cell_names_location():
    text = _csv("example_id,a,b,c", [[1, 0, 1], [1, 2, 0]])
    with pytest.raises(MatrixFormatError) as exc:
        parse_matrix(text)
    msg = str(exc.value)
    assert "'2'" in msg or "2" in msg
    assert "b" in msg


def test_two_model_hand_count():
    m = parse_matrix(_csv("example_id,a,b", [[1, 0], [0, 1], [1, 1], [1, 1]]))
    assert accuracies(m).tolist() == [0.75, 0.75]


def test_crlf_and_trailing_blank_lines():
    text = "example_id,a,b\r\nx,1,0\r\ny,1,1  \r\n\r\n\n"
    m = parse_matrix(text)
    assert m.n_examples == 2
    assert accuracies(m).tolist() == [1.0, 0.5]


def test_duplicate_model_rejected():
    with pytest.raises(MatrixValidationError):
        parse_matrix(_csv("example_id,a,a", [[1, 0]]))


def test_ragged_rows_rejected():
    with pytest.raises(MatrixValidationError):
        parse_matrix("example_id,a,b\nx,1,0\ny,1\n")


def test_empty_matrix_rejected():
    with pytest.raises((MatrixValidationError, MatrixFormatError)):
        parse_matrix("example_id,a,b\n")


def test_accuracy_edge_rows():
    m = CorrectnessMatrix.from_bits(np.array([[1] * 10, [0] * 10]), ["a", "b"])
    assert accuracy(m, 0) == 1.0
    assert accuracy(m, 1) == 0.0
    with pytest.raises(IndexError):
        accuracy(m, 2)


def test_single_row_hand_count():
    m = CorrectnessMatrix.from_bits(np.array([[1, 0, 1, 1]]), ["a"])
    assert accuracy(m, 0) == 0.75


def test_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    bits = rng.integers(0, 2, size=(5, 37))
    m = CorrectnessMatrix.from_bits(bits, list("abcde"), "P")
    save_matrix(m, tmp_path / "m.csv")
    back = load_matrix(tmp_path / "m.csv", "P")
    assert back.model_names == m.model_names
    assert np.array_equal(back.bits(), bits)
    assert format_matrix(back) == format_matrix(m)


def test_align_identical():
    m = CorrectnessMatrix.from_bits(np.array([[1, 0, 0], [1, 1, 0], [1, 1, 1]]), ["x", "y", "z"])
    pairs = align(m, m)
    assert pairs.mu_p == pairs.mu_q
    assert pairs.missing == ()


def test_align_reports_missing(caplog):
    mp = CorrectnessMatrix.from_bits(np.array([[1, 0], [1, 1], [0, 0]]), ["a", "b", "c"])
    mq = CorrectnessMatrix.from_bits(np.array([[1, 1], [0, 1], [1, 0]]), ["b", "c", "d"])
    with caplog.at_level(logging.WARNING):
        pairs = align(mp, mq)
    assert set(pairs.model_names) == {"b", "c"}
    assert pairs.missing == ("a", "d")
    assert "a, d" in caplog.text
    sp, sq = align_matrices(mp, mq)
    assert sp.model_names == sq.model_names == ("b", "c")


def test_align_sorted_by_mu_p():
    mp = CorrectnessMatrix.from_bits(np.array([[1, 1], [0, 0], [1, 0]]), ["hi", "lo", "mid"])
    pairs = align(mp, mp)
    assert pairs.model_names == ("lo", "mid", "hi")


def test_align_disjoint_rejected():
    a = CorrectnessMatrix.from_bits(np.array([[1]]), ["a"])
    b = CorrectnessMatrix.from_bits(np.array([[1]]), ["b"])
    with pytest.raises(MatrixValidationError):
        align(a, b)


def test_sampled_pair_accuracies_near_planted():
    sc = example2()
    n = 200_000
    pairs = align(sample_matrix(sc.P, n, 1, label="P"), sample_matrix(sc.Q, n, 2, label="Q"))
    tol = 3 / math.sqrt(n)
    assert np.allclose(sorted(pairs.mu_p), sorted(sc.P.accuracies), atol=tol)
    by_name = dict(zip(pairs.model_names, pairs.mu_q))
    for name, mu in zip(("f1", "f2", "f3"), sc.Q.accuracies):
        assert abs(by_name[name] - mu) <= tol


def test_pair_set_validation():
    with pytest.raises(MatrixValidationError):
        AccuracyPairSet(("a", "b"), (0.5, 0.4), (0.1, 0.2))
    with pytest.raises(MatrixValidationError):
        AccuracyPairSet((), (), ())


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 70), st.integers(0, 2**32 - 1))
def test_accuracy_is_count_over_n_and_permutation_invariant(h, n, seed):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(h, n))
    m = CorrectnessMatrix.from_bits(bits, [f"m{i}" for i in range(h)])
    acc = accuracies(m)
    assert np.all((acc >= 0) & (acc <= 1))
    counts = acc * n
    assert np.allclose(counts, np.rint(counts), atol=1e-9)
    assert counts.round().astype(int).tolist() == bits.sum(axis=1).tolist()
    shuffled = CorrectnessMatrix.from_bits(bits[:, rng.permutation(n)], m.model_names)
    assert accuracies(shuffled).tolist() == acc.tolist()
