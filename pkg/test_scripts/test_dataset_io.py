import numpy as np
import polars as pl
import pytest
from numpy.testing import assert_allclose

from ICPydags.dataset import Dataset
from ICPydags.read_dataset import read_dataset, read_matrix, write_dataset


def test_rescale_into_margins():
    data = Dataset.from_raw([[0.0, 3.0], [10.0, 3.0], [5.0, 3.0]])
    assert_allclose(data.rows, [[0.05, 0.5], [0.95, 0.5], [0.5, 0.5]])
    assert data.n == 3 and data.d == 2
    assert data.columns == ["x1", "x2"]


def test_inverse_recovers_raw_values():
    raw = np.random.default_rng(0).normal(size=(50, 3))
    data = Dataset.from_raw(raw, margin=0.1)
    assert data.rows.min() == pytest.approx(0.1)
    assert data.rows.max() == pytest.approx(0.9)
    assert_allclose(data.raw, raw, rtol=1e-12, atol=1e-12)


def test_constant_column_maps_back_to_its_value():
    data = Dataset.from_raw([[1.0, 7.5], [2.0, 7.5]])
    assert_allclose(data.raw[:, 1], [7.5, 7.5])


def test_invalid_margin_and_values():
    with pytest.raises(ValueError):
        Dataset.from_raw([[1.0], [2.0]], margin=0.5)
    with pytest.raises(ValueError, match="margin"):
        Dataset.from_raw([[1.0], [2.0]], margin=0.0)
    with pytest.raises(ValueError, match="margin"):
        Dataset.from_rescale_record({"lower": [0.0], "upper": [1.0], "margin": 0.0})
    with pytest.raises(ValueError):
        Dataset.from_raw([[1.0], [np.nan]])


def test_rescale_record_round_trip():
    data = Dataset.from_raw([[0.0, -1.0], [4.0, 1.0]], columns=["a", "b"])
    rebuilt = Dataset.from_rescale_record(data.rescale_record(), rows=data.rows)
    assert rebuilt.columns == ["a", "b"]
    assert_allclose(rebuilt.raw, data.raw)


def test_read_csv_without_header(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("1,2\n3,4\n5,8\n")
    data = read_dataset(str(path))
    assert data.columns == ["x1", "x2"]
    assert_allclose(data.raw, [[1, 2], [3, 4], [5, 8]])


def test_read_csv_with_header(tmp_path):
    path = tmp_path / "named.csv"
    path.write_text("height,weight\n1.5,60\n1.8,80\n")
    data = read_dataset(str(path))
    assert data.columns == ["height", "weight"]
    assert_allclose(data.rows[:, 0], [0.05, 0.95])


def test_read_tsv(tmp_path):
    path = tmp_path / "data.tsv"
    path.write_text("a\tb\n0\t1\n2\t3\n")
    assert_allclose(read_matrix(str(path)), [[0, 1], [2, 3]])


def test_read_parquet(tmp_path):
    path = tmp_path / "data.parquet"
    pl.DataFrame({"u": [1, 2, 3], "v": [0.5, 0.25, 0.0]}).write_parquet(path)
    data = read_dataset(str(path))
    assert data.columns == ["u", "v"]
    assert data.n == 3


def test_read_rejects_bad_files(tmp_path):
    wrong = tmp_path / "data.json"
    wrong.write_text("[]")
    with pytest.raises(ValueError, match="Unsupported file extension"):
        read_dataset(str(wrong))

    text = tmp_path / "text.csv"
    text.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(ValueError):
        read_dataset(str(text))

    with pytest.raises(ValueError):
        read_dataset(str(tmp_path / "missing.csv"))


def test_write_then_read(tmp_path):
    raw = np.array([[0.0, 1.0], [2.0, -3.0], [4.0, 5.0]])
    path = tmp_path / "out.csv"
    write_dataset(Dataset.from_raw(raw, columns=["p", "q"]), str(path))
    assert path.read_text().splitlines()[0] == "p,q"
    assert_allclose(read_matrix(str(path)), raw, rtol=1e-12, atol=1e-12)

    matrix_path = tmp_path / "matrix.csv"
    write_dataset(np.array([1.0, 2.0]), str(matrix_path))
    assert_allclose(read_matrix(str(matrix_path)), [[1.0], [2.0]])
