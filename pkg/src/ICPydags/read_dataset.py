import logging
import os
from typing import Union

import numpy as np
import polars as pl

from ICPydags.dataset import Dataset
from ICPydags.utils import check_df

logger = logging.getLogger(__name__)


def read_dataset(file_path: str, margin: float = 0.05) -> Dataset:
    """
    Load a numeric data matrix from a file and rescale it for the sigmoid network.

    One row per datum, one column per observed variable. Delimited text files may come without a
    header or with a single header line; the header is detected by whether the first line parses as
    numbers.

    Parameters
    ----------
    file_path : str
        Path to a .csv, .tsv, .txt or .parquet file.
    margin : float, optional
        Distance kept from 0 and 1 after rescaling, in (0, 0.5). Default is 0.05.

    Returns
    -------
    Dataset
        The rescaled data together with its inverse map.

    Raises
    ------
    ValueError
        If the file cannot be read, has an unsupported extension, or holds non-numeric values.

    Examples
    --------
    >>> data = read_dataset("ring_train.csv")  # doctest: +SKIP
    """
    # Load and check that every column is numeric and complete
    df = _get_open_file(file_path)
    check_df(df, numeric=True)
    if df.null_count().sum_horizontal().item() > 0:
        raise ValueError(f"The file '{file_path}' contains missing values.")
    logger.info("Read %d rows and %d columns from %s", df.height, df.width, file_path)
    return Dataset.from_raw(df, margin=margin)


def read_matrix(file_path: str) -> np.ndarray:
    """Load a numeric data file as a raw float matrix, without rescaling."""
    df = _get_open_file(file_path)
    check_df(df, numeric=True)
    return df.to_numpy()


def write_dataset(data: Union[Dataset, np.ndarray], file_path: str, raw: bool = True):
    """
    Write a dataset (raw units by default) or a plain matrix as CSV with a header line.
    """
    # Datasets keep their column names, plain matrices get x1, x2, ...
    if isinstance(data, Dataset):
        df = data.to_frame(raw=raw)
    else:
        values = np.asarray(data, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        df = pl.DataFrame({f"x{j + 1}": values[:, j] for j in range(values.shape[1])})
    df.write_csv(file_path)


def _get_open_file(file_path: str) -> pl.DataFrame:
    """
    Open a data file based on its extension and load it as a Float64 Polars DataFrame.

    Raises
    ------
    ValueError
        If the file extension is unsupported or the file cannot be read.
    """
    # Dispatch on the file extension
    _, file_extension = os.path.splitext(file_path)

    try:
        if file_extension in [".tsv", ".txt"]:
            return _read_delimited(file_path, separator="\t")
        elif file_extension == ".csv":
            return _read_delimited(file_path, separator=",")
        elif file_extension == ".parquet":
            return pl.read_parquet(file_path).cast(pl.Float64)
        else:
            raise ValueError(
                f"Unsupported file extension '{file_extension}'. Supported extensions are .tsv, .txt, .csv, .parquet"
            )
    except Exception as e:
        raise ValueError(f"Failed to read the file '{file_path}': {e}")


def _read_delimited(file_path: str, separator: str) -> pl.DataFrame:
    # Read everything as text first so a header line can be told apart from data
    df = pl.read_csv(file_path, separator=separator, has_header=False, infer_schema_length=0)
    if df.height == 0:
        raise ValueError("the file is empty")

    # A first row with any non-numeric entry is a header
    first = df.row(0)
    has_header = any(_not_a_number(v) for v in first)
    if has_header:
        df = df.slice(1).rename({old: str(new).strip() for old, new in zip(df.columns, first)})
    else:
        df = df.rename({old: f"x{j + 1}" for j, old in enumerate(df.columns)})
    if df.height == 0:
        raise ValueError("the file has a header but no data rows")
    return df.select(pl.all().str.strip_chars().cast(pl.Float64))


def _not_a_number(value) -> bool:
    if value is None:
        return False
    try:
        float(value)
        return False
    except ValueError:
        return True
