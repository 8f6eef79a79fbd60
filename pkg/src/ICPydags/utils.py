import logging
import os
import warnings
from typing import List, Optional

import numpy as np
import polars as pl


class DomainError(ValueError):
    """Raised when an argument lies outside the mathematical domain of a function."""


class ParameterError(ValueError):
    """Raised for invalid hyperparameters or finite-model parameters."""


class DegenerateOrderError(ValueError):
    """Raised when two nodes share an interior order value, an event of probability zero."""


class GraphError(ValueError):
    """Raised when a graph violates the order constraint or another structural invariant."""


class ChainFormatError(ValueError):
    """Raised when a chain file line cannot be decoded; the message names the line number."""


_LOG_LEVELS = {"DEBUG": logging.DEBUG, "INFO": logging.INFO, "WARNING": logging.WARNING, "ERROR": logging.ERROR}


def check_df(df: pl.DataFrame, required_cols: Optional[List[str]] = None, numeric: bool = True):
    """
    Check that a Polars DataFrame holds the required columns and, optionally, only numeric data.

    Parameters
    ----------
    df : pl.DataFrame
        The Polars DataFrame to check.
    required_cols : List[str], optional
        Column names the DataFrame must contain. Default is None (no requirement).
    numeric : bool, optional
        Whether every column must have a numeric dtype. Default is True.

    Raises
    ------
    TypeError
        If the input is not a Polars DataFrame.
    ValueError
        If any of the required columns are missing, or a column is not numeric when `numeric` is True.
    """

    # Ensure the input is a Polars DataFrame
    if not isinstance(df, pl.DataFrame):
        raise TypeError(
            f"Expected a Polars DataFrame, got {type(df)}. "
            "Load tabular data with polars or pass a numpy array instead."
        )

    # Identify any missing columns by comparing against the DataFrame's columns
    missing_cols = [col for col in (required_cols or []) if col not in df.columns]
    if missing_cols:
        raise ValueError(
            f"The DataFrame is missing the following required columns: {', '.join(missing_cols)}"
        )

    # Every value column has to be numeric for the samplers
    if numeric:
        non_numeric = [col for col in df.columns if not df[col].dtype.is_numeric()]
        if non_numeric:
            raise ValueError(f"The following columns are expected to be numerical but are not: {non_numeric}")


def check_matrix(x, name: str = "sample") -> np.ndarray:
    """
    Coerce a sample set to a finite two-dimensional float array.

    One-dimensional input is read as a single column.

    Raises
    ------
    ValueError
        If the array is empty, has more than two dimensions or contains non-finite values.
    """
    if isinstance(x, pl.DataFrame):
        check_df(x)
        x = x.to_numpy()
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"'{name}' must be a two-dimensional matrix, got {arr.ndim} dimensions.")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"'{name}' must be nonempty.")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"'{name}' contains NaN or infinite values.")
    return arr


def make_rng(seed: int) -> np.random.Generator:
    """
    Build the random stream of one draw or chain.

    Identical seeds give bit-identical sequences (PCG64 under a fixed numpy version).
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"Expected an integer seed, got {type(seed)}")
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError(f"Seed must lie in [0, 2**64), got {seed}.")
    return np.random.default_rng(int(seed))


def configure_logging(level: Optional[str] = None) -> logging.Logger:
    """
    Attach a single stderr handler to the package logger.

    The level comes from `level` or, when None, the ICP_LOG environment variable (default WARNING).
    Calling this more than once does not stack handlers.
    """
    name = (level if level is not None else os.environ.get("ICP_LOG", "WARNING")).upper()
    if name not in _LOG_LEVELS:
        warnings.warn(f"Unknown log level '{name}' in ICP_LOG, falling back to WARNING.", UserWarning)
        name = "WARNING"

    package_logger = logging.getLogger("ICPydags")
    package_logger.setLevel(_LOG_LEVELS[name])
    if not any(getattr(h, "_icp_handler", False) for h in package_logger.handlers):
        handler = logging.StreamHandler()  # stderr
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        handler._icp_handler = True
        package_logger.addHandler(handler)
    return package_logger
