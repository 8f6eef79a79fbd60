from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import polars as pl

from ICPydags.utils import check_matrix

# Rescaled values stay this far from 0 and 1 so the logit stays bounded
MARGIN = 0.05


@dataclass
class Dataset:
    """
    Data matrix rescaled column-wise into [margin, 1 - margin], with the map to undo it.

    Attributes
    ----------
    rows : np.ndarray
        N x d rescaled data.
    lower, upper : np.ndarray
        Per-column minimum and maximum of the raw data.
    margin : float
        Distance kept from 0 and 1.
    columns : List[str]
        Column names, used when writing the data back out.
    """

    rows: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    margin: float = MARGIN
    columns: List[str] = field(default_factory=list)

    def __post_init__(self):
        # A zero margin sends the data extremes to logit(0) and logit(1)
        if not 0 < self.margin < 0.5:
            raise ValueError(f"'margin' must lie in (0, 0.5), got {self.margin}.")
        if not self.columns:
            self.columns = [f"x{j + 1}" for j in range(self.rows.shape[1])]

    @classmethod
    def from_raw(cls, x, margin: float = MARGIN, columns: Optional[List[str]] = None) -> "Dataset":
        """
        Min-max rescale raw data into [margin, 1 - margin]; constant columns map to 0.5.

        Examples
        --------
        >>> data = Dataset.from_raw([[0.0, 3.0], [10.0, 3.0]])
        >>> np.round(data.rows, 6).tolist()
        [[0.05, 0.5], [0.95, 0.5]]
        """
        if isinstance(x, pl.DataFrame) and columns is None:
            columns = list(x.columns)
        raw = check_matrix(x, "data")
        lower, upper = raw.min(axis=0), raw.max(axis=0)
        data = cls(rows=np.empty_like(raw), lower=lower, upper=upper, margin=margin, columns=list(columns or []))
        data.rows = data.rescale(raw)
        return data

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def rescale(self, x: np.ndarray) -> np.ndarray:
        """Map raw values into the unit interval with this dataset's column ranges."""
        x = np.asarray(x, dtype=float)
        span = self.upper - self.lower
        constant = span == 0
        scaled = self.margin + (1 - 2 * self.margin) * (x - self.lower) / np.where(constant, 1.0, span)
        return np.where(constant, 0.5, scaled)

    def inverse(self, u: np.ndarray) -> np.ndarray:
        """Map unit-interval values back to raw units; constant columns map back to their value."""
        u = np.asarray(u, dtype=float)
        span = self.upper - self.lower
        return self.lower + (u - self.margin) * span / (1 - 2 * self.margin)

    @property
    def raw(self) -> np.ndarray:
        return self.inverse(self.rows)

    def rescale_record(self) -> dict:
        return {
            "lower": [float(v) for v in self.lower],
            "upper": [float(v) for v in self.upper],
            "margin": float(self.margin),
            "columns": list(self.columns),
        }

    @classmethod
    def from_rescale_record(cls, record: dict, rows: Optional[np.ndarray] = None) -> "Dataset":
        lower = np.asarray(record["lower"], dtype=float)
        upper = np.asarray(record["upper"], dtype=float)
        if rows is None:
            rows = np.empty((0, len(lower)))
        return cls(rows=rows, lower=lower, upper=upper, margin=float(record.get("margin", MARGIN)),
                   columns=list(record.get("columns", [])))

    def to_frame(self, raw: bool = True) -> pl.DataFrame:
        values = self.raw if raw else self.rows
        return pl.DataFrame({name: values[:, j] for j, name in enumerate(self.columns)})
