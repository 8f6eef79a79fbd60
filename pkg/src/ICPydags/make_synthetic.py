from typing import Optional

import numpy as np

from ICPydags.dataset import Dataset

# Noise used when none is given
DEFAULT_NOISE = {"ring": 0.1, "two_moons": 0.1, "pinwheel": 0.3}

# Pinwheel arms, spread across each arm and spiral rate
PINWHEEL_CLASSES = 5
PINWHEEL_TANGENTIAL_STD = 0.05
PINWHEEL_RATE = 0.25


def make_synthetic(name: str, n: int, rng: np.random.Generator, noise: Optional[float] = None) -> Dataset:
    """
    Generate one of the two-dimensional benchmark datasets.

    Parameters
    ----------
    name : str
        "ring" (unit circle with radial Gaussian noise), "two_moons" (two interleaved half circles with
        isotropic Gaussian noise) or "pinwheel" (five spiral arms; the noise is the radial spread).
    n : int
        Number of points, at least 1.
    rng : np.random.Generator
        Random stream; equal seeds give identical datasets.
    noise : float, optional
        Noise scale. Default is 0.1 for ring and two_moons, 0.3 for pinwheel.

    Returns
    -------
    Dataset
        The points, rescaled; `.raw` holds the generated coordinates.

    Raises
    ------
    ValueError
        If the name is unknown, n < 1 or noise < 0.

    Examples
    --------
    >>> data = make_synthetic("ring", 5, np.random.default_rng(0), noise=0.0)
    >>> bool(np.allclose(np.hypot(*data.raw.T), 1.0))
    True
    """
    if name not in DEFAULT_NOISE:
        raise ValueError(f"Unknown dataset '{name}'. Supported datasets are {sorted(DEFAULT_NOISE)}.")
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"'n' must be a positive integer, got {n!r}.")
    noise = DEFAULT_NOISE[name] if noise is None else float(noise)
    if noise < 0:
        raise ValueError(f"'noise' must be nonnegative, got {noise}.")

    if name == "ring":
        points = _ring(n, noise, rng)
    elif name == "two_moons":
        points = _two_moons(n, noise, rng)
    else:
        points = _pinwheel(n, noise, rng)
    return Dataset.from_raw(points)


def _ring(n: int, noise: float, rng: np.random.Generator) -> np.ndarray:
    angle = rng.uniform(0.0, 2 * np.pi, size=n)
    radius = 1.0 + noise * rng.standard_normal(n)
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


def _two_moons(n: int, noise: float, rng: np.random.Generator) -> np.ndarray:
    n_outer = n // 2
    n_inner = n - n_outer
    t_outer = rng.uniform(0.0, np.pi, size=n_outer)
    t_inner = rng.uniform(0.0, np.pi, size=n_inner)
    outer = np.column_stack([np.cos(t_outer), np.sin(t_outer)])
    inner = np.column_stack([1.0 - np.cos(t_inner), 0.5 - np.sin(t_inner)])
    points = np.vstack([outer, inner])
    return points + noise * rng.standard_normal(points.shape)


def _pinwheel(n: int, noise: float, rng: np.random.Generator) -> np.ndarray:
    arms = np.linspace(0, 2 * np.pi, PINWHEEL_CLASSES, endpoint=False)
    labels = np.arange(n) % PINWHEEL_CLASSES

    features = rng.standard_normal((n, 2)) * np.array([noise, PINWHEEL_TANGENTIAL_STD])
    features[:, 0] += 1.0
    angles = arms[labels] + PINWHEEL_RATE * np.exp(features[:, 0])
    rotations = np.stack([np.cos(angles), -np.sin(angles), np.sin(angles), np.cos(angles)], axis=1).reshape(-1, 2, 2)
    return 10 * np.einsum("ti,tij->tj", features, rotations)
