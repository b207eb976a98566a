"""Gaussian sensing ensembles and the squared-magnitude forward model.

The measurement model is y[r] = <a_r, x>^2 + eps[r] with the rows a_r of a
dense m x n map A drawn iid N(0, 1/m). Signs are unobservable, so errors are
measured against the pair {x, -x}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import seeded_rng

__all__ = [
    "SensingEnsemble",
    "Observation",
    "sample_gaussian_map",
    "make_ensemble",
    "forward_intensity",
    "make_observation",
    "dist_to_signclass",
    "snr",
]


@dataclass(frozen=True)
class SensingEnsemble:
    """A sensing map, the ground truth, and its clean intensities."""

    a_matrix: np.ndarray        # (m, n), entries N(0, 1/m)
    ground_truth: np.ndarray    # (n,)
    clean_intensities: np.ndarray  # (m,), = (A @ ground_truth)**2
    seed: int


@dataclass(frozen=True)
class Observation:
    intensities: np.ndarray  # (m,)
    noise_norm: float        # sigma = ||eps||


def sample_gaussian_map(n: int, m: int, seed: int) -> np.ndarray:
    """Draw a dense m x n matrix with iid N(0, 1/m) entries.

    Deterministic: identical (n, m, seed) triples yield bit-identical output.
    """
    if n < 1 or m < 1:
        raise ValueError(f"dimensions must be positive, got n={n}, m={m}")
    rng = seeded_rng(seed)
    return rng.standard_normal((m, n)) / np.sqrt(m)


def make_ensemble(ground_truth: np.ndarray, m: int, seed: int) -> SensingEnsemble:
    """Sample a Gaussian map for a given truth and record its intensities."""
    x = np.asarray(ground_truth, dtype=float)
    a = sample_gaussian_map(x.size, m, seed)
    return SensingEnsemble(a, x, forward_intensity(a, x), int(seed))


def forward_intensity(a_matrix: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate the quadratic forward model: result[r] = <a_r, x>^2."""
    a = np.asarray(a_matrix, dtype=float)
    x = np.asarray(x, dtype=float)
    if a.ndim != 2 or x.ndim != 1 or a.shape[1] != x.size:
        raise ValueError(f"shape mismatch: A is {a.shape}, x has length {x.size}")
    return (a @ x) ** 2


def make_observation(clean: np.ndarray, model: str = "none", *,
                     sigma_e: float | None = None,
                     eps: np.ndarray | None = None,
                     seed: int = 0) -> Observation:
    """Attach noise to clean intensities.

    model = "none":     y = clean, noise_norm = 0.
    model = "gaussian": eps iid N(0, sigma_e^2); the realized ||eps|| is recorded.
    model = "fixed":    y = clean + eps for a caller-supplied eps.

    Noise is additive on intensities, not on amplitudes.
    """
    clean = np.asarray(clean, dtype=float)
    if model == "none":
        return Observation(clean.copy(), 0.0)
    if model == "gaussian":
        if sigma_e is None or sigma_e < 0:
            raise ValueError(f"gaussian noise needs sigma_e >= 0, got {sigma_e}")
        e = seeded_rng(seed).standard_normal(clean.size) * sigma_e
        return Observation(clean + e, float(np.linalg.norm(e)))
    if model == "fixed":
        if eps is None:
            raise ValueError("fixed noise model needs eps")
        e = np.asarray(eps, dtype=float)
        if e.shape != clean.shape:
            raise ValueError(f"eps shape {e.shape} does not match intensities {clean.shape}")
        return Observation(clean + e, float(np.linalg.norm(e)))
    raise ValueError(f"unknown noise model {model!r}")


def dist_to_signclass(x: np.ndarray, truth: np.ndarray) -> float:
    """min(||x - truth||, ||x + truth||): the error up to global sign."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(truth, dtype=float)
    if x.shape != t.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {t.shape}")
    return float(min(np.linalg.norm(x - t), np.linalg.norm(x + t)))


def snr(truth: np.ndarray, a_matrix: np.ndarray, sigma: float) -> float:
    """Signal-to-noise ratio ||A truth||_4^4 / sigma^2 (inf when sigma = 0)."""
    if sigma < 0:
        raise ValueError(f"noise norm must be nonnegative, got {sigma}")
    ax = np.asarray(a_matrix, dtype=float) @ np.asarray(truth, dtype=float)
    signal = float(np.sum(ax ** 4))
    if sigma == 0:
        return np.inf
    return signal / sigma ** 2
