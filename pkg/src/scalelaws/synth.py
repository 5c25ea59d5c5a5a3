"""Seeded synthetic training-run generator used as a known-answer oracle.

The two-term family loss(N, E) = l_inf + (N0/N)**alpha_n + (E0/E)**alpha_e
exists purely to create a world with a known compute-optimal allocation;
under C ~ N*E its optimal-model-size exponent is alpha_e/(alpha_n+alpha_e).
Noise is multiplicative lognormal because fitting operates in log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .lawcore import RunRecord, SeriesPoint, Split


@dataclass(frozen=True)
class SynthFamily:
    l_inf: float = 0.0
    n_scale: float = 1e2
    alpha_n: float = 0.3
    e_scale: float = 1e6
    alpha_e: float = 0.7
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.l_inf >= 0 and self.n_scale > 0 and self.e_scale > 0):
            raise DomainError("scales must be > 0 and l_inf >= 0")
        if not (self.alpha_n > 0 and self.alpha_e > 0):
            raise DomainError("exponents must be > 0")
        if self.noise_sigma < 0:
            raise DomainError("noise_sigma must be >= 0")

    def loss(self, n_params: float, tokens: float) -> float:
        """Noiseless loss surface."""
        return (
            self.l_inf
            + (self.n_scale / n_params) ** self.alpha_n
            + (self.e_scale / tokens) ** self.alpha_e
        )


def _check_grid(name: str, grid) -> np.ndarray:
    arr = np.asarray(grid, dtype=float)
    if arr.size == 0 or not np.all(arr > 0) or not np.all(np.diff(arr) > 0):
        raise DomainError(f"{name} must be non-empty, positive, and increasing")
    return arr


def gen_curves(family: SynthFamily, model_sizes, tokens_grid) -> list[RunRecord]:
    """One RunRecord per model size, sampled on the shared token grid.

    Deterministic per family.seed; losses are multiplied by exp(sigma * z)
    with z standard normal.
    """
    sizes = _check_grid("model_sizes", model_sizes)
    tokens = _check_grid("tokens_grid", tokens_grid)
    rng = np.random.default_rng(family.seed)
    runs = []
    for n in sizes:
        base = np.array([family.loss(n, e) for e in tokens])
        if family.noise_sigma > 0:
            base = base * np.exp(family.noise_sigma * rng.standard_normal(len(tokens)))
        series = tuple(
            SeriesPoint(step=i + 1, tokens=float(e), loss=float(l), split=Split.TEST)
            for i, (e, l) in enumerate(zip(tokens, base))
        )
        n_int = int(round(n))
        runs.append(RunRecord(run_id=f"synth-n{n_int}", n_params=n_int, series=series))
    return runs


def analytic_beta(alpha_n: float, alpha_e: float) -> float:
    """Compute-optimal model-size exponent of the two-term family: alpha_e/(alpha_n+alpha_e)."""
    if not (alpha_n > 0 and alpha_e > 0):
        raise DomainError("exponents must be > 0")
    return alpha_e / (alpha_n + alpha_e)


def gen_example_matrix(
    base: SynthFamily, n_examples: int, l_inf_spread: tuple[float, float], model_sizes
) -> np.ndarray:
    """Per-example loss matrix of shape (len(model_sizes), n_examples).

    Each example draws its own irreducible loss uniformly from the spread and
    shares the family's model-size term; deterministic per base.seed.
    """
    low, high = l_inf_spread
    if not (low <= high):
        raise DomainError("l_inf spread must satisfy low <= high")
    if n_examples < 1:
        raise DomainError("n_examples must be >= 1")
    sizes = _check_grid("model_sizes", model_sizes)
    rng = np.random.default_rng(base.seed)
    l_infs = rng.uniform(low, high, size=n_examples)
    reducible = (base.n_scale / sizes) ** base.alpha_n
    matrix = l_infs[None, :] + reducible[:, None]
    if base.noise_sigma > 0:
        matrix = matrix * np.exp(base.noise_sigma * rng.standard_normal(matrix.shape))
    return matrix
