"""Sample containers and deterministic seed splitting shared by the samplers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

# replicas are drawn in fixed-size chunks, one child seed per chunk, so results
# do not depend on how many workers process the chunks
CHUNK = 1024


def chunk_seeds(seed: int, count: int, chunk: int = CHUNK) -> list[tuple[np.random.SeedSequence, int]]:
    n_chunks = max(1, -(-count // chunk))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(chunk, count - i * chunk) for i in range(n_chunks)]
    return list(zip(children, sizes))


def run_chunked(func, seed: int, count: int, workers: int = 1, chunk: int = CHUNK) -> list:
    """Call ``func(seed_sequence, size)`` per chunk; results are kept in chunk order."""
    jobs = chunk_seeds(seed, count, chunk)
    if workers <= 1 or len(jobs) == 1:
        return [func(ss, n) for ss, n in jobs]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: func(*job), jobs))


@dataclass
class Ensemble:
    """Rows are samples. ``weights`` is None for unweighted draws."""

    samples: np.ndarray
    weights: np.ndarray | None = None
    seed: int | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (len(self.samples),):
                raise ValueError("one weight per sample required")
            if np.any(w < 0):
                raise ValueError("weights must be non-negative")
            self.weights = w / w.sum()

    def __len__(self):
        return len(self.samples)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def normalized_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self), 1.0 / len(self))
        return self.weights

    @property
    def ess(self) -> float:
        w = self.normalized_weights
        return float(1.0 / np.sum(w**2))

    def mean(self) -> np.ndarray:
        return self.normalized_weights @ self.samples

    def covariance(self) -> np.ndarray:
        w = self.normalized_weights
        c = self.samples - w @ self.samples
        return (c * w[:, None]).T @ c

    def to_csv(self, path, header_note: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if header_note:
                fh.write(f"# {header_note}\n")
            writer = csv.writer(fh)
            writer.writerow(["weight"] + [f"x{i + 1}" for i in range(self.dim)])
            for w, row in zip(self.normalized_weights, self.samples):
                writer.writerow([repr(float(w))] + [repr(float(v)) for v in row])
