"""Shared builders for canonical sources used across the test modules."""

import math

import numpy as np

from ucrlab.probspace import JointPmf


def h2(p: float) -> float:
    """Binary entropy in bits."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def dsbs(p: float) -> JointPmf:
    """Uniform binary X, Y equals X flipped with probability p."""
    return JointPmf(np.array([[(1.0 - p) / 2.0, p / 2.0],
                              [p / 2.0, (1.0 - p) / 2.0]]))


def diagonal_source() -> JointPmf:
    """X = Y, uniform binary."""
    return JointPmf(np.array([[0.5, 0.0], [0.0, 0.5]]))


def independent_source(px, py) -> JointPmf:
    return JointPmf(np.outer(np.asarray(px, dtype=float),
                             np.asarray(py, dtype=float)))


def random_joint(rng: np.random.Generator, nx: int, ny: int,
                 concentration: float = 1.0) -> JointPmf:
    probs = rng.dirichlet(np.full(nx * ny, concentration)).reshape(nx, ny)
    return JointPmf(probs)
