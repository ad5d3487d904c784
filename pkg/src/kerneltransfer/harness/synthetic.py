"""Seeded synthetic tasks for end-to-end checks and demos.

The cluster task places classes on shared orthonormal directions in R^d and
adds high-variance nuisance directions common to all classes; a source model
trained on many samples learns to ignore the nuisance, which is what makes
transfer pay off for small target sets. The corrupted variant applies a
global mean shift to the target domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ClusterTask:
    """Arrays for one transfer scenario, all in (d, n) layout."""

    source_x: np.ndarray
    source_labels: np.ndarray
    target_x: np.ndarray
    target_labels: np.ndarray
    test_x: np.ndarray
    test_labels: np.ndarray


def _sample(rng, directions, nuisance, scale, noise, nuisance_std, n_per, classes):
    d = directions.shape[0]
    k = nuisance.shape[1]
    xs, ys = [], []
    for label, cls in enumerate(classes):
        pts = scale * directions[:, cls][:, None] \
            + noise * rng.standard_normal((d, n_per)) \
            + nuisance @ (nuisance_std * rng.standard_normal((k, n_per)))
        xs.append(pts)
        ys.extend([label] * n_per)
    X = np.concatenate(xs, axis=1)
    y = np.array(ys, dtype=int)
    perm = rng.permutation(y.shape[0])
    return X[:, perm], y[perm]


def make_projection_task(seed: int, *, d: int = 64, source_classes: int = 50,
                         target_classes: int = 10, nuisance_dims: int = 10,
                         scale: float = 3.0, noise: float = 1.0,
                         nuisance_std: float = 4.0,
                         source_per_class: int = 60,
                         target_pool_per_class: int = 40,
                         test_per_class: int = 100) -> ClusterTask:
    """A many-class source whose classes include the target's clusters."""
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((d, source_classes + nuisance_dims)))
    directions = basis[:, :source_classes]
    nuisance = basis[:, source_classes:]
    sx, sy = _sample(rng, directions, nuisance, scale, noise, nuisance_std,
                     source_per_class, range(source_classes))
    tx, ty = _sample(rng, directions, nuisance, scale, noise, nuisance_std,
                     target_pool_per_class, range(target_classes))
    ex, ey = _sample(rng, directions, nuisance, scale, noise, nuisance_std,
                     test_per_class, range(target_classes))
    return ClusterTask(sx, sy, tx, ty, ex, ey)


def make_translation_task(seed: int, *, d: int = 64, classes: int = 10,
                          nuisance_dims: int = 10, scale: float = 3.0,
                          noise: float = 1.0, nuisance_std: float = 4.0,
                          source_per_class: int = 150,
                          target_pool_per_class: int = 40,
                          test_per_class: int = 100,
                          shift_norm: float = 6.0) -> ClusterTask:
    """The same task with a global mean shift applied to the target domain."""
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((d, classes + nuisance_dims)))
    directions = basis[:, :classes]
    nuisance = basis[:, classes:]
    sx, sy = _sample(rng, directions, nuisance, scale, noise, nuisance_std,
                     source_per_class, range(classes))
    tx, ty = _sample(rng, directions, nuisance, scale, noise, nuisance_std,
                     target_pool_per_class, range(classes))
    ex, ey = _sample(rng, directions, nuisance, scale, noise, nuisance_std,
                     test_per_class, range(classes))
    shift = rng.standard_normal(d)
    shift *= shift_norm / np.linalg.norm(shift)
    return ClusterTask(sx, sy, tx + shift[:, None], ty, ex + shift[:, None], ey)


def make_linear_task(seed: int, *, d: int = 32, c: int = 3, n_source: int = 32,
                     n_pool: int = 64, n_test: int = 2000,
                     source_offset: float = 0.0):
    """A noiseless linear task y = omega x with Gaussian inputs.

    Returns (task, omega_s, omega_t); omega_t has unit Frobenius norm and
    omega_s = omega_t + source_offset-scaled Gaussian direction.
    """
    rng = np.random.default_rng(seed)
    omega_t = rng.standard_normal((c, d))
    omega_t /= np.linalg.norm(omega_t)
    if source_offset > 0:
        u = rng.standard_normal((c, d))
        u /= np.linalg.norm(u)
        omega_s = omega_t + source_offset * u
    else:
        omega_s = omega_t.copy()
    sx = rng.standard_normal((d, n_source))
    tx = rng.standard_normal((d, n_pool))
    ex = rng.standard_normal((d, n_test))
    task = ClusterTask(sx, omega_s @ sx, tx, omega_t @ tx, ex, omega_t @ ex)
    return task, omega_s, omega_t
