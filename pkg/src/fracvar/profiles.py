"""Built-in grid-function suite used for constant estimation and calibration.

The deterministic analytic members exercise qualitatively different shapes
(symmetric, skewed, flat-topped, sign-changing); the seeded random members
span rough-to-smooth regularity.  All constant estimators in the solver
layer draw from here, so their outputs are reproducible given a seed.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .mesh import GridFunction, Mesh1D

__all__ = ["analytic_suite", "random_profiles", "suite_with_random"]


def analytic_suite(mesh: Mesh1D) -> list[GridFunction]:
    a, b = mesh.a, mesh.b
    length = b - a
    xi = (mesh.interior - a) / length  # normalized interior coordinates

    members = [
        np.minimum(xi, 1.0 - xi) * 2.0,                      # centered tent
        np.sin(np.pi * xi),
        np.sin(2.0 * np.pi * xi),
        np.sin(3.0 * np.pi * xi),
        xi * (1.0 - xi) * 4.0,                               # parabolic bump
        xi ** 2 * (1.0 - xi) * 6.75,                         # skewed bump
        np.clip(3.0 * np.minimum(xi, 1.0 - xi), 0.0, 1.0),   # plateau
        np.sin(np.pi * xi) - 0.8 * np.sin(2.0 * np.pi * xi),  # signed mix
    ]
    return [GridFunction(mesh, v) for v in members]


def random_profiles(mesh: Mesh1D, n: int, rng: np.random.Generator) -> Iterator[GridFunction]:
    """Seeded random members cycling through rough, walk-like, and smooth kinds."""
    m = mesh.n_elem - 1
    xi = (mesh.interior - mesh.a) / (mesh.b - mesh.a)
    k_modes = np.arange(1, min(m, 12) + 1)
    sines = np.sin(np.pi * np.outer(k_modes, xi))
    for i in range(n):
        kind = i % 3
        if kind == 0:
            vals = rng.standard_normal(m)
        elif kind == 1:
            steps = rng.standard_normal(m + 1)
            walk = np.cumsum(steps)
            walk -= np.linspace(walk[0], walk[-1], m + 1)  # pin both ends to 0
            vals = walk[1:]
            if not np.any(vals):
                vals = rng.standard_normal(m)
        else:
            coeff = rng.standard_normal(k_modes.size) / k_modes ** 2
            vals = coeff @ sines
        yield GridFunction(mesh, vals)


def suite_with_random(mesh: Mesh1D, n_random: int, seed: int = 0) -> list[GridFunction]:
    rng = np.random.default_rng(seed)
    return analytic_suite(mesh) + list(random_profiles(mesh, n_random, rng))
