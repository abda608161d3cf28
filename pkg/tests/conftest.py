"""Shared fixtures and independent numerical oracles for the test suite."""
from __future__ import annotations

import numpy as np
import pytest

from vortexlab.spectral import Basis, SpectralField

# The canonical four-mode forcing used throughout: sin and cos on (1,0), (1,1).
FORCING = ((1, 0), (1, 1))
Z_STAR = frozenset({(1, 0), (-1, 0), (1, 1), (-1, -1)})


def eval_basis_mode(label, x1, x2):
    """Pointwise values of one real Fourier mode on the torus.

    Positive-class labels (k2 > 0, or k2 == 0 and k1 > 0) are sine modes;
    negative-class labels are cosine modes.  Computed directly from the
    trigonometric definition, independent of the package internals.
    """
    k1, k2 = label
    phase = k1 * x1 + k2 * x2
    if (k2 > 0) or (k2 == 0 and k1 > 0):
        return np.sin(phase)
    return np.cos(phase)


def torus_grid(n=64):
    """Uniform n x n quadrature grid on [0, 2*pi)^2 (exact for trig polys)."""
    t = np.arange(n) * (2.0 * np.pi / n)
    x1, x2 = np.meshgrid(t, t, indexing="ij")
    return x1, x2


def grid_integral(values):
    """Integral over the torus by the exact uniform trapezoid rule."""
    return float(np.mean(values)) * (2.0 * np.pi) ** 2


def project_on_basis(values, basis, x1, x2):
    """Coefficients of a grid function in the real Fourier basis.

    Uses <f, e_k> / ||e_k||^2 with ||e_k||^2 = 2*pi^2, by direct quadrature.
    """
    coeffs = np.zeros(len(basis.modes))
    for idx, label in enumerate(basis.modes):
        mode = eval_basis_mode(label, x1, x2)
        coeffs[idx] = grid_integral(values * mode) / (2.0 * np.pi ** 2)
    return coeffs


def field_from_dict(basis, entries):
    f = SpectralField(basis, np.zeros(len(basis.modes)))
    for label, value in entries.items():
        f.coeffs[basis.index[tuple(label)]] = value
    return f


@pytest.fixture(scope="session")
def basis4():
    return Basis.build(4.0)


@pytest.fixture(scope="session")
def basis8():
    return Basis.build(8.1)
