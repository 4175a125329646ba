"""
Shared fixtures: small hand-built masks with known component structure.
"""

import numpy as np
import pytest

from gaussperc.connectivity import mask_from_bits
from gaussperc.kernels import bargmann_fock
from gaussperc.synthesis import GridSpec


@pytest.fixture
def unit_grid():
    """41 x 41 grid at spacing 1, origin at vertex (20, 20)."""
    return GridSpec.cube(2, 41, 41.0)


@pytest.fixture
def tripod(unit_grid):
    """
    A T-shaped mask: the full middle row plus the upper half of the middle column.

    Three arms leave the origin and reach three faces of the box.
    """
    o = 20
    bits = np.zeros(unit_grid.shape, dtype=bool)
    bits[o, :] = True
    bits[:o + 1, o] = True
    return mask_from_bits(unit_grid, bits, source_id="tripod")


@pytest.fixture
def comb(unit_grid):
    """
    A comb: the middle row as spine and five teeth at column offsets 0, +-8, +-16
    running from the spine to the upper face.
    """
    o = 20
    bits = np.zeros(unit_grid.shape, dtype=bool)
    bits[o, :] = True
    for offset in (-16, -8, 0, 8, 16):
        bits[:o + 1, o + offset] = True
    return mask_from_bits(unit_grid, bits, source_id="comb")


@pytest.fixture
def bf2():
    return bargmann_fock(2)
