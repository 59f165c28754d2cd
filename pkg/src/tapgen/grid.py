"""The duration-by-position proposal grid shared by maps, labels and sampling.

Cell (j, i) stands for the interval [i, i + j] in snippet coordinates: row
index equals duration.  A cell is valid when the interval is non-degenerate
and ends inside the window: j >= 1 and i + j < T.
"""

import numpy as np


def valid_cell_mask(max_duration: int, length: int) -> np.ndarray:
    """Boolean (D, T) mask of cells whose interval fits inside the window."""
    j = np.arange(max_duration)[:, None]
    i = np.arange(length)[None, :]
    return (j >= 1) & (i + j < length)


def valid_cells(max_duration: int, length: int) -> list[tuple[int, int]]:
    """All valid (j, i) pairs in row-major order."""
    jj, ii = np.nonzero(valid_cell_mask(max_duration, length))
    return list(zip(jj.tolist(), ii.tolist()))


def flat_index(j, i, length: int):
    """Row-major flat position of cell (j, i) in a (D, T) map."""
    return j * length + i
