"""Reference loadings used by the tests, the acceptance suite and the CLI examples."""

from __future__ import annotations

import numpy as np

from .core import TerminalConfig, balance_operator

SQUARE = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])

FIGURE1_CENTER = np.zeros(2)
FIGURE1_POINTS = np.array([[-4.0, 0.0], [-3.0, 4.0], [2.0, 4.0], [4.0, 3.0], [4.0, -3.0]])
FIGURE1_WEIGHTS = np.array([53 / 12, 1.0, 1.0, 1.0, 11 / 3])

CUBE = np.array([[-1, -1, -1], [-1, 1, -1], [-1, -1, 1], [-1, 1, 1],
                 [1, -1, -1], [1, 1, -1], [1, -1, 1], [1, 1, 1]], dtype=float)

# five-digit table of retracted vertices and forces
CUBE_TABLE_RETRACTED = np.array([
    [-0.27473, -0.31827, -0.46693], [-0.94086, 0.91949, -0.93330], [-0.12837, -0.23757, 0.15689],
    [-0.76226, 0.74617, 0.78972], [0.28777, -0.16187, -0.35258], [0.27806, -0.12953, -0.35765],
    [-0.01231, -0.28017, 0.08708], [0.51981, 0.62495, 0.51177]])
CUBE_TABLE_FORCES = np.array([
    [-0.98151, -0.92259, -0.72140], [-0.46129, 0.62796, -0.52022], [-0.74581, -0.65237, 0.72140],
    [-0.72140, 0.77022, 0.63807], [0.80474, -0.94700, -0.73151], [0.75592, 1.1827, -0.67259],
    [0.74581, -0.53033, 0.67259], [0.60355, 0.47140, 0.61366]])

# Fraction of each terminal's retraction kept so the rebuilt vertices sit on the
# admissibility boundary; the table's rounding otherwise lands just outside it.
CUBE_RETRACTION_SCALE = 0.9999996324417226


def square_radial(c=1.0) -> TerminalConfig:
    """Forces c_i x_i at the corners of the square (+-1, +-1)."""
    c = np.broadcast_to(np.asarray(c, dtype=float), (4,))
    return TerminalConfig(SQUARE, c[:, None] * SQUARE)


def figure1() -> TerminalConfig:
    return TerminalConfig(FIGURE1_POINTS, FIGURE1_WEIGHTS[:, None] * (FIGURE1_POINTS - FIGURE1_CENTER))


def arrowhead() -> TerminalConfig:
    """Four terminals with one loaded terminal tucked inside the hull; completely stuck."""
    return TerminalConfig([[0, 0], [1, 1], [1, -1], [0.5, 0]],
                          [[-1, 0], [0.75, 1], [0.75, -1], [-0.5, 0]])


def kite() -> TerminalConfig:
    """Second completely stuck planar loading (third terminal at (-1/2, -1))."""
    return TerminalConfig([[0, 0], [-0.5, 1], [-0.5, -1], [1, 1]],
                          [[2, 0], [-2, 2], [-4, -6], [4, 4]])


def stretch_pair() -> TerminalConfig:
    return TerminalConfig([[0.0, 0.0], [1.0, 0.0]], [[-1.0, 0.0], [1.0, 0.0]])


def compress_pair() -> TerminalConfig:
    return TerminalConfig([[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [-1.0, 0.0]])


def _project_out(F, B):
    f = F.ravel()
    return (f - B.T @ np.linalg.lstsq(B @ B.T, B @ f, rcond=None)[0]).reshape(F.shape)


def cube_forces() -> np.ndarray:
    """Tabulated cube forces made exactly balanced at the cube vertices."""
    return _project_out(CUBE_TABLE_FORCES, balance_operator(CUBE))


def cube_retraction_steps() -> np.ndarray:
    """Per-terminal step e_i with x_i' = x_i - e_i f_i, averaged over coordinates."""
    return ((CUBE - CUBE_TABLE_RETRACTED) / CUBE_TABLE_FORCES).mean(axis=1)


def cube_original() -> TerminalConfig:
    return TerminalConfig(CUBE, cube_forces())


def cube_retracted(scale: float = CUBE_RETRACTION_SCALE) -> TerminalConfig:
    """The cube loading after retracting every vertex against its force.

    Moving each terminal along its own force keeps the loading balanced, so the
    same forces apply at the retracted vertices.
    """
    F = cube_forces()
    steps = scale * cube_retraction_steps()
    return TerminalConfig(CUBE - steps[:, None] * F, F)
