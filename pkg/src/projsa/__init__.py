"""Projected stochastic approximation on boxes, with convergence diagnostics."""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .engine import Full, Problem, Thin, Trajectory, Window, run  # noqa: E402
from .geometry import Box, FaceTag, project_box  # noqa: E402
from .prox import Penalty, prox_penalty, prox_penalty_box  # noqa: E402
from .schedules import GaussianIID, NoiseModel, Polynomial, PowerBias, Table  # noqa: E402

__all__ = [
    "BACKEND", "Box", "FaceTag", "Full", "GaussianIID", "NoiseModel", "Penalty", "Polynomial",
    "PowerBias", "Problem", "Table", "Thin", "Trajectory", "Window", "project_box", "prox_penalty",
    "prox_penalty_box", "run",
]
