"""C0 interior penalty solver and convergence harness for a smectic-A model.

The unknowns are a density variation u (fourth order, C0 Lagrange with
gradient-jump penalties) and a 2D Q-tensor (Q11, Q12), coupled through
B |D^2 u + q^2 (Q + I/2) u|^2.
"""
from .driver import StudyConfig, emit_table, read_table, run_study
from .forms import Discretisation, assemble, make_discretisation
from .mesh import unit_square_mesh
from .newton import NewtonReport, newton_solve
from .norms import ErrorReport, LevelErrors
from .params import ModelParams

__all__ = [
    "Discretisation", "ErrorReport", "LevelErrors", "ModelParams", "NewtonReport",
    "StudyConfig", "assemble", "emit_table", "make_discretisation", "newton_solve",
    "read_table", "run_study", "unit_square_mesh",
]
__version__ = "0.1.0"
