from .problem import LmiBlock, MatrixVar, ProblemBuilder, SdpProblem, dense_problem
from .solver import SdpSolution, SolverOptions, Status, newton_matrix, solve
from .audit import residuals

__all__ = [
    "LmiBlock", "MatrixVar", "ProblemBuilder", "SdpProblem", "dense_problem",
    "SdpSolution", "SolverOptions", "Status", "newton_matrix", "solve", "residuals",
]
