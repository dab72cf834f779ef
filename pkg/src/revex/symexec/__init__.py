from revex.symexec.machine import Budget, Constraint, Machine, MachineState, PathSet, replay, run_sequence
from revex.symexec.storage import GlobalStore
from revex.symexec.terms import Expr, ExpressionDepthError, ResourceError

__all__ = [
    "Budget",
    "Constraint",
    "Expr",
    "ExpressionDepthError",
    "GlobalStore",
    "Machine",
    "MachineState",
    "PathSet",
    "ResourceError",
    "replay",
    "run_sequence",
]
