"""Window ILP: model construction, exact solve, brute-force oracle, LP export."""
from .bnb import Solution, solve
from .brute import BruteResult, GuardExceeded, brute_force_solve
from .lpformat import export_model, parse_lp, solve_parsed_milp
from .model import IlpModel, ModelError, WindowInstance, build_model, parse_var_name, var_name

__all__ = [
    "BruteResult", "GuardExceeded", "IlpModel", "ModelError", "Solution", "WindowInstance",
    "brute_force_solve", "build_model", "export_model", "parse_lp", "parse_var_name",
    "solve", "solve_parsed_milp", "var_name",
]
