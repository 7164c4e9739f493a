"""darpsv: exact MILP solvers for dial-a-ride problems with synchronized
visits, classical DARP and PDPTW.

Four formulations (arc-, event-, time-space event- and time-space
fragment-based) over shared network builders, a dynamic discretization
discovery loop that refines coarse time grids to continuous-time optima,
and an independent validator/brute-force oracle.
"""

from .ddd import SelectionInputs, SelectionResult, ddd_solve, refine_grid, selection_model
from .events import Event, EventArc, EventNetwork, enumerate_events
from .formulations import (Route, RouteSet, SolveReport, build_abf, build_ebf,
                           build_tsef, build_tsfrag, solve_abf, solve_ebf,
                           solve_tsef, solve_tsfrag)
from .fragments import (Fragment, FragmentSet, enumerate_fragments,
                        feasible_schedule, joint_schedule, start_interval)
from .instance import (DatasetParams, Instance, InstanceError,
                       InfeasibleCustomerError, Location, build_dataset1,
                       build_dataset2, designate_large, from_json,
                       load_instance, parse_cordeau, random_instance,
                       tighten_windows, to_json)
from .milp import MilpModel, MilpSolution, Status, resolve_with_cuts, solve, write_lp
from .timespace import TimeGrid, expand_events, expand_fragments
from .validate import Violation, brute_optimum, check

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]


def run_method(inst, method, **kwargs):
    """Dispatch a solve by method name; see cli.run_method."""
    from .cli import run_method as _run
    return _run(inst, method, **kwargs)
