"""Dynamic discretization discovery for the time-space formulations.

Each iteration solves the partial-network master (a relaxation, since arc
lengths are rounded down), decomposes its paths, and asks the selection
model whether they admit a continuous schedule with the actual arc lengths.
Z = 0 terminates with a proven optimum; otherwise the flagged arcs gain
time points and the loop repeats.  For the event mode the master's ride
rows act on discrete stamps only, so the bound can cut feasible paths; the
result is labeled approximate.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import milp
from .events import enumerate_events
from .formulations import (Route, RouteSet, SolveReport, build_tsef,
                           build_tsfrag, cycle_physical_elements,
                           decompose_tsef, decompose_tsfrag,
                           subtour_cut_tsef, subtour_cut_tsfrag,
                           _sync_groups_from_paths)
from .fragments import enumerate_fragments
from .instance import EPS, Instance
from .milp import BINARY, CONTINUOUS, GE, LE, MilpModel, Status
from .timespace import IDLE, TimeGrid, expand_events, expand_fragments


class StallError(RuntimeError):
    """Refinement added no time point while Z > 0 (convergence bug guard)."""


@dataclass
class SelectionInputs:
    """Paths and shortened lengths drawn from one master solution."""

    location_paths: list  # per used vehicle, 0 .. 2n+1
    arc_short: dict  # (i, j) -> shortened length \bar T_ij
    fragment_floors: list  # (start loc, end loc, floor length)
    used_copies: list = field(default_factory=list)  # (path, ts copy) pairs


@dataclass
class SelectionResult:
    feasible: bool
    z: int | None
    delta: list  # flagged location arcs
    tau: dict | None  # location -> departure time (per-vehicle depots merged)


def selection_model(inst: Instance, inputs: SelectionInputs, backend=None,
                    floors=None):
    """Minimal number of arcs that must keep a shortened travel time for the
    given paths to schedule; Z = 0 certifies continuous feasibility.

    Ride limits are part of the system: without them a zero-shortening
    schedule could still stretch a customer's trip beyond R_i, and the
    returned times must be valid as the final schedule.
    """
    m = MilpModel("selection")
    tau = {}
    arcs = set()
    for path in inputs.location_paths:
        for loc in path:
            if loc not in tau:
                tau[loc] = m.add_var(f"tau{loc}", CONTINUOUS,
                                     inst.earliest[loc], inst.latest[loc])
        arcs.update(zip(path, path[1:]))
    arcs = sorted(arcs)
    theta, delta = {}, {}
    T = inst.travel_time
    for (i, j) in arcs:
        theta[i, j] = m.add_var(f"th{i}_{j}", CONTINUOUS, 0.0)
        delta[i, j] = m.add_var(f"d{i}_{j}", BINARY, obj=1.0)
        m.add_constr(f"rel{i}_{j}",
                     [(theta[i, j], 1.0), (delta[i, j], float(T[i, j]))],
                     GE, float(T[i, j]))
        m.add_constr(f"inc{i}_{j}",
                     [(tau[i], 1.0), (theta[i, j], 1.0), (tau[j], -1.0)], LE, 0.0)
        short = inputs.arc_short.get((i, j))
        if short is not None and short > 0:
            m.add_constr(f"min{i}_{j}", [(theta[i, j], 1.0)], GE, float(short))
    if floors is None:
        floors = inputs.fragment_floors
    for k, (start, end, floor) in enumerate(floors):
        m.add_constr(f"floor{k}", [(tau[end], 1.0), (tau[start], -1.0)],
                     GE, float(floor))
    for i in inst.pickups:
        if i in tau and i + inst.n in tau:
            m.add_constr(f"ride{i}", [(tau[i + inst.n], 1.0), (tau[i], -1.0)],
                         LE, float(inst.ride[i]))
    sol = milp.solve(m, backend=backend)
    if sol.status == Status.INFEASIBLE:
        return SelectionResult(False, None, [], None)
    if not sol.ok:
        raise milp.ConfigurationError(f"selection model: {sol.status}")
    flagged = sorted(a for a in arcs if sol.value(delta[a]) > 0.5)
    times = {loc: sol.value(v) for loc, v in tau.items()}
    return SelectionResult(True, int(round(sol.objective)), flagged, times)


def refine_grid(grid: TimeGrid, flagged_arcs, inst: Instance) -> int:
    """Insert t + T_pp' into the head's grid for every tail time point;
    returns the number of new points."""
    added = 0
    for (p, q) in flagged_arcs:
        for t in list(grid[p]):
            if grid.insert(q, t + inst.travel_time[p, q]):
                added += 1
    return added


def _refine_copy_interiors(inst, grid, inputs, flagged_arcs) -> int:
    """Grid-time candidates are blind to visit times interior to a
    fragment; when a flagged arc lies in a used copy, insert that copy's
    whole schedule so its shortened representation cannot persist."""
    from .fragments import feasible_schedule

    flagged = set(flagged_arcs)
    added = 0
    for path, copy in inputs.used_copies:
        if not any((i, j) in flagged for i, j in zip(path, path[1:])):
            continue
        sched = feasible_schedule(inst, path, fixed_start=copy.start_eff)
        for loc, t in zip(path, sched.times):
            if grid.insert(loc, t):
                added += 1
    return added


def _frag_inputs(inst, net, walks):
    paths, floors, used_copies = [], [], []
    arc_short = {}

    def shorten(loc_arc, value):
        prev = arc_short.get(loc_arc)
        if prev is None or value < prev:
            arc_short[loc_arc] = value

    seen_copies = set()
    for walk in walks:
        path = [inst.origin]
        for kind, idx in walk.elements:
            if kind == "frag":
                copy = net.ts_frags[idx]
                frag = net.frags[copy.frag_id]
                # the preceding node arc already landed on the start pickup
                path.extend(frag.path[1:] if path[-1] == frag.start else frag.path)
                if idx in seen_copies:
                    continue  # synchronized vehicles share one copy
                seen_copies.add(idx)
                used_copies.append((frag.path, copy))
                for (i, j) in zip(frag.path, frag.path[1:]):
                    shorten((i, j), inst.travel_time[i, j] - copy.disc)
                floors.append((frag.start, frag.end,
                               net.nodes[copy.head].t - copy.start_eff))
            else:
                arc = net.arcs[idx]
                if arc.kind == IDLE:
                    continue
                i, j = arc.loc_arc
                path.append(j)
                shorten((i, j), inst.travel_time[i, j] - arc.disc)
        paths.append(path)
    return SelectionInputs(paths, arc_short, floors, used_copies)


def _event_inputs(inst, net, walks):
    paths = []
    arc_short = {}
    for elements in walks:
        path = [inst.origin]
        for aid in elements:
            arc = net.arcs[aid]
            if arc.kind == IDLE:
                continue
            i, j = arc.loc_arc
            path.append(j)
            short = inst.travel_time[i, j] - arc.disc
            prev = arc_short.get((i, j))
            if prev is None or short < prev:
                arc_short[(i, j)] = short
        paths.append(path)
    return SelectionInputs(paths, arc_short, [])


@dataclass
class _Master:
    """Per-mode hooks of the DDD loop."""

    expand: callable
    build: callable
    decompose: callable
    inputs: callable
    physical: callable
    cut: callable


def ddd_solve(inst: Instance, mode="tsfrag", time_limit=1800.0, backend=None,
              initial_delta=50.0, trace=None, max_iterations=500) -> SolveReport:
    """Run DDD to a continuous-time optimum (tsfrag) or approximate
    benchmark value (tsef)."""
    if mode not in ("tsfrag", "tsef"):
        raise ValueError(f"DDD is defined for time-space modes, not {mode!r}")
    start = time.perf_counter()
    approximate = mode == "tsef"
    method = f"{mode}+ddd"
    if mode == "tsfrag":
        base = enumerate_fragments(inst)
        master = _Master(
            expand=lambda grid: expand_fragments(inst, base, grid),
            build=lambda net: build_tsfrag(inst, net),
            decompose=lambda net, sol, vm: decompose_tsfrag(inst, net, sol, vm),
            inputs=_frag_inputs,
            # cycles persist across grids as physical (fragment, location-arc)
            # element sets
            physical=cycle_physical_elements,
            cut=lambda model, net, vm, phys, name: subtour_cut_tsfrag(
                model, net, vm, phys[0], phys[1], name),
        )
        base_stats = {"F": len(base)}
    else:
        base = enumerate_events(inst)
        master = _Master(
            expand=lambda grid: expand_events(inst, base, grid),
            build=lambda net: build_tsef(inst, net),
            decompose=lambda net, sol, vm: decompose_tsef(inst, net, sol, vm),
            inputs=_event_inputs,
            physical=lambda net, cycle: sorted(
                {net.arcs[a].event_arc for a in cycle
                 if net.arcs[a].kind != IDLE}),
            cut=lambda model, net, vm, phys, name: subtour_cut_tsef(
                net, vm, phys, name),
        )
        base_stats = {"V_E": base.num_events, "A_E": base.num_arcs}

    grid = TimeGrid.initial_ddd(inst, initial_delta)
    history = []
    bound = None
    physical_cuts = []  # persists across iterations, re-instantiated per grid
    total_cuts = 0
    floor_cache = {}

    def emit(line):
        if trace is not None:
            trace(line)

    for k in range(1, max_iterations + 1):
        remaining = None
        if time_limit is not None:
            remaining = time_limit - (time.perf_counter() - start)
            if remaining <= 0:
                return SolveReport(method, Status.TIME_LIMIT, None, bound, None,
                                   time.perf_counter() - start, iterations=k - 1,
                                   cuts=total_cuts, stats=base_stats,
                                   approximate=approximate, history=history)
        net = master.expand(grid)
        model, vm = master.build(net)
        for c, phys in enumerate(physical_cuts):
            name, coeffs, sense, rhs = master.cut(model, net, vm, phys, f"pcut{c}")
            model.add_constr(name, coeffs, sense, rhs)
        iteration_cuts = []

        def subtours(sol):
            decomp = master.decompose(net, sol, vm)
            cycles = decomp[-1]
            cuts = []
            for kk, cycle in enumerate(cycles):
                phys = master.physical(net, cycle)
                iteration_cuts.append(phys)
                cuts.append(master.cut(model, net, vm, phys,
                                       f"cut{model.num_constrs}_{kk}"))
            return cuts

        master_start = time.perf_counter()
        sol, info = milp.resolve_with_cuts(model, subtours, remaining, backend)
        master_seconds = time.perf_counter() - master_start
        total_cuts += info.num_cuts
        physical_cuts.extend(iteration_cuts)
        if sol.status == Status.INFEASIBLE:
            # the partial network is a relaxation, so the instance itself is
            # infeasible (event mode: up to the documented ride-row caveat)
            return SolveReport(method, Status.INFEASIBLE, None, None, None,
                               time.perf_counter() - start, iterations=k,
                               cuts=total_cuts, stats=dict(base_stats, **net.stats()),
                               approximate=approximate, history=history)
        if not sol.ok:
            return SolveReport(method, sol.status, None, bound, None,
                               time.perf_counter() - start, iterations=k,
                               cuts=total_cuts, stats=dict(base_stats, **net.stats()),
                               approximate=approximate, history=history)
        if bound is not None and mode == "tsfrag" and sol.objective < bound - 1e-6:
            raise AssertionError(
                f"lower bound regressed: {sol.objective} < {bound} at k={k}")
        bound = sol.objective if bound is None else max(bound, sol.objective)
        decomp = master.decompose(net, sol, vm)
        walks = decomp[0]
        inputs = master.inputs(inst, net, walks)

        def finish_optimal(sel_ok):
            history.append((k, bound, 0, 0, master_seconds, info.num_cuts))
            emit(f"k={k} bound={bound:.4f} Z=0 new_points=0 "
                 f"master_seconds={master_seconds:.3f}")
            routes = [Route(v, [(loc, sel_ok.tau[loc]) for loc in path])
                      for v, path in enumerate(inputs.location_paths)]
            rs = RouteSet(routes, float(sol.objective),
                          _sync_groups_from_paths(inst, inputs.location_paths))
            return SolveReport(method, Status.OPTIMAL, sol.objective,
                               sol.best_bound, rs, time.perf_counter() - start,
                               gap=0.0, iterations=k, cuts=total_cuts,
                               stats=dict(base_stats, **net.stats()),
                               approximate=approximate, history=history)

        def flags_of(s):
            if s.feasible:
                return s.delta
            return [a for a, v in inputs.arc_short.items()
                    if v < inst.travel_time[a] - EPS]

        sel = selection_model(inst, inputs, backend=backend)
        if sel.feasible and sel.z == 0:
            return finish_optimal(sel)
        flagged = flags_of(sel)
        new_points = refine_grid(grid, flagged, inst)
        new_points += _refine_copy_interiors(inst, grid, inputs, flagged)
        if new_points == 0 and mode == "tsfrag":
            # the per-copy fragment floor can overtighten; retry with the
            # fragment's true minimum duration before declaring a stall
            weak = _weak_floors(inst, inputs, floor_cache)
            sel = selection_model(inst, inputs, backend=backend, floors=weak)
            if sel.feasible and sel.z == 0:
                return finish_optimal(sel)
            flagged = flags_of(sel)
            new_points = refine_grid(grid, flagged, inst)
            new_points += _refine_copy_interiors(inst, grid, inputs, flagged)
        if new_points == 0 and mode == "tsef":
            # nothing left to lengthen yet no continuous schedule: the
            # discrete ride rows cut the path set (documented inexactness)
            return SolveReport(method, Status.INFEASIBLE, None, bound, None,
                               time.perf_counter() - start, iterations=k,
                               cuts=total_cuts,
                               stats=dict(base_stats, **net.stats()),
                               approximate=True, history=history)
        z_repr = sel.z if sel.feasible else -1
        history.append((k, bound, z_repr, new_points, master_seconds, info.num_cuts))
        emit(f"k={k} bound={bound:.4f} Z={z_repr} new_points={new_points} "
             f"master_seconds={master_seconds:.3f}")
        if new_points == 0:
            raise StallError(f"Z={z_repr} with no grid growth at iteration {k}")
    raise StallError(f"no convergence within {max_iterations} iterations")


def _weak_floors(inst, inputs, cache):
    """Valid fragment floors: the minimum duration over all feasible starts
    (durations weakly shrink as the start moves later)."""
    from .fragments import feasible_schedule, start_interval

    floors = []
    for path, copy in inputs.used_copies:
        fid = copy.frag_id
        if fid not in cache:
            interval = start_interval(inst, path)
            sched = feasible_schedule(inst, path, fixed_start=interval[1])
            cache[fid] = sched.end - interval[1]
        floors.append((path[0], path[-1], cache[fid]))
    return floors
