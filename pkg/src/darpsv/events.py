"""Event-based network: nodes are (location, onboard-set) states, arcs are
feasible transitions.  Capacity, pairing and precedence are implicit in the
state space; a time-window reachability filter prunes states that cannot
occur in any feasible schedule.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .instance import EPS, Instance


@dataclass(frozen=True)
class Event:
    loc: int
    onboard: tuple  # sorted customer ids on board after serving loc

    def label(self) -> str:
        if not self.onboard:
            return f"({self.loc})"
        return f"({self.loc},{{{','.join(map(str, self.onboard))}}})"


@dataclass(frozen=True)
class EventArc:
    tail: int
    head: int
    loc_arc: tuple
    cost: float
    cap: int  # max vehicles traversing simultaneously


def cap(inst: Instance, u: Event, v: Event) -> int:
    """Vehicle cap of an event arc: min of the endpoint location
    requirements, with depot ends taking the other side's value."""
    qi, qj = abs(int(inst.demand[u.loc])), abs(int(inst.demand[v.loc]))
    need = lambda q: max(1, math.ceil(q / inst.capacity))
    if u.loc == inst.origin:
        return need(qj)
    if v.loc == inst.destination:
        return need(qi)
    return min(need(qi), need(qj))


class EventNetwork:
    def __init__(self, inst, events, arcs, origin_id, dest_id):
        self.inst = inst
        self.events = events
        self.arcs = arcs
        self.origin_id = origin_id
        self.dest_id = dest_id
        self.out_arcs = [[] for _ in events]
        self.in_arcs = [[] for _ in events]
        self.by_loc_arc = {}
        for aid, arc in enumerate(arcs):
            self.out_arcs[arc.tail].append(aid)
            self.in_arcs[arc.head].append(aid)
            self.by_loc_arc.setdefault(arc.loc_arc, []).append(aid)

    @property
    def num_events(self):
        return len(self.events)

    @property
    def num_arcs(self):
        return len(self.arcs)

    def arcs_from_location(self, i):
        """Event arcs whose location arc starts at i (the set A+(i))."""
        return [aid for (a, b), aids in self.by_loc_arc.items() if a == i
                for aid in aids]


def _successors(inst: Instance, ev: Event):
    """Feasible successor events under the transition rules."""
    n, Q = inst.n, inst.capacity
    out = []
    if ev.loc == inst.origin:
        raise ValueError("depot successors are handled by the builder")
    if inst.is_pickup(ev.loc):
        onboard = set(ev.onboard) | {ev.loc}
    else:
        onboard = set(ev.onboard)
    load = sum(int(inst.demand[c]) for c in onboard)
    for c in sorted(onboard):  # deliver someone on board
        out.append(Event(c + n, tuple(sorted(onboard - {c}))))
    if load <= Q:  # pick someone else up
        for j in inst.pickups:
            if j in onboard or j == ev.loc:
                continue
            if inst.is_delivery(ev.loc) and j == ev.loc - n:
                continue  # returning to the customer just served only feeds subtours
            if inst.is_large(j):
                if not onboard and inst.is_delivery(ev.loc):
                    # empty vehicle moving from a delivery to a large pickup
                    out.append(Event(j, ()))
                continue
            if load + int(inst.demand[j]) <= Q:
                out.append(Event(j, tuple(sorted(onboard))))
    return out


def enumerate_events(inst: Instance) -> EventNetwork:
    """Build the pruned event network.

    Forward search from the origin depot generates only capacity-feasible
    states; arcs with e_i + T_ij > l_j are dropped, and events that cannot
    reach the destination depot are removed afterwards.
    """
    e, l, T = inst.earliest, inst.latest, inst.travel_time
    origin = Event(inst.origin, ())
    dest = Event(inst.destination, ())

    def tw_ok(i, j):
        return e[i] + T[i, j] <= l[j] + EPS

    adjacency = {origin: [], dest: []}
    queue = deque()
    for i in inst.pickups:
        if tw_ok(inst.origin, i):
            ev = Event(i, ())
            adjacency[origin].append(ev)
            if ev not in adjacency:
                adjacency[ev] = None
                queue.append(ev)
    while queue:
        ev = queue.popleft()
        succ = []
        for nxt in _successors(inst, ev):
            if not tw_ok(ev.loc, nxt.loc):
                continue
            succ.append(nxt)
            if nxt not in adjacency:
                adjacency[nxt] = None
                queue.append(nxt)
        if inst.is_delivery(ev.loc) and not ev.onboard and tw_ok(ev.loc, inst.destination):
            succ.append(dest)
        adjacency[ev] = succ

    # keep only events co-reachable to the destination
    reverse = {}
    for ev, succ in adjacency.items():
        for nxt in succ or ():
            reverse.setdefault(nxt, []).append(ev)
    keep = {dest}
    stack = [dest]
    while stack:
        ev = stack.pop()
        for prev in reverse.get(ev, ()):
            if prev not in keep:
                keep.add(prev)
                stack.append(prev)
    keep.add(origin)
    keep.add(dest)

    events = sorted((ev for ev in adjacency if ev in keep),
                    key=lambda ev: (ev.loc, ev.onboard))
    index = {ev: k for k, ev in enumerate(events)}
    arcs = []
    for ev in events:
        for nxt in adjacency.get(ev) or ():
            if nxt in keep:
                arcs.append(EventArc(index[ev], index[nxt], (ev.loc, nxt.loc),
                                     float(inst.travel_cost[ev.loc, nxt.loc]),
                                     cap(inst, ev, nxt)))
    arcs.sort(key=lambda a: (a.tail, a.head))
    return EventNetwork(inst, events, arcs, index[origin], index[dest])


def brute_force_events(inst: Instance):
    """All (location, onboard) pairs passing the capacity and structure
    predicates, with no reachability pruning.  Test oracle for small n."""
    from itertools import combinations

    n, Q = inst.n, inst.capacity
    smalls = list(inst.small_pickups)
    out = {Event(inst.origin, ()), Event(inst.destination, ())}
    for i in inst.pickups:
        if inst.is_large(i):
            out.add(Event(i, ()))
            out.add(Event(i + n, ()))
            continue
        others = [j for j in smalls if j != i]
        for r in range(len(others) + 1):
            for S in combinations(others, r):
                if inst.demand[i] + sum(inst.demand[j] for j in S) <= Q:
                    out.add(Event(i, tuple(sorted(S))))
                    # the vehicle carried S alongside i right before the
                    # delivery, so the same bound gates the delivery state
                    out.add(Event(i + n, tuple(sorted(S))))
    return out


def dump_events(net: EventNetwork) -> str:
    """Deterministic text listing for golden tests."""
    lines = [f"events {net.num_events} arcs {net.num_arcs}"]
    for ev in net.events:
        lines.append(ev.label())
    for arc in net.arcs:
        lines.append(f"{net.events[arc.tail].label()} -> "
                     f"{net.events[arc.head].label()} cost={arc.cost:.6f} U={arc.cap}")
    return "\n".join(lines) + "\n"
