"""Schedules and fragments.

The schedule oracle answers one question exactly: given a location path,
does a continuous-time schedule exist that respects windows, travel
increments and every ride limit -- and if so, what is the earliest one?
Fragments are the pickup-to-delivery building blocks the time-space
formulation works with; the same oracle certifies each of them.
"""
import darpsv

inst = darpsv.tighten_windows(
    darpsv.random_instance(seed=0, n=3, vehicles=2, capacity=2,
                           large_share=0.34))
print(inst)
print(f"large customers (q > Q): {inst.large_pickups}\n")

path = (1, 1 + inst.n)
sched = darpsv.feasible_schedule(inst, path)
print(f"direct service of customer 1, path {path}:")
print(f"  earliest departures {[round(t, 1) for t in sched.times]}, "
      f"end {sched.end:.1f}")

lo, hi = darpsv.start_interval(inst, path)
print(f"  feasible departure window at the pickup: [{lo:.1f}, {hi:.1f}]")

pinned = darpsv.feasible_schedule(inst, path, fixed_start=hi)
print(f"  pinned to the latest start: {[round(t, 1) for t in pinned.times]}\n")

frags = darpsv.enumerate_fragments(inst)
print(f"{len(frags)} fragments (zero load exactly at both endpoints):")
for f in frags:
    print(f"  {f.kind:<10} {f.path}  cost {f.cost:6.2f}  vehicles {f.vehicles}")
print("\nA large customer's only fragment is its own pickup-delivery pair,")
print("traversed by two vehicles at the same times.")
