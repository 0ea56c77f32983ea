"""Pure-Python pallet motion kernel.

Semantics are shared bit-for-bit with the compiled kernel in ``_motion.pyx``;
both are exercised by the same tests and the benchmark. All arithmetic is
integer millimeters, so the two implementations cannot drift.

Ordering rule: pallets are processed front-to-back (descending ring position,
ties broken by lower pallet index). The front-most pallet's wrap-around leader
is constrained by that leader's position from the *previous* tick, which is
conservative but deterministic.
"""

from __future__ import annotations

IMPLEMENTATION = "python"


def advance(
    pos: list[int],
    movable: list[int],
    hold: list[int],
    step: int,
    stop_pos: list[int],
    stop_engaged: list[int],
    dwell_pos: int,
    dwell_ticks: int,
    pallet_len: int,
    min_gap: int,
    ring_len: int,
) -> tuple[list[int], list[int]]:
    """Advance one tick.

    Returns (new_pos, blocked_stop). ``new_pos`` is unwrapped (may exceed
    ring_len; never less than ``pos``); ``blocked_stop[i]`` is the index into
    ``stop_pos`` where pallet i came to rest this tick, else -1. ``hold`` is
    decremented/armed in place.
    """
    n = len(pos)
    order = sorted(range(n), key=lambda i: (-pos[i], i))
    new = list(pos)
    blocked = [-1] * n
    slot = pallet_len + min_gap
    n_stops = len(stop_pos)

    for r in range(n):
        i = order[r]
        if not movable[i]:
            continue
        if hold[i] > 0:
            hold[i] -= 1
            continue
        p = pos[i]
        move_target = p + step

        lead_limit = move_target
        if n > 1:
            if r > 0:
                lead = new[order[r - 1]]
            else:
                lead = pos[order[n - 1]] + ring_len
            lead_limit = lead - slot

        stop_limit = move_target + 1
        stop_hit = -1
        for s in range(n_stops):
            if not stop_engaged[s]:
                continue
            sp = stop_pos[s]
            if sp <= p:
                sp += ring_len
            if sp < stop_limit:
                stop_limit = sp
                stop_hit = s

        dwell_limit = dwell_pos
        if dwell_limit <= p:
            dwell_limit += ring_len

        target = move_target
        if lead_limit < target:
            target = lead_limit
        if stop_limit < target:
            target = stop_limit
        if dwell_limit < target or (dwell_limit == target and target != stop_limit):
            target = dwell_limit
            if dwell_limit <= move_target and dwell_limit <= lead_limit:
                hold[i] = dwell_ticks
        if target < p:
            target = p
        new[i] = target
        if stop_hit >= 0 and target == stop_limit:
            blocked[i] = stop_hit
    return new, blocked
