# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled pallet motion kernel.

Must stay semantically identical to ``_motion_py.advance``; the parity test
runs both against the same randomized inputs.
"""

from libc.stdlib cimport malloc, free

IMPLEMENTATION = "cython"


def advance(list pos, list movable, list hold, long long step,
            list stop_pos, list stop_engaged, long long dwell_pos,
            long long dwell_ticks, long long pallet_len, long long min_gap,
            long long ring_len):
    cdef Py_ssize_t n = len(pos)
    cdef Py_ssize_t n_stops = len(stop_pos)
    cdef Py_ssize_t i, r, s, j, key_i
    cdef long long p, move_target, lead, lead_limit, stop_limit, dwell_limit
    cdef long long target, sp, key_p, slot
    cdef int stop_hit

    cdef long long *cpos = <long long *> malloc((n or 1) * sizeof(long long))
    cdef long long *cnew = <long long *> malloc((n or 1) * sizeof(long long))
    cdef long long *cstop = <long long *> malloc((n_stops or 1) * sizeof(long long))
    cdef char *ceng = <char *> malloc((n_stops or 1) * sizeof(char))
    cdef char *cmov = <char *> malloc((n or 1) * sizeof(char))
    cdef Py_ssize_t *order = <Py_ssize_t *> malloc((n or 1) * sizeof(Py_ssize_t))
    if cpos == NULL or cnew == NULL or cstop == NULL or ceng == NULL \
            or cmov == NULL or order == NULL:
        if cpos != NULL:
            free(<void *> cpos)
        if cnew != NULL:
            free(<void *> cnew)
        if cstop != NULL:
            free(<void *> cstop)
        if ceng != NULL:
            free(<void *> ceng)
        if cmov != NULL:
            free(<void *> cmov)
        if order != NULL:
            free(<void *> order)
        raise MemoryError()

    try:
        for i in range(n):
            cpos[i] = pos[i]
            cnew[i] = cpos[i]
            cmov[i] = 1 if movable[i] else 0
            order[i] = i
        for s in range(n_stops):
            cstop[s] = stop_pos[s]
            ceng[s] = 1 if stop_engaged[s] else 0

        # insertion sort by (-pos, index); key is a total order so any correct
        # sort matches the fallback's result exactly
        for r in range(1, n):
            key_i = order[r]
            key_p = cpos[key_i]
            j = r
            while j > 0 and (cpos[order[j - 1]] < key_p or
                             (cpos[order[j - 1]] == key_p and order[j - 1] > key_i)):
                order[j] = order[j - 1]
                j -= 1
            order[j] = key_i

        blocked = [-1] * n
        slot = pallet_len + min_gap

        for r in range(n):
            i = order[r]
            if not cmov[i]:
                continue
            if <long long> hold[i] > 0:
                hold[i] = hold[i] - 1
                continue
            p = cpos[i]
            move_target = p + step

            lead_limit = move_target
            if n > 1:
                if r > 0:
                    lead = cnew[order[r - 1]]
                else:
                    lead = cpos[order[n - 1]] + ring_len
                lead_limit = lead - slot

            stop_limit = move_target + 1
            stop_hit = -1
            for s in range(n_stops):
                if not ceng[s]:
                    continue
                sp = cstop[s]
                if sp <= p:
                    sp += ring_len
                if sp < stop_limit:
                    stop_limit = sp
                    stop_hit = <int> s

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
            cnew[i] = target
            if stop_hit >= 0 and target == stop_limit:
                blocked[i] = stop_hit

        return [cnew[i] for i in range(n)], blocked
    finally:
        free(<void *> cpos)
        free(<void *> cnew)
        free(<void *> cstop)
        free(<void *> ceng)
        free(<void *> cmov)
        free(<void *> order)
