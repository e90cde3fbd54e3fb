# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled contention kernel. Mirrors _pykernel.run_period bit for bit:
same dynamics, same SplitMix64 draws in the same order."""

from libc.stdint cimport int64_t, uint8_t, uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL


cdef inline uint64_t _next(uint64_t *state) nogil:
    cdef uint64_t z
    state[0] = state[0] + GOLDEN
    z = state[0]
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline int64_t _draw(uint64_t *state, int64_t cw) nogil:
    cdef uint64_t bound = <uint64_t>(cw + 1)
    cdef uint64_t threshold = (<uint64_t>0 - bound) % bound
    cdef uint64_t z
    while True:
        z = _next(state)
        if z >= threshold:
            return <int64_t>(z % bound)


def run_period(int64_t duration, int64_t frame_slots, int64_t overhead_slots,
               int64_t collision_slots, int64_t payload_bits,
               int64_t max_retries, int64_t guard_slots,
               int64_t carry_busy, int64_t pending_guard,
               uint8_t[::1] active, int64_t[::1] budget, int64_t[::1] counter,
               int64_t[::1] cur_cw, int64_t[::1] cw_min, int64_t[::1] cw_max,
               int64_t[::1] retries, int64_t[::1] hol_birth,
               uint64_t[::1] rng_state,
               int64_t[::1] attempts, int64_t[::1] retry_attempts,
               int64_t[::1] frames_ok, int64_t[::1] frames_collided,
               int64_t[::1] frames_dropped, int64_t[::1] decrements,
               int64_t[::1] latency_buf):
    cdef int n = active.shape[0]
    cdef uint64_t state = rng_state[0]
    cdef int64_t success_cost = frame_slots + overhead_slots
    cdef int64_t idle = 0, busy = 0, coll_events = 0, n_lat = 0, carry_out = 0
    cdef int64_t t = 0, m, c, adv, cost, evt_end, d
    cdef int64_t guard = pending_guard
    cdef int i, ntx, first_tx

    for i in range(n):
        attempts[i] = 0
        retry_attempts[i] = 0
        frames_ok[i] = 0
        frames_collided[i] = 0
        frames_dropped[i] = 0
        decrements[i] = 0

    if carry_busy > 0:
        adv = carry_busy if carry_busy <= duration else duration
        busy += adv
        t += adv
        carry_out = carry_busy - adv

    while t < duration:
        if guard > 0:
            # mandatory idle stretch after the medium clears
            adv = guard if guard <= duration - t else duration - t
            idle += adv
            t += adv
            guard -= adv
            for i in range(n):
                if active[i] and budget[i] != 0 and counter[i] > 0:
                    d = adv if adv <= counter[i] else counter[i]
                    counter[i] -= d
                    decrements[i] += d
            continue
        m = -1
        for i in range(n):
            if active[i] and budget[i] != 0:
                c = counter[i]
                if m < 0 or c < m:
                    m = c
        if m < 0:
            idle += duration - t
            t = duration
            break
        if m > 0:
            adv = m if m <= duration - t else duration - t
            idle += adv
            t += adv
            for i in range(n):
                if active[i] and budget[i] != 0:
                    counter[i] -= adv
                    decrements[i] += adv
            continue

        ntx = 0
        first_tx = -1
        for i in range(n):
            if active[i] and budget[i] != 0 and counter[i] == 0:
                ntx += 1
                if first_tx < 0:
                    first_tx = i
        if ntx == 1:
            cost = success_cost
        else:
            cost = collision_slots
            coll_events += 1
        evt_end = t + cost
        guard = guard_slots
        if evt_end <= duration:
            busy += cost
            t = evt_end
        else:
            busy += duration - t
            carry_out = evt_end - duration
            t = duration

        if ntx == 1:
            i = first_tx
            attempts[i] += 1
            if retries[i] > 0:
                retry_attempts[i] += 1
            frames_ok[i] += 1
            latency_buf[n_lat] = evt_end - hol_birth[i]
            n_lat += 1
            hol_birth[i] = evt_end
            retries[i] = 0
            cur_cw[i] = cw_min[i]
            if budget[i] > 0:
                budget[i] -= 1
            counter[i] = _draw(&state, cur_cw[i])
        else:
            for i in range(n):
                if not (active[i] and budget[i] != 0 and counter[i] == 0):
                    continue
                attempts[i] += 1
                if retries[i] > 0:
                    retry_attempts[i] += 1
                frames_collided[i] += 1
                retries[i] += 1
                if retries[i] > max_retries:
                    frames_dropped[i] += 1
                    retries[i] = 0
                    cur_cw[i] = cw_min[i]
                    hol_birth[i] = evt_end
                    if budget[i] > 0:
                        budget[i] -= 1
                else:
                    d = 2 * cur_cw[i] + 1
                    cur_cw[i] = d if d <= cw_max[i] else cw_max[i]
                counter[i] = _draw(&state, cur_cw[i])

    for i in range(n):
        hol_birth[i] -= duration

    rng_state[0] = state
    return idle, busy, coll_events, n_lat, carry_out, guard
