"""Pure-python contention kernel (fallback when the compiled one is absent).

Semantics, shared verbatim with the compiled kernel:

  * time advances in slot boundaries; stations whose backoff counter is 0 at a
    boundary transmit there
  * exactly one transmitter  -> success, busy for frame + overhead slots
  * two or more transmitters -> collision, busy for collision_slots; every
    collider bumps its retry count and redraws (BEB doubling up to cw_max)
  * nobody at 0              -> idle slot, every contending counter drops by 1
    (counters are frozen while the medium is busy)
  * a frame that fails more than max_retries times is dropped; the station
    resets to cw_min and moves on
  * after every busy stretch the medium must be seen idle for guard_slots
    slots (the DIFS edge) before anyone may fire; those slots still decrement
    waiting counters, so a station redrawing 0 cannot monopolise the channel
    outright
  * backoff draws are uniform on [0, cw]; the RNG is consumed only on redraws,
    in ascending station order, so idle-run jumps keep output bit-identical

Idle runs are collapsed into a single jump to the smallest counter, which is
exact because idle slots consume no randomness.  Busy time spilling over the
period edge is returned as carry and charged to the next period.
"""

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def run_period(duration, frame_slots, overhead_slots, collision_slots,
               payload_bits, max_retries, guard_slots, carry_busy,
               pending_guard,
               active, budget, counter, cur_cw, cw_min, cw_max, retries,
               hol_birth, rng_state,
               attempts, retry_attempts, frames_ok, frames_collided,
               frames_dropped, decrements, latency_buf):
    """Advance every station through one period of `duration` slots.

    Mutates the state arrays in place; per-station tallies are zeroed here.
    Returns (idle, busy, collision_events, n_latency, carry_out, guard_out).
    """
    n = len(active)
    # local copies: plain ints are much faster than numpy scalar indexing
    act = [int(x) for x in active]
    bud = [int(x) for x in budget]
    cnt = [int(x) for x in counter]
    cw = [int(x) for x in cur_cw]
    cwmn = [int(x) for x in cw_min]
    cwmx = [int(x) for x in cw_max]
    rty = [int(x) for x in retries]
    birth = [int(x) for x in hol_birth]
    att = [0] * n
    ratt = [0] * n
    fok = [0] * n
    fcol = [0] * n
    fdrp = [0] * n
    dec = [0] * n

    state = int(rng_state[0])
    success_cost = frame_slots + overhead_slots
    idle = 0
    busy = 0
    coll_events = 0
    n_lat = 0
    carry_out = 0
    guard = pending_guard
    t = 0

    if carry_busy > 0:
        adv = carry_busy if carry_busy <= duration else duration
        busy += adv
        t += adv
        carry_out = carry_busy - adv  # only nonzero when carry spans the period

    while t < duration:
        if guard > 0:
            # mandatory idle stretch after the medium clears
            adv = guard if guard <= duration - t else duration - t
            idle += adv
            t += adv
            guard -= adv
            for i in range(n):
                if act[i] and bud[i] != 0 and cnt[i] > 0:
                    d = adv if adv <= cnt[i] else cnt[i]
                    cnt[i] -= d
                    dec[i] += d
            continue
        m = -1
        for i in range(n):
            if act[i] and bud[i] != 0:
                c = cnt[i]
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
                if act[i] and bud[i] != 0:
                    cnt[i] -= adv
                    dec[i] += adv
            continue
        # transmission boundary
        txers = [i for i in range(n) if act[i] and bud[i] != 0 and cnt[i] == 0]
        if len(txers) == 1:
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

        if len(txers) == 1:
            i = txers[0]
            att[i] += 1
            if rty[i] > 0:
                ratt[i] += 1
            fok[i] += 1
            latency_buf[n_lat] = evt_end - birth[i]
            n_lat += 1
            birth[i] = evt_end
            rty[i] = 0
            cw[i] = cwmn[i]
            if bud[i] > 0:
                bud[i] -= 1
            # redraw
            bound = cw[i] + 1
            threshold = ((1 << 64) - bound) % bound
            while True:
                state = (state + _GOLDEN) & MASK64
                z = state
                z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
                z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
                z ^= z >> 31
                if z >= threshold:
                    break
            cnt[i] = z % bound
        else:
            for i in txers:
                att[i] += 1
                if rty[i] > 0:
                    ratt[i] += 1
                fcol[i] += 1
                rty[i] += 1
                if rty[i] > max_retries:
                    fdrp[i] += 1
                    rty[i] = 0
                    cw[i] = cwmn[i]
                    birth[i] = evt_end
                    if bud[i] > 0:
                        bud[i] -= 1
                else:
                    d = 2 * cw[i] + 1
                    cw[i] = d if d <= cwmx[i] else cwmx[i]
                bound = cw[i] + 1
                threshold = ((1 << 64) - bound) % bound
                while True:
                    state = (state + _GOLDEN) & MASK64
                    z = state
                    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
                    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
                    z ^= z >> 31
                    if z >= threshold:
                        break
                cnt[i] = z % bound

    for i in range(n):
        birth[i] -= duration

    # write back
    for i in range(n):
        budget[i] = bud[i]
        counter[i] = cnt[i]
        cur_cw[i] = cw[i]
        retries[i] = rty[i]
        hol_birth[i] = birth[i]
        attempts[i] = att[i]
        retry_attempts[i] = ratt[i]
        frames_ok[i] = fok[i]
        frames_collided[i] = fcol[i]
        frames_dropped[i] = fdrp[i]
        decrements[i] = dec[i]
    rng_state[0] = state
    return idle, busy, coll_events, n_lat, carry_out, guard
