"""Compiled round loop used for long trajectories.

Mirrors ``simulator._run_python`` exactly: same random inputs, same integer
ledger arithmetic, same EXP3 helpers (which the Python agents also call), so
both engines return bit-identical trajectories.
"""

import math

import numpy as np
from numba import njit

MECH_AVG = 0
MECH_CREDIT = 1

MYOPIC = 0
STAY_GOOD = 1
TRUTHFUL = 2
CONSTANT = 3
EXP3 = 4
ETC = 5
EXPERT = 6

# agent_i layout
AI_CODE, AI_PRICE, AI_BID, AI_BLOCK, AI_BURN, AI_RECOVER, AI_EXPERT = range(7)
# agent_f layout
AF_ETA, AF_RANGE = range(2)

RESCALE_AT = 50.0


@njit(cache=True, nogil=True)
def exp3_choose(w, u):
    total = 0.0
    for j in range(w.shape[0]):
        total += w[j]
    target = u * total
    acc = 0.0
    for j in range(w.shape[0]):
        acc += w[j]
        if target < acc:
            return j, w[j] / total
    j = w.shape[0] - 1
    return j, w[j] / total


@njit(cache=True, nogil=True)
def exp3_update(logw, w, shift, i, prob, reward, eta):
    """Multiplicative update with the importance-weighted loss (1 - reward) / prob.

    Equivalent to adding the unbiased reward estimate 1 - (1 - reward) / prob
    to the chosen expert and 1 to every other expert; the common shift cancels.
    """
    logw[i] -= eta * (1.0 - reward) / prob
    w[i] = math.exp(logw[i] - shift[0])
    top = logw[0]
    for j in range(logw.shape[0]):
        if logw[j] > top:
            top = logw[j]
    if top - shift[0] < -RESCALE_AT:
        shift[0] = top
        for j in range(logw.shape[0]):
            w[j] = math.exp(logw[j] - top)


@njit(cache=True, nogil=True)
def expert_bid(g, beta, good, v):
    if good:
        return g
    return beta if v >= beta else 0


@njit(cache=True, nogil=True)
def etc_argmax(tally, cnt):
    best = -1
    best_val = 0.0
    for j in range(tally.shape[0]):
        if cnt[j] == 0:
            continue
        val = tally[j] / cnt[j]
        if best < 0 or val > best_val:
            best = j
            best_val = val
    return max(best, 0)


@njit(cache=True, nogil=True)
def run_kernel(
    mech_kind, values, coins, agent_u,
    thr_num, thr_den, price, rho, r_target, tp0, steps,
    agent_i, agent_f, ex_g, ex_b, cands,
):
    T = values.shape[0]
    good_out = np.zeros(T, np.int8)
    led_a = np.zeros(T, np.float64)
    led_b = np.zeros(T, np.float64)
    bid_out = np.zeros(T, np.int64)
    alloc_out = np.zeros(T, np.int8)
    pay_out = np.zeros(T, np.float64)
    # explore rounds, committed candidate index, commit round (0-based), unused
    info = np.full(4, -1, np.int64)

    code = agent_i[AI_CODE]
    n_exp = ex_g.shape[0]
    logw = np.zeros(n_exp)
    w = np.ones(n_exp)
    shift = np.zeros(1)
    eta = agent_f[AF_ETA]
    urange = agent_f[AF_RANGE]

    n_c = cands.shape[0]
    L = agent_i[AI_BLOCK]
    burn = agent_i[AI_BURN]
    tally = np.zeros(n_c)
    cnt = np.zeros(n_c, np.int64)
    explore = min(n_c * L, T) if code == ETC else 0
    info[0] = explore
    started = False
    n_played = 0
    committed = -1

    bid_sum = 0
    count = 0
    tp = tp0
    ep = 0.0

    for r in range(T):
        v = values[r]
        if mech_kind == MECH_AVG:
            good = bid_sum * thr_den >= count * thr_num
            led_a[r] = bid_sum
            led_b[r] = count
        else:
            good = tp >= ep
            led_a[r] = tp
            led_b[r] = ep
        good_out[r] = good

        # --- bid
        chosen = -1
        prob = 1.0
        counted = False
        j = -1
        if code == MYOPIC:
            b = 0 if good else (price if v >= price else 0)
        elif code == STAY_GOOD:
            if r == T - 1 or not good:
                b = 0 if good else (price if v >= price else 0)
            else:
                need = (count + 1) * thr_num - bid_sum * thr_den
                b = max(0, -((-need) // thr_den))
        elif code == TRUTHFUL:
            b = v
        elif code == CONSTANT:
            b = agent_i[AI_BID]
        elif code == EXPERT:
            e = agent_i[AI_EXPERT]
            b = expert_bid(ex_g[e], ex_b[e], good, v)
        elif code == EXP3:
            chosen, prob = exp3_choose(w, agent_u[r])
            b = expert_bid(ex_g[chosen], ex_b[chosen], good, v)
        else:  # ETC
            if r < explore:
                j = r // L
                pos = r - j * L
                if pos == 0:
                    started = False
                    n_played = 0
                if not started and (good or 2 * pos >= L):
                    started = True
                if started:
                    b = cands[j]
                    counted = n_played >= burn
                    n_played += 1
                else:
                    b = agent_i[AI_RECOVER]
            else:
                if committed < 0:
                    committed = etc_argmax(tally, cnt)
                    info[1] = committed
                    info[2] = r
                b = cands[committed]
        bid_out[r] = b

        # --- allocate
        if good:
            x = 1
        elif b >= price:
            x = 1 if coins[r] < rho else 0
        else:
            x = 0
        alloc_out[r] = x

        # --- charge and transition
        if mech_kind == MECH_AVG:
            pay = float(b) if x == 1 else 0.0
            if x == 1:
                if good:
                    bid_sum += b
                    count += 1
                else:
                    bid_sum = 0
                    count = 0
        else:
            if x == 1 and tp <= r_target:
                pay = min(float(b), r_target - tp)
            else:
                pay = 0.0
            if tp >= r_target:
                ep = 0.0
            elif tp >= ep:
                tp = tp + pay
                ep = ep + steps[r]
            elif x == 1:
                ep = tp
        pay_out[r] = pay

        # --- feedback
        util = v * x - pay
        if code == EXP3:
            exp3_update(logw, w, shift, chosen, prob, (util + urange) / (2.0 * urange), eta)
        elif code == ETC and counted:
            tally[j] += util
            cnt[j] += 1

    if code == ETC and committed < 0:
        info[1] = etc_argmax(tally, cnt)
    return good_out, led_a, led_b, bid_out, alloc_out, pay_out, info
