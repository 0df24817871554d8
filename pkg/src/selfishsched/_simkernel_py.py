"""Pure-Python event loop for one worker; reference twin of ``_simkernel.pyx``.

Both implementations must perform the same floating-point operations in the
same order so that traces are bit-identical across backends.
"""

import numpy as np

TRANSFER_END = 0
COMPUTE_END = 1
COMPUTE_START = 2
TRANSFER_START = 3

COMPLETION_TOL = 1e-9


def simulate_worker(bandwidth, power, b, w, Q, horizon):
    """Simulate flooding schedulers of all applications on a single worker.

    Returns ``(times, kinds, apps, final)`` where ``final`` holds per-application
    end-of-run counters.
    """
    K = len(b)
    b = [float(x) for x in b]
    w = [float(x) for x in w]
    bandwidth = float(bandwidth)
    power = float(power)
    horizon = float(horizon)
    tr_on = [0] * K
    cp_on = [0] * K
    tr_rem = [0.0] * K
    cp_rem = [0.0] * K
    buf = [0] * K
    transferred = [0.0] * K
    n_transfers = [0] * K
    n_done = [0] * K
    times, kinds, apps = [], [], []

    def start(t):
        for k in range(K):
            if not cp_on[k] and buf[k] > 0:
                buf[k] -= 1
                cp_on[k] = 1
                cp_rem[k] = w[k]
                times.append(t)
                kinds.append(COMPUTE_START)
                apps.append(k)
            if not tr_on[k] and buf[k] + cp_on[k] < Q:
                tr_on[k] = 1
                tr_rem[k] = b[k]
                times.append(t)
                kinds.append(TRANSFER_START)
                apps.append(k)

    t = 0.0
    if horizon > 0.0:
        start(t)
    while t < horizon:
        ntr = 0
        ncp = 0
        for k in range(K):
            ntr += tr_on[k]
            ncp += cp_on[k]
        r_tr = bandwidth / ntr if ntr else 0.0
        r_cp = power / ncp if ncp else 0.0
        dt = horizon - t
        last = True
        for k in range(K):
            if tr_on[k] and tr_rem[k] / r_tr < dt:
                dt = tr_rem[k] / r_tr
                last = False
            if cp_on[k] and cp_rem[k] / r_cp < dt:
                dt = cp_rem[k] / r_cp
                last = False
        step_tr = r_tr * dt
        step_cp = r_cp * dt
        for k in range(K):
            if tr_on[k]:
                tr_rem[k] -= step_tr
                transferred[k] += step_tr
            if cp_on[k]:
                cp_rem[k] -= step_cp
        if last:
            t = horizon
            break
        t += dt
        for k in range(K):
            if tr_on[k] and tr_rem[k] <= COMPLETION_TOL * b[k]:
                transferred[k] += tr_rem[k]
                tr_rem[k] = 0.0
                tr_on[k] = 0
                n_transfers[k] += 1
                buf[k] += 1
                times.append(t)
                kinds.append(TRANSFER_END)
                apps.append(k)
            if cp_on[k] and cp_rem[k] <= COMPLETION_TOL * w[k]:
                cp_rem[k] = 0.0
                cp_on[k] = 0
                n_done[k] += 1
                times.append(t)
                kinds.append(COMPUTE_END)
                apps.append(k)
        start(t)

    final = {
        "transferred": np.array(transferred),
        "transfers": np.array(n_transfers, dtype=np.int64),
        "completions": np.array(n_done, dtype=np.int64),
        "buffered": np.array(buf, dtype=np.int64),
        "computing": np.array(cp_on, dtype=np.int64),
        "transfer_remaining": np.array([tr_rem[k] if tr_on[k] else np.nan for k in range(K)]),
    }
    return (
        np.array(times, dtype=np.float64),
        np.array(kinds, dtype=np.int8),
        np.array(apps, dtype=np.int32),
        final,
    )
