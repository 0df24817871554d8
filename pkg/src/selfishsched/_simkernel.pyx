# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop for one worker. Mirrors ``_simkernel_py`` operation for operation."""

from libc.stdlib cimport free, malloc, realloc

import numpy as np

cdef enum:
    TRANSFER_END = 0
    COMPUTE_END = 1
    COMPUTE_START = 2
    TRANSFER_START = 3

cdef double COMPLETION_TOL = 1e-9


cdef struct EventLog:
    double *times
    signed char *kinds
    int *apps
    Py_ssize_t size
    Py_ssize_t cap


cdef int log_push(EventLog *log, double t, signed char kind, int app) except -1:
    cdef Py_ssize_t new_cap
    cdef void *p
    if log.size == log.cap:
        new_cap = log.cap * 2 if log.cap else 1024
        p = realloc(log.times, new_cap * sizeof(double))
        if p == NULL:
            raise MemoryError()
        log.times = <double *> p
        p = realloc(log.kinds, new_cap * sizeof(signed char))
        if p == NULL:
            raise MemoryError()
        log.kinds = <signed char *> p
        p = realloc(log.apps, new_cap * sizeof(int))
        if p == NULL:
            raise MemoryError()
        log.apps = <int *> p
        log.cap = new_cap
    log.times[log.size] = t
    log.kinds[log.size] = kind
    log.apps[log.size] = app
    log.size += 1
    return 0


cdef int start_all(EventLog *log, double t, int K, long Q, double *b, double *w,
                   int *tr_on, int *cp_on, double *tr_rem, double *cp_rem, long *buf) except -1:
    cdef int k
    for k in range(K):
        if not cp_on[k] and buf[k] > 0:
            buf[k] -= 1
            cp_on[k] = 1
            cp_rem[k] = w[k]
            log_push(log, t, COMPUTE_START, k)
        if not tr_on[k] and buf[k] + cp_on[k] < Q:
            tr_on[k] = 1
            tr_rem[k] = b[k]
            log_push(log, t, TRANSFER_START, k)
    return 0


def simulate_worker(double bandwidth, double power, b_in, w_in, long Q, double horizon):
    cdef int K = len(b_in)
    cdef int k, ntr, ncp
    cdef bint last
    cdef double t, dt, r_tr, r_cp, step_tr, step_cp
    cdef EventLog log
    log.times = NULL
    log.kinds = NULL
    log.apps = NULL
    log.size = 0
    log.cap = 0

    cdef double *b = <double *> malloc(K * sizeof(double))
    cdef double *w = <double *> malloc(K * sizeof(double))
    cdef double *tr_rem = <double *> malloc(K * sizeof(double))
    cdef double *cp_rem = <double *> malloc(K * sizeof(double))
    cdef double *transferred = <double *> malloc(K * sizeof(double))
    cdef int *tr_on = <int *> malloc(K * sizeof(int))
    cdef int *cp_on = <int *> malloc(K * sizeof(int))
    cdef long *buf = <long *> malloc(K * sizeof(long))
    cdef long *n_transfers = <long *> malloc(K * sizeof(long))
    cdef long *n_done = <long *> malloc(K * sizeof(long))
    try:
        if (b == NULL or w == NULL or tr_rem == NULL or cp_rem == NULL or transferred == NULL
                or tr_on == NULL or cp_on == NULL or buf == NULL or n_transfers == NULL or n_done == NULL):
            raise MemoryError()
        for k in range(K):
            b[k] = float(b_in[k])
            w[k] = float(w_in[k])
            tr_rem[k] = 0.0
            cp_rem[k] = 0.0
            transferred[k] = 0.0
            tr_on[k] = 0
            cp_on[k] = 0
            buf[k] = 0
            n_transfers[k] = 0
            n_done[k] = 0

        t = 0.0
        if horizon > 0.0:
            start_all(&log, t, K, Q, b, w, tr_on, cp_on, tr_rem, cp_rem, buf)
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
                    log_push(&log, t, TRANSFER_END, k)
                if cp_on[k] and cp_rem[k] <= COMPLETION_TOL * w[k]:
                    cp_rem[k] = 0.0
                    cp_on[k] = 0
                    n_done[k] += 1
                    log_push(&log, t, COMPUTE_END, k)
            start_all(&log, t, K, Q, b, w, tr_on, cp_on, tr_rem, cp_rem, buf)

        times = np.empty(log.size, dtype=np.float64)
        kinds = np.empty(log.size, dtype=np.int8)
        apps = np.empty(log.size, dtype=np.int32)
        _copy_log(&log, times, kinds, apps)
        final = {
            "transferred": np.array([transferred[k] for k in range(K)]),
            "transfers": np.array([n_transfers[k] for k in range(K)], dtype=np.int64),
            "completions": np.array([n_done[k] for k in range(K)], dtype=np.int64),
            "buffered": np.array([buf[k] for k in range(K)], dtype=np.int64),
            "computing": np.array([cp_on[k] for k in range(K)], dtype=np.int64),
            "transfer_remaining": np.array([tr_rem[k] if tr_on[k] else np.nan for k in range(K)]),
        }
        return times, kinds, apps, final
    finally:
        free(b)
        free(w)
        free(tr_rem)
        free(cp_rem)
        free(transferred)
        free(tr_on)
        free(cp_on)
        free(buf)
        free(n_transfers)
        free(n_done)
        free(log.times)
        free(log.kinds)
        free(log.apps)


cdef void _copy_log(EventLog *log, double[::1] times, signed char[::1] kinds, int[::1] apps):
    cdef Py_ssize_t i
    for i in range(log.size):
        times[i] = log.times[i]
        kinds[i] = log.kinds[i]
        apps[i] = log.apps[i]
