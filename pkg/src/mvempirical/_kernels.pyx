# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; see ``_pykernels.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

cdef enum:
    MODEL_OU = 0
    MODEL_LINEAR = 1
    MODEL_CUBIC = 2
    STEP_OU_EXACT = 1
    MEASURE_FIXED = 0
    MEASURE_CURRENT = 1
    MEASURE_ACCUMULATE = 2

cdef double BLOWUP = 1e12


cdef class MomentSystem:
    cdef public Py_ssize_t n, d
    cdef int code, stepper, mode
    cdef double pa, pc, ps
    cdef double dt, sqdt, ea, eb, ec
    cdef double[:, ::1] y
    cdef double[::1] m
    cdef double v
    cdef double[:, ::1] acc_mean
    cdef double[::1] acc_m2
    cdef public long long acc_count
    cdef double[::1] sm
    cdef double sv
    cdef long long scount
    cdef long long[::1] sample_steps, refresh_steps, refresh_counts
    cdef Py_ssize_t p, q
    cdef bint need_history, record_trace
    cdef double[:, ::1] hist_m
    cdef double[::1] hist_v
    cdef double[:, ::1] trace_rows
    cdef double[:, :, ::1] stored_rows
    cdef long long[::1] store_step_list
    cdef Py_ssize_t store_ptr
    cdef long long n_steps, stride
    cdef public long long k
    cdef public long long blowup_step
    cdef double[::1] s1

    def __init__(self, code, params, y0, coefs, stepper, mode, fixed_m, fixed_v,
                 sample_steps, refresh_steps, refresh_counts, need_history,
                 record_trace, n_steps, store_stride):
        cdef Py_ssize_t n_store, n_samples, n_trace
        y0 = np.ascontiguousarray(y0, dtype=np.float64)
        self.n = y0.shape[0]
        self.d = y0.shape[1]
        self.code = int(code)
        params = [float(x) for x in params] + [0.0, 0.0, 0.0]
        self.pa, self.pc, self.ps = params[0], params[1], params[2]
        self.stepper = int(stepper)
        self.mode = int(mode)
        self.dt, self.sqdt, self.ea, self.eb, self.ec = [float(c) for c in coefs]
        self.y = y0.copy()
        self.sample_steps = np.ascontiguousarray(sample_steps, dtype=np.int64)
        self.refresh_steps = np.ascontiguousarray(refresh_steps, dtype=np.int64)
        self.refresh_counts = np.ascontiguousarray(refresh_counts, dtype=np.int64)
        self.need_history = bool(need_history)
        self.record_trace = bool(record_trace)
        self.n_steps = int(n_steps)
        self.stride = int(store_stride)
        self.s1 = np.zeros(self.d)

        self.m = np.zeros(self.d)
        if self.mode == MEASURE_FIXED:
            for j in range(self.d):
                self.m[j] = float(fixed_m[j])
            self.v = float(fixed_v)
        else:
            self._current()

        self.acc_mean = np.zeros((self.n, self.d))
        self.acc_m2 = np.zeros(self.n)
        self.acc_count = 0
        self.sm = np.zeros(self.d)
        self.sv = 0.0
        self.scount = 0
        self.p = 0
        self.q = 0
        n_samples = self.sample_steps.shape[0] if self.need_history else 0
        self.hist_m = np.zeros((n_samples, self.d))
        self.hist_v = np.zeros(n_samples)
        n_trace = self.refresh_steps.shape[0] if self.record_trace else 0
        self.trace_rows = np.zeros((n_trace, self.d + 1))

        n_store = self.n_steps // self.stride + 1
        if self.n_steps % self.stride:
            n_store += 1
        self.stored_rows = np.zeros((n_store, self.n, self.d))
        self.store_step_list = np.zeros(n_store, dtype=np.int64)
        self.store_ptr = 0
        self.k = 0
        self.blowup_step = -1

    cdef double _sums(self) nogil:
        cdef Py_ssize_t i, j
        cdef double s2 = 0.0
        cdef double yij
        for j in range(self.d):
            self.s1[j] = 0.0
        for i in range(self.n):
            for j in range(self.d):
                yij = self.y[i, j]
                self.s1[j] += yij
                s2 += yij * yij
        return s2

    cdef void _current(self) nogil:
        cdef Py_ssize_t j
        cdef double s2 = self._sums()
        for j in range(self.d):
            self.m[j] = self.s1[j] / self.n
        self.v = s2 / self.n

    cdef int _process(self, long long k) nogil:
        cdef Py_ssize_t i, j
        cdef long long cnt = self.acc_count
        cdef long long sc, c
        cdef double f1 = <double>cnt / <double>(cnt + 1)
        cdef double den = cnt + 1.0
        cdef double sq, yij, s2
        for i in range(self.n):
            sq = 0.0
            for j in range(self.d):
                yij = self.y[i, j]
                self.acc_mean[i, j] = f1 * self.acc_mean[i, j] + yij / den
                sq += yij * yij
            self.acc_m2[i] = f1 * self.acc_m2[i] + sq / den
        self.acc_count = cnt + 1

        if k % self.stride == 0 or k == self.n_steps:
            for i in range(self.n):
                for j in range(self.d):
                    self.stored_rows[self.store_ptr, i, j] = self.y[i, j]
            self.store_step_list[self.store_ptr] = k
            self.store_ptr += 1

        if self.q < self.refresh_steps.shape[0] and self.refresh_steps[self.q] == k:
            if self.mode == MEASURE_CURRENT:
                self._current()
            elif self.mode == MEASURE_ACCUMULATE:
                c = self.refresh_counts[self.q]
                if c == self.scount:
                    for j in range(self.d):
                        self.m[j] = self.sm[j]
                    self.v = self.sv
                elif 0 < c < self.scount:
                    for j in range(self.d):
                        self.m[j] = self.hist_m[c - 1, j]
                    self.v = self.hist_v[c - 1]
                elif c > self.scount:
                    return -1
            if self.record_trace:
                for j in range(self.d):
                    self.trace_rows[self.q, j] = self.m[j]
                self.trace_rows[self.q, self.d] = self.v
            self.q += 1

        while self.p < self.sample_steps.shape[0] and self.sample_steps[self.p] == k:
            s2 = self._sums()
            sc = self.scount
            f1 = <double>sc / <double>(sc + 1)
            den = (sc + 1.0) * self.n
            for j in range(self.d):
                self.sm[j] = f1 * self.sm[j] + self.s1[j] / den
            self.sv = f1 * self.sv + s2 / den
            self.scount = sc + 1
            if self.need_history:
                for j in range(self.d):
                    self.hist_m[self.p, j] = self.sm[j]
                self.hist_v[self.p] = self.sv
            self.p += 1
        return 0

    cdef bint _move(self, double[:, ::1] xi) nogil:
        cdef Py_ssize_t i, j
        cdef double y, sig, noise_coef
        cdef double dt = self.dt, sqdt = self.sqdt
        cdef double a = self.pa, c = self.pc, s = self.ps
        cdef bint bad = False
        if self.stepper == STEP_OU_EXACT:
            noise_coef = (1.0 - sqrt(self.v) / 2.0) * self.ec
            for i in range(self.n):
                y = self.y[i, 0]
                y = self.ea * y - self.eb * self.m[0] + noise_coef * xi[i, 0]
                self.y[i, 0] = y
                if not fabs(y) <= BLOWUP:
                    bad = True
        elif self.code == MODEL_OU:
            sig = 2.0 - sqrt(self.v)
            for i in range(self.n):
                y = self.y[i, 0]
                y = y + (-2.0 * y - self.m[0]) * dt + sig * sqdt * xi[i, 0]
                self.y[i, 0] = y
                if not fabs(y) <= BLOWUP:
                    bad = True
        elif self.code == MODEL_LINEAR:
            for i in range(self.n):
                for j in range(self.d):
                    y = self.y[i, j]
                    y = y + (-a * y + c * self.m[j]) * dt + s * sqdt * xi[i, j]
                    self.y[i, j] = y
                    if not fabs(y) <= BLOWUP:
                        bad = True
        else:
            for i in range(self.n):
                y = self.y[i, 0]
                y = y + (-(y * y * y) - a * y - c * (y - self.m[0])) * dt + s * sqdt * xi[i, 0]
                self.y[i, 0] = y
                if not fabs(y) <= BLOWUP:
                    bad = True
        return bad

    def advance(self, noise):
        cdef double[:, :, ::1] xi = np.ascontiguousarray(noise, dtype=np.float64)
        cdef Py_ssize_t r, n_rows = xi.shape[0]
        cdef int status = 0
        if self.k + n_rows > self.n_steps:
            raise RuntimeError("advance past the final step")
        with nogil:
            for r in range(n_rows):
                if self._process(self.k) < 0:
                    status = -1
                    break
                if self._move(xi[r]):
                    self.blowup_step = self.k + 1
                    self.k += 1
                    break
                self.k += 1
        if status < 0:
            raise RuntimeError("refresh requests samples not yet taken")
        return self.blowup_step

    def finish(self):
        if self.k != self.n_steps:
            raise RuntimeError("finish called before the final step")
        if self._process(self.k) < 0:
            raise RuntimeError("refresh requests samples not yet taken")

    def state(self):
        return np.array(self.y, dtype=np.float64)

    def measure(self):
        return np.array(self.m, dtype=np.float64), self.v

    def accumulators(self):
        return np.array(self.acc_mean), np.array(self.acc_m2), self.acc_count

    def stored(self):
        return (np.array(self.store_step_list[: self.store_ptr], dtype=np.int64),
                np.array(self.stored_rows[: self.store_ptr]))

    def trace(self):
        return np.array(self.trace_rows).reshape(-1, self.d + 1)


def w2_sorted_cost(xa, wa, xb, wb):
    cdef double[::1] xa_ = np.ascontiguousarray(xa, dtype=np.float64)
    cdef double[::1] wa_ = np.ascontiguousarray(wa, dtype=np.float64)
    cdef double[::1] xb_ = np.ascontiguousarray(xb, dtype=np.float64)
    cdef double[::1] wb_ = np.ascontiguousarray(wb, dtype=np.float64)
    cdef Py_ssize_t na = xa_.shape[0], nb = xb_.shape[0]
    cdef Py_ssize_t i = 0, j = 0
    cdef double ca, cb, prev = 0.0, cost = 0.0, diff
    with nogil:
        ca = wa_[0]
        cb = wb_[0]
        while True:
            diff = xa_[i] - xb_[j]
            if ca < cb:
                cost += (ca - prev) * (diff * diff)
                prev = ca
                i += 1
                if i == na:
                    break
                ca += wa_[i]
            elif cb < ca:
                cost += (cb - prev) * (diff * diff)
                prev = cb
                j += 1
                if j == nb:
                    break
                cb += wb_[j]
            else:
                cost += (ca - prev) * (diff * diff)
                prev = ca
                i += 1
                j += 1
                if i == na or j == nb:
                    break
                ca += wa_[i]
                cb += wb_[j]
    return cost
