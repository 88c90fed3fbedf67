"""Pure-Python kernels.

Statement-for-statement mirror of ``_kernels.pyx``. Both backends perform the
same IEEE operations in the same order, so they produce bit-identical results;
``tests/test_kernels.py`` holds them to that.
"""

import math

import numpy as np

MODEL_OU = 0
MODEL_LINEAR = 1
MODEL_CUBIC = 2

STEP_EULER = 0
STEP_OU_EXACT = 1

MEASURE_FIXED = 0
MEASURE_CURRENT = 1
MEASURE_ACCUMULATE = 2

BLOWUP = 1e12


class MomentSystem:
    """N particles of a moment-driven model advanced in lock-step.

    The shared measure argument is summarized by ``(m, v)``: its mean vector and
    second moment. In accumulate mode it is the running average of the
    particle-averaged samples taken at ``sample_steps``; a refresh at step
    ``refresh_steps[q]`` switches the coefficients to the average of the first
    ``refresh_counts[q]`` samples. Per step the order is: path accumulator,
    storage, refresh, sampling, then the move to the next step.
    """

    def __init__(self, code, params, y0, coefs, stepper, mode, fixed_m, fixed_v,
                 sample_steps, refresh_steps, refresh_counts, need_history,
                 record_trace, n_steps, store_stride):
        y0 = np.asarray(y0, dtype=np.float64)
        self.n, self.d = y0.shape
        self.code = int(code)
        self.params = [float(p) for p in params]
        self.stepper = int(stepper)
        self.mode = int(mode)
        self.dt, self.sqdt, self.ea, self.eb, self.ec = (float(c) for c in coefs)
        self.y = y0.tolist()
        self.sample_steps = [int(s) for s in sample_steps]
        self.refresh_steps = [int(s) for s in refresh_steps]
        self.refresh_counts = [int(c) for c in refresh_counts]
        self.need_history = bool(need_history)
        self.record_trace = bool(record_trace)
        self.n_steps = int(n_steps)
        self.stride = int(store_stride)

        n, d = self.n, self.d
        if self.mode == MEASURE_FIXED:
            self.m = [float(x) for x in fixed_m]
            self.v = float(fixed_v)
        else:
            s1, s2 = self._sums()
            self.m = [s / n for s in s1]
            self.v = s2 / n

        self.acc_mean = [[0.0] * d for _ in range(n)]
        self.acc_m2 = [0.0] * n
        self.acc_count = 0
        self.sm = [0.0] * d
        self.sv = 0.0
        self.scount = 0
        self.p = 0
        self.q = 0
        n_samples = len(self.sample_steps) if self.need_history else 0
        self.hist_m = [[0.0] * d for _ in range(n_samples)]
        self.hist_v = [0.0] * n_samples
        n_trace = len(self.refresh_steps) if self.record_trace else 0
        self.trace_rows = [[0.0] * (d + 1) for _ in range(n_trace)]

        n_store = self.n_steps // self.stride + 1
        if self.n_steps % self.stride:
            n_store += 1
        self.stored_rows = [None] * n_store
        self.store_step_list = [0] * n_store
        self.store_ptr = 0
        self.k = 0
        self.blowup_step = -1

    def _sums(self):
        d = self.d
        s1 = [0.0] * d
        s2 = 0.0
        for yi in self.y:
            for j in range(d):
                s1[j] += yi[j]
                s2 += yi[j] * yi[j]
        return s1, s2

    def _process(self, k):
        n, d = self.n, self.d
        cnt = self.acc_count
        f1 = cnt / (cnt + 1)
        den = cnt + 1.0
        for i in range(n):
            yi = self.y[i]
            mi = self.acc_mean[i]
            sq = 0.0
            for j in range(d):
                mi[j] = f1 * mi[j] + yi[j] / den
                sq += yi[j] * yi[j]
            self.acc_m2[i] = f1 * self.acc_m2[i] + sq / den
        self.acc_count = cnt + 1

        if k % self.stride == 0 or k == self.n_steps:
            self.stored_rows[self.store_ptr] = [list(yi) for yi in self.y]
            self.store_step_list[self.store_ptr] = k
            self.store_ptr += 1

        if self.q < len(self.refresh_steps) and self.refresh_steps[self.q] == k:
            if self.mode == MEASURE_CURRENT:
                s1, s2 = self._sums()
                self.m = [s / n for s in s1]
                self.v = s2 / n
            elif self.mode == MEASURE_ACCUMULATE:
                c = self.refresh_counts[self.q]
                if c == self.scount:
                    self.m = list(self.sm)
                    self.v = self.sv
                elif 0 < c < self.scount:
                    self.m = list(self.hist_m[c - 1])
                    self.v = self.hist_v[c - 1]
                elif c > self.scount:
                    raise RuntimeError("refresh requests samples not yet taken")
            if self.record_trace:
                row = self.trace_rows[self.q]
                for j in range(d):
                    row[j] = self.m[j]
                row[d] = self.v
            self.q += 1

        while self.p < len(self.sample_steps) and self.sample_steps[self.p] == k:
            s1, s2 = self._sums()
            sc = self.scount
            f1 = sc / (sc + 1)
            den = (sc + 1.0) * n
            for j in range(d):
                self.sm[j] = f1 * self.sm[j] + s1[j] / den
            self.sv = f1 * self.sv + s2 / den
            self.scount = sc + 1
            if self.need_history:
                self.hist_m[self.p] = list(self.sm)
                self.hist_v[self.p] = self.sv
            self.p += 1

    def _move(self, xi, k):
        n, d = self.n, self.d
        dt, sqdt = self.dt, self.sqdt
        m, v = self.m, self.v
        bad = False
        if self.stepper == STEP_OU_EXACT:
            noise_coef = (1.0 - math.sqrt(v) / 2.0) * self.ec
            for i in range(n):
                y = self.y[i][0]
                y = self.ea * y - self.eb * m[0] + noise_coef * xi[i][0]
                self.y[i][0] = y
                if not abs(y) <= BLOWUP:
                    bad = True
        elif self.code == MODEL_OU:
            sig = 2.0 - math.sqrt(v)
            for i in range(n):
                y = self.y[i][0]
                y = y + (-2.0 * y - m[0]) * dt + sig * sqdt * xi[i][0]
                self.y[i][0] = y
                if not abs(y) <= BLOWUP:
                    bad = True
        elif self.code == MODEL_LINEAR:
            a, c, s = self.params
            for i in range(n):
                yi = self.y[i]
                for j in range(d):
                    y = yi[j]
                    y = y + (-a * y + c * m[j]) * dt + s * sqdt * xi[i][j]
                    yi[j] = y
                    if not abs(y) <= BLOWUP:
                        bad = True
        else:
            a, c, s = self.params
            for i in range(n):
                y = self.y[i][0]
                y = y + (-(y * y * y) - a * y - c * (y - m[0])) * dt + s * sqdt * xi[i][0]
                self.y[i][0] = y
                if not abs(y) <= BLOWUP:
                    bad = True
        if bad:
            self.blowup_step = k + 1

    def advance(self, noise):
        """Run ``len(noise)`` steps; returns the blow-up step or -1."""
        rows = np.asarray(noise, dtype=np.float64).tolist()
        for xi in rows:
            if self.k >= self.n_steps:
                raise RuntimeError("advance past the final step")
            self._process(self.k)
            self._move(xi, self.k)
            self.k += 1
            if self.blowup_step >= 0:
                return self.blowup_step
        return -1

    def finish(self):
        if self.k != self.n_steps:
            raise RuntimeError("finish called before the final step")
        self._process(self.k)

    def state(self):
        return np.array(self.y, dtype=np.float64).reshape(self.n, self.d)

    def measure(self):
        return np.array(self.m, dtype=np.float64), self.v

    def accumulators(self):
        return (np.array(self.acc_mean, dtype=np.float64).reshape(self.n, self.d),
                np.array(self.acc_m2, dtype=np.float64), self.acc_count)

    def stored(self):
        rows = self.stored_rows[: self.store_ptr]
        states = np.array(rows, dtype=np.float64).reshape(len(rows), self.n, self.d)
        return np.array(self.store_step_list[: self.store_ptr], dtype=np.int64), states

    def trace(self):
        return np.array(self.trace_rows, dtype=np.float64).reshape(-1, self.d + 1)


def w2_sorted_cost(xa, wa, xb, wb):
    """Squared W2 between two sorted 1-D weighted point sets (quantile coupling)."""
    xa = np.asarray(xa, dtype=np.float64).tolist()
    wa = np.asarray(wa, dtype=np.float64).tolist()
    xb = np.asarray(xb, dtype=np.float64).tolist()
    wb = np.asarray(wb, dtype=np.float64).tolist()
    na, nb = len(xa), len(xb)
    i = j = 0
    ca = wa[0]
    cb = wb[0]
    prev = 0.0
    cost = 0.0
    while True:
        diff = xa[i] - xb[j]
        if ca < cb:
            cost += (ca - prev) * (diff * diff)
            prev = ca
            i += 1
            if i == na:
                break
            ca += wa[i]
        elif cb < ca:
            cost += (cb - prev) * (diff * diff)
            prev = cb
            j += 1
            if j == nb:
                break
            cb += wb[j]
        else:
            cost += (ca - prev) * (diff * diff)
            prev = ca
            i += 1
            j += 1
            if i == na or j == nb:
                break
            ca += wa[i]
            cb += wb[j]
    return cost
