# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; same signatures and results as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow

cnp.import_array()


def hinge_forward(const double[:, ::1] X, const double[:, ::1] W1, const double[::1] b1,
                  const double[::1] W2, double b2):
    cdef Py_ssize_t n = X.shape[0], din = X.shape[1], d = W1.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double a, acc
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    for i in range(n):
        acc = b2
        for j in range(d):
            a = b1[j]
            for k in range(din):
                a += W1[j, k] * X[i, k]
            if a > 0.0:
                acc += W2[j] * a
        y[i] = acc
    return out


def lp_loss_grad(const double[:, ::1] X, const double[::1] wts, const double[::1] fx,
                 const double[:, ::1] W1, const double[::1] b1, const double[::1] W2,
                 double b2, double p):
    cdef Py_ssize_t n = X.shape[0], din = X.shape[1], d = W1.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double a, y, r, ar, dy, g, err = 0.0, gb2 = 0.0
    gW1_arr = np.zeros((d, din), dtype=np.float64)
    gb1_arr = np.zeros(d, dtype=np.float64)
    gW2_arr = np.zeros(d, dtype=np.float64)
    cdef double[:, ::1] gW1 = gW1_arr
    cdef double[::1] gb1 = gb1_arr
    cdef double[::1] gW2 = gW2_arr
    act_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] act = act_arr
    cdef bint square = p == 2.0
    for i in range(n):
        y = b2
        for j in range(d):
            a = b1[j]
            for k in range(din):
                a += W1[j, k] * X[i, k]
            act[j] = a
            if a > 0.0:
                y += W2[j] * a
        r = y - fx[i]
        if square:
            err += wts[i] * r * r
            dy = 2.0 * wts[i] * r
        else:
            ar = fabs(r)
            err += wts[i] * pow(ar, p)
            if r > 0.0:
                dy = wts[i] * p * pow(ar, p - 1.0)
            elif r < 0.0:
                dy = -wts[i] * p * pow(ar, p - 1.0)
            else:
                dy = 0.0
        gb2 += dy
        for j in range(d):
            a = act[j]
            if a > 0.0:
                gW2[j] += a * dy
                g = dy * W2[j]
                gb1[j] += g
                for k in range(din):
                    gW1[j, k] += g * X[i, k]
    return err, gW1_arr, gb1_arr, gW2_arr, gb2
