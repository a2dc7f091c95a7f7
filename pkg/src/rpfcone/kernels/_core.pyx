# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled orbit kernels; contract documented in kernels._ref."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, log, sqrt, sin, cos, pow, M_PI

cnp.import_array()

cdef double SQRT2 = sqrt(2.0)
cdef double INV_2_53 = 2.0 ** -53

cdef unsigned long long SM_GAMMA = 0x9E3779B97F4A7C15ULL
cdef unsigned long long SM_M1 = 0xBF58476D1CE4E5B9ULL
cdef unsigned long long SM_M2 = 0x94D049BB133111EBULL


cdef inline unsigned long long sm_scramble(unsigned long long z) nogil:
    z ^= z >> 30
    z *= SM_M1
    z ^= z >> 27
    z *= SM_M2
    z ^= z >> 31
    return z


cdef inline unsigned long long splitmix64(unsigned long long* state) nogil:
    state[0] += SM_GAMMA
    return sm_scramble(state[0])


cdef inline unsigned long long stream_state(unsigned long long seed, unsigned long long i) nogil:
    # scrambled start point; a linear ramp would make streams shifted copies
    return sm_scramble((seed + i) * SM_GAMMA)


cdef inline double step(int code, double* p, double x) nogil:
    cdef double y, beta, u
    cdef int m, j
    if code == 0:
        y = 2.0 * x
        return y - floor(y)
    if code == 1:
        beta = p[0]
        if x < 0.5:
            if beta == 0.5:
                y = x * (1.0 + SQRT2 * sqrt(x))
            else:
                y = x * (1.0 + pow(2.0, beta) * pow(x, beta))
        else:
            y = 2.0 * x - 1.0
        return y - floor(y)
    if code == 2:
        y = 2.0 * x + p[0] * sin(2.0 * M_PI * x)
        return y - floor(y)
    # piecewise linear: p = [m, b_0..b_m, s_1..s_m]
    m = <int> p[0]
    j = m - 1
    while j > 0 and x < p[1 + j]:
        j -= 1
    u = (x - p[1 + j]) / (p[2 + j] - p[1 + j])
    if p[2 + m + j] > 0:
        y = u
    else:
        y = 1.0 - u
    return y - floor(y)


cdef inline double log_inv_deriv(int code, double* p, double x) nogil:
    cdef double beta
    cdef int m, j
    if code == 0:
        return -log(2.0)
    if code == 1:
        beta = p[0]
        if x < 0.5:
            if beta == 0.5:
                return -log(1.0 + SQRT2 * 1.5 * sqrt(x))
            return -log(1.0 + pow(2.0, beta) * (1.0 + beta) * pow(x, beta))
        return -log(2.0)
    if code == 2:
        return -log(2.0 + 2.0 * M_PI * p[0] * cos(2.0 * M_PI * x))
    m = <int> p[0]
    j = m - 1
    while j > 0 and x < p[1 + j]:
        j -= 1
    return log(p[2 + j] - p[1 + j])


cdef inline int degree(int code, double* p) nogil:
    if code == 3:
        return <int> p[0]
    return 2


cdef inline double _newton_left(double c, double beta, double t, bint half) nogil:
    """Bracketed Newton matching _ref._newton: f(y) = y (1 + c y^beta) = t on
    [0, 1/2]; half flags the sqrt specialization beta == 1/2."""
    cdef double a = 0.0, b = 0.5, y = 0.25, r, d, ynew
    cdef int it
    if half:
        r = y * (1.0 + c * sqrt(y)) - t
    else:
        r = y * (1.0 + c * pow(y, beta)) - t
    for it in range(200):
        if r <= 0:
            a = y
        else:
            b = y
        if r <= 1e-12 and r >= -1e-12:
            break
        if half:
            d = 1.0 + c * 1.5 * sqrt(y)
        else:
            d = 1.0 + c * (1.0 + beta) * pow(y, beta)
        ynew = y - r / d
        if not (ynew > a and ynew < b):
            ynew = 0.5 * (a + b)
        y = ynew
        if half:
            r = y * (1.0 + c * sqrt(y)) - t
        else:
            r = y * (1.0 + c * pow(y, beta)) - t
    return y


cdef inline double _newton_perturbed(double eps, int b, double t) nogil:
    """2 y + eps sin(2 pi y) = t + b on [b/2, (b+1)/2]."""
    cdef double lo = 0.5 * b, hi = 0.5 * (b + 1), y, r, d, ynew
    cdef int it
    y = 0.5 * (lo + hi)
    r = 2.0 * y + eps * sin(2.0 * M_PI * y) - b - t
    for it in range(200):
        if r <= 0:
            lo = y
        else:
            hi = y
        if r <= 1e-12 and r >= -1e-12:
            break
        d = 2.0 + 2.0 * M_PI * eps * cos(2.0 * M_PI * y)
        ynew = y - r / d
        if not (ynew > lo and ynew < hi):
            ynew = 0.5 * (lo + hi)
        y = ynew
        r = 2.0 * y + eps * sin(2.0 * M_PI * y) - b - t
    return y


cdef inline double branch_inverse(int code, double* p, int b, double x) nogil:
    cdef double u
    cdef int m
    if code == 0:
        return (x + b) / 2.0
    if code == 1:
        if b == 1:
            return (x + 1.0) / 2.0
        if p[0] == 0.5:
            return _newton_left(SQRT2, 0.5, x, True)
        return _newton_left(pow(2.0, p[0]), p[0], x, False)
    if code == 2:
        return _newton_perturbed(p[0], b, x)
    m = <int> p[0]
    if p[2 + m + b] > 0:
        u = x
    else:
        u = 1.0 - x
    return p[1 + b] + u * (p[2 + b] - p[1 + b])


cdef inline double interp(double[::1] v, bint circle, double x) nogil:
    cdef Py_ssize_t n = v.shape[0]
    cdef double pos = x * n - 0.5
    cdef double fj = floor(pos)
    cdef double w = pos - fj
    cdef long j = <long> fj
    cdef long j0, j1
    if circle:
        j0 = j % n
        if j0 < 0:
            j0 += n
        j1 = j0 + 1
        if j1 == n:
            j1 = 0
        return (1.0 - w) * v[j0] + w * v[j1]
    if pos <= 0.0:
        return v[0]
    if pos >= n - 1.0:
        return v[n - 1]
    return (1.0 - w) * v[j] + w * v[j + 1]


cdef inline double backward_step(int code, double* p, double x,
                                 unsigned long long* state,
                                 double[::1] weight_vals, double[::1] h_vals,
                                 bint circle) nogil:
    """One h-weighted backward jump (at most 8 branches buffered);
    weight_vals are the pre-exponentiated e^phi samples."""
    cdef double pre[8]
    cdef double w[8]
    cdef int deg = degree(code, p)
    cdef int b, choice
    cdef double total = 0.0, u, acc
    for b in range(deg):
        pre[b] = branch_inverse(code, p, b, x)
        w[b] = interp(weight_vals, circle, pre[b]) * interp(h_vals, circle, pre[b])
        total += w[b]
    u = (splitmix64(state) >> 11) * INV_2_53 * total
    acc = 0.0
    choice = deg - 1
    for b in range(deg - 1):
        acc += w[b]
        if u < acc:
            choice = b
            break
    return pre[choice]


def orbit_positions(int code, cnp.ndarray[double, ndim=1] params, double x0, Py_ssize_t n):
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double x = x0 % 1.0
    cdef double* p = &params[0]
    cdef Py_ssize_t j
    for j in range(n):
        out[j] = x
        x = step(code, p, x)
    return out


def log_inv_deriv_trace(int code, cnp.ndarray[double, ndim=1] params, double x0, Py_ssize_t n):
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double x = x0 % 1.0
    cdef double* p = &params[0]
    cdef Py_ssize_t j
    for j in range(n):
        out[j] = log_inv_deriv(code, p, x)
        x = step(code, p, x)
    return out


def backward_birkhoff_sums(int code, cnp.ndarray[double, ndim=1] params,
                           cnp.ndarray[double, ndim=1] weight_vals,
                           cnp.ndarray[double, ndim=1] h_vals,
                           cnp.ndarray[double, ndim=1] anchors,
                           Py_ssize_t burn, Py_ssize_t n,
                           cnp.ndarray[double, ndim=1] obs_vals,
                           unsigned long long seed, bint circle=True):
    cdef Py_ssize_t ns = anchors.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(ns)
    cdef double[::1] wv = np.ascontiguousarray(weight_vals)
    cdef double[::1] h = np.ascontiguousarray(h_vals)
    cdef double[::1] obs = np.ascontiguousarray(obs_vals)
    cdef double* p = &params[0]
    cdef double x, s
    cdef unsigned long long state
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(ns):
            x = anchors[i] % 1.0
            state = stream_state(seed, <unsigned long long> i)
            s = 0.0
            for j in range(burn + n):
                x = backward_step(code, p, x, &state, wv, h, circle)
                if j >= burn:
                    s += interp(obs, circle, x)
            out[i] = s
    return out


def backward_pair_products(int code, cnp.ndarray[double, ndim=1] params,
                           cnp.ndarray[double, ndim=1] weight_vals,
                           cnp.ndarray[double, ndim=1] h_vals,
                           cnp.ndarray[double, ndim=1] anchors,
                           Py_ssize_t burn, Py_ssize_t nmax,
                           cnp.ndarray[double, ndim=1] phi_obs,
                           cnp.ndarray[double, ndim=1] psi_obs,
                           unsigned long long seed, bint circle=True):
    cdef Py_ssize_t ns = anchors.shape[0]
    cdef cnp.ndarray[double, ndim=1] prod = np.zeros(nmax + 1)
    cdef cnp.ndarray[double, ndim=1] phis = np.zeros(nmax + 1)
    cdef cnp.ndarray[double, ndim=1] ring = np.empty(nmax + 1)
    cdef double[::1] wv = np.ascontiguousarray(weight_vals)
    cdef double[::1] h = np.ascontiguousarray(h_vals)
    cdef double[::1] pobs = np.ascontiguousarray(phi_obs)
    cdef double[::1] sobs = np.ascontiguousarray(psi_obs)
    cdef double[::1] rng_buf = ring
    cdef double* p = &params[0]
    cdef double x, p0, ph, psum = 0.0
    cdef unsigned long long state
    cdef Py_ssize_t i, j, k
    with nogil:
        for i in range(ns):
            x = anchors[i] % 1.0
            state = stream_state(seed, <unsigned long long> i)
            for j in range(burn):
                x = backward_step(code, p, x, &state, wv, h, circle)
            for j in range(nmax + 1):
                x = backward_step(code, p, x, &state, wv, h, circle)
                rng_buf[j] = x
            p0 = interp(sobs, circle, rng_buf[nmax])
            psum += p0
            for k in range(nmax + 1):
                ph = interp(pobs, circle, rng_buf[nmax - k])
                prod[k] += p0 * ph
                phis[k] += ph
    return prod, phis, psum


def backward_positions(int code, cnp.ndarray[double, ndim=1] params,
                       cnp.ndarray[double, ndim=1] weight_vals,
                       cnp.ndarray[double, ndim=1] h_vals,
                       cnp.ndarray[double, ndim=1] anchors,
                       Py_ssize_t burn, Py_ssize_t keep,
                       unsigned long long seed, bint circle=True):
    cdef Py_ssize_t ns = anchors.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((ns, keep))
    cdef double[::1] wv = np.ascontiguousarray(weight_vals)
    cdef double[::1] h = np.ascontiguousarray(h_vals)
    cdef double* p = &params[0]
    cdef double x
    cdef unsigned long long state
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(ns):
            x = anchors[i] % 1.0
            state = stream_state(seed, <unsigned long long> i)
            for j in range(burn + keep):
                x = backward_step(code, p, x, &state, wv, h, circle)
                if j >= burn:
                    out[i, burn + keep - 1 - j] = x
    return out
