# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Fused explicit step for the delayed reaction-diffusion system."""


def advance(const double[:, ::1] cur, const double[:, ::1] delayed,
            const double[::1] infected_lag, double[:, ::1] out,
            double dx, double dt, const double[::1] coef):
    """Write one Euler step into ``out``.

    ``coef`` holds ``(D1, D2, D3, B, mu1, mu2, mu3, gamma, alpha, beta)``.
    Diffusion acts on ``delayed``; reactions use ``cur`` and ``infected_lag``.
    Zero-flux ends use a mirrored ghost node.
    """
    cdef Py_ssize_t n = cur.shape[1]
    cdef Py_ssize_t j, i, jl, jr
    cdef double inv = 1.0 / (dx * dx)
    cdef double d[3]
    cdef double B = coef[3], mu1 = coef[4], mu2 = coef[5], mu3 = coef[6]
    cdef double gamma = coef[7], alpha = coef[8], beta = coef[9]
    cdef double a = mu2 - mu1, b = mu3 - mu1, cap = B / mu1
    cdef double nn, ii, rr, lag, s, lap
    cdef double f[3]
    d[0] = coef[0]
    d[1] = coef[1]
    d[2] = coef[2]
    with nogil:
        for j in range(n):
            jl = j - 1 if j > 0 else 1
            jr = j + 1 if j < n - 1 else n - 2
            if n == 1:
                jl = 0
                jr = 0
            nn = cur[0, j]
            ii = cur[1, j]
            rr = cur[2, j]
            lag = infected_lag[j]
            s = cap - nn - ii - rr
            f[0] = -mu1 * nn + a * ii + b * rr
            f[1] = -(mu2 + gamma) * ii + beta * s * lag / (1.0 + alpha * lag)
            f[2] = -mu3 * rr + gamma * ii
            for i in range(3):
                lap = (delayed[i, jl] - 2.0 * delayed[i, j] + delayed[i, jr]) * inv
                out[i, j] = cur[i, j] + dt * (d[i] * lap + f[i])
