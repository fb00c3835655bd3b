"""Pure numpy version of the fused explicit step in ``_core``."""
import numpy as np


def advance(cur, delayed, infected_lag, out, dx, dt, coef):
    d1, d2, d3, B, mu1, mu2, mu3, gamma, alpha, beta = coef
    if cur.shape[1] == 1:
        lap = np.zeros_like(delayed)
    else:
        padded = np.concatenate([delayed[:, 1:2], delayed, delayed[:, -2:-1]], axis=1)
        lap = (padded[:, :-2] - 2.0 * delayed + padded[:, 2:]) / (dx * dx)
    nn, ii, rr = cur
    s = B / mu1 - nn - ii - rr
    out[0] = nn + dt * (d1 * lap[0] - mu1 * nn + (mu2 - mu1) * ii + (mu3 - mu1) * rr)
    out[1] = ii + dt * (d2 * lap[1] - (mu2 + gamma) * ii
                        + beta * s * infected_lag / (1.0 + alpha * infected_lag))
    out[2] = rr + dt * (d3 * lap[2] - mu3 * rr + gamma * ii)
