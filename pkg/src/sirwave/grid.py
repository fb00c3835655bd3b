"""Uniformly sampled scalar profiles with constant tails, and triples of them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import GridMismatch


@dataclass(frozen=True)
class Grid:
    t0: float
    h: float
    n: int

    @classmethod
    def symmetric(cls, half_width, n):
        return cls(-float(half_width), 2.0 * float(half_width) / (n - 1), int(n))

    @property
    def t(self):
        return self.t0 + self.h * np.arange(self.n)

    @property
    def t_end(self):
        return self.t0 + self.h * (self.n - 1)

    def compatible(self, other):
        return (self.n == other.n and abs(self.h - other.h) <= 1e-12 * self.h
                and abs(self.t0 - other.t0) <= 1e-9 * self.h)


@dataclass
class ProfileFunction:
    """Samples on ``grid`` plus the constant values taken beyond either end."""
    grid: Grid
    values: np.ndarray
    left: float = 0.0
    right: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise GridMismatch(f"{self.values.shape} samples for a grid of {self.grid.n}")

    @property
    def t(self):
        return self.grid.t

    def _spline(self):
        sp = getattr(self, "_sp", None)
        if sp is None:
            sp = CubicSpline(self.grid.t, self.values, bc_type="not-a-knot")
            self._sp = sp
        return sp

    def __call__(self, t, nu=0):
        t = np.asarray(t, dtype=float)
        out = np.asarray(self._spline()(t, nu), dtype=float)
        lo = t < self.grid.t0
        hi = t > self.grid.t_end
        if nu == 0:
            out = np.where(lo, self.left, np.where(hi, self.right, out))
        else:
            out = np.where(lo | hi, 0.0, out)
        return out

    def shifted_values(self, s):
        """Samples of ``t -> self(t + s)`` on the same grid."""
        if s == 0:
            return self.values.copy()
        return self(self.grid.t + s)

    def translate(self, steps: int):
        """``t -> self(t - steps*h)`` using the tails for the exposed end."""
        v = np.empty_like(self.values)
        if steps > 0:
            v[:steps] = self.left
            v[steps:] = self.values[:-steps]
        elif steps < 0:
            v[steps:] = self.right
            v[:steps] = self.values[-steps:]
        else:
            v[:] = self.values
        return ProfileFunction(self.grid, v, self.left, self.right)

    def with_values(self, values, left=None, right=None):
        return ProfileFunction(self.grid, values,
                               self.left if left is None else left,
                               self.right if right is None else right)

    def __sub__(self, other):
        if not self.grid.compatible(other.grid):
            raise GridMismatch("profiles live on different grids")
        return ProfileFunction(self.grid, self.values - other.values,
                               self.left - other.left, self.right - other.right)

    def __add__(self, other):
        if not self.grid.compatible(other.grid):
            raise GridMismatch("profiles live on different grids")
        return ProfileFunction(self.grid, self.values + other.values,
                               self.left + other.left, self.right + other.right)

    def scale(self, s):
        return ProfileFunction(self.grid, s * self.values, s * self.left, s * self.right)


@dataclass
class ProfileTriple:
    phi: ProfileFunction
    psi: ProfileFunction
    chi: ProfileFunction
    mu: float = 0.0

    def __post_init__(self):
        g = self.phi.grid
        if not (g.compatible(self.psi.grid) and g.compatible(self.chi.grid)):
            raise GridMismatch("triple components live on different grids")

    @property
    def grid(self):
        return self.phi.grid

    @property
    def components(self):
        return (self.phi, self.psi, self.chi)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    @classmethod
    def constant(cls, grid, values, mu=0.0):
        return cls(*(ProfileFunction(grid, np.full(grid.n, float(v)), float(v), float(v))
                     for v in values), mu=mu)

    @classmethod
    def from_functions(cls, grid, funcs, left, right, mu=0.0):
        t = grid.t
        return cls(*(ProfileFunction(grid, f(t), lo, hi) for f, lo, hi in zip(funcs, left, right)),
                   mu=mu)

    def stacked(self):
        return np.stack([c.values for c in self.components])

    def __sub__(self, other):
        return ProfileTriple(*(a - b for a, b in zip(self, other)), mu=self.mu)

    def __add__(self, other):
        return ProfileTriple(*(a + b for a, b in zip(self, other)), mu=self.mu)

    def midpoint(self, other):
        return ProfileTriple(*((a + b).scale(0.5) for a, b in zip(self, other)), mu=self.mu)

    def translate(self, steps):
        return ProfileTriple(*(c.translate(steps) for c in self), mu=self.mu)
