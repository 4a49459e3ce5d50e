"""Neumann cosine eigenbasis on an interval and the spectral fractional Laplacian.

Functions are sampled at the midpoint nodes x_j = a + (j + 1/2) h, h = L/N.
On this node set the cosine modes

    phi_0 = L**-0.5,   phi_k(x) = (2/L)**0.5 cos(k pi (x - a)/L),

are exactly orthonormal under the uniform weight h, so the forward and
inverse transforms are mutual inverses on the N-dimensional space.  The
operator I multiplies the coefficient c_k by -lambda_k**s, lambda_k = (k pi/L)**2.

Everything here works with dense N x N matrices; at the grid sizes we use
(N <= 512) that is both simple and fast.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import gamma, zeta


@dataclass(frozen=True)
class Grid:
    """Midpoint grid on (a, b) with N nodes."""

    a: float
    b: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.b <= self.a:
            raise ValueError(f"need finite a < b, got a={self.a}, b={self.b}")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"need an integer N >= 2, got {self.N}")

    @property
    def L(self) -> float:
        return float(self.b - self.a)

    @property
    def h(self) -> float:
        return self.L / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.a + (np.arange(self.N) + 0.5) * self.h

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """k pi / L for k = 0..N-1."""
        return np.arange(self.N) * np.pi / self.L

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Neumann Laplacian eigenvalues lambda_k = (k pi/L)^2."""
        return self.wavenumbers**2

    def eigenvalue_power(self, sigma: float) -> np.ndarray:
        """lambda_k**sigma with the convention lambda_0**0 = 1 and lambda_0**sigma = 0 otherwise."""
        lam = self.eigenvalues
        out = np.zeros_like(lam)
        out[1:] = lam[1:] ** sigma
        out[0] = 1.0 if sigma == 0 else 0.0
        return out

    def cosine_at(self, x, k=None) -> np.ndarray:
        """phi_k(x) for the given points; shape (len(k), len(x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.arange(self.N) if k is None else np.atleast_1d(np.asarray(k))
        out = np.sqrt(2.0 / self.L) * np.cos(np.outer(k, x - self.a) * np.pi / self.L)
        out[k == 0] = 1.0 / np.sqrt(self.L)
        return out

    def sine_at(self, x, k=None) -> np.ndarray:
        """(2/L)^{1/2} sin(k pi (x-a)/L); default k = 1..N-1."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.arange(1, self.N) if k is None else np.atleast_1d(np.asarray(k))
        return np.sqrt(2.0 / self.L) * np.sin(np.outer(k, x - self.a) * np.pi / self.L)

    def eigenfunction(self, k: int) -> "Field":
        c = np.zeros(self.N)
        c[k] = 1.0
        return Field.from_coeffs(self, c)


@dataclass(frozen=True, eq=False)
class Basis:
    """Dense transform matrices for a grid (cached per grid)."""

    grid: Grid

    @cached_property
    def cos_nodes(self) -> np.ndarray:
        # rows: modes k, columns: nodes j
        return self.grid.cosine_at(self.grid.nodes)

    @cached_property
    def sin_nodes(self) -> np.ndarray:
        return self.grid.sine_at(self.grid.nodes)

    @cached_property
    def forward(self) -> np.ndarray:
        return self.cos_nodes * self.grid.h

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.ascontiguousarray(self.cos_nodes.T)

    @cached_property
    def sine_forward(self) -> np.ndarray:
        return self.sin_nodes * self.grid.h

    @cached_property
    def sine_inverse(self) -> np.ndarray:
        return np.ascontiguousarray(self.sin_nodes.T)

    @cached_property
    def dx_matrix(self) -> np.ndarray:
        """Nodal values -> nodal derivative of the cosine interpolant."""
        k = self.grid.wavenumbers[1:]
        return self.sine_inverse @ (-k[:, None] * self.forward[1:])

    @cached_property
    def div_matrix(self) -> np.ndarray:
        """Nodal sine-series values -> nodal values of its derivative.

        The k = N sine mode is dropped: its derivative is the cosine mode N,
        which vanishes at every midpoint node.
        """
        k = self.grid.wavenumbers[1:]
        return self.inverse[:, 1:] @ (k[:, None] * self.sine_forward)


@lru_cache(maxsize=64)
def basis(grid: Grid) -> Basis:
    return Basis(grid)


@dataclass(frozen=True, eq=False)
class Operators:
    """Nodal matrices of I, d/dx I and the divergence for one (grid, s)."""

    grid: Grid
    s: float

    @cached_property
    def I_matrix(self) -> np.ndarray:
        B = basis(self.grid)
        return B.inverse @ (-self.grid.eigenvalue_power(self.s)[:, None] * B.forward)

    @cached_property
    def dxI_matrix(self) -> np.ndarray:
        B = basis(self.grid)
        k = self.grid.wavenumbers[1:]
        lam_s = self.grid.eigenvalue_power(self.s)[1:]
        return B.sine_inverse @ ((k * lam_s)[:, None] * B.forward[1:])

    @property
    def div_matrix(self) -> np.ndarray:
        return basis(self.grid).div_matrix


@lru_cache(maxsize=64)
def operators(grid: Grid, s: float) -> Operators:
    return Operators(grid, float(s))


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        bad = np.flatnonzero(~np.isfinite(values))
        raise ValueError(f"{what} contains non-finite entries at indices {bad[:8].tolist()}")


class Field:
    """A function on a grid held as nodal values or cosine coefficients.

    Whichever representation is supplied is authoritative; the other is
    computed on first access and cached.  Treat instances as immutable.
    """

    __slots__ = ("grid", "_nodal", "_coeffs")

    def __init__(self, grid: Grid, nodal=None, coeffs=None):
        if (nodal is None) == (coeffs is None):
            raise ValueError("give exactly one of nodal or coeffs")
        self.grid = grid
        self._nodal = None
        self._coeffs = None
        if nodal is not None:
            v = np.array(nodal, dtype=float).reshape(-1)
            if v.size != grid.N:
                raise ValueError(f"expected {grid.N} nodal values, got {v.size}")
            _check_finite(v, "nodal values")
            v.setflags(write=False)
            self._nodal = v
        else:
            c = np.array(coeffs, dtype=float).reshape(-1)
            if c.size > grid.N:
                raise ValueError(f"expected at most {grid.N} coefficients, got {c.size}")
            c = np.pad(c, (0, grid.N - c.size))
            _check_finite(c, "coefficients")
            c.setflags(write=False)
            self._coeffs = c

    @classmethod
    def from_nodal(cls, grid: Grid, values) -> "Field":
        return cls(grid, nodal=values)

    @classmethod
    def from_coeffs(cls, grid: Grid, coeffs) -> "Field":
        return cls(grid, coeffs=coeffs)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        return cls(grid, nodal=fn(grid.nodes))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, nodal=np.full(grid.N, float(value)))

    @property
    def nodal(self) -> np.ndarray:
        if self._nodal is None:
            v = basis(self.grid).inverse @ self._coeffs
            v.setflags(write=False)
            self._nodal = v
        return self._nodal

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            c = basis(self.grid).forward @ self._nodal
            c.setflags(write=False)
            self._coeffs = c
        return self._coeffs

    def integral(self) -> float:
        return float(self.coeffs[0] * np.sqrt(self.grid.L))

    def mean(self) -> float:
        return self.integral() / self.grid.L

    def inner(self, other: "Field") -> float:
        """Discrete L2 inner product (midpoint rule)."""
        return float(np.dot(self.nodal, other.nodal) * self.grid.h)

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.coeffs, self.coeffs)))

    def evaluate(self, x) -> np.ndarray:
        """Evaluate the cosine series at arbitrary points."""
        return self.coeffs @ self.grid.cosine_at(x)

    def __add__(self, other):
        if isinstance(other, Field):
            return Field(self.grid, nodal=self.nodal + other.nodal)
        return Field(self.grid, nodal=self.nodal + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Field):
            return Field(self.grid, nodal=self.nodal - other.nodal)
        return Field(self.grid, nodal=self.nodal - float(other))

    def __mul__(self, scalar):
        return Field(self.grid, coeffs=self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, coeffs=-self.coeffs)

    def __repr__(self):
        return f"Field(N={self.grid.N}, a={self.grid.a}, b={self.grid.b})"


def forward_transform(f: Field) -> np.ndarray:
    """Cosine coefficients c_k = sum_j f(x_j) phi_k(x_j) h."""
    return np.array(f.coeffs)


def inverse_transform(grid: Grid, coeffs) -> np.ndarray:
    return basis(grid).inverse @ np.asarray(coeffs, dtype=float)


def _check_s(s: float, upper_inclusive: bool = True) -> None:
    ok = 0 < s <= 1 if upper_inclusive else 0 < s < 1
    if not ok:
        raise ValueError(f"fractional order s={s} out of range")


def apply_I(f: Field, s: float) -> Field:
    """I(f) = -(-Delta)^s f; s = 1 gives the spectral Laplacian."""
    _check_s(s)
    return Field.from_coeffs(f.grid, -f.coeffs * f.grid.eigenvalue_power(s))


def fractional_laplacian(f: Field, s: float) -> Field:
    """(-Delta)^s f for s >= 0 (s = 0 is the identity)."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s == 0:
        return f
    return Field.from_coeffs(f.grid, f.coeffs * f.grid.eigenvalue_power(s))


def seminorm_sq(f: Field, sigma: float) -> float:
    """sum_k c_k^2 lambda_k^sigma.  For sigma = 0 the mean mode is included (L2 norm)."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    c = f.coeffs
    return float(np.dot(c * c, f.grid.eigenvalue_power(sigma)))


def seminorm(f: Field, sigma: float) -> float:
    return float(np.sqrt(seminorm_sq(f, sigma)))


def dx_of_cosine_series(f: Field) -> np.ndarray:
    """Nodal values of d/dx of the cosine series of f (a sine series)."""
    k = f.grid.wavenumbers[1:]
    return basis(f.grid).sine_inverse @ (-k * f.coeffs[1:])


def sine_coefficients(grid: Grid, g) -> np.ndarray:
    """Coefficients of nodal g in the sine modes k = 1..N-1."""
    return basis(grid).sine_forward @ np.asarray(g, dtype=float)


def div_of_sine_series(grid: Grid, g) -> Field:
    """Derivative of the sine-series interpolant of nodal g, as a cosine Field.

    The output has zero k = 0 coefficient, so the discrete mass of the
    divergence vanishes identically.
    """
    g = np.asarray(g, dtype=float)
    if g.size != grid.N:
        raise ValueError(f"expected {grid.N} nodal values, got {g.size}")
    _check_finite(g, "sine-series values")
    c = np.zeros(grid.N)
    c[1:] = grid.wavenumbers[1:] * sine_coefficients(grid, g)
    return Field.from_coeffs(grid, c)


def solve_fractional_poisson(g: Field, s: float, mean_tol: float = 1e-10) -> Field:
    """Zero-mean u with -I(u) = g.  Requires g to have zero mean."""
    _check_s(s)
    if abs(g.coeffs[0]) > mean_tol * max(g.norm(), 1e-300):
        raise ValueError(f"right-hand side has nonzero mean (c_0 = {g.coeffs[0]:.3e})")
    c = np.zeros(g.grid.N)
    c[1:] = g.coeffs[1:] / g.grid.eigenvalue_power(s)[1:]
    return Field.from_coeffs(g.grid, c)


# ---------------------------------------------------------------------------
# singular-integral representation, used only as an independent cross-check


def fractional_laplacian_constant(s: float) -> float:
    """Normalization of the whole-line fractional Laplacian kernel in 1D."""
    return float(s * 4.0**s * gamma(0.5 + s) / (np.sqrt(np.pi) * gamma(1.0 - s)))


def _image_sum(d: np.ndarray, p: float, M: int, tail: bool) -> np.ndarray:
    # sum_{k=-M..M} |d - 2k|^-p, optionally plus the exact remainder |k| > M
    out = np.zeros_like(d)
    with np.errstate(divide="ignore"):
        for k in range(-M, M + 1):
            out += np.abs(d - 2.0 * k) ** (-p)
    if tail:
        out += 2.0 ** (-p) * (zeta(p, M + 1 - d / 2.0) + zeta(p, M + 1 + d / 2.0))
    return out


@lru_cache(maxsize=32)
def _kernel_matrix(grid: Grid, s: float, M: int, tail: bool) -> np.ndarray:
    # reflected kernel on the unit interval; diagonal cell excluded
    xh = (grid.nodes - grid.a) / grid.L
    d = xh[:, None] - xh[None, :]
    e = xh[:, None] + xh[None, :]
    p = 1.0 + 2.0 * s
    K = _image_sum(d, p, M, tail) + _image_sum(e, p, M, tail)
    np.fill_diagonal(K, 0.0)
    K.setflags(write=False)
    return K


def kernel_apply(f: Field, s: float, M: int = 64, c_s: float | None = None,
                 tail: bool = True, local_correction: bool = True) -> Field:
    """Quadrature of int (f(y) - f(x)) K(x, y) dy with the image-sum kernel.

    The interval is mapped to (0, 1), where the reflected kernel has period 2,
    and the result is rescaled by L^{-2s}.  The diagonal cell is dropped
    (principal value), which on its own costs O(h^{2-2s}).  The leading part
    of that defect is -zeta(2s-1) h^{2-2s} f''(x); with ``local_correction``
    it is added back using the second difference of the evenly reflected
    grid function.  With ``tail`` the images beyond |k| = M are summed exactly
    through the Hurwitz zeta function.  When ``c_s`` is None the constant
    calibrated on phi_1 is used.
    """
    _check_s(s, upper_inclusive=False)
    if M < 1:
        raise ValueError("need at least one image term")
    grid = f.grid
    if c_s is None:
        c_s = calibrate_kernel_constant(grid, s, M, tail, local_correction)
    K = _kernel_matrix(grid, float(s), int(M), bool(tail))
    u = f.nodal
    hh = 1.0 / grid.N
    integral = (K @ u - K.sum(axis=1) * u) * hh
    if local_correction:
        ext = np.concatenate(([u[0]], u, [u[-1]]))
        d2 = (ext[2:] - 2.0 * u + ext[:-2]) / hh**2
        integral = integral - zeta(2.0 * s - 1.0) * hh ** (2.0 - 2.0 * s) * d2
    return Field.from_nodal(grid, c_s * grid.L ** (-2.0 * s) * integral)


@lru_cache(maxsize=32)
def calibrate_kernel_constant(grid: Grid, s: float, M: int = 64, tail: bool = True,
                              local_correction: bool = True) -> float:
    """Least-squares constant matching the kernel quadrature to apply_I on phi_1."""
    phi1 = grid.eigenfunction(1)
    raw = kernel_apply(phi1, s, M, c_s=1.0, tail=tail, local_correction=local_correction).nodal
    target = apply_I(phi1, s).nodal
    return float(np.dot(raw, target) / np.dot(raw, raw))
