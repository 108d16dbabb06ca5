"""Discretized domain, physical parameters, prognostic state and boundary handling.

The grid is node-centred on the box ``[0, Lx] x [0, Ly] x [0, 1]``; every face
carries one ghost layer. Fields are stored without ghosts (shape
``(Nx+1, Ny+1, Nz+1)``) and padded on demand by :func:`with_ghosts`, which
encodes the boundary conditions of each prognostic variable:

* ``v1``: odd in x (``v1 = 0`` on the x-walls), even in y, even in z.
* ``v2``: even in x, odd in y, even in z.
* ``T``/``q``: even in x and y, even at ``z = 0`` and Robin at ``z = 1``.

Even/odd reflections give second-order Neumann/Dirichlet closures; the Robin
ghost makes the centred boundary derivative satisfy ``(1/Rt) dz u + c u = 0``
exactly.
"""

from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class GridError(ValueError):
    """Raised for inadmissible grid dimensions."""


class ParameterError(ValueError):
    """Raised for inadmissible physical parameters."""


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    nz: int
    lx: float = 1.0
    ly: float = 1.0

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def hz(self) -> float:
        return 1.0 / self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx + 1, self.ny + 1, self.nz + 1)

    @property
    def shape2d(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny + 1)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.hx

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.hy

    @property
    def z(self) -> np.ndarray:
        return np.arange(self.nz + 1) * self.hz

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, self.z, indexing="ij")

    def mesh2d(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def volume(self) -> float:
        return self.lx * self.ly

    def trapezoid_weights(self, axis: str) -> np.ndarray:
        n, h = {"x": (self.nx, self.hx), "y": (self.ny, self.hy), "z": (self.nz, self.hz)}[axis]
        w = np.full(n + 1, h)
        w[0] = w[-1] = 0.5 * h
        return w

    @functools.cached_property
    def w2(self) -> np.ndarray:
        """Tensor-product trapezoid weights on M."""
        w = np.multiply.outer(self.trapezoid_weights("x"), self.trapezoid_weights("y"))
        w.flags.writeable = False
        return w

    @functools.cached_property
    def w3(self) -> np.ndarray:
        """Tensor-product trapezoid weights on the full domain."""
        w = np.multiply.outer(self.w2, self.trapezoid_weights("z"))
        w.flags.writeable = False
        return w


def make_grid(nx: int, ny: int, nz: int, lx: float = 1.0, ly: float = 1.0) -> Grid:
    for name, n in (("nx", nx), ("ny", ny), ("nz", nz)):
        if int(n) != n or n < 4:
            raise GridError(f"{name} must be an integer >= 4, got {n!r}")
    for name, length in (("lx", lx), ("ly", ly)):
        if not (np.isfinite(length) and length > 0):
            raise GridError(f"{name} must be positive, got {length!r}")
    return Grid(int(nx), int(ny), int(nz), float(lx), float(ly))


@dataclass(frozen=True)
class ForcingSpec:
    """Named forcing preset; evaluated on a grid by :mod:`moistpe.forcing`."""

    name: str = "zero"
    amplitude: float = 0.0
    modes: tuple[int, int, int] = (1, 1, 1)


@dataclass(frozen=True)
class PhysParams:
    Re1: float = 1.0
    Re2: float = 1.0
    Rt1: float = 1.0
    Rt2: float = 1.0
    Rt3: float = 1.0
    Rt4: float = 1.0
    Ro: float = 1.0
    f: float = 1.0
    a: float = 0.618
    b: float = 0.3
    P: float = 1.0
    p0: float = 0.2
    alpha: float = 1.0
    beta: float = 1.0
    Q1: ForcingSpec = field(default_factory=ForcingSpec)
    Q2: ForcingSpec = field(default_factory=ForcingSpec)

    POSITIVE = ("Re1", "Re2", "Rt1", "Rt2", "Rt3", "Rt4", "Ro", "a", "b", "P", "p0", "alpha", "beta")

    def __post_init__(self):
        for name in self.POSITIVE:
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ParameterError(f"params.{name} must be positive, got {value!r}")
        if not np.isfinite(self.f):
            raise ParameterError(f"params.f must be finite, got {self.f!r}")
        if not self.P > self.p0:
            raise ParameterError(f"params.P must exceed params.p0 ({self.P!r} <= {self.p0!r})")

    def replace(self, **changes) -> "PhysParams":
        return dataclasses.replace(self, **changes)

    def pressure(self, z: np.ndarray) -> np.ndarray:
        return (self.P - self.p0) * np.asarray(z) + self.p0

    def buoyancy_profile(self, g: Grid) -> np.ndarray:
        """bP/p(z) sampled at the z-levels."""
        return self.b * self.P / self.pressure(g.z)


@dataclass(frozen=True)
class State:
    """Prognostic point (v1, v2, T, q) at a given time. Arrays are treated as immutable."""

    v1: np.ndarray
    v2: np.ndarray
    T: np.ndarray
    q: np.ndarray
    time: float = 0.0

    FIELDS = ("v1", "v2", "T", "q")

    def fields(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.v1, self.v2, self.T, self.q)

    def replace(self, **changes) -> "State":
        return dataclasses.replace(self, **changes)

    def __sub__(self, other: "State") -> "State":
        return State(*(a - b for a, b in zip(self.fields(), other.fields())), time=self.time)

    def __add__(self, other: "State") -> "State":
        return State(*(a + b for a, b in zip(self.fields(), other.fields())), time=self.time)

    def scaled(self, c: float) -> "State":
        return State(*(c * a for a in self.fields()), time=self.time)

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.fields())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.fields()])

    @classmethod
    def from_vector(cls, vec: np.ndarray, g: Grid, time: float = 0.0) -> "State":
        n = int(np.prod(g.shape))
        parts = [np.array(vec[i * n:(i + 1) * n]).reshape(g.shape) for i in range(4)]
        return cls(*parts, time=time)


def zero_state(g: Grid, time: float = 0.0) -> State:
    return State(*(np.zeros(g.shape) for _ in range(4)), time=time)


class BC(NamedTuple):
    """Reflection parity per axis; ``top`` is the Robin coefficient c in
    ``dz u + c u = 0`` at z = 1 (0 means homogeneous Neumann)."""

    x: int
    y: int
    top: float = 0.0


SCALAR = BC(1, 1)


def field_bcs(p: PhysParams) -> dict[str, BC]:
    return {
        "v1": BC(-1, 1),
        "v2": BC(1, -1),
        "T": BC(1, 1, p.Rt2 * p.alpha),
        "q": BC(1, 1, p.Rt4 * p.beta),
    }


def pad(f: np.ndarray) -> np.ndarray:
    """Copy ``f`` into an array with one (zeroed) ghost layer on every face."""
    a = np.zeros(tuple(n + 2 for n in f.shape))
    if f.ndim == 3:
        a[1:-1, 1:-1, 1:-1] = f
    else:
        a[1:-1, 1:-1] = f
    return a


def fill_ghosts(a: np.ndarray, bc: BC, hz: float | None = None) -> np.ndarray:
    """Set the ghost layer of a padded array in place from its node values.

    Node values are never modified, so the operation is idempotent. For 2D
    arrays only the horizontal ghosts exist.
    """
    a[0] = bc.x * a[2]
    a[-1] = bc.x * a[-3]
    a[:, 0] = bc.y * a[:, 2]
    a[:, -1] = bc.y * a[:, -3]
    if a.ndim == 3:
        a[:, :, 0] = a[:, :, 2]
        if bc.top:
            a[:, :, -1] = a[:, :, -3] - 2.0 * hz * bc.top * a[:, :, -2]
        else:
            a[:, :, -1] = a[:, :, -3]
    return a


def with_ghosts(f: np.ndarray, bc: BC, hz: float | None = None) -> np.ndarray:
    return fill_ghosts(pad(f), bc, hz)


def apply_boundary_conditions(s: State, p: PhysParams, g: Grid) -> State:
    """Enforce the node-valued boundary conditions (v.n = 0 on the lateral walls).

    The Neumann, stress-free and Robin conditions live in the ghost layer built
    by :func:`with_ghosts`; they constrain no node value. Idempotent.
    """
    v1 = s.v1.copy()
    v2 = s.v2.copy()
    v1[0] = 0.0
    v1[-1] = 0.0
    v2[:, 0] = 0.0
    v2[:, -1] = 0.0
    return s.replace(v1=v1, v2=v2)


def mask_walls(dv1: np.ndarray, dv2: np.ndarray) -> None:
    """Zero the normal-velocity entries on the lateral walls, in place."""
    dv1[0] = 0.0
    dv1[-1] = 0.0
    dv2[:, 0] = 0.0
    dv2[:, -1] = 0.0


def ghost_bc_residuals(a: np.ndarray, bc: BC, g: Grid, rt: float = 1.0) -> dict[str, float]:
    """Max centred-difference BC residuals of a padded 3D array.

    ``rt`` is the vertical diffusivity multiplying the Robin derivative, so the
    top residual is ``(1/rt) dz u + (bc.top/rt) u``.
    """
    hx, hy, hz = g.hx, g.hy, g.hz
    nodes = a[1:-1, 1:-1, 1:-1]
    out = {}
    if bc.x == 1:
        dx0 = (a[2, 1:-1, 1:-1] - a[0, 1:-1, 1:-1]) / (2 * hx)
        dx1 = (a[-1, 1:-1, 1:-1] - a[-3, 1:-1, 1:-1]) / (2 * hx)
        out["x"] = float(max(abs(dx0).max(), abs(dx1).max()))
    else:
        out["x"] = float(max(abs(nodes[0]).max(), abs(nodes[-1]).max()))
    if bc.y == 1:
        dy0 = (a[1:-1, 2, 1:-1] - a[1:-1, 0, 1:-1]) / (2 * hy)
        dy1 = (a[1:-1, -1, 1:-1] - a[1:-1, -3, 1:-1]) / (2 * hy)
        out["y"] = float(max(abs(dy0).max(), abs(dy1).max()))
    else:
        out["y"] = float(max(abs(nodes[:, 0]).max(), abs(nodes[:, -1]).max()))
    dz0 = (a[1:-1, 1:-1, 2] - a[1:-1, 1:-1, 0]) / (2 * hz)
    dz1 = (a[1:-1, 1:-1, -1] - a[1:-1, 1:-1, -3]) / (2 * hz)
    out["bottom"] = float(abs(dz0).max())
    out["top"] = float(abs(dz1 / rt + bc.top / rt * nodes[:, :, -1]).max())
    return out


def onesided_bc_residuals(s: State, p: PhysParams, g: Grid) -> dict[str, float]:
    """Second-order one-sided BC residuals on node values (no ghosts).

    These are O(h^2) for smooth admissible states; used to monitor the State
    boundary invariants after each step.
    """

    def d_lo(u, h, axis):
        u0, u1, u2 = (np.take(u, i, axis=axis) for i in (0, 1, 2))
        return (-3 * u0 + 4 * u1 - u2) / (2 * h)

    def d_hi(u, h, axis):
        u0, u1, u2 = (np.take(u, i, axis=axis) for i in (-1, -2, -3))
        return (3 * u0 - 4 * u1 + u2) / (2 * h)

    res = {}
    for name, u in zip(State.FIELDS, s.fields()):
        vals = [abs(d_lo(u, g.hz, 2)).max()]
        if name in ("v1", "v2"):
            vals.append(abs(d_hi(u, g.hz, 2)).max())
        elif name == "T":
            vals.append(abs(d_hi(u, g.hz, 2) / p.Rt2 + p.alpha * u[:, :, -1]).max())
        else:
            vals.append(abs(d_hi(u, g.hz, 2) / p.Rt4 + p.beta * u[:, :, -1]).max())
        if name == "v1":
            vals += [abs(u[0]).max(), abs(u[-1]).max(), abs(d_lo(u, g.hy, 1)).max(), abs(d_hi(u, g.hy, 1)).max()]
        elif name == "v2":
            vals += [abs(u[:, 0]).max(), abs(u[:, -1]).max(), abs(d_lo(u, g.hx, 0)).max(), abs(d_hi(u, g.hx, 0)).max()]
        else:
            vals += [abs(d_lo(u, g.hx, 0)).max(), abs(d_hi(u, g.hx, 0)).max(),
                     abs(d_lo(u, g.hy, 1)).max(), abs(d_hi(u, g.hy, 1)).max()]
        res[name] = float(max(vals))
    return res


def vertical_integral(f: np.ndarray, g: Grid, level: int | None = None) -> np.ndarray:
    """Cumulative trapezoid of ``f`` in z from 0.

    With ``level=None`` the full cumulative array is returned (same shape as
    ``f``); otherwise the 2D slice at that z-level.
    """
    cum = np.zeros_like(f, dtype=float)
    np.cumsum(0.5 * g.hz * (f[..., 1:] + f[..., :-1]), axis=-1, out=cum[..., 1:])
    return cum if level is None else cum[..., level]


def overbar(f: np.ndarray, g: Grid) -> np.ndarray:
    """Vertical average over (0, 1); equals the top level of the cumulative integral."""
    return vertical_integral(f, g)[..., -1]


def inner(a: np.ndarray, b: np.ndarray, g: Grid) -> float:
    """Trapezoid L2 inner product on the domain."""
    return float(np.sum(g.w3 * a * b))


def inner2d(a: np.ndarray, b: np.ndarray, g: Grid) -> float:
    return float(np.sum(g.w2 * a * b))
