"""Force models, conic propagation and per-node ephemeris caching.

Units are km, km/s and seconds past J2000 throughout. The N-body model is the
heliocentric restricted problem: a massless particle attracted by the central
body plus perturbing bodies on known ephemerides (direct and indirect terms).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .exceptions import (
    CloseApproachError,
    CoverageError,
    KeplerSolverError,
    NonEllipticError,
    ShapeError,
    SingularityError,
)

__all__ = [
    "MU_SUN",
    "AU_KM",
    "StateVector",
    "KeplerElements",
    "KeplerEphemeris",
    "ChebyshevSegment",
    "ChebyshevEphemeris",
    "BodySpec",
    "EphemerisTable",
    "ForceModelConfig",
    "elements_to_state",
    "eval_two_body",
    "eval_nbody",
    "eval_force_block",
    "kepler_propagate",
    "kepler_propagate_many",
    "orbital_period",
    "build_ephemeris_cache",
    "fit_chebyshev_ephemeris",
    "states_to_array",
]

MU_SUN = 1.32712440018e11
AU_KM = 1.495978707e8
TWO_PI = 2.0 * math.pi
KEPLER_TOL = 1e-14
KEPLER_MAX_ITER = 50
ECC_LIMIT = 1.0 - 1e-8


@dataclass(frozen=True, eq=False)
class StateVector:
    epoch: float
    r: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        r = np.array(self.r, dtype=float).reshape(3)
        v = np.array(self.v, dtype=float).reshape(3)
        if not (np.isfinite(r).all() and np.isfinite(v).all() and math.isfinite(self.epoch)):
            raise ValueError("state components must be finite")
        object.__setattr__(self, "epoch", float(self.epoch))
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_array(cls, epoch: float, x) -> "StateVector":
        x = np.asarray(x, dtype=float)
        return cls(epoch, x[:3], x[3:6])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.r, self.v])

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return (
            self.epoch == other.epoch
            and np.array_equal(self.r, other.r)
            and np.array_equal(self.v, other.v)
        )


def states_to_array(states) -> tuple[np.ndarray, np.ndarray]:
    """Split a sequence of :class:`StateVector` into ``(epochs, X)`` with ``X`` of shape (M, 6)."""
    if isinstance(states, StateVector):
        states = [states]
    epochs = np.array([s.epoch for s in states], dtype=float)
    x = np.array([s.as_array() for s in states], dtype=float).reshape(len(states), 6)
    return epochs, x


# --------------------------------------------------------------------------
# conics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KeplerElements:
    """Classical elements; angles in radians, ``a`` in km."""

    a: float
    e: float
    i: float
    raan: float
    argp: float
    M0: float
    epoch: float


def _solve_kepler(mean_anomaly: np.ndarray, ecc: np.ndarray) -> np.ndarray:
    """Newton solution of ``E - e sin E = M`` to ``KEPLER_TOL`` on ``E``."""
    m = np.asarray(mean_anomaly, dtype=float)
    e = np.broadcast_to(np.asarray(ecc, dtype=float), m.shape)
    big_e = m + 0.85 * e * np.sign(np.sin(m))
    for _ in range(KEPLER_MAX_ITER):
        step = (big_e - e * np.sin(big_e) - m) / (1.0 - e * np.cos(big_e))
        big_e = big_e - step
        if np.all(np.abs(step) <= KEPLER_TOL):
            return big_e
    raise KeplerSolverError(
        f"Kepler equation did not converge in {KEPLER_MAX_ITER} iterations "
        f"(max step {np.max(np.abs(step)):.3e})"
    )


def elements_to_state(el: KeplerElements, mu: float, t: Optional[float] = None) -> StateVector:
    """Cartesian state of a bound conic at epoch ``t`` (defaults to the element epoch)."""
    if not (0.0 <= el.e < 1.0) or el.a <= 0:
        raise NonEllipticError(f"elements must describe an ellipse (a={el.a}, e={el.e})")
    t = el.epoch if t is None else float(t)
    n = math.sqrt(mu / el.a**3)
    mean = math.remainder(el.M0 + n * (t - el.epoch), TWO_PI)
    big_e = float(_solve_kepler(np.array(mean), np.array(el.e)))
    cos_e, sin_e = math.cos(big_e), math.sin(big_e)
    b = el.a * math.sqrt(1.0 - el.e**2)
    r_pf = np.array([el.a * (cos_e - el.e), b * sin_e, 0.0])
    rad = el.a * (1.0 - el.e * cos_e)
    edot = n * el.a / rad
    v_pf = np.array([-el.a * sin_e * edot, b * cos_e * edot, 0.0])
    cO, sO = math.cos(el.raan), math.sin(el.raan)
    cw, sw = math.cos(el.argp), math.sin(el.argp)
    ci, si = math.cos(el.i), math.sin(el.i)
    rot = np.array(
        [
            [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
            [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
            [sw * si, cw * si, ci],
        ]
    )
    return StateVector(t, rot @ r_pf, rot @ v_pf)


def orbital_period(state: Union[StateVector, np.ndarray], mu: float) -> float:
    """Osculating period; raises :class:`NonEllipticError` for unbound states."""
    x = state.as_array() if isinstance(state, StateVector) else np.asarray(state, dtype=float)
    r = math.sqrt(float(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]))
    v2 = float(x[3] * x[3] + x[4] * x[4] + x[5] * x[5])
    energy = 0.5 * v2 - mu / r
    if energy >= 0:
        raise NonEllipticError(f"specific energy {energy:.6e} >= 0: period undefined")
    a = -mu / (2.0 * energy)
    return TWO_PI * math.sqrt(a**3 / mu)


def kepler_propagate_many(x0: np.ndarray, mu: float, dt) -> np.ndarray:
    """Propagate states on their osculating conics.

    Parameters
    ----------
    x0 : (M, 6) or (6,) array
        Initial Cartesian states.
    mu : float
        Gravitational parameter of the attracting body.
    dt : array_like, shape (N,)
        Time offsets, shared by every state.

    Returns
    -------
    (N, M, 6) array (or (N, 6) when ``x0`` is one-dimensional).
    """
    x0 = np.asarray(x0, dtype=float)
    single = x0.ndim == 1
    x0 = np.atleast_2d(x0)
    dt = np.atleast_1d(np.asarray(dt, dtype=float))
    r0v, v0v = x0[:, :3], x0[:, 3:]
    r0 = np.sqrt(np.sum(r0v * r0v, axis=1))
    v2 = np.sum(v0v * v0v, axis=1)
    if np.any(r0 <= 0):
        raise SingularityError("zero position in conic propagation")
    inv_a = 2.0 / r0 - v2 / mu
    if np.any(inv_a <= 0):
        raise NonEllipticError("state is not elliptic (energy >= 0)")
    a = 1.0 / inv_a
    sqrt_mu = math.sqrt(mu)
    sqrt_a = np.sqrt(a)
    sigma0 = np.sum(r0v * v0v, axis=1) / sqrt_mu
    ec = 1.0 - r0 / a
    es = sigma0 / sqrt_a
    ecc = np.hypot(ec, es)
    if np.any(ecc >= ECC_LIMIT):
        raise NonEllipticError(f"eccentricity {ecc.max():.12f} too close to parabolic")
    n = sqrt_mu / (a * sqrt_a)

    e0 = np.arctan2(es, ec)
    m0 = e0 - ecc * np.sin(e0)
    mean = n[None, :] * dt[:, None]
    k = np.round(mean / TWO_PI)
    mean_red = mean - TWO_PI * k
    e1 = _solve_kepler(m0[None, :] + mean_red, np.broadcast_to(ecc, mean.shape))
    de = e1 - e0[None, :]
    cde, sde = np.cos(de), np.sin(de)

    r = a + (r0 - a) * cde + sigma0 * sqrt_a * sde
    f = 1.0 - a / r0 * (1.0 - cde)
    g = (mean_red - (de - sde)) / n
    fdot = -np.sqrt(mu * a) / (r * r0) * sde
    gdot = 1.0 - a / r * (1.0 - cde)
    pos = f[..., None] * r0v[None] + g[..., None] * v0v[None]
    vel = fdot[..., None] * r0v[None] + gdot[..., None] * v0v[None]
    out = np.concatenate([pos, vel], axis=-1)
    return out[:, 0, :] if single else out


def kepler_propagate(state: StateVector, mu: float, dt: float) -> StateVector:
    """Conic propagation of one state by ``dt`` seconds (eccentric anomaly + f and g)."""
    x = kepler_propagate_many(state.as_array(), mu, [dt])[0]
    return StateVector(state.epoch + dt, x[:3], x[3:])


# --------------------------------------------------------------------------
# ephemeris providers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KeplerEphemeris:
    """Analytic provider: body on a fixed conic about the central body."""

    elements: KeplerElements
    mu: float

    @cached_property
    def _reference(self) -> StateVector:
        return elements_to_state(self.elements, self.mu)

    def covers(self, t) -> bool:
        return True

    def state(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ref = self._reference
        return kepler_propagate_many(ref.as_array(), self.mu, t - ref.epoch)

    def position(self, t) -> np.ndarray:
        return self.state(t)[:, :3]


@dataclass(frozen=True, eq=False)
class ChebyshevSegment:
    t_start: float
    t_end: float
    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    coeffs_z: np.ndarray

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        mid = 0.5 * (self.t_end + self.t_start)
        half = 0.5 * (self.t_end - self.t_start)
        s = (np.asarray(t, dtype=float) - mid) / half
        return np.stack(
            [
                npcheb.chebval(s, self.coeffs_x),
                npcheb.chebval(s, self.coeffs_y),
                npcheb.chebval(s, self.coeffs_z),
            ],
            axis=-1,
        )


@dataclass(frozen=True, eq=False)
class ChebyshevEphemeris:
    """Tabulated provider: piecewise Chebyshev series in time."""

    segments: tuple

    def covers(self, t) -> bool:
        t = np.atleast_1d(t)
        return bool(np.all((t >= self.segments[0].t_start) & (t <= self.segments[-1].t_end)))

    def position(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, 3))
        starts = np.array([s.t_start for s in self.segments])
        lo, hi = self.segments[0].t_start, self.segments[-1].t_end
        bad = (t < lo) | (t > hi)
        if bad.any():
            epoch = float(t[np.argmax(bad)])
            raise CoverageError(f"epoch {epoch!r} outside table coverage [{lo}, {hi}]", epoch=epoch)
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1)
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = self.segments[k].evaluate(t[sel])
        return out


def fit_chebyshev_ephemeris(provider, t_start: float, t_end: float, n_segments: int = 8, degree: int = 24) -> ChebyshevEphemeris:
    """Tabulate any provider as piecewise Chebyshev interpolants."""
    edges = np.linspace(t_start, t_end, n_segments + 1)
    segs = []
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = npcheb.chebpts2(degree + 1)
        pos = provider.position(mid + half * nodes)
        coeffs = [npcheb.chebfit(nodes, pos[:, c], degree) for c in range(3)]
        segs.append(ChebyshevSegment(float(a), float(b), *coeffs))
    return ChebyshevEphemeris(tuple(segs))


@dataclass(frozen=True)
class BodySpec:
    name: str
    mu: float
    ephemeris: Union[KeplerEphemeris, ChebyshevEphemeris]

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"body {self.name!r}: mu must be positive")


@dataclass(frozen=True)
class ForceModelConfig:
    kind: str = "two_body"
    central_mu: float = MU_SUN
    bodies: tuple = ()
    proximity_floor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "bodies", tuple(self.bodies))
        if self.kind not in ("two_body", "n_body"):
            raise ValueError(f"unknown force model kind {self.kind!r}")
        if self.kind == "n_body" and not self.bodies:
            raise ValueError("n_body force model needs at least one perturbing body")
        if self.kind == "two_body" and self.bodies:
            raise ValueError("two_body force model takes no perturbing bodies")

    @property
    def active_bodies(self) -> tuple:
        return self.bodies if self.kind == "n_body" else ()


@dataclass(frozen=True, eq=False)
class EphemerisTable:
    """Body positions frozen at the nodes of one segment.

    ``positions`` has shape (n_bodies, N, 3); ``indirect`` holds the per-node
    ``r_i / |r_i|^3`` so it is not recomputed every Picard iteration.
    """

    node_times: np.ndarray
    central_mu: float
    body_mus: np.ndarray
    positions: np.ndarray
    indirect: np.ndarray
    names: tuple = ()
    proximity_floor: float = 1.0

    @property
    def n_bodies(self) -> int:
        return len(self.body_mus)


def build_ephemeris_cache(
    bodies: Sequence[BodySpec], grid, central_mu: float, proximity_floor: float = 1.0
) -> EphemerisTable:
    """Evaluate every body once per grid node and freeze the result."""
    times = np.asarray(grid.times if hasattr(grid, "times") else grid, dtype=float)
    n = times.size
    pos = np.empty((len(bodies), n, 3))
    for b, body in enumerate(bodies):
        pos[b] = body.ephemeris.position(times)
    indirect = np.empty_like(pos)
    for b in range(len(bodies)):
        rb = pos[b]
        rn = np.sqrt(rb[:, 0] * rb[:, 0] + rb[:, 1] * rb[:, 1] + rb[:, 2] * rb[:, 2])
        indirect[b] = rb / (rn * rn * rn)[:, None]
    for arr in (pos, indirect):
        arr.flags.writeable = False
    times = times.copy()
    times.flags.writeable = False
    mus = np.array([b.mu for b in bodies], dtype=float)
    mus.flags.writeable = False
    return EphemerisTable(
        times, float(central_mu), mus, pos, indirect, tuple(b.name for b in bodies), proximity_floor
    )


# --------------------------------------------------------------------------
# accelerations
# --------------------------------------------------------------------------


def eval_two_body(state, mu: float) -> np.ndarray:
    """Keplerian acceleration ``-mu r / |r|^3``."""
    r = state.r if isinstance(state, StateVector) else np.asarray(state, dtype=float)[:3]
    rn = math.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    if rn == 0.0:
        raise SingularityError("two-body acceleration undefined at r = 0")
    rn3 = rn * rn * rn
    return -mu * r / rn3


def eval_nbody(state, node_index: int, table: EphemerisTable) -> np.ndarray:
    """Restricted N-body acceleration of one state at one cached node.

    Written element-wise in the same operation order as :func:`eval_force_block`
    so the two agree bit for bit.
    """
    if isinstance(state, StateVector):
        r = state.r
        if state.epoch != table.node_times[node_index]:
            raise ValueError(
                f"state epoch {state.epoch} differs from node {node_index} epoch "
                f"{table.node_times[node_index]}"
            )
    else:
        r = np.asarray(state, dtype=float)[:3]
    acc = eval_two_body(r, table.central_mu)
    for b in range(table.n_bodies):
        rb = table.positions[b, node_index]
        d = rb - r
        dn = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
        if dn < table.proximity_floor:
            name = table.names[b] if table.names else str(b)
            raise CloseApproachError(
                f"close approach to {name}: {dn:.3f} km at node {node_index}",
                body=name,
                node=node_index,
            )
        dn3 = dn * dn * dn
        acc = acc + table.body_mus[b] * (d / dn3 - table.indirect[b, node_index])
    return acc


def _accel_rows(r: np.ndarray, table: Optional[EphemerisTable], central_mu: float, rows: slice) -> np.ndarray:
    """Acceleration for a component-major position slab ``r`` of shape (n, 3, M)."""
    x, y, z = r[:, 0], r[:, 1], r[:, 2]
    rn = np.sqrt(x * x + y * y + z * z)
    if np.any(rn == 0.0):
        j, m = np.argwhere(rn == 0.0)[0]
        raise SingularityError(
            f"zero position at node {rows.start + j}, trajectory {m}",
            node=int(rows.start + j),
            trajectory=int(m),
        )
    rn3 = rn * rn * rn
    acc = -central_mu * r / rn3[:, None, :]
    if table is None:
        return acc
    for b in range(table.n_bodies):
        rb = table.positions[b, rows][:, :, None]
        d = rb - r
        dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
        dn = np.sqrt(dx * dx + dy * dy + dz * dz)
        close = dn < table.proximity_floor
        if close.any():
            j, m = np.argwhere(close)[0]
            name = table.names[b] if table.names else str(b)
            raise CloseApproachError(
                f"close approach to {name}: {dn[j, m]:.3f} km at node {rows.start + j}, trajectory {m}",
                body=name,
                node=int(rows.start + j),
                trajectory=int(m),
            )
        dn3 = dn * dn * dn
        acc = acc + table.body_mus[b] * (d / dn3[:, None, :] - table.indirect[b, rows][:, :, None])
    return acc


def eval_force_block(block, grid, table: Optional[EphemerisTable], config: ForceModelConfig, workers: int = 1) -> np.ndarray:
    """First-order derivative ``omega2 * (v, a)`` for every (node, trajectory) of a block.

    ``block`` is a component-major ``N x 6M`` array (or anything with a
    ``data`` attribute holding one). ``workers > 1`` splits the node rows over
    a thread pool; each element is computed by the same operations either way,
    so the result does not depend on ``workers``.
    """
    data = np.asarray(getattr(block, "data", block), dtype=float)
    n, k = data.shape
    if k % 6:
        raise ShapeError(f"block column count {k} is not a multiple of 6")
    if n != grid.n_nodes:
        raise ShapeError(f"block has {n} rows, grid {grid.n_nodes}")
    m = k // 6
    if config.kind == "n_body":
        if table is None or table.node_times.shape[0] != n:
            raise ShapeError("ephemeris table is not aligned with the grid")
        tab = table
    else:
        tab = None
    y = data.reshape(n, 6, m)
    out = np.empty((n, 6, m))
    w2 = grid.omega2

    def work(rows: slice):
        out[rows, :3] = y[rows, 3:] * w2
        out[rows, 3:] = _accel_rows(y[rows, :3], tab, config.central_mu, rows) * w2

    if workers <= 1 or n < 2 * workers:
        work(slice(0, n))
    else:
        edges = np.linspace(0, n, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]))
    return out.reshape(n, k)
