"""Reference heliocentric system and synthetic batches used by tests and demos.

Planet elements are approximate ecliptic mean elements at J2000 (epoch 0 s);
they are good enough to give realistic perturbation sizes, not ephemeris
accuracy.
"""

from __future__ import annotations

import math

import numpy as np

from .dynamics import (
    AU_KM,
    MU_SUN,
    BodySpec,
    ForceModelConfig,
    KeplerElements,
    KeplerEphemeris,
    StateVector,
    elements_to_state,
    orbital_period,
)

MU_VENUS = 324858.592
MU_EARTH_MOON = 403503.2355

_deg = math.radians


def venus() -> BodySpec:
    el = KeplerElements(0.72333 * AU_KM, 0.00677, _deg(3.3947), _deg(76.68), _deg(54.85), _deg(50.45), 0.0)
    return BodySpec("venus", MU_VENUS, KeplerEphemeris(el, MU_SUN))


def earth() -> BodySpec:
    el = KeplerElements(1.00000261 * AU_KM, 0.01671, _deg(1e-5), 0.0, _deg(102.94), _deg(-2.48), 0.0)
    return BodySpec("earth", MU_EARTH_MOON, KeplerEphemeris(el, MU_SUN))


def reference_force_model() -> ForceModelConfig:
    """Sun plus Venus and Earth on analytic conics."""
    return ForceModelConfig("n_body", MU_SUN, (venus(), earth()))


def reference_state(e: float = 0.3) -> StateVector:
    """Venus-resonant-like heliocentric orbit; its 0.87-period arc passes ~0.09 AU from Venus."""
    el = KeplerElements(0.77 * AU_KM, e, _deg(3.0), _deg(76.68), _deg(20.0), _deg(90.0), 0.0)
    return elements_to_state(el, MU_SUN)


def reference_period(state: StateVector = None) -> float:
    return orbital_period(state or reference_state(), MU_SUN)


def synthetic_batch(
    n: int,
    seed: int = 0,
    pos_sigma: float = 1.0e4,
    vel_sigma: float = 1.0e-3,
    base: StateVector = None,
) -> list:
    """``n`` Gaussian-perturbed clones of ``base`` sharing its epoch (first one unperturbed)."""
    base = base or reference_state()
    rng = np.random.default_rng(seed)
    dx = np.hstack([rng.normal(0.0, pos_sigma, (n, 3)), rng.normal(0.0, vel_sigma, (n, 3))])
    dx[0] = 0.0
    x = base.as_array()[None, :] + dx
    return [StateVector.from_array(base.epoch, row) for row in x]
