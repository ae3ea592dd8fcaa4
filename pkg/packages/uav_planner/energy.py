"""
Rotary-wing propulsion model and relocation energy.

Default parameters are those of the standard rotary-wing reference craft
(blade profile power 79.86 W, induced power 88.63 W, tip speed 120 m/s).
"""

import logging
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import minimize_scalar

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class EnergyParams(BaseModel):
    """Propulsion-power coefficients of a rotary-wing UAV."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    p0: float = Field(default=79.86, gt=0, description="Blade profile power P_0, W")
    pi: float = Field(default=88.63, gt=0, description="Induced power P_i, W")
    u_tip: float = Field(default=120.0, gt=0, description="Rotor blade tip speed, m/s")
    v0: float = Field(default=4.03, gt=0, description="Mean rotor induced velocity, m/s")
    d0: float = Field(default=0.6, gt=0, description="Fuselage drag ratio")
    rho: float = Field(default=1.225, gt=0, description="Air density, kg/m^3")
    solidity: float = Field(default=0.05, gt=0, description="Rotor solidity")
    rotor_area: float = Field(default=0.503, gt=0, description="Rotor disc area, m^2")


def propulsion_power(v: ArrayLike, p: EnergyParams) -> ArrayLike:
    """
    Propulsion power of forward flight at speed v.

    Args:
        v: Flying speed, m/s (> 0)
        p: Propulsion coefficients

    Returns:
        P_0(1 + 3v^2/U_tip^2) + P_i v_0 / v + d_0 rho s A v^3 / 2, watts
    """
    if np.any(np.asarray(v) <= 0):
        raise ValueError("flying speed must be positive")
    blade_profile = p.p0 * (1.0 + 3.0 * v**2 / p.u_tip**2)
    induced = p.pi * p.v0 / v
    parasite = 0.5 * p.d0 * p.rho * p.solidity * p.rotor_area * v**3
    return blade_profile + induced + parasite


def relocation_cost(distance: ArrayLike, v: ArrayLike, p: EnergyParams) -> ArrayLike:
    """Energy in joules to fly ``distance`` meters at speed ``v``."""
    if np.any(np.asarray(distance) < 0):
        raise ValueError("relocation distance must be non-negative")
    return propulsion_power(v, p) * distance / v


def optimal_cruise_speed(p: EnergyParams, tol: float = 1e-6) -> float:
    """
    Speed minimizing energy per meter, P(v)/v, by golden-section search.

    Args:
        p: Propulsion coefficients
        tol: Absolute tolerance on the speed, m/s

    Returns:
        Energy-optimal cruise speed, m/s
    """
    result = minimize_scalar(
        lambda v: propulsion_power(v, p) / v,
        bracket=(1.0, 10.0, 100.0),
        method="golden",
        options={"xtol": tol},
    )
    speed = float(result.x)
    logger.debug("Energy-optimal cruise speed %.4f m/s", speed)
    return speed
