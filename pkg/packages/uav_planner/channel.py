"""
mmWave channel model: path loss, received power, fading and throughput.

The link budget follows a log-distance LoS path-loss law. Hot-path math runs
in linear units through ``LinkBudget``, which converts the dB/dBm parameters
once when a scenario is loaded.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

ArrayLike = Union[float, np.ndarray]


class ChannelParams(BaseModel):
    """Link-budget parameters of the UAV-user channel.

    Defaults for the carrier and path-loss law follow the 73 GHz LoS model.
    Noise power, bandwidth and antenna gains are not fixed by that model and
    are simulator defaults.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    carrier_ghz: float = Field(default=73.0, gt=0, description="Carrier frequency")
    alpha: float = Field(default=69.8, description="Path-loss intercept, dB")
    beta: float = Field(default=2.0, gt=0, description="Path-loss exponent")
    tx_power_dbm: float = Field(default=30.0, description="Transmit power, dBm")
    tx_gain_db: float = Field(default=0.0, description="Transmit antenna gain, dB")
    rx_gain_db: float = Field(default=0.0, description="Receive antenna gain, dB")
    noise_power_dbm: float = Field(default=-85.0, description="Noise power, dBm")
    bandwidth_hz: float = Field(default=100e6, gt=0, description="Channel bandwidth")
    rician_k: float = Field(default=2.0, ge=0, description="LoS Rician factor")

    def budget(self) -> "LinkBudget":
        """Linear-unit constants for the hot path."""
        power_at_1m_dbm = self.tx_power_dbm + self.tx_gain_db + self.rx_gain_db - self.alpha
        return LinkBudget(
            power_at_1m_w=dbm_to_watts(power_at_1m_dbm),
            noise_w=dbm_to_watts(self.noise_power_dbm),
            beta=self.beta,
            bandwidth_hz=self.bandwidth_hz,
        )


@dataclass(frozen=True)
class LinkBudget:
    """Received power at 1 m and noise power in watts, plus β and B_w."""

    power_at_1m_w: float
    noise_w: float
    beta: float
    bandwidth_hz: float


def dbm_to_watts(p_dbm: ArrayLike) -> ArrayLike:
    """Convert dBm to watts."""
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0) if isinstance(
        p_dbm, np.ndarray
    ) else 10.0 ** ((p_dbm - 30.0) / 10.0)


def _check_distance(d: ArrayLike) -> None:
    if np.any(np.asarray(d) <= 0):
        raise ValueError("link distance must be positive")


def path_loss_db(d: ArrayLike, params: ChannelParams) -> ArrayLike:
    """Path loss PL(d) = α + 10·β·log10(d), dB."""
    _check_distance(d)
    return params.alpha + 10.0 * params.beta * np.log10(d)


def received_power_dbm(d: ArrayLike, params: ChannelParams) -> ArrayLike:
    """Received power: transmit power plus both antenna gains minus path loss, dBm."""
    return (
        params.tx_power_dbm
        + params.tx_gain_db
        + params.rx_gain_db
        - path_loss_db(d, params)
    )


def sample_gain_sq(
    is_los: bool,
    rician_k: float,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> ArrayLike:
    """
    Draw the squared small-scale fading envelope |g|^2 with unit mean power.

    LoS links draw from a Rician law with factor ``rician_k``; NLoS links draw
    from a Rayleigh law, i.e. the Rician law with K = 0, so both cases consume
    the random stream identically.

    Args:
        is_los: Whether the link is line of sight
        rician_k: Rician K factor (ignored for NLoS)
        rng: Random source
        size: Number of draws; a scalar is returned when omitted

    Returns:
        One draw or an array of draws of |g|^2
    """
    if rician_k < 0:
        raise ValueError(f"rician_k must be non-negative, got {rician_k}")
    k = rician_k if is_los else 0.0
    mean = np.sqrt(k / (k + 1.0))
    sigma = np.sqrt(1.0 / (2.0 * (k + 1.0)))
    real = rng.normal(mean, sigma, size)
    imag = rng.normal(0.0, sigma, size)
    gain = real * real + imag * imag
    return float(gain) if size is None else gain


def throughput_from_budget(d: ArrayLike, gain_sq: ArrayLike, budget: LinkBudget) -> ArrayLike:
    """Shannon throughput using precomputed linear constants."""
    received_w = budget.power_at_1m_w * np.power(d, -budget.beta)
    return budget.bandwidth_hz * np.log2(1.0 + received_w * gain_sq / budget.noise_w)


def throughput_bps(d: ArrayLike, gain_sq: ArrayLike, params: ChannelParams) -> ArrayLike:
    """
    Instantaneous throughput of a link, bits per second.

    Args:
        d: UAV-user distance, meters (> 0)
        gain_sq: Squared fading envelope |g|^2 (>= 0)
        params: Channel parameters

    Returns:
        bandwidth * log2(1 + SNR) in bits per second
    """
    _check_distance(d)
    if np.any(np.asarray(gain_sq) < 0):
        raise ValueError("gain_sq must be non-negative")
    received_w = dbm_to_watts(received_power_dbm(d, params))
    noise_w = dbm_to_watts(params.noise_power_dbm)
    return params.bandwidth_hz * np.log2(1.0 + received_w * gain_sq / noise_w)
