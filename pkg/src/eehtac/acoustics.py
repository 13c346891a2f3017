"""Acoustic link energy and delay model.

First-order radio model with Thorp absorption:

    E_tx(b, d) = b * e_elec + b * amp * d**k * a(f)**(d / 1000)

where a(f) is the Thorp absorption converted from dB/km to a linear ratio
per km.
"""

from __future__ import annotations

from dataclasses import dataclass

SOUND_SPEED = 1500.0  # m/s


def thorp_db_per_km(f_khz: float) -> float:
    f2 = f_khz * f_khz
    return 0.11 * f2 / (1 + f2) + 44 * f2 / (4100 + f2) + 2.75e-4 * f2 + 0.003


def absorption_ratio_per_km(f_khz: float) -> float:
    return 10 ** (thorp_db_per_km(f_khz) / 10)


def amp_for_target(target_j: float, bits: int, distance: float, e_elec: float,
                   f_khz: float, spreading: float) -> float:
    """Amplifier coefficient that makes one ``bits``-long send at ``distance`` cost ``target_j``."""
    rest = target_j - bits * e_elec
    if rest <= 0:
        raise ValueError("electronics cost alone exceeds the target")
    a = absorption_ratio_per_km(f_khz)
    return rest / (bits * distance ** spreading * a ** (distance / 1000))


@dataclass(frozen=True)
class EnergyModel:
    e_elec: float = 50e-9  # J/bit, tx and rx electronics
    amp: float = 3.909e-10  # J/bit/m^k; 500 B at 60 m ~ 1 mJ
    spreading: float = 1.5
    carrier_khz: float = 27.0
    e_rx: float = 50e-9
    e_fuse: float = 5e-9
    e_idle: float = 1e-7  # J per round

    def __post_init__(self):
        for name in ("e_elec", "amp", "spreading", "carrier_khz", "e_rx", "e_fuse", "e_idle"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def absorption_db_per_km(self) -> float:
        return thorp_db_per_km(self.carrier_khz)

    @property
    def absorption_ratio(self) -> float:
        return absorption_ratio_per_km(self.carrier_khz)

    def tx_energy(self, bits: int, distance: float) -> float:
        if bits < 1:
            raise ValueError("bits must be >= 1")
        if distance < 0:
            raise ValueError("distance must be >= 0")
        path = distance ** self.spreading * self.absorption_ratio ** (distance / 1000.0)
        return bits * self.e_elec + bits * self.amp * path

    def rx_energy(self, bits: int) -> float:
        return bits * self.e_rx

    def fuse_energy(self, bits: int) -> float:
        return bits * self.e_fuse


def tx_energy(bits: int, distance: float, model: EnergyModel) -> float:
    return model.tx_energy(bits, distance)


def propagation_delay(distance: float, speed: float = SOUND_SPEED) -> float:
    if distance < 0:
        raise ValueError("distance must be >= 0")
    return distance / speed


def transmission_time(bits: int, data_rate: float) -> float:
    return bits / data_rate
