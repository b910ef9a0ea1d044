"""Link-budget primitives: antenna pattern, received power, noise, SNR/SINR.

Everything is computed in linear units (watts, ratios). dB/dBm only appear
in the conversion helpers and in :func:`antenna_gain_db`.
"""

import math

import numpy as np

MAIN_LOBE_FACTOR = 2.6


def dbm_to_w(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def w_to_dbm(watts):
    return 10.0 * np.log10(watts) + 30.0


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(ratio):
    return 10.0 * np.log10(ratio)


def boresight_gain_db(theta_3db_deg):
    """Peak gain ``G_0`` in dB for a half-power beamwidth in degrees."""
    half = math.radians(theta_3db_deg) / 2.0
    return 10.0 * math.log10((1.6162 / math.sin(half)) ** 2)


def sidelobe_gain_db(theta_3db_deg):
    """Side-lobe gain ``G_sl`` in dB (natural log of the beamwidth in degrees)."""
    return -0.4111 * math.log(theta_3db_deg) - 10.579


def antenna_gain_db(theta_deg, theta_3db_deg):
    """Directional antenna gain of the 802.15.3c reference pattern.

    Parameters
    ----------
    theta_deg : float
        Off-boresight angle in degrees, within [0, 180].
    theta_3db_deg : float
        Half-power beamwidth in degrees.

    Returns
    -------
    float
        Gain in dB. The main-lobe branch covers ``theta <= 1.3 * theta_3db``
        inclusive; beyond it the constant side-lobe level applies.
    """
    if not 0.0 <= theta_deg <= 180.0:
        raise ValueError(f"angle must lie in [0, 180] degrees, got {theta_deg}")
    if theta_3db_deg <= 0.0:
        raise ValueError("half-power beamwidth must be positive")
    if theta_deg <= MAIN_LOBE_FACTOR * theta_3db_deg / 2.0:
        return boresight_gain_db(theta_3db_deg) - 3.01 * (2.0 * theta_deg / theta_3db_deg) ** 2
    return sidelobe_gain_db(theta_3db_deg)


def path_coefficient(wavelength_m):
    """Free-space constant ``(lambda / 4 pi)^2``."""
    return (wavelength_m / (4.0 * math.pi)) ** 2


def received_power_w(tx_power_w, tx_gain, rx_gain, distance_m, fading_power=1.0,
                     extra_loss=1.0, wavelength_m=5e-3, path_loss_exponent=2.0):
    """Received power in watts; gains and losses are linear, not dB.

    Works elementwise on arrays of distances / fading powers.
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("distance must be positive")
    if np.any(np.asarray(extra_loss) <= 0.0):
        raise ValueError("extra loss must be positive (linear, >= 1 for a loss)")
    power = (path_coefficient(wavelength_m) * fading_power * tx_gain * rx_gain
             * d ** (-path_loss_exponent) * tx_power_w / extra_loss)
    return float(power) if np.ndim(power) == 0 else power


def noise_power_w(alpha, bandwidth_hz, n0_dbm_per_mhz):
    """Thermal noise over the sub-band ``alpha * W``."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"bandwidth fraction must lie in (0, 1], got {alpha}")
    return dbm_to_w(n0_dbm_per_mhz) * alpha * bandwidth_hz / 1e6


def snr(rx_power_w, noise_w):
    if noise_w <= 0.0:
        raise ValueError("noise power must be positive")
    return rx_power_w / noise_w


def sinr_fd(rx_power_w, noise_w, beta, mr_tx_power_w):
    """SINR at a user served by a full-duplex relay.

    Residual self-interference ``beta * P_mr`` adds to the noise floor;
    ``beta = 0`` reduces to :func:`snr`.
    """
    if noise_w <= 0.0:
        raise ValueError("noise power must be positive")
    if beta < 0.0:
        raise ValueError("SI cancellation coefficient must be >= 0")
    return rx_power_w / (noise_w + beta * mr_tx_power_w)
