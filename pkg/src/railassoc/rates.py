"""PHY rates, coalition utility and throughput metrics.

Users sharing a node are served by TDMA with equal time shares, so a user's
achieved throughput is its PHY rate divided by its coalition size, and a
coalition's utility (the mean PHY rate of its members) equals the total
throughput the node delivers.

Metric functions take either a :class:`~railassoc.game.Partition` or a plain
assignment vector (node index per user, MRs ``0..n-1`` and the BS ``n``).
"""

import math

import numpy as np

from . import channel


def compute_phy_rates(config, distances, fading_power, onboard, alpha):
    """Rate table of shape ``(N, n + 1)`` in bit/s, BS in the last column."""
    n = config.num_mrs
    w = config.total_bandwidth_hz
    gain = channel.db_to_linear(channel.boresight_gain_db(config.half_power_beamwidth_deg))
    common = dict(wavelength_m=config.carrier_wavelength_m,
                  path_loss_exponent=config.path_loss_exponent)
    p_bs = channel.dbm_to_w(config.bs_tx_power_dbm)
    p_mr = channel.dbm_to_w(config.mr_tx_power_dbm)

    rates = np.empty(np.shape(distances))
    loss = np.where(onboard, channel.db_to_linear(config.penetration_loss_db), 1.0)
    rx_bs = channel.received_power_w(p_bs, gain, gain, distances[:, n], fading_power[:, n],
                                     extra_loss=loss, **common)
    noise_bs = channel.noise_power_w(alpha[n], w, config.noise_psd_dbm_per_mhz)
    rates[:, n] = alpha[n] * w * np.log2(1.0 + channel.snr(rx_bs, noise_bs))

    for i in range(n):
        rx = channel.received_power_w(p_mr, gain, gain, distances[:, i], fading_power[:, i], **common)
        noise = channel.noise_power_w(alpha[i], w, config.noise_psd_dbm_per_mhz)
        if config.duplex_mode == "half":
            # access link gets half the time; the other half is the backhaul
            rates[:, i] = 0.5 * alpha[i] * w * np.log2(1.0 + channel.snr(rx, noise))
        else:
            sinr = channel.sinr_fd(rx, noise, config.si_cancellation, p_mr)
            rates[:, i] = alpha[i] * w * np.log2(1.0 + sinr)
    return rates


def phy_rate(scenario, user, node):
    """PHY rate of one link, recomputed from the scenario's geometry."""
    cfg = scenario.config
    n = cfg.num_mrs
    if not (0 <= user < cfg.num_users and 0 <= node <= n):
        raise IndexError(f"no link ({user}, {node})")
    g = channel.db_to_linear(channel.boresight_gain_db(cfg.half_power_beamwidth_deg))
    alpha = float(scenario.alpha[node])
    w = cfg.total_bandwidth_hz
    noise = channel.noise_power_w(alpha, w, cfg.noise_psd_dbm_per_mhz)
    d = float(scenario.distances[user, node])
    h = float(scenario.fading_power[user, node])
    if node == n:
        loss = channel.db_to_linear(cfg.penetration_loss_db) if scenario.onboard[user] else 1.0
        rx = channel.received_power_w(channel.dbm_to_w(cfg.bs_tx_power_dbm), g, g, d, h, loss,
                                      cfg.carrier_wavelength_m, cfg.path_loss_exponent)
        return alpha * w * math.log2(1.0 + channel.snr(rx, noise))
    p_mr = channel.dbm_to_w(cfg.mr_tx_power_dbm)
    rx = channel.received_power_w(p_mr, g, g, d, h, 1.0,
                                  cfg.carrier_wavelength_m, cfg.path_loss_exponent)
    if cfg.duplex_mode == "half":
        return alpha * w / 2.0 * math.log2(1.0 + channel.snr(rx, noise))
    return alpha * w * math.log2(1.0 + channel.sinr_fd(rx, noise, cfg.si_cancellation, p_mr))


def _assignment(partition, num_users=None):
    assign = np.asarray(getattr(partition, "assignment", partition), dtype=int)
    if num_users is not None and assign.shape != (num_users,):
        raise ValueError(f"partition covers {assign.size} users, rate table has {num_users}")
    if np.any(assign < 0):
        raise ValueError("partition leaves users unassigned")
    return assign


def coalition_utility(members, node, rates):
    """Mean PHY rate of ``members`` at ``node``; 0 for an empty coalition."""
    members = list(members)
    if not members:
        return 0.0
    return float(np.mean(rates[members, node]))


def coalition_utilities(partition, rates):
    """Utility of every coalition, shape ``(n + 1,)``."""
    assign = _assignment(partition, rates.shape[0])
    nodes = rates.shape[1]
    sums = np.bincount(assign, weights=rates[np.arange(assign.size), assign], minlength=nodes)
    counts = np.bincount(assign, minlength=nodes)
    return np.divide(sums, counts, out=np.zeros(nodes), where=counts > 0)


def total_utility(partition, rates):
    """Objective of the association problem: sum of coalition utilities."""
    return float(coalition_utilities(partition, rates).sum())


def achieved_throughputs(partition, rates):
    assign = _assignment(partition, rates.shape[0])
    counts = np.bincount(assign, minlength=rates.shape[1])
    return rates[np.arange(assign.size), assign] / counts[assign]


def achieved_user_throughput(user, partition, rates):
    assign = _assignment(partition, rates.shape[0])
    node = assign[user]
    return float(rates[user, node] / np.count_nonzero(assign == node))


def system_average_throughput(partition, rates):
    """Mean achieved throughput per user, bit/s."""
    return total_utility(partition, rates) / rates.shape[0]


def per_class_throughput(partition, rates):
    """Mean achieved throughput of BS users and of MR users.

    A class with no members is reported as ``None``.
    """
    assign = _assignment(partition, rates.shape[0])
    bs = rates.shape[1] - 1
    achieved = achieved_throughputs(assign, rates)
    on_bs = assign == bs
    bs_mean = float(achieved[on_bs].mean()) if on_bs.any() else None
    mr_mean = float(achieved[~on_bs].mean()) if (~on_bs).any() else None
    return bs_mean, mr_mean
