"""Phase-shift matrices, effective cascaded channels, SINR, rates, power.

Downlink: the base station transmits through the flying array, which both
relays toward the ground array (three-reflection path to each node) and
reflects directly down to the nodes (two-hop path).  Uplink mirrors the
chain by reciprocity and reuses the same SINR form with the uplink
effective rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet
from .scenario import ScenarioConfig

TWO_PI = 2.0 * math.pi


def canonical_phases(theta) -> np.ndarray:
    """Wrap angles into [0, 2*pi)."""
    th = np.asarray(theta, dtype=float) % TWO_PI
    # % can return 2*pi for tiny negative inputs via rounding; fold exactly.
    th[th >= TWO_PI] = 0.0
    return th


@dataclass
class PhaseConfig:
    """Per-element phase shifts for the flying (F) and ground (N) arrays."""

    theta_U: np.ndarray
    theta_R: np.ndarray

    def __post_init__(self):
        self.theta_U = canonical_phases(self.theta_U)
        self.theta_R = canonical_phases(self.theta_R)


@dataclass
class BeamMatrix:
    """Stacked per-node beamforming columns (M x K) with its direction tag."""

    W: np.ndarray
    direction: str = "dl"

    def power(self) -> float:
        return float(np.sum(np.abs(self.W) ** 2))


@dataclass
class RateReport:
    """Episode-level rate accounting for every node."""

    rates_dl: np.ndarray          # L x K per-slot downlink rates
    rates_ul: np.ndarray          # L x K per-slot uplink rates
    dl_weight: float
    avg_dl: np.ndarray = field(init=False)
    avg_ul: np.ndarray = field(init=False)
    avg_weighted: np.ndarray = field(init=False)
    total_rate: float = field(init=False)
    min_rate: float = field(init=False)

    def __post_init__(self):
        if self.rates_dl.ndim != 2 or self.rates_dl.shape[0] < 1:
            raise ValueError("need at least one accumulated slot")
        if self.rates_dl.shape != self.rates_ul.shape:
            raise ValueError("downlink/uplink rate shapes differ")
        self.avg_dl = self.rates_dl.mean(axis=0)
        self.avg_ul = self.rates_ul.mean(axis=0)
        self.avg_weighted = (self.dl_weight * self.avg_dl
                             + (1.0 - self.dl_weight) * self.avg_ul)
        self.total_rate = float(self.avg_weighted.sum())
        self.min_rate = float(self.avg_weighted.min())


def phase_matrix(theta) -> np.ndarray:
    """Diagonal reflection matrix diag(exp(j*theta))."""
    return np.diag(np.exp(1j * canonical_phases(theta)))


def effective_dl_channel(k: int, ch: ChannelSet, ph: PhaseConfig) -> np.ndarray:
    """Node k's downlink effective row (1 x M): cascade plus two-hop path."""
    Theta_U = np.exp(1j * ph.theta_U)
    Theta_R = np.exp(1j * ph.theta_R)
    # h_Rk Theta_R H_UR Theta_U H_BU, with the diagonals applied elementwise.
    via_ground = (ch.h_Rk[k] * Theta_R) @ ch.H_UR
    cascade = (via_ground * Theta_U) @ ch.H_BU
    direct = (ch.h_Uk[k] * Theta_U) @ ch.H_BU
    return ch.pathloss_cascade[k] * cascade + ch.pathloss_BUk[k] * direct


def effective_ul_channel(k: int, ch: ChannelSet, ph: PhaseConfig) -> np.ndarray:
    """Node k's uplink effective row (1 x M) via the reciprocal chain."""
    Theta_U = np.exp(1j * ph.theta_U)
    Theta_R = np.exp(1j * ph.theta_R)
    # H_UB Theta_U h_kU and H_UB Theta_U H_RU Theta_R h_kR, as M-vectors.
    direct = ch.H_UB @ (Theta_U * ch.h_kU(k))
    via_ground = ch.H_UB @ (Theta_U * (ch.H_RU @ (Theta_R * ch.h_kR(k))))
    return ch.pathloss_BUk[k] * direct + ch.pathloss_cascade[k] * via_ground


def effective_rows(ch: ChannelSet, ph: PhaseConfig, direction: str = "dl") -> np.ndarray:
    """All nodes' effective rows stacked K x M."""
    fn = effective_dl_channel if direction == "dl" else effective_ul_channel
    return np.stack([fn(k, ch, ph) for k in range(ch.K)])


def sinr(k: int, G: np.ndarray, W: BeamMatrix, sigma2: float) -> float:
    """|g_k w_k|^2 over interference from the other columns plus noise."""
    if sigma2 <= 0:
        raise ValueError(f"noise power must be > 0, got {sigma2}")
    g = G[k]
    signal_p = abs(g @ W.W[:, k]) ** 2
    interference = 0.0
    for j in range(W.W.shape[1]):
        if j != k:
            interference += abs(g @ W.W[:, j]) ** 2
    return float(signal_p / (interference + sigma2))


def rate(gamma: float) -> float:
    """Spectral efficiency log2(1 + gamma)."""
    if gamma < 0:
        raise ValueError(f"SINR must be >= 0, got {gamma}")
    return math.log2(1.0 + gamma)


def slot_rates(ch: ChannelSet, ph: PhaseConfig, W: BeamMatrix, sigma2: float,
               direction: str = "dl") -> np.ndarray:
    G = effective_rows(ch, ph, direction)
    return np.array([rate(sinr(k, G, W, sigma2)) for k in range(ch.K)])


def episode_rates(rates_dl, rates_ul, dl_weight: float) -> RateReport:
    """Aggregate per-slot rates into per-node averages and the min-rate."""
    return RateReport(rates_dl=np.asarray(rates_dl, dtype=float),
                      rates_ul=np.asarray(rates_ul, dtype=float),
                      dl_weight=float(dl_weight))


def project_power(W: BeamMatrix, P: float) -> BeamMatrix:
    """Scale all columns down if total power exceeds the budget P."""
    if P <= 0:
        raise ValueError(f"power budget must be > 0, got {P}")
    total = W.power()
    if total <= P:
        return W
    return BeamMatrix(W=W.W * math.sqrt(P / total), direction=W.direction)


def matched_solution(k_focus: int, ch: ChannelSet, cfg: ScenarioConfig):
    """Co-phasing phases plus a full-power matched-filter beam for one node.

    Two candidate phase sets are tried: one aligning the two-hop reflection
    terms first, one aligning the strongest ground-array cascade row first;
    the candidate with the larger effective-channel norm wins.  For a scalar
    network (K=F=N=M=1) this is the exact optimum.
    """
    b = ch.H_BU[:, 0]
    h_u = ch.h_Uk[k_focus]
    h_r = ch.h_Rk[k_focus]

    def theta_r_given(theta_u):
        c = ch.H_UR @ (np.exp(1j * theta_u) * b)
        return canonical_phases(-np.angle(h_r * c))

    # Candidate A: co-phase the two-hop (flying-array only) terms.
    theta_u_a = canonical_phases(-np.angle(h_u * b))
    cand_a = PhaseConfig(theta_u_a, theta_r_given(theta_u_a))

    # Candidate B: co-phase the dominant row of the ground-array cascade.
    n0 = int(np.argmax(np.abs(h_r)))
    theta_u_b = canonical_phases(-np.angle(ch.H_UR[n0] * b))
    cand_b = PhaseConfig(theta_u_b, theta_r_given(theta_u_b))

    best = None
    for cand in (cand_a, cand_b):
        g = effective_dl_channel(k_focus, ch, cand)
        score = float(np.linalg.norm(g))
        if best is None or score > best[0]:
            best = (score, cand, g)
    score, ph, g = best
    if score == 0.0:
        raise ValueError("degenerate zero channel; matched beam undefined")

    W = np.zeros((ch.M, ch.K), dtype=complex)
    W[:, k_focus] = math.sqrt(cfg.P_dl) * g.conj() / score
    return ph, BeamMatrix(W=W, direction="dl")
