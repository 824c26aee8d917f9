"""Exhaustive grid search over phases and beam power splits.

Ground truth for the max-min-rate problem at desk scale.  All channel
cascades and SINRs here are evaluated with plain scalar loops, independent
of the vectorized implementations they are used to check.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, realize_channels, slot_rng
from .scenario import ScenarioConfig
from .signal_model import BeamMatrix, PhaseConfig

COMBO_GUARD = 10_000_000


def _effective_row_scalar(ch: ChannelSet, theta_u, theta_r, k: int):
    """Node k's downlink effective row by explicit triple loops."""
    F, M, N = ch.F, ch.M, ch.N
    eu = [cmath.exp(1j * t) for t in theta_u]
    er = [cmath.exp(1j * t) for t in theta_r]
    row = []
    for m in range(M):
        casc = 0j
        for n in range(N):
            for f in range(F):
                casc += (ch.h_Rk[k, n] * er[n] * ch.H_UR[n, f]
                         * eu[f] * ch.H_BU[f, m])
        direct = 0j
        for f in range(F):
            direct += ch.h_Uk[k, f] * eu[f] * ch.H_BU[f, m]
        row.append(ch.pathloss_cascade[k] * casc + ch.pathloss_BUk[k] * direct)
    return row


def _min_rate_scalar(ch: ChannelSet, theta_u, theta_r, W, sigma2: float) -> float:
    """Min over nodes of log2(1 + SINR), all arithmetic scalar."""
    K, M = ch.K, ch.M
    rows = [_effective_row_scalar(ch, theta_u, theta_r, k) for k in range(K)]
    worst = math.inf
    for k in range(K):
        sig_amp = sum(rows[k][m] * W[m][k] for m in range(M))
        interf = 0.0
        for j in range(K):
            if j != k:
                amp = sum(rows[k][m] * W[m][j] for m in range(M))
                interf += abs(amp) ** 2
        gamma = abs(sig_amp) ** 2 / (interf + sigma2)
        worst = min(worst, math.log2(1.0 + gamma))
    return worst


def _matched_split_beam(ch, theta_u, theta_r, split, P):
    """Per-node matched-filter columns carrying the given power split."""
    K, M = ch.K, ch.M
    W = [[0j] * K for _ in range(M)]
    for k in range(K):
        if split[k] == 0.0:
            continue
        row = _effective_row_scalar(ch, theta_u, theta_r, k)
        norm = math.sqrt(sum(abs(v) ** 2 for v in row))
        if norm == 0.0:
            continue
        scale = math.sqrt(split[k] * P) / norm
        for m in range(M):
            W[m][k] = row[m].conjugate() * scale
    return W


def power_splits(K: int, beam_grid: int):
    """All fractions (m_1/g, ..., m_K/g) with nonnegative m summing to g."""
    if K == 1:
        return [(1.0,)]
    splits = []
    for combo in itertools.product(range(beam_grid + 1), repeat=K - 1):
        rest = beam_grid - sum(combo)
        if rest >= 0:
            splits.append(tuple(c / beam_grid for c in combo) + (rest / beam_grid,))
    return splits


def default_channels(cfg: ScenarioConfig) -> ChannelSet:
    """The frozen slot-0 channel draw the environment would produce."""
    return realize_channels(cfg, cfg.uav_start, slot_rng(cfg.seed, cfg.seed, 0))


@dataclass
class OracleResult:
    phases: PhaseConfig
    beam: BeamMatrix
    min_rate: float
    combos: int


def _grid_angles(levels: int):
    return [2.0 * math.pi * i / levels for i in range(levels)]


def _search(cfg, ch, candidate_sets, beam_grid) -> OracleResult:
    """Enumerate per-element phase candidates x power splits; keep the best."""
    n_phase = 1
    for cands in candidate_sets:
        n_phase *= len(cands)
    splits = power_splits(ch.K, beam_grid)
    combos = n_phase * len(splits)
    if combos > COMBO_GUARD:
        raise ValueError(
            f"combination guard exceeded: {combos} > {COMBO_GUARD}")

    F = ch.F
    best = None
    for phases in itertools.product(*candidate_sets):
        theta_u = phases[:F]
        theta_r = phases[F:]
        for split in splits:
            W = _matched_split_beam(ch, theta_u, theta_r, split, cfg.P_dl)
            value = _min_rate_scalar(ch, theta_u, theta_r, W, cfg.sigma2)
            if best is None or value > best[0]:
                best = (value, theta_u, theta_r, W)

    value, theta_u, theta_r, W = best
    # Re-evaluate the winner to confirm the recorded value is reproducible.
    check = _min_rate_scalar(ch, theta_u, theta_r, W, cfg.sigma2)
    assert check == value
    return OracleResult(
        phases=PhaseConfig(np.array(theta_u), np.array(theta_r)),
        beam=BeamMatrix(W=np.array(W, dtype=complex), direction="dl"),
        min_rate=value, combos=combos)


def oracle_exhaustive(cfg: ScenarioConfig, phase_levels: int,
                      beam_grid: int = 1, ch: ChannelSet | None = None) -> OracleResult:
    """Exact maximizer of the slot min-rate over the quantized grid."""
    if ch is None:
        ch = default_channels(cfg)
    angles = _grid_angles(phase_levels)
    candidate_sets = [angles] * (ch.F + ch.N)
    return _search(cfg, ch, candidate_sets, beam_grid)


def oracle_refine(cfg: ScenarioConfig, base: PhaseConfig, coarse_levels: int,
                  fine_levels: int, beam_grid: int = 1,
                  ch: ChannelSet | None = None) -> OracleResult:
    """Search the fine grid restricted to one coarse cell around `base`.

    With fine_levels a multiple of coarse_levels the restricted grid contains
    the base point, so the refined value never falls below the coarse one.
    """
    if fine_levels % coarse_levels != 0:
        raise ValueError("fine_levels must be a multiple of coarse_levels")
    if ch is None:
        ch = default_channels(cfg)

    step = 2.0 * math.pi / fine_levels
    halo = fine_levels // coarse_levels
    base_all = np.concatenate([base.theta_U, base.theta_R])
    candidate_sets = []
    for theta in base_all:
        center = round(theta / step)
        cands = [((center + off) % fine_levels) * step
                 for off in range(-halo, halo + 1)]
        candidate_sets.append(sorted(set(cands)))
    return _search(cfg, ch, candidate_sets, beam_grid)


def evaluate_phases(cfg: ScenarioConfig, ch: ChannelSet, phases: PhaseConfig,
                    beam_grid: int = 1) -> OracleResult:
    """Best power split at a fixed phase configuration."""
    candidate_sets = [[float(t)]
                      for t in np.concatenate([phases.theta_U, phases.theta_R])]
    return _search(cfg, ch, candidate_sets, beam_grid)


def evaluate_point(cfg: ScenarioConfig, ch: ChannelSet, phases: PhaseConfig,
                   W: np.ndarray) -> float:
    """Scalar-loop min-rate of an arbitrary (phases, beam) point."""
    Wl = [[W[m, k] for k in range(W.shape[1])] for m in range(W.shape[0])]
    return _min_rate_scalar(ch, list(phases.theta_U), list(phases.theta_R),
                            Wl, cfg.sigma2)


def snap_phases(phases: PhaseConfig, levels: int) -> PhaseConfig:
    """Round each phase to the nearest grid angle."""
    step = 2.0 * math.pi / levels
    snap = lambda th: (np.round(np.asarray(th) / step) % levels) * step
    return PhaseConfig(snap(phases.theta_U), snap(phases.theta_R))
