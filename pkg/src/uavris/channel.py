"""Per-slot complex channel realization.

Every link mixes a deterministic geometric line-of-sight part with a fresh
circularly-symmetric Gaussian scatter part through a per-link Rician factor.
UAV-borne links additionally see a random angular perturbation drawn from a
disc of configurable radius before the steering phases are formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import LinkAngles, Position3, ScenarioConfig, link_angles, link_distance


@dataclass(frozen=True)
class JitterDraw:
    """One angular perturbation (radians), guaranteed inside its disc."""

    d_azimuth: float
    d_elevation: float


@dataclass
class ChannelSet:
    """One slot's channels for every link plus distance-loss amplitudes.

    Shapes: H_BU is F x M (base station to flying array), H_UR is N x F
    (flying array to ground array), h_Rk is K x N and h_Uk is K x F (one row
    per node).  Uplink counterparts are the Hermitian transposes.
    """

    H_BU: np.ndarray
    H_UR: np.ndarray
    h_Rk: np.ndarray
    h_Uk: np.ndarray
    pathloss_cascade: np.ndarray      # amplitude of the B-U-R-k product path, per node
    pathloss_BUk: np.ndarray          # amplitude of the B-U-k product path, per node
    pathloss_direct_Rk: np.ndarray    # R-k one-hop amplitude, per node
    pathloss_direct_Uk: np.ndarray    # U-k one-hop amplitude, per node

    @property
    def K(self) -> int:
        return self.h_Rk.shape[0]

    @property
    def F(self) -> int:
        return self.H_BU.shape[0]

    @property
    def M(self) -> int:
        return self.H_BU.shape[1]

    @property
    def N(self) -> int:
        return self.H_UR.shape[0]

    # Uplink mirrors by reciprocity.
    @property
    def H_UB(self) -> np.ndarray:
        return self.H_BU.conj().T

    @property
    def H_RU(self) -> np.ndarray:
        return self.H_UR.conj().T

    def h_kR(self, k: int) -> np.ndarray:
        return self.h_Rk[k].conj()

    def h_kU(self, k: int) -> np.ndarray:
        return self.h_Uk[k].conj()


def steering_vector(n: int, spacing_ratio: float, dir_cos: float) -> np.ndarray:
    """Unit-modulus phase progression exp(-j*2*pi*ratio*m*dir_cos), m=0..n-1."""
    if n < 1:
        raise ValueError(f"element count must be >= 1, got {n}")
    if abs(dir_cos) > 1.0:
        raise ValueError(f"direction cosine out of range: {dir_cos}")
    m = np.arange(n)
    return np.exp(-2j * np.pi * spacing_ratio * m * dir_cos)


def ura_vector(dims, spacing_ratio: float, angles: LinkAngles) -> np.ndarray:
    """Rectangular-array response: kron of the two axis steering vectors."""
    a1 = steering_vector(dims[0], spacing_ratio, angles.dir_cos_x())
    a2 = steering_vector(dims[1], spacing_ratio, angles.dir_cos_z())
    return np.kron(a1, a2)


def los_matrix(angles: LinkAngles, rows_dims, cols_dims,
               spacing_ratio: float) -> np.ndarray:
    """Rank-1 line-of-sight matrix: outer product of the two array responses.

    Both responses are evaluated at the same link direction; `rows_dims` and
    `cols_dims` are (n1, n2) rectangular layouts (use (m, 1) for a line
    array).
    """
    a_r = ura_vector(rows_dims, spacing_ratio, angles)
    a_c = ura_vector(cols_dims, spacing_ratio, angles)
    return np.outer(a_r, a_c)


def sample_nlos(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """I.i.d. unit-power complex Gaussian scatter matrix."""
    g = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    return g / math.sqrt(2.0)


def mix_rician(zeta: float, los: np.ndarray, nlos: np.ndarray) -> np.ndarray:
    """Blend LoS and scatter parts with power ratio zeta (zeta=inf: pure LoS)."""
    if zeta < 0:
        raise ValueError(f"Rician factor must be >= 0, got {zeta}")
    if los.shape != nlos.shape:
        raise ValueError(f"shape mismatch: {los.shape} vs {nlos.shape}")
    if math.isinf(zeta):
        return los.copy()
    w_los = math.sqrt(zeta / (1.0 + zeta))
    w_nlos = math.sqrt(1.0 / (1.0 + zeta))
    return w_los * los + w_nlos * nlos


def sample_jitter(rng: np.random.Generator, psi: float) -> JitterDraw:
    """Uniform draw from the disc of radius psi in (azimuth, elevation) space.

    The paper-level model only bounds the perturbation norm; uniform on the
    disc is the maximum-entropy law over that support.
    """
    if psi < 0:
        raise ValueError(f"jitter bound must be >= 0, got {psi}")
    # Unit draws happen even for psi=0 so the stream stays aligned across
    # jitter settings; paired-seed sweeps then differ only in the bound.
    r = psi * math.sqrt(rng.uniform())
    phi = rng.uniform(0.0, 2.0 * math.pi)
    return JitterDraw(r * math.cos(phi), r * math.sin(phi))


def perturb_angles(angles: LinkAngles, draw: JitterDraw) -> LinkAngles:
    return LinkAngles(angles.azimuth + draw.d_azimuth,
                      angles.elevation + draw.d_elevation)


def cascaded_pathloss(beta_ref: float, alpha: float, *distances: float) -> float:
    """Amplitude of a multi-hop product path: sqrt(beta * (prod d_i)^-alpha)."""
    prod = 1.0
    for d in distances:
        if d <= 0:
            raise ValueError(f"nonpositive hop distance {d}")
        prod *= d
    return math.sqrt(beta_ref * prod ** (-alpha))


def direct_pathloss(beta_ref: float, eps: float, d: float) -> float:
    """Amplitude of a one-hop path: sqrt(beta) * d^(-eps/2), power law d^-eps."""
    if d <= 0:
        raise ValueError(f"nonpositive distance {d}")
    return math.sqrt(beta_ref) * d ** (-eps / 2.0)


def slot_rng(seed: int, episode_seed: int, slot: int) -> np.random.Generator:
    """Generator for one slot; the episode is a pure function of these keys."""
    root = np.random.SeedSequence(
        entropy=int(seed) % (1 << 63),
        spawn_key=(int(episode_seed) % (1 << 63), int(slot)),
    )
    return np.random.default_rng(root)


def realize_channels(cfg: ScenarioConfig, uav_pos: Position3,
                     rng: np.random.Generator) -> ChannelSet:
    """Draw one slot's full ChannelSet at the given UAV position.

    Draw order is fixed (jitters for BU, UR, then Uk per node; then scatter
    matrices for H_BU, H_UR, h_Rk rows, h_Uk rows) so a given generator state
    always yields the same realization.
    """
    F_dims = (cfg.F1, cfg.F2)
    N_dims = (cfg.N1, cfg.N2)
    ratio = cfg.spacing_ratio

    ang_BU = link_angles(cfg.bs_pos, uav_pos)
    ang_UR = link_angles(uav_pos, cfg.ris_pos)
    ang_Uk = [link_angles(uav_pos, p) for p in cfg.node_pos]
    ang_Rk = [link_angles(cfg.ris_pos, p) for p in cfg.node_pos]

    # UR jitter bound optionally tracks the current estimated azimuth.
    psi_UR = cfg.jitter_psi["UR"]
    if cfg.jitter_ratio > 0.0:
        psi_UR = cfg.jitter_ratio * abs(ang_UR.azimuth)

    ang_BU = perturb_angles(ang_BU, sample_jitter(rng, cfg.jitter_psi["BU"]))
    ang_UR = perturb_angles(ang_UR, sample_jitter(rng, psi_UR))
    ang_Uk = [perturb_angles(a, sample_jitter(rng, cfg.jitter_psi["Uk"]))
              for a in ang_Uk]

    los_BU = los_matrix(ang_BU, F_dims, (cfg.M, 1), ratio)
    los_UR = los_matrix(ang_UR, N_dims, F_dims, ratio)
    los_Rk = np.stack([ura_vector(N_dims, ratio, a) for a in ang_Rk])
    los_Uk = np.stack([ura_vector(F_dims, ratio, a) for a in ang_Uk])

    H_BU = mix_rician(cfg.rician["BU"], los_BU,
                      sample_nlos(rng, cfg.F, cfg.M))
    H_UR = mix_rician(cfg.rician["UR"], los_UR,
                      sample_nlos(rng, cfg.N, cfg.F))
    h_Rk = mix_rician(cfg.rician["Rk"], los_Rk,
                      sample_nlos(rng, cfg.K, cfg.N))
    h_Uk = mix_rician(cfg.rician["Uk"], los_Uk,
                      sample_nlos(rng, cfg.K, cfg.F))

    d_BU = link_distance(cfg.bs_pos, uav_pos)
    d_UR = link_distance(uav_pos, cfg.ris_pos)
    d_Rk = np.array([link_distance(cfg.ris_pos, p) for p in cfg.node_pos])
    d_Uk = np.array([link_distance(uav_pos, p) for p in cfg.node_pos])

    cascade = np.array([
        cascaded_pathloss(cfg.beta_ref, cfg.alpha_cascade, d_BU, d_UR, dk)
        for dk in d_Rk])
    two_hop = np.array([
        cascaded_pathloss(cfg.beta_ref, cfg.alpha_cascade, d_BU, dk)
        for dk in d_Uk])
    direct_Rk = np.array([direct_pathloss(cfg.beta_ref, cfg.eps_direct, dk)
                          for dk in d_Rk])
    direct_Uk = np.array([direct_pathloss(cfg.beta_ref, cfg.eps_direct, dk)
                          for dk in d_Uk])

    return ChannelSet(H_BU=H_BU, H_UR=H_UR, h_Rk=h_Rk, h_Uk=h_Uk,
                      pathloss_cascade=cascade, pathloss_BUk=two_hop,
                      pathloss_direct_Rk=direct_Rk, pathloss_direct_Uk=direct_Uk)


def csi_length(cfg: ScenarioConfig) -> int:
    """Flattened CSI length: interleaved re/im of all matrices plus 4K losses."""
    F, M, N, K = cfg.F, cfg.M, cfg.N, cfg.K
    return 2 * (F * M + N * F + K * N + K * F) + 4 * K


def flatten_csi(ch: ChannelSet) -> np.ndarray:
    """Serialize a ChannelSet row-major with interleaved real/imag parts."""
    parts = []
    for mat in (ch.H_BU, ch.H_UR, ch.h_Rk, ch.h_Uk):
        flat = mat.reshape(-1)
        inter = np.empty(2 * flat.size)
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        parts.append(inter)
    parts.extend([ch.pathloss_cascade, ch.pathloss_BUk,
                  ch.pathloss_direct_Rk, ch.pathloss_direct_Uk])
    return np.concatenate(parts)


def unflatten_csi(vec: np.ndarray, cfg: ScenarioConfig) -> ChannelSet:
    """Inverse of flatten_csi for the dimensions in `cfg`."""
    vec = np.asarray(vec, dtype=float)
    if vec.size != csi_length(cfg):
        raise ValueError(f"csi length {vec.size}, expected {csi_length(cfg)}")
    F, M, N, K = cfg.F, cfg.M, cfg.N, cfg.K
    mats = []
    ofs = 0
    for rows, cols in ((F, M), (N, F), (K, N), (K, F)):
        n = rows * cols
        inter = vec[ofs:ofs + 2 * n]
        mats.append((inter[0::2] + 1j * inter[1::2]).reshape(rows, cols))
        ofs += 2 * n
    losses = []
    for _ in range(4):
        losses.append(vec[ofs:ofs + K].copy())
        ofs += K
    return ChannelSet(H_BU=mats[0], H_UR=mats[1], h_Rk=mats[2], h_Uk=mats[3],
                      pathloss_cascade=losses[0], pathloss_BUk=losses[1],
                      pathloss_direct_Rk=losses[2], pathloss_direct_Uk=losses[3])
