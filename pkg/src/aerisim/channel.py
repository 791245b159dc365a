"""Wireless channel generation for the three link families.

Direct UE->CU links are Rayleigh NLoS; UE->UAV links are Rician with a
uniform-linear-array steering vector across the reflector elements; the
UAV->CU link is a deterministic LoS ray. The composed effective channel
stacks the reflected paths of every UAV on top of the direct path.

Distances enter through a power-law path loss referenced to 1 m. By
default the NLoS and LoS families use separate exponents; a single
shared exponent is available for ablation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import NetworkTopology, UavPose


@dataclass
class ChannelParams:
    """Propagation constants (linear units, watts, Hz)."""

    ref_path_gain: float = 1e-3          # NLoS gain at 1 m (-30 dB, clutter)
    ref_path_gain_los: float = 0.24      # air-link gain at 1 m (fitted pair with its exponent)
    pathloss_exp_nlos: float = 3.4
    pathloss_exp_los: float = 2.6
    rician_k: float = 3.0                # per sub-carrier LoS-to-scatter ratio
    noise_power: float = 1e-13
    bandwidth: float = 200e3
    single_exponent: bool = False        # ablation: one exponent for every link
    single_exponent_value: float = 2.7

    def __post_init__(self):
        if self.ref_path_gain <= 0 or self.ref_path_gain_los <= 0:
            raise ValueError("reference path gains must be positive")
        if self.pathloss_exp_nlos < 2 or self.pathloss_exp_los < 2:
            raise ValueError("path loss exponents must be >= 2")
        if self.rician_k < 0:
            raise ValueError("rician_k must be >= 0")
        if self.noise_power <= 0:
            raise ValueError("noise_power must be positive")

    @property
    def alpha_nlos(self) -> float:
        return self.single_exponent_value if self.single_exponent else self.pathloss_exp_nlos

    @property
    def alpha_los(self) -> float:
        return self.single_exponent_value if self.single_exponent else self.pathloss_exp_los


@dataclass
class ReflectionConfig:
    """Per (UAV, element) reflection amplitude and phase.

    amplitude: (J, L) in (0, 1]; phase: (J, L) in [0, 2*pi].
    """

    amplitude: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        self.amplitude = np.asarray(self.amplitude, dtype=float)
        self.phase = np.asarray(self.phase, dtype=float)
        if self.amplitude.shape != self.phase.shape or self.amplitude.ndim != 2:
            raise ValueError("amplitude and phase must share shape (J, L)")

    def violations(self) -> list[str]:
        out = []
        if np.any(self.amplitude <= 0) or np.any(self.amplitude > 1):
            out.append("C9: amplitudes must lie in (0, 1]")
        if np.any(self.phase < 0) or np.any(self.phase > 2 * np.pi):
            out.append("C8: phases must lie in [0, 2*pi]")
        return out

    def coefficients(self) -> np.ndarray:
        """(J, L) complex reflection coefficients beta * exp(i*theta)."""
        return self.amplitude * np.exp(1j * self.phase)


@dataclass
class ChannelRealization:
    """One slot's channel tensors.

    h_direct: (N, M, U); h_ue_uav: (J, N, L, U); g_uav_cu: (J, M, L);
    h_eff: (N, M, U) composed effective channel.
    """

    h_direct: np.ndarray
    h_ue_uav: np.ndarray
    g_uav_cu: np.ndarray
    h_eff: np.ndarray

    def effective_gain(self) -> np.ndarray:
        """(U, N) squared norm of the effective channel per user/sub-carrier."""
        return np.sum(np.abs(self.h_eff) ** 2, axis=1).T


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_direct_channel(
    topo: NetworkTopology, params: ChannelParams, num_subcarriers: int, rng: np.random.Generator
) -> np.ndarray:
    """Rayleigh-faded UE->CU channel, shape (N, M, U).

    Entry (n, m, u) = sqrt(rho * d_u^-alpha_nlos) * g with g ~ CN(0, 1);
    d_u is the 3-D UE-to-CU distance.
    """
    d = np.linalg.norm(topo.user_positions - topo.cu_position[None, :], axis=1)
    scale = np.sqrt(params.ref_path_gain * d ** (-params.alpha_nlos))
    g = _complex_normal(rng, (num_subcarriers, topo.num_antennas, topo.num_users))
    return scale[None, None, :] * g


def ue_uav_distances(topo: NetworkTopology, pose: UavPose) -> np.ndarray:
    """(J, U) 3-D distances from each user to each UAV."""
    diff = topo.user_positions[None, :, :] - pose.positions_3d()[:, None, :]
    return np.linalg.norm(diff, axis=2)


def sample_ue_uav_channel(
    topo: NetworkTopology,
    pose: UavPose,
    params: ChannelParams,
    num_subcarriers: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Rician UE->UAV channel, shape (J, N, L, U).

    The LoS component is the ULA steering vector with direction cosine
    psi = (x_u - x_j) / d_{u,j}; the NLoS component is CN(0, 1).
    """
    J, L, U = pose.num_uavs, topo.num_elements, topo.num_users
    d = ue_uav_distances(topo, pose)                          # (J, U)
    psi = (topo.user_positions[None, :, 0] - pose.xy[:, None, 0]) / d
    ell = np.arange(L)
    # steering: (J, L, U)
    steer = np.exp(-1j * 2 * np.pi * topo.element_spacing_over_wavelength * ell[None, :, None] * psi[:, None, :])
    kappa = params.rician_k
    los_w = np.sqrt(kappa / (1.0 + kappa))
    nlos_w = np.sqrt(1.0 / (1.0 + kappa))
    nlos = _complex_normal(rng, (J, num_subcarriers, L, U))
    small = los_w * steer[:, None, :, :] + nlos_w * nlos
    scale = np.sqrt(params.ref_path_gain_los * d ** (-params.alpha_los))  # (J, U)
    return scale[:, None, None, :] * small


def uav_cu_channel(topo: NetworkTopology, pose: UavPose, params: ChannelParams) -> np.ndarray:
    """Deterministic LoS UAV->CU channel, shape (J, M, L).

    Rows are identical across receive antennas: the LoS ray carries no
    antenna-index dependence in this model.
    """
    d = pose.norms_3d()                                        # 3-D distance to origin
    if np.any(d <= 0):
        raise ValueError("UAV at the origin column; UAV->CU distance must be positive")
    psi = pose.xy[:, 0] / d
    ell = np.arange(topo.num_elements)
    phase = np.exp(-1j * 2 * np.pi * topo.element_spacing_over_wavelength * ell[None, :] * psi[:, None])
    scale = np.sqrt(params.ref_path_gain_los * d ** (-params.alpha_los))
    row = scale[:, None] * phase                               # (J, L)
    return np.repeat(row[:, None, :], topo.num_antennas, axis=1)


def compose_effective_channel(
    h_direct: np.ndarray,
    h_ue_uav: np.ndarray,
    g_uav_cu: np.ndarray,
    reflection: ReflectionConfig,
) -> ChannelRealization:
    """Stack reflected paths onto the direct path.

    h_eff(n, :, u) = sum_j G_j @ diag(coeff_j) @ conj(h_{u,j,n}) + h_direct(n, :, u).
    The UE-side channel enters conjugated, matching the conjugate-transpose
    composition of the reflected path.
    """
    J, N, L, U = h_ue_uav.shape
    if h_direct.ndim != 3 or g_uav_cu.shape[0] != J or g_uav_cu.shape[2] != L:
        raise ValueError("channel tensor dimension mismatch")
    M = g_uav_cu.shape[1]
    if h_direct.shape != (N, M, U):
        raise ValueError(f"h_direct shape {h_direct.shape} != {(N, M, U)}")
    if reflection.amplitude.shape != (J, L):
        raise ValueError(f"reflection shape {reflection.amplitude.shape} != {(J, L)}")

    coeff = reflection.coefficients()                          # (J, L)
    # weighted UE-side channel, conjugated: (J, N, L, U)
    weighted = coeff[:, None, :, None] * np.conj(h_ue_uav)
    # reflected path per UAV: einsum over elements -> (J, N, M, U), then sum UAVs
    reflected = np.einsum("jml,jnlu->jnmu", g_uav_cu, weighted)
    h_eff = reflected.sum(axis=0) + h_direct
    if not np.all(np.isfinite(h_eff.view(float))):
        raise ValueError("non-finite effective channel")
    return ChannelRealization(h_direct=h_direct, h_ue_uav=h_ue_uav, g_uav_cu=g_uav_cu, h_eff=h_eff)
