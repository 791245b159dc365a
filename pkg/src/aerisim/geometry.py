"""Static network geometry and UAV mobility constraints.

The fleet moves in the horizontal plane at fixed altitude, subject to a
per-slot displacement budget (C1), a pairwise anti-collision separation
(C2), and a coverage ball around the origin measured on the full 3-D
position (C3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class NetworkTopology:
    """Positions and geometric limits, all in SI units.

    ``user_positions`` is (U, 3) with zero z; ``cu_position`` is the
    receiver location. ``min_uav_separation`` and ``coverage_radius``
    bound the fleet per C2/C3; ``max_speed * slot_duration`` is the
    per-slot displacement budget of C1.
    """

    user_positions: np.ndarray
    cu_position: np.ndarray
    num_antennas: int
    num_uavs: int
    uav_altitude: float
    num_elements: int
    element_spacing_over_wavelength: float
    coverage_radius: float
    min_uav_separation: float
    max_speed: float
    slot_duration: float

    def __post_init__(self):
        self.user_positions = np.asarray(self.user_positions, dtype=float)
        self.cu_position = np.asarray(self.cu_position, dtype=float)
        if self.user_positions.ndim != 2 or self.user_positions.shape[1] != 3:
            raise ValueError("user_positions must be (U, 3)")
        if np.any(self.user_positions[:, 2] != 0.0):
            raise ValueError("users sit on the ground plane (z = 0)")
        if self.cu_position.shape != (3,) or self.cu_position[2] < 0:
            raise ValueError("cu_position must be a 3-vector with z >= 0")
        for name in ("min_uav_separation", "coverage_radius", "max_speed", "slot_duration"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.num_elements < 1 or self.num_antennas < 1 or self.num_uavs < 1:
            raise ValueError("num_elements, num_antennas, num_uavs must be >= 1")
        if self.coverage_radius <= self.uav_altitude:
            raise ValueError("coverage_radius must exceed uav_altitude for a feasible fleet")

    @property
    def num_users(self) -> int:
        return self.user_positions.shape[0]

    @property
    def max_step(self) -> float:
        """Largest per-slot horizontal displacement (C1 radius)."""
        return self.max_speed * self.slot_duration

    @property
    def max_horizontal_radius(self) -> float:
        """Horizontal radius at which the 3-D norm hits coverage_radius."""
        return float(np.sqrt(self.coverage_radius**2 - self.uav_altitude**2))


@dataclass
class UavPose:
    """Horizontal fleet positions (J, 2) at a fixed shared altitude."""

    xy: np.ndarray
    altitude: float

    def __post_init__(self):
        self.xy = np.array(self.xy, dtype=float)
        if self.xy.ndim != 2 or self.xy.shape[1] != 2:
            raise ValueError("xy must be (J, 2)")

    @property
    def num_uavs(self) -> int:
        return self.xy.shape[0]

    def positions_3d(self) -> np.ndarray:
        """(J, 3) positions with the shared altitude appended."""
        z = np.full((self.num_uavs, 1), self.altitude)
        return np.hstack([self.xy, z])

    def norms_3d(self) -> np.ndarray:
        return np.linalg.norm(self.positions_3d(), axis=1)


def check_pose(pose: UavPose, topo: NetworkTopology, atol: float = 1e-9) -> list[str]:
    """Return C2/C3 violations for a pose (empty list when feasible)."""
    violations = []
    norms = pose.norms_3d()
    for j, r in enumerate(norms):
        if r > topo.coverage_radius + atol:
            violations.append(f"C3: uav {j} at 3-D radius {r:.3f} > {topo.coverage_radius}")
    for j in range(pose.num_uavs):
        for jp in range(j + 1, pose.num_uavs):
            sep = float(np.linalg.norm(pose.xy[j] - pose.xy[jp]))
            if sep < topo.min_uav_separation - atol:
                violations.append(f"C2: uavs ({j},{jp}) separated by {sep:.3f} < {topo.min_uav_separation}")
    return violations


def _clamp_radius(vec: np.ndarray, radius: float) -> np.ndarray:
    n = float(np.linalg.norm(vec))
    if n <= radius or n == 0.0:
        return vec
    return vec * (radius / n)


def project_uav_move(pose_prev: UavPose, requested_delta: np.ndarray, topo: NetworkTopology) -> UavPose:
    """Apply per-UAV displacements, projected onto the feasible set.

    Each delta is clamped to the C1 budget, the resulting position is
    clamped radially toward the origin to honor C3, and any pair closer
    than the C2 separation reverts to its previous position (both UAVs
    hold; pairs are scanned lower index first until stable).
    """
    delta = np.asarray(requested_delta, dtype=float)
    if delta.shape != pose_prev.xy.shape:
        raise ValueError(f"delta shape {delta.shape} != pose shape {pose_prev.xy.shape}")
    if not np.all(np.isfinite(delta)):
        raise ValueError("non-finite displacement requested")

    d_budget = topo.max_step
    r_xy = topo.max_horizontal_radius
    tentative = pose_prev.xy.copy()
    for j in range(pose_prev.num_uavs):
        step = _clamp_radius(delta[j], d_budget)
        tentative[j] = _clamp_radius(pose_prev.xy[j] + step, r_xy)

    # C2 resolution: on violation both members of the pair hold position.
    # Reverting can only move UAVs back to a configuration that was
    # pairwise feasible, so the scan reaches a fixpoint.
    moved = np.ones(pose_prev.num_uavs, dtype=bool)
    changed = True
    while changed:
        changed = False
        for j in range(pose_prev.num_uavs):
            for jp in range(j + 1, pose_prev.num_uavs):
                sep = float(np.linalg.norm(tentative[j] - tentative[jp]))
                if sep < topo.min_uav_separation - 1e-12:
                    if moved[j] or moved[jp]:
                        tentative[j] = pose_prev.xy[j]
                        tentative[jp] = pose_prev.xy[jp]
                        moved[j] = moved[jp] = False
                        changed = True
    return UavPose(xy=tentative, altitude=pose_prev.altitude)
