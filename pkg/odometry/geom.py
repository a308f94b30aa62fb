"""
geom.py

Quaternion and rigid-motion algebra, cylindrical LiDAR projection, and pinhole camera projection. Everything here is a
pure function of tensors so it can sit inside the autograd graph of the pose cascade and also serve as a double
precision oracle for tests.

Conventions:
    - Quaternions are tensors of shape (..., 4) laid out as (w, x, y, z), Hamilton product.
    - A `RigidMotion` maps points p -> R(q) p + t; composition `a.compose(b)` equals the matrix product T(a) T(b).
    - `q` and `-q` are the same rotation; comparisons go through `rotation_distance`.
"""

from dataclasses import dataclass
from typing import Tuple

import torch

ORTHONORMALITY_TOLERANCE = 1e-3


class GeometryError(ValueError):
    pass


# === Quaternion Algebra ===
def identity_quaternion(*batch: int, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    q = torch.zeros(*batch, 4, dtype=dtype)
    q[..., 0] = 1.0
    return q


def quat_mul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Hamilton product a ⊗ b (inputs need not be unit)."""
    aw, ax, ay, az = a.unbind(-1)
    bw, bx, by, bz = b.unbind(-1)
    return torch.stack(
        (
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ),
        dim=-1,
    )


def quat_conj(q: torch.Tensor) -> torch.Tensor:
    return q * q.new_tensor([1.0, -1.0, -1.0, -1.0])


def quat_normalize(q: torch.Tensor) -> torch.Tensor:
    """Project onto the unit sphere; an exactly-zero 4-vector falls back to the identity rotation."""
    norm = torch.linalg.vector_norm(q, dim=-1, keepdim=True)
    degenerate = norm == 0
    safe_norm = torch.where(degenerate, torch.ones_like(norm), norm)
    return torch.where(degenerate, identity_quaternion(dtype=q.dtype).expand_as(q), q / safe_norm)


def quat_rotate(q: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """Vector part of q ⊗ (0, v) ⊗ q⁻¹ for unit q, evaluated as v + 2w(u × v) + 2u × (u × v)."""
    w, u = q[..., :1], q[..., 1:]
    u, v = torch.broadcast_tensors(u, v)
    w = w.expand(u.shape[:-1] + (1,))
    uv = torch.linalg.cross(u, v, dim=-1)
    return v + 2.0 * (w * uv + torch.linalg.cross(u, uv, dim=-1))


def quat_to_matrix(q: torch.Tensor) -> torch.Tensor:
    w, x, y, z = q.unbind(-1)
    rows = (
        (1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)),
        (2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)),
        (2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)),
    )
    return torch.stack([torch.stack(row, dim=-1) for row in rows], dim=-2)


def matrix_to_quat(rot: torch.Tensor) -> torch.Tensor:
    """Shepperd's method: pick the largest of (trace, R00, R11, R22) to divide by, then canonicalize to w >= 0."""
    r00, r01, r02 = rot[..., 0, 0], rot[..., 0, 1], rot[..., 0, 2]
    r10, r11, r12 = rot[..., 1, 0], rot[..., 1, 1], rot[..., 1, 2]
    r20, r21, r22 = rot[..., 2, 0], rot[..., 2, 1], rot[..., 2, 2]
    trace = r00 + r11 + r22

    # Each candidate is exact on its own branch; the others may divide by ~0 and are discarded by the gather
    sw = 2.0 * torch.sqrt(torch.clamp(1.0 + trace, min=0.0))
    sx = 2.0 * torch.sqrt(torch.clamp(1.0 + r00 - r11 - r22, min=0.0))
    sy = 2.0 * torch.sqrt(torch.clamp(1.0 - r00 + r11 - r22, min=0.0))
    sz = 2.0 * torch.sqrt(torch.clamp(1.0 - r00 - r11 + r22, min=0.0))
    candidates = torch.stack(
        (
            torch.stack((0.25 * sw, (r21 - r12) / sw, (r02 - r20) / sw, (r10 - r01) / sw), dim=-1),
            torch.stack(((r21 - r12) / sx, 0.25 * sx, (r01 + r10) / sx, (r02 + r20) / sx), dim=-1),
            torch.stack(((r02 - r20) / sy, (r01 + r10) / sy, 0.25 * sy, (r12 + r21) / sy), dim=-1),
            torch.stack(((r10 - r01) / sz, (r02 + r20) / sz, (r12 + r21) / sz, 0.25 * sz), dim=-1),
        ),
        dim=-2,
    )
    branch = torch.stack((trace, r00, r11, r22), dim=-1).argmax(dim=-1)
    q = torch.gather(candidates, -2, branch[..., None, None].expand(*branch.shape, 1, 4)).squeeze(-2)
    q = torch.where(q[..., :1] < 0, -q, q)
    return quat_normalize(q)


def rotation_distance(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Double-cover aware distance min(‖a - b‖, ‖a + b‖)."""
    return torch.minimum(torch.linalg.vector_norm(a - b, dim=-1), torch.linalg.vector_norm(a + b, dim=-1))


def rotation_angle(q: torch.Tensor) -> torch.Tensor:
    """Rotation angle in radians, 2·atan2(‖vec(q)‖, |w|); stable near the identity."""
    return 2.0 * torch.atan2(torch.linalg.vector_norm(q[..., 1:], dim=-1), q[..., 0].abs())


# === Rigid Motions ===
@dataclass(frozen=True)
class RigidMotion:
    rotation: torch.Tensor                                  # (..., 4) unit quaternion (w, x, y, z)
    translation: torch.Tensor                               # (..., 3) meters

    @classmethod
    def identity(cls, dtype: torch.dtype = torch.float64) -> "RigidMotion":
        return cls(identity_quaternion(dtype=dtype), torch.zeros(3, dtype=dtype))

    @classmethod
    def from_matrix(cls, matrix: torch.Tensor, tol: float = ORTHONORMALITY_TOLERANCE) -> "RigidMotion":
        """Build from a (..., 4, 4) or (..., 3, 4) homogeneous matrix, rejecting corrupted rotation blocks."""
        rot = matrix[..., :3, :3]
        eye = torch.eye(3, dtype=rot.dtype)
        deviation = (rot.transpose(-1, -2) @ rot - eye).abs().amax(dim=(-1, -2))
        if not torch.isfinite(matrix).all() or (deviation > tol).any():
            raise GeometryError(f"Rotation block deviates from orthonormality by {deviation.max().item():.3e} > {tol}")
        if (torch.linalg.det(rot) < 0).any():
            raise GeometryError("Rotation block is a reflection (negative determinant)")
        return cls(matrix_to_quat(rot), matrix[..., :3, 3].clone())

    def to_matrix(self) -> torch.Tensor:
        batch = self.translation.shape[:-1]
        matrix = torch.zeros(*batch, 4, 4, dtype=self.translation.dtype)
        matrix[..., :3, :3] = quat_to_matrix(self.rotation)
        matrix[..., :3, 3] = self.translation
        matrix[..., 3, 3] = 1.0
        return matrix

    def compose(self, other: "RigidMotion") -> "RigidMotion":
        """self ∘ other, i.e. T(self) · T(other); the rotation is renormalized."""
        rotation = quat_normalize(quat_mul(self.rotation, other.rotation))
        return RigidMotion(rotation, quat_rotate(self.rotation, other.translation) + self.translation)

    def inverse(self) -> "RigidMotion":
        conj = quat_conj(self.rotation)
        return RigidMotion(conj, -quat_rotate(conj, self.translation))

    def transform(self, points: torch.Tensor) -> torch.Tensor:
        """Apply to (..., N, 3) points."""
        return quat_rotate(self.rotation.unsqueeze(-2), points) + self.translation.unsqueeze(-2)

    def detach(self) -> "RigidMotion":
        return RigidMotion(self.rotation.detach(), self.translation.detach())


def compose_residual(delta: RigidMotion, prior: RigidMotion) -> RigidMotion:
    """q^l = Δq ⊗ q^{l+1};  t^l = Δq t^{l+1} Δq⁻¹ + Δt."""
    return delta.compose(prior)


# === Cylindrical Projection ===
@dataclass(frozen=True)
class CylindricalParams:
    delta_theta: float
    delta_phi: float
    height: int
    width: int
    phi_center: float = 0.0

    def __post_init__(self) -> None:
        if not (self.delta_theta > 0 and self.delta_phi > 0):
            raise GeometryError(f"Angular resolutions must be positive, got {self.delta_theta}, {self.delta_phi}")
        if self.height < 1 or self.width < 1:
            raise GeometryError(f"Pseudo-image needs at least one bin, got {self.height}x{self.width}")


def cylindrical_project(points: torch.Tensor, params: CylindricalParams) -> Tuple[torch.Tensor, torch.Tensor]:
    """Continuous (u, v) = (atan2(y, x) / Δθ, asin(z / ‖p‖) / Δφ) for (..., 3) points."""
    rng = torch.linalg.vector_norm(points, dim=-1)
    if (rng == 0).any():
        raise GeometryError("Cylindrical projection of a zero-length point is undefined")
    x, y, z = points.unbind(-1)
    u = torch.atan2(y, x) / params.delta_theta
    v = torch.asin(torch.clamp(z / rng, -1.0, 1.0)) / params.delta_phi
    return u, v


# === Pinhole Camera ===
@dataclass(frozen=True)
class CameraModel:
    intrinsics: torch.Tensor                                # (3, 3) pixels
    extrinsic: RigidMotion                                  # LiDAR frame -> camera frame
    width: int
    height: int

    def __post_init__(self) -> None:
        k = self.intrinsics
        if k.shape != (3, 3):
            raise GeometryError(f"Intrinsics must be 3x3, got {tuple(k.shape)}")
        if not (k[0, 0] > 0 and k[1, 1] > 0):
            raise GeometryError("Intrinsics need positive focal entries")
        if k[1, 0] != 0 or k[2, 0] != 0:
            raise GeometryError("Intrinsics must have a zero bottom-left 2x1 block")
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"Image must be at least 1x1, got {self.width}x{self.height}")


def camera_project(
    points: torch.Tensor, cam: CameraModel
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Project (..., 3) LiDAR points; returns (px, py, depth, in_view) with in_view on the half-open image rectangle."""
    pc = quat_rotate(cam.extrinsic.rotation, points) + cam.extrinsic.translation
    depth = pc[..., 2]
    k = cam.intrinsics.to(pc.dtype)
    uvw = pc @ k.transpose(0, 1)
    front = depth > 0
    safe_w = torch.where(front, uvw[..., 2], torch.ones_like(uvw[..., 2]))
    px, py = uvw[..., 0] / safe_w, uvw[..., 1] / safe_w
    in_view = front & (px >= 0) & (px < cam.width) & (py >= 0) & (py < cam.height)
    return px, py, depth, in_view


def camera_backproject(px: torch.Tensor, py: torch.Tensor, depth: torch.Tensor, cam: CameraModel) -> torch.Tensor:
    """Inverse of `camera_project` up to the camera frame: returns (..., 3) camera-frame points."""
    pix = torch.stack((px * depth, py * depth, depth), dim=-1)
    return pix @ torch.linalg.inv(cam.intrinsics.to(pix.dtype)).transpose(0, 1)
