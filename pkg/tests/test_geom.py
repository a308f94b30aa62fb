import math

import pytest
import torch

from conftest import pinhole_camera, random_motion
from odometry.geom import (
    CameraModel,
    CylindricalParams,
    GeometryError,
    RigidMotion,
    camera_backproject,
    camera_project,
    compose_residual,
    cylindrical_project,
    identity_quaternion,
    matrix_to_quat,
    quat_normalize,
    quat_to_matrix,
    rotation_angle,
    rotation_distance,
)


def test_compose_matches_matrix_product(generator):
    for _ in range(50):
        a, b = random_motion(generator, scale=10.0), random_motion(generator, scale=10.0)
        composed = compose_residual(a, b).to_matrix()
        assert torch.allclose(composed, a.to_matrix() @ b.to_matrix(), atol=1e-9)


def test_compose_is_associative(generator):
    a, b, c = (random_motion(generator) for _ in range(3))
    left, right = a.compose(b).compose(c), a.compose(b.compose(c))
    assert rotation_distance(left.rotation, right.rotation) < 1e-12
    assert torch.allclose(left.translation, right.translation, atol=1e-12)


def test_inverse_round_trip(generator):
    motion = random_motion(generator, scale=5.0)
    loop = motion.compose(motion.inverse())
    assert rotation_angle(loop.rotation) < 1e-12
    assert loop.translation.abs().max() < 1e-12


def test_quaternion_matrix_round_trip(generator):
    q = quat_normalize(torch.randn(500, 4, generator=generator, dtype=torch.float64))
    assert rotation_distance(matrix_to_quat(quat_to_matrix(q)), q).max() < 1e-12
    assert (matrix_to_quat(quat_to_matrix(q))[..., 0] >= 0).all()


def test_matrix_to_quat_half_turn():
    rot = torch.diag(torch.tensor([1.0, -1.0, -1.0], dtype=torch.float64))
    q = matrix_to_quat(rot)
    assert rotation_distance(q, torch.tensor([0.0, 1.0, 0.0, 0.0], dtype=torch.float64)) < 1e-12


def test_quaternion_sign_is_the_same_rotation(generator):
    motion = random_motion(generator)
    flipped = RigidMotion(-motion.rotation, motion.translation)
    assert torch.allclose(flipped.to_matrix(), motion.to_matrix(), atol=1e-12)
    assert rotation_distance(motion.rotation, flipped.rotation) == 0


def test_normalize_zero_quaternion_is_identity():
    q = quat_normalize(torch.zeros(2, 4, dtype=torch.float64))
    assert torch.equal(q, identity_quaternion(2))


def test_rotation_angle_about_z():
    angle = 0.3
    q = torch.tensor([math.cos(angle / 2), 0.0, 0.0, math.sin(angle / 2)], dtype=torch.float64)
    assert rotation_angle(q).item() == pytest.approx(angle, abs=1e-12)
    assert rotation_angle(-q).item() == pytest.approx(angle, abs=1e-12)


def test_from_matrix_rejects_non_orthonormal():
    matrix = torch.eye(4, dtype=torch.float64)
    matrix[0, 0] = 1.1
    with pytest.raises(GeometryError):
        RigidMotion.from_matrix(matrix)


def test_from_matrix_rejects_reflection():
    matrix = torch.eye(4, dtype=torch.float64)
    matrix[2, 2] = -1.0
    with pytest.raises(GeometryError, match="reflection"):
        RigidMotion.from_matrix(matrix)


def test_transform_applies_rotation_then_translation():
    quarter_turn = torch.tensor([math.cos(math.pi / 4), 0.0, 0.0, math.sin(math.pi / 4)], dtype=torch.float64)
    motion = RigidMotion(quarter_turn, torch.tensor([1.0, 2.0, 3.0], dtype=torch.float64))
    out = motion.transform(torch.tensor([[1.0, 0.0, 0.0]], dtype=torch.float64))
    assert torch.allclose(out, torch.tensor([[1.0, 3.0, 3.0]], dtype=torch.float64), atol=1e-12)


# === Projections ===
def test_cylindrical_project_axes():
    params = CylindricalParams(delta_theta=2 * math.pi / 128, delta_phi=math.radians(1.0), height=32, width=128)
    points = torch.tensor([[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [1.0, 0.0, 1.0]], dtype=torch.float64)
    u, v = cylindrical_project(points, params)
    assert u.tolist()[:2] == pytest.approx([0.0, 32.0])
    assert v[2].item() == pytest.approx(45.0)


def test_cylindrical_project_rejects_zero_point():
    params = CylindricalParams(delta_theta=0.1, delta_phi=0.1, height=4, width=4)
    with pytest.raises(GeometryError):
        cylindrical_project(torch.zeros(1, 3, dtype=torch.float64), params)


def test_cylindrical_params_reject_bad_resolution():
    with pytest.raises(GeometryError):
        CylindricalParams(delta_theta=0.0, delta_phi=0.1, height=4, width=4)


def test_camera_project_center_and_behind():
    cam = pinhole_camera()
    points = torch.tensor([[0.0, 0.0, 4.0], [0.0, 0.0, -4.0], [100.0, 0.0, 1.0]], dtype=torch.float64)
    px, py, depth, in_view = camera_project(points, cam)
    assert (px[0].item(), py[0].item()) == (16.0, 8.0)
    assert depth.tolist() == [4.0, -4.0, 1.0]
    assert in_view.tolist() == [True, False, False]


def test_camera_backproject_inverts_projection(generator):
    cam = pinhole_camera()
    points = torch.rand(20, 3, generator=generator, dtype=torch.float64) + torch.tensor([0.0, 0.0, 1.0])
    px, py, depth, _ = camera_project(points, cam)
    assert torch.allclose(camera_backproject(px, py, depth, cam), points, atol=1e-12)


def test_camera_model_validates_intrinsics():
    with pytest.raises(GeometryError):
        CameraModel(torch.zeros(3, 3, dtype=torch.float64), RigidMotion.identity(), width=4, height=4)
    with pytest.raises(GeometryError):
        CameraModel(torch.eye(2, dtype=torch.float64), RigidMotion.identity(), width=4, height=4)
