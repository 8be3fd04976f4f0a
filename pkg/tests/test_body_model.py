import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radarbody import autodiff as ad
from radarbody import body
from radarbody.errors import ConfigurationError, DegenerateRotationError
from radarbody.seeding import seeded_rng

from gradcheck import check_gradients


def quaternion_angle_oracle(r1: np.ndarray, r2: np.ndarray) -> float:
    """Angle of r1 @ r2.T via quaternion extraction; independent of arccos path."""
    m = r1 @ r2.T
    # Shepperd's method for a robust quaternion
    tr = np.trace(m)
    if tr > 0:
        w = np.sqrt(1.0 + tr) / 2.0
        v = np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]]) / (4 * w)
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k]) * 2.0
        q = np.zeros(4)
        q[1 + i] = s / 4
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
        w, v = q[0], q[1:]
    return 2.0 * np.arctan2(np.linalg.norm(v), abs(w))


def random_rotation(rng) -> np.ndarray:
    return body.rot6d_to_matrix(ad.Tensor(rng.normal(size=6))).data


# ---------------------------------------------------------------- rot6d

def test_rot6d_canonical_basis_gives_identity():
    r = body.rot6d_to_matrix(ad.Tensor([1., 0., 0., 0., 1., 0.]))
    np.testing.assert_allclose(r.data, np.eye(3), atol=1e-15)


def test_rot6d_scale_invariance():
    r = body.rot6d_to_matrix(ad.Tensor([2., 0., 0., 0., 3., 0.]))
    np.testing.assert_allclose(r.data, np.eye(3), atol=1e-15)


def test_rot6d_orthonormality_bulk():
    rng = seeded_rng("rot6d-bulk")
    r6 = rng.normal(size=(10_000, 6))
    mats = body.rot6d_to_matrix(ad.Tensor(r6)).data
    gram = np.einsum("nij,nkj->nik", mats, mats)  # R R^T
    assert np.max(np.abs(gram - np.eye(3))) < 1e-9
    dets = np.linalg.det(mats)
    assert np.max(np.abs(dets - 1.0)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 100.0))
def test_rot6d_positive_scale_invariance_property(seed, c):
    r6 = seeded_rng("rot6d-scale", seed).normal(size=6)
    a = body.rot6d_to_matrix(ad.Tensor(r6)).data
    b = body.rot6d_to_matrix(ad.Tensor(c * r6)).data
    np.testing.assert_allclose(a, b, atol=1e-10)
    ad.active_graph().clear()


def test_rot6d_degenerate_inputs_raise():
    with pytest.raises(DegenerateRotationError):
        body.rot6d_to_matrix(ad.Tensor([0., 0., 0., 0., 1., 0.]))
    with pytest.raises(DegenerateRotationError):
        body.rot6d_to_matrix(ad.Tensor([1., 0., 0., 2., 0., 0.]))


def test_rot6d_gradients():
    t = ad.Tensor(seeded_rng("rot6d-grad").normal(size=(2, 6)), requires_grad=True)
    w = seeded_rng("rot6d-grad-w").normal(size=(2, 3, 3))
    check_gradients(lambda: ad.reduce_sum(ad.mul(body.rot6d_to_matrix(t), ad.Tensor(w))), [t])


def test_matrix_to_rot6d_round_trip():
    rng = seeded_rng("r6-round")
    mats = body.rot6d_to_matrix(ad.Tensor(rng.normal(size=(16, 6)))).data
    back = body.rot6d_to_matrix(ad.Tensor(body.matrix_to_rot6d(mats))).data
    np.testing.assert_allclose(back, mats, atol=1e-12)


# ---------------------------------------------------------------- geodesic

def test_geodesic_zero_at_equal_inputs():
    r = random_rotation(seeded_rng("geo-eq"))
    d = body.geodesic_distance(ad.Tensor(r), ad.Tensor(r)).data
    assert 0.0 <= d < 1e-3


def test_geodesic_quarter_turn():
    rz = body.axis_angle_matrix([0, 0, 1], np.pi / 2)
    d = float(body.geodesic_distance(ad.Tensor(rz), ad.Tensor(np.eye(3))).data)
    assert abs(d - np.pi / 2) < 1e-9


def test_geodesic_matches_quaternion_oracle():
    rng = seeded_rng("geo-oracle")
    for _ in range(100):
        r1, r2 = random_rotation(rng), random_rotation(rng)
        d = float(body.geodesic_distance(ad.Tensor(r1), ad.Tensor(r2)).data)
        assert abs(d - quaternion_angle_oracle(r1, r2)) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_geodesic_symmetric_and_bounded(seed):
    rng = seeded_rng("geo-sym", seed)
    r1, r2 = random_rotation(rng), random_rotation(rng)
    d12 = float(body.geodesic_distance(ad.Tensor(r1), ad.Tensor(r2)).data)
    d21 = float(body.geodesic_distance(ad.Tensor(r2), ad.Tensor(r1)).data)
    assert abs(d12 - d21) < 1e-12
    assert 0.0 <= d12 <= np.pi
    ad.active_graph().clear()


def test_geodesic_gradients():
    rng = seeded_rng("geo-grad")
    t = ad.Tensor(rng.normal(size=(3, 6)), requires_grad=True)
    target = body.rot6d_to_matrix(ad.Tensor(rng.normal(size=(3, 6)))).data
    check_gradients(
        lambda: ad.reduce_sum(body.geodesic_distance(body.rot6d_to_matrix(t), ad.Tensor(target))),
        [t])


# ---------------------------------------------------------------- template

def test_make_template_deterministic():
    a = body.make_template(24, 200, 10, seed=3)
    b = body.make_template(24, 200, 10, seed=3)
    assert a.rest_vertices.tobytes() == b.rest_vertices.tobytes()
    assert a.skin_weights.tobytes() == b.skin_weights.tobytes()
    assert a.shape_dirs_vertices.tobytes() == b.shape_dirs_vertices.tobytes()
    c = body.make_template(24, 200, 10, seed=4)
    assert a.rest_vertices.tobytes() != c.rest_vertices.tobytes()


def test_template_skin_rows_sum_to_one():
    t = body.make_template(24, 300, 10, seed=1)
    np.testing.assert_allclose(t.skin_weights.sum(axis=1), 1.0, atol=1e-9)
    assert np.max((t.skin_weights != 0).sum(axis=1)) <= 4


def test_template_17_joint_variant():
    t = body.make_template(17, 150, 5, seed=0)
    assert t.n_joints == 17 and t.n_vertices == 150 and t.n_shape == 5


def test_template_chain_fallback_and_errors():
    t = body.make_template(4, 30, 2, seed=0)
    assert t.n_joints == 4
    np.testing.assert_array_equal(t.parent, [-1, 0, 1, 2])
    with pytest.raises(ConfigurationError):
        body.make_template(1, 10, 2, seed=0)


def test_template_zero_shape_space_ignores_beta():
    t = body.make_template(24, 100, 0, seed=2)
    frames = 2
    base = body.BodyParams.from_arrays(body.identity_rot6d(frames, 24).reshape(frames, -1),
                                       np.zeros((frames, 0)), np.zeros((frames, 3)))
    out = body.reconstruct(t, base)
    np.testing.assert_allclose(out.joints.data, np.broadcast_to(t.rest_joints, (frames, 24, 3)),
                               atol=1e-12)


def test_template_json_round_trip(tmp_path):
    t = body.make_template(24, 120, 6, seed=9)
    path = tmp_path / "template.json"
    body.template_to_json(t, path)
    back = body.template_from_json(path)
    assert back.joint_names == t.joint_names
    np.testing.assert_array_equal(back.rest_vertices, t.rest_vertices)
    np.testing.assert_array_equal(back.skin_weights, t.skin_weights)
    np.testing.assert_array_equal(back.shape_dirs_joints, t.shape_dirs_joints)


# ---------------------------------------------------------------- kinematics

def identity_params(template, frames=1, gamma=None, beta=None):
    theta = body.identity_rot6d(frames, template.n_joints).reshape(frames, -1)
    if beta is None:
        beta = np.zeros((frames, template.n_shape))
    if gamma is None:
        gamma = np.zeros((frames, 3))
    return body.BodyParams.from_arrays(theta, beta, gamma)


@pytest.fixture(scope="module")
def template():
    return body.make_template(24, 200, 10, seed=0)


def test_fk_rest_pose(template):
    out = body.reconstruct(template, identity_params(template))
    np.testing.assert_allclose(out.joints.data[0], template.rest_joints, atol=1e-12)
    np.testing.assert_allclose(out.vertices.data[0], template.rest_vertices, atol=1e-12)


def test_fk_translation_equivariance(template):
    delta = np.array([1.0, 2.0, 3.0])
    base = body.reconstruct(template, identity_params(template))
    moved = body.reconstruct(template, identity_params(template, gamma=delta[None]))
    np.testing.assert_allclose(moved.joints.data, base.joints.data + delta, atol=1e-12)
    np.testing.assert_allclose(moved.vertices.data, base.vertices.data + delta, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fk_translation_equivariance_random_pose(seed):
    t = body.make_template(17, 60, 3, seed=0)
    rng = seeded_rng("fk-equi", seed)
    theta = body.matrix_to_rot6d(
        body.rot6d_to_matrix(ad.Tensor(rng.normal(size=(1, 17, 6)))).data).reshape(1, -1)
    beta = rng.normal(size=(1, 3)) * 0.5
    gamma = rng.normal(size=(1, 3))
    delta = rng.normal(size=3)
    a = body.reconstruct(t, body.BodyParams.from_arrays(theta, beta, gamma))
    b = body.reconstruct(t, body.BodyParams.from_arrays(theta, beta, gamma + delta))
    np.testing.assert_allclose(b.joints.data, a.joints.data + delta, atol=1e-12)
    np.testing.assert_allclose(b.vertices.data, a.vertices.data + delta, atol=1e-12)
    ad.active_graph().clear()


def test_fk_two_link_hand_calculation():
    # 2-joint chain, 90 deg root rotation about z: child lands at parent + Rz(90) @ offset
    t = body.make_template(2, 0, 0, seed=0)
    rz = body.axis_angle_matrix([0, 0, 1], np.pi / 2)
    theta = np.concatenate([body.matrix_to_rot6d(rz), body.identity_rot6d(1)[0]])[None]
    params = body.BodyParams.from_arrays(theta, np.zeros((1, 0)), np.zeros((1, 3)))
    joints, _ = body.forward_kinematics(t, params)
    offset = t.rest_joints[1] - t.rest_joints[0]
    expected = t.rest_joints[0] + rz @ offset
    np.testing.assert_allclose(joints.data[0, 1], expected, atol=1e-12)


def test_root_joint_equals_gamma_plus_shaped_root(template):
    rng = seeded_rng("root-inv")
    beta = rng.normal(size=(1, 10)) * 0.5
    gamma = rng.normal(size=(1, 3))
    theta = body.matrix_to_rot6d(
        body.rot6d_to_matrix(ad.Tensor(rng.normal(size=(1, 24, 6)))).data).reshape(1, -1)
    out = body.reconstruct(template, body.BodyParams.from_arrays(theta, beta, gamma))
    shaped_root = template.rest_joints[0] + beta[0] @ template.shape_dirs_joints[:, 0, :]
    np.testing.assert_allclose(out.joints.data[0, 0], gamma[0] + shaped_root, atol=1e-12)


def test_skinning_rigid_single_bone_vertex(template):
    # pick a vertex fully attached to one joint and rotate that joint's chain root
    w = template.skin_weights
    rigid = np.flatnonzero(np.max(w, axis=1) == 1.0)
    assert rigid.size > 0
    v = int(rigid[0])
    j = int(np.argmax(w[v]))
    rot = body.axis_angle_matrix([0, 1, 0], 0.4)
    theta = body.identity_rot6d(1, 24)
    theta[0, j] = body.matrix_to_rot6d(rot)
    params = body.BodyParams.from_arrays(theta.reshape(1, -1), np.zeros((1, 10)),
                                         np.zeros((1, 3)))
    joints, transforms = body.forward_kinematics(template, params)
    verts = body.skin_vertices(template, transforms, params)
    r_world = transforms.rotations.data[0, j]
    origin = transforms.origins.data[0, j]
    expected = r_world @ (template.rest_vertices[v] - template.rest_joints[j]) + origin
    np.testing.assert_allclose(verts.data[0, v], expected, atol=1e-12)


def test_global_rotation_rotates_all_vertices(template):
    rot = body.axis_angle_matrix([0.3, 0.5, 1.0], 1.1)
    theta = body.identity_rot6d(1, 24)
    theta[0, 0] = body.matrix_to_rot6d(rot)
    posed = body.reconstruct(template, body.BodyParams.from_arrays(
        theta.reshape(1, -1), np.zeros((1, 10)), np.zeros((1, 3))))
    rest = body.reconstruct(template, identity_params(template))
    pivot = template.rest_joints[0]
    expected = (rest.vertices.data[0] - pivot) @ rot.T + pivot
    np.testing.assert_allclose(posed.vertices.data[0], expected, atol=1e-9)
    expected_j = (rest.joints.data[0] - pivot) @ rot.T + pivot
    np.testing.assert_allclose(posed.joints.data[0], expected_j, atol=1e-9)


def test_kinematics_gradients_match_finite_differences():
    t = body.make_template(4, 12, 2, seed=1)
    rng = seeded_rng("fk-grad")
    theta0 = body.identity_rot6d(2, 4) + rng.normal(size=(2, 4, 6)) * 0.2
    theta = ad.Tensor(theta0.reshape(2, -1), requires_grad=True, name="theta")
    beta = ad.Tensor(rng.normal(size=(2, 2)) * 0.3, requires_grad=True, name="beta")
    gamma = ad.Tensor(rng.normal(size=(2, 3)), requires_grad=True, name="gamma")
    w_j = rng.normal(size=(2, 4, 3))
    w_v = rng.normal(size=(2, 12, 3))

    def loss():
        out = body.reconstruct(t, body.BodyParams(theta, beta, gamma))
        return ad.add(ad.reduce_sum(ad.mul(out.joints, ad.Tensor(w_j))),
                      ad.reduce_sum(ad.mul(out.vertices, ad.Tensor(w_v))))

    check_gradients(loss, [theta, beta, gamma], rtol=1e-4)
