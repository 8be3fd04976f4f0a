import numpy as np
import pytest

from radarbody import autodiff as ad
from radarbody import net
from radarbody.errors import ConfigurationError, ContractError, DimensionError
from radarbody.seeding import seeded_rng
from radarbody.sim import PointFrame, RawSequence

from gradcheck import check_gradients
from test_pointnet import micro_config


# ---------------------------------------------------------------- bigru

def make_gru(d_in=6, hidden=5, seed=0):
    store = net.ParameterStore(seed)
    return net.BiGRU(store, "gru", d_in, hidden), store


def test_bigru_single_frame_window():
    gru, _ = make_gru()
    out = gru(ad.Tensor(seeded_rng("gru-t1").normal(size=(2, 1, 6))))
    assert out.shape == (2, 1, 10)
    assert np.all(np.isfinite(out.data))


def test_bigru_zero_input_zero_biases_fixed_point():
    gru, store = make_gru()
    for name in store.names():
        if name.endswith(".bias"):
            store[name].data[:] = 0.0
    out = gru(ad.Tensor(np.zeros((3, 4, 6))))
    np.testing.assert_array_equal(out.data, np.zeros((3, 4, 10)))


def test_bigru_gate_weight_gradients_through_time():
    gru, store = make_gru(d_in=3, hidden=2)
    x = seeded_rng("gru-grad").normal(size=(2, 4, 3))
    weights = store.tensors()

    def loss():
        out = gru(ad.Tensor(x))
        return ad.reduce_sum(ad.mul(out, out))

    check_gradients(loss, weights, rtol=1e-4)


def test_bigru_backward_direction_sees_future():
    gru, _ = make_gru(d_in=2, hidden=3)
    x = seeded_rng("gru-dir").normal(size=(1, 5, 2))
    base = gru(ad.Tensor(x)).data
    x2 = x.copy()
    x2[0, 4] += 1.0  # change the last frame
    out = gru(ad.Tensor(x2)).data
    # forward half at t=0 unchanged, backward half at t=0 changed
    np.testing.assert_array_equal(out[0, 0, :3], base[0, 0, :3])
    assert not np.allclose(out[0, 0, 3:], base[0, 0, 3:])


# ---------------------------------------------------------------- heads

@pytest.fixture(scope="module")
def model():
    return net.ReconstructionNet(micro_config(), seed=3)


def test_predict_translation_shape(model):
    g = ad.Tensor(seeded_rng("pt").normal(size=(2, 2, 16)))
    assert model.predict_translation(g).shape == (2, 2, 3)


def test_predict_translation_zero_weights_constant_bias():
    cfg = micro_config()
    m = net.ReconstructionNet(cfg, seed=4)
    for name in ("translation.h0", "translation.out"):
        m.store[f"{name}.weight"].data[:] = 0.0
        m.store[f"{name}.bias"].data[:] = 0.0
    m.store["translation.out.bias"].data[:] = [0.5, -1.0, 2.0]
    g = ad.Tensor(seeded_rng("pt0").normal(size=(3, 2, 16)))
    out = m.predict_translation(g).data
    np.testing.assert_array_equal(out, np.broadcast_to([0.5, -1.0, 2.0], (3, 2, 3)))


def test_coarse_skeleton_shape(model):
    g = ad.Tensor(seeded_rng("cs").normal(size=(2, 2, 16)))
    assert model.estimate_coarse_skeleton(g).shape == (2, 2, 4, 3)


def test_regress_identity_bias_initialization():
    cfg = micro_config()
    m = net.ReconstructionNet(cfg, seed=5)
    m.store["pose_head.weight"].data[:] = 0.0
    g = ad.Tensor(seeded_rng("rid").normal(size=(1, 2, 16)))
    coarse = m.estimate_coarse_skeleton(g)
    fused = m.fuse_and_attend(g, coarse)
    theta, _, _ = m.regress_body_params(fused)
    from radarbody.body import rot6d_to_matrix
    mats = rot6d_to_matrix(ad.reshape(theta, (1, 2, 4, 6))).data
    np.testing.assert_allclose(mats, np.broadcast_to(np.eye(3), (1, 2, 4, 3, 3)), atol=1e-12)


def test_regress_shapes(model):
    g = ad.Tensor(seeded_rng("rs").normal(size=(2, 2, 16)))
    fused = model.fuse_and_attend(g, model.estimate_coarse_skeleton(g))
    theta, beta, gamma = model.regress_body_params(fused)
    assert theta.shape == (2, 2, 24)   # 6 * N_J with N_J = 4
    assert beta.shape == (2, 2, 2)
    assert gamma.shape == (2, 2, 3)


def test_regress_token_permutation_equivariance(model):
    g = ad.Tensor(seeded_rng("rperm").normal(size=(1, 2, 16)))
    coarse = model.estimate_coarse_skeleton(g)
    # permute joint tokens after attention by feeding permuted fused features
    fused = model.fuse_and_attend(g, coarse)
    perm = np.array([2, 0, 3, 1])
    permuted = net.FusedJointFeatures(
        ad.take(fused.i_concat, perm, axis=2),
        ad.take(fused.i_prime, perm, axis=2),
        ad.take(fused.attended, perm, axis=2))
    theta, beta, gamma = model.regress_body_params(fused)
    theta_p, beta_p, gamma_p = model.regress_body_params(permuted)
    base = theta.data.reshape(1, 2, 4, 6)
    np.testing.assert_allclose(theta_p.data.reshape(1, 2, 4, 6), base[:, :, perm], atol=1e-12)
    np.testing.assert_allclose(beta_p.data, beta.data, atol=1e-12)   # mean-pool invariant
    np.testing.assert_allclose(gamma_p.data, gamma.data, atol=1e-12)


# ---------------------------------------------------------------- attention

def test_attention_single_token_weight_is_one():
    cfg = micro_config(template=net.TemplateConfig(n_joints=2, n_vertices=8, n_shape=2, seed=0))
    m = net.ReconstructionNet(cfg, seed=6)
    g = ad.Tensor(seeded_rng("a1").normal(size=(1, 2, 16)))
    single = ad.Tensor(seeded_rng("a1j").normal(size=(1, 2, 1, 3)))
    fused = m.attention(g, single)
    assert fused.attended.shape == (1, 2, 1, 16)
    # with one token, output == W_M @ concat(V_heads) of that token: linear in it
    doubled = m.attention(g, single)  # deterministic
    np.testing.assert_array_equal(fused.attended.data, doubled.attended.data)


def test_attention_identical_tokens_uniform_weights(model):
    g = ad.Tensor(np.tile(seeded_rng("au").normal(size=16), (1, 2, 1)))
    coarse = ad.Tensor(np.tile(seeded_rng("auj").normal(size=3), (1, 2, 4, 1)))
    fused = model.fuse_and_attend(g, coarse)
    # all joint tokens identical -> attended output identical per token
    spread = np.ptp(fused.attended.data, axis=2)
    assert np.max(np.abs(spread)) < 1e-12


def test_attention_rows_sum_to_one(model):
    head = model.attention.heads[0]
    g = ad.Tensor(seeded_rng("arows").normal(size=(2, 2, 16)))
    coarse = model.estimate_coarse_skeleton(g)
    fused = model.fuse_and_attend(g, coarse)
    q = ad.linear_layer(fused.i_prime, *head["q"]).data
    k = ad.linear_layer(fused.i_prime, *head["k"]).data
    scores = q @ np.swapaxes(k, -1, -2) / np.sqrt(model.attention.attn.head_dim)
    weights = ad.softmax(ad.Tensor(scores), axis=-1).data
    np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-12)
    # score shift invariance
    shifted = ad.softmax(ad.Tensor(scores + 11.3), axis=-1).data
    np.testing.assert_allclose(weights, shifted, atol=1e-12)


def test_attention_head_divisibility_enforced():
    with pytest.raises(ConfigurationError):
        micro_config(n_heads=3)  # 16 % 3 != 0


# ---------------------------------------------------------------- crop

def frames_from_arrays(arrays, frame_rate=10.0):
    frames = [PointFrame(np.asarray(a, dtype=np.float64), i / frame_rate)
              for i, a in enumerate(arrays)]
    return RawSequence(frames, frame_rate, None, np.zeros(3))


def pad5(xyz):
    xyz = np.asarray(xyz, dtype=np.float64)
    return np.column_stack([xyz, np.zeros((xyz.shape[0], 2))])


def test_crop_exact_fit_is_identity():
    pts = pad5(seeded_rng("crop-id").uniform(-0.4, 0.4, size=(8, 3)))
    raw = frames_from_arrays([pts])
    out = net.crop_window(raw, 0, np.zeros((1, 3)), 8, seed=0)
    np.testing.assert_array_equal(out.P[0], pts)


def test_crop_boundary_point_retained():
    pts = pad5([[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 1.5], [0.51, 0.0, 0.0]])
    raw = frames_from_arrays([pts])
    out = net.crop_window(raw, 0, np.zeros((1, 3)), 3, seed=0)
    kept = {tuple(r[:3]) for r in out.P[0]}
    assert (0.5, 0.0, 0.0) in kept and (0.0, 0.5, 0.0) in kept and (0.0, 0.0, 1.5) in kept
    assert (0.51, 0.0, 0.0) not in kept


def test_crop_cyclic_repeat_multiplicity():
    pts = pad5([[0.1, 0, 0], [0.2, 0, 0], [-0.1, 0, 0]])
    raw = frames_from_arrays([pts])
    out = net.crop_window(raw, 0, np.zeros((1, 3)), 8, seed=3)
    rows = [tuple(r) for r in out.P[0]]
    counts = {tuple(p): rows.count(tuple(p)) for p in pts}
    assert sorted(counts.values()) == [2, 3, 3]  # each point floor(8/3) or ceil(8/3) times


def test_crop_subsample_preserves_order():
    pts = pad5(np.column_stack([np.linspace(-0.4, 0.4, 20), np.zeros(20), np.zeros(20)]))
    raw = frames_from_arrays([pts])
    out = net.crop_window(raw, 0, np.zeros((1, 3)), 6, seed=4)
    xs = out.P[0][:, 0]
    assert np.all(np.diff(xs) > 0)  # original ascending order kept


def test_crop_empty_frame_reuses_previous():
    inside = pad5([[0.1, 0, 0], [0.0, 0.2, 0]])
    faraway = pad5([[9.0, 9.0, 9.0]])
    raw = frames_from_arrays([inside, faraway])
    out = net.crop_window(raw, 0, np.zeros((2, 3)), 4, seed=5)
    np.testing.assert_array_equal(out.P[1], out.P[0])


def test_crop_first_frame_empty_takes_nearest():
    faraway = pad5([[9.0, 0, 0], [3.0, 0, 0], [4.0, 0, 0]])
    raw = frames_from_arrays([faraway])
    out = net.crop_window(raw, 0, np.zeros((1, 3)), 2, seed=6)
    np.testing.assert_array_equal(np.sort(out.P[0][:, 0]), [3.0, 4.0])


def test_crop_determinism_bitwise():
    rng = seeded_rng("crop-det")
    raw = frames_from_arrays([pad5(rng.uniform(-1, 1, size=(40, 3))) for _ in range(3)])
    centers = np.zeros((3, 3))
    a = net.crop_window(raw, 0, centers, 16, seed=9)
    b = net.crop_window(raw, 0, centers, 16, seed=9)
    assert a.P.tobytes() == b.P.tobytes()
    c = net.crop_window(raw, 0, centers, 16, seed=10)
    assert a.P.tobytes() != c.P.tobytes()


def test_crop_window_too_short_raises():
    raw = frames_from_arrays([pad5([[0, 0, 0]])])
    with pytest.raises(ContractError):
        net.crop_window(raw, 0, np.zeros((2, 3)), 4, seed=0)


def test_crop_source_tag_validated():
    with pytest.raises(ContractError):
        net.ProcessedSequence(np.zeros((1, 1, 5)), 0, "guesswork")


# ---------------------------------------------------------------- config

def test_network_config_json_round_trip():
    cfg = micro_config()
    back = net.NetworkConfig.from_dict(cfg.to_dict())
    assert back == cfg
    assert back.fingerprint() == cfg.fingerprint()


def test_network_config_rejects_unknown_keys():
    doc = micro_config().to_dict()
    doc["warp_drive"] = True
    with pytest.raises(ConfigurationError, match="warp_drive"):
        net.NetworkConfig.from_dict(doc)


def test_default_stage_derivation():
    cfg = net.NetworkConfig()
    assert cfg.stages[0].n_centers == 256 and cfg.stages[1].n_centers == 64
    assert cfg.global_width == 1024
    assert cfg.attention.head_dim == 128


# ---------------------------------------------------------------- full forward

def test_forward_window_shapes_and_finiteness(model):
    rng = seeded_rng("fw")
    windows = rng.normal(size=(2, 2, 16, 5))
    out = model.forward_window(windows, np.zeros((2, 2, 3)))
    assert out.gamma_pred.shape == (2, 2, 3)
    assert out.coarse_joints.shape == (2, 2, 4, 3)
    assert out.theta.shape == (2, 2, 24)
    assert out.fused.i_concat.shape == (2, 2, 4, 19)
    assert out.fused.i_prime.shape == (2, 2, 4, 16)
    for t in (out.gamma_pred, out.coarse_joints, out.theta, out.beta, out.gamma):
        assert np.all(np.isfinite(t.data))
    ad.active_graph().clear()


def test_forward_window_shape_validation(model):
    with pytest.raises(DimensionError):
        model.forward_window(np.zeros((2, 3, 16, 5)), np.zeros((2, 3, 3)))
    with pytest.raises(DimensionError):
        model.forward_window(np.zeros((2, 2, 16, 5)), np.zeros((2, 3)))


def test_forward_window_center_shift_moves_outputs(model):
    # shifting points and centers together shifts positional outputs identically
    rng = seeded_rng("fwshift")
    windows = rng.normal(size=(1, 2, 16, 5))
    centers = rng.normal(size=(1, 2, 3))
    delta = np.array([0.3, -1.0, 2.0])
    moved = windows.copy()
    moved[..., :3] += delta
    a = model.forward_window(windows, centers)
    b = model.forward_window(moved, centers + delta)
    np.testing.assert_allclose(b.gamma_pred.data, a.gamma_pred.data + delta, atol=1e-9)
    np.testing.assert_allclose(b.coarse_joints.data, a.coarse_joints.data + delta, atol=1e-9)
    np.testing.assert_allclose(b.gamma.data, a.gamma.data + delta, atol=1e-9)
    np.testing.assert_allclose(b.theta.data, a.theta.data, atol=1e-9)
    ad.active_graph().clear()


def test_dropout_only_active_in_training(model):
    rng = seeded_rng("fwdrop")
    windows = rng.normal(size=(1, 2, 16, 5))
    centers = np.zeros((1, 2, 3))
    a = model.forward_window(windows, centers, training=False).gamma_pred.data
    b = model.forward_window(windows, centers, training=False).gamma_pred.data
    np.testing.assert_array_equal(a, b)
    c = model.forward_window(windows, centers, training=True, step=0).gamma_pred.data
    d = model.forward_window(windows, centers, training=True, step=1).gamma_pred.data
    assert not np.array_equal(c, d)  # different step, different masks
    e = model.forward_window(windows, centers, training=True, step=0).gamma_pred.data
    np.testing.assert_array_equal(c, e)  # same step replays the same masks
    ad.active_graph().clear()
