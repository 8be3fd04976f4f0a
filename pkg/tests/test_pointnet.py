import numpy as np
import pytest

from radarbody import autodiff as ad
from radarbody import net
from radarbody.errors import ContractError
from radarbody.seeding import seeded_rng

from gradcheck import check_gradients


def fps_bruteforce(points: np.ndarray, k: int, start: int) -> np.ndarray:
    """O(N^2 k) reference: recompute all pairwise min-distances each round."""
    chosen = [start]
    for _ in range(k - 1):
        best_idx, best_dist = None, -1.0
        for i in range(points.shape[0]):
            d = min(np.linalg.norm(points[i] - points[j]) for j in chosen)
            if d > best_dist:  # strict: ties keep the lowest index
                best_idx, best_dist = i, d
        chosen.append(best_idx)
    return np.array(chosen)


def ball_query_bruteforce(points, centers, radius, max_per_group):
    groups = np.empty((centers.shape[0], max_per_group), dtype=np.intp)
    for c in range(centers.shape[0]):
        dists = [np.linalg.norm(points[i] - centers[c]) for i in range(points.shape[0])]
        inside = [i for i, d in enumerate(dists) if d <= radius]
        if not inside:
            fill = [int(np.argmin(dists))] * max_per_group
        elif len(inside) >= max_per_group:
            fill = inside[:max_per_group]
        else:
            nearest_inside = min(inside, key=lambda i: (dists[i], i))
            fill = inside + [nearest_inside] * (max_per_group - len(inside))
        groups[c] = fill
    return groups


# ---------------------------------------------------------------- FPS

def test_fps_k1_returns_start():
    pts = seeded_rng("fps-k1").normal(size=(10, 3))
    np.testing.assert_array_equal(net.farthest_point_sample(pts, 1, 4), [4])


def test_fps_collinear_tie_breaks_low():
    pts = np.zeros((10, 3))
    pts[:, 0] = np.arange(10)
    np.testing.assert_array_equal(net.farthest_point_sample(pts, 3, 0), [0, 9, 4])


def test_fps_matches_bruteforce_on_200_instances():
    rng = seeded_rng("fps-oracle")
    for trial in range(200):
        n = int(rng.integers(4, 65))
        k = int(rng.integers(1, n + 1))
        start = int(rng.integers(0, n))
        pts = rng.normal(size=(n, 3))
        got = net.farthest_point_sample(pts, k, start)
        np.testing.assert_array_equal(got, fps_bruteforce(pts, k, start), err_msg=f"trial {trial}")


def test_fps_contract_errors():
    pts = np.zeros((5, 3))
    with pytest.raises(ContractError):
        net.farthest_point_sample(pts, 6, 0)
    with pytest.raises(ContractError):
        net.farthest_point_sample(pts, 2, 7)


# ---------------------------------------------------------------- ball query

def test_ball_query_empty_ball_fallback():
    pts = np.array([[10.0, 0, 0], [0, 5.0, 0], [0, 0, 2.0]])
    groups = net.ball_query(pts, np.zeros((1, 3)), radius=0.5, max_per_group=4)
    np.testing.assert_array_equal(groups, [[2, 2, 2, 2]])


def test_ball_query_closed_boundary():
    pts = np.array([[1.0, 0, 0], [2.0, 0, 0]])
    groups = net.ball_query(pts, np.zeros((1, 3)), radius=1.0, max_per_group=2)
    assert 0 in groups[0]  # point at exactly distance radius included


def test_ball_query_matches_bruteforce_on_200_instances():
    rng = seeded_rng("bq-oracle")
    for trial in range(200):
        n = int(rng.integers(3, 65))
        k = int(rng.integers(1, 9))
        mpg = int(rng.integers(1, 12))
        pts = rng.normal(size=(n, 3))
        centers = rng.normal(size=(k, 3)) * 0.5
        radius = float(rng.uniform(0.2, 1.5))
        got = net.ball_query(pts, centers, radius, mpg)
        want = ball_query_bruteforce(pts, centers, radius, mpg)
        np.testing.assert_array_equal(got, want, err_msg=f"trial {trial}")


def test_batched_sampling_matches_per_frame_functions():
    from radarbody.net.pointnet import (ball_query_batch, centroid_start_batch,
                                        farthest_point_sample_batch)
    rng = seeded_rng("batch-consistency")
    for trial in range(20):
        f, n, k, mpg = 3, int(rng.integers(6, 40)), int(rng.integers(1, 6)), int(rng.integers(1, 9))
        pos = rng.normal(size=(f, n, 3))
        radius = float(rng.uniform(0.3, 1.2))
        starts = centroid_start_batch(pos)
        centers = farthest_point_sample_batch(pos, k, starts)
        frame_axis = np.arange(f)[:, None]
        groups = ball_query_batch(pos, pos[frame_axis, centers], radius, mpg)
        for i in range(f):
            assert starts[i] == net.centroid_start_index(pos[i])
            np.testing.assert_array_equal(
                centers[i], net.farthest_point_sample(pos[i], k, starts[i]))
            np.testing.assert_array_equal(
                groups[i], net.ball_query(pos[i], pos[i][centers[i]], radius, mpg))


# ---------------------------------------------------------------- set abstraction

def make_stage(n_centers=2, radius=0.8, mpg=4, widths=(8, 6), d_in=5, seed=0):
    store = net.ParameterStore(seed)
    sa = net.SetAbstraction(store, "sa", d_in, net.StageConfig(n_centers, radius, mpg, widths))
    return sa, store


def test_set_abstraction_constant_group_passthrough():
    # every point identical -> aggregation returns that point's MLP output
    sa, _ = make_stage(n_centers=1, radius=1.0, mpg=4, widths=(8, 6))
    row = seeded_rng("sa-const").normal(size=5)
    frames = np.tile(row, (1, 6, 1))
    positions = np.ascontiguousarray(frames[..., :3])
    _, pooled = sa(positions, ad.Tensor(frames))

    h = ad.Tensor(np.concatenate([np.zeros(3), row])[None, None, None, :])
    for w, b in sa.layers:
        h = ad.relu(ad.linear_layer(h, w, b))
    np.testing.assert_allclose(pooled.data[0, 0], h.data[0, 0, 0], atol=1e-12)


def test_set_abstraction_zero_scores_is_uniform_average():
    sa, store = make_stage(n_centers=1, radius=5.0, mpg=8, widths=(8, 6))
    store["sa.score.weight"].data[:] = 0.0
    store["sa.score.bias"].data[:] = 0.0
    frames = seeded_rng("sa-uniform").normal(size=(1, 8, 5))
    positions = np.ascontiguousarray(frames[..., :3])
    _, pooled = sa(positions, ad.Tensor(frames))

    center = net.farthest_point_sample(positions[0], 1, net.centroid_start_index(positions[0]))
    groups = net.ball_query(positions[0], positions[0][center], 5.0, 8)
    h = ad.Tensor(np.concatenate(
        [positions[0][groups[0]] - positions[0][center[0]], frames[0][groups[0]]], axis=1))
    for w, b in sa.layers:
        h = ad.relu(ad.linear_layer(h, w, b))
    np.testing.assert_allclose(pooled.data[0, 0], h.data.mean(axis=0), atol=1e-12)


def test_set_abstraction_score_gradients():
    sa, store = make_stage()
    frames = seeded_rng("sa-grad").normal(size=(2, 10, 5))
    positions = np.ascontiguousarray(frames[..., :3])
    weights = [store["sa.score.weight"], store["sa.score.bias"],
               store["sa.mlp0.weight"], store["sa.mlp1.bias"]]

    def loss():
        _, pooled = sa(positions, ad.Tensor(frames))
        return ad.reduce_sum(ad.mul(pooled, pooled))

    check_gradients(loss, weights, rtol=1e-4)


# ---------------------------------------------------------------- full extractor

def micro_config(**overrides):
    defaults = dict(
        window=2, points=16, channels=5,
        template=net.TemplateConfig(n_joints=4, n_vertices=12, n_shape=2, seed=0),
        stages=(net.StageConfig(8, 0.8, 16, (8, 12)), net.StageConfig(4, 1.2, 16, (12, 16))),
        feature_dim=16, gru_hidden=8, n_heads=2, dropout=0.2,
        translation_mlp=(12,), skeleton_mlp=(12,))
    defaults.update(overrides)
    return net.NetworkConfig(**defaults)


def test_extractor_permutation_invariance():
    cfg = micro_config()
    model = net.ReconstructionNet(cfg, seed=1)
    rng = seeded_rng("perm")
    frames = rng.normal(size=(3, 16, 5))
    base = model.backbone(frames).data
    for _ in range(3):
        perm = rng.permutation(16)
        shuffled = model.backbone(frames[:, perm, :]).data
        np.testing.assert_allclose(shuffled, base, atol=1e-9)


def test_extractor_handles_duplicate_point_frame():
    cfg = micro_config()
    model = net.ReconstructionNet(cfg, seed=1)
    frames = np.tile(seeded_rng("dup").normal(size=5), (1, 16, 1))
    out = model.backbone(frames).data
    assert np.all(np.isfinite(out))


def test_extractor_output_shape():
    cfg = micro_config()
    model = net.ReconstructionNet(cfg, seed=0)
    out = model.backbone(seeded_rng("shape").normal(size=(6, 16, 5)))
    assert out.shape == (6, 16)
