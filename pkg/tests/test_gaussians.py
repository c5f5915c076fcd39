import numpy as np
import pytest

from splatstereo.errors import InvalidInputError, WeightLoadError
from splatstereo.gaussians import (
    GAMMA_CHANNELS,
    GaussianHeads,
    GaussianMapperWeights,
    activate_heads,
    color_map,
    empty_cloud,
    lift_to_gaussians,
    load_ply,
    merge_views,
    regress_parameter_features,
    save_ply,
)
from splatstereo.geometry.camera import CameraIntrinsics, CameraPose, ProjectionMatrix, project_point
from splatstereo.geometry.disparity import DepthMap
from splatstereo.stereo import HandcraftedExtractor, WeightsBundle, save_weights

from .conftest import random_cloud


def flat_depth(h=64, w=64, z=2.0, conf=0.9):
    return DepthMap(values=np.full((h, w), z), validity=np.ones((h, w), bool),
                    confidence=np.full((h, w), conf))


def make_gamma(img=None, depth=None, h=64, w=64):
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 1, (h, w, 3)) if img is None else img
    depth = depth or flat_depth(h, w)
    pyramid = HandcraftedExtractor()(img)
    return img, depth, regress_parameter_features(img, pyramid, depth)


class TestColorMap:
    def test_identity(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 1, (16, 16, 3))
        assert np.array_equal(color_map(img), img)

    def test_specific_pixel(self):
        img = np.zeros((32, 32, 3))
        img[10, 20] = [0.2, 0.4, 0.6]
        assert np.allclose(color_map(img)[10, 20], [0.2, 0.4, 0.6])

    def test_white(self):
        assert np.all(color_map(np.ones((8, 8, 3))) == 1.0)


class TestFeatureFusion:
    def test_constant_depth_zero_gradient_channels(self):
        _, _, gamma = make_gamma()
        interior = gamma.data[4:-4, 4:-4]
        assert np.abs(interior[:, :, 1]).max() == 0.0
        assert np.abs(interior[:, :, 2]).max() == 0.0

    def test_output_shape(self):
        _, _, gamma = make_gamma()
        assert gamma.data.shape == (64, 64, GAMMA_CHANNELS)

    def test_depth_doubling_channel_contract(self):
        rng = np.random.default_rng(2)
        img = rng.uniform(0, 1, (64, 64, 3))
        zbase = 1.5 + 0.3 * rng.uniform(size=(64, 64))
        d1 = DepthMap(values=zbase, validity=np.ones((64, 64), bool))
        d2 = DepthMap(values=2 * zbase, validity=np.ones((64, 64), bool))
        pyr = HandcraftedExtractor()(img)
        g1 = regress_parameter_features(img, pyr, d1).data
        g2 = regress_parameter_features(img, pyr, d2).data
        assert np.abs(g2[:, :, 0] - 2 * g1[:, :, 0]).max() < 1e-12
        assert np.abs(g2[:, :, 1] - g1[:, :, 1]).max() < 1e-9
        assert np.abs(g2[:, :, 2] - g1[:, :, 2]).max() < 1e-9

    def test_misaligned_shapes_rejected(self):
        rng = np.random.default_rng(3)
        img = rng.uniform(0, 1, (64, 64, 3))
        pyr = HandcraftedExtractor()(img)
        with pytest.raises(InvalidInputError):
            regress_parameter_features(img, pyr, flat_depth(32, 32))


class TestActivations:
    def test_quaternion_normalization(self):
        _, depth, gamma = make_gamma()
        heads = GaussianHeads(fx=100.0)

        class FakeWeights:
            def head(self, name, g):
                h, w = g.shape[:2]
                if name == "rotation":
                    out = np.zeros((h, w, 4))
                    out[:, :, 0] = 2.0
                    return out
                if name == "scale":
                    return np.zeros((h, w, 3))
                return np.zeros((h, w, 1))

            def decode(self, g):
                return g

        heads = GaussianHeads(fx=100.0, weights=FakeWeights())
        maps = activate_heads(gamma, heads, depth)
        assert np.abs(np.linalg.norm(maps.rotation, axis=-1) - 1.0).max() < 1e-12
        assert np.allclose(maps.rotation[0, 0], [1, 0, 0, 0])
        # raw residual logit 0 -> 0; raw opacity logit 0 -> 0.5
        assert np.all(maps.depth_residual == 0.0)
        assert np.abs(maps.opacity - 0.5).max() < 1e-12

    def test_zero_norm_quaternion_fallback(self):
        _, depth, gamma = make_gamma()

        class ZeroRot:
            def head(self, name, g):
                h, w = g.shape[:2]
                if name == "rotation":
                    return np.zeros((h, w, 4))
                if name == "scale":
                    return np.zeros((h, w, 3))
                return np.zeros((h, w, 1))

            def decode(self, g):
                return g

        maps = activate_heads(gamma, GaussianHeads(fx=100.0, weights=ZeroRot()), depth)
        assert maps.rotation_fallback.all()
        assert np.allclose(maps.rotation[3, 3], [1, 0, 0, 0])

    def test_residual_bounded_by_gamma(self):
        _, depth, gamma = make_gamma()

        class BigResidual:
            def head(self, name, g):
                h, w = g.shape[:2]
                if name == "rotation":
                    out = np.zeros((h, w, 4))
                    out[:, :, 0] = 1.0
                    return out
                if name == "scale":
                    return np.zeros((h, w, 3))
                if name == "residual":
                    return np.full((h, w, 1), 1e9)
                return np.zeros((h, w, 1))

            def decode(self, g):
                return g

        maps = activate_heads(gamma, GaussianHeads(fx=100.0, weights=BigResidual()), depth)
        assert np.abs(maps.depth_residual).max() <= 0.5
        assert maps.depth_residual.max() > 0.4999

    def test_handcrafted_heads_contract(self):
        _, depth, gamma = make_gamma()
        heads = GaussianHeads(fx=320.0)
        maps = activate_heads(gamma, heads, depth)
        maps.validate()
        # identity rotations, zero residuals, confidence-saturated opacity
        assert np.allclose(maps.rotation[..., 0], 1.0)
        assert np.all(maps.depth_residual == 0.0)
        expected_op = min(0.9 / heads.opacity_saturation, heads.opacity_cap)
        assert np.abs(maps.opacity - expected_op).max() < 1e-9
        # pixel footprint scale: base * z / fx on a flat-texture plane
        expect_scale = heads.base_scale_px * 2.0 / 320.0
        interior = maps.scale[8:-8, 8:-8]
        assert np.abs(interior - expect_scale).max() / expect_scale < 0.6

    def test_scale_shrinks_on_texture(self):
        rng = np.random.default_rng(4)
        img = np.full((64, 64, 3), 0.5)
        img[:, 32:] = rng.uniform(0, 1, (64, 32, 3))  # busy half
        depth = flat_depth()
        pyramid = HandcraftedExtractor()(img)
        gamma = regress_parameter_features(img, pyramid, depth)
        maps = activate_heads(gamma, GaussianHeads(fx=320.0), depth)
        flat_scale = maps.scale[32, 8:24, 0].mean()
        busy_scale = maps.scale[32, 40:56, 0].mean()
        assert busy_scale < flat_scale * 0.75

    def test_loaded_conv_heads(self, tmp_path):
        rng = np.random.default_rng(5)
        tensors = {}
        for head, out_ch in (("rotation", 4), ("scale", 3), ("opacity", 1), ("residual", 1)):
            tensors[f"head_{head}.conv1.weight"] = rng.normal(0, 0.05, (8, GAMMA_CHANNELS, 3, 3))
            tensors[f"head_{head}.conv1.bias"] = rng.normal(0, 0.05, 8)
            tensors[f"head_{head}.conv2.weight"] = rng.normal(0, 0.05, (out_ch, 8, 3, 3))
            tensors[f"head_{head}.conv2.bias"] = rng.normal(0, 0.05, out_ch)
        manifest, _ = save_weights(tmp_path / "heads", tensors)
        weights = GaussianMapperWeights(WeightsBundle.load(manifest))
        _, depth, gamma = make_gamma()
        maps = activate_heads(gamma, GaussianHeads(fx=100.0, weights=weights), depth)
        maps.validate()

    def test_loaded_heads_wrong_channels_rejected(self, tmp_path):
        rng = np.random.default_rng(6)
        tensors = {}
        for head, out_ch in (("rotation", 2), ("scale", 3), ("opacity", 1), ("residual", 1)):
            tensors[f"head_{head}.conv1.weight"] = rng.normal(size=(8, GAMMA_CHANNELS, 1, 1))
            tensors[f"head_{head}.conv2.weight"] = rng.normal(size=(out_ch, 8, 1, 1))
        manifest, _ = save_weights(tmp_path / "badheads", tensors)
        with pytest.raises(WeightLoadError):
            GaussianMapperWeights(WeightsBundle.load(manifest))


class TestLift:
    def _setup(self, h=2, w=2):
        intr = CameraIntrinsics(fx=50.0, fy=50.0, cx=w / 2, cy=h / 2, width=w, height=h)
        pose = CameraPose(rotation=np.eye(3), translation=np.zeros(3))
        proj = ProjectionMatrix.from_camera(intr, pose)
        from splatstereo.gaussians.maps import GaussianParameterMaps

        maps = GaussianParameterMaps(
            color=np.random.default_rng(0).uniform(0, 1, (h, w, 3)),
            rotation=np.tile([1.0, 0, 0, 0], (h, w, 1)),
            scale=np.full((h, w, 3), 0.01),
            opacity=np.full((h, w), 0.8),
            depth_residual=np.zeros((h, w)),
            validity=np.ones((h, w), bool),
        )
        depth = DepthMap(values=np.full((h, w), 2.0), validity=np.ones((h, w), bool))
        return maps, depth, proj

    def test_all_valid_pixels_lift(self):
        maps, depth, proj = self._setup()
        cloud, skipped = lift_to_gaussians(maps, depth, proj)
        assert len(cloud) == 4 and skipped == 0

    def test_zero_residual_matches_plain_unprojection(self):
        maps, depth, proj = self._setup()
        cloud, _ = lift_to_gaussians(maps, depth, proj)
        for n in range(len(cloud)):
            uv, z = project_point(cloud.positions[n], proj)
            i, j = cloud.source_pixel[n]
            assert np.abs(uv - [j + 0.5, i + 0.5]).max() < 1e-5
            assert abs(z - 2.0) < 1e-9

    def test_residual_shifts_depth(self):
        maps, depth, proj = self._setup()
        maps.depth_residual[:] = 0.25
        cloud, _ = lift_to_gaussians(maps, depth, proj)
        _, z = project_point(cloud.positions[0], proj)
        assert abs(z - 2.25) < 1e-9

    def test_nonpositive_effective_depth_skipped(self):
        maps, depth, proj = self._setup()
        depth = DepthMap(values=np.full((2, 2), 0.3), validity=np.ones((2, 2), bool))
        maps.depth_residual[:] = -0.4
        cloud, skipped = lift_to_gaussians(maps, depth, proj)
        assert len(cloud) == 0 and skipped == 4

    def test_reprojection_consistency(self):
        # lifted positions project back onto their pixels with the
        # residual-adjusted depth
        rng = np.random.default_rng(7)
        maps, depth, proj = self._setup(h=8, w=8)
        resid = rng.uniform(-0.4, 0.4, (8, 8))
        maps.depth_residual = resid
        zvals = rng.uniform(1.0, 3.0, (8, 8))
        depth = DepthMap(values=zvals, validity=np.ones((8, 8), bool))
        cloud, _ = lift_to_gaussians(maps, depth, proj)
        for n in range(len(cloud)):
            i, j = cloud.source_pixel[n]
            uv, z = project_point(cloud.positions[n], proj)
            assert np.abs(uv - [j + 0.5, i + 0.5]).max() < 1e-5
            assert abs(z - (zvals[i, j] + resid[i, j])) < 1e-9


class TestMergeAndPly:
    def test_merge_counts(self):
        rng = np.random.default_rng(8)
        a = random_cloud(rng, 10)
        b = random_cloud(rng, 7)
        merged = merge_views(a, b)
        assert len(merged) == 17
        assert np.array_equal(merged.positions[:10], a.positions)

    def test_merge_with_empty(self):
        rng = np.random.default_rng(9)
        a = random_cloud(rng, 5)
        merged = merge_views(empty_cloud(), a)
        assert len(merged) == 5
        assert np.array_equal(merged.colors, a.colors)

    def test_disjoint_halves_compose(self, toy_scene):
        # rendering the union of two depth-disjoint clouds equals
        # compositing the near half over the far half's render
        from splatstereo.render import RenderConfig, render

        rng = np.random.default_rng(10)
        near = random_cloud(rng, 40)
        far = random_cloud(rng, 40)
        near.positions[:, 2] = rng.uniform(1.0, 1.5, 40)
        far.positions[:, 2] = rng.uniform(3.0, 4.0, 40)
        intr = CameraIntrinsics(fx=80.0, fy=80.0, cx=32.0, cy=32.0, width=64, height=64)
        pose = CameraPose(rotation=np.eye(3), translation=np.zeros(3))
        cfg = RenderConfig(dtype=np.float64, background=(0.0, 0.0, 0.0))
        merged = render(merge_views(near, far), pose, intr, cfg)
        f_near = render(near, pose, intr, cfg)
        f_far = render(far, pose, intr, cfg)
        t_near = 1.0 - np.asarray(f_near.alpha)
        composed = np.asarray(f_near.color) + t_near[:, :, None] * np.asarray(f_far.color)
        assert np.abs(np.asarray(merged.color) - composed).max() < 1e-6

    @pytest.mark.parametrize("binary", [True, False])
    def test_ply_roundtrip(self, tmp_path, binary):
        rng = np.random.default_rng(11)
        cloud = random_cloud(rng, 23)
        path = tmp_path / ("c.ply" if binary else "c_ascii.ply")
        save_ply(cloud, path, binary=binary)
        loaded = load_ply(path)
        tol = 1e-6  # float32 storage
        assert np.abs(loaded.positions - cloud.positions).max() < tol
        assert np.abs(loaded.colors - cloud.colors).max() < tol
        assert np.abs(loaded.rotations - cloud.rotations).max() < tol
        assert np.abs(loaded.scales - cloud.scales).max() < tol
        assert np.abs(loaded.opacities - cloud.opacities).max() < tol

    def test_ply_header_property_order(self, tmp_path):
        rng = np.random.default_rng(12)
        cloud = random_cloud(rng, 3)
        path = tmp_path / "c.ply"
        save_ply(cloud, path)
        header = path.read_bytes().split(b"end_header")[0].decode()
        expected = ["x", "y", "z", "red", "green", "blue", "opacity",
                    "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
        props = [line.split()[-1] for line in header.splitlines() if line.startswith("property")]
        assert props == expected
