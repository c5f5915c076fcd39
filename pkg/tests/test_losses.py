import numpy as np
import pytest

from splatstereo.errors import InvalidInputError
from splatstereo.losses import (
    LossWeights,
    chamfer_distance,
    depth_loss,
    epe_metrics,
    image_metrics,
    psnr,
    refine_gaussian_maps,
    rendering_loss,
    ssim,
    ssim_adjoint,
    ssim_map,
    total_loss,
    write_loss_trajectory,
)

from .oracles import chamfer_brute


class TestWeights:
    def test_paper_defaults(self):
        w = LossWeights()
        assert (w.lambda1, w.lambda2, w.mu) == (0.8, 0.2, 0.9)

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            LossWeights(lambda1=-0.1)
        with pytest.raises(InvalidInputError):
            LossWeights(lambda1=0.0, lambda2=0.0)


class TestRenderingLoss:
    def test_identical_images(self):
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 1, (64, 64, 3))
        l_mae, l_ssim, l_render = rendering_loss(img, img, None, LossWeights())
        assert l_mae == 0.0
        assert abs(l_ssim) < 1e-12
        assert abs(l_render) < 1e-12

    def test_unit_difference(self):
        ones = np.ones((64, 64, 3))
        zeros = np.zeros((64, 64, 3))
        l_mae, _, _ = rendering_loss(ones, zeros, None, LossWeights())
        assert l_mae == 1.0

    def test_mix_uses_configured_lambdas(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(0, 1, (48, 48, 3))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        w = LossWeights()
        l_mae, l_ssim, l_render = rendering_loss(a, b, None, w)
        assert abs(l_render - (0.8 * l_mae + 0.2 * l_ssim)) < 1e-12

    def test_empty_mask_rejected(self):
        img = np.zeros((32, 32, 3))
        with pytest.raises(InvalidInputError):
            rendering_loss(img, img, np.zeros((32, 32), bool), LossWeights())


class TestDepthLoss:
    def test_single_step_plain_l1(self):
        gt = np.full((8, 8), 5.0)
        trace = [np.full((8, 8), 3.0)]
        assert abs(depth_loss(trace, gt, mu=0.9) - 2.0) < 1e-12

    def test_two_step_weighting(self):
        gt = np.zeros((4, 4))
        trace = [np.full((4, 4), 2.0), np.full((4, 4), 1.0)]
        assert abs(depth_loss(trace, gt, mu=0.9) - 2.8) < 1e-12

    def test_perfect_trace(self):
        gt = np.random.default_rng(2).uniform(0, 10, (8, 8))
        assert depth_loss([gt.copy()] * 4, gt, mu=0.9) == 0.0

    def test_empty_trace_rejected(self):
        with pytest.raises(InvalidInputError):
            depth_loss([], np.zeros((4, 4)), mu=0.9)


class TestChamfer:
    def test_identical_sets(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(100, 3))
        assert chamfer_distance(pts, pts.copy()) == 0.0

    def test_singletons(self):
        a = np.array([[0.0, 0.0, 0.0]])
        b = np.array([[1.0, 0.0, 0.0]])
        assert abs(chamfer_distance(a, b) - 2.0) < 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(50, 3))
        b = rng.normal(size=(70, 3))
        assert chamfer_distance(a, b) == chamfer_distance(b, a)

    @pytest.mark.parametrize("na,nb", [(500, 500), (317, 211), (40, 900)])
    def test_grid_equals_bruteforce(self, na, nb):
        rng = np.random.default_rng(na + nb)
        a = rng.normal(size=(na, 3)) * rng.uniform(0.1, 5)
        b = rng.normal(size=(nb, 3)) * rng.uniform(0.1, 5)
        assert abs(chamfer_distance(a, b) - chamfer_brute(a, b)) < 1e-9

    def test_planar_degenerate_extent(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(200, 3))
        a[:, 2] = 0.0
        b = rng.normal(size=(150, 3))
        b[:, 2] = 0.0
        assert abs(chamfer_distance(a, b) - chamfer_brute(a, b)) < 1e-9

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            chamfer_distance(np.zeros((0, 3)), np.ones((4, 3)))

    def test_budget_thinning(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=(1000, 3))
        b = rng.normal(size=(1000, 3))
        full = chamfer_distance(a, b)
        thinned = chamfer_distance(a, b, budget=256)
        assert thinned != full  # different sample, still a sane value
        assert 0 < thinned < 10 * full + 1


class TestTotalLoss:
    def test_paper_combo_alpha_half(self):
        report = total_loss(1.0, 2.0, LossWeights(alpha_cd=0.5))
        assert abs(report.l_total - 2.0) < 1e-12

    def test_paper_combo_alpha_small(self):
        report = total_loss(1.0, 2.0, LossWeights(alpha_cd=0.005))
        assert abs(report.l_total - 1.01) < 1e-12

    def test_all_zero(self):
        assert total_loss(0.0, 0.0, LossWeights()).l_total == 0.0

    def test_beta_forced_zero_without_gt(self):
        w = LossWeights(alpha_cd=0.5, beta_depth=3.0)
        report = total_loss(1.0, 0.0, w, l_depth=None)
        assert report.l_total == 1.0
        report2 = total_loss(1.0, 0.0, w, l_depth=2.0)
        assert abs(report2.l_total - 7.0) < 1e-12

    def test_linearity_invariant(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            w = LossWeights(alpha_cd=float(rng.uniform(0, 2)), beta_depth=float(rng.uniform(0, 2)))
            lr, lc, ld = rng.uniform(0, 3, 3)
            rep = total_loss(float(lr), float(lc), w, l_depth=float(ld))
            assert abs(rep.l_total - (lr + w.alpha_cd * lc + w.beta_depth * ld)) < 1e-9

    def test_report_serialization(self, tmp_path):
        import json

        rep = total_loss(1.0, 0.5, LossWeights(), l_mae=0.7, l_ssim=0.2, psnr=30.0, ssim_metric=0.9)
        text = rep.to_json(tmp_path / "report.json")
        data = json.loads(text)
        for key in ("l_mae", "l_ssim", "l_render", "l_cd", "l_depth", "l_total", "psnr", "ssim_metric"):
            assert key in data
        write_loss_trajectory([rep, rep], tmp_path / "traj.csv")
        lines = (tmp_path / "traj.csv").read_text().strip().splitlines()
        assert len(lines) == 3


class TestImageMetrics:
    def test_identical_images_capped(self):
        rng = np.random.default_rng(8)
        img = rng.uniform(0, 1, (64, 64, 3))
        p, s = image_metrics(img, img)
        assert p == 99.0
        assert s == 1.0

    def test_known_mse(self):
        a = np.zeros((32, 32, 3))
        b = np.full((32, 32, 3), 0.1)
        assert abs(psnr(a, b) - 20.0) < 1e-9

    def test_matches_reference_ssim(self):
        from skimage.metrics import structural_similarity

        rng = np.random.default_rng(9)
        a = rng.uniform(0, 1, (96, 96, 3))
        b = np.clip(a + rng.normal(0, 0.05, a.shape), 0, 1)
        ref = structural_similarity(
            a, b, channel_axis=2, gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False, data_range=1.0,
        )
        assert abs(ssim(a, b) - ref) < 1e-6

    def test_ssim_range(self):
        rng = np.random.default_rng(10)
        a = rng.uniform(0, 1, (64, 64))
        b = rng.uniform(0, 1, (64, 64))
        val = ssim(a, b)
        assert -1.0 <= val <= 1.0

    def test_epe_examples(self):
        gt = np.full((16, 16), 10.0)
        assert epe_metrics(gt, gt) == (0.0, 1.0)
        assert epe_metrics(gt + 0.5, gt) == (0.5, 1.0)
        assert epe_metrics(gt + 2.0, gt) == (2.0, 0.0)


class TestSsimAdjoint:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        x = rng.uniform(0, 1, (32, 32, 3))
        y = np.clip(x + rng.normal(0, 0.1, x.shape), 0, 1)
        w = rng.uniform(0, 1, (32, 32))
        grad = ssim_adjoint(x, y, w)
        h = 1e-6
        for (i, j, c) in ((5, 7, 0), (16, 20, 1), (28, 3, 2)):
            xp = x.copy()
            xp[i, j, c] += h
            xm = x.copy()
            xm[i, j, c] -= h
            fd = (float((ssim_map(xp, y) * w[:, :, None]).sum())
                  - float((ssim_map(xm, y) * w[:, :, None]).sum())) / (2 * h)
            assert abs(grad[i, j, c] - fd) < 1e-4 * max(abs(fd), 1.0)


def _refine_setup(rng, n_side=40, img=96):
    """Small synthetic refinement problem built from a toy sheet."""
    import splatstereo.toyscene as ts
    from splatstereo.geometry.camera import ProjectionMatrix
    from splatstereo.geometry.disparity import DepthMap
    from splatstereo.gaussians.maps import GaussianParameterMaps

    rig = ts.make_toy_rig(n_cameras=3, image_size=img, span_deg=10.0)
    cloud = ts.make_toy_cloud(n_side=n_side, seed=1)
    views = ts.render_views(cloud, rig)
    intr_l, pose_l = rig.camera("cam0")
    intr_r, pose_r = rig.camera("cam2")
    proj_l = ProjectionMatrix.from_camera(intr_l, pose_l)
    proj_r = ProjectionMatrix.from_camera(intr_r, pose_r)

    maps_pair = []
    depths = []
    for intr, pose in ((intr_l, pose_l), (intr_r, pose_r)):
        depth_vals, covered = ts.render_expected_depth(cloud, pose, intr)
        depth = DepthMap(values=depth_vals, validity=covered, confidence=np.where(covered, 0.95, 0.0))
        img_arr = views["cam0" if intr is intr_l else "cam2"]
        h, w = depth_vals.shape
        maps = GaussianParameterMaps(
            color=img_arr.copy(),
            rotation=np.tile([1.0, 0, 0, 0], (h, w, 1)),
            scale=np.full((h, w, 3), 0.5 * 2.5 / intr.fx),
            opacity=np.full((h, w), 0.95),
            depth_residual=np.zeros((h, w)),
            validity=covered,
        )
        maps_pair.append(maps)
        depths.append(depth)
    held_out = [(views["cam1"], rig.camera("cam1")[1], rig.camera("cam1")[0], None)]
    return maps_pair, depths, (proj_l, proj_r), held_out


class TestRefinement:
    def test_steps_validated(self):
        rng = np.random.default_rng(12)
        maps_pair, depths, projs, held_out = _refine_setup(rng)
        with pytest.raises(InvalidInputError):
            refine_gaussian_maps(
                maps_pair[0], maps_pair[1], depths[0], depths[1], projs[0], projs[1],
                held_out, steps=0,
            )
        with pytest.raises(InvalidInputError):
            refine_gaussian_maps(
                maps_pair[0], maps_pair[1], depths[0], depths[1], projs[0], projs[1],
                [], steps=1,
            )

    def test_zero_learning_rate_is_identity(self):
        rng = np.random.default_rng(13)
        maps_pair, depths, projs, held_out = _refine_setup(rng)
        result = refine_gaussian_maps(
            maps_pair[0], maps_pair[1], depths[0], depths[1], projs[0], projs[1],
            held_out, steps=3, lr=0.0,
        )
        assert np.array_equal(result.maps_left.opacity, maps_pair[0].opacity)
        assert np.array_equal(result.maps_left.depth_residual, maps_pair[0].depth_residual)
        totals = [r.l_total for r in result.reports]
        assert max(totals) - min(totals) < 1e-12

    def test_chamfer_gradients_survive_point_budget(self, monkeypatch):
        # when clouds exceed the Chamfer budget, gradients must land on
        # the subsampled points' own map pixels (index mapping, not the
        # thinned array's positions)
        import splatstereo.losses.refine as refine_mod

        monkeypatch.setattr(refine_mod, "POINT_BUDGET", 64)
        rng = np.random.default_rng(15)
        maps_pair, depths, projs, held_out = _refine_setup(rng, n_side=24, img=64)
        result = refine_gaussian_maps(
            maps_pair[0], maps_pair[1], depths[0], depths[1], projs[0], projs[1],
            held_out, steps=2, attributes=("residual",), weights=LossWeights(alpha_cd=0.5),
        )
        assert np.all(np.isfinite(result.maps_left.depth_residual))
        assert result.reports[-1].l_cd >= 0.0

    def test_opacity_recovery_improves_loss(self):
        rng = np.random.default_rng(14)
        maps_pair, depths, projs, held_out = _refine_setup(rng)
        noise = rng.uniform(-0.3, 0.3, maps_pair[0].opacity.shape)
        maps_pair[0].opacity = np.clip(maps_pair[0].opacity + noise, 0.05, 1.0)
        result = refine_gaussian_maps(
            maps_pair[0], maps_pair[1], depths[0], depths[1], projs[0], projs[1],
            held_out, steps=25, attributes=("opacity",),
        )
        assert result.reports[-1].l_render < result.reports[0].l_render
        assert result.reports[-1].psnr > result.reports[0].psnr
        # invariants hold at every step
        result.maps_left.validate()
        result.maps_right.validate()
