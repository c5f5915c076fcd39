import numpy as np
import pytest

from splatstereo.render.rasterizer import warmup


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # force numba JIT/cache loading outside the timed tests
    warmup()


@pytest.fixture(scope="session")
def toy_scene():
    """Shared synthetic scene: known cloud, rig, float truth renders."""
    from splatstereo.toyscene import make_toy_cloud, make_toy_rig, render_views

    rig = make_toy_rig(n_cameras=3, image_size=256, span_deg=10.0)
    cloud = make_toy_cloud(n_side=256, seed=0)
    views = render_views(cloud, rig)
    return {"rig": rig, "cloud": cloud, "views": views}


@pytest.fixture(scope="session")
def toy_dataset_dir(tmp_path_factory):
    from splatstereo.toyscene import make_toy_dataset

    root = tmp_path_factory.mktemp("toyds")
    make_toy_dataset(root, n_cameras=3, image_size=256, n_frames=2, seed=0)
    return root


def random_cloud(rng, n, img_scale=2.5):
    from splatstereo.gaussians.cloud import GaussianCloud
    from splatstereo.render.covariance import normalize_quaternions

    return GaussianCloud(
        positions=np.stack(
            [rng.uniform(-0.5, 0.5, n), rng.uniform(-0.5, 0.5, n), rng.uniform(1.5, 3.5, n)], axis=1
        ),
        colors=rng.uniform(0, 1, (n, 3)),
        rotations=normalize_quaternions(rng.normal(size=(n, 4))),
        scales=rng.uniform(0.01, 0.15, (n, 3)),
        opacities=rng.uniform(0.05, 1.0, n),
    )
