"""splatstereo: feed-forward novel-view synthesis from calibrated sparse views.

A calibrated camera pair is rectified, matched with a multi-scale stereo
pipeline, lifted to a per-pixel 3D Gaussian cloud and splatted to arbitrary
viewpoints in real time, with a differentiable renderer backing per-pair
refinement.
"""

__version__ = "0.1.0"
