"""Multi-camera RGB-D driving stack.

Subpackages:
    geometry    depth codec, coordinate transforms, semantic BEV grid assembly
    perception  CvT-style RGB encoder, segmentation decoder, BEV feature encoder
    control     feature fusion, GRU waypoint/control branches, PID controllers
    training    losses, gradient-norm loss balancing, synthetic data, train loop
    evaluation  closed-loop toy simulator, expert policy, driving-score metrics
"""

__version__ = "0.1.0"
