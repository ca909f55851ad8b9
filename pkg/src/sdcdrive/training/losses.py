"""Task losses and the adaptive loss-weight balancer.

Eight tasks are trained jointly: segmentation, steering, throttle, brake,
waypoints, traffic light, stop sign, and speed.  All but segmentation are
plain L1; segmentation adds a soft dice term to binary cross-entropy.
The balancer keeps one positive weight per task, renormalized so the
weights always sum to the number of tasks.
"""

import numpy as np
import torch

TASKS = ("seg", "steering", "throttle", "brake", "waypoints",
         "traffic_light", "stop_sign", "speed")

BCE_EPS = 1e-7


def seg_loss(pred, gt, eps=BCE_EPS):
    """Binary cross-entropy over all pixel-channel elements plus soft dice.

    dice term = 1 - 2*sum(pred*gt) / (sum(pred) + sum(gt)), using
    probability-weighted intersection and magnitudes so it stays
    differentiable.
    """
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    p = pred.clamp(eps, 1.0 - eps)
    bce = -(gt * torch.log(p) + (1.0 - gt) * torch.log(1.0 - p)).mean()
    inter = (pred * gt).sum()
    denom = pred.sum() + gt.sum()
    dice = 1.0 - 2.0 * inter / denom.clamp_min(eps)
    return bce + dice


def task_l1(pred, gt):
    """Mean absolute error; used for every scalar task."""
    pred = torch.as_tensor(pred)
    gt = torch.as_tensor(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    return (pred - gt).abs().mean()


def waypoint_loss(pred, gt):
    """Per-waypoint mean absolute error, averaged over the three waypoints."""
    pred = torch.as_tensor(pred)
    gt = torch.as_tensor(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    # every waypoint has the same element count, so the mean over all
    # elements equals the average of the per-waypoint MAEs
    return (pred - gt).abs().mean()


def total_loss(task_losses, weights):
    """Weighted sum over the eight task losses, in TASKS order."""
    total = 0.0
    for name, w in zip(TASKS, weights):
        total = total + w * task_losses[name]
    return total


class LossBalancer:
    """Gradient-norm loss balancing.

    Each task's weighted gradient norm (measured at the last shared layer)
    is nudged toward a common target: the mean norm scaled by the task's
    relative inverse training rate raised to ``gamma``.  Weights stay
    positive and renormalize to sum to the task count after every update.
    """

    def __init__(self, n_tasks=len(TASKS), gamma=1.5, step=0.5):
        self.n_tasks = n_tasks
        self.gamma = gamma
        self.step = step
        self.weights = np.ones(n_tasks)
        self.initial_losses = None

    def record_initial(self, losses):
        self.initial_losses = np.maximum(np.asarray(losses, dtype=float), 1e-12)

    def loss_ratios(self, losses):
        if self.initial_losses is None:
            return np.ones(self.n_tasks)
        ratios = np.asarray(losses, dtype=float) / self.initial_losses
        # tasks that started solved stay pinned at ratio 1
        ratios[self.initial_losses <= 1e-12] = 1.0
        return ratios

    def update(self, grad_norms, loss_ratios):
        grad_norms = np.asarray(grad_norms, dtype=float)
        loss_ratios = np.maximum(np.asarray(loss_ratios, dtype=float), 1e-12)
        if np.any(grad_norms < 0):
            raise ValueError("gradient norms must be non-negative")
        weighted = self.weights * np.maximum(grad_norms, 1e-12)
        inv_rate = loss_ratios / loss_ratios.mean()
        target = weighted.mean() * inv_rate**self.gamma
        self.weights = self.weights * (target / weighted) ** self.step
        self.weights = self.weights / self.weights.sum() * self.n_tasks
        return self.weights.copy()
