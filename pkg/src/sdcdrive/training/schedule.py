"""Optimizer factory and the plateau-driven learning-rate schedule.

lr starts at 1e-4 and halves whenever the validation metric fails to
improve for three consecutive epochs; training stops after fifteen flat
epochs or at epoch forty.
"""

import torch


def make_optimizer(params, lr=1e-4, weight_decay=1e-3):
    """Adam with decoupled weight decay."""
    return torch.optim.AdamW(params, lr=lr, weight_decay=weight_decay)


class TrainingSchedule:
    def __init__(self, initial_lr=1e-4, halve_patience=3, stop_patience=15,
                 max_epochs=40, min_delta=0.0):
        self.lr = initial_lr
        self.halve_patience = halve_patience
        self.stop_patience = stop_patience
        self.max_epochs = max_epochs
        self.min_delta = min_delta
        self.best = None
        self.epochs_since_halve = 0
        self.epochs_since_best = 0
        self.epoch = 0

    def update(self, val_metric):
        """Record one epoch's validation metric; returns (lr, stop)."""
        self.epoch += 1
        if self.best is None or val_metric < self.best - self.min_delta:
            self.best = val_metric
            self.epochs_since_best = 0
            self.epochs_since_halve = 0
        else:
            self.epochs_since_best += 1
            self.epochs_since_halve += 1
        if self.epochs_since_halve >= self.halve_patience:
            self.lr /= 2.0
            self.epochs_since_halve = 0
        stop = (self.epochs_since_best >= self.stop_patience
                or self.epoch >= self.max_epochs)
        return self.lr, stop
