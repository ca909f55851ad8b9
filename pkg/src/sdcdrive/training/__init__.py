from .losses import (
    TASKS,
    LossBalancer,
    seg_loss,
    task_l1,
    total_loss,
    waypoint_loss,
)
from .schedule import TrainingSchedule, make_optimizer
from .synthetic import (
    SCENARIOS,
    generate_synthetic_sample,
    load_sample,
    save_sample,
    make_dataset,
)
from .loop import TrainSettings, train_loop

__all__ = [
    "TASKS",
    "LossBalancer",
    "seg_loss",
    "task_l1",
    "total_loss",
    "waypoint_loss",
    "TrainingSchedule",
    "make_optimizer",
    "SCENARIOS",
    "generate_synthetic_sample",
    "load_sample",
    "save_sample",
    "make_dataset",
    "TrainSettings",
    "train_loop",
]
