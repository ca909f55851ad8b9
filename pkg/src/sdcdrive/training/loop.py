"""Training loop: batching, the eight-task loss, per-epoch loss-weight
balancing, plateau scheduling, and checkpointing."""

import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from ..config import get_preset
from ..control import MeasurementVector
from ..geometry import decode_depth
from ..model import DrivingModel, build_sdc_from_composites, save_checkpoint
from .losses import TASKS, LossBalancer, seg_loss, task_l1, total_loss, waypoint_loss
from .schedule import TrainingSchedule, make_optimizer
from .synthetic import load_dataset


@dataclass
class TrainSettings:
    scale: str = "toy"
    data_dir: str = None
    samples: list = None          # in-memory alternative to data_dir
    out_dir: str = None
    epochs: int = 5
    batch_size: int = 20
    lr: float = 1e-4
    weight_decay: float = 1e-3
    seed: int = 0
    max_steps: int = None
    val_fraction: float = 0.2
    use_mgn: bool = True
    mgn_gamma: float = 1.5
    mgn_step: float = 0.5
    no_cvt: bool = False
    no_vc: bool = False
    no_sdc_sides: bool = False


def sample_to_tensors(sample, no_sdc_sides=False):
    """Model inputs and targets for one sample; the BEV grid is built from
    the stored exact depth and segmentation."""
    rgb = torch.from_numpy(
        np.ascontiguousarray(sample["rgb"], dtype=np.float32).transpose(2, 0, 1) / 255.0)
    depth_m = decode_depth(sample["depth"])
    sdc = build_sdc_from_composites(depth_m, sample["seg"].astype(np.float64),
                                    no_sdc_sides=no_sdc_sides)
    return {
        "rgb": rgb,
        "sdc": torch.from_numpy(sdc.grid.astype(np.float32)),
        "seg": torch.from_numpy(sample["seg"].astype(np.float32)),
        "meas": MeasurementVector(sample["speed"], sample["command"],
                                  sample["route_point"]).to_tensor(),
        "route_point": torch.tensor(sample["route_point"], dtype=torch.float32),
        "waypoints": torch.tensor(np.asarray(sample["waypoints"]), dtype=torch.float32),
        "steering": torch.tensor(sample["steering"], dtype=torch.float32),
        "throttle": torch.tensor(sample["throttle"], dtype=torch.float32),
        "brake": torch.tensor(sample["brake"], dtype=torch.float32),
        "traffic_light": torch.tensor(sample["traffic_light"], dtype=torch.float32),
        "stop_sign": torch.tensor(sample["stop_sign"], dtype=torch.float32),
        "speed": torch.tensor(sample["speed"], dtype=torch.float32),
    }


def collate(items):
    keys = items[0].keys()
    return {k: torch.stack([it[k] for it in items]) for k in keys}


def compute_task_losses(out, batch):
    """The eight task losses, keyed per TASKS."""
    return {
        "seg": seg_loss(out["seg"], batch["seg"]),
        "steering": task_l1(out["steering"], batch["steering"]),
        "throttle": task_l1(out["throttle"], batch["throttle"]),
        "brake": task_l1(out["brake"], batch["brake"]),
        "waypoints": waypoint_loss(out["waypoints"], batch["waypoints"]),
        "traffic_light": task_l1(out["traffic_light"], batch["traffic_light"]),
        "stop_sign": task_l1(out["stop_sign"], batch["stop_sign"]),
        "speed": task_l1(out["speed"], batch["speed"]),
    }


def shared_parameter(model):
    """Last RGB-backbone parameter every task's gradient flows through."""
    enc = model.perception.rgb_encoder
    if model.config.no_cvt:
        return enc.head[0].weight
    return enc.stages[-1]["blocks"][-1].out_proj.weight


def _grad_norms(model, losses):
    param = shared_parameter(model)
    norms = []
    for name in TASKS:
        (g,) = torch.autograd.grad(losses[name], param, retain_graph=True,
                                   allow_unused=True)
        norms.append(0.0 if g is None else float(g.norm()))
    return np.array(norms)


def _forward(model, batch):
    return model(batch["rgb"], batch["sdc"], batch["meas"], batch["route_point"])


def train_loop(settings: TrainSettings):
    """Train a model per the settings; returns (model, metrics_log).

    Deterministic for a fixed seed: batching order, initialization and the
    metric log are all reproducible bit for bit on one device.
    """
    torch.manual_seed(settings.seed)
    np.random.seed(settings.seed)

    config = get_preset(settings.scale, no_cvt=settings.no_cvt,
                        no_vc=settings.no_vc, no_sdc_sides=settings.no_sdc_sides)
    model = DrivingModel(config)

    if settings.samples is not None:
        samples = settings.samples
    elif settings.data_dir:
        samples = load_dataset(settings.data_dir)
    else:
        raise FileNotFoundError("train_loop needs data_dir or in-memory samples")
    tensors = [sample_to_tensors(s, settings.no_sdc_sides) for s in samples]

    n_val = max(1, int(round(len(tensors) * settings.val_fraction))) \
        if len(tensors) > 2 else 0
    train_set = tensors[: len(tensors) - n_val] if n_val else tensors
    val_set = tensors[len(tensors) - n_val:] if n_val else tensors

    optimizer = make_optimizer(model.parameters(), lr=settings.lr,
                               weight_decay=settings.weight_decay)
    schedule = TrainingSchedule(initial_lr=settings.lr,
                                max_epochs=settings.epochs)
    balancer = LossBalancer(gamma=settings.mgn_gamma, step=settings.mgn_step)

    metrics_log = []
    best_val = None
    step = 0
    rng = np.random.default_rng(settings.seed)

    for epoch in range(settings.epochs):
        model.train()
        order = rng.permutation(len(train_set))
        epoch_losses = []
        for start in range(0, len(order), settings.batch_size):
            batch = collate([train_set[i] for i in order[start:start + settings.batch_size]])
            out = _forward(model, batch)
            losses = compute_task_losses(out, batch)
            loss = total_loss(losses, balancer.weights)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
            step += 1
            if settings.max_steps and step >= settings.max_steps:
                break

        # per-epoch weight balancing on a fresh forward pass
        probe = collate(train_set[: min(settings.batch_size, len(train_set))])
        probe_losses = compute_task_losses(_forward(model, probe), probe)
        loss_values = np.array([float(probe_losses[t].detach()) for t in TASKS])
        if balancer.initial_losses is None:
            balancer.record_initial(loss_values)
        if settings.use_mgn:
            norms = _grad_norms(model, probe_losses)
            balancer.update(norms, balancer.loss_ratios(loss_values))
        del probe_losses

        model.eval()
        with torch.no_grad():
            val_batch = collate(val_set)
            val_losses = compute_task_losses(_forward(model, val_batch), val_batch)
            val_total = float(total_loss(val_losses, balancer.weights))

        lr, stop = schedule.update(val_total)
        for group in optimizer.param_groups:
            group["lr"] = lr
        metrics_log.append({
            "epoch": epoch,
            "lr": lr,
            "train_loss": float(np.mean(epoch_losses)),
            "val_loss": val_total,
            "task_losses": {t: float(val_losses[t]) for t in TASKS},
            "loss_weights": balancer.weights.tolist(),
        })
        if settings.out_dir and (best_val is None or val_total < best_val):
            best_val = val_total
            os.makedirs(settings.out_dir, exist_ok=True)
            save_checkpoint(os.path.join(settings.out_dir, "best.ckpt"), model,
                            extra={"epoch": epoch, "val_loss": val_total})
        if stop or (settings.max_steps and step >= settings.max_steps):
            break

    if settings.out_dir:
        os.makedirs(settings.out_dir, exist_ok=True)
        with open(os.path.join(settings.out_dir, "metrics.json"), "w") as f:
            json.dump(metrics_log, f, indent=2, sort_keys=True)
        save_checkpoint(os.path.join(settings.out_dir, "last.ckpt"), model,
                        extra={"epoch": len(metrics_log) - 1})
    return model, metrics_log
