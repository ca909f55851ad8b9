"""Release acceptance criteria.

Thirteen independent checks, one test per criterion; each prints a PASS
line on success (visible with ``pytest -s`` or in verbose test listings).
They intentionally re-verify behavior the unit suites cover, at the
sample counts and tolerances the release gate requires.
"""

import json
import math
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest
import torch

import oracles
from sdcdrive.cli import main as cli_main
from sdcdrive.config import paper_scale, toy_scale
from sdcdrive.control import (
    ControlCommand,
    ControlModule,
    MeasurementVector,
    THROTTLE_MAX,
    control_arbitration,
)
from sdcdrive.evaluation import (
    ExpertAgent,
    InfractionEvent,
    RouteResult,
    driving_score,
    infraction_penalty,
    run_closed_loop,
)
from sdcdrive.geometry import (
    CameraSpec,
    GridSpec,
    SIDE_ROTATION_DEG,
    VehiclePose,
    build_camera_sdc,
    decode_depth,
    encode_depth,
    global_to_local,
    local_to_global,
    merge_sdc,
)
from sdcdrive.model import DrivingModel, load_checkpoint
from sdcdrive.perception import GridEncoder
from sdcdrive.training.loop import compute_task_losses, make_optimizer
from sdcdrive.training.losses import LossBalancer, TASKS, seg_loss, total_loss
from sdcdrive.training.synthetic import generate_synthetic_sample
from sdcdrive.world import Scene, labels_to_onehot

pytestmark = pytest.mark.acceptance


@contextmanager
def criterion(number, name):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\n[criterion {number:2d}] {name}: FAIL")
        raise
    print(f"\n[criterion {number:2d}] {name}: PASS "
          f"({time.perf_counter() - start:.1f}s)")


def test_criterion_01_depth_codec():
    with criterion(1, "depth codec exact against closed form"):
        start = time.perf_counter()
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(100, 100, 3), dtype=np.uint8)
        got = decode_depth(img)
        r = img[..., 0].astype(np.float64)
        g = img[..., 1].astype(np.float64)
        b = img[..., 2].astype(np.float64)
        closed_form = (256.0 * 256.0 * b + 256.0 * g + r) / (256.0**3 - 1) * 1000.0
        np.testing.assert_array_equal(got, closed_form)

        depth = rng.uniform(0.0, 1000.0, size=(100, 100))
        err = np.abs(decode_depth(encode_depth(depth)) - depth)
        assert err.max() < 1000.0 / (256**3 - 1)
        assert time.perf_counter() - start < 5.0


def test_criterion_02_geometry_oracle():
    with criterion(2, "BEV projection and merge match brute-force oracle"):
        start = time.perf_counter()
        rng = np.random.default_rng(1)
        grid = GridSpec(8, 8, 1.0, 1.0)
        merged = GridSpec(8, 16, 1.0, 1.0)
        cam = CameraSpec(0.0, 8, 8, horizontal_fov_deg=90.0)
        for _ in range(200):
            depth = rng.uniform(0, 10, size=(8, 8))
            depth[rng.random((8, 8)) < 0.3] = 0.0
            seg = rng.random((4, 8, 8))
            got = build_camera_sdc(depth, seg, cam, grid, n_classes=4)
            want = oracles.project_oracle(depth, seg, cam.focal_px(),
                                          8, 8, 1.0, 1.0)
            np.testing.assert_array_equal(got, want)

            def random_grid(cols):
                labels = rng.integers(0, 4, size=(8, cols))
                mask = rng.random((8, cols)) < 0.25
                g = np.zeros((4, 8, cols), dtype=np.uint8)
                ri, ci = np.nonzero(mask)
                g[labels[ri, ci], ri, ci] = 1
                return g

            f, l, r = random_grid(8), random_grid(6), random_grid(6)
            got = merge_sdc(f, l, r, merged).grid
            want = oracles.merge_oracle(f, l, r, 8, 16, 1.0, 1.0,
                                        SIDE_ROTATION_DEG)
            np.testing.assert_array_equal(got, want)
        assert time.perf_counter() - start < 30.0


def test_criterion_03_coordinate_transform():
    with criterion(3, "local-frame transform isometry and round trip"):
        rng = np.random.default_rng(2)
        pts = rng.uniform(-1000, 1000, size=(10_000, 2))
        poses = rng.uniform(-1000, 1000, size=(10_000, 2))
        thetas = rng.uniform(-720, 720, size=10_000)
        for (x, y), (px, py), th in zip(pts, poses, thetas):
            pose = VehiclePose(px, py, th)
            lx, ly = global_to_local((x, y), pose)
            gx, gy = local_to_global((lx, ly), pose)
            assert abs(gx - x) < 1e-9 and abs(gy - y) < 1e-9
            # rigid transform: distance to the pose origin is preserved
            assert abs(math.hypot(lx, ly) - math.hypot(x - px, y - py)) < 1e-9

        assert global_to_local((3, 4), VehiclePose(0, 0, -90)) == \
            pytest.approx((3, 4), abs=1e-12)
        assert global_to_local((1, 0), VehiclePose(0, 0, 0)) == \
            pytest.approx((0, -1), abs=1e-12)
        pose = VehiclePose(7.5, -2.25, 33.0)
        assert global_to_local((pose.x, pose.y), pose) == \
            pytest.approx((0, 0), abs=1e-12)


def test_criterion_04_paper_scale_shape_contract():
    with criterion(4, "paper-scale forward pass shape contract"):
        torch.manual_seed(0)
        model = DrivingModel(paper_scale()).eval()
        rgb = torch.rand(1, 3, 160, 768)
        sdc = (torch.rand(1, 23, 160, 768) < 0.05).float()
        meas = MeasurementVector(3.0, "follow", (0.5, -12.0)).to_tensor()[None]
        route = torch.tensor([[0.5, -12.0]])
        with torch.no_grad():
            out = model(rgb, sdc, meas, route)
        assert out["rgb_features"].shape == (1, 384, 10, 48)
        assert out["sdc_features"].shape == (1, 192, 10, 48)
        assert out["seg"].shape == (1, 23, 160, 768)
        assert out["waypoints"].shape == (1, 3, 2)
        assert -1.0 <= float(out["steering"]) <= 1.0
        assert 0.0 <= float(out["throttle"]) <= THROTTLE_MAX
        assert 0.0 <= float(out["brake"]) <= 1.0


def _toy_double_setup(h=32, w=64):
    torch.manual_seed(3)
    model = DrivingModel(toy_scale()).double().eval()
    g = torch.Generator().manual_seed(4)
    batch = {
        "seg": (torch.rand(1, 23, h, w, generator=g) > 0.9).double(),
        "steering": torch.rand(1, generator=g, dtype=torch.float64) * 2 - 1,
        "throttle": torch.rand(1, generator=g, dtype=torch.float64) * 0.75,
        "brake": torch.rand(1, generator=g, dtype=torch.float64),
        "waypoints": torch.randn(1, 3, 2, generator=g, dtype=torch.float64),
        "traffic_light": torch.rand(1, generator=g, dtype=torch.float64),
        "stop_sign": torch.rand(1, generator=g, dtype=torch.float64),
        "speed": torch.rand(1, generator=g, dtype=torch.float64) * 4,
    }
    inputs = (
        torch.rand(1, 3, h, w, generator=g, dtype=torch.float64),
        (torch.rand(1, 23, h, w, generator=g) > 0.9).double(),
        torch.rand(1, 9, generator=g, dtype=torch.float64),
        torch.randn(1, 2, generator=g, dtype=torch.float64),
    )

    def loss_fn():
        out = model(*inputs)
        return total_loss(compute_task_losses(out, batch), np.ones(len(TASKS)))

    return model, loss_fn


def test_criterion_05_gradient_check():
    with criterion(5, "analytic gradients match central finite differences"):
        start = time.perf_counter()
        model, loss_fn = _toy_double_setup()
        loss = loss_fn()
        model.zero_grad()
        loss.backward()

        entries = []
        for param in model.parameters():
            if param.grad is None:
                continue
            flat = param.grad.detach().reshape(-1)
            # skip near-zero gradients where FD round-off dominates
            for idx in torch.nonzero(flat.abs() > 1e-4).reshape(-1)[:2]:
                entries.append((param, int(idx), float(flat[idx])))
        rng = np.random.default_rng(5)
        picks = rng.choice(len(entries), size=32, replace=False)

        h = 1e-6
        for k in picks:
            param, idx, analytic = entries[k]
            with torch.no_grad():
                orig = float(param.reshape(-1)[idx])
                param.reshape(-1)[idx] = orig + h
                up = float(loss_fn())
                param.reshape(-1)[idx] = orig - h
                down = float(loss_fn())
                param.reshape(-1)[idx] = orig
            fd = (up - down) / (2 * h)
            rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-8)
            assert rel < 1e-4, f"gradient mismatch: {analytic} vs {fd}"
        assert time.perf_counter() - start < 120.0


def test_criterion_06_loss_identities():
    with criterion(6, "segmentation loss identities and total-loss linearity"):
        gt = (torch.rand(2, 4, 8, 8) > 0.5).double()
        assert float(seg_loss(gt, gt)) < 1e-5

        pred = torch.full((2, 2), 0.5, dtype=torch.float64)
        target = torch.ones(2, 2, dtype=torch.float64)
        assert float(seg_loss(pred, target)) == \
            pytest.approx(math.log(2.0) + 1.0 / 3.0, abs=1e-3)

        rng = np.random.default_rng(6)
        losses = {t: torch.tensor(rng.uniform(0.1, 2.0), dtype=torch.float64)
                  for t in TASKS}
        w1 = rng.uniform(0.1, 2.0, len(TASKS))
        w2 = rng.uniform(0.1, 2.0, len(TASKS))
        lhs = float(total_loss(losses, w1 + w2))
        rhs = float(total_loss(losses, w1)) + float(total_loss(losses, w2))
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_criterion_07_loss_balancer():
    with criterion(7, "adaptive weights converge under 3x norm imbalance"):
        balancer = LossBalancer()
        # two effective tasks: the first has 3x the gradient norm
        norms = np.array([3.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
        ratios = np.ones(8)
        spread = np.inf
        for _ in range(50):
            w = balancer.update(norms, ratios)
            assert w.sum() == pytest.approx(8.0, abs=1e-9)
            assert (w > 0).all()
            weighted = w * norms
            new_spread = weighted.max() / weighted.min()
            assert new_spread <= spread + 1e-12
            spread = new_spread
        assert spread == pytest.approx(1.0, abs=1e-6)


def _downscaled_tensors(sample):
    """Half-resolution training tensors for one synthetic sample."""
    from sdcdrive.model import build_sdc_from_composites

    rgb = np.ascontiguousarray(sample["rgb"][::2, ::2], dtype=np.float32)
    seg = labels_to_onehot(sample["seg_labels"][::2, ::2].astype(np.int64))
    depth_m = decode_depth(sample["depth"])
    sdc = build_sdc_from_composites(depth_m, sample["seg"].astype(np.float64))
    grid = sdc.grid.reshape(23, 80, 2, 384, 2).max(axis=(2, 4))
    return {
        "rgb": torch.from_numpy(rgb.transpose(2, 0, 1) / 255.0),
        "sdc": torch.from_numpy(grid.astype(np.float32)),
        "seg": torch.from_numpy(seg.astype(np.float32)),
        "meas": MeasurementVector(sample["speed"], sample["command"],
                                  sample["route_point"]).to_tensor(),
        "route_point": torch.tensor(sample["route_point"], dtype=torch.float32),
        "waypoints": torch.tensor(np.asarray(sample["waypoints"]),
                                  dtype=torch.float32),
        "steering": torch.tensor(sample["steering"], dtype=torch.float32),
        "throttle": torch.tensor(sample["throttle"], dtype=torch.float32),
        "brake": torch.tensor(sample["brake"], dtype=torch.float32),
        "traffic_light": torch.tensor(sample["traffic_light"],
                                      dtype=torch.float32),
        "stop_sign": torch.tensor(sample["stop_sign"], dtype=torch.float32),
        "speed": torch.tensor(sample["speed"], dtype=torch.float32),
    }


def test_criterion_08_overfit_oracle():
    with criterion(8, "toy model overfits ten samples"):
        start = time.perf_counter()
        torch.manual_seed(7)
        samples = [generate_synthetic_sample(i, ["straight", "turn"][i % 2])
                   for i in range(10)]
        items = [_downscaled_tensors(s) for s in samples]
        batch = {k: torch.stack([it[k] for it in items]) for k in items[0]}

        model = DrivingModel(toy_scale()).train()
        opt = make_optimizer(model.parameters(), lr=2e-3, weight_decay=0.0)
        weights = np.ones(len(TASKS))

        initial = None
        final = bce = wp_mae = None
        for step in range(300):
            out = model(batch["rgb"], batch["sdc"], batch["meas"],
                        batch["route_point"])
            losses = compute_task_losses(out, batch)
            loss = total_loss(losses, weights)
            if initial is None:
                initial = float(loss.detach())
            opt.zero_grad()
            loss.backward()
            opt.step()

            final = float(loss.detach())
            with torch.no_grad():
                p = out["seg"].clamp(1e-7, 1 - 1e-7)
                bce = float(-(batch["seg"] * p.log()
                              + (1 - batch["seg"]) * (1 - p).log()).mean())
                wp_mae = float((out["waypoints"] - batch["waypoints"])
                               .abs().mean())
            if final <= 0.1 * initial and bce < 0.05 and wp_mae < 0.1:
                break

        assert final <= 0.1 * initial, f"loss only fell {initial} -> {final}"
        assert bce < 0.05, f"segmentation BCE {bce}"
        assert wp_mae < 0.1, f"waypoint MAE {wp_mae}"
        assert time.perf_counter() - start < 600.0


def test_criterion_09_expert_closed_loop():
    with criterion(9, "expert completes a straight 100 m route cleanly"):
        scene = Scene(route=np.array([[0.0, 0.0], [100.0, 0.0]]))
        result, trace = run_closed_loop(ExpertAgent(), scene, dt=0.05)
        assert result.termination == "finished"
        assert result.rc == 1.0 and result.ip == 1.0 and result.ds == 1.0
        late = [s["speed"] for s in trace["steps"] if s["t"] >= 10.0]
        assert late, "route finished before the 10 s settling check"
        assert all(abs(v - 4.0) <= 0.2 for v in late)


def test_criterion_10_metric_hand_checks():
    with criterion(10, "driving-score arithmetic reproduces hand values"):
        results = [RouteResult(0.8, 1.0), RouteResult(0.6, 0.5)]
        assert driving_score(results) == pytest.approx(0.55, abs=1e-12)
        events = [InfractionEvent("red_light", (0, 0), 0.0),
                  InfractionEvent("collision_vehicle", (0, 0), 0.0)]
        assert infraction_penalty(events) == pytest.approx(0.42, abs=1e-12)
        assert RouteResult(99.919, 1.00).ds == pytest.approx(99.919, abs=1e-12)


def test_criterion_11_control_invariants():
    with criterion(11, "control ranges hold under 1000 random inits"):
        cfg = toy_scale()
        g = torch.Generator().manual_seed(8)
        rgb = torch.randn(1, cfg.rgb_feature_channels, 2, 4, generator=g)
        sdc = torch.randn(1, cfg.sdc_out_channels, 2, 4, generator=g)
        meas = torch.randn(1, 9, generator=g)
        route = torch.randn(1, 2, generator=g)
        for seed in range(1000):
            torch.manual_seed(seed)
            module = ControlModule(cfg).eval()
            with torch.no_grad():
                out = module(rgb, sdc, meas, route)
            steering = float(out["steering"])
            throttle = float(out["throttle"])
            brake = int(float(out["brake"]) >= 0.5)
            assert -1.0 <= steering <= 1.0
            assert 0.0 <= throttle <= THROTTLE_MAX
            assert brake in (0, 1)

        mlp = ControlCommand(0.25, 0.5, 0)
        pid = ControlCommand(-0.75, 0.1, 1)
        assert control_arbitration(mlp, pid, beta=1.0) == mlp
        assert control_arbitration(mlp, pid, beta=0.0) == pid


def test_criterion_12_determinism(tmp_path):
    with criterion(12, "train and simulate logs are bit-identical per seed"):
        data = str(tmp_path / "data")
        cli_main(["gen-data", "--scenario", "straight", "--count", "4",
                  "--seed", "0", "--out", data])
        logs = []
        for run in ("a", "b"):
            out = str(tmp_path / f"train_{run}")
            cli_main(["train", "--config", "toy", "--data", data, "--out", out,
                      "--epochs", "1", "--batch-size", "2", "--seed", "11"])
            with open(os.path.join(out, "metrics.json"), "rb") as f:
                logs.append(f.read())
        assert logs[0] == logs[1]

        route = str(tmp_path / "route.json")
        with open(route, "w") as f:
            json.dump({"scenario": "lead_vehicle", "seed": 2}, f)
        traces = []
        for run in ("a", "b"):
            log_dir = str(tmp_path / f"sim_{run}")
            cli_main(["simulate", "--route", route, "--agent", "expert",
                      "--seed", "11", "--log", log_dir])
            with open(os.path.join(log_dir, "route.json"), "rb") as f:
                traces.append(f.read())
        assert traces[0] == traces[1]


@pytest.mark.parametrize("flag", ["--no-sdc-sides", "--no-cvt", "--no-vc"])
def test_criterion_13_ablation_flags(tmp_path, flag, capsys):
    with criterion(13, f"ablation {flag} trains and evaluates"):
        data = str(tmp_path / "data")
        cli_main(["gen-data", "--scenario", "straight", "--count", "2",
                  "--seed", "3", "--out", data])
        out = str(tmp_path / "run")
        cli_main(["train", "--config", "toy", "--data", data, "--out", out,
                  "--epochs", "1", "--batch-size", "2", flag])
        ckpt = os.path.join(out, "last.ckpt")
        model, _ = load_checkpoint(ckpt)
        if flag == "--no-cvt":
            assert isinstance(model.perception.rgb_encoder, GridEncoder)
        elif flag == "--no-vc":
            assert model.control.dynamic_branch is None
        else:
            assert model.config.no_sdc_sides is True
        capsys.readouterr()  # drain gen-data/train progress lines
        cli_main(["eval", "--data", data, "--ckpt", ckpt])
        report = json.loads(capsys.readouterr().out)
        assert set(report) == {"acc_tl", "mae_sp", "bce_seg", "mae_wp",
                               "mae_st", "mae_th", "mae_br"}
