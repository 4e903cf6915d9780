"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured values.

Full-benchmark absolute numbers are out of reach on a desk machine (they
need the original datasets and a pretrained backbone), so the bar here is
property-based plus directional synthetic reproductions: exact geometry
and optimization contracts, plus an end-to-end run on oracle-labeled
synthetic scenes where only orderings and floors are asserted.

Run with: pytest tests/test_acceptance.py -v -s
"""

import os
import time

import numpy as np
import pytest
import torch

from viewscout.boxes import (
    UNIT_BOX,
    Box,
    Orientation,
    derive_view,
    from_frame,
    iou,
    to_frame,
)
from viewscout.advisor import ViewAdvisor
from viewscout.data.loader import SceneDataset
from viewscout.data.records import load_scenes, unbounded_fraction
from viewscout.data.sampling import sample_init_view
from viewscout.data.synthetic import build_synthetic_dataset, make_synthetic_scene
from viewscout.metrics import acc_k_n, compute_metrics, mean_iou_to_oracle, predict_scenes
from viewscout.model.network import CompositionNet, ModelConfig, TokenGrid
from viewscout.training.ema import EmaTeacher, ema_update
from viewscout.training.losses import (
    LossWeights,
    comp_loss,
    extra_loss,
    giou_pairs,
    make_soft_labels,
    match,
    quality_focal,
)
from viewscout.training.loop import TrainConfig, train

from oracles import brute_force_assignment, central_difference_grad, raster_iou, relative_grad_error

torch.set_num_threads(1)

# end-to-end protocol sizes
N_TRAIN = 2000
N_EVAL = 200
N_TRAJ = 100
# training budget: 30 minutes on 8 cores; on narrower machines the wall
# clock scales by the missing parallelism (same compute envelope)
REFERENCE_CORES = 8
TRAIN_BUDGET_SECONDS = 1800.0 * REFERENCE_CORES / min(os.cpu_count() or 1, REFERENCE_CORES)

ACCEPT_TRAIN = dict(
    epochs=14,
    lr_drop_epoch=9,
    label_switch_epoch=9,
    seed=0,
    eval_scenes=0,
)


def report(name: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# shared artifacts


@pytest.fixture(scope="session")
def accept_data(tmp_path_factory):
    base = tmp_path_factory.mktemp("accept_data")
    train_dir = base / "train"
    eval_dir = base / "eval"
    build_synthetic_dataset(N_TRAIN, seed=10_000, out_dir=train_dir)
    build_synthetic_dataset(N_EVAL, seed=20_000, out_dir=eval_dir)
    return {
        "train_dir": train_dir,
        "eval_dir": eval_dir,
        "train": load_scenes(train_dir / "scenes.jsonl"),
        "eval": load_scenes(eval_dir / "scenes.jsonl"),
    }


@pytest.fixture(scope="session")
def trained(accept_data):
    """Train the desk-scale model twice: with and without extrapolation."""
    out = {}
    for name, fem in (("fem", True), ("nofem", False)):
        cfg = TrainConfig(enable_fem=fem, **ACCEPT_TRAIN)
        t0 = time.perf_counter()
        model, history = train(cfg, accept_data["train"], accept_data["train_dir"],
                               eval_scenes=[], progress=True)
        seconds = time.perf_counter() - t0
        preds = predict_scenes(model, accept_data["eval"], accept_data["eval_dir"])
        out[name] = {
            "model": model,
            "history": history,
            "seconds": seconds,
            "eval_preds": preds,
        }
        print(f"[acceptance] trained {name} in {seconds:.0f}s", flush=True)
    return out


def _oracle_init_frame(scene) -> Box:
    return to_frame(scene.oracle.crop, scene.init_view_normalized())


def _out_of_border(scene) -> bool:
    x1, y1, x2, y2 = _oracle_init_frame(scene).corners
    return x1 < 0 or y1 < 0 or x2 > 1 or y2 > 1


# ---------------------------------------------------------------------------
# 1. geometry suite


class TestGeometrySuite:
    def test_derive_view_properties_10k(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(42)
        failures = 0
        for _ in range(10_000):
            crop = Box(rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5),
                       rng.uniform(0.01, 2.0), rng.uniform(0.01, 2.0))
            orientation = Orientation.LANDSCAPE if rng.random() < 0.5 else Orientation.PORTRAIT
            v = derive_view(crop, orientation)
            ratio_err = abs(v.w * 3 - v.h * 4) if orientation is Orientation.LANDSCAPE \
                else abs(v.w * 4 - v.h * 3)
            # minimality is among ratio-preserving views: shrinking either
            # side (the other follows the ratio) must lose the crop
            ratio = orientation.ratio
            shrunk_w = Box(v.x, v.y, v.w - 1e-6, (v.w - 1e-6) / ratio)
            shrunk_h = Box(v.x, v.y, (v.h - 1e-6) * ratio, v.h - 1e-6)
            ok = (
                ratio_err < 1e-9
                and v.x == crop.x and v.y == crop.y
                and v.contains(crop, tol=1e-12)
                and not shrunk_w.contains(crop, tol=0.0)
                and not shrunk_h.contains(crop, tol=0.0)
            )
            failures += 0 if ok else 1
        dt = time.perf_counter() - t0
        report("geometry/derive-view", failures == 0 and dt < 30,
               f"0 required, {failures} failures over 10^4 crops, {dt:.1f}s")

    def test_iou_matches_raster_oracle_1000_pairs(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(43)
        worst = 0.0
        for _ in range(1000):
            a = Box(rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5),
                    rng.uniform(0.05, 2.0), rng.uniform(0.05, 2.0))
            b = Box(rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5),
                    rng.uniform(0.05, 2.0), rng.uniform(0.05, 2.0))
            worst = max(worst, abs(iou(a, b) - raster_iou(a, b)))
        dt = time.perf_counter() - t0
        report("geometry/iou-raster", worst <= 1e-3 and dt < 30,
               f"max |analytic - raster| = {worst:.2e} over 1000 pairs, {dt:.1f}s")


# ---------------------------------------------------------------------------
# 2. matching oracle


class TestMatchingOracle:
    def test_hungarian_equals_brute_force_1000(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(44)
        weights = LossWeights()
        worst_gap = 0.0
        for _ in range(1000):
            n = int(rng.integers(1, 8))
            m = int(rng.integers(1, 8))
            boxes = torch.tensor(np.column_stack([
                rng.uniform(-0.3, 1.3, (n, 2)), rng.uniform(0.1, 1.5, (n, 2)),
            ]), dtype=torch.float64)
            conf = torch.tensor(rng.uniform(0, 1, n), dtype=torch.float64)
            gts = torch.tensor(np.column_stack([
                rng.uniform(-0.3, 1.3, (m, 2)), rng.uniform(0.1, 1.5, (m, 2)),
            ]), dtype=torch.float64)
            assignment = match(boxes, conf, gts, weights)
            cost = (torch.cdist(boxes, gts, p=1) / 4.0
                    + weights.lambda_iou * (1 - giou_pairs(boxes[:, None], gts[None]))
                    - weights.lambda_focal * conf[:, None]).numpy()
            got = sum(cost[p, g] for p, g in assignment.pairs)
            want, _ = brute_force_assignment(cost)
            worst_gap = max(worst_gap, abs(got - want))
        dt = time.perf_counter() - t0
        report("matching/brute-force", worst_gap <= 1e-10 and dt < 60,
               f"max cost gap {worst_gap:.2e} over 1000 instances (n,m<=7), {dt:.1f}s")


# ---------------------------------------------------------------------------
# 3. gradient checks


class TestGradientChecks:
    def _check(self, fn, x0):
        x = torch.tensor(x0, dtype=torch.float64, requires_grad=True)
        fn(x).backward()
        analytic = x.grad.numpy()

        def fn_np(arr):
            with torch.no_grad():
                return float(fn(torch.tensor(arr, dtype=torch.float64)))

        numeric = central_difference_grad(fn_np, x0.copy(), h=1e-5)
        return relative_grad_error(analytic, numeric)

    def test_all_loss_components(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(45)
        gts = torch.tensor(np.column_stack([
            rng.uniform(0.2, 0.8, (3, 2)), rng.uniform(0.3, 1.0, (3, 2)),
        ]), dtype=torch.float64)
        z_out = torch.tensor(rng.normal(0, 1, (6, 16)), dtype=torch.float64)
        targets = torch.tensor(rng.uniform(0.1, 0.9, 5), dtype=torch.float64)

        checks = {
            "L1": (lambda x: (x.reshape(3, 4) - gts).abs().mean(),
                   rng.uniform(0.2, 0.9, 12)),
            "GIoU": (lambda x: (1 - giou_pairs(x.reshape(3, 4), gts)).mean(),
                     np.column_stack([rng.uniform(0.2, 0.8, (3, 2)),
                                      rng.uniform(0.3, 1.0, (3, 2))]).reshape(-1)),
            "focal": (lambda x: quality_focal(x, targets),
                      rng.uniform(0.15, 0.85, 5)),
            "smooth-l1": (lambda x: extra_loss(x.reshape(6, 16), z_out, None, "smooth-l1"),
                          rng.normal(0, 1, 96)),
            "mse": (lambda x: extra_loss(x.reshape(6, 16), z_out, None, "mse"),
                    rng.normal(0, 1, 96)),
            "cosine": (lambda x: extra_loss(x.reshape(6, 16), z_out, None, "cosine"),
                       rng.normal(0, 1, 96)),
            "kl": (lambda x: extra_loss(x.reshape(6, 16), z_out, None, "kl"),
                   rng.normal(0, 1, 96)),
        }
        errs = {name: self._check(fn, x0) for name, (fn, x0) in checks.items()}
        dt = time.perf_counter() - t0
        worst = max(errs.values())
        detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
        report("gradients/finite-difference", worst <= 1e-4 and dt < 60,
               f"{detail}; {dt:.1f}s")


# ---------------------------------------------------------------------------
# 4. dataset constraints


class TestDatasetConstraints:
    def test_sampled_views_meet_construction_rules_10k(self):
        rng = np.random.default_rng(46)
        violations = 0
        total = 0
        seed = 0
        while total < 10_000:
            # keep world aspect where a camera-ratio view of >= 0.7 scale
            # can exist at all (extreme panoramas are legitimately infeasible)
            world_w = int(rng.integers(400, 1200))
            world_h = int(world_w / rng.uniform(0.62, 1.61))
            # large camera-ratio-ish gt keeps the draw feasible
            scale = rng.uniform(0.85, 0.98)
            gt = Box(world_w / 2 + rng.uniform(-0.02, 0.02) * world_w,
                     world_h / 2 + rng.uniform(-0.02, 0.02) * world_h,
                     scale * world_w, scale * world_h)
            view, orient, _ = sample_init_view(world_w, world_h, gt, rng_seed=seed)
            seed += 1
            total += 1
            size_ok = (view.h >= 0.7 * world_h - 1e-9 and view.w >= 0.7 * world_w - 1e-9)
            iou_ok = iou(view, gt) >= 0.7
            ratio_ok = abs(view.w - orient.ratio * view.h) <= 1.0
            if not (size_ok and iou_ok and ratio_ok):
                violations += 1
        report("dataset/init-view-constraints", violations == 0,
               f"{violations} violations over 10^4 accepted samples")

    def test_unbounded_fraction_over_100_scenes(self):
        scenes = [make_synthetic_scene(50_000 + i)[0] for i in range(100)]
        frac = unbounded_fraction(scenes)
        report("dataset/unbounded-witness", frac >= 0.10,
               f"{100 * frac:.1f}% of converted crops leave [0,1]^2 (need >= 10%)")


# ---------------------------------------------------------------------------
# 5. FEM contracts


class TestFemContracts:
    def test_contracts(self):
        torch.manual_seed(0)
        model = CompositionNet(ModelConfig(input_short=96, input_long=128)).eval()
        images = torch.rand(1, 3, 96, 128, generator=torch.Generator().manual_seed(3))
        grid = model.encode(images)

        identity_ok = model.extrapolate(grid, 0) is grid

        ext = model.extrapolate(grid, 2)
        counts_ok = (
            int(ext.visible.sum()) + int((~ext.visible).sum())
            == (6 + 4) * (8 + 4)
            and int(ext.visible.sum()) == 48
        )

        bumped = grid.tokens.clone()
        bumped[0, 2, 3] += 0.25
        ext2 = model.extrapolate(TokenGrid(bumped, grid.coords, grid.visible, 0), 2)
        prop_ok = not torch.allclose(ext.tokens[:, ~ext.visible],
                                     ext2.tokens[:, ~ext2.visible])

        teacher = EmaTeacher(model, 0.999)
        z_t = teacher.encode_tokens(torch.rand(1, 3, (6 + 4) * 16, (8 + 4) * 16))
        loss = extra_loss(ext.tokens, z_t, ~ext.visible, "smooth-l1")
        loss.backward()
        teacher_grad = sum(
            0.0 if p.grad is None else float(p.grad.norm())
            for p in teacher.model.parameters()
        )

        s = torch.nn.Linear(8, 8).double()
        t = torch.nn.Linear(8, 8).double()
        mu = 0.97
        d0 = torch.cat([(pt - ps).flatten() for pt, ps in
                        zip(t.parameters(), s.parameters())]).norm()
        ema_ok = True
        with torch.no_grad():
            for k in range(1, 8):
                ema_update(s, t, mu)
                d = torch.cat([(pt - ps).flatten() for pt, ps in
                               zip(t.parameters(), s.parameters())]).norm()
                ema_ok &= abs(float(d) - float(d0) * mu ** k) <= 1e-10

        ok = identity_ok and counts_ok and prop_ok and teacher_grad == 0.0 and ema_ok
        report("fem/contracts", ok,
               f"identity {identity_ok}, counts {counts_ok}, propagation {prop_ok}, "
               f"teacher grad {teacher_grad}, ema decay exact {ema_ok}")


# ---------------------------------------------------------------------------
# 6. synthetic end-to-end


class TestSyntheticEndToEnd:
    def test_training_budget(self, trained):
        secs = {k: v["seconds"] for k, v in trained.items()}
        ok = all(s <= TRAIN_BUDGET_SECONDS for s in secs.values())
        report("e2e/training-budget", ok,
               f"with extrapolation {secs['fem']:.0f}s, without {secs['nofem']:.0f}s "
               f"(budget {TRAIN_BUDGET_SECONDS:.0f}s per run on {os.cpu_count()} cores)")

    def test_oracle_iou_floor_and_baseline(self, trained, accept_data):
        scenes = accept_data["eval"]
        model_iou = mean_iou_to_oracle(trained["fem"]["eval_preds"], scenes)

        def fixed(box_for):
            preds = [(np.asarray([box_for(s)]), np.asarray([1.0])) for s in scenes]
            return mean_iou_to_oracle(preds, scenes)

        # canonical center crop: largest centered square of the frame
        def center_square(s):
            v = s.init_view
            return ([0.5, 0.5, v.h / v.w, 1.0] if v.w >= v.h
                    else [0.5, 0.5, 1.0, v.w / v.h])

        base_iou = fixed(center_square)
        identity_iou = fixed(lambda s: [0.5, 0.5, 1.0, 1.0])
        ok = model_iou >= 0.70 and model_iou - base_iou >= 0.10
        report("e2e/oracle-iou", ok,
               f"model {model_iou:.3f} (floor 0.70), center-crop {base_iou:.3f}, "
               f"margin {model_iou - base_iou:+.3f} (need >= +0.10); "
               f"keep-current-framing scores {identity_iou:.3f} for context")

    def test_recommend_improves_oracle_score(self, trained):
        from viewscout.data.synthetic import oracle_score

        advisor = ViewAdvisor(trained["fem"]["model"])
        wins = 0
        n = 100
        for t in range(n):
            scene, world = make_synthetic_scene(80_000 + t)
            vp = scene.init_view_normalized()
            _, nxt = advisor.recommend_viewport(world, vp, scene.orientation)
            if oracle_score(scene.oracle, nxt) > oracle_score(scene.oracle, vp):
                wins += 1
        report("e2e/recommend-improves-score", wins >= 0.7 * n,
               f"recommended view beats the initial framing on {wins}/{n} scenes")

    def test_extrapolation_helps_out_of_border(self, trained, accept_data):
        scenes = accept_data["eval"]
        subset = [i for i, s in enumerate(scenes) if _out_of_border(s)]
        assert len(subset) >= 20, "out-of-border subset unexpectedly small"
        sub_scenes = [scenes[i] for i in subset]

        def subset_stats(preds):
            chosen = [preds[i] for i in subset]
            r = compute_metrics(chosen, sub_scenes, mode="crop")
            return mean_iou_to_oracle(chosen, sub_scenes), r.acc_1_5_e85

        fem_iou, fem_acc = subset_stats(trained["fem"]["eval_preds"])
        nofem_iou, nofem_acc = subset_stats(trained["nofem"]["eval_preds"])
        report("e2e/extrapolation-direction", fem_iou >= nofem_iou,
               f"out-of-border mean IoU: with extrapolation {fem_iou:.3f} vs "
               f"without {nofem_iou:.3f} over {len(subset)} scenes "
               f"(acc85 {fem_acc:.1f} vs {nofem_acc:.1f})")


# ---------------------------------------------------------------------------
# 7. multi-step trend


class TestMultiStepTrend:
    def test_trend_over_100_trajectories(self, trained):
        advisor = ViewAdvisor(trained["fem"]["model"])
        step_ious = np.zeros((N_TRAJ, 3))
        inside = True
        for t in range(N_TRAJ):
            scene, world = make_synthetic_scene(70_000 + t)
            viewport = scene.init_view_normalized()
            oracle_view = scene.oracle.crop  # already camera-ratio in the world
            steps = advisor.run_multistep(world, viewport, scene.orientation,
                                          max_steps=3)
            current = viewport
            k = 0
            for step in steps:
                current = step.next_viewport
                inside &= UNIT_BOX.contains(step.viewport, tol=1e-9)
                inside &= UNIT_BOX.contains(step.next_viewport, tol=1e-9)
                step_ious[t, k] = iou(current, oracle_view)
                k += 1
            while k < 3:  # converged early: the viewport stays put
                step_ious[t, k] = step_ious[t, k - 1]
                k += 1
        means = step_ious.mean(axis=0)
        monotone = means[0] <= means[1] + 1e-9 and means[1] <= means[2] + 1e-9
        report("multistep/trend", monotone and inside,
               f"mean IoU to oracle per step: {means[0]:.3f} -> {means[1]:.3f} -> "
               f"{means[2]:.3f}; viewports inside world: {inside}")


# ---------------------------------------------------------------------------
# 8. metric invariants


class TestMetricInvariants:
    def test_acc_monotonicity_1000_sets(self):
        rng = np.random.default_rng(48)
        holds = True
        for _ in range(1000):
            preds = [Box(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                         rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0))
                     for _ in range(4)]
            gts = [Box(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                       rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0))
                   for _ in range(12)]
            for k in (1, 2):
                a_90_5 = acc_k_n(preds, gts, k, 5, 0.90)
                a_85_5 = acc_k_n(preds, gts, k, 5, 0.85)
                a_90_10 = acc_k_n(preds, gts, k, 10, 0.90)
                a_85_10 = acc_k_n(preds, gts, k, 10, 0.85)
                holds &= a_85_5 >= a_90_5 and a_90_10 >= a_90_5 and a_85_10 >= a_85_5
        report("metrics/monotonicity", holds,
               "Acc monotone in epsilon and N over 1000 random sets")

    def test_perfect_predictor(self):
        scenes = [make_synthetic_scene(90_000 + i)[0] for i in range(20)]
        preds = []
        for s in scenes:
            ranked = sorted(s.crops, key=lambda c: -c.score)
            boxes = np.asarray([c.box.as_list() for c in ranked])
            preds.append((boxes, np.linspace(1, 0.5, len(ranked))))
        ok = True
        for mode in ("view", "crop"):
            r = compute_metrics(preds, scenes, mode=mode)
            ok &= (r.acc_1_5_e90 == 100.0 and r.acc_1_10_e85 == 100.0
                   and abs(r.mean_iou - 1.0) < 1e-9 and r.mean_disp < 1e-9)
        report("metrics/perfect-predictor", ok,
               "Acc = 100, IoU = 1, Disp = 0 in both view and crop modes")
