"""Acceptance suite: every criterion at its stated tolerance.

Each criterion prints one PASS/FAIL line (run with ``pytest -s`` to see them
live).  The heavy fixtures are module-scoped: one 200-epoch training run
backs criteria 3 and 4, one pair of 50-epoch runs backs criterion 5, and one
full toy run backs criterion 6.  Total runtime is dominated by the 200-epoch
run (several minutes on CPU).
"""

import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import torch

from deflicker import (
    GeneratorConfig,
    SynthSpec,
    TrainConfig,
    apply_multimodal_flicker,
    apply_unimodal_flicker,
    compute_confidence,
    default_mode_pair,
    e_pair,
    e_warp,
    f_data,
    frame_distance_l1,
    infer_clip,
    init_generator,
    make_moving_clip,
    make_parallax_clip,
    mode_gap,
    occlusion_from_flows,
    parameter_count,
    psnr,
    render_mode,
    toy_experiment,
    train,
)
from deflicker.training import BATCH_SIZE
from deflicker.video import VideoClip

from oracles import (
    confidence_loop,
    e_pair_loop,
    e_warp_loop,
    f_data_loop,
    occlusion_loop,
    psnr_loop,
)


def report(number, description):
    """Print the per-criterion verdict even when the assert fires later."""

    class _Reporter:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            verdict = "PASS" if exc_type is None else "FAIL"
            print(f"ACCEPTANCE {number}: {verdict} - {description}")
            return False

    return _Reporter()


# --- criterion 1: metric oracle equivalence -------------------------------

class TestCriterion1MetricOracles:
    N = 100
    TOL = 1e-6

    def test_metrics_match_brute_force(self):
        rng = np.random.default_rng(11)
        with report(1, "metrics match brute-force oracles on 100+ random instances"):
            for _ in range(self.N):
                h, w = rng.integers(2, 9, 2)
                a = rng.uniform(0, 1, (h, w, 3))
                b = rng.uniform(0, 1, (h, w, 3))
                flow = rng.uniform(-2, 2, (h, w, 2))
                mask = (rng.uniform(0, 1, (h, w)) > 0.3).astype(np.float64)
                if mask.sum() == 0:
                    mask[0, 0] = 1.0
                assert abs(e_pair(a, b, flow, mask) - e_pair_loop(a, b, flow, mask)) < self.TOL
                assert abs(psnr(a, b) - psnr_loop(a, b)) < self.TOL

                fwd = rng.uniform(-1.5, 1.5, (h, w, 2))
                bwd = -fwd + rng.normal(0, 0.5, (h, w, 2))
                assert np.array_equal(
                    occlusion_from_flows(fwd, bwd), occlusion_loop(fwd, bwd, 0.01, 0.5)
                )

                main = rng.uniform(0, 1, (h, w, 3))
                minor = rng.uniform(0, 1, (h, w, 3))
                processed = rng.uniform(0, 1, (h, w, 3))
                assert np.array_equal(
                    compute_confidence(main, minor, processed, 0.02),
                    confidence_loop(main, minor, processed, 0.02),
                )

            for _ in range(self.N):
                t = int(rng.integers(2, 6))
                h, w = rng.integers(2, 9, 2)
                frames = [rng.uniform(0, 1, (h, w, 3)) for _ in range(t)]
                clip = VideoClip.from_frames(frames)
                flows_s = [rng.uniform(-1, 1, (h, w, 2)) for _ in range(t - 1)]
                flows_l = [rng.uniform(-1, 1, (h, w, 2)) for _ in range(t - 1)]
                masks = []
                for _ in range(2 * (t - 1)):
                    m = (rng.uniform(0, 1, (h, w)) > 0.2).astype(np.float64)
                    if m.sum() == 0:
                        m[0, 0] = 1.0
                    masks.append(m)
                ms, ml = masks[: t - 1], masks[t - 1:]
                assert abs(
                    e_warp(clip, flows_s, flows_l, ms, ml)
                    - e_warp_loop(frames, flows_s, flows_l, ms, ml)
                ) < self.TOL

                out = [rng.uniform(0, 1, (h, w, 3)) for _ in range(t)]
                assert abs(
                    f_data(clip, VideoClip.from_frames(out)) - f_data_loop(frames, out)
                ) < self.TOL


# --- criterion 2: gradient correctness -------------------------------------

class TestCriterion2Gradients:
    def test_analytic_matches_finite_differences(self):
        with report(2, "analytic gradients match central finite differences"):
            cfg = GeneratorConfig(in_channels=1, out_heads=1, base_width=2, depth=1, seed=7)
            gen = init_generator(cfg, dtype=torch.float64)
            assert parameter_count(gen) <= 5000
            frame = np.random.default_rng(3).uniform(0, 1, (8, 8, 1))
            target = torch.from_numpy(
                np.random.default_rng(4).uniform(0, 1, (8, 8, 1))
            ).permute(2, 0, 1).unsqueeze(0)

            from deflicker import loss_gradient

            analytic = loss_gradient(
                gen, frame, lambda main, minor: (main - target).abs().mean()
            )

            def eval_loss():
                with torch.no_grad():
                    main, _ = gen(
                        torch.from_numpy(frame).permute(2, 0, 1).unsqueeze(0)
                    )
                    return float((main - target).abs().mean())

            rng = np.random.default_rng(5)
            params = dict(gen.named_parameters())
            names = list(params)
            step = 1e-4
            checked = 0
            while checked < 100:
                name = names[rng.integers(len(names))]
                p = params[name]
                idx = tuple(rng.integers(s) for s in p.shape)
                with torch.no_grad():
                    original = float(p[idx])
                    p[idx] = original + step
                    up = eval_loss()
                    p[idx] = original - step
                    down = eval_loss()
                    p[idx] = original
                fd = (up - down) / (2 * step)
                an = analytic[name][idx]
                if max(abs(an), abs(fd)) < 1e-7:
                    continue
                rel = abs(an - fd) / max(abs(an), abs(fd))
                assert rel < 1e-3, f"{name}{idx}: analytic {an} vs fd {fd}"
                checked += 1


# --- criteria 3 and 4: de-flicker then overfit ------------------------------

@pytest.fixture(scope="module")
def dvp_run():
    clip, flows = make_moving_clip(20, 64, 64, 1.0, 0.0, seed=7)
    processed = apply_unimodal_flicker(clip, 0.1, seed=8)
    masks_short, masks_long = flows.masks()
    ew_processed = e_warp(
        processed, flows.short_fwd, flows.long_fwd, masks_short, masks_long
    )
    result = train(
        clip,
        processed,
        GeneratorConfig(in_channels=3, out_heads=1, seed=7),
        TrainConfig(epochs=200, seed=7, snapshot_every=0),
        flows=flows,
    )
    return {"trace": result.trace, "ew_processed": ew_processed}


class TestCriterion3Deflicker:
    def test_early_stop_removes_flicker_and_keeps_fidelity(self, dvp_run):
        with report(3, "25-epoch output halves E_warp while F_data >= 22 dB"):
            rec = dvp_run["trace"].at_epoch(25)
            assert rec.e_warp <= 0.5 * dvp_run["ew_processed"], (
                f"E_warp {rec.e_warp} vs processed {dvp_run['ew_processed']}"
            )
            assert rec.f_data >= 22.0, f"F_data {rec.f_data}"


class TestCriterion4Overfitting:
    def test_long_training_raises_both_metrics(self, dvp_run):
        with report(4, "200-epoch training raises both E_warp and F_data over epoch 25"):
            early = dvp_run["trace"].at_epoch(25)
            late = dvp_run["trace"].at_epoch(200)
            assert late.e_warp > early.e_warp, (
                f"E_warp {late.e_warp} !> {early.e_warp}"
            )
            assert late.f_data > early.f_data, (
                f"F_data {late.f_data} !> {early.f_data}"
            )


# --- criterion 5: IRT mode lock ---------------------------------------------

@pytest.fixture(scope="module")
def mode_lock_runs():
    t_count = 16
    clip = make_parallax_clip(t_count, 32, 32, seed=20)
    mode_a, mode_b = default_mode_pair()
    gap = mode_gap(clip, mode_a, mode_b)
    spec = SynthSpec(
        kind="multimodal",
        sigma=0.02,
        modes=[mode_a, mode_b],
        switch_pattern=[t % 2 for t in range(t_count)],  # frame 0 is mode A
        seed=21,
    )
    processed, _ = apply_multimodal_flicker(clip, spec)
    net = dict(base_width=16, depth=3, seed=22)
    irt_result = train(
        clip,
        processed,
        GeneratorConfig(out_heads=2, **net),
        TrainConfig(
            epochs=50, learning_rate=3e-4, irt_enabled=True,
            anchor_iterations=32, seed=22,
        ),
    )
    plain_result = train(
        clip,
        processed,
        GeneratorConfig(out_heads=1, **net),
        TrainConfig(epochs=50, learning_rate=3e-4, seed=22),
    )
    irt_main, _ = infer_clip(irt_result.generator, clip)
    plain_out = infer_clip(plain_result.generator, clip)
    return {
        "clip": clip,
        "gap": gap,
        "rendition_a": render_mode(clip, mode_a),
        "rendition_b": render_mode(clip, mode_b),
        "irt_main_50": irt_main,
        "irt_main_25": irt_result.snapshots[25],
        "plain_50": plain_out,
        "plain_25": plain_result.snapshots[25],
    }


def closer_to_a_fraction(out, rendition_a, rendition_b):
    t_count = len(out)
    closer = sum(
        frame_distance_l1(out[t], rendition_a[t]) < frame_distance_l1(out[t], rendition_b[t])
        for t in range(t_count)
    )
    return closer / t_count


class TestCriterion5ModeLock:
    def test_gap_is_large_enough(self, mode_lock_runs):
        assert mode_lock_runs["gap"] >= 0.3

    def test_irt_locks_main_head_and_plain_training_does_not(self, mode_lock_runs):
        with report(5, "IRT locks >=90% of frames to the anchor mode; plain fails >=50%"):
            irt_frac = closer_to_a_fraction(
                mode_lock_runs["irt_main_50"],
                mode_lock_runs["rendition_a"],
                mode_lock_runs["rendition_b"],
            )
            plain_frac = closer_to_a_fraction(
                mode_lock_runs["plain_50"],
                mode_lock_runs["rendition_a"],
                mode_lock_runs["rendition_b"],
            )
            assert irt_frac >= 0.9, f"IRT locked only {irt_frac:.0%}"
            assert 1.0 - plain_frac >= 0.5, f"plain failed only {1 - plain_frac:.0%}"


class TestIrtModuleInvariants:
    """Module-level dynamics stated alongside the reweighting operations."""

    def test_mode_lock_at_early_stop_epoch(self, mode_lock_runs):
        frac = closer_to_a_fraction(
            mode_lock_runs["irt_main_25"],
            mode_lock_runs["rendition_a"],
            mode_lock_runs["rendition_b"],
        )
        assert frac >= 0.9

    def test_plain_training_averages_modes_at_early_stop_epoch(self, mode_lock_runs):
        out = mode_lock_runs["plain_25"]
        ra, rb = mode_lock_runs["rendition_a"], mode_lock_runs["rendition_b"]
        gap = mode_lock_runs["gap"]
        t_count = len(out)
        far_from_both = sum(
            min(
                frame_distance_l1(out[t], ra[t]),
                frame_distance_l1(out[t], rb[t]),
            ) > 0.25 * gap
            for t in range(t_count)
        )
        assert far_from_both / t_count >= 0.5


# --- criterion 6: toy early consistency --------------------------------------

@pytest.fixture(scope="module")
def toy_run():
    return toy_experiment("unimodal", seed=0)


class TestCriterion6ToyDynamics:
    def test_early_consistency_then_overfit(self, toy_run):
        with report(6, "toy outputs start consistent and end overfitted to processed"):
            baseline = toy_run.processed_pairwise_mean
            first = toy_run.records[1]  # first post-training checkpoint
            last = toy_run.records[-1]
            assert first.iteration <= last.iteration / 5
            assert first.mean_pairwise <= 0.5 * baseline, (
                f"early pairwise {first.mean_pairwise} vs processed {baseline}"
            )
            assert last.mean_pairwise >= 0.9 * baseline, (
                f"final pairwise {last.mean_pairwise} vs processed {baseline}"
            )

    def test_late_iterations_fit_processed_frames(self, toy_run):
        assert float(np.mean(toy_run.records[-1].to_processed)) < 0.02


# --- criterion 7: byte-identical CLI artifacts --------------------------------

def run_cli_process(cwd, *argv):
    proc = subprocess.run(
        [sys.executable, "-m", "deflicker.cli", *argv],
        cwd=cwd,
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


class TestCriterion7Determinism:
    def test_commands_are_byte_identical_across_processes(self, tmp_path):
        with report(7, "cmd_run/cmd_synth/cmd_toy rerun byte-identically"):
            for d in ("s1", "s2"):
                run_cli_process(
                    tmp_path, "synth", "--kind", "multimodal", "--frames", "3",
                    "--size", "16x16", "--motion", "1,0", "--sigma", "0.02",
                    "--seed", "9", "--out", d,
                )
            synth_files = [
                "clean/frame_000000.png", "clean/frame_000002.png",
                "processed/frame_000001.png", "flow/short_fwd_000001.flo",
                "flow/long_bwd_000002.flo", "labels.csv",
            ]
            for rel in synth_files:
                assert (tmp_path / "s1" / rel).read_bytes() == (
                    tmp_path / "s2" / rel
                ).read_bytes(), f"synth artifact differs: {rel}"

            for d in ("r1", "r2"):
                run_cli_process(
                    tmp_path, "run", "--input", "s1/clean", "--processed",
                    "s1/processed", "--output", d, "--epochs", "2", "--seed", "4",
                    "--flow-dir", "s1/flow",
                )
            run_files = ["trace.csv", "ckpt_epoch_0002.npz"] + [
                f"frames/frame_{t:06d}.png" for t in range(3)
            ]
            for rel in run_files:
                assert (tmp_path / "r1" / rel).read_bytes() == (
                    tmp_path / "r2" / rel
                ).read_bytes(), f"run artifact differs: {rel}"

            for name in ("t1.csv", "t2.csv"):
                run_cli_process(
                    tmp_path, "toy", "--mode", "unimodal", "--iterations", "60",
                    "--record-every", "30", "--seed", "2", "--out", name,
                )
            assert (tmp_path / "t1.csv").read_bytes() == (tmp_path / "t2.csv").read_bytes()


# --- criterion 8: hyperparameter conformance ----------------------------------

class TestCriterion8Defaults:
    def test_defaults_match_reference_configuration(self):
        with report(8, "defaults: lr 1e-4, batch 1, delta 0.02, 25 epochs"):
            cfg = TrainConfig()
            assert cfg.learning_rate == 1e-4
            assert cfg.epochs == 25
            assert cfg.delta == 0.02
            assert BATCH_SIZE == 1

            from deflicker.cli import build_parser

            args = build_parser().parse_args(
                ["run", "--input", "a", "--processed", "b", "--output", "c"]
            )
            assert args.lr == 1e-4
            assert args.epochs == 25
            assert args.delta == 0.02
