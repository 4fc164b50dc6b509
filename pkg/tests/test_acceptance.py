"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v`` (the summary is
printed at the end of the module) or ``python tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from conftest import numeric_grad, rel_error
from test_model import OUTPUT_WIDTH_TABLE, TABLE_DEPTH_PARAMS, check_network_gradients, expected_names
from cssfn.data import PhantomParams, bicubic_degrade, kspace_truncate, spectral_upsample, synth_phantom
from cssfn.harness.config import load_config
from cssfn.harness.trainer import Trainer
from cssfn.metrics import psnr, ssim
from cssfn.model import BIF_MODES, GFF_MODES, NetworkConfig, build_network, compute_depth, count_params, trace_network
from cssfn.resize import upscale
from cssfn.tensor import (
    Tensor,
    add,
    concat_channels,
    conv2d_backward,
    conv2d_forward,
    l1_loss,
    l1_loss_backward,
    mean,
    pixel_shuffle,
    pixel_shuffle_forward,
    relu,
    relu_forward,
    split_channels,
)

RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="module", autouse=True)
def report(request):
    yield
    tr = request.config.pluginmanager.getplugin("terminalreporter")
    lines = ["", "acceptance criteria:"]
    for k in range(1, 10):
        ok, detail = RESULTS.get(k, (False, "not run"))
        lines.append(f"  [{'PASS' if ok else 'FAIL'}] criterion {k}: {detail}")
    text = "\n".join(lines)
    if tr is not None:
        tr.write_line(text)
    else:
        print(text)


def record(k: int, ok: bool, detail: str):
    RESULTS[k] = (bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {detail}")
    assert ok, detail


# ---------------------------------------------------------------------------


def test_criterion_1_depth_table():
    trace_network.cache_clear()
    t0 = time.perf_counter()
    mismatches = []
    for (q, r, ic), (depth, _) in TABLE_DEPTH_PARAMS.items():
        cfg = NetworkConfig(q=q, r=r, ic=ic)
        measured = build_network(cfg, init="zeros").longest_conv_path()
        if not compute_depth(cfg) == measured == depth:
            mismatches.append(((q, r, ic), compute_depth(cfg), measured, depth))
    elapsed = time.perf_counter() - t0
    record(1, not mismatches and elapsed < 1.0, f"12 depth entries, mismatches={mismatches}, {elapsed:.2f}s (< 1 s)")


def test_criterion_2_parameter_tables():
    trace_network.cache_clear()
    t0 = time.perf_counter()
    worst, exact = 0.0, True
    for (q, r, ic), (_, millions) in TABLE_DEPTH_PARAMS.items():
        cfg = NetworkConfig(q=q, r=r, ic=ic)
        total = count_params(cfg)
        exact &= build_network(cfg, init="zeros").num_parameters() == total
        worst = max(worst, abs(total / 1e6 - millions))
    for (q, r, c_o), (millions, _) in OUTPUT_WIDTH_TABLE.items():
        worst = max(worst, abs(count_params(NetworkConfig(q=q, r=r, c_o=c_o)) / 1e6 - millions))
    elapsed = time.perf_counter() - t0
    record(
        2,
        worst <= 0.02 and exact and elapsed < 1.0,
        f"12 + 24 table totals, max |diff| {worst:.4f}M (<= 0.02M), built counts exact={exact}, {elapsed:.2f}s (< 1 s)",
    )


def _primitive_errors(rng):
    errs = {}
    x = rng.uniform(-1, 1, (2, 3, 4, 4))
    for k in (1, 3):
        w = rng.uniform(-1, 1, (2, 3, k, k))
        b = rng.uniform(-1, 1, 2)
        proj = rng.standard_normal((2, 2, 4, 4))
        f = lambda: float((conv2d_forward(x, w, b) * proj).sum())  # noqa: E731
        gx, gw, gb = conv2d_backward(x, w, proj)
        errs[f"conv{k}"] = max(rel_error(gx, numeric_grad(f, x)), rel_error(gw, numeric_grad(f, w)), rel_error(gb, numeric_grad(f, b)))

    def tape_check(name, build, *arrays):
        proj = None
        tensors = [Tensor(a, requires_grad=True) for a in arrays]
        out = build(*tensors)
        proj = rng.standard_normal(out.shape)
        out.backward(proj)
        worst = 0.0
        for t, a in zip(tensors, arrays):
            num = numeric_grad(lambda: float((build(*[Tensor(b) for b in arrays]).data * proj).sum()), a)
            worst = max(worst, rel_error(t.grad, num))
        errs[name] = worst

    xr = rng.uniform(-1, 1, (1, 4, 3, 3))
    xr[np.abs(xr) < 0.05] = 0.3  # stay off the kink
    tape_check("relu", relu, xr)
    tape_check("add", add, rng.uniform(-1, 1, (1, 2, 3, 3)), rng.uniform(-1, 1, (1, 2, 3, 3)))
    tape_check("mean", lambda a, b, c: mean([a, b, c]), *rng.uniform(-1, 1, (3, 1, 2, 3, 3)))
    tape_check("concat", lambda a, b: concat_channels([a, b]), rng.uniform(-1, 1, (1, 2, 3, 3)), rng.uniform(-1, 1, (1, 3, 3, 3)))
    tape_check("split", lambda a: concat_channels(split_channels(a, 2)[::-1]), rng.uniform(-1, 1, (1, 4, 3, 3)))
    tape_check("pixel_shuffle", lambda a: pixel_shuffle(a, 2), rng.uniform(-1, 1, (1, 8, 2, 3)))
    pred = rng.uniform(-1, 1, (1, 2, 3, 3))
    target = pred + rng.choice([-1, 1], pred.shape) * rng.uniform(0.05, 0.5, pred.shape)
    errs["l1"] = rel_error(l1_loss_backward(pred, target), numeric_grad(lambda: l1_loss(pred, target), pred))
    assert relu_forward(np.zeros(1)).item() == 0.0 and pixel_shuffle_forward(np.zeros((1, 4, 1, 1)), 2).shape == (1, 1, 2, 2)
    return errs


def test_criterion_3_gradient_suite():
    t0 = time.perf_counter()
    errs = _primitive_errors(np.random.default_rng(0))
    errs["tiny network (all parameters)"] = check_network_gradients(
        NetworkConfig(c=8, n=2, m=2, q=2, r=2), np.random.default_rng(11)
    )
    elapsed = time.perf_counter() - t0
    worst = max(errs.values())
    record(
        3,
        worst < 1e-4 and elapsed < 120,
        f"{len(errs)} checks, max rel error {worst:.2e} (< 1e-4), {elapsed:.1f}s (< 120 s)",
    )


def test_criterion_4_esc_identity():
    rng = np.random.default_rng(4)
    ok, cases = True, 0
    for r in (2, 3, 4):
        for ic in (1, 3):
            net = build_network(NetworkConfig(c=16, n=2, m=2, q=2, r=r, ic=ic), init="zeros")
            x = rng.uniform(size=(2, ic, 7, 9))
            ok &= np.array_equal(net.forward(x), upscale(x, r))
            cases += 1
    record(4, ok, f"zero network == bicubic upsample bit-for-bit in {cases} cases, r in {{2,3,4}}")


def test_criterion_5_spectral_property():
    worst, fixed = 0.0, True
    for r in (2, 3, 4):
        for seed in range(2):
            params = PhantomParams(slices=4, height=48, width=48, band_limit=0.95 / r)
            vol = synth_phantom(params, np.random.default_rng(seed)).data
            worst = max(worst, float(np.abs(spectral_upsample(kspace_truncate(vol, r), r) - vol).max()))
        const = np.full((3, 24, 36), 0.62)
        for out in (kspace_truncate(const, r), bicubic_degrade(const, r)):
            fixed &= bool(np.abs(out - 0.62).max() < 1e-12)
    record(5, worst < 1e-10 and fixed, f"TD round-trip max abs error {worst:.1e} (< 1e-10); constants fixed by BD and TD: {fixed}")


@pytest.fixture(scope="module")
def tiny_runs():
    runs = []
    for _ in range(2):
        with threadpool_limits(limits=1):
            t0 = time.perf_counter()
            trainer = Trainer(load_config("tiny"))
            trainer.run()
            runs.append((trainer, time.perf_counter() - t0))
    return runs


def test_criterion_6_convergence(tiny_runs):
    (a, ta), (b, tb) = tiny_runs
    final = float(np.mean(a.loss_history[-10:]))
    same = a.loss_history == b.loss_history and all(
        v.tobytes() == b.net.state_dict()[k].tobytes() for k, v in a.net.state_dict().items()
    )
    record(
        6,
        a.iteration == 5000 and final < 1e-3 and max(ta, tb) < 300 and same,
        f"tiny preset L1 {final:.2e} after {a.iteration} iterations (< 1e-3), {ta:.0f}s / {tb:.0f}s on one thread (< 300 s), reruns identical={same}",
    )


def test_criterion_7_metric_oracles():
    p = psnr(np.full((16, 16), 0.1), np.zeros((16, 16)))
    s = ssim(np.full((16, 16), 0.5), np.full((16, 16), 0.6))
    a = np.random.default_rng(7).uniform(size=(32, 32))
    s_aa = ssim(a, a)
    record(
        7,
        p == 20.0 and abs(s - 0.98361) < 1e-5 and s_aa == 1.0,
        f"PSNR {p!r} dB (== 20.0), SSIM constant pair {s:.6f} (0.98361 +- 1e-5), SSIM(a,a) {s_aa!r}",
    )


def test_criterion_8_ablation_wiring():
    rng = np.random.default_rng(8)
    ok, notes = True, []
    for gff in GFF_MODES:
        for bif in BIF_MODES:
            cfg = NetworkConfig(c=8, n=2, m=2, q=2, r=2, gff=gff, bif=bif)
            net = build_network(cfg)
            x = rng.uniform(size=(1, 1, 6, 6))
            y = net.forward(x)
            grads = net.backward(l1_loss_backward(y, rng.uniform(size=y.shape)))
            names_ok = set(net.parameters()) == expected_names(cfg)
            finite = all(np.isfinite(g).all() for g in grads.values()) and np.isfinite(y).all()
            fusion_in = net.layers["fusion.conv1x1"].in_channels
            widths_ok = fusion_in == (8 if gff == "none" else 24) and net.layers["block2.compress"].in_channels == (
                16 if gff == "DGFF" else 8
            )
            if not (names_ok and finite and widths_ok):
                ok = False
                notes.append(f"{gff}/{bif}")
    record(8, ok, f"9 gff x bif variants build, run forward/backward, names and widths as documented; failures={notes}")


def test_criterion_9_resume_determinism(tiny_runs, tmp_path):
    reference = tiny_runs[0][0].loss_history[:600]
    first = Trainer(load_config("tiny"), tmp_path)
    first.run(until=100)
    resumed = Trainer.from_checkpoint(tmp_path / "checkpoint.csck", tmp_path)
    resumed.run(until=600)
    same = resumed.loss_history == reference
    record(9, same and len(reference) == 600, "interrupt at 100, resume to 600: loss trajectory bit-identical to uninterrupted run" if same else "trajectories differ")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
