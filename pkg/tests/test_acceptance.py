"""Acceptance suite: one test per release criterion, each printing a
[PASS]/[FAIL] line (run with `pytest tests/test_acceptance.py -s` to see
them stream). Tolerances are pinned here, not configurable.
"""

import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from eigenloop import config as cfgmod
from eigenloop.cli import main as cli_main
from eigenloop.clustering import AnchorSet, KMeansConfig, ackmeans, bcubed_precision
from eigenloop.contrastive import (
    EncoderMLP,
    MixConfig,
    encoder_backward,
    encoder_forward,
    info_nce_grad,
    info_nce_loss,
    loss_decomposition,
    pretrain,
)
from eigenloop.core import EmbeddingSet, LabeledSet
from eigenloop.synth import make_benchmark
from eigenloop.transfer import (
    AdapterModel,
    Budget,
    FinetuneConfig,
    GroundTruthOracle,
    cluster_quality,
    pick_indicators,
    progressive_loop,
    random_baseline,
    softmax_cross_entropy,
)

from oracles import bcubed_pairwise, central_diff, lloyd_reference, max_rel_error

CONFIG_PATH = Path(__file__).resolve().parent.parent / "configs" / "standard.yaml"


def check(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def unit_rows(rng, n, d):
    z = rng.normal(size=(n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def benchmark_for_seed(seed):
    cfg = cfgmod.load_config(CONFIG_PATH)
    s = cfg["data"]["synthetic"]
    return cfg, make_benchmark(
        seed,
        classes=s["classes"],
        per_class_source=s["per_class_source"],
        per_class_target=s["per_class_target"],
        per_class_test=s["per_class_test"],
        dim=s["dim"],
        noise_sigma=s["noise_sigma"],
        center_scale=s["center_scale"],
        shift_angle=s["shift_angle"],
        shift_translation_norm=s["shift_translation_norm"],
        shift_scale=s["shift_scale"],
    )


def shipped_pretrain_config(cfg, seed, mode):
    cfg = dict(cfg, seed=seed)
    pcfg = cfgmod.build_pretrain_config(cfg)
    return replace(pcfg, mix=MixConfig(pcfg.mix.p, mode))


def test_loss_decomposition_identity():
    start = time.time()
    rng = np.random.default_rng(1001)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 17))
        d = int(rng.integers(4, 65))
        tau = float(rng.choice([0.07, 0.2, 1.0]))
        z = unit_rows(rng, 2 * n, d)
        loss = info_nce_loss(z, tau)
        align, unif = loss_decomposition(z, tau)
        worst = max(worst, abs(loss - (align + unif)) / max(1.0, abs(loss)))
    elapsed = time.time() - start
    check(
        "loss-decomposition identity (100 random batches)",
        worst <= 1e-9 and elapsed < 5.0,
        f"worst rel dev {worst:.2e}, {elapsed:.2f}s",
    )


def test_closed_form_loss_values():
    rng = np.random.default_rng(1002)
    single_pair_ok = all(info_nce_loss(unit_rows(rng, 2, 5), 0.2) == 0.0 for _ in range(10))
    worst = 0.0
    for n in (2, 4, 8):
        row = unit_rows(rng, 1, 6)
        z = np.tile(row, (2 * n, 1))
        for tau in (0.07, 0.2, 1.0):
            worst = max(worst, abs(info_nce_loss(z, tau) - math.log(2 * n - 1)))
    check(
        "closed-form loss values (N=1 exact zero; identical rows ln(2N-1))",
        single_pair_ok and worst <= 1e-9,
        f"ln(2N-1) worst dev {worst:.2e}",
    )


def _encoder_grad_config(trial):
    # redraw until rectifier pre-activations are clear of their kink and no
    # row sits near the zero-output singularity; finite differences at
    # h=1e-5 are meaningless across either
    attempt = 0
    while True:
        rng = np.random.default_rng(2000 + 37 * trial + attempt)
        attempt += 1
        in_d, hid, out_d = int(rng.integers(3, 6)), int(rng.integers(4, 7)), int(rng.integers(3, 5))
        model = EncoderMLP.init(in_d, (hid,), out_d, seed=int(rng.integers(1 << 30)))
        x = rng.normal(size=(2 * int(rng.integers(2, 4)), in_d))  # even: view pairs
        pre = x @ model.weights[0] + model.biases[0]
        if np.abs(pre).min() <= 1e-3:
            continue
        out = np.maximum(pre, 0.0) @ model.weights[1] + model.biases[1]
        if np.linalg.norm(out, axis=1).min() > 1e-2:
            return model, x


def _adapter_grad_config(trial):
    attempt = 0
    while True:
        rng = np.random.default_rng(3000 + 41 * trial + attempt)
        d, classes = int(rng.integers(3, 6)), int(rng.integers(2, 5))
        model = AdapterModel.init(d, d, classes)
        model.w1 = model.w1 + rng.normal(size=model.w1.shape) * 0.2
        model.w2 = model.w2 + rng.normal(size=model.w2.shape) * 0.2
        model.wh = rng.normal(size=model.wh.shape) * 0.5
        x = rng.normal(size=(int(rng.integers(4, 7)), d))
        y = rng.integers(0, classes, size=x.shape[0])
        if np.abs(x @ model.w1 + model.b1).min() > 1e-3:
            return model, x, y


def test_gradient_checks():
    start = time.time()
    tau = 0.2
    worst_enc = 0.0
    for trial in range(10):
        model, x = _encoder_grad_config(trial)
        z, cache = encoder_forward(model, x)
        _, gz = info_nce_grad(z, tau)
        grads = encoder_backward(cache, gz)
        analytic = np.concatenate(
            [g.ravel() for g, _ in grads] + [g.ravel() for _, g in grads]
        )
        flat = np.concatenate(
            [w.ravel() for w in model.weights] + [b.ravel() for b in model.biases]
        )

        def loss_of(vec, model=model, x=x):
            ws, bs, off = [], [], 0
            for w in model.weights:
                ws.append(vec[off : off + w.size].reshape(w.shape))
                off += w.size
            for b in model.biases:
                bs.append(vec[off : off + b.size].reshape(b.shape))
                off += b.size
            zz, _ = encoder_forward(EncoderMLP(ws, bs), x)
            return info_nce_loss(zz, tau)

        numeric = central_diff(loss_of, flat, h=1e-5)
        # scale floor 1e-6: below it the quotient measures only FD noise
        worst_enc = max(worst_enc, max_rel_error(analytic, numeric, floor=1e-6))

    worst_ad = 0.0
    names = AdapterModel.PARAM_NAMES
    for trial in range(10):
        model, x, y = _adapter_grad_config(trial)
        shapes = [getattr(model, n).shape for n in names]
        logits, cache = model.forward(x)
        _, glog = softmax_cross_entropy(logits, y)
        grads = model.backward(cache, glog)
        analytic = np.concatenate([grads[n].ravel() for n in names])
        flat = np.concatenate([getattr(model, n).ravel() for n in names])

        def loss_of(vec, model=model, x=x, y=y, shapes=shapes):
            m = model.copy()
            off = 0
            for n, s in zip(names, shapes):
                size = int(np.prod(s))
                setattr(m, n, vec[off : off + size].reshape(s).copy())
                off += size
            logits_, _ = m.forward(x)
            return softmax_cross_entropy(logits_, y)[0]

        numeric = central_diff(loss_of, flat, h=1e-5)
        worst_ad = max(worst_ad, max_rel_error(analytic, numeric))

    elapsed = time.time() - start
    check(
        "gradient checks vs central differences (20 random configurations)",
        worst_enc < 1e-4 and worst_ad < 1e-4 and elapsed < 30.0,
        f"encoder worst {worst_enc:.2e}, adapter worst {worst_ad:.2e}, {elapsed:.1f}s",
    )


def test_ackmeans_properties():
    start = time.time()
    rng = np.random.default_rng(1004)
    anchors_ok = True
    monotone_ok = True
    reduction_ok = True
    for trial in range(50):
        n = int(rng.integers(20, 81))
        d = int(rng.integers(2, 7))
        k = int(rng.integers(1, 6))
        m = int(rng.integers(0, 4))
        x = rng.normal(size=(n, d)) * 2.0
        e = EmbeddingSet(tuple(range(n)), x)
        anchors = AnchorSet(rng.normal(size=(m, d)), tuple(range(m))) if m else AnchorSet.empty(d)

        state = ackmeans(e, k, anchors, KMeansConfig(seed=trial))
        if m and state.centers[:m].tobytes() != anchors.vectors.tobytes():
            anchors_ok = False
        trace = state.inertia_trace
        if any(b > a + 1e-9 for a, b in zip(trace, trace[1:])):
            monotone_ok = False

        init = x[rng.choice(n, size=k, replace=False)].copy()
        mine = ackmeans(e, k, AnchorSet.empty(d), KMeansConfig(seed=0), init_centers=init)
        ref_centers, ref_assign, _ = lloyd_reference(x, init, 100)
        if not np.array_equal(mine.assignment, ref_assign):
            reduction_ok = False
        elif np.abs(mine.centers - ref_centers).max() > 1e-12:
            reduction_ok = False
    elapsed = time.time() - start
    check(
        "constrained-kmeans properties (50 random instances)",
        anchors_ok and monotone_ok and reduction_ok and elapsed < 30.0,
        f"anchors bit-identical {anchors_ok}, inertia monotone {monotone_ok}, "
        f"plain-kmeans reduction {reduction_ok}, {elapsed:.1f}s",
    )


def test_bcubed_oracle_equivalence():
    rng = np.random.default_rng(1005)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 201))
        clusters = rng.integers(0, max(2, n // 4), size=n)
        labels = rng.integers(0, 5, size=n)
        truth = LabeledSet(5, {i: int(labels[i]) for i in range(n)})
        assignment = {i: int(clusters[i]) for i in range(n)}
        fast = bcubed_precision(assignment, truth)
        slow = bcubed_pairwise(assignment, {i: int(labels[i]) for i in range(n)})
        worst = max(worst, abs(fast - slow))
    hand = bcubed_precision({0: 0, 1: 0, 2: 0}, LabeledSet(2, {0: 0, 1: 0, 2: 1}))
    hand_ok = abs(hand - 5 / 9) <= 1e-12
    check(
        "bcubed matches pairwise brute force (50 instances + hand case 5/9)",
        worst <= 1e-12 and hand_ok,
        f"worst dev {worst:.2e}, hand case {hand:.12f}",
    )


def test_tup_direction():
    start = time.time()
    wins = 0
    tups, vups, ufs = [], [], []
    for seed in range(1, 11):
        cfg, bench = benchmark_for_seed(seed)
        tup_enc, _ = pretrain(bench.source, bench.target, shipped_pretrain_config(cfg, seed, "TUP"))
        vup_enc, _ = pretrain(bench.source, None, shipped_pretrain_config(cfg, seed, "VUP"))
        uf_enc, _ = pretrain(
            None, bench.target, shipped_pretrain_config(cfg, seed, "UF"), initial=vup_enc
        )
        q_tup = cluster_quality(tup_enc.embed(bench.target), bench.target_labels, seed=seed)
        q_vup = cluster_quality(vup_enc.embed(bench.target), bench.target_labels, seed=seed)
        q_uf = cluster_quality(uf_enc.embed(bench.target), bench.target_labels, seed=seed)
        tups.append(q_tup)
        vups.append(q_vup)
        ufs.append(q_uf)
        wins += q_tup > q_vup
    elapsed = time.time() - start
    uf_ok = float(np.mean(ufs)) <= float(np.mean(tups))
    check(
        "target-aware pretraining direction (TUP > VUP, UF not above TUP)",
        wins >= 8 and uf_ok and elapsed < 300.0,
        f"TUP>VUP in {wins}/10 seeds; means TUP {np.mean(tups):.3f} "
        f"VUP {np.mean(vups):.3f} UF {np.mean(ufs):.3f}; {elapsed:.0f}s",
    )


def test_progressive_selection_direction():
    start = time.time()
    loop_scores, rand_scores = [], []
    for seed in range(1, 11):
        cfg, bench = benchmark_for_seed(seed)
        enc, _ = pretrain(bench.source, bench.target, shipped_pretrain_config(cfg, seed, "TUP"))
        feats = enc.embed(bench.target)
        test = enc.embed(bench.test)
        indicators = pick_indicators(feats, bench.target_labels)
        budget = Budget.uniform(1, 5, 3)  # the 1+3 setting
        oracle = GroundTruthOracle(bench.target_labels)
        ft = FinetuneConfig()
        _, state = progressive_loop(
            feats,
            indicators,
            budget,
            oracle,
            truth=bench.target_labels,
            test=test,
            test_truth=bench.test_labels,
            finetune_cfg=ft,
            kmeans_cfg=KMeansConfig(),
            seed=seed,
            normalize=False,
        )
        _, row = random_baseline(
            feats,
            indicators,
            budget.total_extra,
            oracle,
            truth=bench.target_labels,
            test=test,
            test_truth=bench.test_labels,
            finetune_cfg=ft,
            seed=seed,
            normalize=False,
        )
        loop_scores.append(state.history[-1].top1)
        rand_scores.append(row.top1)
    gap = float(np.mean(loop_scores) - np.mean(rand_scores))
    elapsed = time.time() - start
    check(
        "eigen-sample selection beats random under the 1+3 budget",
        gap >= 0.0 and elapsed < 300.0,
        f"mean top1 {np.mean(loop_scores):.4f} vs {np.mean(rand_scores):.4f}, "
        f"gap {gap:+.4f}, {elapsed:.0f}s",
    )


def test_budget_ledger():
    bench = make_benchmark(
        4,
        classes=10,
        per_class_source=2,
        per_class_target=12,
        per_class_test=2,
        dim=8,
        noise_sigma=0.4,
        center_scale=3.0,
    )

    class CountingOracle:
        def __init__(self, truth):
            self.inner = GroundTruthOracle(truth)
            self.queries = []

        def answer(self, ids):
            self.queries.extend(int(i) for i in ids)
            return self.inner.answer(ids)

    from eigenloop.core import normalize_rows

    features = normalize_rows(bench.target)
    indicators = pick_indicators(features, bench.target_labels)
    budget = Budget.uniform(1, 10, 9)
    oracle = CountingOracle(bench.target_labels)
    _, state = progressive_loop(
        features,
        indicators,
        budget,
        oracle,
        truth=bench.target_labels,
        test=bench.test,
        test_truth=bench.test_labels,
        finetune_cfg=FinetuneConfig(epochs=5, lr_head=0.2, lr_adapter=1e-3),
        seed=4,
    )
    accounting_ok = budget.epsilon * budget.classes == budget.K_at(1) * budget.kappa_max == 90
    no_dups = len(oracle.queries) == len(set(oracle.queries))
    check(
        "budget ledger for the 1+9 setting (b=1, C=10)",
        len(oracle.queries) <= 90 and no_dups and accounting_ok,
        f"{len(oracle.queries)} queries, duplicates {not no_dups}, "
        f"epsilon*C == K*kappa_max == 90: {accounting_ok}",
    )


def test_run_command_determinism(tmp_path):
    cfg = {
        "seed": 3,
        "out": str(tmp_path / "out"),
        "data": {
            "synthetic": {
                "classes": 3,
                "per_class_source": 6,
                "per_class_target": 10,
                "per_class_test": 5,
                "dim": 4,
                "noise_sigma": 0.3,
                "center_scale": 3.0,
                "shift_angle": 1.0,
                "shift_translation_norm": 1.0,
                "shift_scale": 1.0,
            }
        },
        "transfer": {
            "b": 1,
            "kappa_max": 2,
            "finetune": {"epochs": 10, "lr_head": 0.2, "lr_adapter": 0.001, "momentum": 0.9},
            "seeds": [1, 2],
        },
    }
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    assert cli_main(["run", "--config", str(path)]) == 0
    first = {p.name: p.read_bytes() for p in (tmp_path / "out").glob("*.csv")}
    assert cli_main(["run", "--config", str(path)]) == 0
    second = {p.name: p.read_bytes() for p in (tmp_path / "out").glob("*.csv")}
    identical = first == second and len(first) >= 3
    check(
        "run command reruns are byte-identical",
        identical,
        f"{len(first)} CSVs compared",
    )
