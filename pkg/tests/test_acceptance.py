"""Acceptance gate: one test per shipped guarantee.

Each test prints a single [PASS]/[FAIL] line with the measured value
next to its bound, then asserts. Oracles here are deliberately
independent re-implementations (plain loops, scipy reductions) rather
than calls back into the code under test.
"""
import time
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.special import logsumexp

from conftest import TINY_DIMS
from voxfuse.archive import read_embedding_archive, write_embedding_archive
from voxfuse.cli import main as cli_main
from voxfuse.data import (
    Augmentation, EmbeddingRecord, EmbeddingSet, Modality, load_manifest,
)
from voxfuse.model import FusionModel, ModelConfig, aam_loss_and_grad
from voxfuse.nn.gradcheck import gradient_check, input_gradient_check
from voxfuse.nn.layers import GELU, LayerNorm, Linear, ReLU, Sigmoid, Softmax
from voxfuse.nn.optim import LrSchedule, cyclic_lr
from voxfuse.scoring import Cohort, as_norm, as_norm_from_scores, compute_eer
from voxfuse.training import TrainConfig, class_index, epoch_batches, train_pool

EXPECTED_PARAMS = 3_335_045


def check(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_parameter_count():
    t0 = time.monotonic()
    model = FusionModel(ModelConfig(), seed=0)
    count = model.count_parameters()
    elapsed = time.monotonic() - t0
    check("parameter_count",
          count == EXPECTED_PARAMS and elapsed < 1.0,
          f"{count:,} trainable parameters (expected {EXPECTED_PARAMS:,}) "
          f"in {elapsed:.3f}s (< 1s)")


def _layer_error(layer, x, rng) -> float:
    """Max relative FD error over the layer's parameters (if any) and its
    input."""
    params = layer.parameters() if hasattr(layer, "parameters") else []
    probe = layer.forward(x)
    weights = rng.standard_normal(probe.shape)
    for p in params:
        p.zero_grad()
    layer.forward(x)
    gx = layer.backward(weights)

    def loss() -> float:
        return float((layer.forward(x) * weights).sum())

    worst = input_gradient_check(loss, x, gx)
    if params:
        worst = max(worst, gradient_check(loss, params))
    return worst


def _unit_layer_errors(seed: int) -> float:
    rng = np.random.default_rng([seed, 50])
    batch = 3
    worst = 0.0
    worst = max(worst, _layer_error(Linear(5, 4, rng, name="g.lin"),
                                    rng.standard_normal((batch, 5)), rng))
    worst = max(worst, _layer_error(LayerNorm(6, name="g.ln"),
                                    rng.standard_normal((batch, 6)), rng))
    relu_x = rng.standard_normal((batch, 7))
    relu_x[np.abs(relu_x) < 0.1] = 0.5  # keep FD probes off the kink
    worst = max(worst, _layer_error(ReLU(), relu_x, rng))
    for smooth in (GELU(), Sigmoid(), Softmax()):
        worst = max(worst, _layer_error(
            smooth, rng.standard_normal((batch, 7)), rng))
    return worst


def _composed_loss_error(seed: int) -> float:
    """FD check of the full weighted four-term loss over every model
    parameter, eval-mode forward (dropout inactive), float64 end to end."""
    config = ModelConfig(**TINY_DIMS)
    model = FusionModel(config, seed=seed)
    rng = np.random.default_rng([seed, 51])
    audio = rng.standard_normal((2, config.audio_in))
    text = rng.standard_normal((2, config.text_in))
    targets = rng.integers(0, config.n_classes, 2)
    for p in model.parameters():
        p.zero_grad()
    state = model.forward(audio, text)
    model.loss_and_backward(state, targets)

    def loss() -> float:
        st = model.forward(audio, text)
        parts = (st.z_ens, st.z_fusion, st.z_audio, st.z_text)
        return sum(
            w * aam_loss_and_grad(z, targets, config.aam_scale,
                                  config.aam_margin)[0]
            for w, z in zip(config.loss_weights, parts))

    return gradient_check(loss, model.parameters())


def test_gradient_suite():
    t0 = time.monotonic()
    n_seeds = 20
    worst = 0.0
    for seed in range(n_seeds):
        worst = max(worst, _unit_layer_errors(seed))
        worst = max(worst, _composed_loss_error(seed))
    elapsed = time.monotonic() - t0
    check("gradient_suite",
          worst <= 1e-4 and elapsed < 60.0,
          f"max rel err {worst:.3e} (<= 1e-4) across 6 unit layers + "
          f"composed loss, {n_seeds} seeds, in {elapsed:.1f}s (< 60s)")


def test_aam_reduction():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        b = int(rng.integers(1, 9))
        c = int(rng.integers(2, 15))
        scale = float(rng.uniform(1.0, 40.0))
        cosines = rng.uniform(-0.999, 0.999, (b, c))
        targets = rng.integers(0, c, b)
        loss, _ = aam_loss_and_grad(cosines.copy(), targets, scale, 0.0)
        logits = scale * cosines
        reference = float(np.mean(
            logsumexp(logits, axis=1) - logits[np.arange(b), targets]))
        worst = max(worst, abs(loss - reference))

    grid = (0.0, 0.05, 0.1, 0.15, 0.2)
    monotone = True
    for _ in range(20):
        b = int(rng.integers(2, 9))
        c = int(rng.integers(2, 15))
        cosines = rng.uniform(-0.999, 0.999, (b, c))
        targets = rng.integers(0, c, b)
        losses = [aam_loss_and_grad(cosines.copy(), targets, 30.0, m)[0]
                  for m in grid]
        if any(hi < lo - 1e-12 for lo, hi in zip(losses, losses[1:])):
            monotone = False
    check("aam_reduction",
          worst <= 1e-12 and monotone,
          f"margin-0 vs scaled softmax CE: max |diff| {worst:.3e} "
          f"(<= 1e-12) on 1000 cases; loss nondecreasing on margin grid "
          f"{grid}: {monotone}")


def brute_force_eer(target_scores, nontarget_scores) -> float:
    """Plain-loop threshold sweep with the same accept-when->=-threshold
    convention, trailing reject-all point, and linear interpolation."""
    targets = sorted(float(s) for s in target_scores)
    nontargets = sorted(float(s) for s in nontarget_scores)
    thresholds = sorted(set(targets) | set(nontargets))
    thresholds.append(thresholds[-1] + 1.0)
    points = []
    for theta in thresholds:
        far = sum(1 for s in nontargets if s >= theta) / len(nontargets)
        frr = sum(1 for s in targets if s < theta) / len(targets)
        points.append((far, frr))
    prev_far, prev_frr = points[0]
    for far, frr in points[1:]:
        if far - frr < 0.0:
            d_prev = prev_far - prev_frr
            d_cur = far - frr
            if d_prev == d_cur:
                return prev_frr
            alpha = d_prev / (d_prev - d_cur)
            return prev_frr + alpha * (frr - prev_frr)
        prev_far, prev_frr = far, frr
    raise AssertionError("no crossing found")


def test_eer_oracle():
    rng = np.random.default_rng(77)
    worst = 0.0
    for case in range(1000):
        nt_size = int(rng.integers(1, 51))
        t_size = int(rng.integers(1, 51))
        targets = rng.normal(rng.uniform(-1, 1), rng.uniform(0.2, 2), t_size)
        nontargets = rng.normal(rng.uniform(-1, 1), rng.uniform(0.2, 2),
                                nt_size)
        if case % 3 == 0:  # force heavy ties
            targets = np.round(targets * 2) / 2
            nontargets = np.round(nontargets * 2) / 2
        got = compute_eer(targets, nontargets)
        ref = brute_force_eer(targets, nontargets)
        worst = max(worst, abs(got - ref))

    separated = compute_eer([1.0, 2.0, 3.0], [-1.0, 0.0, 0.5])
    mc = np.random.default_rng(7)
    stress = compute_eer(mc.normal(size=10_000), mc.normal(size=10_000))
    check("eer_oracle",
          worst <= 1e-9 and separated == 0.0 and abs(stress - 0.5) <= 0.02,
          f"max |diff| vs brute-force sweep {worst:.3e} (<= 1e-9) on 1000 "
          f"cases; perfect separation -> {separated}; identical-distribution "
          f"stress (10^4 scores/side) -> {stress:.4f} (0.5 +- 0.02)")


def brute_force_as_norm(raw, enroll_emb, test_emb, cohort_embeddings,
                        top_k) -> float:
    total = 0.0
    for vec in (enroll_emb, test_emb):
        vec = np.asarray(vec, dtype=np.float64)
        vec = vec / np.linalg.norm(vec)
        scores = []
        for row in cohort_embeddings:
            row = np.asarray(row, dtype=np.float64)
            scores.append(float(vec @ (row / np.linalg.norm(row))))
        top = sorted(scores, reverse=True)[:top_k]
        mu = sum(top) / len(top)
        sd = (sum((s - mu) ** 2 for s in top) / len(top)) ** 0.5
        total += (raw - mu) / max(sd, 1e-6)
    return 0.5 * total


def test_as_norm_oracle():
    hand = as_norm_from_scores(0.5, np.array([0.1, 0.3]), np.array([0.2, 0.4]),
                               top_k=2)
    hand_err = abs(hand - 2.5)

    rng = np.random.default_rng(99)
    worst = 0.0
    for case in range(500):
        n = int(rng.integers(2, 41))
        dim = int(rng.integers(2, 9))
        k = int(rng.integers(2, n + 1))
        cohort_embeddings = rng.standard_normal((n, dim))
        if case % 4 == 0 and n >= 4:  # duplicated rows force score ties
            cohort_embeddings[1] = cohort_embeddings[0]
        enroll_emb = rng.standard_normal(dim)
        test_emb = rng.standard_normal(dim)
        raw = float(rng.uniform(-1, 1))
        got = as_norm(raw, enroll_emb, test_emb,
                      Cohort(cohort_embeddings, top_k=k))
        ref = brute_force_as_norm(raw, enroll_emb, test_emb,
                                  cohort_embeddings, k)
        worst = max(worst, abs(got - ref))
    check("as_norm_oracle",
          hand_err <= 1e-9 and worst <= 1e-9,
          f"hand case |2.5 - {hand}| = {hand_err:.2e}; max |diff| vs "
          f"brute-force top-K {worst:.3e} (<= 1e-9) on 500 cases")


def test_cyclic_lr():
    schedule = LrSchedule(lr_min=1e-6, lr_max=1e-4, cycle_steps=13000)
    endpoints = (cyclic_lr(0, schedule) == 1e-6
                 and cyclic_lr(6500, schedule) == 1e-4
                 and cyclic_lr(13000, schedule) == 1e-6)
    periodic = all(
        cyclic_lr(step, schedule)
        == cyclic_lr(step + 13000, schedule)
        == cyclic_lr(step + 26000, schedule)
        for step in range(0, 13000, 13))
    check("cyclic_lr",
          endpoints and periodic,
          f"lr(0)={cyclic_lr(0, schedule):.0e}, "
          f"lr(6500)={cyclic_lr(6500, schedule):.0e}, "
          f"lr(13000)={cyclic_lr(13000, schedule):.0e} exact; "
          f"periodic over 3 cycles at 1000 probe steps: {periodic}")


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    """Full desk-scale pipeline: 20x20 synthetic export then training."""
    base = tmp_path_factory.mktemp("accept")
    corpus = base / "corpus"
    t0 = time.monotonic()
    assert cli_main(["export-synth", "--out", str(corpus), "--seed", "7"]) == 0
    export_seconds = time.monotonic() - t0

    config_path = base / "run.cfg"
    write_run_config(config_path, corpus, base)
    t1 = time.monotonic()
    assert cli_main(["train", "--config", str(config_path)]) == 0
    train_seconds = time.monotonic() - t1
    return SimpleNamespace(
        base=base, corpus=corpus, config=config_path,
        checkpoint=base / "model.npz", log=base / "metrics.tsv",
        export_seconds=export_seconds, train_seconds=train_seconds)


def write_run_config(path, corpus, workdir):
    settings = {
        "audio_archive": corpus / "audio.vxa",
        "text_archive": corpus / "text.vxa",
        "manifest": corpus / "manifest.tsv",
        "trials": corpus / "trials_dev.tsv",
        "checkpoint": workdir / "model.npz",
        "metric_log": workdir / "metrics.tsv",
        # desk-scale cycle: reach a useful rate within a few epochs
        "lr_min": "1e-5",
        "lr_max": "3e-3",
        "cycle_steps": 500,
        "early_stop_patience": 10,
        "rng_seed": 7,
    }
    path.write_text("".join(f"{k} = {v}\n" for k, v in settings.items()),
                    encoding="utf-8")


def _read_metrics(log_path):
    lines = log_path.read_text().splitlines()
    rows = [line.split("\t") for line in lines[1:]]
    return [(int(r[0]), float(r[1]), float(r[2])) for r in rows]


def _report_eer_avg(report_path) -> float:
    last = report_path.read_text().splitlines()[-1]
    label, _, value = last.split("\t")
    assert label == "EER_avg"
    return float(value)


def test_end_to_end_synthetic(synthetic_run):
    t0 = time.monotonic()
    report = synthetic_run.base / "report.tsv"
    rc = cli_main(["evaluate", "--config", str(synthetic_run.config),
                   "--out", str(report)])
    eval_seconds = time.monotonic() - t0
    assert rc == 0
    eer = _report_eer_avg(report)

    metrics = _read_metrics(synthetic_run.log)
    losses = [loss for _epoch, loss, _eer in metrics]
    assert len(losses) >= 5
    monotone = all(b < a for a, b in zip(losses[:5], losses[1:5]))

    text_report = synthetic_run.base / "report_text.tsv"
    rc = cli_main(["evaluate", "--config", str(synthetic_run.config),
                   "--mode", "text_only", "--out", str(text_report)])
    assert rc == 0
    text_eer = _report_eer_avg(text_report)

    total = (synthetic_run.export_seconds + synthetic_run.train_seconds
             + eval_seconds)
    check("end_to_end_synthetic",
          eer <= 5.0 and monotone and text_eer < 40.0 and total <= 600.0,
          f"dev EER {eer:.2f}% (<= 5%); train loss strictly decreasing over "
          f"epochs 1-5: {monotone} ({', '.join(f'{l:.3f}' for l in losses[:5])}); "
          f"text_only EER {text_eer:.2f}% (< 40%); "
          f"export+train+evaluate {total:.0f}s (<= 600s)")


def test_batch_recipe(synthetic_run):
    manifest = load_manifest(synthetic_run.corpus / "manifest.tsv")
    audio_set = read_embedding_archive(synthetic_run.corpus / "audio.vxa")
    text_set = read_embedding_archive(synthetic_run.corpus / "text.vxa")

    augmented = TrainConfig(augmentation=frozenset({"spec_augment"}))
    pool = train_pool(manifest, augmented)
    classes = class_index(manifest, augmented)
    rng = np.random.default_rng(3)
    aug_ok, n_aug = True, 0
    for batch in epoch_batches(pool, classes, audio_set, text_set,
                               augmented, rng):
        n_aug += 1
        tags = [aug for _utt, aug in batch.items]
        counts = {tag: tags.count(tag) for tag in Augmentation}
        aug_ok &= (len(tags) == 32
                   and counts[Augmentation.ORIGINAL] == 8
                   and counts[Augmentation.TIME_MASK] == 8
                   and counts[Augmentation.FREQ_MASK] == 8
                   and counts[Augmentation.SPEED] == 8)

    plain = TrainConfig(augmentation=frozenset())
    plain_ok, n_plain = True, 0
    for batch in epoch_batches(pool, classes, audio_set, text_set,
                               plain, rng):
        n_plain += 1
        originals = [utt for utt, aug in batch.items
                     if aug is Augmentation.ORIGINAL]
        plain_ok &= (len(batch.items) == 32 and len(originals) == 32
                     and len(set(originals)) == 32)

    check("batch_recipe",
          aug_ok and plain_ok and n_aug > 0 and n_plain > 0,
          f"augmentation on: {n_aug} batches each 8 originals + 24 tagged "
          f"variants (8/8/8); off: {n_plain} batches each 32 distinct "
          f"originals")


def _random_archive(rng) -> EmbeddingSet:
    modality = Modality.AUDIO if rng.integers(2) else Modality.TEXT
    dim = int(rng.integers(1, 13))
    count = int(rng.integers(2, 61))
    keys = set()
    while len(keys) < count:
        keys.add((f"spk{int(rng.integers(8))}-é",
                  f"utt{int(rng.integers(40)):02d}",
                  Augmentation(list(Augmentation)[int(rng.integers(4))])))
    archive = EmbeddingSet(dim, modality)
    for speaker, utterance, aug in sorted(keys, key=str):
        archive.add(EmbeddingRecord(
            speaker_id=speaker, utterance_id=utterance, modality=modality,
            augmentation=aug,
            vector=rng.standard_normal(dim).astype(np.float32)))
    return archive


def test_format_round_trip(tmp_path):
    rng = np.random.default_rng(41)
    cases = [EmbeddingSet(4, Modality.AUDIO),
             EmbeddingSet(3, Modality.TEXT)]
    cases[1].add(EmbeddingRecord("solo", "only-one", Modality.TEXT,
                                 Augmentation.ORIGINAL,
                                 np.array([1, 2, 3], np.float32)))
    cases.extend(_random_archive(rng) for _ in range(10))

    ok = True
    for i, archive in enumerate(cases):
        path = tmp_path / f"case{i}.vxa"
        write_embedding_archive(archive, path)
        first = path.read_bytes()
        loaded = read_embedding_archive(path)
        ok &= loaded == archive
        again = tmp_path / f"case{i}b.vxa"
        write_embedding_archive(loaded, again)
        ok &= again.read_bytes() == first
    check("format_round_trip", ok,
          f"{len(cases)} archives (incl. empty and single-record) "
          f"read back equal and re-serialize byte-identically")


def test_determinism(synthetic_run):
    base = synthetic_run.base
    corpus2 = base / "corpus2"
    assert cli_main(["export-synth", "--out", str(corpus2),
                     "--seed", "7"]) == 0
    archives_equal = all(
        (synthetic_run.corpus / name).read_bytes()
        == (corpus2 / name).read_bytes()
        for name in ("audio.vxa", "text.vxa", "manifest.tsv",
                     "trials_dev.tsv"))

    work2 = base / "rerun"
    work2.mkdir()
    config2 = base / "run2.cfg"
    write_run_config(config2, corpus2, work2)
    assert cli_main(["train", "--config", str(config2)]) == 0

    logs_equal = (synthetic_run.log.read_text()
                  == (work2 / "metrics.tsv").read_text())
    params_equal = True
    with np.load(synthetic_run.checkpoint) as a, \
            np.load(work2 / "model.npz") as b:
        assert set(a.files) == set(b.files)
        for key in a.files:
            if key.startswith(("param/", "best/")):
                params_equal &= bool(np.array_equal(a[key], b[key]))
    check("determinism",
          archives_equal and logs_equal and params_equal,
          f"re-export byte-identical: {archives_equal}; metric logs "
          f"identical: {logs_equal}; final and best parameters "
          f"bit-identical: {params_equal}")
