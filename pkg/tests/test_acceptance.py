"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.

Criterion 7a needs the real HIGGS file; point ``FEATDISC_DATA_DIR`` at a
directory holding ``HIGGS.csv`` or ``HIGGS.csv.gz``.  Without it 7a is
reported as SKIP and 7b/7c run on the synthetic stand-ins.
"""

from __future__ import annotations

import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from featdisc import binning, encoding, experiment, theory
from featdisc.datasets import NumericDataset, SplitSpec, split
from featdisc.experiment import DatasetConfig, EncoderChoice, ExperimentConfig
from featdisc.models import DnnArch, DnnModel, LrModel, TrainConfig, auc, train_dnn, train_lr

LINES: list[str] = []


def report(key: str, ok: bool | None, detail: str) -> bool | None:
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
    line = f"[{status}] criterion {key}: {detail}"
    LINES.append(line)
    print(line)
    return ok


# --- 1 ------------------------------------------------------------------------

def check_1():
    t = time.perf_counter()
    reports = theory.lemma1_campaign(n_fields=100, seed=0)
    elapsed = time.perf_counter() - t
    violations = sum(r.violations for _, r in reports)
    err = max(r.max_decomposition_error for _, r in reports)
    families = sorted({f for f, _ in reports})
    ok = violations == 0 and err <= 1e-9 and elapsed < 10 and len(reports) >= 100
    return report("1", ok, f"{len(reports)} fields ({'/'.join(families)}), {violations} violations, "
                           f"max decomposition error {err:.2e}, {elapsed:.2f}s")


# --- 2 and 4 ----------------------------------------------------------------------

_GRID = {}


def robustness_cells():
    if "cells" not in _GRID:
        t = time.perf_counter()
        _GRID["cells"] = theory.robustness_grid((2, 4, 8, 16), (0.5, 1.0, 2.0), trials=100_000, seed=0)
        _GRID["elapsed"] = time.perf_counter() - t
    return _GRID["cells"], _GRID["elapsed"]


def _worst(cells, pick):
    def z(c):
        est = pick(c)
        return abs(est.estimate - c.closed_form) / est.std_error
    worst = max(cells, key=z)
    return worst, z(worst)


def check_2():
    cells, elapsed = robustness_cells()
    inside = sum(c.cd.within(c.closed_form) for c in cells)
    sizes = (2, 4, 8, 16)
    monotone = all(
        theory.analytic_robustness_cd(theory.robustness_bin(a, s)) > theory.analytic_robustness_cd(theory.robustness_bin(b, s))
        for s in (0.5, 1.0, 2.0) for a, b in zip(sizes, sizes[1:])
    )
    w, z = _worst(cells, lambda c: c.cd)
    exact = sum(c.cd.within(c.exact) for c in cells)
    ok = inside == len(cells) and monotone and elapsed < 30
    return report("2", ok, f"CD Monte-Carlo within 3 SE of sigma^2/|B|^2 in {inside}/{len(cells)} cells "
                           f"(worst |B|={w.size}, sigma={w.sigma}: {w.cd.estimate:.5f} vs {w.closed_form:.5f}, {z:.0f} SE); "
                           f"analytic monotone={monotone}; estimates match sigma^2/|B| in {exact}/{len(cells)}; "
                           f"grid {elapsed:.1f}s")


def check_4():
    cells, _ = robustness_cells()
    inside = sum(c.lle.within(c.closed_form) for c in cells)
    same = sum(c.lle_matches_cd for c in cells)
    w, z = _worst(cells, lambda c: c.lle)
    ok = inside == len(cells)
    return report("4", ok, f"LLE Monte-Carlo within 3 SE of sigma^2/|B|^2 in {inside}/{len(cells)} cells "
                           f"(worst |B|={w.size}, sigma={w.sigma}: {z:.0f} SE); "
                           f"LLE indistinguishable from CD on matched seeds in {same}/{len(cells)}")


# --- 3 ------------------------------------------------------------------------

def check_3():
    rep = theory.lemma3_campaign(n_bins=200, seed=0)
    rng = np.random.default_rng(11)
    worst_affine = 0.0
    for _ in range(200):
        b = theory.random_bin(rng)
        slope, icpt = rng.uniform(-5, 5, 2)
        affine = theory.TheoryBin(b.values, slope * b.values + icpt)
        worst_affine = max(worst_affine, theory.analytic_correctness_lle(affine))
    ok = rep.bins >= 100 and rep.violations == 0 and worst_affine <= 1e-10
    return report("3", ok, f"{rep.bins} random bins, {rep.violations} violations (least-squares slope), "
                           f"max LLE correctness on affine truth {worst_affine:.1e}; "
                           f"uncentered slope would exceed CD on {rep.uncentered_violations}/{rep.bins}")


# --- 5 ------------------------------------------------------------------------

def check_5():
    rng = np.random.default_rng(5)
    fields = [rng.normal(size=5000), rng.exponential(size=5000), rng.uniform(-3, 3, 5000),
              np.round(rng.normal(size=5000), 1)]
    total = sum_ok = range_ok = beta_bits = alpha_bits = 0
    max_dev = 0.0
    for f, col in enumerate(fields):
        bins = binning.fit_equal_frequency(col, 10, field_id=f)
        values = rng.uniform(col.min() - 0.5, col.max() + 0.5, 10_000)
        b, alpha, beta = encoding.lle_weights(bins, values)
        bnd = bins.boundaries
        for v, bi, a, be in zip(values.tolist(), b.tolist(), alpha.tolist(), beta.tolist()):
            va, vb = bnd[bi], bnd[bi + 1]
            vc = min(max(v, va), vb)
            beta_ref = (vc - va) / (vb - va)  # independent scalar recomputation
            alpha_ref = (vb - vc) / (vb - va)
            total += 1
            sum_ok += (a + be) == 1.0
            range_ok += 0.0 <= a <= 1.0 and 0.0 <= be <= 1.0
            beta_bits += be == beta_ref
            alpha_bits += a == 1.0 - beta_ref
            max_dev = max(max_dev, abs(a - alpha_ref))
    ok = sum_ok == range_ok == beta_bits == alpha_bits == total
    return report("5", ok, f"{total} values over {len(fields)} fields: alpha+beta==1 {sum_ok}, in [0,1] {range_ok}, "
                           f"beta bitwise {beta_bits}, alpha bitwise to 1-beta {alpha_bits}; "
                           f"alpha vs (vb-vc)/(vb-va) max deviation {max_dev / sys.float_info.epsilon:.1f} eps")


# --- 6 ------------------------------------------------------------------------

def check_6():
    rng = np.random.default_rng(0)
    counts = {}
    for fields in (28, 18):
        spec = encoding.fit_encoder(rng.normal(size=(2000, fields)), "LLE", 10)
        counts[fields] = encoding.count_parameters(spec, 1)
    ratios = []
    for kind in ("higgs", "susy"):
        cfg = experiment.desk_scale_config(kind)
        ds = experiment.load_dataset(cfg.dataset)
        for r in cfg.ratios:
            data = experiment.partitions(ds, cfg.split, r)
            mgd_spec, sel = experiment.fit_cell_encoder(cfg, EncoderChoice("MGD"), data)
            lle_spec, _ = experiment.fit_cell_encoder(cfg, EncoderChoice("LLE", 10), data)
            ratios.append((kind, r, encoding.count_parameters(mgd_spec, 1), encoding.count_parameters(lle_spec, 1)))
    min_ratio = min(m / l for _, _, m, l in ratios)
    ok = counts[28] == 308 and counts[18] == 198 and min_ratio >= 50
    detail = ", ".join(f"{k}-like {r:g}: MGD {m} vs LLE {l}" for k, r, m, l in ratios)
    return report("6", ok, f"LLE dim 1: 28 fields -> {counts[28]}, 18 fields -> {counts[18]}; {detail}; "
                           f"min ratio {min_ratio:.0f}x")


# --- 7 ------------------------------------------------------------------------

_DESK = {}


def desk_results(kind):
    if kind not in _DESK:
        _DESK[kind] = {(r.encoder, r.ratio): r.auc100 for r in experiment.run_experiment(experiment.desk_scale_config(kind))}
    return _DESK[kind]


def higgs_path():
    root = os.environ.get(experiment.DATA_DIR_ENV)
    if not root:
        return None
    for name in ("HIGGS.csv", "HIGGS.csv.gz"):
        if (Path(root) / name).exists():
            return Path(root) / name
    return None


def check_7a():
    path = higgs_path()
    if path is None:
        return report("7a", None, f"HIGGS not found (set {experiment.DATA_DIR_ENV}); reference AUC 76.26 not checked")
    cfg = ExperimentConfig(dataset=DatasetConfig(path=str(path)), encoders=(EncoderChoice("CD", 10),), ratios=(0.01,))
    (res,) = experiment.run_experiment(cfg)
    ok = res.auc100 is not None and abs(res.auc100 - 76.26) <= 1.5
    return report("7a", ok, f"HIGGS 1% LR CD(10) AUC x100 = {res.auc100:.2f} (target 76.26 +/- 1.5)")


def check_7b():
    parts, ok = [], True
    for kind in ("higgs", "susy"):
        res = desk_results(kind)
        for r in (0.1, 0.01):
            lle, cd = res[("LLE(10)", r)], res[("CD(10)", r)]
            ok &= lle >= cd
            parts.append(f"{kind}-like {r:g}: LLE(10) {lle:.2f} vs CD(10) {cd:.2f}")
    return report("7b", ok, "; ".join(parts))


def check_7c():
    parts, ok = [], True
    for kind in ("higgs", "susy"):
        res = desk_results(kind)
        cd_drop = res[("CD(100)", 0.1)] - res[("CD(100)", 0.01)]
        lle_drop = res[("LLE(10)", 0.1)] - res[("LLE(10)", 0.01)]
        ok &= cd_drop > lle_drop
        parts.append(f"{kind}-like 10%->1% drop: CD(100) {cd_drop:.2f}, LLE(10) {lle_drop:.2f}")
    return report("7c", ok, "; ".join(parts))


# --- 8 ------------------------------------------------------------------------

def _toy(n, fields, g, kind="LLE", seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, fields))
    logits = np.sin(2 * X[:, 0]) + X[:, 1] ** 2 - 1
    y = (rng.random(n) < 1 / (1 + np.exp(-2 * logits))).astype(int)
    tr, va, te = split(NumericDataset(X, y), SplitSpec(seed=seed))
    spec = encoding.fit_encoder(tr.features, kind, g)
    return [encoding.encode(spec, d) for d in (tr, va, te)]


def _fd_error(model, data, l2, eps=1e-6):
    y = data.labels.astype(float)
    _, grads = model.loss_and_grad(data.indices, data.weights, y, l2)
    worst = 0.0
    for name, param in model.params.items():
        flat = param.reshape(-1)
        num = np.empty(flat.size)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = model.loss_and_grad(data.indices, data.weights, y, l2)[0]
            flat[i] = old - eps
            down = model.loss_and_grad(data.indices, data.weights, y, l2)[0]
            flat[i] = old
            num[i] = (up - down) / (2 * eps)
        g = grads[name].reshape(-1)
        worst = max(worst, np.linalg.norm(g - num) / max(np.linalg.norm(g) + np.linalg.norm(num), 1e-12))
    return worst


def check_8():
    tr, _, _ = _toy(400, 2, 3)
    toy = tr.take(np.arange(16))
    lr = LrModel.init(toy.total_indices, toy.encoder_hash)
    lr.params["w"][:] = np.random.default_rng(1).normal(size=lr.params["w"].size)
    lr_err = _fd_error(lr, toy, 0.01)
    dnn = DnnModel.init(toy.total_indices, toy.encoder_hash, np.random.default_rng(0), DnnArch(2, (5,)), 2)
    dnn_err = _fd_error(dnn, toy, 0.01)

    tr, va, te = _toy(4000, 3, 5)
    cfg = TrainConfig(epochs=100, learning_rate=0.5, patience=0)
    a_lr = 100 * auc(train_lr(tr, va, cfg).predict(te), te.labels)
    a_dnn = 100 * auc(train_dnn(tr, va, cfg, DnnArch(1, ())).predict(te), te.labels)
    ok = lr_err < 1e-4 and dnn_err < 1e-4 and abs(a_lr - a_dnn) <= 0.5
    return report("8", ok, f"finite-difference relative error LR {lr_err:.1e}, DNN {dnn_err:.1e}; "
                           f"zero-hidden dim-1 DNN {a_dnn:.2f} vs LR {a_lr:.2f}")


# --- 9 ------------------------------------------------------------------------

def check_9():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = experiment.desk_scale_config("susy", rows=20_000, output_dir=tmp,
                                           encoders=(EncoderChoice("LLE", 10), EncoderChoice("MGD")),
                                           ratios=(0.1,), models=("lr", "dnn"),
                                           train=TrainConfig(epochs=5))
        first = experiment.run_experiment(cfg)
        same = []
        for cell, res in zip(cfg.cells(), first):
            single = ExperimentConfig.load(Path(tmp) / "cells" / cell.cell_id / "config.json")
            (again,) = experiment.run_experiment(single)
            same.append(again.auc100 == res.auc100 and again.config_hash == res.config_hash)
    ok = all(same) and not any(r.error for r in first)
    return report("9", ok, f"{sum(same)}/{len(same)} cells re-run from persisted config bit-identical "
                           f"({', '.join(f'{r.encoder}/{r.model} {r.auc100!r}' for r in first)})")


CHECKS = {"1": check_1, "2": check_2, "3": check_3, "4": check_4, "5": check_5, "6": check_6,
          "7a": check_7a, "7b": check_7b, "7c": check_7c, "8": check_8, "9": check_9}


@pytest.mark.parametrize("key", list(CHECKS))
def test_criterion(key):
    ok = CHECKS[key]()
    if ok is None:
        pytest.skip(LINES[-1])
    assert ok, LINES[-1]


if __name__ == "__main__":
    results = [CHECKS[k]() for k in CHECKS]
    sys.exit(0 if all(r is not False for r in results) else 1)
