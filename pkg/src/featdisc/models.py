"""Sparse logistic regression and a small sparse-embedding MLP, trained with
mini-batch SGD or AdaGrad, plus rank-based ROC AUC.

Both models read :class:`~featdisc.encoding.EncodedData`.  A slot's
aggregated embedding is ``sum_k weight_k * E[index_k]``, so an LLE slot
contributes ``alpha * e_a + beta * e_b``.

Training is single-threaded and deterministic: batches are drawn from a
seeded permutation and the rows inside a batch are reduced in ``row_id``
order, so full-batch training does not depend on input row order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from featdisc.errors import DegenerateAUCError, EncoderMismatchError

FORMAT_VERSION = 1


def auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied scores count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateAUCError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adagrad"
    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 256
    l2: float = 0.0
    seed: int = 0
    patience: int = 3  # 0 disables early stopping

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adagrad"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("learning_rate, epochs and batch_size must be positive")
        if self.l2 < 0 or self.patience < 0:
            raise ValueError("l2 and patience must be non-negative")


@dataclass(frozen=True)
class DnnArch:
    embedding_dim: int = 10
    hidden: tuple[int, ...] = (64, 32)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass
class TrainInfo:
    best_epoch: int = 0
    valid_auc: float | None = None
    degenerate_auc: bool = False
    history: list = field(default_factory=list)


def _check(data, total_indices: int, encoder_hash: str):
    if data.encoder_hash != encoder_hash:
        raise EncoderMismatchError(f"data encoded by {data.encoder_hash}, model expects {encoder_hash}")
    if data.indices.size and (data.indices.max() >= total_indices or data.indices.min() < 0):
        raise EncoderMismatchError(f"index out of range for an embedding table of {total_indices} rows")


def _logistic_loss(logits, y):
    # mean of softplus(z) - y*z
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


class _Model:
    """Shared machinery: parameters live in ``self.params`` (dict of arrays)."""

    kind = ""
    regularized: tuple[str, ...] = ()

    def __init__(self, params, total_indices, encoder_hash, info=None):
        self.params = params
        self.total_indices = total_indices
        self.encoder_hash = encoder_hash
        self.info = info or TrainInfo()

    def predict(self, data) -> np.ndarray:
        _check(data, self.total_indices, self.encoder_hash)
        return expit(self.logits(data.indices, data.weights))

    def loss(self, data, l2: float = 0.0) -> float:
        value = _logistic_loss(self.logits(data.indices, data.weights), data.labels.astype(np.float64))
        return value + 0.5 * l2 * sum(float(np.sum(self.params[k] ** 2)) for k in self.regularized)

    def parameter_count(self) -> dict:
        emb = self.params["E"].size if "E" in self.params else self.params["w"].size
        total = sum(v.size for v in self.params.values())
        return {"embedding": int(emb), "total": int(total)}

    # serialization -------------------------------------------------------
    def _meta(self) -> dict:
        return {"version": FORMAT_VERSION, "kind": self.kind, "encoder_hash": self.encoder_hash,
                "total_indices": self.total_indices, "info": asdict(self.info)}

    def save(self, path) -> None:
        arrays = {f"p_{k}": v for k, v in self.params.items()}
        np.savez(path, __meta__=np.array(json.dumps(self._meta())), **arrays)


class LrModel(_Model):
    kind = "lr"
    regularized = ("w",)

    def logits(self, idx, wts):
        return self.params["b"][0] + np.einsum("nsk,nsk->n", self.params["w"][idx], wts)

    def loss_and_grad(self, idx, wts, y, l2):
        w = self.params["w"]
        z = self.logits(idx, wts)
        r = (expit(z) - y) / len(y)
        grad_w = np.bincount(idx.ravel(), weights=(wts * r[:, None, None]).ravel(), minlength=w.size)
        loss = _logistic_loss(z, y) + 0.5 * l2 * float(w @ w)
        return loss, {"w": grad_w + l2 * w, "b": np.array([r.sum()])}

    @classmethod
    def init(cls, total_indices, encoder_hash, rng=None, arch=None):
        return cls({"w": np.zeros(total_indices), "b": np.zeros(1)}, total_indices, encoder_hash)


class DnnModel(_Model):
    kind = "dnn"

    @property
    def regularized(self):
        return tuple(k for k in self.params if not k.startswith("b"))

    @property
    def depth(self) -> int:
        return sum(1 for k in self.params if k.startswith("W") and k != "Wout")

    def _forward(self, idx, wts):
        E = self.params["E"]
        agg = np.einsum("nsk,nskd->nsd", wts, E[idx])
        h = agg.reshape(len(idx), -1)
        acts = [h]
        pre = []
        for i in range(self.depth):
            z = h @ self.params[f"W{i}"] + self.params[f"b{i}"]
            pre.append(z)
            h = np.maximum(z, 0.0)
            acts.append(h)
        logits = h @ self.params["Wout"] + self.params["bout"][0]
        return logits, acts, pre

    def logits(self, idx, wts):
        return self._forward(idx, wts)[0]

    def loss_and_grad(self, idx, wts, y, l2):
        p = self.params
        logits, acts, pre = self._forward(idx, wts)
        r = (expit(logits) - y) / len(y)
        grads = {"Wout": acts[-1].T @ r, "bout": np.array([r.sum()])}
        dh = np.outer(r, p["Wout"])
        for i in reversed(range(self.depth)):
            dz = dh * (pre[i] > 0)
            grads[f"W{i}"] = acts[i].T @ dz
            grads[f"b{i}"] = dz.sum(axis=0)
            dh = dz @ p[f"W{i}"].T
        n, S, K = idx.shape
        d = p["E"].shape[1]
        d_agg = dh.reshape(n, S, d)
        contrib = wts[..., None] * d_agg[:, :, None, :]  # chain rule through alpha/beta
        flat_idx = idx.ravel()
        flat = contrib.reshape(-1, d)
        grads["E"] = np.stack(
            [np.bincount(flat_idx, weights=flat[:, j], minlength=p["E"].shape[0]) for j in range(d)], axis=1
        )
        loss = _logistic_loss(logits, y)
        for k in self.regularized:
            loss += 0.5 * l2 * float(np.sum(p[k] ** 2))
            grads[k] = grads[k] + l2 * p[k]
        return loss, grads

    @classmethod
    def init(cls, total_indices, encoder_hash, rng, arch: DnnArch, slot_count: int):
        d = arch.embedding_dim
        params = {"E": rng.normal(0.0, 0.05, size=(total_indices, d))}
        fan_in = slot_count * d
        for i, width in enumerate(arch.hidden):
            params[f"W{i}"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, width))
            params[f"b{i}"] = np.zeros(width)
            fan_in = width
        params["Wout"] = rng.normal(0.0, np.sqrt(1.0 / fan_in), size=fan_in)
        params["bout"] = np.zeros(1)
        return cls(params, total_indices, encoder_hash)


def load_model(path, encoder_hash: str | None = None) -> _Model:
    with np.load(path) as npz:
        meta = json.loads(str(npz["__meta__"]))
        params = {k[2:]: npz[k].copy() for k in npz.files if k.startswith("p_")}
    if meta.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model version {meta.get('version')!r}")
    if encoder_hash is not None and meta["encoder_hash"] != encoder_hash:
        raise EncoderMismatchError(f"model trained for encoder {meta['encoder_hash']}, got {encoder_hash}")
    cls = LrModel if meta["kind"] == "lr" else DnnModel
    info = TrainInfo(**meta["info"])
    return cls(params, meta["total_indices"], meta["encoder_hash"], info)


class _Optimizer:
    def __init__(self, cfg: TrainConfig, params):
        self.cfg = cfg
        self.accum = {k: np.zeros_like(v) for k, v in params.items()} if cfg.optimizer == "adagrad" else None

    def step(self, params, grads):
        lr = self.cfg.learning_rate
        for k, g in grads.items():
            if self.accum is None:
                params[k] -= lr * g
            else:
                self.accum[k] += g * g
                params[k] -= lr * g / (np.sqrt(self.accum[k]) + 1e-10)


def _fit(model: _Model, train, valid, cfg: TrainConfig) -> _Model:
    _check(train, model.total_indices, model.encoder_hash)
    _check(valid, model.total_indices, model.encoder_hash)
    rng = np.random.default_rng(cfg.seed)
    opt = _Optimizer(cfg, model.params)
    y_all = train.labels.astype(np.float64)
    valid_scorable = 0 < int(valid.labels.sum()) < len(valid)
    info = TrainInfo(degenerate_auc=not valid_scorable)
    best = {k: v.copy() for k, v in model.params.items()}
    best_auc, since_best = -np.inf, 0
    n = len(train)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            batch = batch[np.argsort(train.row_ids[batch], kind="stable")]
            _, grads = model.loss_and_grad(train.indices[batch], train.weights[batch], y_all[batch], cfg.l2)
            opt.step(model.params, grads)
        if not valid_scorable:
            info.history.append({"epoch": epoch})
            continue
        score = auc(model.logits(valid.indices, valid.weights), valid.labels)
        info.history.append({"epoch": epoch, "valid_auc": score})
        if score > best_auc:
            best_auc, since_best, info.best_epoch = score, 0, epoch
            best = {k: v.copy() for k, v in model.params.items()}
        else:
            since_best += 1
            if cfg.patience and since_best >= cfg.patience:
                break
    if valid_scorable:
        model.params = best
        info.valid_auc = best_auc
    else:
        info.best_epoch = len(info.history)
    model.info = info
    return model


def train_lr(train, valid, cfg: TrainConfig) -> LrModel:
    """Sparse LR minimizing mean logistic loss + l2*|w|^2/2.

    Returns parameters from the epoch with the best validation AUC. When the
    validation labels are single-class the AUC is undefined: training runs
    all epochs and ``model.info.degenerate_auc`` is set.
    """
    model = LrModel.init(train.total_indices, train.encoder_hash)
    return _fit(model, train, valid, cfg)


def train_dnn(train, valid, cfg: TrainConfig, arch: DnnArch | None = None) -> DnnModel:
    arch = arch or DnnArch()
    rng = np.random.default_rng([cfg.seed, 7])
    model = DnnModel.init(train.total_indices, train.encoder_hash, rng, arch, train.slot_count)
    return _fit(model, train, valid, cfg)
