"""Training loops for the five strategies.

Each ``train_*`` function takes prepared data plus the run's random streams
and returns the trained networks together with a per-epoch trace. All state is
local to the call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import nnet, selection, semisup
from ..datagen import LabeledDataset
from ..metrics import bac, confusion
from ..nnet import PLAIN, CostWeights, MlpParams, OptimState
from .config import ExperimentConfig


class TrainingFailure(RuntimeError):
    def __init__(self, epoch: int, message: str):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass
class Net:
    params: MlpParams
    opt: OptimState

    def probs(self, x: np.ndarray) -> np.ndarray:
        return nnet.forward(self.params, x)[1]

    def step(self, grads: MlpParams, lr: float) -> None:
        nnet.sgd_momentum_step(self.params, grads, self.opt, lr)


@dataclass
class Streams:
    """Independent generators for one run, all spawned from the run seed."""

    init_a: np.random.Generator
    init_b: np.random.Generator
    shuffle: np.random.Generator
    augment: np.random.Generator
    mix: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> Streams:
        children = np.random.SeedSequence([int(seed), 0x5EED]).spawn(5)
        return cls(*(np.random.default_rng(c) for c in children))


@dataclass
class TrainData:
    train: LabeledDataset
    val: LabeledDataset

    @property
    def x(self) -> np.ndarray:
        return self.train.features

    @property
    def y(self) -> np.ndarray:
        return self.train.observed_labels


@dataclass
class Trace:
    epochs: list[dict] = field(default_factory=list)

    def add(self, epoch, train_loss, selected_fraction, val_bac, quality=None):
        q = quality or {}
        self.epochs.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "selected_fraction": selected_fraction,
                "val_bac": val_bac,
                "sel_agreement": q.get("agreement"),
                "sel_precision": q.get("precision"),
                "sel_recall": q.get("recall"),
            }
        )


def _make_net(n_in: int, cfg: ExperimentConfig, rng: np.random.Generator) -> Net:
    params = nnet.init_mlp(n_in, cfg.train.hidden, rng)
    opt = OptimState.for_params(params, cfg.train.momentum, cfg.train.base_lr, cfg.train.epochs)
    return Net(params, opt)


def _check_finite(value: float, epoch: int) -> float:
    if not math.isfinite(value):
        raise TrainingFailure(epoch, f"non-finite training loss ({value})")
    return value


def _batches(idx: np.ndarray, batch_size: int, rng: np.random.Generator):
    order = idx[rng.permutation(len(idx))]
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]


def _ce_losses(net: Net, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return nnet.ce_per_sample(net.probs(x), y)


def ensemble_probs(nets: list[Net], x: np.ndarray) -> np.ndarray:
    return np.mean([n.probs(x) for n in nets], axis=0)


def _val_bac(nets: list[Net], data: TrainData, threshold: float) -> float | None:
    p = ensemble_probs(nets, data.val.features)
    return bac(confusion(nnet.predict_from_probs(p, threshold), data.val.observed_labels))


def _weights(cfg: ExperimentConfig, epoch: int, has_warmup: bool) -> CostWeights:
    if not cfg.cost_sensitive:
        return PLAIN
    if has_warmup and epoch < cfg.train.warmup_epochs and not cfg.train.cs_during_warmup:
        return PLAIN
    return cfg.cost


def _sgd_epoch(net: Net, x, y, idx, cfg: ExperimentConfig, weights: CostWeights, lr: float, rng, epoch: int) -> float:
    total, count = 0.0, 0
    for b in _batches(idx, cfg.train.batch_size, rng):
        try:
            loss, grads = nnet.loss_and_grad(net.params, x[b], y[b], weights)
        except nnet.NonFiniteError as exc:
            raise TrainingFailure(epoch, str(exc)) from None
        _check_finite(loss, epoch)
        net.step(grads, lr)
        total += loss * len(b)
        count += len(b)
    return total / max(count, 1)


def _lr(cfg: ExperimentConfig, epoch: int) -> float:
    return nnet.cosine_lr(epoch, cfg.train.epochs, cfg.train.base_lr)


def _divide(net: Net, data: TrainData, cfg: ExperimentConfig, uniform: bool = False) -> selection.SelectionMask:
    losses = _ce_losses(net, data.x, data.y)
    g = cfg.gmm
    div = selection.divide_by_gmm(losses, g.tau, g.tol, g.max_iter, data.y, g.class_thresholds)
    if not uniform:
        return div.selection
    budget = div.gmm.clean_weight if div.gmm is not None else 1.0
    if not np.isin((0, 1), data.y).all():
        return div.selection
    return selection.uniform_class_select(div.selection.clean_posterior, data.y, budget)


# -- single network -----------------------------------------------------------


def train_baseline(data: TrainData, cfg: ExperimentConfig, streams: Streams):
    net = _make_net(data.x.shape[1], cfg, streams.init_a)
    trace = Trace()
    all_idx = np.arange(len(data.y))
    for epoch in range(cfg.train.epochs):
        w = _weights(cfg, epoch, has_warmup=False)
        loss = _sgd_epoch(net, data.x, data.y, all_idx, cfg, w, _lr(cfg, epoch), streams.shuffle, epoch)
        trace.add(epoch, loss, 1.0, _val_bac([net], data, cfg.threshold))
    return [net], trace


def train_gmm_filter(data: TrainData, cfg: ExperimentConfig, streams: Streams):
    net = _make_net(data.x.shape[1], cfg, streams.init_a)
    trace = Trace()
    all_idx = np.arange(len(data.y))
    for epoch in range(cfg.train.epochs):
        w = _weights(cfg, epoch, has_warmup=True)
        quality = None
        if epoch < cfg.train.warmup_epochs:
            idx = all_idx
        else:
            sel = _divide(net, data, cfg)
            idx = np.flatnonzero(sel.mask) if sel.mask.any() else all_idx
            quality = selection.selection_quality(sel.mask, data.train.flip_mask)
        loss = _sgd_epoch(net, data.x, data.y, idx, cfg, w, _lr(cfg, epoch), streams.shuffle, epoch)
        trace.add(epoch, loss, len(idx) / len(all_idx), _val_bac([net], data, cfg.threshold), quality)
    return [net], trace


# -- co-teaching --------------------------------------------------------------


def _peer_update(net: Net, x, y, weights, lr, epoch) -> float:
    try:
        loss, grads = nnet.loss_and_grad(net.params, x, y, weights)
    except nnet.NonFiniteError as exc:
        raise TrainingFailure(epoch, str(exc)) from None
    _check_finite(loss, epoch)
    net.step(grads, lr)
    return loss


def train_co_teaching(data: TrainData, cfg: ExperimentConfig, streams: Streams):
    """Two networks; each trains on the small-loss samples picked by its peer."""
    n_in = data.x.shape[1]
    a, b = _make_net(n_in, cfg, streams.init_a), _make_net(n_in, cfg, streams.init_b)
    trace = Trace()
    n = len(data.y)
    all_idx = np.arange(n)
    fr = cfg.noise_rate if cfg.coteaching.forget_rate is None else cfg.coteaching.forget_rate
    for epoch in range(cfg.train.epochs):
        keep = selection.forget_rate(epoch, fr, cfg.coteaching.ramp_epochs)
        w = _weights(cfg, epoch, has_warmup=False)
        lr = _lr(cfg, epoch)
        picked_by_a = np.zeros(n, dtype=bool)
        total, count = 0.0, 0
        if cfg.coteaching.granularity == "epoch":
            sel_a = selection.small_loss_select(_ce_losses(a, data.x, data.y), keep)
            sel_b = selection.small_loss_select(_ce_losses(b, data.x, data.y), keep)
            picked_by_a[sel_a] = True
            for batch in _batches(sel_b, cfg.train.batch_size, streams.shuffle):
                total += _peer_update(a, data.x[batch], data.y[batch], w, lr, epoch) * len(batch)
                count += len(batch)
            for batch in _batches(sel_a, cfg.train.batch_size, streams.shuffle):
                _peer_update(b, data.x[batch], data.y[batch], w, lr, epoch)
        else:
            for batch in _batches(all_idx, cfg.train.batch_size, streams.shuffle):
                xb, yb = data.x[batch], data.y[batch]
                la = nnet.ce_per_sample(a.probs(xb), yb)
                lb = nnet.ce_per_sample(b.probs(xb), yb)
                ia = selection.small_loss_select(la, keep)
                ib = selection.small_loss_select(lb, keep)
                picked_by_a[batch[ia]] = True
                total += _peer_update(a, xb[ib], yb[ib], w, lr, epoch) * len(ib)
                count += len(ib)
                _peer_update(b, xb[ia], yb[ia], w, lr, epoch)
        quality = selection.selection_quality(picked_by_a, data.train.flip_mask)
        trace.add(epoch, total / max(count, 1), float(picked_by_a.mean()), _val_bac([a, b], data, cfg.threshold), quality)
    return [a, b], trace


# -- co-divide semi-supervised (DivideMix / UNICON) ---------------------------


def _semi_epoch(
    net: Net,
    peer: Net,
    sel: selection.SelectionMask,
    data: TrainData,
    cfg: ExperimentConfig,
    epoch: int,
    sigma: np.ndarray,
    streams: Streams,
) -> float:
    semi = cfg.semi
    weights = _weights(cfg, epoch, has_warmup=True)
    lr = _lr(cfg, epoch)
    labeled = np.flatnonzero(sel.mask)
    unlabeled = np.flatnonzero(~sel.mask)
    if labeled.size == 0:
        labeled, unlabeled = unlabeled, labeled
    w_clean = sel.clean_posterior
    if not sel.mask.any():
        w_clean = np.ones_like(w_clean)
    prior = np.bincount(data.y, minlength=2) / len(data.y)
    bs = cfg.train.batch_size
    num_iter = math.ceil(labeled.size / bs)
    u_order = unlabeled[streams.shuffle.permutation(unlabeled.size)] if unlabeled.size else unlabeled
    u_pos = 0
    total = 0.0
    for it, lb in enumerate(_batches(labeled, bs, streams.shuffle)):
        if u_order.size:
            take = (u_pos + np.arange(len(lb))) % u_order.size
            ub = u_order[take]
            u_pos = int((u_pos + len(lb)) % u_order.size)
        else:
            ub = u_order
        xl, yl = data.x[lb], data.y[lb]
        xl_aug = [semisup.augment(xl, sigma, streams.augment) for _ in range(semi.n_aug)]
        p_bar = np.mean([net.probs(v) for v in xl_aug], axis=0)
        q_l = semisup.sharpen(semisup.co_refine(yl, w_clean[lb], p_bar), semi.temperature)

        if ub.size:
            xu = data.x[ub]
            xu_aug = [semisup.augment(xu, sigma, streams.augment) for _ in range(semi.n_aug)]
            guesses = [m.probs(v) for v in xu_aug for m in (net, peer)]
            q_u = semisup.sharpen(semisup.co_guess(guesses), semi.temperature)
            all_x = np.concatenate(xl_aug + xu_aug)
            all_q = np.concatenate([q_l] * semi.n_aug + [q_u] * semi.n_aug)
        else:
            all_x = np.concatenate(xl_aug)
            all_q = np.concatenate([q_l] * semi.n_aug)

        perm = streams.mix.permutation(len(all_x))
        mx, mq, _ = semisup.mixup(all_x, all_q, all_x[perm], all_q[perm], semi.alpha, streams.mix)
        n_l = len(lb) * semi.n_aug
        try:
            acts = nnet.forward_cached(net.params, mx)
        except nnet.NonFiniteError as exc:
            raise TrainingFailure(epoch, str(exc)) from None
        probs = nnet.softmax(acts[-1])
        lam_u = semisup.linear_rampup(epoch + it / num_iter - cfg.train.warmup_epochs, semi.rampup_epochs, semi.lambda_u)
        loss = semisup.semi_loss(probs[:n_l], mq[:n_l], probs[n_l:], mq[n_l:], lam_u, weights)
        gx, gu = semisup.semi_loss_logit_grads(probs[:n_l], mq[:n_l], probs[n_l:], mq[n_l:], lam_u, weights)
        dlogits = np.concatenate([gx, gu])
        if semi.prior_weight > 0:
            loss += semi.prior_weight * semisup.prior_penalty(probs, prior)
            dlogits += semi.prior_weight * semisup.prior_penalty_logit_grad(probs, prior)
        try:
            grads = nnet.backward_from_logits(net.params, acts, dlogits)
        except nnet.NonFiniteError as exc:
            raise TrainingFailure(epoch, str(exc)) from None
        _check_finite(loss, epoch)
        net.step(grads, lr)
        total += loss
    return total / max(num_iter, 1)


def _train_codivide(data: TrainData, cfg: ExperimentConfig, streams: Streams, uniform: bool):
    n_in = data.x.shape[1]
    a, b = _make_net(n_in, cfg, streams.init_a), _make_net(n_in, cfg, streams.init_b)
    sigma = cfg.semi.aug_scale * data.x.std(axis=0)
    trace = Trace()
    all_idx = np.arange(len(data.y))
    for epoch in range(cfg.train.epochs):
        if epoch < cfg.train.warmup_epochs:
            w = _weights(cfg, epoch, has_warmup=True)
            loss = _sgd_epoch(a, data.x, data.y, all_idx, cfg, w, _lr(cfg, epoch), streams.shuffle, epoch)
            _sgd_epoch(b, data.x, data.y, all_idx, cfg, w, _lr(cfg, epoch), streams.shuffle, epoch)
            trace.add(epoch, loss, 1.0, _val_bac([a, b], data, cfg.threshold))
            continue
        # each network trains on the division computed from its peer's losses
        div_from_b = _divide(b, data, cfg, uniform)
        div_from_a = _divide(a, data, cfg, uniform)
        loss = _semi_epoch(a, b, div_from_b, data, cfg, epoch, sigma, streams)
        _semi_epoch(b, a, div_from_a, data, cfg, epoch, sigma, streams)
        quality = selection.selection_quality(div_from_b.mask, data.train.flip_mask)
        frac = 0.5 * (div_from_b.fraction + div_from_a.fraction)
        trace.add(epoch, loss, frac, _val_bac([a, b], data, cfg.threshold), quality)
    return [a, b], trace


def train_dividemix(data, cfg, streams):
    return _train_codivide(data, cfg, streams, uniform=False)


def train_unicon(data, cfg, streams):
    """DivideMix flow with class-uniform selection sized by the GMM clean mass."""
    return _train_codivide(data, cfg, streams, uniform=True)


TRAINERS = {
    "baseline": train_baseline,
    "gmm_filter": train_gmm_filter,
    "co_teaching": train_co_teaching,
    "dividemix": train_dividemix,
    "unicon": train_unicon,
}
