"""Pairwise preference reward model over fixed-width segment features.

The feature extractor is frozen and documented here; learning happens in a
small scoring net trained with the Bradley-Terry loss -ln(sigmoid(r_w - r_l))
(zero margin). The model never replaces the programmatic critic by default;
its score can be blended into training rewards via config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..microworld.types import DomainSpec, Segment
from ..numerics.net import NetParams, net_backward_batch, net_forward_batch, net_init
from ..numerics.optim import opt_init, opt_step
from ..numerics.rng import RandomSource
from ..planner.types import PlanStep
from .scoring import CONTACT_RADIUS, DIMENSIONS, evaluate

RM_HIDDEN = 16


@dataclass(frozen=True)
class PreferencePair:
    winner: np.ndarray
    loser: np.ndarray


@dataclass
class RewardModelParams:
    net: NetParams
    feature_width: int


def feature_width(spec: DomainSpec) -> int:
    return spec.n_predicates + 2 + len(DIMENSIONS)


def features(spec: DomainSpec, segment: Segment, step: PlanStep) -> np.ndarray:
    """Fixed-width feature vector for one (segment, step) pair.

    Layout: per-predicate post satisfaction (1/0 where the step's post
    literals bind the channel, 0.5 elsewhere), mean squared second
    difference, mean actor-target distance over the contact window (the
    contact radius when not applicable), then the five critic scores.
    """
    report = evaluate(spec, segment, step)
    sat = np.full(spec.n_predicates, 0.5)
    final = segment.final_frame
    for lit in step.post:
        idx = spec.channel_index[lit.pred]
        hit = (final[idx] >= 0.5) == lit.value
        sat[idx] = 1.0 if hit else 0.0
    frames = segment.frames
    if frames.shape[0] < 3:
        msd = 0.0
    else:
        second = frames[2:] - 2.0 * frames[1:-1] + frames[:-2]
        msd = float(np.mean(second * second))
    if report.details["contact_applicable"]:
        w0, w1 = report.details["contact_window"]
        # recover the mean window distance from the stored per_action score context
        proximity = _mean_window_distance(spec, segment, step, (w0, w1))
    else:
        proximity = CONTACT_RADIUS
    dims = [report.scores[d] for d in DIMENSIONS]
    return np.concatenate([sat, [msd, proximity], dims])


def _mean_window_distance(spec, segment, step, window) -> float:
    op = spec.find_operator(step.actions[0])
    actor = spec.acting_entity(op)
    frames = segment.frames
    ax = spec.channel_index[f"{actor}.x"]
    ay = spec.channel_index[f"{actor}.y"]
    target = op.motion.target
    if spec.objects[target].movable:
        tx = frames[:, spec.channel_index[f"{target}.x"]]
        ty = frames[:, spec.channel_index[f"{target}.y"]]
    else:
        tx, ty = spec.objects[target].position
    dist = np.hypot(frames[:, ax] - tx, frames[:, ay] - ty)
    w0, w1 = window
    return float(dist[w0 : w1 + 1].mean())


def bt_loss(reward_winner: float, reward_loser: float, margin: float = 0.0) -> float:
    """Bradley-Terry loss -ln(sigmoid(w - l - margin)); ln(2) at a tie."""
    m = reward_winner - reward_loser - margin
    return float(np.logaddexp(0.0, -m))


def rm_init(width: int, rng: RandomSource) -> RewardModelParams:
    return RewardModelParams(net_init([width, RM_HIDDEN, 1], rng), width)


def rm_score(params: RewardModelParams, feats: np.ndarray) -> float:
    feats = np.asarray(feats, dtype=np.float64)
    if feats.shape != (params.feature_width,):
        raise ValueError(f"features have shape {feats.shape}, expected ({params.feature_width},)")
    return float(net_forward_batch(params.net, feats[None, :])[0, 0])


def rm_train(
    pairs: list[PreferencePair],
    rng: RandomSource,
    epochs: int = 60,
    lr: float = 1e-2,
    holdout_frac: float = 0.2,
    batch_size: int = 32,
) -> tuple[RewardModelParams, dict]:
    """Train on preference pairs; returns (params, history).

    history carries per-epoch mean train loss and the final held-out
    accuracy (fraction of held-out pairs ranked correctly).
    """
    if not pairs:
        raise ValueError("rm_train needs at least one preference pair")
    width = pairs[0].winner.shape[0]
    for p in pairs:
        if p.winner.shape != (width,) or p.loser.shape != (width,):
            raise ValueError("all pair features must share one width")

    order = list(range(len(pairs)))
    rng.shuffle(order)
    n_hold = int(len(pairs) * holdout_frac)
    hold = [pairs[i] for i in order[:n_hold]]
    train = [pairs[i] for i in order[n_hold:]] or hold

    params = rm_init(width, rng.split(1))
    state = opt_init(params.net)
    losses: list[float] = []
    for _ in range(epochs):
        idx = list(range(len(train)))
        rng.shuffle(idx)
        epoch_loss = 0.0
        for lo in range(0, len(idx), batch_size):
            chunk = idx[lo : lo + batch_size]
            w = np.stack([train[i].winner for i in chunk])
            l = np.stack([train[i].loser for i in chunk])
            sw = net_forward_batch(params.net, w)[:, 0]
            sl = net_forward_batch(params.net, l)[:, 0]
            m = sw - sl
            epoch_loss += float(np.logaddexp(0.0, -m).sum())
            # dL/dm = sigmoid(m) - 1, averaged over the batch
            g = (1.0 / (1.0 + np.exp(-m)) - 1.0) / len(chunk)
            gw, _ = net_backward_batch(params.net, w, g[:, None])
            gl, _ = net_backward_batch(params.net, l, -g[:, None])
            grads = [a + b for a, b in zip(gw, gl)]
            new_net, state = opt_step(params.net, grads, state, lr)
            params = RewardModelParams(new_net, width)
        losses.append(epoch_loss / len(train))

    correct = sum(
        rm_score(params, p.winner) > rm_score(params, p.loser) for p in hold
    )
    accuracy = correct / len(hold) if hold else float("nan")
    return params, {"train_loss": losses, "holdout_accuracy": accuracy, "n_holdout": len(hold)}


def synthetic_pairs(
    count: int, width: int, rng: RandomSource, gap: float = 0.5
) -> list[PreferencePair]:
    """Separable pairs: the winner dominates the loser coordinate-wise."""
    pairs = []
    for _ in range(count):
        base = rng.uniform(0.0, 1.0, width)
        delta = rng.uniform(0.05, gap, width)
        pairs.append(PreferencePair(base + delta, base - delta))
    return pairs
