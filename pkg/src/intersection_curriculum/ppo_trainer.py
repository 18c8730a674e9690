"""Curriculum PPO training loop and its baseline schedulers.

Each episode: draw a curriculum (number of SVs), roll out the stochastic
policy, run a clipped-objective PPO update on that episode, then feed the
episode return back to the curriculum bandit.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .bandit import BanditState, observe_episode, trace_header, trace_row
from .config import RunConfig, TrainerConfig, dump_yaml
from .mdp import IntersectionTask, Outcome, RewardBreakdown
from .policy_net import (ActorCriticParams, AdamState, Batch, LossGrads, actor_forward, adam_step,
                         backward, categorical_sample, critic_forward, encode_observation,
                         greedy_action, load_checkpoint, load_moments, log_softmax,
                         save_checkpoint, save_moments)

log = logging.getLogger(__name__)


@dataclass
class RolloutBuffer:
    obs: List[np.ndarray] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    log_probs: List[float] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    values: Optional[np.ndarray] = None
    dones: List[bool] = field(default_factory=list)
    breakdowns: List[RewardBreakdown] = field(default_factory=list)
    curriculum: int = 0
    outcome: Optional[Outcome] = None
    t_c: float = 0.0
    n_lc: int = 0

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


def make_task(run: RunConfig) -> IntersectionTask:
    return IntersectionTask(run.trainer.n_sv_max, run.geometry, run.behavior, run.spawn,
                            run.task, run.reward)


def collect_episode(task: IntersectionTask, params: ActorCriticParams, curriculum: int,
                    rng: np.random.Generator, pos_scale: float, speed_scale: float,
                    greedy: bool = False, goal: Optional[str] = None) -> RolloutBuffer:
    """Run one episode with exactly ``curriculum`` SVs until it terminates."""
    buf = RolloutBuffer(curriculum=curriculum)
    obs = task.reset(curriculum, rng, goal)
    while True:
        x = encode_observation(obs, pos_scale, speed_scale)
        logits = actor_forward(params, x)
        if greedy:
            a = greedy_action(logits)
            lp = float(log_softmax(logits)[a])
        else:
            a, lp = categorical_sample(logits, rng)
        res = task.step(a)
        buf.obs.append(x)
        buf.actions.append(a)
        buf.log_probs.append(lp)
        buf.rewards.append(res.reward.total)
        buf.breakdowns.append(res.reward)
        buf.dones.append(res.outcome.terminal)
        obs = res.obs
        if res.outcome.terminal:
            buf.outcome = res.outcome.status
            buf.t_c = res.outcome.t_c
            buf.n_lc = res.outcome.n_lc
            break
    if not greedy:
        buf.values = critic_forward(params, np.asarray(buf.obs))
    return buf


def gae(rewards, values, dones, gamma: float, lam: float, last_value: float = 0.0):
    """Generalized advantage estimates and returns for concatenated episodes.

    The recursion is evaluated per episode segment as a discounted reverse
    cumulative sum.
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(dones, dtype=bool)
    nxt = np.append(v[1:], last_value)
    deltas = r + gamma * nxt * (~d) - v
    adv = np.empty_like(deltas)
    start = 0
    ends = list(np.flatnonzero(d))
    if not ends or ends[-1] != len(d) - 1:
        ends.append(len(d) - 1)
    for end in ends:
        seg = deltas[start:end + 1]
        adv[start:end + 1] = lfilter([1.0], [1.0, -gamma * lam], seg[::-1])[::-1]
        start = end + 1
    return adv, adv + v


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float):
    return gae(buffer.rewards, buffer.values, buffer.dones, gamma, lam)


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    if adv.size < 2:
        return adv
    return (adv - adv.mean()) / (adv.std() + 1e-12)


def clipped_surrogate(ratio, adv, eps: float) -> np.ndarray:
    ratio = np.asarray(ratio, dtype=float)
    adv = np.asarray(adv, dtype=float)
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)


def actor_loss_fn(eps: float, entropy_coef: float):
    """Negative clipped surrogate minus an entropy bonus."""

    def loss_fn(logits, values, params, batch: Batch):
        n = logits.shape[0]
        idx = np.arange(n)
        lp_all = log_softmax(logits)
        p = np.exp(lp_all)
        ratio = np.exp(lp_all[idx, batch.actions] - batch.old_log_probs)
        adv = batch.advantages
        s1 = ratio * adv
        s2 = np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv
        ent = -(p * lp_all).sum(axis=1)
        loss = -np.minimum(s1, s2).mean() - entropy_coef * ent.mean()
        # gradient flows only through the unclipped branch when it is the min
        dlp = -np.where(s1 <= s2, s1, 0.0) / n
        dlogits = -p * dlp[:, None]
        dlogits[idx, batch.actions] += dlp
        dlogits += (entropy_coef / n) * p * (lp_all + ent[:, None])
        return loss, LossGrads(dlogits=dlogits)

    return loss_fn


def critic_loss_fn(value_coef: float):
    def loss_fn(logits, values, params, batch: Batch):
        err = values - batch.returns
        return value_coef * np.mean(err ** 2), LossGrads(dvalues=2.0 * value_coef * err / err.size)

    return loss_fn


def make_batch(buffers: Sequence[RolloutBuffer], gamma: float, lam: float,
               normalize: bool = True) -> Batch:
    advs, rets = zip(*(compute_gae(b, gamma, lam) for b in buffers))
    adv = np.concatenate(advs)
    return Batch(np.concatenate([np.asarray(b.obs) for b in buffers]),
                 np.concatenate([np.asarray(b.actions, dtype=int) for b in buffers]),
                 np.concatenate([np.asarray(b.log_probs) for b in buffers]),
                 normalize_advantages(adv) if normalize else adv,
                 np.concatenate(rets))


@dataclass
class UpdateStats:
    actor_loss: float = math.nan
    critic_loss: float = math.nan
    entropy: float = math.nan
    clip_fraction: float = math.nan
    approx_kl: float = math.nan
    aborted: bool = False


def new_optimizers(params: ActorCriticParams, tc: TrainerConfig) -> Dict[str, AdamState]:
    n_a = params.actor_slice.stop - params.actor_slice.start
    n_c = params.critic_slice.stop - params.critic_slice.start
    return {"actor": AdamState(tc.actor_lr, n_a), "critic": AdamState(tc.critic_lr, n_c)}


def ppo_update(params: ActorCriticParams, optim: Dict[str, AdamState],
               buffers: Sequence[RolloutBuffer], tc: TrainerConfig) -> UpdateStats:
    """``tc.epochs`` full-batch passes over ``buffers``; params updated in place.

    A non-finite loss or gradient restores the pre-update parameters and
    optimizer moments and returns stats flagged ``aborted``.
    """
    if not buffers:
        raise ValueError("ppo_update needs at least one buffer")
    batch = make_batch(buffers, tc.gamma, tc.gae_lambda)
    actor_loss = actor_loss_fn(tc.clip, tc.entropy_coef)
    critic_loss = critic_loss_fn(tc.value_coef)
    saved = (params.flat.copy(),
             {k: (s.m.copy(), s.v.copy(), s.step) for k, s in optim.items()})
    theta_a = params.flat[params.actor_slice]
    theta_c = params.flat[params.critic_slice]
    stats = UpdateStats()
    for _ in range(tc.epochs):
        la, ga = backward(actor_loss, params, batch, need_critic=False)
        lc, gc = backward(critic_loss, params, batch, need_actor=False)
        ga, gc = ga[params.actor_slice], gc[params.critic_slice]
        if not (math.isfinite(la) and math.isfinite(lc)
                and np.isfinite(ga).all() and np.isfinite(gc).all()):
            params.flat[...] = saved[0]
            for k, (m, v, step) in saved[1].items():
                optim[k].m[...], optim[k].v[...], optim[k].step = m, v, step
            log.warning("PPO update aborted: actor loss %r, critic loss %r", la, lc)
            return UpdateStats(la, lc, aborted=True)
        stats.actor_loss, stats.critic_loss = la, lc
        adam_step(theta_a, ga, optim["actor"])
        adam_step(theta_c, gc, optim["critic"])
    logits = actor_forward(params, batch.obs)
    lp_all = log_softmax(logits)
    lp = lp_all[np.arange(len(batch.actions)), batch.actions]
    ratio = np.exp(lp - batch.old_log_probs)
    stats.entropy = float(-(np.exp(lp_all) * lp_all).sum(axis=1).mean())
    stats.clip_fraction = float(np.mean(np.abs(ratio - 1.0) > tc.clip))
    stats.approx_kl = float(np.mean(batch.old_log_probs - lp))
    return stats


def schedule_distribution(kind: str, bandit: Optional[BanditState], t: int, n_max: int,
                          budget: int) -> np.ndarray:
    """Sampling distribution over curricula used by ``kind`` at episode ``t``."""
    if kind == "rd-acppo":
        return bandit.probabilities()
    p = np.zeros(n_max + 1)
    if kind == "fixed-ppo":
        p[n_max] = 1.0
    elif kind == "random-cppo":
        p[:] = 1.0 / (n_max + 1)
    elif kind == "manual-cppo":
        p[manual_stage(t, n_max, budget)] = 1.0
    else:
        raise ValueError(f"unknown scheduler {kind!r}")
    return p


def manual_stage(t: int, n_max: int, budget: int) -> int:
    if budget <= 0:
        return n_max
    return min(n_max, t * (n_max + 1) // budget)


def select_curriculum(kind: str, bandit: Optional[BanditState], t: int,
                      rng: np.random.Generator, n_max: int, budget: int) -> int:
    if kind == "rd-acppo":
        return bandit.sample(rng)
    if kind == "fixed-ppo":
        return n_max
    if kind == "random-cppo":
        return int(rng.integers(n_max + 1))
    if kind == "manual-cppo":
        return manual_stage(t, n_max, budget)
    raise ValueError(f"unknown scheduler {kind!r}")


class MetricsLog:
    """Per-episode training record, serialized as CSV."""

    def __init__(self, n_arms: int):
        self.n_arms = n_arms
        self.header = (["episode", "arm", "reward", "outcome", "t_c", "steps"]
                       + [f"p_{i}" for i in range(n_arms)]
                       + ["actor_loss", "critic_loss", "entropy", "clip_fraction", "aborted"])
        self.rows: List[list] = []
        self.trace_header = trace_header(n_arms)
        self.trace: List[list] = []

    def append(self, episode: int, buf: RolloutBuffer, p: np.ndarray, stats: UpdateStats):
        self.rows.append([episode, buf.curriculum, buf.total_reward, buf.outcome.value, buf.t_c,
                          len(buf), *p.tolist(), stats.actor_loss, stats.critic_loss,
                          stats.entropy, stats.clip_fraction, int(stats.aborted)])

    def column(self, name: str) -> list:
        k = self.header.index(name)
        return [row[k] for row in self.rows]

    def to_csv(self) -> str:
        return _csv_text(self.header, self.rows)

    def trace_csv(self) -> str:
        return _csv_text(self.trace_header, self.trace)

    def checksum(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()

    def __len__(self) -> int:
        return len(self.rows)


def _csv_text(header, rows) -> str:
    fh = io.StringIO()
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return fh.getvalue()


def _read_csv_rows(path: Path) -> List[list]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[1:]


@dataclass
class TrainResult:
    params: ActorCriticParams
    log: MetricsLog
    bandit: Optional[BanditState]
    optim: Dict[str, AdamState]


def _rngs(seed: int):
    init, cur, ep = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init), np.random.default_rng(cur), np.random.default_rng(ep)


def train(run: RunConfig, out_dir=None, resume: bool = False,
          progress: Optional[Callable[[int, MetricsLog], None]] = None) -> TrainResult:
    """Train a driving policy under ``run.trainer.baseline``'s curriculum.

    With ``out_dir`` set, a checkpoint, the metrics log and the bandit trace
    are written every ``checkpoint_every`` episodes and at the end;
    ``resume=True`` continues from the files found there.
    """
    run.validate()
    tc = run.trainer
    n_max = tc.n_sv_max
    kind = tc.baseline
    task = make_task(run)
    n_in = (n_max + 1) * 6
    init_rng, cur_rng, ep_rng = _rngs(run.seed)
    params = ActorCriticParams.initialize(n_in, init_rng, tc.actor_hidden, tc.critic_hidden)
    optim = new_optimizers(params, tc)
    bandit = BanditState.create(n_max, run.bandit) if kind == "rd-acppo" else None
    log_ = MetricsLog(n_max + 1)
    start = 0
    out = Path(out_dir) if out_dir is not None else None
    if resume:
        if out is None:
            raise ValueError("resume needs an output directory")
        start, params, optim, bandit = _load_state(out, run, log_, cur_rng, ep_rng)

    for ep in range(start, tc.episodes):
        p = schedule_distribution(kind, bandit, ep, n_max, tc.episodes)
        arm = select_curriculum(kind, bandit, ep, cur_rng, n_max, tc.episodes)
        buf = collect_episode(task, params, arm, ep_rng, run.pos_scale, run.speed_scale)
        stats = ppo_update(params, optim, [buf], tc)
        if bandit is not None:
            step = observe_episode(bandit, arm, buf.total_reward)
            log_.trace.append(trace_row(step))
        else:
            log_.trace.append([ep + 1, arm, buf.total_reward, "", ""] + p.tolist()
                              + [""] * (n_max + 1))
        log_.append(ep, buf, p, stats)
        if progress is not None:
            progress(ep, log_)
        if out is not None and tc.checkpoint_every and (ep + 1) % tc.checkpoint_every == 0:
            _save_state(out, run, ep + 1, params, optim, bandit, log_, cur_rng, ep_rng)
    if out is not None:
        _save_state(out, run, tc.episodes, params, optim, bandit, log_, cur_rng, ep_rng)
    return TrainResult(params, log_, bandit, optim)


def _save_state(out: Path, run: RunConfig, episode: int, params, optim, bandit, log_: MetricsLog,
                cur_rng, ep_rng) -> None:
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.bin", params,
                    {"episode": episode, "n_sv_max": run.trainer.n_sv_max,
                     "pos_scale": run.pos_scale, "speed_scale": run.speed_scale,
                     "seed": run.seed, "baseline": run.trainer.baseline, "label": run.label})
    save_moments(out / "moments.bin", optim)
    state = {"episode": episode,
             "adam_steps": {k: s.step for k, s in optim.items()},
             "bandit": bandit.to_dict() if bandit is not None else None,
             "rng": {"curriculum": cur_rng.bit_generator.state,
                     "episode": ep_rng.bit_generator.state}}
    (out / "trainer_state.json").write_text(json.dumps(state))
    (out / "metrics.csv").write_text(log_.to_csv())
    (out / "bandit_trace.csv").write_text(log_.trace_csv())
    (out / "config.yaml").write_text(dump_yaml(run))


def _load_state(out: Path, run: RunConfig, log_: MetricsLog, cur_rng, ep_rng):
    state = json.loads((out / "trainer_state.json").read_text())
    params, _ = load_checkpoint(out / "checkpoint.bin")
    optim = new_optimizers(params, run.trainer)
    load_moments(out / "moments.bin", optim)
    for k, st in optim.items():
        st.step = state["adam_steps"][k]
    bandit = (BanditState.from_dict(state["bandit"], run.bandit)
              if state["bandit"] is not None else None)
    cur_rng.bit_generator.state = state["rng"]["curriculum"]
    ep_rng.bit_generator.state = state["rng"]["episode"]
    log_.rows = _read_csv_rows(out / "metrics.csv")
    log_.trace = _read_csv_rows(out / "bandit_trace.csv")
    return state["episode"], params, optim, bandit
