"""Online DQN training of the MCMIPL agent."""
import collections
import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .dialog_state import finish, init_state, update_after_question, update_after_recommendation
from .encoder import build_global_graph
from .model import MCMIPL, construct_action, init_params
from .numeric import adam_step, grad, load_params, no_grad, ops, save_params
from .policy import Ask, RewardConfig, StarvedActionSpace, sample_action_space, turn_reward
from .scenario import answer_question, answer_recommendation, sample_episode

log = logging.getLogger(__name__)

LOG_FIELDS = ("episode", "success", "turns", "reward", "loss", "epsilon")


@dataclass
class Experience:
    state: object  # StateFeatures of s_t
    action: tuple  # (kind, id)
    reward: float
    next_state: object  # StateFeatures of s_{t+1}, None when terminal
    next_actions: list = field(default_factory=list)
    terminal: bool = False


class ReplayBuffer:
    """FIFO ring buffer with uniform sampling without replacement."""

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.items = collections.deque(maxlen=capacity)

    def __len__(self):
        return len(self.items)

    def push(self, exp):
        if exp.terminal and exp.next_actions:
            raise ValueError("terminal experiences must carry an empty next action space")
        self.items.append(exp)

    def sample(self, batch_size, rng):
        if len(self.items) < batch_size:
            return None
        idx = rng.choice(len(self.items), size=batch_size, replace=False)
        return [self.items[i] for i in sorted(idx)]


def push_and_sample(buffer, experience, batch_size, rng):
    buffer.push(experience)
    return buffer.sample(batch_size, rng)


def td_targets(batch, gamma, model, params, target_params=None):
    """y = r for terminal transitions, else r + gamma * max_a' Q(s', a')."""
    y = np.array([e.reward for e in batch], dtype=np.float64)
    boot = []
    for i, e in enumerate(batch):
        if e.terminal:
            continue
        if not e.next_actions:
            log.warning("non-terminal experience without next actions; treating as terminal")
            continue
        boot.append(i)
    if boot and gamma != 0:
        net = target_params if target_params is not None else params
        with no_grad():
            q, seg, _ = model.forward(net, [batch[i].next_state for i in boot],
                                      [batch[i].next_actions for i in boot])
        best = np.full(len(boot), -np.inf)
        np.maximum.at(best, seg, q.data.astype(np.float64))
        y[boot] += gamma * best
    return y


def td_target(experience, gamma, model, params, target_params=None):
    return float(td_targets([experience], gamma, model, params, target_params)[0])


def batch_loss(batch, model, params, targets):
    """Mean squared TD error as a Tensor (records a tape)."""
    q, _, _ = model.forward(params, [e.state for e in batch], [[e.action] for e in batch])
    diff = ops.sub(q, np.asarray(targets))
    return ops.mean(ops.square(diff))


def trainable_names(params, cfg):
    return [n for n in params.names() if not (cfg.freeze_embeddings and n == "node_emb")]


def train_step(batch, model, params, cfg, target_params=None):
    """One Adam update on the squared TD error; returns the pre-update loss."""
    if not batch:
        raise ValueError("empty batch")
    y = td_targets(batch, cfg.gamma, model, params, target_params)
    frozen = [params[n] for n in params.names() if n not in trainable_names(params, cfg)]
    for t in frozen:
        t.requires_grad = False  # no tape through frozen inputs
    try:
        loss = batch_loss(batch, model, params, y)
    finally:
        for t in frozen:
            t.requires_grad = True
    value = loss.item()
    if not np.isfinite(value):
        raise FloatingPointError(
            f"non-finite TD loss {value}; targets range [{y.min()}, {y.max()}], "
            f"param norms: " + ", ".join(f"{n}={np.linalg.norm(params[n].data):.3g}" for n in params.names())
        )
    grads = grad(loss, params)
    adam_step(params, grads, lr=cfg.lr, trainable=trainable_names(params, cfg))
    return value


def reward_config(cfg):
    return RewardConfig(cfg.r_rec_suc, cfg.r_rec_fail, cfg.r_ask_suc, cfg.r_ask_fail, cfg.r_quit)


def step_environment(state, action, episode, catalog, cfg, rewards):
    """Apply one agent action; returns (next_state, feedback, reward)."""
    if isinstance(action, Ask):
        fb = answer_question(episode, catalog, action.instances)
        nxt = update_after_question(state, fb.accepted, fb.rejected, catalog, cfg.candidate_mode,
                                    cfg.prune_attrs)
    else:
        fb = answer_recommendation(episode, action.items)
        nxt = update_after_recommendation(state, action.items, fb.success, catalog, cfg.prune_attrs)
    r = turn_reward(fb, rewards)
    if not nxt.terminal and nxt.turn >= episode.max_turns:
        nxt = finish(nxt)
        r += rewards.r_quit
    return nxt, fb, r


class Trainer:
    """Owns the model context, parameters, replay buffer and RNG streams."""

    def __init__(self, catalog, split, store, cfg, params=None):
        self.catalog = catalog
        self.cfg = cfg
        self.pairs = list(split.train)
        if not self.pairs:
            raise ValueError("training split is empty")
        self.model = MCMIPL(catalog, store, build_global_graph(catalog, split.train), cfg)
        seeds = np.random.SeedSequence(cfg.seed).spawn(4)
        init_seed = int(seeds[0].generate_state(1)[0])
        self.params = params if params is not None else init_params(store, cfg, init_seed)
        self.target = self.params.copy() if cfg.use_target_net else None
        self.episode_rng = np.random.default_rng(seeds[1])
        self.explore_rng = np.random.default_rng(seeds[2])
        self.replay_rng = np.random.default_rng(seeds[3])
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.rewards = reward_config(cfg)
        self.log = []
        self.steps = 0

    def next_episode(self):
        while True:
            pair = self.pairs[int(self.episode_rng.integers(len(self.pairs)))]
            ep = sample_episode(self.catalog, pair, self.cfg.n_v, int(self.episode_rng.integers(2**31)),
                                self.cfg.max_turns)
            if ep is not None:
                return ep

    def run_episode(self, index):
        cfg, model = self.cfg, self.model
        eps = cfg.epsilon(index)
        episode = self.next_episode()
        state = init_state(episode.user, episode.seed_instance, self.catalog)
        feats = model.featurize(state)
        try:
            space = sample_action_space(state, self.catalog, model.store, cfg.k_v, cfg.k_p)
        except StarvedActionSpace:
            space = None
        total, losses, success = 0.0, [], False
        while space is not None:
            qvals, _ = model.q_values(self.params, state, space, feats)
            forced = None
            if self.explore_rng.random() < eps:
                acts = space.actions()
                forced = acts[int(self.explore_rng.integers(len(acts)))]
            action, stored = construct_action(qvals, space, self.catalog, cfg, forced)
            nxt, fb, r = step_environment(state, action, episode, self.catalog, cfg, self.rewards)
            next_space = next_feats = None
            if not nxt.terminal:
                try:
                    next_space = sample_action_space(nxt, self.catalog, model.store, cfg.k_v, cfg.k_p)
                    next_feats = model.featurize(nxt)
                except StarvedActionSpace:
                    nxt = finish(nxt)
                    r += self.rewards.r_quit
            total += r
            self.buffer.push(Experience(feats, stored, r, next_feats,
                                        next_space.actions() if next_space is not None else [],
                                        nxt.terminal))
            self.steps += 1
            if self.steps % cfg.train_every == 0:
                batch = self.buffer.sample(cfg.batch_size, self.replay_rng)
                if batch is not None:
                    losses.append(train_step(batch, model, self.params, cfg, self.target))
            success = nxt.success
            state, feats, space = nxt, next_feats, next_space
        if self.target is not None and (index + 1) % cfg.target_update_interval == 0:
            self.target = self.params.copy()
        row = {
            "episode": index,
            "success": int(success),
            "turns": state.turn,
            "reward": total,
            "loss": float(np.mean(losses)) if losses else float("nan"),
            "epsilon": eps,
        }
        self.log.append(row)
        return row

    def run(self, checkpoint_dir=None, progress=None):
        for i in range(self.cfg.episodes):
            row = self.run_episode(i)
            if progress is not None:
                progress(row)
            if checkpoint_dir and self.cfg.checkpoint_every and (i + 1) % self.cfg.checkpoint_every == 0:
                save_checkpoint(self.params, os.path.join(checkpoint_dir, f"model_ep{i + 1}.ckpt"))
        return self.params, self.log


def run_training(catalog, split, store, cfg, checkpoint_dir=None, progress=None):
    """Train from scratch; returns (ParamStore, per-episode log rows)."""
    trainer = Trainer(catalog, split, store, cfg)
    return trainer.run(checkpoint_dir, progress)


def save_checkpoint(params, path):
    save_params(params, path)


def load_checkpoint(path):
    return load_params(path)


def write_log(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=LOG_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{row[k]:.6g}" if isinstance(row[k], float) else row[k]) for k in LOG_FIELDS})


def moving_average(values, window):
    values = np.asarray(values, dtype=np.float64)
    if len(values) < window:
        return values.mean(keepdims=True) if len(values) else values
    c = np.cumsum(np.concatenate([[0.0], values]))
    return (c[window:] - c[:-window]) / window
