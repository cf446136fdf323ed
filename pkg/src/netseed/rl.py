"""Offline policy learning: transition construction, conservative Q-learning
with a small feed-forward network, and finite-horizon linear pessimistic
value iteration with an elliptical bonus.

The Q-network is a plain numpy MLP with hand-written backprop and Adam so
training is bit-reproducible from a seed. The pessimistic value iteration
core is feature-agnostic: it consumes per-stage datasets of (feature,
reward, next-stage candidate features) and everything network-specific is
routed through ``feature_map``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .diffusion import Panel, reward
from .graphs import BinPartition, Graph
from .ising import BinState, IsingParams, belief_no_intervention, build_state
from .rng import RngTree

log = logging.getLogger(__name__)

__all__ = [
    "Transition",
    "QNetwork",
    "CqlHyper",
    "PeviStageData",
    "PeviPolicy",
    "build_transitions",
    "transitions_to_arrays",
    "cql_loss",
    "cql_loss_and_grads",
    "train_cql",
    "feature_map",
    "stage_datasets_from_transitions",
    "train_pevi",
    "pevi_bonus",
    "pevi_uncertainty",
    "bonus_beta_from_radius",
    "save_qnetwork",
    "load_qnetwork",
    "save_pevi",
    "load_pevi",
    "save_transitions",
    "load_transitions",
]


@dataclass
class Transition:
    s: BinState
    b: int
    r: float
    s_next: BinState

    def __post_init__(self):
        if not (0.0 <= self.r <= 1.0):
            raise ValueError("reward must lie in [0,1]")
        if not (0 <= self.b < self.s.K):
            raise ValueError("action bin out of range")


def _panel_states(
    panel: Panel,
    params: IsingParams | None,
    graph: Graph,
    partition: BinPartition,
    use_beliefs: bool,
) -> list[BinState]:
    """BinState for each lagged outcome y_0 .. y_{T-1}."""
    states = []
    for t in range(1, len(panel) + 1):
        y_prev = panel.outcome_before(t)
        if use_beliefs:
            if params is None:
                raise ValueError("belief states require fitted parameters")
            l0 = belief_no_intervention(params, graph, partition, y_prev)
        else:
            l0 = y_prev.astype(float)
        states.append(build_state(l0, y_prev, partition))
    return states


def build_transitions(
    panel: Panel,
    params: IsingParams | None,
    graph: Graph,
    partition: BinPartition,
    use_beliefs: bool = True,
) -> list[Transition]:
    """Map a logged panel into state-action-reward-state tuples.

    Periods whose logged action is None are skipped (counted in the log).
    ``use_beliefs=False`` replaces the forward-looking half of the state
    with a copy of the lagged-adoption half, keeping dimensions fixed; this
    is the ablation without the structural model.
    """
    if len(panel) < 2:
        raise ValueError("need at least two panel periods to form transitions")
    states = _panel_states(panel, params, graph, partition, use_beliefs)
    transitions: list[Transition] = []
    skipped = 0
    for t in range(1, len(panel)):
        a = panel.actions[t - 1]
        if a is None:
            skipped += 1
            continue
        transitions.append(
            Transition(
                s=states[t - 1],
                b=int(partition.bin_of[a]),
                r=reward(panel.outcomes[t - 1]),
                s_next=states[t],
            )
        )
    if skipped:
        log.info("skipped %d periods with no realized seed", skipped)
    if not transitions:
        raise ValueError("panel contains no usable transitions (all actions were None)")
    return transitions


def transitions_to_arrays(transitions) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    s = np.stack([tr.s.vector() for tr in transitions])
    b = np.array([tr.b for tr in transitions], dtype=np.int64)
    r = np.array([tr.r for tr in transitions])
    s2 = np.stack([tr.s_next.vector() for tr in transitions])
    return s, b, r, s2


# ---------------------------------------------------------------------------
# Q-network
# ---------------------------------------------------------------------------

class QNetwork:
    """MLP from state vectors to one Q-value per action, ReLU activations.

    Weights are initialized uniform in +-1/sqrt(fan_in) from the provided
    generator; ``q_values`` always runs without dropout.
    """

    def __init__(self, state_dim: int, n_actions: int, hidden=(256, 256), rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.state_dim = int(state_dim)
        self.n_actions = int(n_actions)
        self.hidden = tuple(int(h) for h in hidden)
        widths = [self.state_dim, *self.hidden, self.n_actions]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))
        self.meta: dict = {}

    def copy(self) -> "QNetwork":
        clone = QNetwork.__new__(QNetwork)
        clone.state_dim = self.state_dim
        clone.n_actions = self.n_actions
        clone.hidden = self.hidden
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        clone.meta = dict(self.meta)
        return clone

    def sync_from(self, other: "QNetwork") -> None:
        for mine, theirs in zip(self.weights, other.weights):
            mine[...] = theirs
        for mine, theirs in zip(self.biases, other.biases):
            mine[...] = theirs

    def _forward(self, x: np.ndarray, dropout_masks=None):
        """Returns (pre-activations, post-activations, q). Dropout masks are
        inverted (already scaled) multipliers for each hidden layer."""
        acts = [x]
        pres = []
        h = x
        n_layers = len(self.weights)
        for i in range(n_layers):
            z = h @ self.weights[i] + self.biases[i]
            pres.append(z)
            if i < n_layers - 1:
                h = np.maximum(z, 0.0)
                if dropout_masks is not None:
                    h = h * dropout_masks[i]
                acts.append(h)
        return pres, acts, pres[-1]

    def q_values(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        _, _, q = self._forward(states)
        return q

    def act(self, state_vector: np.ndarray) -> int:
        """Greedy action, lowest index on ties."""
        return int(np.argmax(self.q_values(state_vector)[0]))


def _as_arrays(batch):
    if isinstance(batch, tuple):
        return batch
    return transitions_to_arrays(batch)


def _bellman_targets(target_q: QNetwork, r: np.ndarray, s_next: np.ndarray, psi: float) -> np.ndarray:
    return r + psi * target_q.q_values(s_next).max(axis=1)


def cql_loss(q: QNetwork, batch, target_q: QNetwork, alpha: float, psi: float) -> float:
    """Bellman regression error plus the conservative log-sum-exp penalty.

    The Bellman target uses the frozen target network; the penalty pushes
    down Q on all actions at logged states while pushing up the logged
    action's value.
    """
    loss, _, _, _ = cql_loss_and_grads(q, batch, target_q, alpha, psi, compute_grads=False)
    return loss


def _logsumexp(x: np.ndarray, axis=-1) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def cql_loss_and_grads(
    q: QNetwork,
    batch,
    target_q: QNetwork,
    alpha: float,
    psi: float,
    dropout_masks=None,
    compute_grads: bool = True,
):
    """Loss, Bellman term, and weight/bias gradients for one minibatch."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if not (0.0 <= psi < 1.0):
        raise ValueError("discount must lie in [0,1)")
    s, b, r, s_next = _as_arrays(batch)
    batch_size = s.shape[0]
    targets = _bellman_targets(target_q, r, s_next, psi)

    pres, acts, q_all = q._forward(s, dropout_masks)
    q_sb = q_all[np.arange(batch_size), b]
    residual = q_sb - targets
    bellman = float(np.mean(residual**2))
    lse = _logsumexp(q_all, axis=1)
    penalty = float(np.mean(lse - q_sb))
    loss = bellman + alpha * penalty
    if not compute_grads:
        return loss, bellman, None, None

    d_q = np.zeros_like(q_all)
    d_q[np.arange(batch_size), b] += 2.0 * residual / batch_size
    if alpha > 0.0:
        soft = np.exp(q_all - lse[:, None])
        d_q += alpha * soft / batch_size
        d_q[np.arange(batch_size), b] -= alpha / batch_size

    grads_w = [np.empty_like(w) for w in q.weights]
    grads_b = [np.empty_like(bb) for bb in q.biases]
    delta = d_q
    for i in reversed(range(len(q.weights))):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ q.weights[i].T
            if dropout_masks is not None:
                delta = delta * dropout_masks[i - 1]
            delta = delta * (pres[i - 1] > 0.0)
    return loss, bellman, grads_w, grads_b


@dataclass
class CqlHyper:
    hidden: tuple = (256, 256)
    batch_size: int = 64
    lr: float = 3e-4
    dropout: float = 0.3
    psi: float = 0.8
    alpha: float = 0.1
    max_steps: int = 30000
    steps_per_epoch: int = 1000
    patience: int = 10
    min_delta: float = 1e-4


class _Adam:
    def __init__(self, params: list[np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def update(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def train_cql(dataset, hyper: CqlHyper | None = None, seed: int = 0) -> QNetwork:
    """Minibatch gradient descent on the conservative objective.

    Target network syncs once per epoch; training stops early when the
    deterministic full-dataset Bellman loss stops improving by more than
    ``min_delta`` for ``patience`` consecutive epochs. Deterministic given
    the seed; a non-finite loss aborts with a diagnostic.
    """
    hyper = hyper or CqlHyper()
    s, b, r, s2 = _as_arrays(dataset) if not isinstance(dataset, tuple) else dataset
    n = s.shape[0]
    if n == 0:
        raise ValueError("empty transition dataset")
    state_dim = s.shape[1]
    n_actions = int(max(b.max() + 1, s.shape[1] // 2))

    rng = RngTree(seed).child("cql").generator()
    q = QNetwork(state_dim, n_actions, hidden=hyper.hidden, rng=rng)
    target = q.copy()
    adam = _Adam(q.weights + q.biases, lr=hyper.lr)

    best = np.inf
    stale = 0
    step = 0
    # single-threaded BLAS: the minibatch matmuls are too small to gain from
    # threading and the thread sync overhead dominates
    with threadpool_limits(limits=1):
        while step < hyper.max_steps:
            idx = rng.integers(0, n, size=hyper.batch_size)
            masks = None
            if hyper.dropout > 0.0:
                masks = [
                    (rng.random((hyper.batch_size, width)) >= hyper.dropout) / (1.0 - hyper.dropout)
                    for width in hyper.hidden
                ]
            batch = (s[idx], b[idx], r[idx], s2[idx])
            loss, _, gw, gb = cql_loss_and_grads(q, batch, target, hyper.alpha, hyper.psi, masks)
            if not np.isfinite(loss):
                raise RuntimeError(f"CQL loss became non-finite at step {step}; lr={hyper.lr}, alpha={hyper.alpha}")
            adam.update(q.weights + q.biases, gw + gb)
            step += 1
            if step % hyper.steps_per_epoch == 0:
                target.sync_from(q)
                _, td, _, _ = cql_loss_and_grads(q, (s, b, r, s2), target, hyper.alpha, hyper.psi, compute_grads=False)
                if td < best - hyper.min_delta:
                    best = td
                    stale = 0
                else:
                    stale += 1
                if stale >= hyper.patience:
                    break
    q.meta = {
        "psi": hyper.psi,
        "alpha": hyper.alpha,
        "seed": int(seed),
        "state_dim": state_dim,
        "n_actions": n_actions,
        "steps": step,
    }
    return q


# ---------------------------------------------------------------------------
# Linear pessimistic value iteration
# ---------------------------------------------------------------------------

def feature_map(state, b: int) -> np.ndarray:
    """Block one-hot features: block b holds [1, state], scaled so the
    2-norm never exceeds one on [0,1]-valued states."""
    vec = state.vector() if isinstance(state, BinState) else np.asarray(state, dtype=float)
    two_k = vec.shape[0]
    if two_k % 2 != 0:
        raise ValueError("state vector length must be even")
    k = two_k // 2
    if not (0 <= b < k):
        raise ValueError(f"action {b} out of range [0,{k})")
    width = two_k + 1
    phi = np.zeros(k * width)
    phi[b * width] = 1.0
    phi[b * width + 1 : (b + 1) * width] = vec
    return phi / np.sqrt(width)


@dataclass
class PeviStageData:
    """One stage's regression sample: features of logged (s,b), rewards,
    and candidate next-stage features (one row per action at s')."""

    phi: np.ndarray
    rewards: np.ndarray
    next_phi: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.rewards = np.asarray(self.rewards, dtype=float)
        self.next_phi = np.asarray(self.next_phi, dtype=float)
        if self.phi.ndim != 2 or self.next_phi.ndim != 3:
            raise ValueError("phi must be (n,d), next_phi (n,A,d)")
        if self.phi.shape[0] != self.rewards.shape[0] or self.phi.shape[0] != self.next_phi.shape[0]:
            raise ValueError("stage arrays must agree on sample count")

    @property
    def n(self) -> int:
        return self.phi.shape[0]


def stage_datasets_from_transitions(transitions, H: int) -> list[PeviStageData]:
    """Partition one trajectory into floor(T/H) contiguous length-H blocks;
    block tau contributes its h-th transition to stage h."""
    k = transitions[0].s.K
    d = k * (2 * k + 1)
    n_blocks = len(transitions) // H
    if n_blocks == 0:
        raise ValueError(f"need at least {H} transitions to fill one horizon block")
    per_stage: list[list[Transition]] = [[] for _ in range(H)]
    for tau in range(n_blocks):
        for h in range(H):
            per_stage[h].append(transitions[tau * H + h])
    out = []
    for h in range(H):
        trs = per_stage[h]
        phi = np.stack([feature_map(tr.s, tr.b) for tr in trs])
        rew = np.array([tr.r for tr in trs])
        nxt = np.stack([np.stack([feature_map(tr.s_next, a) for a in range(k)]) for tr in trs])
        out.append(PeviStageData(phi=phi, rewards=rew, next_phi=nxt))
    assert all(sd.phi.shape[1] == d for sd in out)
    return out


@dataclass
class PeviPolicy:
    """Per-stage ridge weights and design matrices with a subtractive
    elliptical bonus; values are clipped to [0, H-h+1]."""

    weights: list
    lambdas: list
    ridge: float
    bonus_beta: float
    horizon: int

    def __post_init__(self):
        if self.ridge <= 0:
            raise ValueError("ridge must be positive")
        if self.bonus_beta < 0:
            raise ValueError("bonus_beta must be nonnegative")

    @property
    def d_phi(self) -> int:
        return self.weights[0].shape[0]

    def q_values(self, phis: np.ndarray, h: int) -> np.ndarray:
        """Pessimistic Q for each candidate feature row at stage h (1-based)."""
        if not (1 <= h <= self.horizon):
            raise ValueError(f"stage {h} outside 1..{self.horizon}")
        phis = np.atleast_2d(np.asarray(phis, dtype=float))
        w = self.weights[h - 1]
        lam = self.lambdas[h - 1]
        raw = phis @ w
        sol = np.linalg.solve(lam, phis.T)
        width = np.sqrt(np.maximum(np.einsum("id,di->i", phis, sol), 0.0))
        return np.clip(raw - self.bonus_beta * width, 0.0, self.horizon - h + 1)

    def value(self, phis: np.ndarray, h: int) -> float:
        return float(self.q_values(phis, h).max())

    def act_features(self, phis: np.ndarray, h: int) -> int:
        return int(np.argmax(self.q_values(phis, h)))


def train_pevi(
    stage_datasets,
    ridge: float,
    bonus_beta: float,
    H: int,
    d_phi: int | None = None,
) -> PeviPolicy:
    """Backward ridge recursion with pessimism.

    ``stage_datasets[h-1]`` may be None/empty, in which case that stage's
    design matrix is ridge*I and its weights are zero.
    """
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    if len(stage_datasets) != H:
        raise ValueError("need one dataset per stage")
    if d_phi is None:
        for sd in stage_datasets:
            if sd is not None and sd.n > 0:
                d_phi = sd.phi.shape[1]
                break
    if d_phi is None:
        raise ValueError("all stages empty: pass d_phi explicitly")

    weights: list[np.ndarray | None] = [None] * H
    lambdas: list[np.ndarray | None] = [None] * H
    policy = PeviPolicy(weights=weights, lambdas=lambdas, ridge=ridge, bonus_beta=bonus_beta, horizon=H)
    for h in range(H, 0, -1):
        sd = stage_datasets[h - 1]
        if sd is None or sd.n == 0:
            lambdas[h - 1] = ridge * np.eye(d_phi)
            weights[h - 1] = np.zeros(d_phi)
            continue
        lam = ridge * np.eye(d_phi) + sd.phi.T @ sd.phi
        if h == H:
            v_next = np.zeros(sd.n)
        else:
            v_next = np.array([policy.value(sd.next_phi[i], h + 1) for i in range(sd.n)])
        targets = sd.rewards + v_next
        weights[h - 1] = np.linalg.solve(lam, sd.phi.T @ targets)
        lambdas[h - 1] = lam
    return policy


def pevi_bonus(phi: np.ndarray, Lambda: np.ndarray, bonus_beta: float) -> float:
    """beta * sqrt(phi' Lambda^-1 phi)."""
    phi = np.asarray(phi, dtype=float)
    quad = float(phi @ np.linalg.solve(Lambda, phi))
    return bonus_beta * float(np.sqrt(max(quad, 0.0)))


def pevi_uncertainty(stage_lambdas, trajectories) -> float:
    """Monte Carlo trajectory sum of elliptical widths.

    ``trajectories`` is an iterable of per-stage feature-vector sequences
    (the features of the state-action pairs a policy visited); the result
    averages each stage's width over trajectories and sums over stages.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("no trajectories supplied")
    H = len(stage_lambdas)
    total = 0.0
    for h in range(H):
        widths = []
        for traj in trajectories:
            phi = np.asarray(traj[h], dtype=float)
            widths.append(np.sqrt(max(float(phi @ np.linalg.solve(stage_lambdas[h], phi)), 0.0)))
        total += float(np.mean(widths))
    return total


def bonus_beta_from_radius(
    H: int, d_phi: int, n_log: int, lam: float, delta: float, W: float, C_beta: float
) -> float:
    """Confidence radius: C_beta * [H sqrt(d_phi log(H(1+n_log/lam)/delta)) + sqrt(lam) W]."""
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0,1)")
    if min(H, d_phi) < 1 or lam <= 0 or n_log < 0 or W < 0 or C_beta <= 0:
        raise ValueError("arguments must be positive (n_log, W may be zero)")
    inner = H * (1.0 + n_log / lam) / delta
    return C_beta * (H * np.sqrt(d_phi * np.log(inner)) + np.sqrt(lam) * W)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_qnetwork(q: QNetwork, path) -> None:
    doc = {
        "widths": [q.state_dim, *q.hidden, q.n_actions],
        "weights": [w.reshape(-1).tolist() for w in q.weights],
        "biases": [b.tolist() for b in q.biases],
        **{k: q.meta.get(k) for k in ("psi", "alpha", "seed", "state_dim", "n_actions")},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_qnetwork(path) -> QNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    widths = doc["widths"]
    q = QNetwork(widths[0], widths[-1], hidden=tuple(widths[1:-1]))
    for i, (flat, bias) in enumerate(zip(doc["weights"], doc["biases"])):
        q.weights[i] = np.array(flat, dtype=float).reshape(q.weights[i].shape)
        q.biases[i] = np.array(bias, dtype=float)
    q.meta = {k: doc.get(k) for k in ("psi", "alpha", "seed", "state_dim", "n_actions")}
    return q


def save_transitions(transitions, path) -> None:
    """JSONL, one record per transition: state halves, action, reward."""
    with open(path, "w", encoding="utf-8") as fh:
        for tr in transitions:
            rec = {
                "s": tr.s.vector().tolist(),
                "b": int(tr.b),
                "r": float(tr.r),
                "s_next": tr.s_next.vector().tolist(),
            }
            fh.write(json.dumps(rec) + "\n")


def load_transitions(path) -> list[Transition]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            s = np.array(rec["s"])
            s2 = np.array(rec["s_next"])
            k = s.shape[0] // 2
            out.append(
                Transition(
                    s=BinState(s[:k], s[k:]),
                    b=rec["b"],
                    r=rec["r"],
                    s_next=BinState(s2[:k], s2[k:]),
                )
            )
    return out


def save_pevi(policy: PeviPolicy, path) -> None:
    doc = {
        "weights": [w.tolist() for w in policy.weights],
        "lambdas": [lam.reshape(-1).tolist() for lam in policy.lambdas],
        "ridge": policy.ridge,
        "bonus_beta": policy.bonus_beta,
        "horizon": policy.horizon,
        "d_phi": policy.d_phi,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_pevi(path) -> PeviPolicy:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    d = doc["d_phi"]
    return PeviPolicy(
        weights=[np.array(w) for w in doc["weights"]],
        lambdas=[np.array(l, dtype=float).reshape(d, d) for l in doc["lambdas"]],
        ridge=doc["ridge"],
        bonus_beta=doc["bonus_beta"],
        horizon=doc["horizon"],
    )
