"""Uniform policy interface: heuristic baselines, learned policies, and the
majority-vote ensemble.

Every policy's ``act`` returns ``(bin index, forced node or None)``. A
forced node pins the seed for node-level baselines; bin-level policies
leave it None and the environment draws uniformly inside the bin. Policies
are deterministic given the observation and the generator state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .diffusion import SisConfig
from .graphs import BinPartition, Graph
from .ising import BinState, IsingParams, belief_no_intervention, build_state
from .rl import PeviPolicy, QNetwork, feature_map

__all__ = [
    "Observation",
    "RandomBinPolicy",
    "DegreePolicy",
    "DegreeBinPolicy",
    "LirPolicy",
    "GreedyMyopicPolicy",
    "LearnedQPolicy",
    "PeviBinPolicy",
    "EnsemblePolicy",
    "ScriptedPolicy",
    "lir_index",
    "expected_one_step_reward",
    "make_policy",
    "POLICY_KINDS",
]


@dataclass
class Observation:
    """Policy-visible slice before a decision: the lagged adoption vector,
    the 0-based decision index, and (for learned kinds) an optional
    precomputed bin-level state."""

    y_prev: np.ndarray
    t: int
    state: BinState | None = None


def _best_susceptible(nodes, y_prev, degs):
    """Highest-degree susceptible node among ``nodes``; ties to lowest id."""
    best = None
    for node in nodes:
        if y_prev[node] != 0:
            continue
        if best is None or degs[node] > degs[best]:
            best = int(node)
    return best


class RandomBinPolicy:
    name = "random_bin"

    def act(self, obs, graph, partition, rng):
        return int(rng.integers(partition.K)), None


class DegreePolicy:
    """Seed the highest-degree currently-susceptible node."""

    name = "degree"

    def act(self, obs, graph, partition, rng):
        degs = graph.degrees()
        node = _best_susceptible(range(graph.n), obs.y_prev, degs)
        if node is None:
            return 0, None
        return int(partition.bin_of[node]), node


class DegreeBinPolicy:
    """Round-robin over bins; within the current bin, the highest-degree
    susceptible node."""

    name = "degree_bin"

    def act(self, obs, graph, partition, rng):
        k = obs.t % partition.K
        degs = graph.degrees()
        node = _best_susceptible(partition.members(k), obs.y_prev, degs)
        return int(k), node


def lir_index(graph: Graph) -> np.ndarray:
    """Count of strictly-higher-degree neighbors per node; local degree
    leaders have index zero."""
    degs = graph.degrees()
    return np.array(
        [int(np.sum(degs[graph.neighbors(v)] > degs[v])) for v in range(graph.n)],
        dtype=np.int64,
    )


class LirPolicy:
    """Local-leader schedule: index-zero nodes by descending degree, then
    the rest by descending degree; seed the first still-susceptible node."""

    name = "lir"

    def __init__(self, graph: Graph):
        degs = graph.degrees()
        li = lir_index(graph)
        leaders = sorted((v for v in range(graph.n) if li[v] == 0), key=lambda v: (-degs[v], v))
        rest = sorted((v for v in range(graph.n) if li[v] > 0), key=lambda v: (-degs[v], v))
        self.schedule = leaders + rest

    def act(self, obs, graph, partition, rng):
        for node in self.schedule:
            if obs.y_prev[node] == 0:
                return int(partition.bin_of[node]), int(node)
        return 0, None


MAX_EXACT_ADOPTED = 20


def expected_one_step_reward(config: SisConfig, y: np.ndarray, bin_action: int | None) -> float:
    """Exact one-period expected reward by enumerating churn outcomes and
    the uniform within-bin seed; intended for oracle-scale graphs."""
    y = np.asarray(y, dtype=np.int8)
    n = config.graph.n
    adopted = [int(i) for i in np.nonzero(y == 1)[0]]
    if len(adopted) > MAX_EXACT_ADOPTED:
        raise ValueError(f"exact expectation limited to {MAX_EXACT_ADOPTED} adopted nodes")
    total = 0.0
    for kept in itertools.product((0, 1), repeat=len(adopted)):
        p_churn = 1.0
        post = y.copy()
        for node, keep in zip(adopted, kept):
            d = config.node_churn[node]
            p_churn *= (1.0 - d) if keep else d
            post[node] = keep
        if p_churn == 0.0:
            continue
        if bin_action is None:
            seeds = [(None, 1.0)]
        else:
            members = config.partition.members(bin_action)
            susceptible = [int(v) for v in members if post[v] == 0]
            if susceptible:
                seeds = [(v, 1.0 / len(susceptible)) for v in susceptible]
            else:
                seeds = [(None, 1.0)]
        for seed_node, p_seed in seeds:
            post2 = post.copy()
            if seed_node is not None:
                post2[seed_node] = 1
            stay = np.ones(n)
            for node in np.nonzero(post2 == 1)[0]:
                stay[config.graph.neighbors(int(node))] *= 1.0 - config.node_spread[node]
            prob_adopt = np.where(post2 == 1, 1.0, 1.0 - stay)
            total += p_churn * p_seed * float(prob_adopt.mean())
    return total


class GreedyMyopicPolicy:
    """Bin maximizing the exact one-step expected reward under supplied true
    dynamics. Oracle use only."""

    name = "greedy_myopic"

    def __init__(self, config: SisConfig):
        self.config = config

    def act(self, obs, graph, partition, rng):
        values = [expected_one_step_reward(self.config, obs.y_prev, k) for k in range(partition.K)]
        return int(np.argmax(values)), None


def _resolve_state(
    obs: Observation,
    graph: Graph,
    partition: BinPartition,
    params: IsingParams | None,
    state_mode: str,
    who: str,
) -> BinState:
    """State for a learned policy: taken from the observation when present,
    otherwise recomputed online from the lagged outcomes. 'observable' mode
    duplicates the lagged-adoption block instead of using model beliefs."""
    if obs.state is not None:
        return obs.state
    if state_mode == "observable":
        return build_state(obs.y_prev.astype(float), obs.y_prev, partition)
    if params is None:
        raise ValueError(f"{who}: no state in observation and no fitted parameters attached")
    l0 = belief_no_intervention(params, graph, partition, obs.y_prev)
    return build_state(l0, obs.y_prev, partition)


class LearnedQPolicy:
    """Greedy over a trained Q-network; each ensemble member carries its
    own parameter draw for online state construction."""

    name = "learned_q"

    def __init__(self, q: QNetwork, params: IsingParams | None = None, state_mode: str = "beliefs", name=None):
        if state_mode not in ("beliefs", "observable"):
            raise ValueError("state_mode must be 'beliefs' or 'observable'")
        self.q = q
        self.params = params
        self.state_mode = state_mode
        if name is not None:
            self.name = name

    def act(self, obs, graph, partition, rng):
        state = _resolve_state(obs, graph, partition, self.params, self.state_mode, self.name)
        return self.q.act(state.vector()), None


class PeviBinPolicy:
    """Stage-indexed argmax over the pessimistic value-iteration Q."""

    name = "pevi"

    def __init__(self, pevi: PeviPolicy, params: IsingParams | None = None, state_mode: str = "beliefs", name=None):
        if state_mode not in ("beliefs", "observable"):
            raise ValueError("state_mode must be 'beliefs' or 'observable'")
        self.pevi = pevi
        self.params = params
        self.state_mode = state_mode
        if name is not None:
            self.name = name

    def act(self, obs, graph, partition, rng):
        state = _resolve_state(obs, graph, partition, self.params, self.state_mode, self.name)
        h = min(obs.t + 1, self.pevi.horizon)
        phis = np.stack([feature_map(state, b) for b in range(partition.K)])
        return self.pevi.act_features(phis, h), None


class EnsemblePolicy:
    """Majority vote over member bin decisions, lowest index on ties."""

    name = "ensemble"

    def __init__(self, members, name=None):
        if not members:
            raise ValueError("ensemble needs at least one member")
        self.members = list(members)
        if name is not None:
            self.name = name

    def act(self, obs, graph, partition, rng):
        votes = np.zeros(partition.K, dtype=np.int64)
        for member in self.members:
            k, _ = member.act(obs, graph, partition, rng)
            votes[k] += 1
        return int(np.argmax(votes)), None


class ScriptedPolicy:
    """Fixed per-period (bin, forced node) script; used by exact oracles."""

    name = "scripted"

    def __init__(self, script):
        self.script = list(script)

    def act(self, obs, graph, partition, rng):
        if obs.t < len(self.script):
            return self.script[obs.t]
        return self.script[-1]


POLICY_KINDS = (
    "random_bin",
    "degree",
    "degree_bin",
    "lir",
    "greedy_myopic",
    "learned_q",
    "pevi",
    "ensemble",
)


def make_policy(
    kind: str,
    graph: Graph,
    partition: BinPartition,
    *,
    sis_config: SisConfig | None = None,
    q: QNetwork | None = None,
    pevi: PeviPolicy | None = None,
    params: IsingParams | None = None,
    members=None,
    state_mode: str = "beliefs",
    name: str | None = None,
):
    """Construct a policy by kind tag; learned kinds take their artifacts."""
    if kind == "random_bin":
        return RandomBinPolicy()
    if kind == "degree":
        return DegreePolicy()
    if kind == "degree_bin":
        return DegreeBinPolicy()
    if kind == "lir":
        return LirPolicy(graph)
    if kind == "greedy_myopic":
        if sis_config is None:
            raise ValueError("greedy_myopic requires the true dynamics")
        return GreedyMyopicPolicy(sis_config)
    if kind == "learned_q":
        if q is None:
            raise ValueError("learned_q requires a trained Q-network")
        return LearnedQPolicy(q, params=params, state_mode=state_mode, name=name)
    if kind == "pevi":
        if pevi is None:
            raise ValueError("pevi requires trained per-stage weights")
        return PeviBinPolicy(pevi, params=params, state_mode=state_mode, name=name)
    if kind == "ensemble":
        return EnsemblePolicy(members, name=name)
    raise ValueError(f"unknown policy kind {kind!r}; expected one of {POLICY_KINDS}")
