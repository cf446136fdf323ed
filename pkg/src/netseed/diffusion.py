"""SIS adoption environment: churn -> seed -> spread, reward, and logged panels.

Rates are named spread/churn throughout; per-bin values are broadcast to
nodes through the partition. One period applies three ordered sub-steps:

1. churn: every adopted node reverts independently with its churn rate;
2. seed: if a bin was chosen and holds at least one susceptible node, one
   such node is set adopted (treatment is perfect); otherwise no seed;
3. spread: every susceptible node adopts with probability
   1 - prod_{adopted neighbors i} (1 - spread_i), evaluated on the
   post-seed adoption set (a freshly seeded node transmits immediately).

Each sub-step consumes its own random stream derived from the period node
of an RngTree, so the policy's bin choice never perturbs churn or spread
randomness between counterfactual runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graphs import BinPartition, Graph
from .rng import RngTree

__all__ = [
    "SisConfig",
    "SisState",
    "Panel",
    "step",
    "reward",
    "generate_panel",
    "save_panel",
    "load_panel",
]


@dataclass
class SisConfig:
    """Per-bin spread/churn rates bound to a graph and partition.

    Rates live in [0,1]; the open interval is the realistic regime, the
    endpoints are permitted for exact oracle constructions.
    """

    spread: np.ndarray
    churn: np.ndarray
    graph: Graph
    partition: BinPartition

    def __post_init__(self):
        self.spread = np.asarray(self.spread, dtype=float)
        self.churn = np.asarray(self.churn, dtype=float)
        k = self.partition.K
        if self.spread.shape != (k,) or self.churn.shape != (k,):
            raise ValueError(f"spread/churn must have length K={k}")
        for name, vec in (("spread", self.spread), ("churn", self.churn)):
            if ((vec < 0.0) | (vec > 1.0)).any():
                raise ValueError(f"{name} rates must lie in [0,1]")
        if self.partition.n != self.graph.n:
            raise ValueError("partition and graph disagree on node count")
        self.node_spread = self.spread[self.partition.bin_of]
        self.node_churn = self.churn[self.partition.bin_of]


@dataclass
class SisState:
    adopted: np.ndarray
    t: int = 0

    def __post_init__(self):
        self.adopted = np.asarray(self.adopted, dtype=np.int8)
        if not np.isin(self.adopted, (0, 1)).all():
            raise ValueError("adoption entries must be 0/1")


def reward(y: np.ndarray) -> float:
    """Network-wide adoption rate."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("reward of empty adoption vector")
    return float(np.mean(y))


def step(
    state: SisState,
    config: SisConfig,
    bin_action: int | None,
    rng: RngTree,
    forced_node: int | None = None,
) -> tuple[SisState, float, int | None]:
    """Advance one period; returns (next state, reward, realized seeded node).

    ``forced_node`` lets node-level policies pin the seed inside the chosen
    bin; it must belong to the bin and is only seeded if susceptible.
    Seeding a saturated bin is a no-op and the seeded node is None.
    """
    n = config.graph.n
    y = state.adopted.copy()
    if bin_action is not None and not (0 <= bin_action < config.partition.K):
        raise ValueError(f"bin index {bin_action} out of range [0,{config.partition.K})")

    # churn
    u_churn = rng.child("churn").generator().random(n)
    churned = (y == 1) & (u_churn < config.node_churn)
    y[churned] = 0

    # seed
    seeded = None
    u_seed = float(rng.child("seed").generator().random())
    if bin_action is not None:
        if forced_node is not None:
            if config.partition.bin_of[forced_node] != bin_action:
                raise ValueError("forced node does not belong to the chosen bin")
            if y[forced_node] == 0:
                seeded = int(forced_node)
        else:
            members = config.partition.members(bin_action)
            susceptible = members[y[members] == 0]
            if susceptible.size > 0:
                seeded = int(susceptible[min(int(u_seed * susceptible.size), susceptible.size - 1)])
        if seeded is not None:
            y[seeded] = 1

    # spread, driven by the post-seed adoption set
    u_spread = rng.child("spread").generator().random(n)
    stay = np.ones(n)
    for node in np.nonzero(y == 1)[0]:
        nbrs = config.graph.neighbors(int(node))
        stay[nbrs] *= 1.0 - config.node_spread[node]
    adopt_prob = np.where(y == 1, 0.0, 1.0 - stay)
    y = np.where((y == 0) & (u_spread < adopt_prob), 1, y).astype(np.int8)

    nxt = SisState(adopted=y, t=state.t + 1)
    return nxt, reward(y), seeded


@dataclass
class Panel:
    """One logged trajectory: y0 plus (a_t, y_t) records for t = 1..T."""

    y0: np.ndarray
    actions: list  # seeded node id or None, per period
    outcomes: list  # adoption vector per period

    def __post_init__(self):
        self.y0 = np.asarray(self.y0, dtype=np.int8)
        self.outcomes = [np.asarray(y, dtype=np.int8) for y in self.outcomes]
        if len(self.actions) != len(self.outcomes):
            raise ValueError("actions and outcomes must have equal length")
        n = self.y0.shape[0]
        for y in self.outcomes:
            if y.shape != (n,):
                raise ValueError("all outcome vectors must have length n")

    def __len__(self) -> int:
        return len(self.outcomes)

    @property
    def n(self) -> int:
        return int(self.y0.shape[0])

    def outcome_before(self, t: int) -> np.ndarray:
        """y_{t-1} for a 1-based period index t."""
        return self.y0 if t == 1 else self.outcomes[t - 2]

    def window(self, start: int, stop: int) -> "Panel":
        """Sub-panel covering 1-based periods start..stop inclusive."""
        if not (1 <= start <= stop <= len(self)):
            raise ValueError("window out of range")
        return Panel(
            y0=self.outcome_before(start).copy(),
            actions=list(self.actions[start - 1 : stop]),
            outcomes=[y.copy() for y in self.outcomes[start - 1 : stop]],
        )


def generate_panel(
    config: SisConfig,
    logging_policy,
    T: int,
    seed: int,
    y0: np.ndarray | None = None,
) -> Panel:
    """Roll the environment forward T periods under a logging policy.

    The recorded action is the realized seeded node (None when no seed
    occurred). Bit-reproducible given (config, policy, T, seed).
    """
    from .policies import Observation  # local import to avoid a cycle

    if T < 1:
        raise ValueError("T must be >= 1")
    n = config.graph.n
    start = np.zeros(n, dtype=np.int8) if y0 is None else np.asarray(y0, dtype=np.int8)
    state = SisState(adopted=start.copy(), t=0)
    root = RngTree(seed)
    actions: list = []
    outcomes: list = []
    for t in range(1, T + 1):
        period = root.child("period", t)
        obs = Observation(y_prev=state.adopted.copy(), t=t - 1)
        bin_action, forced = logging_policy.act(
            obs, config.graph, config.partition, period.child("policy").generator()
        )
        state, _, seeded = step(state, config, bin_action, period, forced_node=forced)
        actions.append(seeded)
        outcomes.append(state.adopted.copy())
    return Panel(y0=start, actions=actions, outcomes=outcomes)


def save_panel(panel: Panel, path) -> None:
    """JSONL: header {"t":0,"y0":[...]} then {"t":t,"a":...,"y":[...]}."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"t": 0, "y0": [int(v) for v in panel.y0]}) + "\n")
        for t, (a, y) in enumerate(zip(panel.actions, panel.outcomes), start=1):
            rec = {"t": t, "a": None if a is None else int(a), "y": [int(v) for v in y]}
            fh.write(json.dumps(rec) + "\n")


def load_panel(path) -> Panel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or "y0" not in lines[0]:
        raise ValueError("panel file must start with a {'t':0,'y0':...} header")
    y0 = np.array(lines[0]["y0"], dtype=np.int8)
    actions = []
    outcomes = []
    for expected_t, rec in enumerate(lines[1:], start=1):
        if rec["t"] != expected_t:
            raise ValueError(f"panel records out of order at t={rec['t']}")
        actions.append(rec["a"])
        outcomes.append(np.array(rec["y"], dtype=np.int8))
    return Panel(y0=y0, actions=actions, outcomes=outcomes)
