"""Rollout harness, report statistics, and executable theory oracles.

The oracles are deliberately independent of the learning stack: a finite
tabular MDP with exact backward induction, an exact SIS kernel built by
enumeration, and the synchronous-update stationary distribution solved by
power iteration.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .diffusion import SisConfig, SisState, step
from .graphs import BinPartition, Graph
from .policies import Observation
from .rng import RngTree

__all__ = [
    "FiniteMdp",
    "exact_policy_value",
    "simulate_policy_value",
    "greedy_rule",
    "optimal_rule",
    "exact_sis_mdp",
    "greedy_counterexample_mdp",
    "counterexample_rules",
    "synchronous_stationary",
    "PolicyCurve",
    "EvalReport",
    "rollout",
    "improvement_vs_baseline",
    "modularity_correlation",
    "save_report",
    "load_report",
    "report_to_csv",
]


# ---------------------------------------------------------------------------
# Tabular finite-horizon MDP oracle
# ---------------------------------------------------------------------------

@dataclass
class FiniteMdp:
    """Explicit finite-horizon MDP: transition tensor (S,A,S), expected
    immediate rewards (S,A), horizon, and a start state."""

    transitions: np.ndarray
    rewards: np.ndarray
    horizon: int
    start: int = 0
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=float)
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.transitions.ndim != 3 or self.transitions.shape[0] != self.transitions.shape[2]:
            raise ValueError("transitions must have shape (S, A, S)")
        if self.rewards.shape != self.transitions.shape[:2]:
            raise ValueError("rewards must have shape (S, A)")
        row_sums = self.transitions.sum(axis=2)
        if np.max(np.abs(row_sums - 1.0)) > 1e-12:
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]


def exact_policy_value(mdp: FiniteMdp, rule) -> float:
    """Expected cumulative reward of ``rule(h, state) -> action`` by exact
    backward induction; h is 1-based."""
    v = np.zeros(mdp.n_states)
    for h in range(mdp.horizon, 0, -1):
        nxt = np.empty(mdp.n_states)
        for s in range(mdp.n_states):
            a = int(rule(h, s))
            nxt[s] = mdp.rewards[s, a] + mdp.transitions[s, a] @ v
        v = nxt
    return float(v[mdp.start])


def greedy_rule(mdp: FiniteMdp):
    """Stage-wise immediate-reward maximizer, lowest action index on ties."""

    def rule(h, s):
        return int(np.argmax(mdp.rewards[s]))

    return rule


def optimal_rule(mdp: FiniteMdp):
    """Exact dynamic-programming optimum (for oracle comparisons)."""
    v = np.zeros(mdp.n_states)
    best = np.zeros((mdp.horizon + 1, mdp.n_states), dtype=np.int64)
    for h in range(mdp.horizon, 0, -1):
        q = mdp.rewards + mdp.transitions @ v
        best[h] = np.argmax(q, axis=1)
        v = q.max(axis=1)
    return lambda h, s: int(best[h][s]), float(v[mdp.start])


def simulate_policy_value(
    mdp: FiniteMdp, rule, n_runs: int, seed: int, state_reward: np.ndarray | None = None
) -> tuple[float, float]:
    """Monte Carlo estimate of the policy value: (mean, standard error).

    With ``state_reward`` given, each period realizes the reward of the
    sampled arrival state (matching processes whose reward is a function of
    the new state, of which R(s,a) is the conditional mean); otherwise the
    expected reward R(s,a) is accumulated along the state trajectory.
    """
    rng = RngTree(seed).child("mdp-mc").generator()
    cdf = np.cumsum(mdp.transitions, axis=2)
    states = np.full(n_runs, mdp.start, dtype=np.int64)
    totals = np.zeros(n_runs)
    for h in range(1, mdp.horizon + 1):
        actions = np.array([rule(h, s) for s in range(mdp.n_states)], dtype=np.int64)
        a = actions[states]
        u = rng.random(n_runs)
        nxt = np.minimum((u[:, None] > cdf[states, a]).sum(axis=1), mdp.n_states - 1)
        if state_reward is not None:
            totals += state_reward[nxt]
        else:
            totals += mdp.rewards[states, a]
        states = nxt
    se = float(totals.std(ddof=1) / np.sqrt(n_runs)) if n_runs > 1 else 0.0
    return float(totals.mean()), se


# ---------------------------------------------------------------------------
# Exact SIS kernel on oracle-scale graphs
# ---------------------------------------------------------------------------

MAX_EXACT_NODES = 12


def exact_sis_mdp(config: SisConfig, horizon: int, count_reward: bool = False) -> FiniteMdp:
    """Enumerate the churn -> seed -> spread kernel over all 2^n adoption
    states with one action per bin. Reward is the expected next-period
    adoption rate (or count when ``count_reward``)."""
    n = config.graph.n
    if n > MAX_EXACT_NODES:
        raise ValueError(f"exact kernel limited to {MAX_EXACT_NODES} nodes")
    k = config.partition.K
    states = list(itertools.product((0, 1), repeat=n))
    index = {s: i for i, s in enumerate(states)}
    S = len(states)
    P = np.zeros((S, k, S))
    R = np.zeros((S, k))
    for si, y in enumerate(states):
        adopted = [i for i in range(n) if y[i]]
        for action in range(k):
            dist: dict[tuple, float] = {}
            for kept in itertools.product((0, 1), repeat=len(adopted)):
                p_churn = 1.0
                post = list(y)
                for node, keep in zip(adopted, kept):
                    d = config.node_churn[node]
                    p_churn *= (1.0 - d) if keep else d
                    post[node] = keep
                if p_churn == 0.0:
                    continue
                members = config.partition.members(action)
                susceptible = [int(v) for v in members if post[v] == 0]
                seeds = [(v, 1.0 / len(susceptible)) for v in susceptible] if susceptible else [(None, 1.0)]
                for seed_node, p_seed in seeds:
                    post2 = list(post)
                    if seed_node is not None:
                        post2[seed_node] = 1
                    stay = np.ones(n)
                    for node in range(n):
                        if post2[node] == 1:
                            stay[config.graph.neighbors(node)] *= 1.0 - config.node_spread[node]
                    probs = [1.0 if post2[j] == 1 else 1.0 - stay[j] for j in range(n)]
                    for nxt in itertools.product((0, 1), repeat=n):
                        p = p_churn * p_seed
                        for j in range(n):
                            p *= probs[j] if nxt[j] == 1 else 1.0 - probs[j]
                        if p > 0.0:
                            dist[nxt] = dist.get(nxt, 0.0) + p
            for nxt, p in dist.items():
                P[si, action, index[nxt]] = p
                scale = float(sum(nxt)) if count_reward else float(np.mean(nxt))
                R[si, action] += p * scale
    return FiniteMdp(transitions=P, rewards=R, horizon=horizon, start=index[tuple([0] * n)], labels=states)


def greedy_counterexample_mdp(rho: float) -> tuple[FiniteMdp, SisConfig]:
    """Three-node oracle: a linked pair with spread ``rho`` and certain
    churn, plus an isolated node that never churns. Rewards are adoption
    counts over a two-period horizon."""
    if not (0.0 <= rho < 1.0):
        raise ValueError("rho must lie in [0,1)")
    graph = Graph(3, [(0, 1)])
    partition = BinPartition(3, np.array([0, 1, 2]))
    config = SisConfig(spread=np.array([rho, rho, 0.0]), churn=np.array([1.0, 1.0, 0.0]), graph=graph, partition=partition)
    return exact_sis_mdp(config, horizon=2, count_reward=True), config


def counterexample_rules(mdp: FiniteMdp):
    """(optimal, greedy) rules for the three-node oracle: treat the isolated
    node first versus chase the immediate spread."""
    labels = mdp.labels

    def opt(h, s):
        return 2 if h == 1 else (0 if labels[s][0] == 0 else 1)

    def greedy(h, s):
        return 0 if labels[s][0] == 0 else 1

    return opt, greedy


# ---------------------------------------------------------------------------
# Synchronous-update stationary distribution
# ---------------------------------------------------------------------------

def synchronous_stationary(
    n: int = 4, coupling: float = 1.0, intercept: float = 0.0, tol: float = 1e-12, max_iters: int = 200000
) -> tuple[np.ndarray, np.ndarray]:
    """Stationary law of the synchronous logistic update on the complete
    graph, plus the log-ratios of successive-weight state probabilities.

    The kernel factorizes over nodes: each flips to 1 with probability
    sigmoid(intercept + coupling * (number of other adopted nodes)).
    Returns (distribution over 2^n states, deltas of length n).
    """
    states = list(itertools.product((0, 1), repeat=n))
    S = len(states)
    kernel = np.zeros((S, S))
    for a, y in enumerate(states):
        tot = sum(y)
        p = np.array([1.0 / (1.0 + np.exp(-(intercept + coupling * (tot - y[i])))) for i in range(n)])
        for b, nxt in enumerate(states):
            prob = 1.0
            for i in range(n):
                prob *= p[i] if nxt[i] == 1 else 1.0 - p[i]
            kernel[a, b] = prob
    mu = np.full(S, 1.0 / S)
    for _ in range(max_iters):
        nxt = mu @ kernel
        if float(np.max(np.abs(nxt - mu))) < tol:
            mu = nxt
            break
        mu = nxt
    else:
        raise RuntimeError("power iteration failed to converge")
    by_weight: dict[int, float] = {}
    for idx, y in enumerate(states):
        by_weight.setdefault(sum(y), mu[idx])
    deltas = np.array([np.log(by_weight[m + 1] / by_weight[m]) for m in range(n)])
    return mu, deltas


# ---------------------------------------------------------------------------
# Rollout harness and reports
# ---------------------------------------------------------------------------

@dataclass
class PolicyCurve:
    period_means: np.ndarray
    period_stds: np.ndarray
    welfare_mean: float
    welfare_std: float
    run_welfares: np.ndarray

    def to_dict(self) -> dict:
        return {
            "period_means": self.period_means.tolist(),
            "period_stds": self.period_stds.tolist(),
            "welfare_mean": self.welfare_mean,
            "welfare_std": self.welfare_std,
            "run_welfares": self.run_welfares.tolist(),
        }

    @staticmethod
    def from_dict(doc: dict) -> "PolicyCurve":
        return PolicyCurve(
            period_means=np.array(doc["period_means"]),
            period_stds=np.array(doc["period_stds"]),
            welfare_mean=doc["welfare_mean"],
            welfare_std=doc["welfare_std"],
            run_welfares=np.array(doc["run_welfares"]),
        )


@dataclass
class EvalReport:
    horizon: int
    n_runs: int
    seed: int
    curves: dict

    def merge(self, other: "EvalReport") -> "EvalReport":
        if (self.horizon, self.n_runs) != (other.horizon, other.n_runs):
            raise ValueError("cannot merge reports with different protocols")
        merged = dict(self.curves)
        merged.update(other.curves)
        return EvalReport(self.horizon, self.n_runs, self.seed, merged)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "n_runs": self.n_runs,
            "seed": self.seed,
            "curves": {name: c.to_dict() for name, c in sorted(self.curves.items())},
        }


def rollout(
    config: SisConfig,
    policy,
    H: int,
    n_runs: int,
    seed: int,
    policy_name: str | None = None,
    y0: np.ndarray | None = None,
) -> EvalReport:
    """Independent test trajectories from a no-adoption start.

    Learned policies rebuild their bin-level state online each period from
    the realized lagged outcomes. Run r uses streams derived from
    (seed, 'run', r), so different policies see coupled environment noise.
    """
    if H < 1 or n_runs < 1:
        raise ValueError("H and n_runs must be >= 1")
    name = policy_name or getattr(policy, "name", "policy")
    n = config.graph.n
    rewards = np.zeros((n_runs, H))
    root = RngTree(seed)
    for r in range(n_runs):
        run_node = root.child("run", r)
        start = np.zeros(n, dtype=np.int8) if y0 is None else np.asarray(y0, dtype=np.int8)
        state = SisState(adopted=start.copy(), t=0)
        for h in range(1, H + 1):
            period = run_node.child("period", h)
            obs = Observation(y_prev=state.adopted.copy(), t=h - 1)
            bin_action, forced = policy.act(obs, config.graph, config.partition, period.child("policy").generator())
            state, reward_h, _ = step(state, config, bin_action, period, forced_node=forced)
            rewards[r, h - 1] = reward_h
    welfare = rewards.sum(axis=1)
    curve = PolicyCurve(
        period_means=rewards.mean(axis=0),
        period_stds=rewards.std(axis=0, ddof=1) if n_runs > 1 else np.zeros(H),
        welfare_mean=float(welfare.mean()),
        welfare_std=float(welfare.std(ddof=1)) if n_runs > 1 else 0.0,
        run_welfares=welfare,
    )
    return EvalReport(horizon=H, n_runs=n_runs, seed=seed, curves={name: curve})


def improvement_vs_baseline(report_a: EvalReport, report_b: EvalReport) -> float:
    """Percent cumulative-welfare improvement of a over b (single-curve
    reports)."""
    if (report_a.horizon, report_a.n_runs) != (report_b.horizon, report_b.n_runs):
        raise ValueError("reports must share horizon and run count")
    (wa,) = [c.welfare_mean for c in report_a.curves.values()]
    (wb,) = [c.welfare_mean for c in report_b.curves.values()]
    if wb == 0.0:
        raise ValueError("baseline welfare is zero")
    return 100.0 * (wa - wb) / wb


def modularity_correlation(improvements, modularities) -> float:
    """Pearson correlation between per-network improvements and modularity."""
    x = np.asarray(improvements, dtype=float)
    y = np.asarray(modularities, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("need equal-length vectors with at least 3 entries")
    if np.std(x) == 0.0 or np.std(y) == 0.0:
        raise ValueError("correlation undefined under zero variance")
    return float(np.corrcoef(x, y)[0, 1])


# ---------------------------------------------------------------------------
# Report persistence
# ---------------------------------------------------------------------------

def save_report(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_report(path) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return EvalReport(
        horizon=doc["horizon"],
        n_runs=doc["n_runs"],
        seed=doc["seed"],
        curves={name: PolicyCurve.from_dict(c) for name, c in doc["curves"].items()},
    )


def report_to_csv(report: EvalReport, path) -> None:
    """Tidy per-period table: policy,period,mean,std."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "period", "mean", "std"])
        for name in sorted(report.curves):
            curve = report.curves[name]
            for h in range(report.horizon):
                writer.writerow([name, h + 1, repr(float(curve.period_means[h])), repr(float(curve.period_stds[h]))])
