"""Dynamic adoption model on a binned network.

Each node's next outcome is Bernoulli with logit
``intercept + direct treatment + persistence + neighbor treatment +
peer-influence terms``, all coefficients shared within bins. The likelihood
factorizes over nodes and periods, so estimation reduces to K independent
penalized logistic problems. Two estimators are provided: an EM variable
selection scheme over a continuous spike-and-slab prior on the coupling
matrix, and a Hamiltonian Monte Carlo sampler for posterior draws.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .diffusion import Panel
from .graphs import BinPartition, Graph
from .rng import RngTree

log = logging.getLogger(__name__)

__all__ = [
    "IsingParams",
    "PriorSpec",
    "PosteriorDraws",
    "BinState",
    "EmvsFit",
    "PanelDesign",
    "build_design",
    "linear_predictor",
    "predictors",
    "log_likelihood",
    "inclusion_probability",
    "log_posterior",
    "grad_log_posterior",
    "fit_emvs",
    "sample_posterior",
    "simulate_ising_panel",
    "belief_no_intervention",
    "build_state",
    "rank_auc",
    "one_step_auc",
    "save_params",
    "load_params",
    "save_draws",
    "load_draws",
]

ETA_CLIP = 35.0  # logistic saturates beyond double precision past this


def sigmoid(eta: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -ETA_CLIP, ETA_CLIP)))


@dataclass
class IsingParams:
    """Bin-level coefficients: four effect vectors plus a K x K coupling
    matrix whose (k, m) entry is the pull of an adopted bin-m neighbor on a
    bin-k node. The coupling matrix need not be symmetric."""

    beta0: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    beta3: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.beta0 = np.asarray(self.beta0, dtype=float)
        self.beta1 = np.asarray(self.beta1, dtype=float)
        self.beta2 = np.asarray(self.beta2, dtype=float)
        self.beta3 = np.asarray(self.beta3, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        k = self.beta0.shape[0]
        for name in ("beta1", "beta2", "beta3"):
            if getattr(self, name).shape != (k,):
                raise ValueError(f"{name} must have length K={k}")
        if self.gamma.shape != (k, k):
            raise ValueError(f"gamma must be K x K with K={k}")
        for name in ("beta0", "beta1", "beta2", "beta3", "gamma"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def K(self) -> int:
        return self.beta0.shape[0]

    @staticmethod
    def zeros(K: int) -> "IsingParams":
        z = np.zeros(K)
        return IsingParams(z.copy(), z.copy(), z.copy(), z.copy(), np.zeros((K, K)))

    def flat(self) -> np.ndarray:
        """Per-bin blocks [beta0, beta1, beta2, beta3, gamma_k,:]."""
        blocks = [
            np.concatenate(([self.beta0[k], self.beta1[k], self.beta2[k], self.beta3[k]], self.gamma[k]))
            for k in range(self.K)
        ]
        return np.concatenate(blocks)

    @staticmethod
    def from_flat(theta: np.ndarray, K: int) -> "IsingParams":
        width = 4 + K
        if theta.shape != (K * width,):
            raise ValueError("flat vector has wrong length")
        b0 = np.empty(K)
        b1 = np.empty(K)
        b2 = np.empty(K)
        b3 = np.empty(K)
        g = np.empty((K, K))
        for k in range(K):
            blk = theta[k * width : (k + 1) * width]
            b0[k], b1[k], b2[k], b3[k] = blk[:4]
            g[k] = blk[4:]
        return IsingParams(b0, b1, b2, b3, g)

    def to_dict(self) -> dict:
        return {
            "beta0": self.beta0.tolist(),
            "beta1": self.beta1.tolist(),
            "beta2": self.beta2.tolist(),
            "beta3": self.beta3.tolist(),
            "gamma": self.gamma.reshape(-1).tolist(),
        }

    @staticmethod
    def from_dict(doc: dict) -> "IsingParams":
        k = len(doc["beta0"])
        return IsingParams(
            np.array(doc["beta0"]),
            np.array(doc["beta1"]),
            np.array(doc["beta2"]),
            np.array(doc["beta3"]),
            np.array(doc["gamma"], dtype=float).reshape(k, k),
        )


@dataclass
class PriorSpec:
    """Spike-and-slab variances for couplings, inclusion-rate constant, and
    Gaussian variance for the effect coefficients."""

    v0: float = 0.01
    v1: float = 10.0
    c: float = 1.0
    tau2: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.v0 < self.v1):
            raise ValueError("need 0 < v0 < v1")
        if self.c <= 0 or self.tau2 <= 0:
            raise ValueError("c and tau2 must be positive")


@dataclass
class PosteriorDraws:
    draws: list
    n_tune: int
    seed: int
    step_size: float = float("nan")
    accept_rate: float = float("nan")
    divergent_fraction: float = 0.0
    flagged: bool = False

    def __post_init__(self):
        if len(self.draws) < 1:
            raise ValueError("need at least one posterior draw")

    @property
    def P(self) -> int:
        return len(self.draws)


@dataclass
class BinState:
    """Bin-level latent state: mean no-intervention adoption probability per
    bin concatenated with mean lagged adoption per bin (length 2K)."""

    l0_bar: np.ndarray
    y_bar: np.ndarray

    def __post_init__(self):
        self.l0_bar = np.asarray(self.l0_bar, dtype=float)
        self.y_bar = np.asarray(self.y_bar, dtype=float)
        if self.l0_bar.shape != self.y_bar.shape:
            raise ValueError("state halves must have equal length")
        for name, vec in (("l0_bar", self.l0_bar), ("y_bar", self.y_bar)):
            if ((vec < 0.0) | (vec > 1.0)).any():
                raise ValueError(f"{name} entries must lie in [0,1]")

    @property
    def K(self) -> int:
        return self.l0_bar.shape[0]

    def vector(self) -> np.ndarray:
        return np.concatenate([self.l0_bar, self.y_bar])


# ---------------------------------------------------------------------------
# Design construction
# ---------------------------------------------------------------------------

@dataclass
class PanelDesign:
    """Per-bin observation matrices for the factorized likelihood.

    For bin k, ``X[k]`` has one row per (node in bin k, period) with columns
    [1, treated self, lagged self, treated neighbor, adopted-neighbor count
    by source bin (K columns)]; ``y[k]`` holds the realized outcomes.
    """

    K: int
    X: list
    y: list

    @property
    def n_obs(self) -> int:
        return int(sum(x.shape[0] for x in self.X))


def _neighbor_counts(graph: Graph, partition: BinPartition, y_prev: np.ndarray) -> np.ndarray:
    """counts[i, m] = adopted neighbors of i lying in bin m."""
    adj = _cached_adjacency(graph)
    weighted = partition.indicator() * y_prev[:, None].astype(float)
    return adj @ weighted


def _cached_adjacency(graph: Graph) -> np.ndarray:
    adj = getattr(graph, "_adj_cache", None)
    if adj is None:
        adj = graph.adjacency()
        graph._adj_cache = adj
    return adj


def build_design(panel: Panel, graph: Graph, partition: BinPartition) -> PanelDesign:
    if len(panel) < 1:
        raise ValueError("panel must contain at least one period")
    n, K = graph.n, partition.K
    width = 4 + K
    rows: list[list[np.ndarray]] = [[] for _ in range(K)]
    outs: list[list[np.ndarray]] = [[] for _ in range(K)]
    members = [partition.members(k) for k in range(K)]
    for t in range(1, len(panel) + 1):
        y_prev = panel.outcome_before(t).astype(float)
        a = panel.actions[t - 1]
        counts = _neighbor_counts(graph, partition, y_prev)
        treat_self = np.zeros(n)
        treat_nbr = np.zeros(n)
        if a is not None:
            treat_self[a] = 1.0
            treat_nbr[graph.neighbors(int(a))] = 1.0
        block = np.empty((n, width))
        block[:, 0] = 1.0
        block[:, 1] = treat_self
        block[:, 2] = y_prev
        block[:, 3] = treat_nbr
        block[:, 4:] = counts
        y_t = panel.outcomes[t - 1].astype(float)
        for k in range(K):
            rows[k].append(block[members[k]])
            outs[k].append(y_t[members[k]])
    X = [np.concatenate(rows[k], axis=0) for k in range(K)]
    y = [np.concatenate(outs[k], axis=0) for k in range(K)]
    return PanelDesign(K=K, X=X, y=y)


# ---------------------------------------------------------------------------
# Predictors and likelihood
# ---------------------------------------------------------------------------

def predictors(
    params: IsingParams,
    graph: Graph,
    partition: BinPartition,
    y_prev: np.ndarray,
    action: int | None,
) -> np.ndarray:
    """Linear predictor for every node under one lagged outcome and action.
    ``action=None`` zeroes both treatment indicators."""
    y_prev = np.asarray(y_prev, dtype=float)
    if y_prev.shape != (graph.n,):
        raise ValueError("y_prev must have length n")
    bins = partition.bin_of
    counts = _neighbor_counts(graph, partition, y_prev)
    eta = (
        params.beta0[bins]
        + params.beta2[bins] * y_prev
        + np.sum(params.gamma[bins] * counts, axis=1)
    )
    if action is not None:
        if not (0 <= action < graph.n):
            raise ValueError(f"action node {action} out of range")
        eta[action] += params.beta1[bins[action]]
        nbrs = graph.neighbors(int(action))
        eta[nbrs] += params.beta3[bins[nbrs]]
    return eta


def linear_predictor(
    params: IsingParams,
    graph: Graph,
    partition: BinPartition,
    y_prev: np.ndarray,
    action: int | None,
    node: int,
) -> float:
    if not (0 <= node < graph.n):
        raise ValueError(f"node {node} out of range")
    return float(predictors(params, graph, partition, y_prev, action)[node])


def _bin_theta(params: IsingParams) -> list[np.ndarray]:
    return [
        np.concatenate(([params.beta0[k], params.beta1[k], params.beta2[k], params.beta3[k]], params.gamma[k]))
        for k in range(params.K)
    ]


def _loglik_design(design: PanelDesign, thetas: list[np.ndarray]) -> float:
    total = 0.0
    for k in range(design.K):
        eta = np.clip(design.X[k] @ thetas[k], -ETA_CLIP, ETA_CLIP)
        total += float(design.y[k] @ eta - np.logaddexp(0.0, eta).sum())
    return total


def log_likelihood(params: IsingParams, panel: Panel, graph: Graph, partition: BinPartition) -> float:
    """Sum over nodes and periods of y*eta - log(1 + exp(eta))."""
    design = build_design(panel, graph, partition)
    return _loglik_design(design, _bin_theta(params))


# ---------------------------------------------------------------------------
# Spike-and-slab machinery
# ---------------------------------------------------------------------------

def _log_normal_pdf(x, var):
    return -np.square(x) / (2.0 * var) - 0.5 * np.log(2.0 * np.pi * var)


def _log_mixture_parts(gamma, bin_sizes, priors: PriorSpec):
    """Log of the weighted slab and spike densities; stable for any gamma.
    The inclusion rate min(c/|bin|, 1) uses the source bin's size, indexed
    by the last axis of ``gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    w = np.minimum(priors.c / np.asarray(bin_sizes, dtype=float), 1.0)
    with np.errstate(divide="ignore"):
        log_slab = np.log(w) + _log_normal_pdf(gamma, priors.v1)
        log_spike = np.log1p(-np.minimum(w, 1.0 - 1e-300)) + _log_normal_pdf(gamma, priors.v0)
    return log_slab, log_spike


def inclusion_probability(gamma, bin_sizes, priors: PriorSpec) -> np.ndarray:
    """Posterior probability that a coupling comes from the slab.

    ``gamma`` is the K x K coupling matrix (or any array whose last axis is
    indexed by source bin); the inclusion rate min(c/|bin|, 1) uses the
    source bin's size.
    """
    log_slab, log_spike = _log_mixture_parts(gamma, bin_sizes, priors)
    return sigmoid(np.asarray(log_slab - log_spike))


def _penalty_weights(pstar: np.ndarray, priors: PriorSpec) -> np.ndarray:
    return pstar / priors.v1 + (1.0 - pstar) / priors.v0


def _penalized_objective(design, thetas, dstar, priors) -> float:
    """Log-likelihood minus the current-weight quadratic penalty."""
    val = _loglik_design(design, thetas)
    for k in range(design.K):
        beta = thetas[k][:4]
        gam = thetas[k][4:]
        val -= 0.5 * float(beta @ beta) / priors.tau2
        val -= 0.5 * float(np.sum(dstar[k] * gam * gam))
    return val


@dataclass
class EmvsFit:
    params: IsingParams
    inclusion: np.ndarray
    converged: bool
    n_iters: int
    objective_trace: list = field(default_factory=list)


def fit_emvs(
    panel: Panel,
    graph: Graph,
    partition: BinPartition,
    priors: PriorSpec,
    tol: float = 1e-4,
    max_iters: int = 500,
) -> EmvsFit:
    """EM over the spike-and-slab mixture.

    E-step turns each coupling into an inclusion probability; M-step solves
    the weighted penalized logistic fit by damped Newton, bin by bin. Stops
    when the largest parameter change drops below ``tol``; non-convergence
    is reported on the result, not raised.
    """
    if len(panel) < 2:
        raise ValueError("EMVS needs a panel with at least two periods")
    design = build_design(panel, graph, partition)
    K = partition.K
    sizes = partition.sizes()
    thetas = [np.zeros(4 + K) for _ in range(K)]
    trace: list[tuple[float, float]] = []
    converged = False
    n_iters = 0
    for n_iters in range(1, max_iters + 1):
        gamma = np.stack([th[4:] for th in thetas])
        pstar = inclusion_probability(gamma, sizes, priors)
        dstar = _penalty_weights(pstar, priors)
        before = _penalized_objective(design, thetas, dstar, priors)
        new_thetas = [
            _newton_logistic(design.X[k], design.y[k], thetas[k], dstar[k], priors.tau2)
            for k in range(K)
        ]
        after = _penalized_objective(design, new_thetas, dstar, priors)
        trace.append((before, after))
        delta = max(float(np.max(np.abs(nt - t))) for nt, t in zip(new_thetas, thetas))
        thetas = new_thetas
        if delta < tol:
            converged = True
            break
    if not converged:
        log.warning("EMVS did not converge within %d iterations", max_iters)
    gamma = np.stack([th[4:] for th in thetas])
    params = IsingParams(
        beta0=np.array([th[0] for th in thetas]),
        beta1=np.array([th[1] for th in thetas]),
        beta2=np.array([th[2] for th in thetas]),
        beta3=np.array([th[3] for th in thetas]),
        gamma=gamma,
    )
    return EmvsFit(
        params=params,
        inclusion=inclusion_probability(gamma, sizes, priors),
        converged=converged,
        n_iters=n_iters,
        objective_trace=trace,
    )


def _newton_logistic(
    X: np.ndarray,
    y: np.ndarray,
    theta0: np.ndarray,
    gamma_weights: np.ndarray,
    tau2: float,
    max_inner: int = 50,
    grad_tol: float = 1e-9,
) -> np.ndarray:
    """Maximize logistic log-likelihood minus 0.5*theta' P theta by damped
    Newton with step halving; never decreases the objective."""
    pen = np.concatenate([np.full(4, 1.0 / tau2), gamma_weights])

    def objective(th):
        eta = np.clip(X @ th, -ETA_CLIP, ETA_CLIP)
        return float(y @ eta - np.logaddexp(0.0, eta).sum() - 0.5 * np.sum(pen * th * th))

    theta = theta0.copy()
    f = objective(theta)
    for _ in range(max_inner):
        eta = np.clip(X @ theta, -ETA_CLIP, ETA_CLIP)
        mu = sigmoid(eta)
        grad = X.T @ (y - mu) - pen * theta
        if float(np.max(np.abs(grad))) < grad_tol:
            break
        w = mu * (1.0 - mu)
        hess = X.T @ (X * w[:, None]) + np.diag(pen)
        direction = np.linalg.solve(hess, grad)
        step = 1.0
        improved = False
        for _ in range(40):
            cand = theta + step * direction
            fc = objective(cand)
            if fc >= f:
                theta, f = cand, fc
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return theta


# ---------------------------------------------------------------------------
# Log posterior and HMC
# ---------------------------------------------------------------------------

def log_posterior(theta_flat: np.ndarray, design: PanelDesign, priors: PriorSpec, bin_sizes) -> float:
    K = design.K
    width = 4 + K
    thetas = [theta_flat[k * width : (k + 1) * width] for k in range(K)]
    val = _loglik_design(design, thetas)
    for k in range(K):
        beta = thetas[k][:4]
        gam = thetas[k][4:]
        val += float(np.sum(-0.5 * beta * beta / priors.tau2 - 0.5 * np.log(2.0 * np.pi * priors.tau2)))
        log_slab, log_spike = _log_mixture_parts(gam, bin_sizes, priors)
        val += float(np.sum(np.logaddexp(log_slab, log_spike)))
    return val


def grad_log_posterior(theta_flat: np.ndarray, design: PanelDesign, priors: PriorSpec, bin_sizes) -> np.ndarray:
    K = design.K
    width = 4 + K
    grad = np.empty_like(theta_flat)
    for k in range(K):
        th = theta_flat[k * width : (k + 1) * width]
        eta = np.clip(design.X[k] @ th, -ETA_CLIP, ETA_CLIP)
        g = design.X[k].T @ (design.y[k] - sigmoid(eta))
        beta = th[:4]
        gam = th[4:]
        g[:4] += -beta / priors.tau2
        resp = inclusion_probability(gam, bin_sizes, priors)
        g[4:] += -gam * (resp / priors.v1 + (1.0 - resp) / priors.v0)
        grad[k * width : (k + 1) * width] = g
    return grad


def leapfrog(theta, momentum, eps, n_steps, grad_fn):
    """Standard leapfrog integrator for the HMC Hamiltonian."""
    theta = theta.copy()
    momentum = momentum + 0.5 * eps * grad_fn(theta)
    for i in range(n_steps):
        theta = theta + eps * momentum
        if i < n_steps - 1:
            momentum = momentum + eps * grad_fn(theta)
    momentum = momentum + 0.5 * eps * grad_fn(theta)
    return theta, momentum


DIVERGENCE_ENERGY = 1000.0


def sample_posterior(
    panel: Panel,
    graph: Graph,
    partition: BinPartition,
    priors: PriorSpec,
    n_draws: int,
    n_tune: int,
    seed: int,
    leapfrog_steps: int = 16,
    target_accept: float = 0.8,
    flag_divergent_above: float = 0.1,
) -> PosteriorDraws:
    """Hamiltonian Monte Carlo over the full coefficient vector.

    Fixed leapfrog length with dual-averaging step-size adaptation during
    the tune phase; the tune draws are discarded. A run whose divergent
    fraction exceeds ``flag_divergent_above`` is returned flagged.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    design = build_design(panel, graph, partition)
    sizes = partition.sizes()
    K = partition.K
    dim = K * (4 + K)
    rng = RngTree(seed).child("hmc").generator()

    def logp(th):
        return log_posterior(th, design, priors, sizes)

    def grad(th):
        return grad_log_posterior(th, design, priors, sizes)

    theta = np.zeros(dim)

    # reasonable initial step size: scale until acceptance crosses 1/2
    eps = 0.1
    p0 = rng.standard_normal(dim)
    h0 = -logp(theta) + 0.5 * p0 @ p0
    th1, p1 = leapfrog(theta, p0, eps, 1, grad)
    h1 = -logp(th1) + 0.5 * p1 @ p1
    direction = 1.0 if (h0 - h1) > np.log(0.5) else -1.0
    for _ in range(50):
        eps *= 2.0**direction
        th1, p1 = leapfrog(theta, p0, eps, 1, grad)
        h1 = -logp(th1) + 0.5 * p1 @ p1
        if direction * (h0 - h1) < direction * np.log(0.5):
            break

    # dual averaging (tune phase)
    mu = np.log(10.0 * eps)
    log_eps_bar = 0.0
    h_bar = 0.0
    da_gamma, da_t0, da_kappa = 0.05, 10.0, 0.75

    draws: list[IsingParams] = []
    divergences = 0
    accepts = 0
    total = n_tune + n_draws
    for it in range(1, total + 1):
        p = rng.standard_normal(dim)
        current_h = -logp(theta) + 0.5 * p @ p
        prop, prop_p = leapfrog(theta, p, eps, leapfrog_steps, grad)
        prop_h = -logp(prop) + 0.5 * prop_p @ prop_p
        delta_h = current_h - prop_h
        if not np.isfinite(delta_h) or -delta_h > DIVERGENCE_ENERGY:
            divergences += 1
            alpha = 0.0
        else:
            alpha = 1.0 if delta_h >= 0 else float(np.exp(delta_h))
        if rng.random() < alpha:
            theta = prop
            accepts += 1
        if it <= n_tune:
            m = it
            h_bar = (1.0 - 1.0 / (m + da_t0)) * h_bar + (target_accept - alpha) / (m + da_t0)
            log_eps = mu - np.sqrt(m) / da_gamma * h_bar
            eta_m = m**-da_kappa
            log_eps_bar = eta_m * log_eps + (1.0 - eta_m) * log_eps_bar
            eps = float(np.exp(log_eps))
            if it == n_tune:
                eps = float(np.exp(log_eps_bar))
        else:
            draws.append(IsingParams.from_flat(theta.copy(), K))

    frac = divergences / total
    flagged = frac > flag_divergent_above
    if flagged:
        log.warning("HMC flagged: divergent fraction %.3f", frac)
    return PosteriorDraws(
        draws=draws,
        n_tune=n_tune,
        seed=seed,
        step_size=eps,
        accept_rate=accepts / total,
        divergent_fraction=frac,
        flagged=flagged,
    )


def simulate_ising_panel(
    params: IsingParams,
    graph: Graph,
    partition: BinPartition,
    T: int,
    seed: int,
    y0: np.ndarray | None = None,
) -> Panel:
    """Generate a logged panel from known dynamics under uniform random bin
    logging: each period draws a bin, then a node uniformly inside it, and
    every node's outcome is an independent Bernoulli of its predictor."""
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = RngTree(seed).child("ising-sim").generator()
    n = graph.n
    y_prev = np.zeros(n, dtype=np.int8) if y0 is None else np.asarray(y0, dtype=np.int8)
    actions: list[int] = []
    outcomes: list[np.ndarray] = []
    for _ in range(T):
        k = int(rng.integers(partition.K))
        members = partition.members(k)
        a = int(members[int(rng.integers(members.size))])
        prob = sigmoid(predictors(params, graph, partition, y_prev, a))
        y_t = (rng.random(n) < prob).astype(np.int8)
        actions.append(a)
        outcomes.append(y_t)
        y_prev = y_t
    return Panel(y0=np.zeros(n, dtype=np.int8) if y0 is None else y0, actions=actions, outcomes=outcomes)


# ---------------------------------------------------------------------------
# State construction and fit diagnostics
# ---------------------------------------------------------------------------

def belief_no_intervention(
    params: IsingParams, graph: Graph, partition: BinPartition, y_prev: np.ndarray
) -> np.ndarray:
    """Per-node adoption probability for the next period with treatment
    indicators zeroed: where the network is headed absent intervention."""
    return sigmoid(predictors(params, graph, partition, y_prev, action=None))


def build_state(l0: np.ndarray, y_prev: np.ndarray, partition: BinPartition) -> BinState:
    l0 = np.asarray(l0, dtype=float)
    y_prev = np.asarray(y_prev, dtype=float)
    if l0.shape != (partition.n,) or y_prev.shape != (partition.n,):
        raise ValueError("vectors must have length n")
    ind = partition.indicator()
    sizes = partition.sizes().astype(float)
    return BinState(l0_bar=(ind.T @ l0) / sizes, y_bar=(ind.T @ y_prev) / sizes)


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged."""
    uniq, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    mid = starts + (counts + 1) / 2.0
    return mid[inverse]


def rank_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Midrank AUC of scores against binary labels."""
    scores = np.asarray(scores, dtype=float)
    lab = np.asarray(labels, dtype=int)
    n_pos = int(lab.sum())
    n_neg = int(lab.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: labels contain a single class")
    ranks = _midranks(scores)
    return float((ranks[lab == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def one_step_auc(params: IsingParams, holdout_panel: Panel, graph: Graph, partition: BinPartition) -> float:
    """Rank AUC of predicted next-period probabilities against realized
    outcomes, pooled over nodes and periods."""
    if len(holdout_panel) < 1:
        raise ValueError("holdout panel is empty")
    scores = []
    labels = []
    for t in range(1, len(holdout_panel) + 1):
        eta = predictors(params, graph, partition, holdout_panel.outcome_before(t), holdout_panel.actions[t - 1])
        scores.append(sigmoid(eta))
        labels.append(holdout_panel.outcomes[t - 1])
    return rank_auc(np.concatenate(scores), np.concatenate(labels))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_params(params: IsingParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_params(path) -> IsingParams:
    with open(path, "r", encoding="utf-8") as fh:
        return IsingParams.from_dict(json.load(fh))


def save_draws(draws: PosteriorDraws, path) -> None:
    doc = {
        "draws": [d.to_dict() for d in draws.draws],
        "n_tune": draws.n_tune,
        "seed": draws.seed,
        "step_size": draws.step_size,
        "accept_rate": draws.accept_rate,
        "divergent_fraction": draws.divergent_fraction,
        "flagged": draws.flagged,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_draws(path) -> PosteriorDraws:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return PosteriorDraws(
        draws=[IsingParams.from_dict(d) for d in doc["draws"]],
        n_tune=doc["n_tune"],
        seed=doc["seed"],
        step_size=doc.get("step_size", float("nan")),
        accept_rate=doc.get("accept_rate", float("nan")),
        divergent_fraction=doc.get("divergent_fraction", 0.0),
        flagged=doc.get("flagged", False),
    )
