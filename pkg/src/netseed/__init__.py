"""Dynamic seeding policies on networks.

Pipeline: infer bin-level adoption dynamics from one logged panel, build
low-dimensional bin states from the fitted model, learn a conservative
Q-policy (or a pessimistic linear value iteration) offline, and evaluate
against heuristic baselines in a seeded SIS environment.
"""

from .diffusion import Panel, SisConfig, SisState, generate_panel, reward, step
from .graphs import BinPartition, Graph, detect_communities, edge_betweenness, gen_sbm, modularity
from .ising import (
    BinState,
    IsingParams,
    PosteriorDraws,
    PriorSpec,
    belief_no_intervention,
    build_state,
    fit_emvs,
    linear_predictor,
    log_likelihood,
    one_step_auc,
    sample_posterior,
)
from .rl import (
    CqlHyper,
    PeviPolicy,
    QNetwork,
    Transition,
    bonus_beta_from_radius,
    build_transitions,
    cql_loss,
    feature_map,
    pevi_bonus,
    pevi_uncertainty,
    train_cql,
    train_pevi,
)
from .policies import EnsemblePolicy, LearnedQPolicy, Observation, lir_index, make_policy
from .evaluate import (
    EvalReport,
    FiniteMdp,
    exact_policy_value,
    improvement_vs_baseline,
    modularity_correlation,
    rollout,
    synchronous_stationary,
)
from .rng import RngTree

__version__ = "0.1.0"
