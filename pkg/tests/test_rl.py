import numpy as np
import pytest

import netseed as ns
from netseed.diffusion import Panel
from netseed.ising import BinState
from netseed.rl import (
    CqlHyper,
    PeviStageData,
    QNetwork,
    cql_loss_and_grads,
    load_pevi,
    load_qnetwork,
    load_transitions,
    save_pevi,
    save_qnetwork,
    save_transitions,
    stage_datasets_from_transitions,
    transitions_to_arrays,
)
from netseed.verification import (
    check_cql_conservatism,
    check_feature_map,
    check_lemma_d3,
    check_pevi_pessimism,
    check_qnetwork_gradient,
    check_simulation_lemma,
    lemma_d5_experiment,
)
from conftest import make_sim_setup


def _zero_qnetwork(state_dim, n_actions, hidden=(8,)):
    q = QNetwork(state_dim, n_actions, hidden=hidden, rng=np.random.default_rng(0))
    for w in q.weights:
        w[...] = 0.0
    for b in q.biases:
        b[...] = 0.0
    return q


# --- transitions ----------------------------------------------------------------

def test_build_transitions_length_and_reward_bounds():
    graph, partition, params, panel = make_sim_setup(T=10)
    trs = ns.build_transitions(panel, params, graph, partition)
    assert len(trs) <= len(panel) - 1
    assert all(0.0 <= tr.r <= 1.0 for tr in trs)
    assert all(0 <= tr.b < partition.K for tr in trs)


def test_build_transitions_zero_params_give_half_beliefs():
    graph, partition, _, panel = make_sim_setup(T=6)
    trs = ns.build_transitions(panel, ns.IsingParams.zeros(2), graph, partition)
    for tr in trs:
        assert np.allclose(tr.s.l0_bar, 0.5)


def test_build_transitions_hand_panel():
    graph = ns.Graph(2, [(0, 1)])
    partition = ns.BinPartition(2, np.array([0, 1]))
    params = ns.IsingParams(
        beta0=np.array([-1.0, 0.5]),
        beta1=np.array([2.0, 1.0]),
        beta2=np.array([0.7, -0.3]),
        beta3=np.array([0.4, 0.2]),
        gamma=np.array([[0.0, 0.9], [-0.6, 0.0]]),
    )
    panel = Panel(
        y0=np.array([0, 1], dtype=np.int8),
        actions=[0, 1, 0],
        outcomes=[np.array([1, 0]), np.array([1, 1]), np.array([0, 1])],
    )
    trs = ns.build_transitions(panel, params, graph, partition)
    assert len(trs) == 2

    def sigma(x):
        return 1.0 / (1.0 + np.exp(-x))

    # state at t=1: beliefs from y0=(0,1) with no treatment
    eta0 = params.beta0[0] + params.gamma[0, 1] * 1  # node 0 sees adopted bin-1 neighbor
    eta1 = params.beta0[1] + params.beta2[1] * 1  # node 1 lagged self
    assert trs[0].s.l0_bar[0] == pytest.approx(sigma(eta0))
    assert trs[0].s.l0_bar[1] == pytest.approx(sigma(eta1))
    assert trs[0].s.y_bar.tolist() == [0.0, 1.0]
    assert trs[0].b == 0
    assert trs[0].r == pytest.approx(0.5)
    # next state uses y1 = (1, 0)
    assert trs[0].s_next.y_bar.tolist() == [1.0, 0.0]


def test_build_transitions_skips_none_actions_and_errors_when_empty():
    graph, partition, params, _ = make_sim_setup(T=4)
    dead = Panel(
        y0=np.zeros(12, dtype=np.int8),
        actions=[None, None, None],
        outcomes=[np.zeros(12, dtype=np.int8)] * 3,
    )
    with pytest.raises(ValueError):
        ns.build_transitions(dead, params, graph, partition)


def test_build_transitions_observable_ablation_duplicates_lag_block():
    graph, partition, params, panel = make_sim_setup(T=6)
    trs = ns.build_transitions(panel, None, graph, partition, use_beliefs=False)
    for tr in trs:
        assert np.array_equal(tr.s.l0_bar, tr.s.y_bar)


def test_transitions_jsonl_round_trip(tmp_path):
    graph, partition, params, panel = make_sim_setup(T=8)
    trs = ns.build_transitions(panel, params, graph, partition)
    path = tmp_path / "transitions.jsonl"
    save_transitions(trs, path)
    again = load_transitions(path)
    a1 = transitions_to_arrays(trs)
    a2 = transitions_to_arrays(again)
    assert all(np.array_equal(x, y) for x, y in zip(a1, a2))


# --- CQL -------------------------------------------------------------------------

def test_cql_loss_alpha_zero_is_bellman_mse():
    s = BinState(np.array([0.3, 0.4]), np.array([0.1, 0.2]))
    tr = ns.Transition(s=s, b=0, r=0.5, s_next=s)
    q = _zero_qnetwork(4, 2)
    assert ns.cql_loss(q, [tr], q, alpha=0.0, psi=0.8) == pytest.approx(0.25)


def test_cql_penalty_equals_log_k_for_constant_q():
    s = BinState(np.array([0.3, 0.4]), np.array([0.1, 0.2]))
    tr = ns.Transition(s=s, b=1, r=0.5, s_next=s)
    q = _zero_qnetwork(4, 2)
    with_penalty = ns.cql_loss(q, [tr], q, alpha=1.0, psi=0.8)
    assert with_penalty - 0.25 == pytest.approx(np.log(2.0))


def test_cql_loss_validates_arguments():
    s = BinState(np.array([0.3, 0.4]), np.array([0.1, 0.2]))
    tr = ns.Transition(s=s, b=0, r=0.5, s_next=s)
    q = _zero_qnetwork(4, 2)
    with pytest.raises(ValueError):
        ns.cql_loss(q, [tr], q, alpha=-1.0, psi=0.8)
    with pytest.raises(ValueError):
        ns.cql_loss(q, [tr], q, alpha=0.0, psi=1.0)


def test_cql_gradients_match_finite_differences():
    ok, detail = check_qnetwork_gradient()
    assert ok, detail


def test_train_cql_learns_dominant_action():
    svec = BinState(np.array([0.5, 0.5]), np.array([0.0, 0.0]))
    trs = []
    for _ in range(20):
        trs.append(ns.Transition(s=svec, b=0, r=1.0, s_next=svec))
        trs.append(ns.Transition(s=svec, b=1, r=0.0, s_next=svec))
    hyper = CqlHyper(hidden=(32, 32), max_steps=4000, steps_per_epoch=500, dropout=0.0)
    q = ns.train_cql(trs, hyper, seed=3)
    values = q.q_values(svec.vector())[0]
    assert int(np.argmax(values)) == 0
    # exact Q under the always-0 policy is r/(1-psi) = 5; learned value heads there
    assert values[0] > values[1] + 0.5


def test_train_cql_deterministic_given_seed():
    graph, partition, params, panel = make_sim_setup(T=20)
    trs = ns.build_transitions(panel, params, graph, partition)
    hyper = CqlHyper(hidden=(16,), max_steps=1000, steps_per_epoch=250)
    q1 = ns.train_cql(trs, hyper, seed=5)
    q2 = ns.train_cql(trs, hyper, seed=5)
    assert all(np.array_equal(a, b) for a, b in zip(q1.weights, q2.weights))
    assert all(np.array_equal(a, b) for a, b in zip(q1.biases, q2.biases))


def test_cql_conservatism_orders_never_logged_action():
    ok, detail = check_cql_conservatism()
    assert ok, detail


def test_train_cql_rejects_empty_dataset():
    with pytest.raises(ValueError):
        ns.train_cql((np.zeros((0, 4)), np.zeros(0, dtype=int), np.zeros(0), np.zeros((0, 4))), CqlHyper(), seed=0)


# --- feature map and PEVI -----------------------------------------------------------

def test_feature_map_construction():
    s = BinState(np.zeros(2), np.zeros(2))
    phi = ns.feature_map(s, 0)
    assert phi.shape == (10,)
    assert phi[0] == pytest.approx(1.0 / np.sqrt(5.0))
    assert np.count_nonzero(phi) == 1


def test_feature_map_bounds_invariant():
    ok, detail = check_feature_map()
    assert ok, detail


def test_pevi_no_data_is_zero():
    policy = ns.train_pevi([None] * 3, ridge=1.0, bonus_beta=2.0, H=3, d_phi=4)
    probes = np.vstack([np.eye(4)[0], 0.3 * np.ones(4)])
    assert np.allclose(policy.q_values(probes, 1), 0.0)


def test_pevi_scalar_ridge_weight():
    sd = PeviStageData(phi=np.array([[1.0, 0.0]]), rewards=np.array([1.0]), next_phi=np.zeros((1, 2, 2)))
    policy = ns.train_pevi([sd], ridge=1.0, bonus_beta=0.0, H=1)
    assert np.allclose(policy.weights[0], [0.5, 0.0])


def test_pevi_bonus_examples():
    assert ns.pevi_bonus(np.array([1.0, 0.0]), np.eye(2), 2.0) == pytest.approx(2.0)
    assert ns.pevi_bonus(np.zeros(2), np.eye(2), 2.0) == pytest.approx(0.0)
    assert ns.pevi_bonus(np.array([1.0, 0.0]), 4.0 * np.eye(2), 2.0) == pytest.approx(1.0)


def test_pevi_pessimism_and_clipping():
    ok, detail = check_pevi_pessimism()
    assert ok, detail


def test_pevi_tabular_abundant_data_reaches_true_value():
    # 2-state 2-action tabular linear MDP with dense coverage: the
    # pessimistic value at the start is within the bonus budget of exact DP
    from netseed.evaluate import FiniteMdp, exact_policy_value, optimal_rule

    rng = np.random.default_rng(6)
    S, A, H, n = 2, 2, 3, 2000
    d = S * A

    def one_hot(s, a):
        v = np.zeros(d)
        v[s * A + a] = 1.0
        return v

    R = np.array([[0.9, 0.1], [0.2, 0.6]])
    P = np.array([[[0.8, 0.2], [0.3, 0.7]], [[0.5, 0.5], [0.1, 0.9]]])
    mdp = FiniteMdp(transitions=P, rewards=R, horizon=H, start=0)
    stage_data = []
    for h in range(H):
        ss = rng.integers(0, S, n)
        aa = rng.integers(0, A, n)
        s2 = np.array([rng.choice(S, p=P[s, a]) for s, a in zip(ss, aa)])
        phi = np.stack([one_hot(s, a) for s, a in zip(ss, aa)])
        nxt = np.stack([np.stack([one_hot(s, a2) for a2 in range(A)]) for s in s2])
        stage_data.append(PeviStageData(phi=phi, rewards=R[ss, aa], next_phi=nxt))
    beta = 1.0
    policy = ns.train_pevi(stage_data, ridge=1.0, bonus_beta=beta, H=H)
    rule, v_star = optimal_rule(mdp)

    def learned_rule(h, s):
        return policy.act_features(np.stack([one_hot(s, a) for a in range(A)]), h)

    v_learned = exact_policy_value(mdp, learned_rule)
    # each stage bonus is at most beta/sqrt(n/d); the budget is tiny here
    budget = 2 * H * beta / np.sqrt(n / d)
    assert v_star - v_learned <= budget + 1e-9


def test_pevi_uncertainty_isotropic_and_monotone():
    lam = 2.0
    H, d = 3, 4
    phi = np.zeros(d)
    phi[0] = 1.0
    trajectories = [[phi] * H, [phi] * H]
    iso = [lam * np.eye(d)] * H
    val = ns.pevi_uncertainty(iso, trajectories)
    assert val == pytest.approx(H * 1.0 / np.sqrt(lam))
    # richer data in visited directions never increases the uncertainty
    richer = [lam * np.eye(d) + 5.0 * np.outer(phi, phi)] * H
    assert ns.pevi_uncertainty(richer, trajectories) < val


def test_bonus_beta_from_radius_examples():
    # n_log=0, W=0, C=1, H=1, d=1, delta=0.5 -> sqrt(log 2)
    val = ns.bonus_beta_from_radius(1, 1, 0, 1.0, 0.5, 0.0, 1.0)
    assert val == pytest.approx(np.sqrt(np.log(2.0)))
    # adding sqrt(lam) W term
    val2 = ns.bonus_beta_from_radius(1, 1, 0, 1.0, 0.5, 2.0, 1.0)
    assert val2 == pytest.approx(np.sqrt(np.log(2.0)) + 2.0)
    # monotone in n_log
    lo = ns.bonus_beta_from_radius(3, 6, 10, 1.0, 0.1, 1.0, 1.0)
    hi = ns.bonus_beta_from_radius(3, 6, 1000, 1.0, 0.1, 1.0, 1.0)
    assert hi > lo
    with pytest.raises(ValueError):
        ns.bonus_beta_from_radius(3, 6, 10, 1.0, 1.5, 1.0, 1.0)


def test_self_normalized_coverage():
    ok, detail = check_lemma_d3()
    assert ok, detail


def test_pessimistic_suboptimality_holds_on_linear_mdps():
    rate, gap, bound = lemma_d5_experiment(n_trials=50, seed=11)
    assert rate >= 0.95


def test_simulation_lemma_bounds():
    ok, detail = check_simulation_lemma()
    assert ok, detail


def test_stage_datasets_blocking():
    graph, partition, params, panel = make_sim_setup(T=30)
    trs = ns.build_transitions(panel, params, graph, partition)
    H = 5
    stages = stage_datasets_from_transitions(trs, H)
    n_blocks = len(trs) // H
    assert len(stages) == H
    assert all(sd.n == n_blocks for sd in stages)
    # block tau contributes its h-th transition to stage h
    first = stages[0].phi[0]
    assert np.allclose(first, ns.feature_map(trs[0].s, trs[0].b))
    second_stage_first = stages[1].phi[0]
    assert np.allclose(second_stage_first, ns.feature_map(trs[1].s, trs[1].b))


# --- persistence -----------------------------------------------------------------------

def test_qnetwork_json_round_trip(tmp_path):
    q = QNetwork(4, 2, hidden=(8, 8), rng=np.random.default_rng(3))
    q.meta = {"psi": 0.8, "alpha": 0.1, "seed": 7, "state_dim": 4, "n_actions": 2}
    path = tmp_path / "model.json"
    save_qnetwork(q, path)
    again = load_qnetwork(path)
    assert all(np.array_equal(a, b) for a, b in zip(q.weights, again.weights))
    assert again.meta["psi"] == 0.8 and again.meta["seed"] == 7
    probe = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.allclose(q.q_values(probe), again.q_values(probe))


def test_pevi_json_round_trip(tmp_path):
    sd = PeviStageData(
        phi=np.array([[1.0, 0.0], [0.5, 0.5]]),
        rewards=np.array([1.0, 0.3]),
        next_phi=np.zeros((2, 2, 2)),
    )
    policy = ns.train_pevi([sd, None], ridge=1.0, bonus_beta=0.7, H=2)
    path = tmp_path / "pevi.json"
    save_pevi(policy, path)
    again = load_pevi(path)
    probes = np.array([[1.0, 0.0], [0.0, 1.0]])
    for h in (1, 2):
        assert np.allclose(policy.q_values(probes, h), again.q_values(probes, h))
