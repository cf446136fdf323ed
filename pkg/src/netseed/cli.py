"""End-to-end driver.

Subcommands: gen-sbm, simulate, fit, train, eval, ensemble (fit + train +
eval over posterior draws), verify. One master seed in the config drives
every stage through labeled derivation; artifact writes are atomic
(temp file then rename) so identical runs yield byte-identical outputs.

Exit codes: 0 success, 1 usage/config error, 2 runtime failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diffusion, figures, graphs, ising, rl
from .config import ConfigError, RunConfig
from .evaluate import EvalReport, report_to_csv, rollout, save_report
from .policies import EnsemblePolicy, make_policy

log = logging.getLogger("netseed")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3


def _atomic_write(path: Path, writer) -> None:
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def _load_graph(cfg: RunConfig, out: Path):
    """Graph and partition per the config, generating or loading as needed."""
    spec = cfg.require("graph")
    kind = spec.get("kind")
    if kind == "sbm":
        return graphs.gen_sbm(spec["block_sizes"], spec["p_in"], spec["p_out"], cfg.subseed("graph"))
    if kind == "edge_list":
        path = cfg.resolve(spec["path"])
        if not path.exists():
            raise ConfigError(f"edge list {path} does not exist")
        graph = graphs.load_edge_list(path)
        if spec.get("partition_path"):
            ppath = cfg.resolve(spec["partition_path"])
            if not ppath.exists():
                raise ConfigError(f"partition file {ppath} does not exist")
            partition = graphs.load_partition(ppath, n=graph.n)
        else:
            partition = graphs.detect_communities(graph, min_size=int(spec.get("min_size", 1)))
        return graph, partition
    raise ConfigError(f"graph.kind must be 'sbm' or 'edge_list', got {kind!r}")


def _sis_config(cfg: RunConfig, graph, partition) -> diffusion.SisConfig:
    spec = cfg.require("sis")
    return diffusion.SisConfig(
        spread=np.array(spec["spread"], dtype=float),
        churn=np.array(spec["churn"], dtype=float),
        graph=graph,
        partition=partition,
    )


def _priors(cfg: RunConfig) -> ising.PriorSpec:
    spec = cfg.section("ising")
    return ising.PriorSpec(v0=spec["v0"], v1=spec["v1"], c=spec["c"], tau2=spec["tau2"])


def _hyper(cfg: RunConfig) -> rl.CqlHyper:
    spec = cfg.section("rl")
    return rl.CqlHyper(
        hidden=tuple(spec["hidden"]),
        batch_size=spec["batch_size"],
        lr=spec["lr"],
        dropout=spec["dropout"],
        psi=spec["psi"],
        alpha=spec["alpha"],
        max_steps=spec["max_steps"],
        steps_per_epoch=spec["steps_per_epoch"],
        patience=spec["patience"],
        min_delta=spec["min_delta"],
    )


# ---------------------------------------------------------------------------
# Subcommand bodies (importable; raise on failure)
# ---------------------------------------------------------------------------

def cmd_gen(cfg: RunConfig, out: Path) -> dict:
    graph, partition = _load_graph(cfg, out)
    _atomic_write(out / "graph.csv", lambda p: graphs.save_edge_list(graph, p))
    _atomic_write(out / "partition.csv", lambda p: graphs.save_partition(partition, p))
    log.info("wrote graph (%d nodes, %d edges) and partition (K=%d)", graph.n, graph.edge_count, partition.K)
    return {"graph": out / "graph.csv", "partition": out / "partition.csv"}


def _graph_artifacts(cfg: RunConfig, out: Path):
    gpath, ppath = out / "graph.csv", out / "partition.csv"
    if gpath.exists() and ppath.exists():
        partition = graphs.load_partition(ppath)
        graph = graphs.load_edge_list(gpath)
        if graph.n < partition.n:
            # isolated nodes are absent from the edge list; the partition
            # file carries the true node count
            graph = graphs.Graph(partition.n, graph.edges)
        return graph, partition
    return _load_graph(cfg, out)


def cmd_simulate(cfg: RunConfig, out: Path) -> dict:
    graph, partition = _graph_artifacts(cfg, out)
    sis = _sis_config(cfg, graph, partition)
    spec = cfg.require("panel")
    policy = make_policy(spec.get("logging_policy", "random_bin"), graph, partition, sis_config=sis)
    panel = diffusion.generate_panel(sis, policy, T=int(spec["t_train"]), seed=cfg.subseed("panel"))
    _atomic_write(out / "panel.jsonl", lambda p: diffusion.save_panel(panel, p))
    log.info("wrote %d-period panel", len(panel))
    return {"panel": out / "panel.jsonl"}


def cmd_fit(cfg: RunConfig, out: Path) -> dict:
    graph, partition = _graph_artifacts(cfg, out)
    panel = diffusion.load_panel(out / "panel.jsonl")
    spec = cfg.section("ising")
    priors = _priors(cfg)
    if spec["estimator"] == "emvs":
        fit = ising.fit_emvs(panel, graph, partition, priors, tol=spec["tol"], max_iters=spec["max_iters"])
        if not fit.converged:
            log.warning("EMVS flagged as non-converged after %d iterations", fit.n_iters)
        _atomic_write(out / "params.json", lambda p: ising.save_params(fit.params, p))
        return {"params": out / "params.json"}
    if spec["estimator"] == "mcmc":
        draws = ising.sample_posterior(
            panel, graph, partition, priors,
            n_draws=int(spec["draws"]), n_tune=int(spec["tune"]), seed=cfg.subseed("fit"),
        )
        if draws.flagged:
            log.warning("posterior sampling flagged: divergent fraction %.3f", draws.divergent_fraction)
        _atomic_write(out / "draws.json", lambda p: ising.save_draws(draws, p))
        return {"draws": out / "draws.json"}
    raise ConfigError(f"ising.estimator must be 'emvs' or 'mcmc', got {spec['estimator']!r}")


def _train_one(args):
    """Worker for (possibly parallel) per-draw training."""
    arrays, hyper, seed = args
    return rl.train_cql(arrays, hyper, seed=seed)


def cmd_train(cfg: RunConfig, out: Path) -> dict:
    graph, partition = _graph_artifacts(cfg, out)
    panel = diffusion.load_panel(out / "panel.jsonl")
    spec = cfg.section("rl")
    use_beliefs = spec["state"] == "beliefs"

    draws_path = out / "draws.json"
    params_list: list[ising.IsingParams]
    if draws_path.exists():
        params_list = [d for d in ising.load_draws(draws_path).draws]
    else:
        params_list = [ising.load_params(out / "params.json")]

    written = {}
    if spec["algorithm"] == "cql":
        hyper = _hyper(cfg)
        jobs = []
        for p_idx, params in enumerate(params_list):
            transitions = rl.build_transitions(panel, params, graph, partition, use_beliefs=use_beliefs)
            if p_idx == 0:
                _atomic_write(out / "transitions.jsonl", lambda p: rl.save_transitions(transitions, p))
                written["transitions.jsonl"] = out / "transitions.jsonl"
            jobs.append((rl.transitions_to_arrays(transitions), hyper, cfg.subseed("train", p_idx)))
        if cfg.threads > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
                nets = list(pool.map(_train_one, jobs))
        else:
            nets = [_train_one(job) for job in jobs]
        for p_idx, net in enumerate(nets):
            name = "model.json" if len(nets) == 1 else f"model_p{p_idx:03d}.json"
            _atomic_write(out / name, lambda p, net=net: rl.save_qnetwork(net, p))
            written[name] = out / name
        return written
    if spec["algorithm"] == "pevi":
        horizon = int(spec["horizon"])
        for p_idx, params in enumerate(params_list):
            transitions = rl.build_transitions(panel, params, graph, partition, use_beliefs=use_beliefs)
            stage_data = rl.stage_datasets_from_transitions(transitions, horizon)
            policy = rl.train_pevi(stage_data, ridge=spec["ridge"], bonus_beta=spec["bonus_beta"], H=horizon)
            name = "pevi.json" if len(params_list) == 1 else f"pevi_p{p_idx:03d}.json"
            _atomic_write(out / name, lambda p, policy=policy: rl.save_pevi(policy, p))
            written[name] = out / name
        return written
    raise ConfigError(f"rl.algorithm must be 'cql' or 'pevi', got {spec['algorithm']!r}")


def _learned_policies(cfg: RunConfig, out: Path, graph, partition):
    """Instantiate learned/ensemble policies from artifacts in ``out``."""
    spec = cfg.section("rl")
    state_mode = "beliefs" if spec["state"] == "beliefs" else "observable"
    draws_path = out / "draws.json"
    policies = {}
    if spec["algorithm"] == "pevi":
        if (out / "pevi.json").exists():
            policies["pevi"] = make_policy(
                "pevi", graph, partition,
                pevi=rl.load_pevi(out / "pevi.json"),
                params=ising.load_params(out / "params.json") if (out / "params.json").exists() else None,
                state_mode=state_mode,
            )
        return policies
    if draws_path.exists():
        draws = ising.load_draws(draws_path)
        members = []
        for p_idx, params in enumerate(draws.draws):
            mpath = out / f"model_p{p_idx:03d}.json"
            if not mpath.exists():
                raise ConfigError(f"missing ensemble member model {mpath}")
            members.append(
                make_policy("learned_q", graph, partition, q=rl.load_qnetwork(mpath),
                            params=params, state_mode=state_mode, name=f"member_{p_idx:03d}")
            )
        policies["ensemble"] = EnsemblePolicy(members)
        policies["member_000"] = members[0]
    elif (out / "model.json").exists():
        policies["learned_q"] = make_policy(
            "learned_q", graph, partition, q=rl.load_qnetwork(out / "model.json"),
            params=ising.load_params(out / "params.json"), state_mode=state_mode,
        )
    return policies


def cmd_eval(cfg: RunConfig, out: Path) -> dict:
    graph, partition = _graph_artifacts(cfg, out)
    sis = _sis_config(cfg, graph, partition)
    spec = cfg.section("eval")
    H, n_runs = int(spec["horizon"]), int(spec["n_runs"])
    eval_seed = cfg.subseed("eval")

    available = _learned_policies(cfg, out, graph, partition)
    report: EvalReport | None = None
    for name in spec["policies"]:
        if name in available:
            policy = available[name]
        else:
            policy = make_policy(name, graph, partition, sis_config=sis)
        single = rollout(sis, policy, H, n_runs, eval_seed, policy_name=name)
        report = single if report is None else report.merge(single)
    if report is None:
        raise ConfigError("eval.policies is empty")
    _atomic_write(out / "report.json", lambda p: save_report(report, p))
    _atomic_write(out / "report.csv", lambda p: report_to_csv(report, p))
    _atomic_write(out / "reward_curves.png", lambda p: figures.render_reward_curves(report, p))
    _atomic_write(out / "welfare.png", lambda p: figures.render_welfare_bars(report, p))
    log.info("evaluated %d policies over H=%d x %d runs", len(report.curves), H, n_runs)
    return {"report": out / "report.json", "csv": out / "report.csv"}


def cmd_ensemble(cfg: RunConfig, out: Path) -> dict:
    """Fit posterior draws, train one agent per draw, evaluate the vote."""
    doc = dict(cfg.doc)
    doc.setdefault("ising", {})
    doc["ising"] = {**doc["ising"], "estimator": "mcmc"}
    cfg = RunConfig.from_dict(doc, base_dir=cfg.base_dir)
    cmd_gen(cfg, out)
    cmd_simulate(cfg, out)
    written = cmd_fit(cfg, out)
    written.update(cmd_train(cfg, out))
    eval_spec = cfg.section("eval")
    if "ensemble" not in eval_spec["policies"]:
        doc["eval"] = {**eval_spec, "policies": list(eval_spec["policies"]) + ["ensemble"]}
        cfg = RunConfig.from_dict(doc, base_dir=cfg.base_dir)
    written.update(cmd_eval(cfg, out))
    return written


def cmd_verify(fast: bool = False) -> int:
    from .verification import run_all

    results = run_all(fast=fast)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_VERIFY


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netseed", description="Network seeding-policy pipeline")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen-sbm", "generate graph and partition files"),
        ("simulate", "roll a logged panel under the logging policy"),
        ("fit", "estimate dynamics from the panel (EMVS or MCMC)"),
        ("train", "build transitions and train the offline policy"),
        ("eval", "evaluate configured policies and render the report"),
        ("ensemble", "fit + train + eval with posterior-draw members"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--threads", type=int, default=None, help="worker processes for ensemble training")
    v = sub.add_parser("verify", help="run the oracle and invariant suites")
    v.add_argument("--fast", action="store_true", help="skip the slowest checks")
    return parser


_COMMANDS = {
    "gen-sbm": cmd_gen,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "train": cmd_train,
    "eval": cmd_eval,
    "ensemble": cmd_ensemble,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "verify":
        return cmd_verify(fast=args.fast)

    try:
        cfg = RunConfig.load(args.config)
        doc = dict(cfg.doc)
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.threads is not None:
            doc["threads"] = args.threads
        if args.out is not None:
            doc["out"] = args.out
        cfg = RunConfig.from_dict(doc, base_dir=cfg.base_dir)
        if "out" not in cfg.doc:
            raise ConfigError("no output directory: set 'out' in the config or pass --out")
        out = cfg.resolve(cfg.doc["out"])
    except (ConfigError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out.mkdir(parents=True, exist_ok=True)
    try:
        _COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
