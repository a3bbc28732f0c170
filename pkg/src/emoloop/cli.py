"""Operator command line: data synthesis, pretraining, simulation sweeps, serving.

Every command that produces an artifact records the seed and input references
in a provenance block, because the whole loop is sensitive to the initial
random draw; a recorded run can always be reproduced or replayed exactly.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from .active_loop import LoopConfig, finalize
from .analysis import build_report, render_report
from .committee import load_committee, pretrain, save_committee
from .core import ValidationError
from .events import SessionLog, committee_hash, pool_hash, replay_session
from .features import ParseError, build_feature_cache, load_pool, swap_pool_types
from .gbt import TrainParams
from .sim_oracle import get_profile
from .simulate import run_simulation
from .synth import load_av_csv, make_pool_dir, make_pretraining_records, save_av_csv

USER_ERRORS = (ValidationError, ParseError, FileNotFoundError, json.JSONDecodeError)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Personalized music-emotion annotation loop and bias audit."""


# -- synth -----------------------------------------------------------------


@main.group()
def synth():
    """Generate synthetic pools and pretraining datasets."""


@synth.command("pool")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--per-type", default=50, show_default=True)
@click.option("--descriptors", default=8, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth_pool(out_dir, per_type, descriptors, seed):
    """Write a pool directory of descriptor CSVs with a type-separable signature."""
    try:
        make_pool_dir(out_dir, n_per_type=per_type, n_descriptors=descriptors, seed=seed)
    except USER_ERRORS as e:
        _fail(str(e))
    click.echo(f"pool with {2 * per_type} excerpts at {out_dir}")


@synth.command("dataset")
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--rows", default=240, show_default=True)
@click.option("--descriptors", default=8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--midpoint", default=5.0, show_default=True)
def synth_dataset(out_csv, rows, descriptors, seed, midpoint):
    """Write a rated pretraining CSV in the same feature space as the pools."""
    try:
        records = make_pretraining_records(
            n=rows, n_descriptors=descriptors, seed=seed, midpoint=midpoint
        )
        save_av_csv(records, out_csv)
    except USER_ERRORS as e:
        _fail(str(e))
    click.echo(f"{rows} rated rows at {out_csv}")


# -- features ---------------------------------------------------------------


@main.group()
def features():
    """Feature pipeline utilities."""


@features.command("build")
@click.option("--pool", "pool_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def features_build(pool_dir, out_dir):
    """Aggregate descriptor CSVs into a per-excerpt feature cache."""
    try:
        n = build_feature_cache(pool_dir, out_dir)
    except USER_ERRORS as e:
        _fail(str(e))
    click.echo(f"cached {n} feature vectors at {out_dir}")


# -- pretrain ----------------------------------------------------------------


@main.command()
@click.option("--dataset", "dataset_csv", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--members", default=15, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--midpoint", default=5.0, show_default=True)
@click.option("--rounds", default=50, show_default=True)
@click.option("--learning-rate", default=0.1, show_default=True)
@click.option("--max-depth", default=3, show_default=True)
@click.option("--min-child-weight", default=1.0, show_default=True)
@click.option("--lambda-l2", default=1.0, show_default=True)
def pretrain_cmd(
    dataset_csv, out_dir, members, seed, midpoint,
    rounds, learning_rate, max_depth, min_child_weight, lambda_l2,
):
    """Pretrain a committee on cross-validation splits of a rated dataset."""
    try:
        records = load_av_csv(dataset_csv)
        params = TrainParams(
            rounds=rounds,
            learning_rate=learning_rate,
            max_depth=max_depth,
            min_child_weight=min_child_weight,
            lambda_l2=lambda_l2,
        )
        committee = pretrain(
            records,
            params=params,
            k=members,
            seed=seed,
            midpoint=midpoint,
            dataset_id=Path(dataset_csv).name,
        )
        save_committee(committee, out_dir)
    except USER_ERRORS as e:
        _fail(str(e))
    click.echo(f"committee of {members} members at {out_dir}")


# -- simulate / sweep ---------------------------------------------------------


def _loop_config(seed, batch_size, max_iterations, initial_per_type, w_user):
    return LoopConfig(
        batch_size=batch_size,
        max_iterations=max_iterations,
        initial_per_type=initial_per_type,
        seed=seed,
        w_user=w_user,
    )


def _simulate_once(
    pool_dir, committee_dir, oracle, seed, top_k,
    batch_size, max_iterations, initial_per_type, w_user,
    swap_types=False, session_dir=None,
):
    pool = load_pool(pool_dir)
    if swap_types:
        pool = swap_pool_types(pool)
    committee = load_committee(committee_dir)
    profile = get_profile(oracle, seed=seed)
    config = _loop_config(seed, batch_size, max_iterations, initial_per_type, w_user)
    result = run_simulation(
        pool,
        committee,
        profile,
        config,
        top_k=top_k,
        session_dir=session_dir,
        pool_ref={"path": str(pool_dir), "swap_types": swap_types},
        committee_ref={"path": str(committee_dir)},
    )
    payload = {
        "report": result.report.to_json_dict(),
        "provenance": {
            "seed": seed,
            "oracle": profile.to_json_dict(),
            "swap_types": swap_types,
            "pool": {"path": str(pool_dir), "content_hash": pool_hash(pool)},
            "committee": {
                "path": str(committee_dir),
                "content_hash": committee_hash(committee),
            },
            "config": config.to_json_dict(),
            "top_k": top_k,
        },
    }
    return payload


sim_options = [
    click.option("--pool", "pool_dir", required=True, type=click.Path(exists=True)),
    click.option("--committee", "committee_dir", required=True, type=click.Path(exists=True)),
    click.option("--oracle", default="left", show_default=True,
                 help="left | right | center | path to a profile JSON"),
    click.option("--top-k", default=10, show_default=True),
    click.option("--batch-size", default=10, show_default=True),
    click.option("--max-iterations", default=3, show_default=True),
    click.option("--initial-per-type", default=5, show_default=True),
    click.option("--w-user", default=10.0, show_default=True),
    click.option("--swap-types", is_flag=True, help="run on the type-swapped pool (mirror harness)"),
]


def add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


@main.command()
@add_options(sim_options)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_json", required=True, type=click.Path())
@click.option("--session-dir", type=click.Path(), default=None,
              help="persist the session event log for replay")
def simulate(pool_dir, committee_dir, oracle, top_k, batch_size, max_iterations,
             initial_per_type, w_user, swap_types, seed, out_json, session_dir):
    """Run the full annotation loop with a simulated oracle and write the audit."""
    try:
        payload = _simulate_once(
            pool_dir, committee_dir, oracle, seed, top_k,
            batch_size, max_iterations, initial_per_type, w_user,
            swap_types=swap_types, session_dir=session_dir,
        )
    except USER_ERRORS as e:
        _fail(str(e))
    Path(out_json).parent.mkdir(parents=True, exist_ok=True)
    Path(out_json).write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
    share = payload["report"]["share"]
    click.echo(
        f"seed {seed} oracle {oracle}: top-{payload['report']['top_k']} share "
        f"TypeA {share['TypeA']:.0%} / TypeB {share['TypeB']:.0%} -> {out_json}"
    )


def _parse_seeds(spec: str) -> list[int]:
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in spec.split(",") if s != ""]


def _sweep_worker(kwargs):
    return kwargs["seed"], _simulate_once(**kwargs)


@main.command()
@add_options(sim_options)
@click.option("--seeds", default="0..19", show_default=True,
              help="inclusive range 'A..B' or comma list")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--jobs", default=1, show_default=True)
def sweep(pool_dir, committee_dir, oracle, top_k, batch_size, max_iterations,
          initial_per_type, w_user, swap_types, seeds, out_dir, jobs):
    """Repeat simulate across seeds; write per-seed reports plus an aggregate."""
    try:
        seed_list = _parse_seeds(seeds)
    except ValueError:
        return _fail(f"cannot parse --seeds {seeds!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        dict(
            pool_dir=pool_dir, committee_dir=committee_dir, oracle=oracle,
            seed=seed, top_k=top_k, batch_size=batch_size,
            max_iterations=max_iterations, initial_per_type=initial_per_type,
            w_user=w_user, swap_types=swap_types,
        )
        for seed in seed_list
    ]
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = dict(pool.map(_sweep_worker, tasks))
        else:
            results = dict(_sweep_worker(task) for task in tasks)
    except USER_ERRORS as e:
        return _fail(str(e))

    shares_b = []
    per_seed = []
    for seed in seed_list:
        payload = results[seed]
        (out_dir / f"report_seed{seed}.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8"
        )
        report = payload["report"]
        shares_b.append(report["share"]["TypeB"])
        per_seed.append(
            {
                "seed": seed,
                "counts": report["counts"],
                "share": report["share"],
                "mean_q2": report["mean_q2"],
            }
        )
    aggregate = {
        "seeds": seed_list,
        "oracle": oracle,
        "swap_types": swap_types,
        "top_k": top_k,
        "type_b_share": {
            "mean": sum(shares_b) / len(shares_b),
            "min": min(shares_b),
            "max": max(shares_b),
        },
        "per_seed": per_seed,
    }
    (out_dir / "aggregate.json").write_text(
        json.dumps(aggregate, sort_keys=True, indent=2), encoding="utf-8"
    )
    click.echo(
        f"{len(seed_list)} runs: mean TypeB share "
        f"{aggregate['type_b_share']['mean']:.0%} -> {out_dir}/aggregate.json"
    )


# -- serve / report -----------------------------------------------------------


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
def serve(config_file):
    """Run the HTTP annotation service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    try:
        config = ServiceConfig.from_file(config_file)
        app = create_app(config)
    except USER_ERRORS as e:
        return _fail(str(e))
    uvicorn.run(app, host="0.0.0.0", port=config.port)


@main.command()
@click.option("--session", "session_dir", required=True, type=click.Path(exists=True))
@click.option("--pool", "pool_dir", type=click.Path(exists=True), default=None,
              help="defaults to the pool path recorded in the session log")
@click.option("--committee", "committee_dir", type=click.Path(exists=True), default=None)
@click.option("--top-k", default=10, show_default=True)
@click.option("--format", "fmt", default="text", show_default=True,
              type=click.Choice(["text", "json", "csv"]))
def report(session_dir, pool_dir, committee_dir, top_k, fmt):
    """Re-render a bias report from a persisted session by exact replay."""
    log = SessionLog(Path(session_dir))
    try:
        events = log.read()
        if not events:
            return _fail(f"no events in {session_dir}")
        created = events[0]
        pool_dir = pool_dir or created["pool_ref"].get("path")
        committee_dir = committee_dir or created["committee_ref"].get("path")
        if not pool_dir or not committee_dir:
            return _fail("session log records no pool/committee paths; pass --pool/--committee")
        pool = load_pool(pool_dir)
        if created["pool_ref"].get("swap_types"):
            pool = swap_pool_types(pool)
        committee = load_committee(committee_dir)
        session = replay_session(log, pool, committee)
        bias = build_report(finalize(session), top_k=top_k)
    except USER_ERRORS as e:
        return _fail(str(e))
    click.echo(render_report(bias, fmt))


if __name__ == "__main__":
    main()
