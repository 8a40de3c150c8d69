"""Command line front end: seeded experiment runs, query-growth sweeps,
brute-force audits, and the labeling service launcher.

Reports are machine-first (JSON/CSV) and contain no timestamps, so equal
seeds give byte-identical output.
"""

from __future__ import annotations

import csv
import io
import json
import os
import statistics
import sys
from dataclasses import fields

import click
import numpy as np

from .core import make_rng
from .decompose import DecomposeConfig
from .exact import EXACT_GUARD, best_respecting, brute_force_mfast, check_eps_good
from .metrics import mfast_cost
from .oracles import Tournament, load_tournament, make_planted
from .pipeline import run_best_of, run_pipeline
from .quicksort import quicksort_rank
from .svm import (
    default_subsample_size,
    extract_permutation,
    make_features,
    objective_value,
    sample_subsampled,
    solve,
)

MODES = ("qsort-only", "decompose", "decompose+exact", "decompose+svm")


def _resolve_seed(seed: int) -> int:
    env = os.environ.get("RANK_SEED")
    return int(env) if env else seed


def _build_config(eps: float, overrides: str | None) -> DecomposeConfig:
    kwargs = {"eps": eps}
    if overrides:
        data = json.loads(overrides)
        valid = {f.name for f in fields(DecomposeConfig)}
        for key, value in data.items():
            if key not in valid:
                raise click.BadParameter(f"unknown config key {key!r}")
            kwargs[key] = value
    return DecomposeConfig(**kwargs)


def _make_oracle(oracle: str, n: int, noise: float, seed: int):
    """Returns (oracle, planted order or None, n)."""
    if oracle == "planted":
        t, sigma = make_planted(n, noise, seed)
        return t, sigma, n
    path = oracle[len("file:"):] if oracle.startswith("file:") else oracle
    t = load_tournament(path)
    return t, None, t.n


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


@click.group()
def main() -> None:
    """Rank items from adaptively sampled pairwise preference labels."""


@main.command()
@click.option("--n", default=50, type=int, help="Instance size (planted oracle).")
@click.option("--eps", default=0.3, type=float)
@click.option("--noise", default=0.2, type=float, help="Planted flip probability.")
@click.option("--seed", default=0, type=int)
@click.option("--mode", default="decompose", type=click.Choice(MODES))
@click.option("--oracle", default="planted",
              help="'planted' or a tournament file path (optionally file:PATH).")
@click.option("--restarts", default=5, type=int,
              help="Seeds run per experiment; best surrogate-cost run is reported.")
@click.option("--polish", is_flag=True,
              help="Run the improvement pass on chaos blocks after decomposing.")
@click.option("--svm-dim", default=5, type=int)
@click.option("--svm-c", default=1.0, type=float)
@click.option("--out", default=None, type=click.Path())
@click.option("--config", "config_json", default=None,
              help="JSON object overriding decomposition constants.")
def run(n, eps, noise, seed, mode, oracle, restarts, polish, svm_dim, svm_c,
        out, config_json):
    """One end-to-end experiment; JSON report to --out or stdout."""
    seed = _resolve_seed(seed)
    if not 0 < eps < 1:
        raise click.BadParameter("eps must lie in (0, 1)")
    if not 0 <= noise < 0.5:
        raise click.BadParameter("noise must lie in [0, 0.5)")
    src, sigma, n = _make_oracle(oracle, n, noise, seed)
    config = _build_config(eps, config_json)

    report = {
        "n": n, "eps": eps, "noise": noise, "seed": seed, "mode": mode,
        "restarts": restarts, "polish": polish,
        "config": {f.name: getattr(config, f.name) for f in fields(DecomposeConfig)},
    }

    if mode == "qsort-only":
        from .core import QueryLedger

        ledger = QueryLedger()
        perm = quicksort_rank(range(n), src, make_rng(seed), ledger)
        report["permutation"] = list(perm.order)
        report["ledger"] = ledger.snapshot()
        report["costs"] = {"final": mfast_cost(perm, src)}
        if sigma is not None:
            report["costs"]["planted"] = mfast_cost(sigma, src)
        _emit(report, out)
        return

    seeds = [seed + i for i in range(max(1, restarts))]
    best, all_runs = run_best_of(src, n, eps, seeds, config=config, polish=polish)
    report["decomposition"] = {
        "blocks": [sorted(b) for b in best.decomposition.blocks],
        "flags": best.flags,
    }
    report["permutation"] = list(best.permutation.order)
    report["ledger"] = best.ledger.snapshot()
    report["guard_tripped"] = best.guard_tripped
    report["total_moves"] = best.total_moves
    report["per_seed"] = [
        {"seed": s, "surrogate_cost": r.surrogate_cost,
         "queries": r.ledger.total, "stage": r.stage_reached}
        for s, r in zip(seeds, all_runs)
    ]
    # Verification-only cost readouts (do not consume ledger queries).
    costs = {"final": mfast_cost(best.permutation, src)}
    if sigma is not None:
        costs["planted"] = mfast_cost(sigma, src)
        if costs["planted"] > 0:
            costs["ratio_vs_planted"] = costs["final"] / costs["planted"]
    report["costs"] = costs

    if mode == "decompose+exact":
        if n > EXACT_GUARD:
            raise click.ClickException(
                f"decompose+exact needs n <= {EXACT_GUARD}, got {n}")
        _, respecting = best_respecting(best.decomposition, src)
        _, global_opt = brute_force_mfast(src)
        report["exact"] = {
            "respecting_opt": respecting,
            "global_opt": global_opt,
            "ratio": respecting / global_opt if global_opt else None,
            "eps_good": check_eps_good(best.decomposition, src, eps).__dict__,
        }

    if mode == "decompose+svm":
        if sigma is None:
            raise click.ClickException("decompose+svm needs the planted oracle")
        feat = make_features(sigma, svm_dim, seed)
        m = default_subsample_size(eps, svm_c, svm_dim)
        cs = sample_subsampled(best.decomposition, src, m, make_rng(seed + 999))
        res = solve(cs, feat, svm_c, iterations=300)
        svm_perm = extract_permutation(res.w, feat)
        report["svm"] = {
            "dim": svm_dim, "c": svm_c, "subsample_size": m,
            "objective": res.objective,
            "objective_at_zero": objective_value(cs, np.zeros(svm_dim), feat),
            "cost_of_extracted": mfast_cost(svm_perm, src),
        }

    _emit(report, out)


@main.command()
@click.option("--n-list", default="128,256,512,1024",
              help="Comma-separated ascending instance sizes.")
@click.option("--eps", default=0.3, type=float)
@click.option("--noise", default=0.2, type=float)
@click.option("--seeds", default=5, type=int, help="Seeds per size.")
@click.option("--seed", default=0, type=int, help="Base seed.")
@click.option("--out", default=None, type=click.Path())
@click.option("--config", "config_json", default=None)
def sweep(n_list, eps, noise, seeds, seed, out, config_json):
    """Query-growth sweep; CSV rows per (n, seed) plus doubling-ratio rows.

    Phase attribution: qsort and smallblock are exact; everything else
    (cost estimates and improvement sampling) is reported under
    ensemble_queries so the three columns sum to the total.
    """
    sizes = [int(x) for x in n_list.split(",") if x.strip()]
    if sizes != sorted(sizes):
        raise click.BadParameter("--n-list must be ascending")
    seed = _resolve_seed(seed)
    config = _build_config(eps, config_json)

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["n", "seed", "total_queries", "qsort_queries",
                     "ensemble_queries", "smallblock_queries"])
    medians = {}
    for n in sizes:
        totals = []
        for k in range(seeds):
            s = seed + k
            t, _ = make_planted(n, noise, s)
            res = run_pipeline(t, n, eps, s, config=config)
            snap = res.ledger.snapshot()
            qsort = snap["per_phase"].get("qsort", 0)
            small = snap["per_phase"].get("smallblock", 0)
            ensemble = snap["total"] - qsort - small
            writer.writerow([n, s, snap["total"], qsort, ensemble, small])
            totals.append(snap["total"])
        medians[n] = statistics.median(totals)
    for prev, cur in zip(sizes, sizes[1:]):
        if cur == 2 * prev and medians[prev] > 0:
            writer.writerow([f"ratio_{prev}_to_{cur}", "",
                             round(medians[cur] / medians[prev], 4), "", "", ""])
    text = buf.getvalue()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--n", default=10, type=int)
@click.option("--eps", default=0.3, type=float)
@click.option("--noise", default=0.3, type=float)
@click.option("--seeds", default=20, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--restarts", default=5, type=int)
@click.option("--out", default=None, type=click.Path())
@click.option("--config", "config_json", default=None)
def audit(n, eps, noise, seeds, seed, restarts, out, config_json):
    """Brute-force goodness audit over many planted seeds (n <= exact guard)."""
    if n > EXACT_GUARD:
        raise click.ClickException(f"audit needs n <= {EXACT_GUARD}")
    seed = _resolve_seed(seed)
    config = _build_config(eps, config_json)
    rows = []
    approx_ok = 0
    chaos_ok = 0
    for k in range(seeds):
        s = seed + k
        t, _ = make_planted(n, noise, s)
        best, _ = run_best_of(t, n, eps, [s * 1000 + i for i in range(restarts)],
                              config=config)
        rep = check_eps_good(best.decomposition, t, eps)
        approx_ok += rep.approx_opt_holds
        chaos_ok += rep.local_chaos_holds
        rows.append({
            "seed": s,
            "blocks": [sorted(b) for b in best.decomposition.blocks],
            "respecting_opt": rep.respecting_opt,
            "global_opt": rep.global_opt,
            "local_chaos_holds": rep.local_chaos_holds,
            "approx_opt_holds": rep.approx_opt_holds,
        })
    report = {
        "n": n, "eps": eps, "noise": noise, "seeds": seeds,
        "approx_opt_fraction": approx_ok / seeds,
        "local_chaos_fraction": chaos_ok / seeds,
        "per_seed": rows,
    }
    _emit(report, out)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--data-dir", default="./rank-sessions", type=click.Path())
def serve(host, port, data_dir):
    """Start the live labeling service (HTTP+JSON plus the browser client)."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir), host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
