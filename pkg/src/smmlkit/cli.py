"""Configuration-driven command line.

Subcommands: solve | sweep-k | decompose | voronoi | asymptotics.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.

Tables are CSV by default ('--format json' wraps the same rows in a JSON
document); the codebook and the asymptotics summary are always JSON.  A PNG
view of each artifact is rendered unless [output] figures is off.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from ._version import __version__
from .asymptotics import ExperimentConfig, _region_theta, run_asymptotics
from .codebook import assignment_costs, decompose
from .config import RunConfig, load_run_config
from .errors import ConfigError, DomainError, SmmlError
from .geometry import (
    FisherMetric,
    WeightedVoronoi,
    jeffreys_mesh,
    tessellation_summary,
)
from .models import (
    binomial_model,
    marginal_table,
    multinomial_model,
    truncated_poisson_model,
)
from .partition_opt import dp_exact_1d, lloyd_multistart, resync_codebook
from .serialize import (
    LN2,
    artifact_meta,
    codebook_document,
    config_hash,
    write_json_doc,
    write_table,
)

__all__ = ["main"]


def _parse_args(argv):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="configuration file (defaults apply if omitted)")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (overrides [output] directory)")
    common.add_argument("--seed", metavar="U64", type=int,
                        help="master seed (overrides [solver] seed)")
    common.add_argument("--format", choices=("csv", "json"), dest="fmt",
                        help="table format (overrides [output] format)")

    parser = argparse.ArgumentParser(
        prog="smmlkit",
        description="strict minimum message length codebooks over "
                    "countable data spaces",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common],
                   help="optimize a codebook, write codebook JSON + trace")
    sub.add_parser("sweep-k", parents=[common],
                   help="codelength against cell count")
    sub.add_parser("decompose", parents=[common],
                   help="assertion/detail split of the solved codebook")
    sub.add_parser("voronoi", parents=[common],
                   help="weighted Fisher-Voronoi tessellation table")
    sub.add_parser("asymptotics", parents=[common],
                   help="agreement/rate/residual/remainder experiments")
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# shared build steps (failures here are configuration errors)


def _load_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        raise ConfigError("--seed must fit in an unsigned 64-bit integer")
    return cfg.with_overrides(seed=args.seed, directory=args.out, fmt=args.fmt)


def _build_model(cfg: RunConfig):
    m = cfg.model
    try:
        prior = m.prior()
        if m.family == "binomial":
            model = binomial_model(m.sample_size, param=m.param)
        elif m.family == "multinomial":
            model = multinomial_model(m.categories, m.sample_size)
        else:
            model = truncated_poisson_model(
                m.sample_size, prior, eps_trunc=m.eps_trunc
            )
    except DomainError as exc:
        raise ConfigError(str(exc))
    return model, prior, marginal_table(model, prior)


def _solve(cfg: RunConfig, model, marginal):
    s = cfg.solver
    if s.method == "dp":
        ks = (s.k,) if s.k is not None else s.k_range
        return dp_exact_1d(model, marginal, ks)
    if s.method == "lloyd":
        if s.k is None:
            raise ConfigError("[solver] k is required for method=lloyd")
        return lloyd_multistart(
            model, marginal, s.k, restarts=s.restarts, seed=s.seed
        )
    raise ConfigError(f"[solver] method={s.method} has no solve path")


def _mesh_codebook(cfg: RunConfig, model, marginal):
    metric = FisherMetric.from_model(model)
    region = _region_theta(model, cfg.experiment.region)
    mesh = jeffreys_mesh(
        metric, region, model.sample_size, cfg.solver.mesh_constant
    )
    return resync_codebook(model, marginal, mesh.codepoints, max_rounds=1)


def _out_dir(cfg: RunConfig) -> str:
    path = cfg.output.directory
    os.makedirs(path, exist_ok=True)
    return path


def _emit_table(cfg, out, stem, header, rows, meta) -> str:
    if cfg.output.format == "json":
        path = os.path.join(out, f"{stem}.json")
        write_json_doc(path, {
            "meta": meta,
            "header": list(header),
            "rows": [
                [
                    (float(c) if isinstance(c, (float, np.floating)) else
                     int(c) if isinstance(c, (bool, np.bool_, int, np.integer))
                     else c)
                    for c in row
                ]
                for row in rows
            ],
        })
    else:
        path = os.path.join(out, f"{stem}.csv")
        write_table(path, header, rows, meta)
    print(f"wrote {path}")
    return path


def _maybe_figure(cfg, render, *args) -> None:
    if not cfg.output.figures:
        return
    from . import figures

    path = args[-1]
    getattr(figures, render)(*args)
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_solve(cfg: RunConfig) -> int:
    model, prior, marginal = _build_model(cfg)
    res = _solve(cfg, model, marginal)
    out = _out_dir(cfg)
    cfg_hash = config_hash(cfg.hash_dict())

    doc = codebook_document(
        model, prior, res.codebook, res.partition, res.codelength,
        cfg_hash=cfg_hash, seed=cfg.solver.seed, method=res.method,
    )
    cb_path = os.path.join(out, "codebook.json")
    write_json_doc(cb_path, doc)
    print(f"wrote {cb_path}")

    meta = artifact_meta(cfg_hash, cfg.solver.seed, method=res.method)
    rows = [
        (sweep, k, nats, nats / LN2) for sweep, nats, k in res.trace
    ]
    _emit_table(
        cfg, out, "solve_trace",
        ("sweep", "k", "codelength_nats", "codelength_bits"), rows, meta,
    )
    _maybe_figure(
        cfg, "render_solve", marginal.space, marginal, res.codebook,
        res.partition, os.path.join(out, "solve.png"),
    )
    print(
        f"codelength {res.codelength:.12f} nats "
        f"({res.codelength / LN2:.12f} bits), k={res.k}, method={res.method}"
    )
    return 0


def _sweep_rows(cfg: RunConfig, model, marginal):
    s = cfg.solver
    if s.method == "dp":
        res = dp_exact_1d(model, marginal, s.k_range)
        return sorted(res.meta["per_k"].items())
    if s.method == "lloyd":
        rows = []
        for k in s.k_range:
            r = lloyd_multistart(
                model, marginal, k, restarts=s.restarts, seed=s.seed
            )
            rows.append((k, r.codelength))
        return rows
    raise ConfigError(f"[solver] method={s.method} has no sweep path")


def _cmd_sweep(cfg: RunConfig) -> int:
    model, _, marginal = _build_model(cfg)
    pairs = _sweep_rows(cfg, model, marginal)
    best_k = min(pairs, key=lambda kv: (kv[1], kv[0]))[0]
    out = _out_dir(cfg)
    meta = artifact_meta(
        config_hash(cfg.hash_dict()), cfg.solver.seed,
        method=cfg.solver.method, best_k=best_k,
    )
    rows = [(k, nats, nats / LN2) for k, nats in pairs]
    _emit_table(
        cfg, out, "sweep_k",
        ("k", "codelength_nats", "codelength_bits"), rows, meta,
    )
    _maybe_figure(
        cfg, "render_sweep", pairs, best_k, os.path.join(out, "sweep_k.png")
    )
    return 0


def _cmd_decompose(cfg: RunConfig) -> int:
    model, _, marginal = _build_model(cfg)
    res = _solve(cfg, model, marginal)
    assertion_total, detail_total = decompose(
        res.codebook, res.partition, marginal, model
    )
    total = assertion_total + detail_total

    q = res.codebook.assertion_probs
    costs = assignment_costs(model, marginal.space, res.codebook)
    cells = []
    for j in range(res.codebook.k):
        members = res.partition.members(j)
        qj = float(q[j])
        assertion_j = -qj * math.log(qj)
        detail_j = float(marginal.r[members] @ costs[members, j]) - assertion_j
        cells.append({
            "cell": j,
            "q": qj,
            "assertion_nats": assertion_j,
            "detail_nats": detail_j,
        })

    out = _out_dir(cfg)
    meta = artifact_meta(
        config_hash(cfg.hash_dict()), cfg.solver.seed,
        method=res.method,
        total_nats=total, total_bits=total / LN2,
        entropy_nats=assertion_total, detail_nats=detail_total,
        log_k=math.log(res.codebook.k),
    )
    rows = [
        (c["cell"], c["q"], c["assertion_nats"], c["assertion_nats"] / LN2,
         c["detail_nats"], c["detail_nats"] / LN2)
        for c in cells
    ]
    _emit_table(
        cfg, out, "decompose",
        ("cell", "q", "assertion_nats", "assertion_bits",
         "detail_nats", "detail_bits"),
        rows, meta,
    )
    _maybe_figure(
        cfg, "render_decompose", cells, os.path.join(out, "decompose.png")
    )
    print(
        f"I(P) {total:.12f} nats = entropy {assertion_total:.12f} "
        f"+ detail {detail_total:.12f}; H(q) <= log k = {math.log(res.codebook.k):.12f}"
    )
    return 0


def _cmd_voronoi(cfg: RunConfig) -> int:
    model, _, marginal = _build_model(cfg)
    if cfg.solver.method == "mesh":
        codebook, _ = _mesh_codebook(cfg, model, marginal)
    else:
        codebook = _solve(cfg, model, marginal).codebook
    metric = FisherMetric.from_model(model)
    vor = WeightedVoronoi.from_codebook(codebook, model.sample_size, metric)
    region = _region_theta(model, cfg.experiment.region)
    rows_d = tessellation_summary(vor, region)

    out = _out_dir(cfg)
    dim = codebook.codepoints.shape[1]
    header = (
        ["cell"] + [f"site_{a}" for a in range(dim)]
        + ["q", "omega", "diameter"]
    )
    rows = [
        tuple([r["cell"], *r["site"], r["q"], r["omega"], r["diameter"]])
        for r in rows_d
    ]
    meta = artifact_meta(
        config_hash(cfg.hash_dict()), cfg.solver.seed,
        method=cfg.solver.method, n=model.sample_size, k=codebook.k,
    )
    _emit_table(cfg, out, "voronoi", header, rows, meta)
    _maybe_figure(
        cfg, "render_voronoi", rows_d, dim, os.path.join(out, "voronoi.png")
    )
    return 0


def _experiment_config(cfg: RunConfig) -> ExperimentConfig:
    source = {"mesh": "jeffreys_mesh", "dp": "dp", "lloyd": "lloyd"}
    try:
        return ExperimentConfig(
            model_family=cfg.model.family,
            param=cfg.model.param,
            prior_family=cfg.model.prior_family,
            prior_params=cfg.model.prior_params,
            theta0=cfg.experiment.theta0,
            n_grid=cfg.experiment.n_grid,
            replicates=cfg.experiment.replicates,
            seed=cfg.solver.seed,
            codebook_source=source[cfg.solver.method],
            mesh_constant=cfg.solver.mesh_constant,
            region=cfg.experiment.region,
            k_range=cfg.solver.k_range,
            restarts=cfg.solver.restarts,
            exclude_clamped=cfg.experiment.exclude_clamped,
        )
    except DomainError as exc:
        raise ConfigError(str(exc))


def _cmd_asymptotics(cfg: RunConfig) -> int:
    exp = _experiment_config(cfg)
    report = run_asymptotics(exp)
    out = _out_dir(cfg)
    cfg_hash = config_hash(cfg.hash_dict())

    header = list(report.rows[0].keys())
    rows = [tuple(row[key] for key in header) for row in report.rows]
    meta = artifact_meta(cfg_hash, cfg.solver.seed,
                         source=exp.codebook_source)
    _emit_table(cfg, out, "asymptotics", header, rows, meta)

    summary = {
        "format": "smmlkit.asymptotics",
        "version": 1,
        "tool_version": __version__,
        "config_hash": cfg_hash,
        "seed": cfg.solver.seed,
        "config": cfg.hash_dict(),
        "slopes": report.slopes,
        "rows": [dict(row) for row in report.rows],
    }
    path = os.path.join(out, "asymptotics_summary.json")
    write_json_doc(path, summary)
    print(f"wrote {path}")

    _maybe_figure(
        cfg, "render_asymptotics", report, os.path.join(out, "asymptotics.png")
    )
    for name in ("err_vs_n", "mle_err_vs_n"):
        value = report.slopes.get(name)
        if value is not None:
            print(f"{name} slope {value:.4f}")
    return 0


_DISPATCH = {
    "solve": _cmd_solve,
    "sweep-k": _cmd_sweep,
    "decompose": _cmd_decompose,
    "voronoi": _cmd_voronoi,
    "asymptotics": _cmd_asymptotics,
}


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _DISPATCH[args.command](cfg)
    except (ConfigError, DomainError) as exc:
        # domain violations reaching the top trace back to config values
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SmmlError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
