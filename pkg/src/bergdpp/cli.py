"""Command-line interface: reproducible JSON/CSV reports over the library.

Subcommands: sample, stats, scaling, converge, energy, check.  Every report
embeds a "schema" tag, the tool version, and the fully resolved configuration,
and contains no timestamps, so a fixed seed with a single worker reproduces
output files byte for byte.  Exit codes: 0 success, 2 validation error
(bad flags, bad expressions, bad config), 3 numerical failure (degenerate
Gram, sampler stall, loss of positivity).

The seed for stochastic subcommands comes from --seed or, failing that, the
BERGDPP_SEED environment variable.  Replicate-level parallelism (--workers)
keys every replicate's RNG stream by its index, so worker count does not
change the output.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .energy import (
    GramPath,
    PositivityError,
    lambda_report,
    partition_function,
)
from .exprs import ParseError, WeightExpr, parse_weight
from .kernel import default_test_points, scaling_errors
from .quadrature import GramDegenerateError, build_grid, gram, gram_to_csv
from .sampler import (
    Configuration,
    McmcConfig,
    RejectionStallError,
    configuration_from_json,
    sample_dpp,
    sample_weighted,
)
from .spaces import ModelSpace, make_fubini_study, make_ginibre, make_product, space_to_config
from .stats import (
    circular_law_distance,
    estimate_intensity,
    measure_convergence,
    pair_count_stats,
    parse_region,
    region_count_stats,
)

SCHEMA_TAG = "bergdpp"


class CliError(ValueError):
    """Configuration problem reported with exit code 2."""


# ---------------------------------------------------------------------------
# helpers


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        vals = [int(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise CliError(f"{flag} expects a comma-separated integer list, got {text!r}")
    if not vals:
        raise CliError(f"{flag} is empty")
    return vals


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        vals = [float(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise CliError(f"{flag} expects a comma-separated number list, got {text!r}")
    if not vals:
        raise CliError(f"{flag} is empty")
    return vals


def _space_from_args(args, k: int | None = None) -> ModelSpace:
    kind = args.space
    if kind == "fs":
        kk = k if k is not None else args.k
        if kk is None:
            raise CliError("--k is required for --space fs")
        return make_fubini_study(int(kk))
    if kind == "ginibre":
        if args.n is None:
            raise CliError("--n is required for --space ginibre")
        return make_ginibre(int(args.n))
    if kind == "product":
        if args.mults is None:
            raise CliError("--mults is required for --space product")
        kk = k if k is not None else args.k
        if kk is None:
            raise CliError("--k is required for --space product")
        mults = _parse_int_list(args.mults, "--mults")
        return make_product(tuple(mults), int(kk))
    raise CliError(f"unknown space kind {kind!r}")


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("BERGDPP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"BERGDPP_SEED must be an integer, got {env!r}")
    raise CliError("a seed is required: pass --seed or set BERGDPP_SEED")


def _maybe_weight(text: str | None) -> WeightExpr | None:
    return None if text is None else parse_weight(text)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _emit_json(payload: dict, out: str | None) -> None:
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", out)


def _report(schema: str, config: dict, body: dict) -> dict:
    payload = {
        "schema": f"{SCHEMA_TAG}.{schema}/1",
        "version": __version__,
        "config": config,
    }
    payload.update(body)
    return payload


def _csv_text(schema: str, config: dict, header: list[str], rows: list[list]) -> str:
    import io

    buf = io.StringIO()
    cfg = json.dumps(config, sort_keys=True, separators=(",", ":"))
    buf.write(f"# schema={SCHEMA_TAG}.{schema}/1 version={__version__} config={cfg}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _load_samples(path: str) -> tuple[dict, list[Configuration]]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "configurations" not in data or "space" not in data:
        raise CliError(f"{path} is not a samples file (missing configurations/space)")
    space_cfg = data["space"]
    dim = len(space_cfg.get("multiplicities", [1])) if space_cfg.get("kind") == "product" else 1
    confs = [
        configuration_from_json(entry, dim, seed=data.get("seed"))
        for entry in data["configurations"]
    ]
    return data, confs


def _sample_one(space: ModelSpace, seed: int, stream: tuple[int, ...]) -> Configuration:
    return sample_dpp(space, seed=seed, stream=stream)


def _sample_batch(space, reps, seed, stream_base, workers):
    if workers <= 1:
        return [_sample_one(space, seed, stream_base + (r,)) for r in range(reps)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_sample_one, space, seed, stream_base + (r,)) for r in range(reps)
        ]
        return [f.result() for f in futures]


def _points_from_file(path: str, dim: int) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    rows = data["points"] if isinstance(data, dict) else data
    pts = np.zeros((len(rows), dim), dtype=complex)
    for i, row in enumerate(rows):
        if len(row) != 2 * dim:
            raise CliError(
                f"point row {i} has {len(row)} numbers, expected {2 * dim} (re/im per factor)"
            )
        for j in range(dim):
            pts[i, j] = float(row[2 * j]) + 1j * float(row[2 * j + 1])
    return pts


# ---------------------------------------------------------------------------
# subcommands


def _cmd_sample(args) -> int:
    space = _space_from_args(args)
    seed = _resolve_seed(args)
    config = {
        "command": "sample",
        "space": space_to_config(space),
        "seed": seed,
    }
    if args.mcmc_steps is not None:
        mcmc = McmcConfig(
            steps=args.mcmc_steps,
            burn_in=args.burn_in,
            thin=args.thin,
            proposal_scale=args.proposal_scale,
        )
        psi = _maybe_weight(args.weight_expr)
        psi_prime = _maybe_weight(args.weight_k_expr)
        for expr in (psi, psi_prime):
            if expr is not None:
                expr.validate_for_dim(space.dim)
        config.update(
            {
                "mcmc_steps": mcmc.steps,
                "burn_in": mcmc.burn_in,
                "thin": mcmc.thin,
                "proposal_scale": mcmc.proposal_scale,
                "weight_expr": args.weight_expr,
                "weight_k_expr": args.weight_k_expr,
            }
        )
        run = sample_weighted(space, mcmc, psi=psi, psi_prime=psi_prime, seed=seed)
        body = {
            "space": space_to_config(space),
            "seed": seed,
            "acceptance_rate": run.acceptance_rate,
            "warnings": run.warnings,
            "configurations": [c.to_json_dict() for c in run.configurations],
        }
        _emit_json(_report("samples", config, body), args.out)
        return 0

    if args.weight_expr is not None or args.weight_k_expr is not None:
        raise CliError(
            "weighted processes are sampled by MCMC; add --mcmc-steps "
            "(the exact sampler covers only the unweighted projection process)"
        )
    if args.reps < 1:
        raise CliError("--reps must be at least 1")
    config["reps"] = args.reps
    confs = _sample_batch(space, args.reps, seed, (), args.workers)
    body = {
        "space": space_to_config(space),
        "seed": seed,
        "configurations": [c.to_json_dict() for c in confs],
    }
    _emit_json(_report("samples", config, body), args.out)
    return 0


def _stats_inputs(args) -> tuple[ModelSpace, list[Configuration], dict]:
    if args.samples is not None:
        data, confs = _load_samples(args.samples)
        from .spaces import space_from_config

        space = space_from_config(data["space"])
        src = {"samples": args.samples}
    else:
        space = _space_from_args(args)
        seed = _resolve_seed(args)
        if args.reps < 1:
            raise CliError("--reps must be at least 1")
        confs = _sample_batch(space, args.reps, seed, (), args.workers)
        src = {"space": space_to_config(space), "seed": seed, "reps": args.reps}
    return space, confs, src


def _cmd_stats(args) -> int:
    space, confs, src = _stats_inputs(args)
    if args.stats_command == "intensity":
        cells = estimate_intensity(space, confs, bins=args.bins, extent=args.extent)
        config = {
            "command": "stats intensity",
            "bins": args.bins,
            "extent": args.extent,
            **src,
        }
        rows = [
            [c.center_re, c.center_im, c.rate, c.stderr, c.prediction] for c in cells
        ]
        text = _csv_text(
            "intensity",
            config,
            ["bin_center_re", "bin_center_im", "rate", "stderr", "prediction"],
            rows,
        )
        _emit(text, args.out)
        return 0

    if args.stats_command == "counts":
        regions = [parse_region(r, space.dim) for r in args.region]
        if not regions:
            raise CliError("at least one --region is required")
        config = {"command": "stats counts", "regions": args.region, **src}
        counts = [
            region_count_stats(space, confs, reg).to_json_dict() for reg in regions
        ]
        pairs = (
            [p.to_json_dict() for p in pair_count_stats(space, confs, regions)]
            if len(regions) > 1
            else []
        )
        body = {"counts": counts, "pairs": pairs}
        _emit_json(_report("counts", config, body), args.out)
        return 0

    if args.stats_command == "circular":
        report = circular_law_distance(space, confs)
        config = {"command": "stats circular", **src}
        _emit_json(_report("circular", config, report.to_json_dict()), args.out)
        return 0

    raise CliError(f"unknown stats subcommand {args.stats_command!r}")


def _cmd_scaling(args) -> int:
    if args.space == "ginibre":
        raise CliError(
            "scaling reports cover the fs and product families; "
            "the ginibre rank limit has no k parameter"
        )
    ks = _parse_int_list(args.ks, "--ks")

    def factory(k: int) -> ModelSpace:
        return _space_from_args(args, k=k)

    dim = factory(ks[0]).dim
    points = None
    if args.points is not None:
        points = _points_from_file(args.points, dim)
    rows = scaling_errors(factory, ks, points=points)
    config = {
        "command": "scaling",
        "space": args.space,
        "mults": args.mults,
        "ks": ks,
        "points": args.points,
    }
    _emit_json(_report("scaling", config, {"rows": rows}), args.out)
    return 0


def _cmd_converge(args) -> int:
    ks = _parse_int_list(args.ks, "--ks")
    seed = _resolve_seed(args)
    spaces_by_k = [(k, _space_from_args(args, k=k)) for k in ks]
    region = parse_region(args.region, spaces_by_k[0][1].dim)

    def sample_fn(space, reps, s, k_index):
        return _sample_batch(space, reps, s, (k_index,), args.workers)

    report = measure_convergence(spaces_by_k, region, args.reps, seed, sample_fn=sample_fn)
    config = {
        "command": "converge",
        "space": args.space,
        "mults": args.mults,
        "ks": ks,
        "region": args.region,
        "reps": args.reps,
        "seed": seed,
    }
    _emit_json(_report("converge", config, report.to_json_dict()), args.out)
    return 0


def _cmd_energy(args) -> int:
    if args.energy_command == "cgf":
        space = _space_from_args(args)
        psi = parse_weight(args.weight_expr)
        psi.validate_for_dim(space.dim)
        ts = _parse_float_list(args.t, "--t")
        path = GramPath(space, psi)
        rows = []
        for t in ts:
            chk = path.derivative_check(t)
            chk["cgf"] = path.cgf(t)
            rows.append(chk)
        config = {
            "command": "energy cgf",
            "space": space_to_config(space),
            "weight_expr": args.weight_expr,
            "t": ts,
        }
        _emit_json(_report("energy-cgf", config, {"rows": rows}), args.out)
        return 0

    if args.energy_command == "lambda-k":
        if args.space == "ginibre":
            raise CliError("lambda-k reports cover the fs and product families")
        ks = _parse_int_list(args.ks, "--ks")
        f = parse_weight(args.f_expr)
        psi = _maybe_weight(args.psi_expr)
        psi_prime = _maybe_weight(args.psi_k_expr)
        spaces_by_k = [(k, _space_from_args(args, k=k)) for k in ks]
        for expr in (f, psi, psi_prime):
            if expr is not None:
                expr.validate_for_dim(spaces_by_k[0][1].dim)
        report = lambda_report(
            spaces_by_k, f, psi=psi, psi_prime=psi_prime, s_nodes=args.s_nodes
        )
        config = {
            "command": "energy lambda-k",
            "space": args.space,
            "mults": args.mults,
            "ks": ks,
            "f_expr": args.f_expr,
            "psi_expr": args.psi_expr,
            "psi_k_expr": args.psi_k_expr,
            "s_nodes": args.s_nodes,
        }
        _emit_json(_report("energy-lambda", config, report.to_json_dict()), args.out)
        return 0

    raise CliError(f"unknown energy subcommand {args.energy_command!r}")


def _cmd_check(args) -> int:
    space = _space_from_args(args)
    grid = build_grid(
        space,
        radial=args.radial,
        angular=args.angular,
        truncation=args.truncation,
    )

    if args.check_command == "partition":
        psi = _maybe_weight(args.weight_expr)
        pv = partition_function(space, psi=psi, grid=grid)
        n_fact = math.factorial(space.rank)
        print(f"Z = {pv.value:.10g}")
        if psi is None:
            rel = abs(pv.value - n_fact) / n_fact
            print(f"N! = {n_fact} (relative error {rel:.3e})")
            if rel > 1e-8:
                return 3
        return 0

    if args.check_command == "gram":
        g = gram(space, grid, psi=_maybe_weight(args.weight_expr))
        err = float(np.max(np.abs(g.matrix - np.eye(space.rank))))
        print(f"max |G - I| = {err:.3e}")
        if args.gram_csv is not None:
            gram_to_csv(g, args.gram_csv)
            print(f"gram written to {args.gram_csv}")
        if args.weight_expr is None and err > 1e-8:
            return 3
        return 0

    if args.check_command == "trace":
        V = space.section_matrix(grid.nodes)
        bdiag = np.einsum("mi,mi->m", V, V.conj()).real
        tr = float(np.sum(grid.weights * grid.density * bdiag))
        err = abs(tr - space.rank)
        print(f"trace = {tr:.12g} (rank {space.rank}, error {err:.3e})")
        return 0 if err < 1e-8 else 3

    raise CliError(f"unknown check subcommand {args.check_command!r}")


# ---------------------------------------------------------------------------
# parser


def _add_space_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--space", required=True, choices=["fs", "ginibre", "product"])
    p.add_argument("--k", type=int, default=None, help="power for fs/product spaces")
    p.add_argument("--n", "--N", dest="n", type=int, default=None, help="ginibre rank")
    p.add_argument("--mults", default=None, help="product multiplicities, e.g. 1,2")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--radial", type=int, default=None, help="radial nodes per panel")
    p.add_argument("--angular", type=int, default=None, help="angular nodes per factor")
    p.add_argument("--truncation", type=float, default=None, help="outer radius (ginibre)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bergdpp",
        description="Determinantal point processes from finite-rank reproducing kernels",
    )
    parser.add_argument("--version", action="version", version=f"bergdpp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw exact DPP or weighted MCMC samples")
    _add_space_flags(p)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--weight-expr", default=None, help="extra weight psi")
    p.add_argument("--weight-k-expr", default=None, help="k-scaled weight psi'")
    p.add_argument("--mcmc-steps", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--proposal-scale", type=float, default=0.5)
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("stats", help="statistics of sampled configurations")
    stats_sub = p.add_subparsers(dest="stats_command", required=True)
    for name in ("intensity", "counts", "circular"):
        q = stats_sub.add_parser(name)
        _add_space_flags(q)
        q.add_argument("--samples", default=None, help="samples JSON from `bergdpp sample`")
        q.add_argument("--reps", type=int, default=200)
        q.add_argument("--seed", type=int, default=None)
        q.add_argument("--workers", type=int, default=1)
        q.add_argument("--out", default=None)
        if name == "intensity":
            q.add_argument("--bins", type=int, default=40)
            q.add_argument("--extent", type=float, default=None)
        if name == "counts":
            q.add_argument("--region", action="append", default=[])
        q.set_defaults(fn=_cmd_stats)

    p = sub.add_parser("scaling", help="rescaled correlations against the limit kernel")
    _add_space_flags(p)
    p.add_argument("--ks", required=True, help="comma-separated powers")
    p.add_argument("--points", default=None, help="JSON test points file")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_scaling)

    p = sub.add_parser("converge", help="empirical-measure convergence report")
    _add_space_flags(p)
    p.add_argument("--ks", required=True)
    p.add_argument("--region", default="disk:1.0")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_converge)

    p = sub.add_parser("energy", help="partition/CGF/Mabuchi functionals")
    energy_sub = p.add_subparsers(dest="energy_command", required=True)
    q = energy_sub.add_parser("cgf")
    _add_space_flags(q)
    q.add_argument("--weight-expr", required=True)
    q.add_argument("--t", default="0,0.5")
    q.add_argument("--out", default=None)
    q.set_defaults(fn=_cmd_energy)
    q = energy_sub.add_parser("lambda-k")
    _add_space_flags(q)
    q.add_argument("--ks", required=True)
    q.add_argument("--f-expr", required=True)
    q.add_argument("--psi-expr", default=None)
    q.add_argument("--psi-k-expr", default=None)
    q.add_argument("--s-nodes", type=int, default=24)
    q.add_argument("--out", default=None)
    q.set_defaults(fn=_cmd_energy)

    p = sub.add_parser("check", help="deterministic identity checks")
    check_sub = p.add_subparsers(dest="check_command", required=True)
    for name in ("partition", "gram", "trace"):
        q = check_sub.add_parser(name)
        _add_space_flags(q)
        _add_grid_flags(q)
        q.add_argument("--weight-expr", default=None)
        if name == "gram":
            q.add_argument("--gram-csv", default=None)
        q.set_defaults(fn=_cmd_check)

    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (CliError, ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GramDegenerateError, PositivityError, RejectionStallError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
