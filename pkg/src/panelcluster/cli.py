"""Command-line interface: estimate, cluster, simulate."""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .io import (
    EstimateTable,
    FORMAT_VERSION,
    read_estimates,
    read_panel_csv,
    result_payload,
    write_estimates,
    write_json,
)
from .logistic import fit_logistic, logistic_covariance
from .metrics import average_match
from .quantile import (
    fit_pooled_quantile,
    fit_quantile_bundle,
    hall_sheather_bandwidth,
    hk_covariance,
    intercept_variance,
)
from .simulation import SimulationConfig, run_batch
from .spectral import build_dissimilarity, select_num_groups, spectral_cluster
from .types import EstimationError, ParseError, PER_OBSERVATION

CONFIG_FIELDS = ("model", "n", "T", "reps", "seed", "tau", "error_dist",
                 "restarts", "G_max", "methods", "select_groups",
                 "cluster_at_true_g")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="panelcluster",
        description="Group panel-data individuals by covariance-weighted "
                    "spectral clustering.")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="fit per-individual models on a "
                                          "long-format panel CSV")
    est.add_argument("panel_csv")
    est.add_argument("--model", required=True,
                     choices=["logistic", "qr-slopes", "qr-pooled"])
    est.add_argument("--tau", type=float, default=0.5)
    est.add_argument("--out", required=True)

    clu = sub.add_parser("cluster", help="cluster an estimate table")
    clu.add_argument("estimates_csv")
    group = clu.add_mutually_exclusive_group(required=True)
    group.add_argument("--groups", type=int)
    group.add_argument("--select-g", action="store_true")
    clu.add_argument("--t-periods", type=int,
                     help="common T for per_observation tables without a "
                          "weight column")
    clu.add_argument("--gmax", type=int, default=10)
    clu.add_argument("--seed", type=int, default=0)
    clu.add_argument("--truth",
                     help="CSV with columns id,label for scoring")
    clu.add_argument("--out", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo batch")
    sim.add_argument("config_file")
    sim.add_argument("--out", required=True)
    return parser


def cmd_estimate(args) -> int:
    ids, panel = read_panel_csv(args.panel_csv)
    dropped = []
    kept_ids, betas, sigmas = [], [], []
    d_T = None

    if args.model == "logistic":
        if panel.kind != "binary":
            raise ParseError("logistic model requires a binary panel")
        for i, ident in enumerate(ids):
            X = panel.design(i)
            try:
                est = fit_logistic(X, panel.responses[i])
                unc = logistic_covariance(X, est, slopes_only=True)
            except EstimationError as exc:
                dropped.append((ident, type(exc).__name__))
                continue
            kept_ids.append(ident)
            betas.append(est.slopes)
            sigmas.append(unc.sigma)
    elif args.model == "qr-slopes":
        d_T = hall_sheather_bandwidth(panel.T, args.tau)
        for i, ident in enumerate(ids):
            X = panel.design(i)
            try:
                bundle = fit_quantile_bundle(X, panel.responses[i], args.tau,
                                             d_T=d_T, individual=i)
                unc = hk_covariance(bundle, X, slopes_only=True)
            except EstimationError as exc:
                dropped.append((ident, type(exc).__name__))
                continue
            kept_ids.append(ident)
            betas.append(bundle.center.slopes)
            sigmas.append(unc.sigma)
    else:  # qr-pooled
        d_T = hall_sheather_bandwidth(panel.T, args.tau)
        y, x = panel.responses, panel.covariates
        center = fit_pooled_quantile(y, x, args.tau)
        upper = fit_pooled_quantile(y, x, args.tau + d_T)
        lower = fit_pooled_quantile(y, x, args.tau - d_T)
        for i, ident in enumerate(ids):
            unc = intercept_variance(upper.alphas[i], lower.alphas[i],
                                     args.tau, d_T, individual=i)
            kept_ids.append(ident)
            betas.append(np.array([center.alphas[i]]))
            sigmas.append(unc.sigma)

    if not kept_ids:
        raise ParseError("no individual could be estimated")
    table = EstimateTable(kept_ids, np.array(betas), sigmas,
                          scale=PER_OBSERVATION, d_T=d_T)
    write_estimates(args.out, table)
    print(f"estimated {len(kept_ids)} individuals -> {args.out}")
    for ident, reason in dropped:
        print(f"dropped {ident}: {reason}")
    return 0


def _read_truth(path, ids):
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = [h.strip() for h in rows[0]]
    if "id" not in header or "label" not in header:
        raise ParseError("truth file needs columns id,label")
    mapping = {r[header.index("id")]: int(r[header.index("label")])
               for r in rows[1:] if r}
    missing = [i for i in ids if i not in mapping]
    if missing:
        raise ParseError(f"truth file is missing ids: {missing[:5]}")
    return np.array([mapping[i] for i in ids])


def cmd_cluster(args) -> int:
    started = time.time()
    table = read_estimates(args.estimates_csv)
    n = table.n
    if args.select_g and n < 3:
        raise ParseError("n >= 3 required for selection; n >= 1 for "
                         "clustering at G = 1")
    if args.groups is not None and not 1 <= args.groups <= n:
        raise ParseError(f"--groups must lie in 1..{n}")

    T = args.t_periods
    if (table.scale == PER_OBSERVATION and table.weights is None
            and T is None):
        raise ParseError("--t-periods is required for per_observation "
                         "tables without a weight column")
    V = build_dissimilarity(table.betas, _uncertainties(table), T or 1,
                            weights=table.weights)

    selection = None
    if args.select_g:
        selection = select_num_groups(V, n, T or n, G_max=args.gmax)
        G = selection.G_hat
    else:
        G = args.groups
    assignment, _ = spectral_cluster(V, G, seed=args.seed)

    report = {
        "format_version": FORMAT_VERSION,
        "library_version": __version__,
        "config": {
            "estimates_csv": args.estimates_csv,
            "groups": args.groups,
            "select_g": args.select_g,
            "t_periods": args.t_periods,
            "gmax": args.gmax,
            "seed": args.seed,
            "scale": table.scale,
        },
        "n": n,
        "G": G,
        "labels": {ident: int(lab)
                   for ident, lab in zip(table.ids, assignment.labels)},
    }
    if selection is not None:
        report["selection"] = {
            "G_hat": selection.G_hat,
            "lambda_tilde": [float(v) for v in selection.lambda_tilde],
            "ratios": [float(v) for v in selection.ratios],
        }
    if args.truth:
        truth = _read_truth(args.truth, table.ids)
        score = average_match(truth, assignment.labels)
        report["scores"] = {"perfect": score.perfect,
                            "average": score.average}
    write_json(args.out, report)

    print(f"{'id':<20} label")
    for ident, lab in zip(table.ids, assignment.labels):
        print(f"{ident:<20} {lab}")
    if selection is not None:
        print(f"selected G = {G}")
    print(f"report written to {args.out} "
          f"({time.time() - started:.2f}s)")
    return 0


def _uncertainties(table):
    from .types import UncertaintyEstimate

    return [UncertaintyEstimate(i, sigma, scale=table.scale)
            for i, sigma in enumerate(table.sigmas)]


def cmd_simulate(args) -> int:
    with open(args.config_file) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"config is not valid JSON: {exc}") from exc
    unknown = sorted(set(raw) - set(CONFIG_FIELDS))
    if unknown:
        raise ParseError(f"unknown config fields: {unknown}")
    for required in ("model", "n", "T", "reps"):
        if required not in raw:
            raise ParseError(f"config is missing required field {required!r}")
    try:
        config = SimulationConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"invalid config: {exc}") from exc

    result = run_batch(config)
    write_json(args.out, result_payload(result))
    for method, agg in result.aggregates.items():
        if isinstance(agg, dict) and "perfect_match" in agg:
            print(f"{method}: perfect_match={agg['perfect_match']:.3f} "
                  f"average_match={agg['average_match']:.4f}")
    if "group_count_table" in result.aggregates:
        print("group counts:", result.aggregates["group_count_table"])
    print(f"results written to {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"estimate": cmd_estimate, "cluster": cmd_cluster,
                "simulate": cmd_simulate}
    try:
        return handlers[args.command](args)
    except (ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EstimationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
