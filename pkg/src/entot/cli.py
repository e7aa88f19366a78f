"""Command-line entry point.

Subcommands: normalize, solve, map, density, transfer, rates,
concentration.  Exit codes: 0 success, 1 usage error, 2 data/validation
error, 3 solver non-convergence where convergence is required.  Errors
end with a machine-readable line ``ERROR <code>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from entot import fileio
from entot.extension import ExtendedPotentials, entropic_map, sample_density
from entot.measures import Config, apply_normalization, fit_normalization
from entot.solver import UnboundedSupportError, sinkhorn_solve
from entot.transfer import LabeledSample, plugin_classifier, plugin_regression

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NO_CONVERGENCE = 3


class UsageExit(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"ERROR {EXIT_USAGE}: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="entot", description="Entropic optimal transport estimation toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    n = sub.add_parser("normalize", help="fit and apply the radius-1/2 ball normalization")
    n.add_argument("--mu", required=True)
    n.add_argument("--nu")
    n.add_argument("--out-mu", required=True)
    n.add_argument("--out-nu")
    n.add_argument("--transform", required=True, help="output JSON transform path")

    s = sub.add_parser("solve", help="solve the empirical entropic OT dual")
    s.add_argument("--mu", required=True)
    s.add_argument("--nu", required=True)
    s.add_argument("--eta", type=float, required=True)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iter", type=int, default=10000)
    s.add_argument("--out", required=True)

    m = sub.add_parser("map", help="evaluate the entropic regression map at query points")
    m.add_argument("--report", required=True)
    m.add_argument("--nu", required=True)
    m.add_argument("--query", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--transform", help="JSON transform: queries are in original coordinates")

    d = sub.add_parser("density", help="dense coupling density matrix on the sample grid")
    d.add_argument("--report", required=True)
    d.add_argument("--mu", required=True)
    d.add_argument("--nu", required=True)
    d.add_argument("--out", required=True)

    t = sub.add_parser("transfer", help="plug-in label transfer (regression or classification)")
    t.add_argument("--report", required=True)
    t.add_argument("--nu", required=True)
    t.add_argument("--labels", required=True)
    t.add_argument("--query", required=True)
    t.add_argument("--mode", choices=("regress", "classify"), required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--transform")

    r = sub.add_parser("rates", help="Monte Carlo rate curve against an exact truth")
    r.add_argument("--spec", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int, help="overrides the spec file's seed")
    r.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    c = sub.add_parser("concentration", help="gradient-norm and fluctuation tail checks")
    c.add_argument("--scenario", required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--trials", type=int, required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    return p


def _cmd_normalize(args) -> int:
    if args.nu and not args.out_nu:
        print(f"ERROR {EXIT_USAGE}: --out-nu is required when --nu is given", file=sys.stderr)
        return EXIT_USAGE
    measures = [fileio.read_measure(args.mu)]
    if args.nu:
        measures.append(fileio.read_measure(args.nu))
    t = fit_normalization(measures)
    out = [args.out_mu] + ([args.out_nu] if args.nu else [])
    for m, path in zip(measures, out):
        nm = apply_normalization(t, m)
        fileio.write_points(path, nm.points, nm.weights)
    fileio.write_transform(args.transform, t)
    return EXIT_OK


def _cmd_solve(args) -> int:
    mu = fileio.read_measure(args.mu)
    nu = fileio.read_measure(args.nu)
    cfg = Config(eta=args.eta, tolerance=args.tol, max_iterations=args.max_iter)
    report = sinkhorn_solve(mu, nu, cfg)
    fileio.write_report(args.out, report)
    if not report.converged:
        print(
            f"ERROR {EXIT_NO_CONVERGENCE}: solver stopped at gradient norm "
            f"{report.gradient_norm:.3e} after {report.iterations} iterations",
            file=sys.stderr,
        )
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _load_extension(report_path, nu_path, mu_path=None) -> ExtendedPotentials:
    nu = fileio.read_measure(nu_path)
    if mu_path:
        report = fileio.read_report(report_path, fileio.read_measure(mu_path), nu)
        return ExtendedPotentials.from_report(report)
    # f-side quantities (map, transfer) need only the target sample
    with open(report_path) as fh:
        d = json.load(fh)
    from entot.solver import PotentialPair

    pair = PotentialPair(
        f=np.asarray(d["f"], dtype=float),
        g=np.asarray(d["g"], dtype=float),
        normalized=True,
    )
    if pair.g.shape != (nu.size,):
        raise ValueError("report potentials do not match the supplied target measure")
    return ExtendedPotentials(mu=None, nu=nu, potentials=pair, eta=float(d["eta"]))


def _cmd_map(args) -> int:
    ext = _load_extension(args.report, args.nu)
    queries, _ = fileio.read_point_rows(args.query)
    transform = fileio.read_transform(args.transform) if args.transform else None
    if transform is not None:
        queries = transform.apply_points(queries)
    mapped = np.atleast_2d(entropic_map(ext, queries))
    if transform is not None:
        mapped = transform.invert_points(mapped)
    fileio.write_points(args.out, mapped)
    return EXIT_OK


def _cmd_density(args) -> int:
    ext = _load_extension(args.report, args.nu, mu_path=args.mu)
    fileio.write_matrix(args.out, sample_density(ext).values)
    return EXIT_OK


def _cmd_transfer(args) -> int:
    ext = _load_extension(args.report, args.nu)
    labels = fileio.read_labels(args.labels)
    labeled = LabeledSample(y_points=ext.nu.points, labels=labels)
    queries, _ = fileio.read_point_rows(args.query)
    transform = fileio.read_transform(args.transform) if args.transform else None
    if transform is not None:
        queries = transform.apply_points(queries)
    if args.mode == "regress":
        preds = np.atleast_1d(plugin_regression(ext, labeled, queries))
    else:
        preds = np.atleast_1d(plugin_classifier(ext, labeled, queries))
    with open(args.out, "w") as fh:
        fh.write("prediction\n")
        for v in preds:
            fh.write(fileio.fmt(v) + "\n")
    return EXIT_OK


def _cmd_rates(args) -> int:
    from entot.experiments import ExperimentSpec, default_truth, run_curve

    with open(args.spec) as fh:
        d = json.load(fh)
    seed = args.seed if args.seed is not None else int(d["seed"])
    spec = ExperimentSpec(
        metric=d["metric"],
        sample_sizes=tuple(d["sample_sizes"]),
        trials=int(d["trials"]),
        seed=seed,
        eta=float(d["eta"]),
        tolerance=float(d.get("tolerance", 1e-10)),
        max_iterations=int(d.get("max_iterations", 10000)),
        scenario=d.get("scenario"),
    )
    label_means = class1_probs = None
    if spec.scenario:
        truth, label_model = fileio.read_scenario(spec.scenario, eta=spec.eta)
        if "means" in label_model:
            label_means = np.asarray(label_model["means"], dtype=float)
        if "class1_probs" in label_model:
            class1_probs = np.asarray(label_model["class1_probs"], dtype=float)
    else:
        truth = default_truth(spec.eta)
    curve = run_curve(
        spec, truth, threads=args.threads,
        label_means=label_means, class1_probs=class1_probs,
    )
    fileio.write_curve_csv(args.out, curve)
    sidecar = os.path.splitext(args.out)[0] + ".json"
    fileio.write_curve_sidecar(sidecar, curve, d | {"seed": seed})
    for s in curve.stats:
        print(f"n={s.n} ok={s.trials_ok} failed={s.trials_failed} mean={s.mean:.6e}")
    if curve.fitted_slope is not None:
        print(f"fitted slope: {curve.fitted_slope:.4f}")
    return EXIT_OK


def _cmd_concentration(args) -> int:
    from entot.experiments import concentration_check

    truth, _ = fileio.read_scenario(args.scenario)
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    rep = concentration_check(truth, args.n, args.trials, rng)
    import csv as _csv

    with open(args.out, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["t", "level", "empirical_quantile", "bound"])
        for t, level, emp, bound in rep.ustat_rows:
            w.writerow([fileio.fmt(t), fileio.fmt(level), fileio.fmt(emp), fileio.fmt(bound)])
    sidecar = os.path.splitext(args.out)[0] + ".json"
    with open(sidecar, "w") as fh:
        json.dump(
            {
                "n": rep.n,
                "trials": rep.trials,
                "grad_sq_mean": float(rep.grad_sq.mean()),
                "grad_bound": rep.grad_bound,
                "grad_exact_mean": rep.grad_exact_mean,
                "var_p_star": rep.var_p_star,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    print(
        f"grad_sq mean {rep.grad_sq.mean():.6e} "
        f"(exact {rep.grad_exact_mean:.6e}, bound {rep.grad_bound:.6e})"
    )
    return EXIT_OK


_COMMANDS = {
    "normalize": _cmd_normalize,
    "solve": _cmd_solve,
    "map": _cmd_map,
    "density": _cmd_density,
    "transfer": _cmd_transfer,
    "rates": _cmd_rates,
    "concentration": _cmd_concentration,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except UnboundedSupportError as e:
        print(f"ERROR {EXIT_DATA}: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as e:
        print(f"ERROR {EXIT_DATA}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
