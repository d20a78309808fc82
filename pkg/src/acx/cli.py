"""Command line interface.

Three subcommands: ``extrapolate`` runs the estimators on a score-matrix
or win-counts CSV, ``simulate`` runs replicated synthetic experiments,
``report`` renders curves and a summary table from replication CSVs.

Exit codes: 0 success, 1 input or configuration error, 2 at least one
estimator reported a convergence failure (the others are still written).
"""

from __future__ import annotations

import os
import sys
import warnings
from dataclasses import asdict, dataclass

import click
import numpy as np

from . import io as acxio
from .core import win_counts
from .errors import AcxError, ParseError, TieDetected
from .estimators import ESTIMATORS, ConsConfig, default_kappa_grid
from .simlab import ClassifierSpec, MetaConfig, run_replication

_ALL_ESTIMATORS = ("un", "exp", "cons", "hd")


@dataclass
class RunManifest:
    """Parsed and validated invocation of one subcommand."""

    command: str
    inputs: tuple = ()
    estimators: tuple = _ALL_ESTIMATORS
    k_list: tuple = ()
    target_k: int = None
    grid_size: int = 512
    kappa_grid: object = None
    tie_policy: str = "strict"
    seed: int = 0
    out_dir: str = "."

    def validate(self):
        """Collect every problem at once; empty list means valid."""
        errors = []
        for path in self.inputs:
            if not os.path.exists(path):
                errors.append(f"input does not exist: {path}")
        for name in self.estimators:
            if name not in _ALL_ESTIMATORS:
                errors.append(f"unknown estimator {name!r}; choose from {', '.join(_ALL_ESTIMATORS)}")
        for k in self.k_list:
            if k < 2:
                errors.append(f"k must be >= 2, got {k}")
        if self.target_k is not None and self.k_list and self.target_k < max(self.k_list):
            errors.append(f"--target-K {self.target_k} is smaller than the largest k "
                          f"{max(self.k_list)}")
        if self.grid_size < 16:
            errors.append(f"--grid-size must be >= 16, got {self.grid_size}")
        out_parent = os.path.dirname(os.path.abspath(self.out_dir)) or "."
        if not os.path.isdir(self.out_dir) and not os.access(out_parent, os.W_OK):
            errors.append(f"output directory not writable: {self.out_dir}")
        return errors


def _fail(messages, code=1):
    for msg in ([messages] if isinstance(messages, str) else messages):
        click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _parse_estimators(text):
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


def _parse_k_list(text):
    """Accept '3,5,10' or 'lo:hi' or 'lo:hi:step' (inclusive)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"expected lo:hi or lo:hi:step, got {text!r}")
        lo, hi = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
        if step < 1 or hi < lo:
            raise ValueError(f"bad k range {text!r}")
        return tuple(range(lo, hi + 1, step))
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _parse_kappa_grid(text):
    """'lo:hi:n' -> rate 0 plus n log-spaced rates on [lo, hi]."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"expected lo:hi:n, got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not (0 < lo < hi) or n < 1:
        raise ValueError(f"bad kappa grid {text!r}")
    return default_kappa_grid(lo, hi, n)


def _ensure_out(out_dir):
    os.makedirs(out_dir, exist_ok=True)


@click.group()
def main():
    """Accuracy extrapolation for multi-class classifiers.

    Estimate how classification accuracy scales with the number of
    classes from evaluation data on a small class subset.
    """


# ---------------------------------------------------------------------------
# extrapolate
# ---------------------------------------------------------------------------


def _sniff_and_read(path, tie_policy, seed):
    with open(path, newline="") as fh:
        first = fh.readline()
    if first.startswith("label"):
        sm = acxio.read_score_matrix(path)
        return win_counts(sm, tie_policy=tie_policy, tie_seed=seed)
    if first.startswith("class"):
        return acxio.read_win_counts(path)
    raise ParseError(path, "unrecognized header; expected a score matrix "
                     "('label,c1,...') or win counts ('class,repeat,v,k')", line=1)


def _fit_and_report(name, wc, t_grid, manifest):
    """Fit one estimator; return (report dict, curve column, failed flag)."""
    k = wc.k
    curve = np.full(t_grid.size, np.nan)
    caught = []
    diagnostics = {"residual": None, "objective": None, "kkt": None, "warnings": []}
    failed = False
    with warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")
        try:
            cls = ESTIMATORS[name]
            if name == "exp":
                est = cls(kappa_grid=manifest.kappa_grid)
            elif name == "cons":
                est = cls(grid_size=manifest.grid_size)
            else:
                est = cls()
            est.fit_win_counts(wc)
            if name == "un":
                t_known = t_grid[t_grid <= k]
                curve[: t_known.size] = est.predict(t_known)
            else:
                curve = est.predict(t_grid).astype(float)
            if name == "exp":
                diagnostics["residual"] = float(est.residual_)
            elif name == "cons":
                diagnostics["objective"] = float(est.diagnostics_.objective)
                diagnostics["kkt"] = float(est.diagnostics_.kkt_residual)
                caught.extend(est.diagnostics_.warnings)
        except AcxError as exc:
            failed = True
            caught.append(f"{type(exc).__name__}: {exc}")
    caught.extend(str(w.message) for w in wlist)
    # deduplicate while preserving order
    diagnostics["warnings"] = list(dict.fromkeys(caught))
    targets = [{"t": int(t), "p_hat": float(p)}
               for t, p in zip(t_grid, curve) if not np.isnan(p)]
    report = {"estimator": name, "source_k": int(k), "targets": targets,
              "diagnostics": diagnostics}
    return report, curve, failed


@main.command()
@click.option("--input", "input_path", required=True, metavar="CSV",
              help="Score matrix (label,c1,...) or win counts (class,repeat,v,k) CSV.")
@click.option("--k", "k_expected", type=int, default=None,
              help="Expected source class count; validated against the input.")
@click.option("--target-K", "target_big_k", type=int, default=None,
              help="Target class count K (default: the source k).")
@click.option("--estimators", "estimators_opt", default="un,exp,cons,hd", show_default=True,
              help="Comma-separated subset of un,exp,cons,hd.")
@click.option("--grid-size", default=512, show_default=True,
              help="Density grid cells for the cons estimator.")
@click.option("--kappa-grid", "kappa_grid_opt", default=None, metavar="LO:HI:N",
              help="Decay-rate dictionary for exp: N log-spaced rates on [LO, HI] plus 0.")
@click.option("--tie-policy", type=click.Choice(("strict", "half", "random")),
              default="strict", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for the random tie policy.")
@click.option("--out", "out_dir", default=".", show_default=True,
              help="Directory for report.json and curve.csv.")
def extrapolate(input_path, k_expected, target_big_k, estimators_opt, grid_size,
                kappa_grid_opt, tie_policy, seed, out_dir):
    """Estimate accuracy at a larger class count from evaluation data."""
    try:
        kappa_grid = _parse_kappa_grid(kappa_grid_opt) if kappa_grid_opt else None
        est_names = _parse_estimators(estimators_opt)
    except ValueError as exc:
        _fail(str(exc))
    manifest = RunManifest(command="extrapolate", inputs=(input_path,),
                           estimators=est_names, target_k=target_big_k,
                           grid_size=grid_size, kappa_grid=kappa_grid,
                           tie_policy=tie_policy, seed=seed, out_dir=out_dir)
    problems = manifest.validate()
    if problems:
        _fail(problems)
    try:
        wc = _sniff_and_read(input_path, tie_policy, seed)
    except (ParseError, TieDetected) as exc:
        _fail(str(exc))
    if k_expected is not None and k_expected != wc.k:
        _fail(f"--k {k_expected} does not match the input's k = {wc.k}")
    target = wc.k if target_big_k is None else target_big_k
    if target < wc.k:
        _fail(f"--target-K {target} is smaller than the source k = {wc.k}")

    _ensure_out(out_dir)
    t_grid = np.arange(2, target + 1)
    reports, columns = [], {}
    any_failed = False
    for name in est_names:
        report, curve, failed = _fit_and_report(name, wc, t_grid, manifest)
        reports.append(report)
        columns[name] = curve
        any_failed = any_failed or failed
        if failed:
            click.echo(f"{name}: FAILED ({report['diagnostics']['warnings'][-1]})", err=True)
        else:
            at_target = curve[-1]
            shown = "n/a" if np.isnan(at_target) else f"{at_target:.6f}"
            click.echo(f"{name}: p_hat({target}) = {shown}")
    acxio.write_estimator_reports(os.path.join(out_dir, "report.json"), reports)
    acxio.write_curve_csv(os.path.join(out_dir, "curve.csv"), t_grid, columns)
    click.echo(f"wrote {os.path.join(out_dir, 'report.json')} and "
               f"{os.path.join(out_dir, 'curve.csv')}")
    if any_failed:
        sys.exit(2)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


@main.command()
@click.option("--k", "k_opt", default=None, metavar="LIST",
              help="Subset sizes: '3,5,10' or 'lo:hi[:step]'. Default: the config's k.")
@click.option("--target-K", "target_big_k", type=int, default=50, show_default=True,
              help="Ensemble class count K.")
@click.option("--estimators", "estimators_opt", default="exp,cons,hd", show_default=True)
@click.option("--replicates", default=20, show_default=True)
@click.option("--classifier", type=click.Choice(("qda", "gnb", "centroid")),
              default="qda", show_default=True)
@click.option("--rho", type=float, default=None,
              help="Covariance shrinkage; default is automatic, 0 disables.")
@click.option("--dim", default=10, show_default=True)
@click.option("--tau", default=1.0, show_default=True,
              help="Scale of the class-mean prior.")
@click.option("--cov", type=click.Choice(("identity", "diagonal", "spd")),
              default="identity", show_default=True)
@click.option("--cov-range", default="0.5:2.0", show_default=True, metavar="LO:HI")
@click.option("--train-per-class", default=50, show_default=True)
@click.option("--tests-per-class", default=20, show_default=True)
@click.option("--grid-size", default=512, show_default=True)
@click.option("--kappa-grid", "kappa_grid_opt", default=None, metavar="LO:HI:N")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", default=".", show_default=True)
def simulate(k_opt, target_big_k, estimators_opt, replicates, classifier, rho, dim, tau,
             cov, cov_range, train_per_class, tests_per_class, grid_size, kappa_grid_opt,
             seed, out_dir):
    """Run a replicated synthetic extrapolation experiment.

    Writes replication.csv (tidy records) and replication_config.json
    (the full generating configuration).  Deterministic under a fixed
    seed; ACX_THREADS caps parallel replicates without changing output.
    """
    errors = []
    kappa_grid = None
    k_list = ()
    try:
        kappa_grid = _parse_kappa_grid(kappa_grid_opt) if kappa_grid_opt else None
    except ValueError as exc:
        errors.append(str(exc))
    try:
        lo, hi = (float(x) for x in cov_range.split(":"))
        cov_rng = (lo, hi)
    except ValueError:
        errors.append(f"bad --cov-range {cov_range!r}, expected LO:HI")
        cov_rng = (0.5, 2.0)
    try:
        k_list = _parse_k_list(k_opt) if k_opt else ()
    except ValueError as exc:
        errors.append(str(exc))
    est_names = _parse_estimators(estimators_opt)
    if replicates < 1:
        errors.append(f"--replicates must be >= 1, got {replicates}")
    cfg = None
    try:
        cfg = MetaConfig(dim=dim, tau=tau, cov=cov, cov_range=cov_rng,
                         train_per_class=train_per_class, tests_per_class=tests_per_class,
                         k=min(k_list) if k_list else min(10, target_big_k),
                         n_classes=target_big_k, seed=seed)
    except ValueError as exc:
        errors.append(str(exc))
    spec = None
    try:
        spec = ClassifierSpec(kind=classifier, rho=rho)
    except ValueError as exc:
        errors.append(str(exc))
    if not k_list and cfg is not None:
        k_list = (cfg.k,)
    manifest = RunManifest(command="simulate", estimators=est_names, k_list=k_list,
                           target_k=target_big_k, grid_size=grid_size,
                           kappa_grid=kappa_grid, seed=seed, out_dir=out_dir)
    errors.extend(manifest.validate())
    if errors:
        _fail(errors)

    records = run_replication(cfg, spec, k_list=list(k_list), estimators=est_names,
                              n_replicates=replicates,
                              cons_config=ConsConfig(grid_size=grid_size),
                              kappa_grid=kappa_grid)
    _ensure_out(out_dir)
    csv_path = os.path.join(out_dir, "replication.csv")
    acxio.write_replication_csv(csv_path, records)
    sidecar = {
        "schema": 1,
        "meta": asdict(cfg),
        "classifier": asdict(spec),
        "run": {"k_list": list(k_list), "estimators": list(est_names),
                "replicates": replicates, "grid_size": grid_size,
                "kappa_grid": None if kappa_grid is None else list(map(float, kappa_grid))},
    }
    acxio.write_json(os.path.join(out_dir, "replication_config.json"), sidecar)
    n_failed = sum(1 for r in records if r["status"] != "ok")
    click.echo(f"wrote {csv_path} ({len(records)} records, {n_failed} failed fits)")


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _classifier_label(csv_path):
    sidecar = os.path.splitext(csv_path)[0] + "_config.json"
    if os.path.exists(sidecar):
        import json
        with open(sidecar) as fh:
            doc = json.load(fh)
        clf = doc.get("classifier", {})
        kind = clf.get("kind")
        if kind:
            return str(kind)
    return os.path.splitext(os.path.basename(csv_path))[0]


@main.command()
@click.option("--input", "inputs", multiple=True, required=True, metavar="CSV",
              help="Replication CSV (repeatable; one panel per classifier).")
@click.option("--out", "out_dir", default=".", show_default=True)
def report(inputs, out_dir):
    """Render prediction-vs-k curves and a summary error table."""
    manifest = RunManifest(command="report", inputs=tuple(inputs), out_dir=out_dir)
    problems = manifest.validate()
    if problems:
        _fail(problems)
    panels = []
    for path in inputs:
        try:
            records = acxio.read_replication_csv(path)
        except ParseError as exc:
            _fail(str(exc))
        if records:
            panels.append((_classifier_label(path), records))
    if not panels:
        _fail("no records")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "acx"

    _ensure_out(out_dir)
    fig, axes = plt.subplots(1, len(panels), figsize=(5.0 * len(panels), 3.8),
                             squeeze=False, sharey=True)
    summary_rows = []
    for ax, (label, records) in zip(axes[0], panels):
        names = sorted({r["estimator"] for r in records})
        ks = sorted({r["k"] for r in records})
        truth = np.nanmean([r["truth"] for r in records])
        for name in names:
            means = []
            for k in ks:
                vals = [r["p_hat"] for r in records
                        if r["estimator"] == name and r["k"] == k and r["status"] == "ok"]
                means.append(np.mean(vals) if vals else np.nan)
            ax.plot(ks, means, marker="o", markersize=3, label=name)
            ok_errors = [abs(r["error"]) for r in records
                         if r["estimator"] == name and r["status"] == "ok"]
            n_failed = sum(1 for r in records
                           if r["estimator"] == name and r["status"] != "ok")
            summary_rows.append((label, name,
                                 float(np.mean(ok_errors)) if ok_errors else float("nan"),
                                 len(ok_errors), n_failed))
        ax.axhline(truth, color="black", linewidth=0.8, linestyle="--", label="truth")
        ax.set_xlabel("k")
        ax.set_title(label)
        ax.legend(fontsize=8)
    axes[0][0].set_ylabel("predicted accuracy at K")
    fig.tight_layout()
    svg_path = os.path.join(out_dir, "curves.svg")
    fig.savefig(svg_path, metadata={"Date": None})
    plt.close(fig)

    import csv as _csv
    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["classifier", "estimator", "mean_abs_error", "n_ok", "n_failed"])
        for row in summary_rows:
            writer.writerow([row[0], row[1], repr(row[2]), row[3], row[4]])
    click.echo(f"wrote {svg_path} and {summary_path}")


if __name__ == "__main__":
    main()
