"""Batch experiment driver.

Subcommands: run (train -> certify -> verify), certify (audit an external
embeddings CSV), verify-theory (scenario checks), list-worlds,
print-config-schema.  Exit codes: 0 success, 1 runtime failure, 2
usage/config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import infotheory as it
from . import theory
from .config import ExperimentConfig, load_config, parse_config_text, schema_help
from .errors import ConfigurationError, ContractViolation, PelabError
from .metrics import (MetricReport, MetricSuiteOptions, certify_encoder,
                      geometry_diagnostics, invariance_curve, leakage_probe,
                      normalized_mi, radial_fisher, separability,
                      sufficiency_surrogate, uniform_grid)
from .numerics import Rng, make_encoder
from .probes import evaluate_probe, fit_linear_probe
from .svg import render_curve_svg
from .trainer import train_perception
from .worlds import WORLD_BUILDERS

_BUNDLED = Path(__file__).parent / "configs"


def _resolve_config(spec: str) -> ExperimentConfig:
    path = Path(spec)
    if path.exists():
        return load_config(path)
    bundled = _BUNDLED / f"{spec}.cfg"
    if bundled.exists():
        return load_config(bundled)
    raise ConfigurationError(
        f"config {spec!r} is neither a file nor a bundled name "
        f"(bundled: {', '.join(sorted(p.stem for p in _BUNDLED.glob('*.cfg')))})")


def _write(path: Path, text: str, quiet: bool):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    if not quiet:
        print(f"wrote {path}")


def _emit_curves(report: MetricReport, out: Path, quiet: bool):
    for name, curve in report.curves.items():
        lines = [f"# config_hash={report.config_hash} seed={report.seed}",
                 "alpha,value"]
        lines += [f"{repr(float(a))},{repr(float(v))}"
                  for a, v in zip(curve.alphas, curve.values)]
        _write(out / "curves" / f"{name}.csv", "\n".join(lines) + "\n", quiet)
        svg = render_curve_svg(
            curve.alphas, curve.values, f"{name} (auc={curve.auc:.6g})",
            stamp=f"config_hash={report.config_hash} seed={report.seed}")
        _write(out / "plots" / f"{name}.svg", svg, quiet)


def _light_snapshot(enc, world, opts, chash: str, seed: int,
                    step: int) -> MetricReport:
    """Cheap mid-training snapshot: invariance AUC and code geometry only.
    Deterministic per (seed, step)."""
    snap = MetricReport(config_hash=chash, seed=seed)
    snap.notes.append(f"training snapshot at step {step}")
    rng = Rng(seed * 1_000_003 + step)
    z = enc.forward(world.sample_x(rng, min(opts.n, 2048)))
    geo = geometry_diagnostics(z, opts.gamma)
    snap.add("per_dim_variance", value=float(min(geo["per_dim_variance"])),
             per_dim=geo["per_dim_variance"])
    snap.add("cov_offdiag", value=geo["cov_offdiag"])
    if getattr(world.transforms, "magnitude_parameterized", False):
        curve = invariance_curve(
            enc, world, uniform_grid(opts.curve_alpha_max, opts.curve_points),
            min(opts.n, 2048), rng)
        snap.add("invariance_auc", value=curve.auc, step=step)
    return snap


def _verdicts_pass(report: MetricReport) -> bool:
    def collect(node):
        if isinstance(node, dict):
            if "passed" in node:
                yield bool(node["passed"])
            for v in node.values():
                yield from collect(v)
        elif isinstance(node, list):
            for v in node:
                yield from collect(v)

    return all(collect(report.theory))


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def cmd_run(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    seed = cfg["seed"]
    chash = cfg.config_hash()
    world = cfg.build_world()
    root = Rng(seed)
    init_rng, metrics_rng, theory_rng, aux_rng = root.split(4)

    enc = make_encoder(cfg["encoder.arch"], world.d_x, cfg["encoder.d_z"],
                       cfg["encoder.d_hidden"], init_rng,
                       cfg["encoder.init_scale"])
    opts = MetricSuiteOptions(
        n=cfg["metrics.n"], curve_points=cfg["metrics.curve_points"],
        curve_alpha_max=cfg["metrics.curve_alpha_max"],
        gamma=cfg["objective.gamma"], mi_bins=cfg["metrics.mi_bins"],
        probe_budgets=cfg["metrics.probe_budgets"],
        probe_pool_n=cfg["metrics.probe_pool"],
        run_probe_efficiency=cfg["metrics.probe_efficiency"])

    auc_before = None
    trained = cfg["train.steps"] >= 1
    if trained:
        if getattr(world.transforms, "magnitude_parameterized", False):
            curve0 = invariance_curve(
                enc, world, uniform_grid(opts.curve_alpha_max, opts.curve_points),
                opts.n, aux_rng)
            auc_before = curve0.auc
        tcfg = cfg.build_train_config()
        snapshot_fn = None
        if tcfg.eval_every > 0:
            def snapshot_fn(step, snap_enc):
                snap = _light_snapshot(snap_enc, world, opts, chash, seed, step)
                rel = f"snapshots/step_{step}.json"
                _write(out / rel, snap.to_json(), quiet=True)
                return rel
        enc_final, log = train_perception(world, enc, tcfg,
                                          snapshot_fn=snapshot_fn)
        out.mkdir(parents=True, exist_ok=True)
        log.write_csv(out / "trainlog.csv", chash, seed)
        if not quiet:
            print(f"wrote {out / 'trainlog.csv'}")
    else:
        enc_final = enc

    if cfg["metrics.enabled"]:
        report = certify_encoder(enc_final, world, opts, metrics_rng,
                                 config_hash=chash, seed=seed)
    else:
        report = MetricReport(config_hash=chash, seed=seed)

    if auc_before is not None:
        report.curves["invariance_untrained"] = curve0
        report.add("invariance_auc_untrained", value=auc_before)
        after = report.metrics.get("invariance_auc")
        if after is not None and after.status == "ok" and auc_before > 0:
            report.add("train_auc_ratio", value=after.value / auc_before)

    # theory section
    if cfg["theory.risk_table"]:
        report.theory["risk_table"] = theory.risk_table(world)
    if cfg["assert.risk_table_exact"]:
        report.theory["risk_table_exact"] = \
            theory.risk_table_verdict(world).to_dict()
    if cfg["theory.assumption_audit"]:
        report.theory["assumption_audit"] = [
            v.to_dict() for v in theory.assumption_audit(
                world, theory_rng, n=cfg["theory.n"])]
    if cfg["theory.two_stage"]:
        report.theory["two_stage"] = theory.two_stage_check(
            world, enc_final, theory_rng, n_train=cfg["theory.n"],
            resolution=cfg["theory.resolution"]).to_dict()
    ratio_max = cfg["assert.auc_ratio_max"]
    if np.isfinite(ratio_max):
        entry = report.metrics.get("train_auc_ratio")
        measured = entry.value if entry is not None else None
        report.theory["auc_ratio_assert"] = theory.TheoryVerdict(
            name="train_auc_ratio_max", measured={"ratio": measured},
            tolerance=ratio_max,
            passed=measured is not None and measured <= ratio_max,
            diagnostics={"auc_before": auc_before}).to_dict()

    _write(out / "report.json", report.to_json(), quiet)
    _emit_curves(report, out, quiet)
    _write(out / "config_echo.cfg",
           f"# config_hash={chash}\n" + cfg.canonical_text(), quiet)
    return 0 if _verdicts_pass(report) else 1


# ---------------------------------------------------------------------------
# certify (external embeddings)
# ---------------------------------------------------------------------------

def _read_embeddings_csv(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline().strip()
        if not header_line:
            raise ContractViolation(f"{path}: empty file")
        header = [h.strip() for h in header_line.split(",")]
        rows = []
        for lineno, raw in enumerate(fh, start=2):
            if not raw.strip():
                continue
            parts = raw.strip().split(",")
            if len(parts) != len(header):
                raise ContractViolation(
                    f"{path}: row {lineno}: expected {len(header)} columns, "
                    f"got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ContractViolation(
                    f"{path}: row {lineno}: {exc}") from None
    if not rows:
        raise ContractViolation(f"{path}: no data rows")
    data = np.asarray(rows)
    cols = {name: data[:, j] for j, name in enumerate(header)}

    def gather(prefix):
        names = sorted((n for n in cols if n.startswith(prefix)
                        and n[len(prefix):].isdigit()),
                       key=lambda n: int(n[len(prefix):]))
        if not names:
            return None
        return np.column_stack([cols[n] for n in names])

    z = gather("z_")
    if z is None:
        raise ContractViolation(f"{path}: no z_0..z_d columns found")
    t = cols.get("t")
    t_multi = gather("t_")
    return {"z": z, "x": gather("x_"),
            "v": cols.get("v"), "alpha": cols.get("alpha"),
            "t": t if t is not None else t_multi, "y": cols.get("y")}


def cmd_certify(embeddings_path: Path, cfg: ExperimentConfig, out: Path,
                quiet: bool) -> int:
    data = _read_embeddings_csv(embeddings_path)
    z, v, t, y, x = data["z"], data["v"], data["t"], data["y"], data["x"]
    seed = cfg["seed"]
    rng = Rng(seed)
    probe_rng, _ = rng.split(2)
    report = MetricReport(config_hash=cfg.config_hash(), seed=seed)

    geo = geometry_diagnostics(z, cfg["objective.gamma"])
    report.add("var_floor_violation", value=geo["var_floor_violation"],
               gamma=cfg["objective.gamma"])
    report.add("cov_offdiag", value=geo["cov_offdiag"])
    report.add("per_dim_variance", value=float(min(geo["per_dim_variance"])),
               per_dim=geo["per_dim_variance"])

    nuisance = v
    nuisance_name = "v"
    if nuisance is None and data["alpha"] is not None:
        nuisance = it.quantile_codes(data["alpha"], cfg["metrics.mi_bins"])
        nuisance_name = "alpha (quantile-binned)"
    if nuisance is not None:
        def run_leak():
            res = leakage_probe(z, nuisance, probe_rng)
            report.add("leakage_probe_auc", value=res["auc"],
                       leakage_score=res["leakage_score"], error=res["error"],
                       nuisance=nuisance_name)

        def run_nmi():
            report.add("normalized_mi",
                       value=normalized_mi(z, nuisance,
                                           n_bins=cfg["metrics.mi_bins"]),
                       nuisance=nuisance_name)

        report.record("leakage_probe_auc", run_leak)
        report.record("normalized_mi", run_nmi)
    else:
        report.add("leakage_probe_auc", status="not_applicable",
                   reason="no v or alpha column")
        report.add("normalized_mi", status="not_applicable",
                   reason="no v or alpha column")

    if t is None:
        report.add("sufficiency_cmi_bits", status="not_applicable",
                   reason="no t column")
        report.add("mmd2", status="not_applicable", reason="no t column")
        report.add("fisher_ratio", status="not_applicable", reason="no t column")
    else:
        if x is None:
            report.add("sufficiency_cmi_bits", status="not_applicable",
                       reason="no x_ columns (inputs required for I(X;Z|T))")
        else:
            report.record("sufficiency_cmi_bits", lambda: report.add(
                "sufficiency_cmi_bits", value=sufficiency_surrogate(z, x, t)))

        def run_sep():
            from .metrics import _two_orbit_groups
            groups = _two_orbit_groups(z, t)
            if groups is None:
                report.add("mmd2", status="not_applicable",
                           reason="need two orbit groups with >= 20 samples")
                report.add("fisher_ratio", status="not_applicable",
                           reason="need two orbit groups with >= 20 samples")
                return
            res = separability(*groups)
            report.add("mmd2", value=res["mmd2"], bandwidth_sq=res["bandwidth_sq"])
            fr = res["fisher_ratio"]
            report.add("fisher_ratio",
                       value=fr if np.isfinite(fr) else None,
                       status="ok" if np.isfinite(fr) else "degenerate")
            rf = radial_fisher(*groups)
            report.add("radial_fisher", value=rf if np.isfinite(rf) else None,
                       interpretation="fisher ratio on code norms")

        report.record("separability", run_sep)

    if y is not None and np.unique(y).size >= 2:
        def run_probe():
            n = z.shape[0]
            perm = probe_rng.permutation(n)
            n_test = max(1, int(round(0.3 * n)))
            test_ix, train_ix = perm[:n_test], perm[n_test:]
            head = fit_linear_probe(z[train_ix], y[train_ix], probe_rng)
            ev = evaluate_probe(head, z[test_ix], y[test_ix])
            report.add("label_probe_accuracy", value=ev.accuracy, auc=ev.auc,
                       secondary=True)

        report.record("label_probe_accuracy", run_probe)
    else:
        report.add("label_probe_accuracy", status="not_applicable",
                   reason="no y column (or single class)")

    for name in ("invariance_auc", "smoothness", "fisher_trace",
                 "disentanglement_nmi"):
        report.add(name, status="not_applicable",
                   reason="requires the encoder / generative factors")

    _write(out / "report.json", report.to_json(), quiet)
    return 0


# ---------------------------------------------------------------------------
# verify-theory
# ---------------------------------------------------------------------------

def cmd_verify_theory(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    scenario = cfg["theory.scenario"]
    if not scenario:
        raise ConfigurationError("verify-theory requires theory.scenario")
    verdict, expected_pass, ok = theory.run_scenario(
        scenario, cfg["seed"], n=cfg["theory.n"],
        resolution=cfg["theory.resolution"])
    report = MetricReport(config_hash=cfg.config_hash(), seed=cfg["seed"])
    report.theory[scenario] = {
        "verdict": verdict.to_dict(),
        "expected": "pass" if expected_pass else "fail",
        "observed": "pass" if verdict.passed else "fail",
        "matches_expectation": bool(ok),
    }
    _write(out / "report.json", report.to_json(), quiet)
    if not quiet:
        print(f"{scenario}: expected "
              f"{'pass' if expected_pass else 'fail'}, observed "
              f"{'pass' if verdict.passed else 'fail'}"
              f" -> {'OK' if ok else 'MISMATCH'}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pelab",
        description="perception-learning laboratory: train task-agnostic "
                    "encoders, certify them, and verify the separation theory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="config file path or bundled config name")
        p.add_argument("--out", default="pelab_out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--quiet", action="store_true")

    common(sub.add_parser("run", help="train, certify, and verify per config"))
    pc = sub.add_parser("certify", help="certify an external embeddings CSV")
    pc.add_argument("embeddings", help="CSV with z_0..z_d and optional "
                                       "v/t/y/alpha/x_* columns")
    pc.add_argument("--config", default=None,
                    help="optional config (gamma, bins, seed)")
    pc.add_argument("--out", default="pelab_out")
    pc.add_argument("--seed", type=int, default=None)
    pc.add_argument("--quiet", action="store_true")
    common(sub.add_parser("verify-theory", help="run a theory scenario"))
    sub.add_parser("list-worlds", help="list available worlds")
    sub.add_parser("print-config-schema", help="print the config schema")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list-worlds":
            for name, builder in sorted(WORLD_BUILDERS.items()):
                doc = (builder.__doc__ or "").strip().splitlines()[0]
                print(f"{name:14s} {doc}")
            return 0
        if args.command == "print-config-schema":
            print(schema_help(), end="")
            return 0

        if getattr(args, "config", None) is not None:
            cfg = _resolve_config(args.config)
        else:
            cfg = parse_config_text("", source="<defaults>")
        if args.seed is not None:
            cfg = cfg.with_override("seed", int(args.seed))
        out = Path(args.out)

        if args.command == "run":
            return cmd_run(cfg, out, args.quiet)
        if args.command == "certify":
            return cmd_certify(Path(args.embeddings), cfg, out, args.quiet)
        if args.command == "verify-theory":
            return cmd_verify_theory(cfg, out, args.quiet)
        raise ConfigurationError(f"unknown command {args.command!r}")
    except (ConfigurationError, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PelabError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
