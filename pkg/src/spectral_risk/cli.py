"""Batch experiment driver.

Subcommands
-----------
* ``sweep``            loss curve over the configured N grid (theory or MC)
* ``compare``          per-N relative gap between two configurations
* ``optimal-profile``  dump h*(lambda) tables (circle / wishart / nmno)
* ``scaling``          RateReport for a declared parametric profile
* ``pairgf-demo``      integrate the pair-of-flows realization of KRR

Configs are TOML (JSON accepted interchangeably), schema-versioned::

    schema = 1
    model = "circle"            # circle|wishart|nmno|mc-gaussian|mc-cosine
    sigma_sq = 1.0
    profile = "krr:eta=auto"    # catalog syntax; "auto" = optimal N-scaling
    n_grid = [64, 128, 256]

    [spectrum]
    flavor = "circle"           # circle|positive|continuous
    nu = 1.5
    kappa = 1.0
    # truncation = 40000
    # scale2 = false

    [mc]                        # required for mc-* models
    reps = 100
    P = 40000
    seed = 7

    [outputs]
    csv = "sweep.csv"
    json = "summary.json"

    [flags]
    offdiag = true
    asymptotic_overlay = false

All randomness flows from the single config seed; reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import circle, nmno, wishart
from . import montecarlo as mc
from .errors import ConfigError, SpectralRiskError
from .profiles import GradientFlow, Krr, SpectralProfile, parse_profile
from .scaling import nmno_scaling, scaling_profile_of
from .spectrum import DEFAULT_TRUNCATION, PowerLawSpectrum

log = logging.getLogger("spectral_risk")

MODELS = ("circle", "wishart", "nmno", "mc-gaussian", "mc-cosine")

CSV_HEADER = ["N", "total", "bias", "var_dataset", "var_noise", "stderr", "slope_local"]


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{float(value):.17g}"


# ----------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    model: str
    spectrum: PowerLawSpectrum
    profile_text: str
    sigma_sq: float
    n_grid: tuple
    mc_reps: int | None = None
    mc_features: int | None = None
    seed: int = 0
    out_csv: str | None = None
    out_json: str | None = None
    offdiag: bool | None = None
    asymptotic_overlay: bool = False


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing field {key!r} in {where}")
    return table[key]


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a TOML or JSON experiment file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        raw = tomllib.loads(text)
    return config_from_dict(raw, where=str(path))


def config_from_dict(raw: dict, where: str = "<config>") -> ExperimentConfig:
    if int(raw.get("schema", 0)) != 1:
        raise ConfigError(f"{where}: expected schema = 1")
    model = _require(raw, "model", where)
    if model not in MODELS:
        raise ConfigError(f"{where}: unknown model {model!r}, expected one of {MODELS}")

    spec_tab = _require(raw, "spectrum", where)
    try:
        spectrum = PowerLawSpectrum(
            nu=float(_require(spec_tab, "nu", f"{where}:[spectrum]")),
            kappa=float(_require(spec_tab, "kappa", f"{where}:[spectrum]")),
            flavor=spec_tab.get("flavor", "circle"),
            truncation=(int(spec_tab["truncation"]) if "truncation" in spec_tab else None),
            scale2=bool(spec_tab.get("scale2", False)),
        )
    except SpectralRiskError as exc:
        raise ConfigError(f"{where}:[spectrum]: {exc}") from exc

    n_grid = tuple(int(n) for n in _require(raw, "n_grid", where))
    if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError(f"{where}: n_grid must be nonempty and ascending")

    sigma_sq = float(raw.get("sigma_sq", 0.0))
    if sigma_sq < 0.0:
        raise ConfigError(f"{where}: sigma_sq must be >= 0")

    mc_tab = raw.get("mc")
    if model.startswith("mc-"):
        if mc_tab is None:
            raise ConfigError(f"{where}: mc-* models need an [mc] block")
        reps = int(_require(mc_tab, "reps", f"{where}:[mc]"))
        feats = int(mc_tab.get("P", DEFAULT_TRUNCATION))
        seed = int(mc_tab.get("seed", 0))
    elif mc_tab is not None:
        raise ConfigError(f"{where}: [mc] block is only valid for mc-* models")
    else:
        reps, feats, seed = None, None, int(raw.get("seed", 0))

    outputs = raw.get("outputs", {})
    flags = raw.get("flags", {})
    cfg = ExperimentConfig(
        model=model,
        spectrum=spectrum,
        profile_text=str(_require(raw, "profile", where)),
        sigma_sq=sigma_sq,
        n_grid=n_grid,
        mc_reps=reps,
        mc_features=feats,
        seed=seed if not model.startswith("mc-") else int(mc_tab.get("seed", 0)),
        out_csv=outputs.get("csv"),
        out_json=outputs.get("json"),
        offdiag=flags.get("offdiag"),
        asymptotic_overlay=bool(flags.get("asymptotic_overlay", False)),
    )
    # parse once for validation (auto parameters use a placeholder N)
    resolve_profile(cfg, n_samples=max(cfg.n_grid))
    return cfg


# ----------------------------------------------------------------------------
# profiles with auto-scaled parameters


def auto_scale_parameter(profile_kind: str, nu: float, kappa: float,
                         n_samples: int) -> float:
    """Optimal-rate parameter: eta = N^(-nu/(kappa+1)) (or N^(-nu/(2nu+1))
    once kappa > 2 nu saturates KRR) and t = N^(nu/(kappa+1)); unit constants."""
    n = float(n_samples)
    if profile_kind == "krr":
        if kappa > 2.0 * nu:
            return n ** (-nu / (2.0 * nu + 1.0))
        return n ** (-nu / (kappa + 1.0))
    if profile_kind == "gf":
        return n ** (nu / (kappa + 1.0))
    raise ConfigError(f"no auto scaling for profile kind {profile_kind!r}")


def resolve_profile(cfg: ExperimentConfig, n_samples: int) -> SpectralProfile:
    text = cfg.profile_text.strip()
    if text.startswith("krr:") and "eta=auto" in text:
        return Krr(eta=auto_scale_parameter("krr", cfg.spectrum.nu, cfg.spectrum.kappa, n_samples))
    if text.startswith("gf:") and "t=auto" in text:
        return GradientFlow(t=auto_scale_parameter("gf", cfg.spectrum.nu, cfg.spectrum.kappa, n_samples))
    try:
        return parse_profile(text)
    except SpectralRiskError as exc:
        raise ConfigError(f"bad profile {text!r}: {exc}") from exc


# ----------------------------------------------------------------------------
# sweeps


@dataclass
class SweepRow:
    n_samples: int
    total: float | None = None
    bias: float | None = None
    var_dataset: float | None = None
    var_noise: float | None = None
    stderr: float | None = None
    slope_local: float | None = None
    error: str | None = None


def _row_seed(cfg: ExperimentConfig, n_samples: int) -> int:
    seq = np.random.SeedSequence(cfg.seed, spawn_key=(int(n_samples),))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _evaluate_row(cfg: ExperimentConfig, n_samples: int) -> SweepRow:
    profile = resolve_profile(cfg, n_samples)
    spec = cfg.spectrum
    if cfg.model == "circle":
        out = circle.exact_loss(spec, n_samples, cfg.sigma_sq, profile)
    elif cfg.model == "nmno":
        out = nmno.nmno_loss(spec, n_samples, cfg.sigma_sq, profile)
    elif cfg.model == "wishart":
        out = wishart.loss_functional(
            spec, n_samples, cfg.sigma_sq, profile, include_offdiag=cfg.offdiag
        )
    else:
        model = cfg.model.removeprefix("mc-")
        est = mc.mc_expected_loss(
            model, spec, profile, cfg.sigma_sq, n_samples,
            cfg.mc_features, cfg.mc_reps, _row_seed(cfg, n_samples),
        )
        return SweepRow(n_samples=n_samples, total=est.mean, stderr=est.stderr)
    return SweepRow(
        n_samples=n_samples, total=out.total, bias=out.bias,
        var_dataset=out.variance_dataset, var_noise=out.variance_noise,
    )


def _fill_local_slopes(rows: list) -> None:
    good = [r for r in rows if r.error is None and r.total and r.total > 0]
    if len(good) < 2:
        return
    logs = {r.n_samples: math.log(r.total) for r in good}
    ns = sorted(logs)
    for r in good:
        i = ns.index(r.n_samples)
        lo, hi = max(i - 1, 0), min(i + 1, len(ns) - 1)
        if hi > lo:
            r.slope_local = (logs[ns[hi]] - logs[ns[lo]]) / (
                math.log(ns[hi]) - math.log(ns[lo])
            )


def run_sweep(cfg: ExperimentConfig, jobs: int = 1):
    """One row per N plus a summary (fit slope, optional asymptotic overlay)."""
    rows = [SweepRow(n_samples=n) for n in cfg.n_grid]

    def work(i: int):
        try:
            rows[i] = _evaluate_row(cfg, cfg.n_grid[i])
        except SpectralRiskError as exc:
            log.error("row N=%d failed: %s", cfg.n_grid[i], exc)
            rows[i] = SweepRow(n_samples=cfg.n_grid[i], error=str(exc))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(work, range(len(rows))))
    else:
        for i in range(len(rows)):
            work(i)
    _fill_local_slopes(rows)

    summary = {"model": cfg.model, "profile": cfg.profile_text,
               "sigma_sq": cfg.sigma_sq, "errors": [
                   {"N": r.n_samples, "message": r.error} for r in rows if r.error
               ]}
    good = [r for r in rows if r.error is None and r.total and r.total > 0]
    top = good[len(good) // 2:]
    if len(top) >= 2:
        xs = np.log([r.n_samples for r in top])
        ys = np.log([r.total for r in top])
        summary["fit_slope_top_half"] = float(np.polyfit(xs, ys, 1)[0])
    if cfg.asymptotic_overlay:
        summary["asymptotic"] = _asymptotic_overlay(cfg)
    return rows, summary


def _asymptotic_overlay(cfg: ExperimentConfig) -> dict:
    nu, kappa = cfg.spectrum.nu, cfg.spectrum.kappa
    kind = cfg.profile_text.split(":", 1)[0]
    out: dict = {}
    if cfg.sigma_sq > 0.0:
        saturated = kind == "krr" and kappa > 2.0 * nu
        out["rate"] = (2.0 * nu / (2.0 * nu + 1.0)) if saturated else kappa / (kappa + 1.0)
        if kind in ("krr", "gf"):
            phase = "saturated" if saturated else "nonsaturated"
            out["constant"] = nmno.nmno_limit_constant(
                kind, 1.0, nu, kappa, cfg.sigma_sq, phase,
                cfg.spectrum if saturated else None,
            )
    else:
        saturated = kappa > 2.0 * nu
        out["rate"] = 2.0 * nu if saturated else kappa
        if cfg.model == "circle" and not saturated:
            out["constant"] = circle.noiseless_limit_loss_nonsaturated(None, nu, kappa)
        elif cfg.model == "circle" and kind == "krr":
            out["constant"] = circle.saturated_krr_loss_closed_form(
                cfg.spectrum, 1, circle.saturated_optimal_eta(nu, 1)
            )
    return out


def emit_rows(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([
            str(r.n_samples), _fmt(r.total), _fmt(r.bias), _fmt(r.var_dataset),
            _fmt(r.var_noise), _fmt(r.stderr), _fmt(r.slope_local),
        ])
    return buf.getvalue()


def parse_rows(text: str):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_HEADER:
        raise ConfigError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        vals = [None if v == "" else float(v) for v in rec[1:]]
        rows.append(SweepRow(int(rec[0]), *vals))
    return rows


def compare_models(cfg_a: ExperimentConfig, cfg_b: ExperimentConfig, jobs: int = 1):
    """Per-N relative gap |L_A/L_B - 1| with a monotonicity flag."""
    if cfg_a.n_grid != cfg_b.n_grid:
        raise ConfigError("compared configs must share the n_grid")
    rows_a, _ = run_sweep(cfg_a, jobs=jobs)
    rows_b, _ = run_sweep(cfg_b, jobs=jobs)
    gaps = []
    for ra, rb in zip(rows_a, rows_b):
        gap = None
        if ra.error is None and rb.error is None and rb.total:
            gap = abs(ra.total / rb.total - 1.0)
        gaps.append({"N": ra.n_samples, "loss_a": ra.total, "loss_b": rb.total,
                     "rel_gap": gap})
    clean = [g["rel_gap"] for g in gaps if g["rel_gap"] is not None]
    monotone = all(b < a for a, b in zip(clean, clean[1:])) if len(clean) > 1 else False
    return gaps, {"monotone_decreasing": monotone,
                  "final_gap": clean[-1] if clean else None}


# ----------------------------------------------------------------------------
# optimal-profile and scaling dumps


def optimal_profile_table(cfg: ExperimentConfig, n_samples: int):
    """(lambda, h*) pairs for the configured model."""
    spec, sigma_sq = cfg.spectrum, cfg.sigma_sq
    if cfg.model == "circle":
        ks = range(n_samples // 2 + 1)
        lam = [circle.n_deformation(spec, n_samples, k, 1.0, 0.0) for k in ks]
        h = [circle.optimal_profile_value(spec, n_samples, sigma_sq, k) for k in ks]
        return sorted(zip(lam, h))
    if cfg.model == "nmno":
        lam = spec.leading_eigenvalues(n_samples)
        h = [nmno.nmno_optimal_profile(spec, n_samples, sigma_sq, l) for l in lam]
        return sorted(zip(lam.tolist(), h))
    if cfg.model == "wishart":
        sol = wishart.build_stieltjes_solution(spec, n_samples)
        meas = wishart.learning_measures(sol)
        denom = meas.rho2_diag + sigma_sq * meas.rho_eps / n_samples
        h = np.where(denom > 0, meas.rho1 / np.where(denom > 0, denom, 1.0), 0.0)
        return list(zip(meas.lam.tolist(), h.tolist()))
    raise ConfigError(f"no optimal-profile table for model {cfg.model!r}")


def scaling_report(cfg: ExperimentConfig, parameter_scale: float | None):
    kind = cfg.profile_text.split(":", 1)[0]
    nu, kappa = cfg.spectrum.nu, cfg.spectrum.kappa
    if parameter_scale is None:
        if kind == "krr":
            parameter_scale = (
                nu / (2.0 * nu + 1.0) if kappa > 2.0 * nu else nu / (kappa + 1.0)
            )
        else:
            parameter_scale = -nu / (kappa + 1.0)
    rep = nmno_scaling(
        scaling_profile_of(kind, parameter_scale, "h", nu),
        scaling_profile_of(kind, parameter_scale, "one_minus_h", nu),
        nu, kappa,
    )
    return {
        "loss_scale": rep.loss_scale,
        "localization": list(rep.localization_scales),
        "saturated": rep.saturated,
        "optimal": rep.optimal,
        "parameter_scale": parameter_scale,
    }


# ----------------------------------------------------------------------------
# entry point


def _write_or_print(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    level = os.environ.get("SPECTRAL_RISK_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")

    parser = argparse.ArgumentParser(prog="spectral-risk", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="TOML or JSON experiment file")
        p.add_argument("--out", help="output path (overrides [outputs] csv)")
        p.add_argument("--jobs", type=int, default=1, help="parallel rows")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--offdiag", choices=("on", "off"),
                       help="override the off-diagonal flag (wishart)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p_sweep = sub.add_parser("sweep", help="loss curve over the N grid")
    add_common(p_sweep)

    p_cmp = sub.add_parser("compare", help="relative gap between two configs")
    add_common(p_cmp)
    p_cmp.add_argument("--against", required=True, help="second config file")

    p_opt = sub.add_parser("optimal-profile", help="dump the h*(lambda) table")
    add_common(p_opt)
    p_opt.add_argument("--n", type=int, help="sample count (default: n_grid max)")

    p_scal = sub.add_parser("scaling", help="RateReport for the declared profile")
    add_common(p_scal)
    p_scal.add_argument("--scale", type=float,
                        help="parameter scale (default: the optimal-rate scale)")

    p_gf = sub.add_parser("pairgf-demo", help="pair-of-flows KRR realization")
    p_gf.add_argument("--eta", type=float, default=1.0)
    p_gf.add_argument("--horizon", type=float)
    p_gf.add_argument("--step", type=float, default=1e-3)
    p_gf.add_argument("--out")

    args = parser.parse_args(argv)

    if args.command == "pairgf-demo":
        from .profiles import PairGFRun, pair_gf_simulate

        horizon = args.horizon if args.horizon else 50.0 / abs(args.eta)
        grid = tuple(np.logspace(-2, 0, 25))
        run = PairGFRun(eta=args.eta, lambda_grid=grid, horizon=horizon, step=args.step)
        q = pair_gf_simulate(run)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["lambda", "q", "target", "abs_err"])
        for lam in grid:
            target = args.eta / (lam + args.eta)
            writer.writerow([_fmt(lam), _fmt(q[lam]), _fmt(target),
                             _fmt(abs(q[lam] - target))])
        _write_or_print(buf.getvalue(), args.out)
        return 0

    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError, ValueError) as exc:
        log.error("%s", exc)
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    if args.offdiag is not None:
        cfg.offdiag = args.offdiag == "on"
    out_path = args.out or cfg.out_csv

    if args.command == "sweep":
        rows, summary = run_sweep(cfg, jobs=args.jobs)
        if args.format == "json":
            payload = {"rows": [r.__dict__ for r in rows], "summary": summary}
            _write_or_print(json.dumps(payload, indent=2, sort_keys=True) + "\n", out_path)
        else:
            _write_or_print(emit_rows(rows), out_path)
        summary_text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
        if cfg.out_json:
            Path(cfg.out_json).write_text(summary_text, encoding="utf-8")
        elif out_path:
            sys.stdout.write(summary_text)
        return 0 if not summary["errors"] else 1

    if args.command == "compare":
        try:
            cfg_b = load_config(args.against)
        except (ConfigError, OSError, ValueError) as exc:
            sys.stderr.write(f"config error: {exc}\n")
            return 2
        gaps, summary = compare_models(cfg, cfg_b, jobs=args.jobs)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["N", "loss_a", "loss_b", "rel_gap"])
        for g in gaps:
            writer.writerow([g["N"], _fmt(g["loss_a"]), _fmt(g["loss_b"]),
                             _fmt(g["rel_gap"])])
        _write_or_print(buf.getvalue(), out_path)
        sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        return 0 if all(g["rel_gap"] is not None for g in gaps) else 1

    if args.command == "optimal-profile":
        n_samples = args.n or max(cfg.n_grid)
        table = optimal_profile_table(cfg, n_samples)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["lambda", "h_star"])
        for lam, h in table:
            writer.writerow([_fmt(lam), _fmt(h)])
        _write_or_print(buf.getvalue(), out_path)
        return 0

    if args.command == "scaling":
        report = scaling_report(cfg, args.scale)
        _write_or_print(json.dumps(report, indent=2, sort_keys=True) + "\n", out_path)
        return 0

    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
