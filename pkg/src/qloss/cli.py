"""Batch command-line front end.

Subcommands:
    fit-resonator   fit notch traces (CSV or .s2p) to quality factors
    fit-tls         fit power sweeps to the saturable TLS loss model
    qubit-report    screen a qubit dataset and report quality-factor budgets
    simulate        run the cross-section participation solver or its sweeps
    synthesize      generate deterministic fixture data with ground truth

Every command writes a run_manifest.json recording input hashes, stage
timings and emitted artifacts; outputs are deterministic given (inputs,
config, seed).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__, plots
from .config import ProjectConfig
from .dataset import load_qubits
from .io import read_decay_csv, read_trace, write_csv, write_json, write_trace_csv
from .manifest import RunManifest
from .qubit import (
    DecayTrace,
    fit_t1,
    loss_budget,
    screen_qubit,
    summarize_quality_factors,
)
from .resfit import FitError, NotchModelParams, fit_resonator, synthesize_notch
from .tls import (
    ResonatorSweepRecord,
    aggregate_by_thickness,
    dbm_to_device_watts,
    delta0_spectrum,
    fit_tls,
    photon_number,
    synthesize_sweep,
)
from .types import PowerSweepPoint, ResonatorFitResult, TlsFitResult, ValidationError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qloss",
        description="Loss analysis for superconducting resonators and qubits.",
    )
    parser.add_argument("--version", action="version", version=f"qloss {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="TOML or JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config random seed")
        p.add_argument("--out", type=Path, default=Path("out"),
                       help="output directory")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel workers for independent inputs")

    p = sub.add_parser("fit-resonator", help="fit notch-type S21 traces")
    p.add_argument("inputs", nargs="+", type=Path,
                   help="trace files or directories of traces")
    common(p)

    p = sub.add_parser("fit-tls", help="fit a power-sweep manifest to the TLS model")
    p.add_argument("manifest", type=Path, help="sweep manifest CSV")
    common(p)

    p = sub.add_parser("qubit-report", help="screen qubits and report Q budgets")
    p.add_argument("dataset", type=Path, nargs="?", default=None,
                   help="qubit CSV (defaults to the bundled reference set)")
    p.add_argument("--t1-traces", type=Path, default=None,
                   help="optional directory of decay CSVs to fit and summarize")
    common(p)

    p = sub.add_parser("simulate", help="participation-ratio simulations")
    p.add_argument("--sweep", choices=("none", "sm", "metal"), default="none")
    p.add_argument("--values", type=str, default=None,
                   help="comma-separated sweep thicknesses in nm")
    common(p)

    p = sub.add_parser("synthesize", help="generate fixture data with ground truth")
    p.add_argument("--spec", type=Path, required=True, help="fixture spec JSON")
    common(p)
    return parser


def _resolve_config(args) -> ProjectConfig:
    overrides: Dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    return ProjectConfig.load(args.config, overrides=overrides)


def _expand_inputs(inputs: List[Path]) -> List[Path]:
    files: List[Path] = []
    for item in inputs:
        if item.is_dir():
            files.extend(sorted(p for p in item.iterdir()
                                if p.suffix.lower() in (".csv", ".s2p")))
        else:
            files.append(item)
    return files


def _fit_one_trace(path_str: str) -> Dict:
    try:
        trace = read_trace(path_str)
        result = fit_resonator(trace)
        return {"file": path_str, "ok": True, "fit": result.as_dict()}
    except (FitError, ValidationError, OSError) as exc:
        return {"file": path_str, "ok": False, "error": str(exc)}


def cmd_fit_resonator(args) -> int:
    cfg = _resolve_config(args)
    manifest = RunManifest("fit-resonator", cfg.hash())
    files = _expand_inputs(args.inputs)
    if not files:
        print("no input traces found", file=sys.stderr)
        return 1
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    for f in files:
        if f.exists():
            manifest.add_input(f)

    with manifest.stage("fit"):
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                reports = list(pool.map(_fit_one_trace, [str(f) for f in files]))
        else:
            reports = [_fit_one_trace(str(f)) for f in files]

    n_err = 0
    with manifest.stage("emit"):
        for f, rep in zip(files, reports):
            if not rep["ok"]:
                n_err += 1
                print(f"ERROR {f}: {rep['error']}", file=sys.stderr)
                continue
            fit = ResonatorFitResult(**{k: v for k, v in rep["fit"].items()})
            json_path = out / f"{f.stem}_fit.json"
            write_json(json_path, rep["fit"])
            manifest.add_artifact(json_path)
            svg_path = out / f"{f.stem}_fit.svg"
            plots.plot_resonator_fit(read_trace(str(f)), fit, svg_path)
            manifest.add_artifact(svg_path)
            print(f"{f.name}: fr={fit.fr/1e9:.6f} GHz Qi={fit.qi:.4g} "
                  f"Ql={fit.ql:.4g} |Qc|={fit.qc_mag:.4g}")
    manifest.write(out / "run_manifest.json")
    return 1 if n_err else 0


def _read_sweep_manifest(path: Path, cfg: ProjectConfig) -> List[ResonatorSweepRecord]:
    import csv as _csv

    ctx = cfg.calibration()
    rows = []
    with open(path, newline="") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames is None or "applied_power_dbm" not in reader.fieldnames:
            raise ValidationError(f"{path}: sweep manifest needs an applied_power_dbm column")
        inline = "qi" in reader.fieldnames
        has_file = "trace_file" in (reader.fieldnames or [])
        if not inline and not has_file:
            raise ValidationError(f"{path}: need either trace_file or inline fr_hz/ql/qc_mag/qi columns")
        for i, row in enumerate(reader, start=2):
            rows.append((i, row))

    groups: Dict[str, List] = {}
    thickness: Dict[str, float] = {}
    for line, row in rows:
        label = (row.get("label") or "r0").strip()
        thickness[label] = float(row.get("film_thickness") or 0.0)
        if row.get("trace_file"):
            trace_path = path.parent / row["trace_file"]
            fit = fit_resonator(read_trace(trace_path))
        else:
            try:
                fit = ResonatorFitResult.from_quality_factors(
                    fr=float(row["fr_hz"]), ql=float(row["ql"]),
                    qc_mag=float(row["qc_mag"]), qi=float(row["qi"]),
                    uncertainties={"qi": float(row["qi_err"])} if row.get("qi_err") else None,
                )
            except (KeyError, ValueError, ValidationError) as exc:
                raise ValidationError(f"{path}:{line}: {exc}") from exc
        p_dbm = float(row["applied_power_dbm"])
        p_in = dbm_to_device_watts(p_dbm, ctx.total_attenuation)
        qc_eff = fit.qc_mag
        if cfg.photon_qc_convention == "diameter_corrected":
            qc_eff = fit.qc_mag / math.cos(fit.phi)
        n = photon_number(p_in, fit.fr, fit.ql, qc_eff, ctx)
        groups.setdefault(label, []).append(PowerSweepPoint(fit=fit, n_photons=n, p_in=p_in))

    records = []
    for label in sorted(groups):
        points = sorted(groups[label], key=lambda p: p.n_photons)
        records.append(ResonatorSweepRecord(
            film_thickness=thickness[label], points=points, label=label))
    return records


def cmd_fit_tls(args) -> int:
    cfg = _resolve_config(args)
    manifest = RunManifest("fit-tls", cfg.hash())
    manifest.add_input(args.manifest)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    ctx = cfg.calibration()

    with manifest.stage("ingest"):
        records = _read_sweep_manifest(args.manifest, cfg)
    n_err = 0
    fitted: List[ResonatorSweepRecord] = []
    with manifest.stage("fit"):
        for rec in records:
            try:
                rec.tls_fit = fit_tls(rec, rec.fr, ctx.temperature)
                fitted.append(rec)
                print(f"{rec.label}: F*delta0_tls={rec.tls_fit.f_delta_tls:.4g} "
                      f"n_c={rec.tls_fit.n_c:.4g} beta={rec.tls_fit.beta:.3f} "
                      f"delta0={rec.tls_fit.delta0:.4g}")
            except (FitError, ValidationError) as exc:
                n_err += 1
                print(f"ERROR {rec.label}: {exc}", file=sys.stderr)

    if fitted:
        with manifest.stage("emit"):
            payload = {rec.label: rec.tls_fit.as_dict() for rec in fitted}
            write_json(out / "tls_fits.json", payload)
            manifest.add_artifact(out / "tls_fits.json")

            rows = []
            for rec in fitted:
                for p in rec.points:
                    rows.append((rec.label, rec.film_thickness, p.n_photons,
                                 p.fit.qi, p.p_in))
            write_csv(out / "qi_vs_n.csv",
                      ["label", "film_thickness", "n_photons", "qi", "p_in_w"], rows)
            manifest.add_artifact(out / "qi_vs_n.csv")
            plots.plot_qi_vs_photons(fitted, out / "qi_vs_n.svg")
            manifest.add_artifact(out / "qi_vs_n.svg")

            if any(rec.film_thickness > 0 for rec in fitted):
                summaries, series = aggregate_by_thickness(fitted)
                write_csv(out / "summary_by_thickness.csv",
                          ["film_thickness", "n", "f_delta_tls_mean", "f_delta_tls_std",
                           "delta0_mean", "delta0_std"],
                          [(s.film_thickness, s.n, s.f_delta_tls_mean, s.f_delta_tls_std,
                            s.delta0_mean, s.delta0_std) for s in summaries])
                manifest.add_artifact(out / "summary_by_thickness.csv")
                write_csv(out / "fdtls_vs_frequency.csv",
                          ["label", "film_thickness", "fr_hz", "f_delta_tls", "delta0"],
                          [(r["label"], r["film_thickness"], r["fr"],
                            r["f_delta_tls"], r["delta0"]) for r in series])
                manifest.add_artifact(out / "fdtls_vs_frequency.csv")
                plots.plot_fdtls_vs_frequency(series, summaries, out / "fdtls_vs_frequency.svg")
                manifest.add_artifact(out / "fdtls_vs_frequency.svg")
                spectrum = delta0_spectrum(fitted)
                plots.plot_delta0_spectrum(spectrum, out / "delta0_spectrum.svg")
                manifest.add_artifact(out / "delta0_spectrum.svg")
    manifest.write(out / "run_manifest.json")
    return 1 if n_err else 0


def cmd_qubit_report(args) -> int:
    cfg = _resolve_config(args)
    manifest = RunManifest("qubit-report", cfg.hash())
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)

    with manifest.stage("ingest"):
        if args.dataset is not None:
            manifest.add_input(args.dataset)
            records = load_qubits(args.dataset)
        else:
            records = load_qubits()

    with manifest.stage("analyze"):
        screening = []
        budgets = {}
        for rec in records:
            included, reason = screen_qubit(rec)
            screening.append({"label": rec.label, "included": included, "reason": reason})
            if included:
                budgets[rec.label] = loss_budget(rec).as_dict()
        scatter, means = summarize_quality_factors(records)

    with manifest.stage("emit"):
        report = {
            "n_records": len(records),
            "n_included": sum(1 for s in screening if s["included"]),
            "screening": screening,
            "budgets": budgets,
            "group_means": {k: v.as_dict() for k, v in means.items()},
        }
        write_json(out / "qubit_report.json", report)
        manifest.add_artifact(out / "qubit_report.json")
        write_csv(out / "qubit_scatter.csv",
                  ["label", "film_thickness", "t1_over_tp", "q", "q_tls"],
                  [(r["label"], r["film_thickness"], r["t1_over_tp"], r["q"], r["q_tls"])
                   for r in scatter])
        manifest.add_artifact(out / "qubit_scatter.csv")
        plots.plot_qubit_scatter(scatter, out / "qubit_scatter.svg")
        manifest.add_artifact(out / "qubit_scatter.svg")
        for key, m in means.items():
            mid = f"{m.q_mean_half:.3g}" if m.q_mean_half else "-"
            print(f"{key}: n={m.n_all} meanQ={m.q_mean_all:.3g} "
                  f"(T1<=0.5Tp: {mid}, n={m.n_half})")

    n_err = 0
    if args.t1_traces is not None:
        with manifest.stage("t1"):
            t1s = []
            for f in sorted(Path(args.t1_traces).glob("*.csv")):
                manifest.add_input(f)
                try:
                    delays, pops = read_decay_csv(f)
                    t1, _, _, _ = fit_t1(DecayTrace(delays, pops))
                    t1s.append({"file": f.name, "t1_s": t1})
                except (FitError, ValidationError) as exc:
                    n_err += 1
                    print(f"ERROR {f}: {exc}", file=sys.stderr)
            if t1s:
                from .qubit import t1_statistics
                mean, std, (counts, edges) = t1_statistics([r["t1_s"] for r in t1s])
                write_json(out / "t1_series.json",
                           {"fits": t1s, "mean_s": mean, "std_s": std})
                manifest.add_artifact(out / "t1_series.json")
                plots.plot_t1_histogram(counts, edges, out / "t1_histogram.svg")
                manifest.add_artifact(out / "t1_histogram.svg")
    manifest.write(out / "run_manifest.json")
    return 1 if n_err else 0


def cmd_simulate(args) -> int:
    from .fem import (
        q_tls_from_participation,
        solve_cross_section,
        sweep_metal_thickness,
        sweep_sm_thickness,
    )

    cfg = _resolve_config(args)
    manifest = RunManifest("simulate", cfg.hash())
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    geom = cfg.geometry()
    mats = cfg.materials()
    tol = cfg.solver_tolerance
    max_level = cfg.solver_max_level

    def emit_result(name: str, res) -> None:
        write_json(out / f"{name}.json", res.as_dict())
        manifest.add_artifact(out / f"{name}.json")

    try:
        if args.sweep == "none":
            with manifest.stage("solve"):
                res = solve_cross_section(geom, mats, tol=tol, max_level=max_level)
            emit_result("participation", res)
            print("participations:", {k: f"{v:.4g}" for k, v in res.p.items()})
            print(f"q_tls = {res.q_tls:.4g}" if res.q_tls else "q_tls unbounded (lossless)")
            print(f"converged at level {res.mesh_stats.refinement_level} "
                  f"(max change {res.mesh_stats.max_rel_change:.2%}, "
                  f"{res.mesh_stats.n_elements} elements)")
        elif args.sweep == "sm":
            values = _parse_values_nm(args.values, default=[0.4, 0.8, 1.2, 1.6, 2.0])
            with manifest.stage("sweep"):
                sweep = sweep_sm_thickness(geom, mats, values, tol=tol, max_level=max_level)
            rows = [(t * 1e9, *[r.p[k] for k in ("substrate", "air", "sm", "ma", "sa", "corner")],
                     r.q_tls) for t, r in zip(sweep.t_values, sweep.results)]
            write_csv(out / "sm_sweep.csv",
                      ["t_sm_nm", "p_substrate", "p_air", "p_sm", "p_ma", "p_sa",
                       "p_corner", "q_tls"], rows)
            manifest.add_artifact(out / "sm_sweep.csv")
            write_json(out / "sm_sweep_fit.json", {
                "sm_fit": sweep.sm_fit.as_dict(),
                "corner_coeffs": list(sweep.corner_coeffs),
                "crossover_t_ma_m": sweep.crossover_t_ma,
                "crossover_t_sa_m": sweep.crossover_t_sa,
            })
            manifest.add_artifact(out / "sm_sweep_fit.json")
            plots.plot_sm_sweep(sweep, out / "sm_sweep.svg")
            manifest.add_artifact(out / "sm_sweep.svg")
            print(f"p_sm linear fit R^2 = {sweep.sm_fit.r_squared:.6f}; "
                  f"equal-loss crossover vs MA at {sweep.crossover_t_ma*1e9:.3f} nm")
        else:
            values = _parse_values_nm(args.values, default=[50, 150, 300, 500])
            with manifest.stage("sweep"):
                sweep = sweep_metal_thickness(geom, mats, values, tol=tol, max_level=max_level)
            rows = [(t * 1e9, *[r.p[k] for k in ("substrate", "air", "sm", "ma", "sa", "corner")],
                     r.q_tls) for t, r in zip(sweep.t_values, sweep.results)]
            write_csv(out / "metal_sweep.csv",
                      ["t_metal_nm", "p_substrate", "p_air", "p_sm", "p_ma", "p_sa",
                       "p_corner", "q_tls"], rows)
            manifest.add_artifact(out / "metal_sweep.csv")
            plots.plot_metal_sweep(sweep, out / "metal_sweep.svg")
            manifest.add_artifact(out / "metal_sweep.svg")
            q = sweep.q_series()
            print(f"q_tls varies {100*(q.max()-q.min())/q.max():.1f}% over the sweep")
    except Exception as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        manifest.write(out / "run_manifest.json")
        return 1
    manifest.write(out / "run_manifest.json")
    return 0


def _parse_values_nm(text: Optional[str], default: List[float]) -> List[float]:
    if text is None:
        values = default
    else:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    return [v * 1e-9 for v in values]


def cmd_synthesize(args) -> int:
    cfg = _resolve_config(args)
    manifest = RunManifest("synthesize", cfg.hash())
    manifest.add_input(args.spec)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    spec = json.loads(Path(args.spec).read_text())
    seed = cfg.seed
    truth: Dict[str, Dict] = {"notch_traces": {}, "tls_sweeps": {}, "decay_traces": {}}

    with manifest.stage("generate"):
        for i in range(int(spec.get("notch_traces", {}).get("count", 0))):
            s = spec["notch_traces"]
            params = NotchModelParams(
                fr=s.get("fr_ghz", 4.45) * 1e9,
                ql=1.0 / (1.0 / s.get("qi", 1e6)
                          + math.cos(s.get("phi", 0.0)) / s.get("qc_mag", 2e5)),
                qc_mag=s.get("qc_mag", 2e5),
                phi=s.get("phi", 0.0),
                a=s.get("a", 1.0),
                alpha=s.get("alpha", 0.0),
                tau=s.get("tau_ns", 40.0) * 1e-9,
            )
            lw = params.fr / params.ql
            half = 0.5 * s.get("span_linewidths", 12) * lw
            freqs = np.linspace(params.fr - half, params.fr + half,
                                int(s.get("n_points", 501)))
            trace = synthesize_notch(params, freqs, s.get("noise_sigma", 1e-3),
                                     seed=seed + i)
            name = f"notch_{i:03d}.csv"
            write_trace_csv(out / name, trace)
            manifest.add_artifact(out / name)
            truth["notch_traces"][name] = {
                "fr": params.fr, "ql": params.ql, "qc_mag": params.qc_mag,
                "phi": params.phi, "qi": params.qi, "a": params.a,
                "alpha": params.alpha, "tau": params.tau, "seed": seed + i,
            }

        for i in range(int(spec.get("tls_sweeps", {}).get("count", 0))):
            s = spec["tls_sweeps"]
            fr = s.get("fr_ghz", 4.45) * 1e9
            params = TlsFitResult(
                f_delta_tls=s.get("f_delta_tls", 1e-6),
                n_c=s.get("n_c", 10.0), beta=s.get("beta", 0.3),
                delta0=s.get("delta0", 2e-7),
                temperature=s.get("temperature_k", 0.01),
            )
            n_values = np.geomspace(s.get("n_min", 1.0), s.get("n_max", 1e7),
                                    int(s.get("n_points", 25)))
            rec = synthesize_sweep(params, fr, n_values,
                                   noise_rel=s.get("noise_rel", 0.02),
                                   seed=seed + 1000 + i,
                                   film_thickness=s.get("film_thickness", 150.0),
                                   label=f"sweep_{i:03d}")
            name = f"tls_sweep_{i:03d}.csv"
            att = cfg.calibration().total_attenuation
            rows = [(rec.label, rec.film_thickness,
                     10.0 * math.log10(p.p_in) + 30.0 + att,
                     p.fit.fr, p.fit.ql, p.fit.qc_mag, p.fit.qi,
                     p.fit.uncertainties.get("qi")) for p in rec.points]
            write_csv(out / name,
                      ["label", "film_thickness", "applied_power_dbm", "fr_hz",
                       "ql", "qc_mag", "qi", "qi_err"], rows)
            manifest.add_artifact(out / name)
            truth["tls_sweeps"][name] = {**params.as_dict(), "fr": fr,
                                         "seed": seed + 1000 + i}

        for i in range(int(spec.get("decay_traces", {}).get("count", 0))):
            s = spec["decay_traces"]
            rng = np.random.default_rng(seed + 2000 + i)
            t1 = s.get("t1_us", 501.0) * 1e-6
            delays = np.linspace(0.0, s.get("span_us", 1500.0) * 1e-6,
                                 int(s.get("n_points", 30)))
            pop = (s.get("amplitude", 1.0) * np.exp(-delays / t1)
                   + s.get("offset", 0.0)
                   + rng.normal(0.0, s.get("noise", 0.01), delays.size))
            name = f"decay_{i:03d}.csv"
            rows = list(zip(delays, np.clip(pop, -0.2, 1.2)))
            write_csv(out / name, ["delay_s", "population"], rows)
            manifest.add_artifact(out / name)
            truth["decay_traces"][name] = {"t1_s": t1, "seed": seed + 2000 + i}

    write_json(out / "truth.json", truth)
    manifest.add_artifact(out / "truth.json")
    manifest.write(out / "run_manifest.json")
    return 0


_COMMANDS = {
    "fit-resonator": cmd_fit_resonator,
    "fit-tls": cmd_fit_tls,
    "qubit-report": cmd_qubit_report,
    "simulate": cmd_simulate,
    "synthesize": cmd_synthesize,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
