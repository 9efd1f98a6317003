"""Command line: deterministic runs producing JSON records, CSV series,
and rendered figures, with an exit code tied to declared tolerances."""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict
from math import lcm
from pathlib import Path

import numpy as np

from .conductance import (SpectralCache, bulk_spin_conductance,
                          bulk_torque_trail, default_density, default_switch,
                          drift_conductance, exp_decay_fit, strip_distances,
                          torque_conductance, verify_bic)
from .config import (COMMANDS, MODEL_PRESETS, ConfigError, RunConfig,
                     SwitchSettings, config_from_dict, config_hash,
                     load_config)
from .geometry import SwitchProfile
from .models import (bloch_gap, chern_number, realize_junction,
                     spin_chern_numbers, time_reversal_defect)
from .operators import PvTraceTrail
from .reporting import (ReportError, RunRecord, Series, emit_plot_data,
                        make_check, plain, render_figures, save_record)


def _switch(settings: SwitchSettings, direction: int) -> SwitchProfile:
    return default_switch(direction, kind=settings.kind,
                          ramp_width=settings.ramp_width,
                          smooth_order=settings.smooth_order)


def _density(cfg: RunConfig, models):
    return default_density(models, margin=cfg.density.margin,
                           smooth_order=cfg.density.smooth_order,
                           nk=cfg.density.nk)


def _quadrature_opts(cfg: RunConfig) -> dict:
    c = cfg.calculus
    return {"taylor_order": c.taylor_order, "z_min": c.z_min,
            "gl_order": c.gl_order, "y_scale": c.y_scale}


def _trail_series(label: str, trail: PvTraceTrail) -> Series:
    rows = [[int(n + 1), float(np.real(s))]
            for n, s in enumerate(trail.partial_sums)]
    return Series(kind="pv_trail", label=label, rows=rows)


def _strip_series(label: str, trail: PvTraceTrail) -> Series:
    rows = [[int(n), float(abs(v))]
            for n, v in zip(trail.strip_ns, trail.strip_values)]
    return Series(kind="strip_torque_profile", label=label, rows=rows)


def _try_decay_fit(trail: PvTraceTrail):
    try:
        return exp_decay_fit(strip_distances(trail), trail.strip_values)
    except ValueError:
        return None  # conserving samples: every strip trace is zero


def _bic_results(rep) -> dict:
    return {"extent": list(rep.extent), "conserving": rep.conserving,
            "sigma_plus": rep.sigma_plus.value,
            "sigma_minus": rep.sigma_minus.value,
            "drift": rep.drift.value,
            "drift_imag_defect": rep.drift.imag_defect,
            "torque": rep.torque.value,
            "bulk_difference": rep.bulk_difference,
            "interface_total": rep.interface_total,
            "residual": rep.residual}


def _run_verify_bic(cfg: RunConfig):
    left, right = cfg.left_model.build(), cfg.right_model.build()
    rep = verify_bic(left, right, cfg.extent,
                     junction=cfg.junction.kwargs(cfg.seed),
                     density=_density(cfg, [left, right]),
                     switch1=_switch(cfg.switch1, 1),
                     switch2=_switch(cfg.switch2, 2),
                     margin=cfg.margin, step_multiple=cfg.step_multiple,
                     dd_cluster_eps=cfg.calculus.dd_cluster_eps,
                     engine=cfg.calculus.engine,
                     quadrature_opts=_quadrature_opts(cfg))
    tol = cfg.tolerances
    checks = [make_check("bic_residual", rep.residual, tol.residual),
              make_check("drift_imag_defect", rep.drift.imag_defect,
                         tol.imag_defect)]
    if rep.conserving:
        checks.append(make_check("conserving_torque", abs(rep.torque.value),
                                 tol.torque_conserving))
    series = [_trail_series("sigma_plus", rep.sigma_plus.trail),
              _trail_series("sigma_minus", rep.sigma_minus.trail),
              _trail_series("torque", rep.torque.trail),
              _strip_series("torque", rep.torque.trail)]
    return _bic_results(rep), checks, series


def _run_bulk_conductance(cfg: RunConfig):
    model = cfg.model.build()
    out = bulk_spin_conductance(model, cfg.extent,
                                density=_density(cfg, [model]),
                                switch1=_switch(cfg.switch1, 1),
                                switch2=_switch(cfg.switch2, 2),
                                margin=cfg.margin,
                                step_multiple=cfg.step_multiple,
                                dd_cluster_eps=cfg.calculus.dd_cluster_eps,
                                engine=cfg.calculus.engine,
                                quadrature_opts=_quadrature_opts(cfg))
    results = {"model": model.name, "params": model.params,
               "engine": cfg.calculus.engine, "value": out.value,
               "conserving": out.conserving,
               "cauchy_gap": out.trail.cauchy_gap}
    checks = [make_check("pv_cauchy_gap", out.trail.cauchy_gap,
                         cfg.tolerances.cauchy)]
    return results, checks, [_trail_series("sigma", out.trail)]


def _run_drift(cfg: RunConfig):
    left, right = cfg.left_model.build(), cfg.right_model.build()
    density = _density(cfg, [left, right])
    sample, hop = realize_junction(left, right, cfg.extent,
                                   **cfg.junction.kwargs(cfg.seed))
    cache = SpectralCache.build(hop.matrix)
    out = drift_conductance(sample, hop.matrix, cache, density,
                            switch2=_switch(cfg.switch2, 2),
                            margin=cfg.margin)
    results = {"left": left.name, "right": right.name,
               "conserving": cache.conserving, "value": out.value,
               "imag_defect": out.imag_defect}
    checks = [make_check("drift_imag_defect", out.imag_defect,
                         cfg.tolerances.imag_defect)]
    return results, checks, []


def _run_torque(cfg: RunConfig):
    tol = cfg.tolerances
    if cfg.torque_target == "bulk":
        model = cfg.model.build()
        out = bulk_torque_trail(model, cfg.extent,
                                density=_density(cfg, [model]),
                                switch2=_switch(cfg.switch2, 2),
                                margin=cfg.margin,
                                dd_cluster_eps=cfg.calculus.dd_cluster_eps)
        interior_max = float(np.max(np.abs(out.trail.strip_values)))
        results = {"target": "bulk", "model": model.name,
                   "params": model.params, "value": out.value,
                   "conserving": out.conserving,
                   "interior_strip_max": interior_max}
        # a translation-invariant bulk has no interface: every interior
        # strip trace must vanish up to boundary leakage
        checks = [make_check("interior_strip_max", interior_max,
                             0.0 if out.conserving else tol.interior_torque)]
        series = [_strip_series("bulk", out.trail)]
        return results, checks, series
    left, right = cfg.left_model.build(), cfg.right_model.build()
    density = _density(cfg, [left, right])
    sample, hop = realize_junction(left, right, cfg.extent,
                                   **cfg.junction.kwargs(cfg.seed))
    cache = SpectralCache.build(hop.matrix)
    h_mat = hop.matrix if cfg.calculus.engine == "quadrature" else None
    del hop
    step = cfg.step_multiple * lcm(left.lattice.a1, right.lattice.a1)
    out = torque_conductance(sample, cache, density,
                             switch2=_switch(cfg.switch2, 2),
                             margin=cfg.margin, step=step,
                             dd_cluster_eps=cfg.calculus.dd_cluster_eps,
                             engine=cfg.calculus.engine, h_mat=h_mat,
                             quadrature_opts=_quadrature_opts(cfg))
    fit = _try_decay_fit(out.trail)
    results = {"target": "junction", "left": left.name, "right": right.name,
               "value": out.value, "conserving": out.conserving,
               "cauchy_gap": out.trail.cauchy_gap,
               "decay_rate": None if fit is None else fit.rate,
               "decay_rate_low": None if fit is None else fit.rate_low}
    checks = [make_check("pv_cauchy_gap", out.trail.cauchy_gap, tol.cauchy)]
    if out.conserving:
        checks.append(make_check("conserving_torque", abs(out.value),
                                 tol.torque_conserving))
    elif fit is not None:
        checks.append(make_check("torque_decay_rate_low", fit.rate_low,
                                 0.0, ">="))
    series = [_trail_series("torque", out.trail),
              _strip_series("torque", out.trail)]
    return results, checks, series


def _run_chern(cfg: RunConfig):
    model = cfg.model.build()
    tol = cfg.tolerances
    conserving = model.is_spin_conserving()
    results = {"model": model.name, "params": model.params,
               "conserving": conserving,
               "time_reversal_defect": time_reversal_defect(model)}
    checks = []
    if conserving:
        c_up, c_dn = spin_chern_numbers(model, nk=cfg.nk_chern)
        results.update({"chern_up": c_up, "chern_down": c_dn,
                        "spin_conductance": 0.5 * (c_up - c_dn),
                        "parity": int(round(c_up)) % 2})
        checks.append(make_check("chern_up_quantization",
                                 abs(c_up - round(c_up)), tol.quantization))
        checks.append(make_check("chern_down_quantization",
                                 abs(c_dn - round(c_dn)), tol.quantization))
    total = chern_number(model, nk=cfg.nk_chern)
    results["chern_total"] = total
    checks.append(make_check("chern_total_quantization",
                             abs(total - round(total)), tol.quantization))
    return results, checks, []


_PATH_CORNERS = [(0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.0)]


def _run_spectrum(cfg: RunConfig):
    model = cfg.model.build()
    per_leg = max(2, cfg.nk_path // (len(_PATH_CORNERS) - 1))
    fracs = []
    for (f1a, f2a), (f1b, f2b) in zip(_PATH_CORNERS, _PATH_CORNERS[1:]):
        ts = np.linspace(0.0, 1.0, per_leg, endpoint=False)
        fracs.extend((f1a + t * (f1b - f1a), f2a + t * (f2b - f2a))
                     for t in ts)
    fracs.append(_PATH_CORNERS[-1])
    rows = []
    a1, a2 = model.lattice.a1, model.lattice.a2
    for idx, (f1, f2) in enumerate(fracs):
        energies = np.linalg.eigvalsh(
            model.bloch(2.0 * np.pi * f1 / a1, 2.0 * np.pi * f2 / a2))
        rows.extend([idx, float(f1), float(f2), band, float(e)]
                    for band, e in enumerate(energies))
    lo, hi = bloch_gap(model, nk=cfg.density.nk)
    results = {"model": model.name, "params": model.params,
               "gap_low": lo, "gap_high": hi, "gap_width": hi - lo,
               "n_bands": 2 * model.lattice.n_basis}
    checks = [make_check("gap_width", hi - lo, cfg.tolerances.min_gap, ">=")]
    series = [Series(kind="band_structure", label=model.name, rows=rows)]
    return results, checks, series


def _run_convergence(cfg: RunConfig):
    left, right = cfg.left_model.build(), cfg.right_model.build()
    density = _density(cfg, [left, right])
    tol = cfg.tolerances
    rows, table = [], []
    for extent in cfg.extents:
        rep = verify_bic(left, right, extent,
                         junction=cfg.junction.kwargs(cfg.seed),
                         density=density, switch1=_switch(cfg.switch1, 1),
                         switch2=_switch(cfg.switch2, 2), margin=cfg.margin,
                         step_multiple=cfg.step_multiple,
                         dd_cluster_eps=cfg.calculus.dd_cluster_eps,
                         engine=cfg.calculus.engine,
                         quadrature_opts=_quadrature_opts(cfg))
        table.append(_bic_results(rep))
        rows.append([int(min(rep.extent)), rep.residual])
    residuals = [r[1] for r in rows]
    ratios = [b / a for a, b in zip(residuals, residuals[1:]) if a > 0]
    max_ratio = max(ratios) if ratios else 0.0
    results = {"left": left.name, "right": right.name,
               "extents": [int(e) for e in cfg.extents], "table": table,
               "residuals": residuals, "max_growth_ratio": max_ratio}
    checks = [make_check("final_residual", residuals[-1], tol.residual),
              make_check("residual_growth_ratio", max_ratio,
                         tol.noise_factor)]
    series = [Series(kind="residual_vs_size", label="bic", rows=rows)]
    return results, checks, series


_PIPELINES = {
    "verify-bic": _run_verify_bic,
    "bulk-conductance": _run_bulk_conductance,
    "drift": _run_drift,
    "torque": _run_torque,
    "chern": _run_chern,
    "spectrum": _run_spectrum,
    "convergence": _run_convergence,
}


def execute(cfg: RunConfig) -> RunRecord:
    """Run the pipeline named by cfg.command and assemble its record."""
    start = time.perf_counter()
    results, checks, series = _PIPELINES[cfg.command](cfg)
    return RunRecord(command=cfg.command, config=asdict(cfg),
                     config_hash=config_hash(cfg),
                     wall_time_s=time.perf_counter() - start,
                     results=plain(results), checks=checks, series=series)


def write_outputs(record: RunRecord, out_dir: str | Path) -> list[Path]:
    """Write record.json plus one CSV per series and one PNG per kind."""
    out_dir = Path(out_dir)
    written = [save_record(record, out_dir / "record.json")]
    for kind in {s.kind for s in record.series}:
        written.extend(emit_plot_data(record, kind, out_dir))
    written.extend(render_figures(record, out_dir))
    return written


def run(config_path: str | Path) -> RunRecord:
    """Load a config file, execute its command, write all outputs."""
    cfg = load_config(config_path)
    record = execute(cfg)
    out_dir = cfg.out or f"runs/{cfg.command}-{record.config_hash[:12]}"
    write_outputs(record, out_dir)
    return record


def _parse_extra_params(extra: list[str]) -> dict:
    """Map trailing ``--name value`` pairs to float model parameters."""
    params: dict[str, float] = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or i + 1 >= len(extra):
            raise ConfigError(f"unrecognized argument {tok!r}")
        try:
            params[tok[2:].replace("-", "_")] = float(extra[i + 1])
        except ValueError:
            raise ConfigError(
                f"model parameter {tok!r} needs a numeric value, "
                f"got {extra[i + 1]!r}")
        i += 2
    return params


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path,
                        help="JSON run configuration file")
    common.add_argument("--engine", choices=["spectral", "quadrature"],
                        help="correlation-operator engine")
    common.add_argument("--seed", type=int,
                        help="seed for the interface coupling")
    common.add_argument("--out", type=Path, help="output directory")
    parser = argparse.ArgumentParser(
        prog="spinbic",
        description="Spin conductances of finite samples and junctions, "
                    "with a numerical bulk-interface correspondence check.")
    sub = parser.add_subparsers(dest="command", required=True)
    bulk_like = {
        "bulk-conductance": "bulk spin conductance of one model",
        "chern": "k-space invariants of one model",
        "spectrum": "Bloch bands along the high-symmetry path",
    }
    junction_like = {
        "verify-bic": "both sides of the correspondence identity",
        "drift": "interface spin-drift conductance",
        "convergence": "correspondence residual across sample sizes",
    }
    parsers = {}
    for name, blurb in bulk_like.items():
        p = sub.add_parser(name, parents=[common], help=blurb)
        p.add_argument("--model", help="bulk model name")
        p.add_argument("--preset", choices=sorted(MODEL_PRESETS),
                       help="named model preset")
        parsers[name] = p
    for name, blurb in junction_like.items():
        p = sub.add_parser(name, parents=[common], help=blurb)
        p.add_argument("--left", help="left bulk model name")
        p.add_argument("--right", help="right bulk model name")
        parsers[name] = p
    p = sub.add_parser("torque", parents=[common],
                       help="spin-torque conductance (junction or bulk)")
    p.add_argument("--model", help="bulk model name (bulk-sample torque)")
    p.add_argument("--preset", choices=sorted(MODEL_PRESETS),
                   help="named model preset (bulk-sample torque)")
    p.add_argument("--left", help="left bulk model name")
    p.add_argument("--right", help="right bulk model name")
    parsers["torque"] = p
    for name in ("verify-bic", "bulk-conductance", "drift", "torque"):
        parsers[name].add_argument("--extent", type=int,
                                   help="sample half-extent in cells")
    parsers["convergence"].add_argument("--extents", type=int, nargs="+",
                                        help="sample half-extents to sweep")
    return parser


def _config_from_args(args, extra: list[str]) -> RunConfig:
    base = load_config(args.config) if args.config else RunConfig()
    data = asdict(base)
    data["command"] = args.command
    if args.engine:
        data["calculus"]["engine"] = args.engine
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out"] = str(args.out)
    if getattr(args, "extent", None) is not None:
        data["extent"] = args.extent
    if getattr(args, "extents", None):
        data["extents"] = list(args.extents)
    model_flag = getattr(args, "model", None)
    preset_flag = getattr(args, "preset", None)
    if model_flag and preset_flag:
        raise ConfigError("--model and --preset are mutually exclusive")
    if preset_flag:
        preset = MODEL_PRESETS[preset_flag]
        data["model"] = {"name": preset["name"],
                         "params": dict(preset["params"])}
    elif model_flag:
        data["model"] = {"name": model_flag, "params": {}}
    params = _parse_extra_params(extra)
    if params:
        bulk_command = (args.command in ("bulk-conductance", "chern",
                                         "spectrum")
                        or (args.command == "torque"
                            and (model_flag or preset_flag)))
        if not bulk_command:
            raise ConfigError("extra model parameters are only valid for "
                              "single-model commands; junction models are "
                              "configured through --config")
        data["model"]["params"] = {**data["model"]["params"], **params}
    for side in ("left", "right"):
        name = getattr(args, side, None)
        if name:
            data[f"{side}_model"] = {"name": name, "params": {}}
    if args.command == "torque":
        data["torque_target"] = ("bulk" if (model_flag or preset_flag)
                                 else "junction")
    return config_from_dict(data)


def _print_summary(record: RunRecord, written: list[Path]) -> None:
    print(f"{record.command}  config={record.config_hash[:16]}  "
          f"wall={record.wall_time_s:.2f}s")
    for key, value in record.results.items():
        if isinstance(value, float):
            print(f"  {key} = {value:+.6f}")
    for check in record.checks:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"  check {check['name']}: {check['value']:.3e} "
              f"{check['comparator']} {check['tolerance']:.3e}  {status}")
    for path in written:
        print(f"  wrote {path}")


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        cfg = _config_from_args(args, extra)
        record = execute(cfg)
        out_dir = cfg.out or f"runs/{cfg.command}-{record.config_hash[:12]}"
        written = write_outputs(record, out_dir)
    except (ConfigError, ReportError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_summary(record, written)
    return 0 if record.passed else 1


if __name__ == "__main__":
    sys.exit(main())
