"""Command-line front end.

    dasa run --preset dasa2-ref --out out/
    dasa run --config scenario.yaml [--config other.yaml --jobs 2]
    dasa compare dasa2-ref lz-6unit
    dasa presets list | show NAME

Exit codes: 0 success, 1 invalid configuration, 2 infeasible physics
(missing root, exceptional point, no population crossing).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from dasa import __version__, config as cfgmod, output
from dasa.dynamics import PropagationConfig, basis_state
from dasa.exceptions import ComparisonError, ConfigurationError, InfeasibleError
from dasa.hamiltonian import (
    TwoLevelParams,
    all_constraint_roots,
    build_hamiltonian_2,
    build_hamiltonian_3,
    gamma1_roots,
)
from dasa.optimizer import DASAParams, SearchSpace, build_candidate_protocol, optimize
from dasa.protocols import (
    LZConfig,
    Protocol,
    ProtocolSegment,
    build_protocol,
    cost_report,
    find_switch_time,
    lz_protocol_cost,
    lz_sweep,
    lz_transfer_probability,
    run_protocol,
    segment_params,
)


@dataclass
class ScenarioResult:
    files: dict[str, str] = field(default_factory=dict)
    report: dict = field(default_factory=dict)
    lines: list[str] = field(default_factory=list)
    summary: dict | None = None


def _prop(cfg) -> PropagationConfig:
    p = cfg["propagation"]
    return PropagationConfig(p["dt"], p["method"], p["sample_stride"])


def _protocol_summary(protocol: Protocol, fidelity) -> dict:
    cost = cost_report(protocol)
    return {
        "dim": protocol.dim,
        "fidelity": fidelity.fidelity,
        "final_target_population": fidelity.final_population,
        "final_norm": fidelity.final_norm,
        "residual_populations": [float(x) for x in fidelity.residual_populations],
        "transfer_complete_time": fidelity.transfer_complete_time,
        "switch_times": protocol.switch_times,
        **cost.as_dict(),
    }


def protocol_from_config(cfg) -> tuple[Protocol, np.ndarray]:
    """Build the protocol and initial state of a ``dasa2``/``dasa3`` scenario."""
    pc = cfg["protocol"]
    dim = 2 if cfg["mode"] == "dasa2" else 3
    for key in ("initial_state", "target_state"):
        if pc[key] >= dim:
            raise ConfigurationError(f"protocol.{key}={pc[key]} out of range for a {dim}-level system")
    psi0 = basis_state(dim, pc["initial_state"])
    target = basis_state(dim, pc["target_state"])

    hams = []
    for s in pc["segments"]:
        if isinstance(s["gamma1"], str):
            params = segment_params(s["omega1"] - s["omega2"], s["gamma2"], s["gamma1"], s["omega1"], s["omega2"])
        else:
            params = TwoLevelParams.from_values(s["omega1"], s["gamma1"], s["omega2"], s["gamma2"])
        hams.append(build_hamiltonian_2(params) if dim == 2 else build_hamiltonian_3(params, pc["middle_onsite"]))
    times = [pc["t_start"]] + [s["t_end"] for s in pc["segments"]]

    if pc["find_switch_time"]:
        if len(hams) != 2:
            raise ConfigurationError("find_switch_time needs exactly two segments (loss, then gain)")
        cut = find_switch_time(
            ProtocolSegment(hams[0], times[0], times[1]), hams[1], psi0, target, horizon=pc["switch_horizon"]
        )
        if cut == times[1]:
            hams, times = hams[:1], times[:2]
        else:
            times[2] = cut
    return build_protocol(hams, times, pc["target_state"], cfg["name"]), psi0


def _run_dasa(cfg) -> ScenarioResult:
    protocol, psi0 = protocol_from_config(cfg)
    traj, fid = run_protocol(protocol, psi0, _prop(cfg), tail_duration=cfg["protocol"]["tail_duration"])
    summary = _protocol_summary(protocol, fid)
    res = ScenarioResult(report=summary, summary=summary)
    name = cfg["name"]
    if cfg["output"]["csv"]:
        res.files[f"{name}_trajectory.csv"] = output.trajectory_csv(traj)
    if cfg["output"]["svg"]:
        res.files[f"{name}_populations.svg"] = output.populations_svg(traj, name)
    pops = ", ".join(f"pop_{k}={p:.6g}" for k, p in enumerate(traj.populations[-1]))
    res.lines = [
        f"{name}: t_end={protocol.t_end:.6g} {pops} norm={fid.final_norm:.6g}",
        f"{name}: switch_times={[round(t, 6) for t in protocol.switch_times]}",
        f"{name}: active_duration={summary['active_duration']:.6g} max_abs_gamma={summary['max_abs_gamma']:.6g} "
        f"sigma_gamma_integral={summary['sigma_gamma_integral']:.6g} loss_integral={summary['loss_integral']:.6g}",
    ]
    return res


def _run_lz(cfg) -> ScenarioResult:
    lz = cfg["lz"]
    res = ScenarioResult()
    entries = []
    for eps in lz["epsilons"]:
        config = LZConfig(eps, lz["t_start"], lz["t_end"])
        traj, fid = lz_sweep(config, _prop(cfg))
        analytic = lz_transfer_probability(eps)
        entries.append(
            {
                "epsilon": eps,
                "t_start": config.t_start,
                "t_end": config.t_end,
                "simulated_transfer": fid.final_population,
                "analytic_transfer": analytic,
                "abs_difference": abs(fid.final_population - analytic),
            }
        )
        tag = f"{cfg['name']}_eps{eps:g}"
        if cfg["output"]["csv"]:
            res.files[f"{tag}_trajectory.csv"] = output.trajectory_csv(traj)
        if cfg["output"]["svg"]:
            res.files[f"{tag}_populations.svg"] = output.populations_svg(traj, f"LZ eps={eps:g}")
        res.lines.append(
            f"lz eps={eps:g}: simulated={fid.final_population:.8f} analytic={analytic:.8f} "
            f"|diff|={abs(fid.final_population - analytic):.3g}"
        )
        if len(lz["epsilons"]) == 1:
            cost = lz_protocol_cost(config)
            res.summary = {
                "dim": 2,
                "fidelity": fid.fidelity,
                "final_target_population": fid.final_population,
                "final_norm": fid.final_norm,
                "switch_times": [config.t_start, config.t_end],
                **cost.as_dict(),
            }
    res.report = {"sweeps": entries}
    return res


def roots_table(delta_omegas, gamma2s) -> list[dict]:
    """All three cubic roots per grid point, with realness and validity flags."""
    rows = []
    for dw in delta_omegas:
        for g2 in gamma2s:
            if g2 == 0:
                continue
            records = gamma1_roots(dw, g2).roots
            for branch, z in enumerate(all_constraint_roots(dw, g2)):
                re, im, valid = float(z.real), float(z.imag), False
                match = min(records, key=lambda r: abs(r.gamma1 - re), default=None)
                is_real = match is not None and abs(im) <= 1e-9 * max(1.0, abs(z)) and abs(match.gamma1 - re) < 1e-6
                if is_real:
                    re, im, valid = match.gamma1, 0.0, match.valid
                rows.append(
                    {
                        "delta_omega": dw,
                        "gamma2": float(g2),
                        "branch": branch,
                        "gamma1_re": re,
                        "gamma1_im": im,
                        "is_real": is_real,
                        "sigma_gamma": re + float(g2),
                        "valid": valid,
                    }
                )
    return rows


def _run_roots(cfg) -> ScenarioResult:
    rc = cfg["roots"]
    if 0 in rc["delta_omegas"]:
        raise ConfigurationError("roots.delta_omegas must not contain 0 (no Hamiltonian of this class exists)")
    rows = roots_table(rc["delta_omegas"], np.linspace(rc["gamma2_start"], rc["gamma2_stop"], rc["gamma2_num"]))
    res = ScenarioResult()
    name = cfg["name"]
    header = ["delta_omega", "gamma2", "branch", "gamma1_re", "gamma1_im", "is_real", "sigma_gamma", "valid"]
    if cfg["output"]["csv"]:
        res.files[f"{name}_roots.csv"] = output.csv_text(header, ([r[h] for h in header] for r in rows))
    if cfg["output"]["svg"]:
        res.files[f"{name}_roots_real.svg"] = output.roots_svg(rows, "re")
        res.files[f"{name}_roots_imag.svg"] = output.roots_svg(rows, "im")
    for dw in rc["delta_omegas"]:
        sel = [r for r in rows if r["delta_omega"] == dw]
        n_points = len(sel) // 3
        n_real = [sum(bool(r["is_real"]) for r in sel if r["branch"] == b) for b in range(3)]
        res.lines.append(f"roots dw={dw:g}: {n_points} grid points, real fraction per branch {[round(n / n_points, 4) for n in n_real]}")
    res.report = {"rows": len(rows)}
    return res


def _run_optimize(cfg) -> ScenarioResult:
    oc = cfg["optimize"]
    space = SearchSpace(
        **{k: tuple(v) for k, v in oc["bounds"].items()},
        fidelity_floor=oc["fidelity_floor"],
        cost_objective=oc["objective"],
        x0=DASAParams.reference() if oc["start"] == "reference" else None,
    )
    result = optimize(space, oc["budget"], oc["seed"])
    protocol = build_candidate_protocol(result.best_params, duration_bounds=space.duration_amplify)
    traj, fid = run_protocol(protocol, basis_state(2, 1), _prop(cfg))
    summary = _protocol_summary(protocol, fid)
    name = cfg["name"]
    res = ScenarioResult(summary=summary)
    res.report = {
        "best_params": result.best_params.as_dict(),
        "best_cost": result.best_cost,
        "fidelity": result.fidelity,
        "evaluations": result.evaluations,
        "best_protocol": summary,
    }
    if cfg["output"]["csv"]:
        header = list(DASAParams.__dataclass_fields__) + ["cost", "fidelity"]
        rows = ([*e.params.as_dict().values(), e.cost, e.fidelity] for e in result.history)
        res.files[f"{name}_history.csv"] = output.csv_text(header, rows)
        res.files[f"{name}_trajectory.csv"] = output.trajectory_csv(traj)
    if cfg["output"]["svg"]:
        res.files[f"{name}_history.svg"] = output.history_svg(result.history)
        res.files[f"{name}_populations.svg"] = output.populations_svg(traj, name)
    res.lines = [
        f"optimize: {result.evaluations} evaluations, best {oc['objective']}={result.best_cost:.6g} "
        f"fidelity={result.fidelity:.8f}",
        "optimize: best " + " ".join(f"{k}={v:.6g}" for k, v in result.best_params.as_dict().items()),
    ]
    return res


_RUNNERS = {"dasa2": _run_dasa, "dasa3": _run_dasa, "lz": _run_lz, "roots": _run_roots, "optimize": _run_optimize}


def execute(cfg) -> ScenarioResult:
    """Run a resolved scenario in memory."""
    return _RUNNERS[cfg["mode"]](cfg)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"


def run_scenario(cfg) -> ScenarioResult:
    """Run and write every output file plus the config snapshot and run record."""
    started = datetime.now(timezone.utc).isoformat()
    res = execute(cfg)
    out = Path(cfg["output"]["dir"])
    name = cfg["name"]
    files = dict(res.files)
    files[f"{name}_config.json"] = _json(cfg)
    digests = [{"path": fname, "sha256": output.atomic_write(out / fname, text)} for fname, text in files.items()]
    record = {
        "config": cfg,
        "artifact_version": __version__,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "files": digests,
        "report": res.report,
    }
    output.atomic_write(out / f"{name}_run.json", _json(record))
    res.lines.append(f"{name}: wrote {len(digests) + 1} files to {out}")
    return res


def _apply_overrides(cfg, args) -> dict:
    if args.out is not None:
        cfg["output"]["dir"] = args.out
    if args.dt is not None:
        cfg["propagation"]["dt"] = args.dt
    if args.method is not None:
        cfg["propagation"]["method"] = args.method
    if args.seed is not None and cfg["mode"] == "optimize":
        cfg["optimize"]["seed"] = args.seed
    cfgmod.validate(cfg)
    return cfg


def _load_ref(ref: str) -> dict:
    if ref in cfgmod.PRESETS and not Path(ref).exists():
        return cfgmod.preset(ref)
    return cfgmod.load(ref)


def _run_one(cfg) -> tuple[int, list[str]]:
    try:
        return 0, run_scenario(cfg).lines
    except ConfigurationError as exc:
        return 1, [f"error: invalid configuration: {exc}"]
    except InfeasibleError as exc:
        return 2, [f"error: infeasible ({type(exc).__name__}): {exc}"]


def cmd_run(args) -> int:
    refs = [("config", c) for c in args.config or []] + [("preset", p) for p in args.preset or []]
    if not refs:
        print("error: give at least one --config or --preset", file=sys.stderr)
        return 1
    cfgs = []
    for kind, ref in refs:
        try:
            cfg = cfgmod.preset(ref) if kind == "preset" else cfgmod.load(ref)
            cfgs.append(_apply_overrides(cfg, args))
        except ConfigurationError as exc:
            print(f"error: invalid configuration: {exc}", file=sys.stderr)
            return 1
    if args.jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, cfgs))
    else:
        results = [_run_one(c) for c in cfgs]
    code = 0
    for rc, lines in results:
        stream = sys.stderr if rc else sys.stdout
        for line in lines:
            print(line, file=stream)
        code = max(code, rc)
    return code


COMPARE_ROWS = (
    "dim",
    "fidelity",
    "final_target_population",
    "active_duration",
    "max_abs_gamma",
    "sigma_gamma_integral",
    "gain_integral",
    "loss_integral",
    "sum_abs_gain_integrals",
    "per_site_gain_integral",
    "per_segment_gammas",
)


def compare(cfg_a: dict, cfg_b: dict) -> dict:
    """Side-by-side fidelity and cost metrics of two scenarios.

    Raises
    ------
    ComparisonError
        If a scenario does not produce a single transfer protocol
        (``roots`` mode, or ``lz`` with several epsilons).
    """
    cols = {}
    for label, cfg in (("a", cfg_a), ("b", cfg_b)):
        res = execute(cfg)
        if res.summary is None:
            raise ComparisonError(
                f"scenario {cfg['name']!r} (mode {cfg['mode']}) has no single transfer protocol to compare"
            )
        cols[label] = {"name": cfg["name"], "mode": cfg["mode"], **{k: res.summary.get(k) for k in COMPARE_ROWS}}
    return cols


def format_comparison(cols: dict) -> str:
    def cell(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        if isinstance(v, list):
            return "[" + ", ".join(cell(x) for x in v) + "]"
        return str(v)

    keys = ["name", "mode", *COMPARE_ROWS]
    width = max(len(k) for k in keys)
    a = [cell(cols["a"][k]) for k in keys]
    wa = max(len(x) for x in a)
    return "\n".join(f"{k:<{width}}  {x:<{wa}}  {cell(cols['b'][k])}" for k, x in zip(keys, a))


def cmd_compare(args) -> int:
    try:
        cfgs = [_apply_overrides(_load_ref(r), args) for r in (args.a, args.b)]
        cols = compare(*cfgs)
    except (ConfigurationError, ComparisonError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InfeasibleError as exc:
        print(f"error: infeasible ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    print(_json(cols) if args.json else format_comparison(cols))
    return 0


def cmd_presets(args) -> int:
    if args.action == "list":
        for name, doc in cfgmod.PRESETS.items():
            print(f"{name}\t{doc['mode']}")
        return 0
    if not args.name:
        print("error: presets show needs a NAME", file=sys.stderr)
        return 1
    try:
        print(_json(cfgmod.preset(args.name)), end="")
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _add_overrides(p):
    p.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    p.add_argument("--dt", type=float, help="time step in inverse coupling units")
    p.add_argument("--method", choices=["exact", "rk4"], help="propagation method")
    p.add_argument("--seed", type=int, help="optimizer seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dasa", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"dasa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one or more scenarios and write CSV/SVG/run record")
    run.add_argument("--config", action="append", metavar="PATH", help="scenario file (repeatable)")
    run.add_argument("--preset", action="append", metavar="NAME", help="named preset (repeatable)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for several scenarios")
    _add_overrides(run)
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="side-by-side cost/fidelity table of two scenarios")
    cmp_.add_argument("a", help="config path or preset name")
    cmp_.add_argument("b", help="config path or preset name")
    cmp_.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    _add_overrides(cmp_)
    cmp_.set_defaults(func=cmd_compare)

    pre = sub.add_parser("presets", help="list or show built-in scenarios")
    pre.add_argument("action", choices=["list", "show"])
    pre.add_argument("name", nargs="?")
    pre.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
