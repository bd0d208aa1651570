"""Command-line entry point: bounds, simulate, sweep, verify, classify.

Exit codes: 0 success (all PASS for ``verify``), 1 precondition violation or
oracle FAIL, 2 usage or configuration error.  The output directory defaults
to ``output.directory`` from the config; the ``METALANGEVIN_OUT`` environment
variable overrides it and ``--out`` overrides both.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, config as cfg_mod, metastability, oracles, theory
from .dynamics import DivergenceError, LangevinConfig, read_binary, read_csv, run_discrete_langevin, write_binary, write_csv
from .landscape import LandscapeError, build_family, find_local_minimum

OUT_ENV = "METALANGEVIN_OUT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _num(x):
    """JSON-stable scalar: floats keep 17 significant digits, non-finite become strings."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return float(f"{x:.17g}")
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if isinstance(x, np.ndarray):
        return _num(x.tolist())
    return x


def dumps(obj) -> str:
    return json.dumps(_num(obj), indent=2, sort_keys=True) + "\n"


def fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def aligned_table(rows, headers) -> str:
    rows = [[str(c) for c in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines) + "\n"


def markdown_table(rows, headers) -> str:
    out = ["| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
    out += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return "\n".join(out) + "\n"


def csv_text(rows, headers) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    for r in rows:
        w.writerow([fmt(c) if isinstance(c, (float, np.floating)) else c for c in r])
    return buf.getvalue()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Config hash, tool version, seed, output checksums and timings."""

    def __init__(self, command: str, config_hash: Optional[str], seed: int):
        self.data = {"command": command, "config_sha256": config_hash, "tool_version": __version__,
                     "seed": seed, "outputs": {}, "timings_seconds": {}, "complete": False}
        self._t0 = time.perf_counter()

    def add(self, path: Path, root: Path) -> None:
        self.data["outputs"][str(path.relative_to(root))] = sha256_file(path)

    def time(self, label: str) -> None:
        self.data["timings_seconds"][label] = round(time.perf_counter() - self._t0, 6)

    def write(self, root: Path, complete: bool = True) -> Path:
        self.data["complete"] = complete
        self.time("total")
        path = root / "manifest.json"
        path.write_text(dumps(self.data))
        return path


def resolve_out(args, conf: Optional[cfg_mod.ExperimentConfig]) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    return Path(conf.output["directory"] if conf else "out")


def resolve_formats(args, conf: Optional[cfg_mod.ExperimentConfig]) -> list:
    if args.format:
        return list(dict.fromkeys(args.format))
    return list(conf.output["formats"]) if conf else ["json"]


def load_config(args) -> cfg_mod.ExperimentConfig:
    if not args.config:
        raise UsageError("--config is required for this command")
    try:
        conf = cfg_mod.load(args.config)
    except OSError as e:
        raise UsageError(f"cannot read config: {e}") from None
    if args.seed is not None:
        conf.run["seed"] = args.seed
    if args.replicas is not None:
        conf.run["replicas"] = args.replicas
    return conf


def build_landscape(conf: cfg_mod.ExperimentConfig):
    try:
        return build_family(conf.family, conf.landscape_params)
    except KeyError as e:
        raise cfg_mod.ConfigError("missing required key", f"landscape.params.{e.args[0]}") from None
    except (LandscapeError, TypeError, ValueError) as e:
        raise cfg_mod.ConfigError(str(e), "landscape.params") from None


def build_params(conf: cfg_mod.ExperimentConfig, landscape) -> theory.ProblemParams:
    if conf.params is None:
        raise UsageError("config has no params block")
    return theory.ProblemParams(landscape.constants, landscape.dimension, **conf.params)


def locate_minimum(landscape, conf: cfg_mod.ExperimentConfig):
    """Minimum used for tubes and sweeps; the double well uses its left well."""
    d = landscape.dimension
    start = np.zeros(d)
    if landscape.name == "double_well":
        start[0] = -1.0
    elif landscape.name == "quadratic" and landscape.params.get("center") is not None:
        start = np.asarray(landscape.params["center"], float)
    return find_local_minimum(landscape, start)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def bounds_rows(b: theory.TheoryBounds, params: theory.ProblemParams) -> list:
    d = b.to_dict()
    rows = [(k, theory.LABELS[k], fmt(d[k])) for k in d]
    p_diff = theory.diffusion_beta_threshold(params.epsilon, params.d, params.constants.M, params.T, params.delta)
    rows.append(("diffusion_beta_threshold", "(128/3)(d + log((2MT+1)/delta)) / eps^2", fmt(p_diff)))
    return rows


def cmd_bounds(args) -> int:
    conf = load_config(args)
    land = build_landscape(conf)
    params = build_params(conf, land)
    try:
        theory.check_epsilon_range(params)
        b = theory.compute_bounds(params, conf.run.get("eta"), conf.run.get("beta"))
    except theory.PreconditionError as e:
        print(f"precondition violated: {e}", file=sys.stderr)
        return EXIT_FAIL
    rows = bounds_rows(b, params)
    payload = {"params": params.to_dict(), "bounds": b.to_dict(),
               "diffusion_beta_threshold": theory.diffusion_beta_threshold(params.epsilon, params.d, params.constants.M,
                                                                   params.T, params.delta)}
    ok, problems = theory.is_admissible(params, b.eta_used, b.beta_used)
    payload["admissible"] = ok
    payload["admissibility_problems"] = problems
    formats = resolve_formats(args, None)
    parts = []
    if "json" in formats:
        parts.append(dumps(payload))
        parts.append(aligned_table(rows, ["key", "quantity", "value"]))
    if "md" in formats:
        parts.append(markdown_table(rows, ["key", "quantity", "value"]))
    if "csv" in formats:
        parts.append(csv_text([(k, v) for k, _, v in rows], ["key", "value"]))
    text = "".join(parts)
    sys.stdout.write(text)
    if args.out:
        root = Path(args.out)
        root.mkdir(parents=True, exist_ok=True)
        (root / "bounds.json").write_text(dumps(payload))
        (root / "bounds.txt").write_text(text)
    return EXIT_OK


def _violation_rows(report: dict) -> list:
    return [(i, p["outcome"], fmt(p["first_exit_index"]), fmt(p["tau_estimate"]),
             fmt(p["max_tube_ratio_pre"]), fmt(p["max_tube_ratio_post"]))
            for i, p in enumerate(report["per_replica"])]


def cmd_simulate(args) -> int:
    conf = load_config(args)
    run = conf.run
    land = build_landscape(conf)
    params = build_params(conf, land)
    lm = locate_minimum(land, conf)
    root = resolve_out(args, conf)
    root.mkdir(parents=True, exist_ok=True)
    formats = resolve_formats(args, conf)
    manifest = RunManifest("simulate", conf.digest(), run["seed"])
    try:
        report = metastability.run_violation_study(
            land, lm, params, run["replicas"], run["seed"], eta=run["eta"], beta=run["beta"],
            noiseless=run["noiseless"], override=args.override_admissibility,
            initial_point=run["initial_point"], per_replica=True)
    except (metastability.StudyError, theory.PreconditionError) as e:
        print(f"precondition violated: {e}", file=sys.stderr)
        manifest.write(root, complete=False)
        return EXIT_FAIL
    except DivergenceError as e:
        print(f"divergence: {e}", file=sys.stderr)
        manifest.write(root, complete=False)
        return EXIT_FAIL
    manifest.time("study")
    report["landscape"] = {"family": conf.family, "params": conf.landscape_params,
                           "constants": land.constants.to_dict()}
    report["local_minimum"] = lm.location.tolist()
    summary = {k: v for k, v in report.items() if k not in ("per_replica", "replica_seeds")}
    try:
        if "json" in formats:
            p = root / "report.json"
            p.write_text(dumps(summary))
            manifest.add(p, root)
        if "csv" in formats:
            p = root / "classifications.csv"
            p.write_text(csv_text(_violation_rows(report), ["replica", "outcome", "first_exit_index",
                                                            "tau_estimate", "max_tube_ratio_pre",
                                                            "max_tube_ratio_post"]))
            manifest.add(p, root)
        if "md" in formats:
            p = root / "report.md"
            p.write_text(violation_markdown(summary))
            manifest.add(p, root)
        if "png" in formats:
            from .plotting import plot_violation_report

            manifest.add(plot_violation_report(report, root / "report.png"), root)
        if run["save_trajectories"]:
            tdir = root / "trajectories"
            tdir.mkdir(exist_ok=True)
            for i, s in enumerate(report["replica_seeds"]):
                lc = LangevinConfig(report["eta"], report["beta"] or 1.0, report["K"], report["initial_point"],
                                    seed=s, noiseless=report["noiseless"])
                traj = run_discrete_langevin(land, lc)
                if run["trajectory_format"] == "csv":
                    p = tdir / f"replica_{i:05d}.csv"
                    write_csv(traj, p)
                else:
                    p = tdir / f"replica_{i:05d}.bin"
                    write_binary(traj, p)
                manifest.add(p, root)
    except OSError as e:
        print(f"write failed: {e}", file=sys.stderr)
        manifest.write(root, complete=False)
        return EXIT_FAIL
    manifest.time("outputs")
    manifest.write(root)
    print(violation_markdown(summary), end="")
    return EXIT_OK


def violation_markdown(report: dict) -> str:
    lo, hi = report["violation_wilson95"]
    rows = [(k, v) for k, v in report["counts"].items()]
    rows += [("violation fraction", fmt(report["violation_fraction"])),
             ("Wilson 95%", f"[{fmt(lo)}, {fmt(hi)}]"), ("delta", fmt(report["delta"])),
             ("eta", fmt(report["eta"])), ("beta", fmt(report["beta"])), ("K", report["K"])]
    return markdown_table(rows, ["quantity", "value"])


SWEEP_HEADER = ["beta", "replica", "escape_time", "censored"]


def cmd_sweep(args) -> int:
    conf = load_config(args)
    run = conf.run
    if conf.family != "double_well":
        raise UsageError("sweep needs the double_well family")
    if not run["betas"] or run["eta"] is None or run["budget_K"] is None:
        raise UsageError("sweep needs run.betas, run.eta and run.budget_K")
    land = build_landscape(conf)
    lm = locate_minimum(land, conf)
    root = resolve_out(args, conf)
    root.mkdir(parents=True, exist_ok=True)
    formats = resolve_formats(args, conf)
    manifest = RunManifest("sweep", conf.digest(), run["seed"])
    try:
        st = metastability.escape_time_sweep(land, lm, run["betas"], run["eta"], run["budget_K"], run["replicas"],
                                             run["seed"], substep_factor=run["substep_factor"],
                                             noise_aggregation=run["noise_aggregation"])
    except metastability.StudyError as e:
        print(f"precondition violated: {e}", file=sys.stderr)
        return EXIT_FAIL
    manifest.time("sweep")
    summary = st.to_dict()
    p = root / "escape_times.csv"
    rows = [(fmt(b), i, fmt(t), str(c).lower()) for b, i, t, c in st.rows()]
    p.write_text(csv_text(rows, SWEEP_HEADER))
    manifest.add(p, root)
    p = root / "sweep.json"
    p.write_text(dumps(summary))
    manifest.add(p, root)
    if "md" in formats:
        p = root / "sweep.md"
        p.write_text(sweep_markdown(summary))
        manifest.add(p, root)
    if "png" in formats:
        from .plotting import plot_escape_sweep

        manifest.add(plot_escape_sweep(summary, root / "sweep.png"), root)
    manifest.write(root)
    if any(st.censoring_flags):
        print("warning: every replica censored at some beta; partial result", file=sys.stderr)
    print(sweep_markdown(summary), end="")
    return EXIT_OK


def sweep_markdown(s: dict) -> str:
    rows = [(fmt(b), fmt(m), u, c) for b, m, u, c in
            zip(s["betas"], s["mean_escape"], s["uncensored_counts"], s["censored_counts"])]
    text = markdown_table(rows, ["beta", "mean escape", "uncensored", "censored"])
    reg = s["regression"]
    if reg:
        text += f"\nslope {fmt(reg['slope'])}, intercept {fmt(reg['intercept'])}, r2 {fmt(reg['r2'])}\n"
    return text


def cmd_verify(args) -> int:
    names = sorted(oracles.ORACLES) if args.all else args.names
    if not names:
        raise UsageError("name at least one oracle or pass --all")
    unknown = [n for n in names if n not in oracles.ORACLES]
    if unknown:
        raise UsageError(f"unknown oracle(s) {', '.join(unknown)}; available: {', '.join(sorted(oracles.ORACLES))}")
    seed = 0 if args.seed is None else args.seed
    root = resolve_out(args, None)
    root.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("verify", None, seed)
    rows, ok = [], True
    for n in names:
        v = oracles.run_oracle(n, seed=seed)
        manifest.time(n)
        p = root / f"verdict_{n}.json"
        p.write_text(dumps(v.to_dict()))
        manifest.add(p, root)
        ok &= v.passed
        rows.append((n, v.status, fmt(v.statistic), fmt(v.threshold), fmt(v.standard_error)))
    manifest.write(root)
    print(aligned_table(rows, ["oracle", "status", "statistic", "threshold", "se"]), end="")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_classify(args) -> int:
    conf = load_config(args)
    land = build_landscape(conf)
    params = build_params(conf, land)
    lm = locate_minimum(land, conf)
    tube = metastability.TubeSpec(lm.location, lm.hessian_at_min, params.epsilon, params.r, params.constants.m)
    T_rec, T_esc = theory.recurrence_time(params), theory.escape_time(params)
    rows, out = [], []
    for path in args.trajectories:
        path = Path(path)
        if path.suffix == ".csv":
            eta = conf.run["eta"]
            if eta is None:
                raise UsageError("CSV trajectories need run.eta in the config")
            lc = LangevinConfig(eta, conf.run["beta"] or 1.0, 1, [0.0] * land.dimension,
                                noiseless=conf.run["beta"] is None)
            traj = read_csv(path, lc)
        else:
            traj = read_binary(path)
        try:
            c = metastability.classify_trajectory(traj, tube, T_rec, T_esc)
        except metastability.StudyError as e:
            print(f"{path}: {e}", file=sys.stderr)
            return EXIT_FAIL
        d = c.to_dict()
        d["tau"] = metastability.estimate_tau(traj, tube)
        d["path"] = str(path)
        out.append(d)
        rows.append((path.name, c.outcome, fmt(c.first_exit_index), fmt(d["tau"]),
                     fmt(c.max_tube_ratio_pre), fmt(c.max_tube_ratio_post)))
    formats = resolve_formats(args, None)
    if "json" in formats:
        sys.stdout.write(dumps({"classifications": out, "T_rec": T_rec, "T_esc": T_esc}))
    headers = ["trajectory", "outcome", "first_exit_index", "tau", "max_ratio_pre", "max_ratio_post"]
    if "md" in formats:
        sys.stdout.write(markdown_table(rows, headers))
    if "csv" in formats:
        sys.stdout.write(csv_text(rows, headers))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration (JSON)")
    common.add_argument("--seed", type=int, help="base seed (overrides run.seed)")
    common.add_argument("--replicas", type=int, help="replica count (overrides run.replicas)")
    common.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and output.directory)")
    common.add_argument("--override-admissibility", action="store_true",
                        help="run with an inadmissible (eta, beta) and record it in the report")
    common.add_argument("--format", action="append", choices=cfg_mod.FORMATS,
                        help="output format; repeat for several (png renders figures)")

    ap = argparse.ArgumentParser(prog="metalangevin", description="Langevin metastability toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("bounds", parents=[common], help="print the theory calculator output")
    sub.add_parser("simulate", parents=[common], help="run a violation study")
    sub.add_parser("sweep", parents=[common], help="escape-time sweep over beta")
    v = sub.add_parser("verify", parents=[common], help="run oracles")
    v.add_argument("names", nargs="*", help=f"oracle names ({', '.join(sorted(oracles.ORACLES))})")
    v.add_argument("--all", action="store_true", help="run every oracle")
    c = sub.add_parser("classify", parents=[common], help="classify stored trajectories")
    c.add_argument("trajectories", nargs="+", help="binary (.bin) or CSV trajectory files")
    return ap


COMMANDS = {"bounds": cmd_bounds, "simulate": cmd_simulate, "sweep": cmd_sweep, "verify": cmd_verify,
            "classify": cmd_classify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, cfg_mod.ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except theory.PreconditionError as e:
        print(f"precondition violated: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
