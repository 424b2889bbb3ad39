"""Command-line interface.

Every command computes everything first, then writes its CSV files and a
JSON manifest into --out.  Exit codes: 0 success, 2 usage error, 3 numerical
failure.  A JSON config file (--config) supplies defaults: top-level keys
apply to every command, a section named after the command to that command
only; explicit flags win.
"""
import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import BACKEND, CapacityError, NumericalError, __version__
from .annealer import DEFAULT_SCHEDULE

SCHEMA_VERSION = 1
DEFAULT_K_GRID = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0, 8.0)
# frozen annealing budget: success 1.0 over 100 seeds for K=5, U=1, L <= 32
DEFAULT_ANNEAL = {"T_initial": DEFAULT_SCHEDULE.T_initial, "T_final": DEFAULT_SCHEDULE.T_final,
                  "steps": DEFAULT_SCHEDULE.n_steps, "shape": DEFAULT_SCHEDULE.shape}


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    params: dict
    version: str = __version__
    schema_version: int = SCHEMA_VERSION
    backend: str = BACKEND
    config_hash: str = ""
    started: str = ""
    finished: str = ""
    job_wall_times: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def config_hash(command, params):
    blob = json.dumps({"command": command, "params": params}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


# -- parsing helpers --------------------------------------------------------

def _floats(text):
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    return vals


def _ints(text):
    try:
        vals = [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return vals


def _bracket(text):
    vals = _floats(text)
    if len(vals) != 2 or not 0 < vals[0] < vals[1]:
        raise argparse.ArgumentTypeError("bracket must be 'lo,hi' with 0 < lo < hi")
    return tuple(vals)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="gapscale_out", help="output directory")
    common.add_argument("--config", help="JSON file with default parameters")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    ap = argparse.ArgumentParser(prog="gapscale", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="lowest levels of one model")
    p.add_argument("--model", choices=["chain", "ladder", "dimer"], required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.0)
    p.add_argument("--K", type=float, default=5.0)
    p.add_argument("--U", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--sector", default="full",
                   help="'full', 'k=<n>' (chain/ladder) or 'w=<-1|0|1>' (dimer)")
    p.add_argument("--m", type=int, default=4, help="number of levels")

    p = sub.add_parser("phasediag", parents=[common], help="Gamma* and minimum gap versus K")
    p.add_argument("--K-grid", type=_floats, default=list(DEFAULT_K_GRID))
    p.add_argument("--U", type=float, default=1.0)
    p.add_argument("--L", type=int, default=12)
    p.add_argument("--bracket", type=_bracket, default=(0.05, 5.0))
    p.add_argument("--b", type=float, default=None, help="b for the reference curve (default measured b_L)")

    p = sub.add_parser("gapscaling", parents=[common], help="exponential fits of the minimum gap")
    p.add_argument("--K", type=_floats, default=[2.5, 3.0, 3.5, 4.0, 4.5, 5.0])
    p.add_argument("--L", type=_ints, default=[4, 6, 8, 10, 12])
    p.add_argument("--U", type=float, default=1.0)
    p.add_argument("--bracket", type=_bracket, default=(0.5, 5.0))

    p = sub.add_parser("fermion", parents=[common], help="free-fermion chain gaps")
    p.add_argument("--J", type=float, default=-1.0, help="rotated-basis coupling (J>0 ferromagnet)")
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--L", type=_ints, default=list(range(9, 26, 2)))
    p.add_argument("--fit", choices=["none", "power", "exponential"], default="power")

    p = sub.add_parser("dimer", parents=[common], help="dimer counts, b_L and level crossings")
    p.add_argument("--L", type=_ints, default=[4, 6, 8, 10, 12, 14])
    p.add_argument("--U", type=float, default=1.0)

    p = sub.add_parser("anneal", parents=[common], help="simulated-annealing first-passage study")
    p.add_argument("--K", type=float, default=5.0)
    p.add_argument("--U", type=float, default=1.0)
    p.add_argument("--L", type=_ints, default=[8, 12, 16, 24, 32])
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T-initial", type=float, default=DEFAULT_ANNEAL["T_initial"])
    p.add_argument("--T-final", type=float, default=DEFAULT_ANNEAL["T_final"])
    p.add_argument("--steps", type=int, default=DEFAULT_ANNEAL["steps"])
    p.add_argument("--shape", choices=["geometric", "linear"], default=DEFAULT_ANNEAL["shape"])
    return ap


def _load_config(ap, path, command):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, ValueError) as exc:
        ap.error(f"cannot read config {path}: {exc}")
    if "command" in cfg and "params" in cfg:
        # a run manifest: replay its parameters
        if cfg["command"] != command:
            ap.error(f"manifest is for command {cfg['command']!r}, not {command!r}")
        return {}, dict(cfg["params"])
    shared = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    return shared, dict(cfg.get(command, {}))


def parse(argv):
    ap = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((t for t in rest if not t.startswith("-")), None)
    if known.config and command in COMMANDS:
        sub = ap._subparsers._group_actions[0].choices[command]
        actions = {a.dest: a for a in sub._actions}
        defaults = {}
        shared, own = _load_config(ap, known.config, command)
        # shared keys apply where the command has the flag; section keys must exist
        items = [(k, v, False) for k, v in shared.items()] + [(k, v, True) for k, v in own.items()]
        for k, v, strict in items:
            dest = k.replace("-", "_")
            if dest not in actions or dest in ("command", "config", "out"):
                if strict:
                    ap.error(f"unknown config key {k!r} for command {command}")
                continue
            act = actions[dest]
            try:
                if isinstance(v, str) and act.type is not None:
                    v = act.type(v)
                elif isinstance(v, list) and act.type is _bracket:
                    v = _bracket(",".join(str(x) for x in v))
            except argparse.ArgumentTypeError as exc:
                ap.error(f"config key {k!r}: {exc}")
            act.required = False
            defaults[dest] = v
        sub.set_defaults(**defaults)
    return ap, ap.parse_args(argv)


# -- commands ---------------------------------------------------------------

def _parse_sector(model, text):
    if text == "full":
        if model == "dimer":
            raise UsageError("the dimer model needs a winding sector, e.g. --sector w=0")
        return None
    key, _, val = text.partition("=")
    try:
        n = int(val)
    except ValueError:
        raise UsageError(f"bad sector {text!r}") from None
    if model == "dimer" and key == "w":
        return n
    if model != "dimer" and key == "k":
        return n
    raise UsageError(f"sector {text!r} does not apply to model {model}")


def cmd_spectrum(args):
    from .dimer import build_dimer_hamiltonian
    from .models import ChainParams, LadderParams, build_chain, build_ladder
    from .spectral import dense_spectrum, lowest_eigenpairs

    sector = _parse_sector(args.model, args.sector)
    try:
        if args.model == "chain":
            if sector is not None and args.h != 0.0:
                raise UsageError("momentum sectors need h == 0 for the chain (use --sector full)")
            H = build_chain(ChainParams(args.L, args.J, args.h, args.gamma), sector)
            unit = "J"
        elif args.model == "ladder":
            H = build_ladder(LadderParams(args.L, args.K, args.U, args.gamma), sector)
            unit = "U"
        else:
            H = build_dimer_hamiltonian(args.L, args.U, args.gamma, sector)
            unit = "U"
    except (ValueError, CapacityError) as exc:
        raise UsageError(str(exc)) from None
    m = min(args.m, H.dimension)
    if H.dimension <= 1500:
        e = dense_spectrum(H, vectors=False).energies[:m]
    else:
        e = lowest_eigenpairs(H, m=m).energies
    rows = [(i, float(x)) for i, x in enumerate(e)]
    header = ["level", f"energy_{unit}"]
    return {"spectrum.csv": (header, rows)}, [], {"dimension": H.dimension, "basis": H.basis_tag}


def _phase_job(job):
    from .analysis import min_gap_series

    K, U, L, bracket = job
    t0 = time.perf_counter()
    sizes = list(range(4 if L % 2 == 0 else 5, L + 1, 2))
    res = min_gap_series(K, U, sizes, bracket=bracket, width=1.1)
    return K, res, time.perf_counter() - t0


def _run_jobs(fn, jobs, n_workers):
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def cmd_phasediag(args):
    from .analysis import reference_curves
    from .dimer import compute_b

    if not args.K_grid:
        raise UsageError("empty K grid")
    if args.L < 4 or args.L % 2:
        raise UsageError("phasediag needs an even L >= 4")
    Ks = sorted(args.K_grid)
    out = _run_jobs(_phase_job, [(K, args.U, args.L, args.bracket) for K in Ks], args.jobs)
    points = [(K, args.L, r[-1].gamma_star, r[-1].delta_min, r[-1].method) for K, r, _ in out]
    b = args.b if args.b is not None else compute_b(args.L, 1.0, args.U)
    K_curve = np.geomspace(min(Ks), max(Ks), 200)
    ref = reference_curves(K_curve, args.U, b)
    curve_rows = list(zip(ref["K"], ref["gamma_first_order"], ref["gamma_second_order"], ref["h_eff"]))
    files = {
        "phasediag_points.csv": (["K_U", "L", "gamma_star_U", "delta_min_U", "method"], points),
        "reference_curves.csv": (["K_U", "gamma_first_order_U", "gamma_second_order_U", "h_eff_U"],
                                 curve_rows),
        "plot_phasediag.py": PLOT_SCRIPT,
    }
    return files, [w for _, _, w in out], {"b": b}


def _scaling_job(job):
    from .analysis import min_gap_series

    K, U, Ls, bracket = job
    t0 = time.perf_counter()
    res = min_gap_series(K, U, Ls, bracket=bracket, width=1.1)
    return K, res, time.perf_counter() - t0


def cmd_gapscaling(args):
    from .analysis import fit_gap_scaling

    Ls = sorted(set(args.L))
    if len(Ls) < 4:
        raise UsageError("gap scaling needs at least 4 sizes")
    if any(L % 2 or L < 4 for L in Ls):
        raise UsageError("gap scaling uses even L >= 4")
    out = _run_jobs(_scaling_job, [(K, args.U, Ls, args.bracket) for K in sorted(args.K)], args.jobs)
    points, fits = [], []
    for K, res, _ in out:
        points.extend((K, r.L, r.gamma_star, r.delta_min, r.method) for r in res)
        f = fit_gap_scaling(res)
        fits.append((K, f.params["A"], f.errors["A"], f.params["c"], f.errors["c"], f.r2))
    return ({"gapscaling_points.csv": (["K_U", "L", "gamma_star_U", "delta_min_U", "method"], points),
             "gapscaling_fits.csv": (["K_U", "A_U", "A_err_U", "c", "c_err", "r2"], fits)},
            [w for _, _, w in out], {})


def cmd_fermion(args):
    from .analysis import fit_gap_scaling
    from .fermion import many_body_spectrum

    rows = []
    for L in sorted(set(args.L)):
        if L < 2:
            raise UsageError("L must be at least 2")
        mb = many_body_spectrum(args.J, args.gamma, L)
        rows.append((L, args.J, args.gamma, mb.E_ground, mb.E_first_excited, mb.gap,
                     mb.labels[0], mb.labels[1]))
    files = {"fermion.csv": (["L", "J", "gamma_J", "E0_J", "E1_J", "gap_J", "state0", "state1"], rows)}
    extra = {}
    if args.fit != "none":
        f = fit_gap_scaling([r[0] for r in rows], args.fit, [r[5] for r in rows])
        rate = "p" if args.fit == "power" else "c"
        extra = {"fit": {"model": args.fit, "A": f.params["A"], rate: f.params[rate],
                         f"{rate}_err": f.errors[rate], "r2": f.r2}}
        files["fermion_fit.csv"] = (["model", "A_J", rate, f"{rate}_err", "r2"],
                                    [(args.fit, f.params["A"], f.params[rate], f.errors[rate], f.r2)])
    return files, [], extra


def cmd_dimer(args):
    from .dimer import columnar_count, compute_b, enumerate_coverings, locate_level_crossing

    rows = []
    for L in sorted(set(args.L)):
        if not 2 <= L <= 24:
            raise UsageError("dimer ladder needs 2 <= L <= 24")
        groups = enumerate_coverings(L)
        n0 = len(groups[0])
        total = sum(len(v) for v in groups.values())
        if L % 2 == 0 and L <= 16:
            b = compute_b(L, 1.0, args.U)
            lc = locate_level_crossing(L, args.U)
            gc, s0, s1 = lc.gamma_c, lc.slope_below, lc.slope_above
        else:
            b = gc = s0 = s1 = None
        rows.append((L, n0, columnar_count(L), total, b, gc, s0, s1))
    header = ["L", "count_w0", "lucas_L", "count_total", "b_L", "gamma_c_U",
              "slope_below_U", "slope_above_U"]
    return {"dimer.csv": (header, rows)}, [], {}


def cmd_anneal(args):
    from .annealer import AnnealSchedule, scaling_study

    try:
        sched = AnnealSchedule(args.T_initial, args.T_final, args.steps, args.shape)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.seeds < 1:
        raise UsageError("--seeds must be positive")
    study = scaling_study(args.K, args.U, sorted(set(args.L)), sched, args.seeds, args.seed,
                          jobs=args.jobs)
    runs = sorted(study.runs, key=lambda r: (r[2], r[1]))
    run_rows = [(s, rep, L, K, U, "" if fp is None else fp, e) for s, rep, L, K, U, fp, e in runs]
    summary = [(r.L, r.n_runs, r.success, r.median, r.q25, r.q75, r.flagged) for r in study.rows]
    files = {
        "anneal_runs.csv": (["seed", "replica", "L", "K_U", "U_U", "first_passage_sweeps",
                             "final_energy_U"], run_rows),
        "anneal_summary.csv": (["L", "n_runs", "success", "median_sweeps", "q25_sweeps",
                                "q75_sweeps", "flagged"], summary),
    }
    return files, [], {"exponent": study.exponent, "exponent_err": study.exponent_err}


COMMANDS = {
    "spectrum": cmd_spectrum,
    "phasediag": cmd_phasediag,
    "gapscaling": cmd_gapscaling,
    "fermion": cmd_fermion,
    "dimer": cmd_dimer,
    "anneal": cmd_anneal,
}

PLOT_SCRIPT = '''"""Regenerate the phase-diagram figure from phasediag_points.csv and reference_curves.csv."""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

here = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(here, name)) as fh:
        return list(csv.DictReader(fh))


pts = read("phasediag_points.csv")
ref = read("reference_curves.csv")
fig, ax = plt.subplots(figsize=(5, 4))
ax.plot([float(r["K_U"]) for r in ref], [float(r["gamma_first_order_U"]) for r in ref],
        "k--", label="first order")
ax.plot([float(r["K_U"]) for r in ref], [float(r["gamma_second_order_U"]) for r in ref],
        "k:", label="second order")
ax.plot([float(r["K_U"]) for r in pts], [float(r["gamma_star_U"]) for r in pts], "o",
        label="min gap, k=0")
ax.set_xlabel("K / U")
ax.set_ylabel("Gamma / U")
ax.set_ylim(0, 1.2 * max(float(r["gamma_star_U"]) for r in pts))
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "phasediag.png"), dpi=150, metadata={"Software": None})
'''


def _params_of(args):
    skip = {"out", "config", "jobs", "command"}
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items())
            if k not in skip}


def write_outputs(outdir, command, params, files, wall, extra, started):
    os.makedirs(outdir, exist_ok=True)
    man = RunManifest(command, params, config_hash=config_hash(command, params), started=started,
                      job_wall_times=[float(w) for w in wall])
    for name, content in files.items():
        path = os.path.join(outdir, name)
        if isinstance(content, str):
            text = content
            man.outputs[name] = {"kind": "script"}
        else:
            header, rows = content
            text = csv_text(header, rows)
            man.outputs[name] = {"kind": "csv", "schema": f"{name[:-4]}/v{SCHEMA_VERSION}",
                                 "columns": list(header), "rows": len(rows)}
        with open(path, "w", newline="") as fh:
            fh.write(text)
    man.results = extra
    man.finished = _now()
    with open(os.path.join(outdir, f"manifest_{command}.json"), "w") as fh:
        fh.write(man.to_json())
    return man


def main(argv=None):
    ap, args = parse(sys.argv[1:] if argv is None else argv)
    started = _now()
    try:
        files, wall, extra = COMMANDS[args.command](args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"gapscale {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"gapscale {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 3
    extra = json.loads(json.dumps(extra, default=float))
    man = write_outputs(args.out, args.command, _params_of(args), files, wall, extra, started)
    for name in man.outputs:
        print(os.path.join(args.out, name))
    return 0


if __name__ == "__main__":
    sys.exit(main())
