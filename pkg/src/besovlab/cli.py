"""Command-line driver: ``python -m besovlab <command> [options]``.

Commands
--------
norms          Besov norms of the initial data along a sweep (or of an SFLD file).
construct      Write the initial data as sparse-atom JSON or SFLD1 files.
picard-sweep   I^B lower-bound pieces and the product device along a sweep.
algebra-sweep  Norms of the product pair and the fitted growth exponent.
simulate       2-D MHD run from the constructed (real) data.
decompose      Simulation plus the b(T, Phi) = b0 + I^B + I^S split.

Floats are printed with 17 significant digits.  Failures print a JSON object
``{"error": ..., "message": ...}`` on stderr and exit nonzero.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .fields import ResolutionError, write_sfld

WORKERS_ENV = "BESOVLAB_WORKERS"

EXIT_DOMAIN = 2
EXIT_RESOLUTION = 3
EXIT_IO = 4
EXIT_NUMERICAL = 5


# -- parsing helpers -------------------------------------------------------------


def parse_exponent(text):
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "oo"):
        return math.inf
    return float(t)


def parse_sweep(text):
    """Integers from ``a..b:geometric|linear[:count]``, ``a,b,c`` or ``a``.

    Geometric sweeps without a count take one point per doubling; linear
    sweeps without a count step by one.  The result is strictly increasing.
    """
    if isinstance(text, (list, tuple)):
        vals = [int(v) for v in text]
    elif isinstance(text, int):
        vals = [text]
    else:
        t = str(text).strip()
        if ".." not in t:
            vals = [int(v) for v in t.split(",") if v.strip()]
        else:
            rng, _, rest = t.partition(":")
            a, b = (int(float(v)) for v in rng.split(".."))
            kind, _, count = rest.partition(":")
            kind = kind or "geometric"
            if a <= 0 or b < a:
                raise ValueError(f"bad sweep range {a}..{b}")
            if kind == "geometric":
                n = int(count) if count else int(round(math.log2(b / a))) + 1
                vals = [a] if n == 1 else [int(round(a * (b / a) ** (i / (n - 1)))) for i in range(n)]
            elif kind == "linear":
                n = int(count) if count else b - a + 1
                vals = [a] if n == 1 else [int(round(a + (b - a) * i / (n - 1))) for i in range(n)]
            else:
                raise ValueError(f"unknown sweep spacing {kind!r}")
            vals = sorted(set(vals))
    if any(y <= x for x, y in zip(vals, vals[1:])):
        raise ValueError(f"sweep values must be strictly increasing, got {vals}")
    return vals


def fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return fmt(v) if not math.isfinite(v) else float(fmt(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def load_config(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".json"):
        return json.loads(raw)
    try:
        import tomllib
    except ImportError:  # Python < 3.11
        import tomli as tomllib
    return tomllib.loads(raw.decode())


# -- argument parser ---------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="besovlab", description="Besov norm-inflation laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, default_N):
        sp.add_argument("--config", help="JSON or TOML file; its keys override flags")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--out", dest="output_dir", help="artifact directory (manifest written there)")
        sp.add_argument("--d", type=int, default=2)
        sp.add_argument("--p", default="2")
        sp.add_argument("--q", default="2")
        sp.add_argument("--alpha", type=float, default=0.75)
        sp.add_argument("--N", default=default_N, help="integer or sweep a..b:geometric|linear[:count]")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--small-N", action="store_true", help="allow N < 16 (relaxed parameter checks)")

    sp = sub.add_parser("norms", help="Besov norms of the initial data or of an SFLD file")
    common(sp, "256..65536:geometric")
    sp.add_argument("--field", help="SFLD1 file to measure instead of the constructed data")
    sp.add_argument("--s", type=float, help="regularity for --field (default d/p)")
    sp.add_argument("--nonhomogeneous", action="store_true")

    sp = sub.add_parser("construct", help="write initial data")
    common(sp, "256")
    sp.add_argument("--representation", choices=("sparse", "dense"), default="sparse")
    sp.add_argument("--hermitian", action="store_true")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--period", type=float)

    for name in ("picard-sweep", "algebra-sweep"):
        sp = sub.add_parser(name)
        common(sp, "256..65536:geometric")
        sp.add_argument("--nodes", default="32,16", help="Gauss nodes per long,thin axis")
        sp.add_argument("--rtol", type=float, default=1e-4)

    for name in ("simulate", "decompose"):
        sp = sub.add_parser(name)
        common(sp, "6")
        sp.add_argument("--grid", type=int, default=1024)
        sp.add_argument("--period", type=float, default=2 * math.pi)
        sp.add_argument("--dt", default="auto")
        sp.add_argument("--t-end", dest="t_end", default="paper_T")
        sp.add_argument("--dealias", type=float, default=2.0 / 3.0)
        sp.add_argument("--checkpoints", type=int, default=32)
        sp.add_argument("--tracers", default=None, help="nx,ny tracer lattice (decompose: full grid)")
        sp.add_argument("--linearized", action="store_true")
    return p


def resolve_options(args):
    """Merge the config file (which wins) into the parsed flags."""
    opts = vars(args).copy()
    if args.config:
        cfg = load_config(args.config)
        for k, v in cfg.items():
            key = k.replace("-", "_")
            if key == "tracers" and isinstance(v, dict):
                v = f"{v['nx']},{v['ny']}"
            if key == "sweep":
                key = "N"
            if key == "representation" and v not in ("sparse", "dense"):
                raise ValueError(f"unknown representation {v!r}")
            opts[key] = v
    opts["p"] = parse_exponent(opts["p"])
    opts["q"] = parse_exponent(opts["q"])
    return opts


def _params(opts, N):
    from .construction import ConstructionParams

    return ConstructionParams(opts["d"], opts["p"], opts["q"], opts["alpha"], int(N), strict=not opts.get("small_N"))


# -- commands ----------------------------------------------------------------------


def cmd_norms(opts):
    from .construction import build_initial_data, initial_norm_report
    from .fields import read_sfld
    from .lp import BesovParams, besov_norm

    if opts.get("field"):
        fld = read_sfld(opts["field"])
        s = opts["s"] if opts.get("s") is not None else fld.dims / opts["p"]
        rep = besov_norm(fld, BesovParams(s, opts["p"], opts["q"], not opts.get("nonhomogeneous")))
        rows = [{"j": j, "lp": lp, "weighted": w} for j, lp, w in rep.per_block]
        return rows, {"total": rep.total, "log2_total": rep.log2_total, "truncation_note": rep.truncation_note}
    rows = []
    for N in parse_sweep(opts["N"]):
        rep = initial_norm_report(build_initial_data(_params(opts, N)))
        for qd in rep["quantities"]:
            rows.append(
                {
                    "N": N,
                    "field": qd["field"],
                    "s": qd["s"],
                    "p": qd["p"],
                    "q": qd["q"],
                    "value": qd["value"],
                    "log2_value": qd["log2_value"],
                    "log2_bound": qd["log2_bound"],
                    "log2_ratio": qd["log2_ratio"],
                }
            )
    return rows, {}


def cmd_construct(opts):
    from .construction import build_initial_data

    out = opts.get("output_dir") or "."
    os.makedirs(out, exist_ok=True)
    N = parse_sweep(opts["N"])
    if len(N) != 1:
        raise ValueError("construct takes a single N")
    prm = _params(opts, N[0])
    rep = opts.get("representation", "sparse")
    grid, period = opts.get("grid"), opts.get("period")
    data = build_initial_data(
        prm,
        rep,
        bool(opts.get("hermitian")),
        shape=(grid,) * prm.d if grid else None,
        period=(period,) * prm.d if period else None,
    )
    files = []
    for name in ("u0", "b0"):
        fld = getattr(data, name)
        if rep == "sparse":
            path = os.path.join(out, f"{name}.json")
            with open(path, "w") as fh:
                json.dump(_jsonable(fld.to_dict()), fh, indent=1)
        else:
            path = os.path.join(out, f"{name}.sfld")
            write_sfld(path, fld)
        files.append(os.path.basename(path))
    rows = [{"file": f, "representation": rep, "N": prm.N, "lambda": prm.lam} for f in files]
    return rows, {"files": files}


def _picard_point(args):
    opts, N = args
    from .construction import besov_report, build_algebra_pair
    from .picard import lower_bound_IB

    prm = _params(opts, N)
    nl, nt = (int(v) for v in str(opts.get("nodes", "32,16")).split(","))
    res = lower_bound_IB(prm, (nl, nt), float(opts.get("rtol", 1e-4)))
    f, g = build_algebra_pair(prm)
    s = prm.d / prm.p
    nf = besov_report(f, s, prm.p, prm.q).total
    ng = besov_report(g, s, prm.p, prm.q).total
    return {
        "N": N,
        "alpha": prm.alpha,
        "p": prm.p,
        "q": prm.q,
        "IB1": res.IB1,
        "IB2": res.IB2,
        "IB_total": res.IB_total,
        "quad_err": res.quadrature_error,
        "norm_fN": nf,
        "norm_gN": ng,
        "product_lb": res.product_lb,
        "_converged": res.converged,
        "_lambda": prm.lam,
        "_product_err": res.product_error,
    }


def _workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer")


def _map(fn, items):
    w = _workers()
    if w == 1 or len(items) == 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, items))


def cmd_picard_sweep(opts):
    Ns = parse_sweep(opts["N"])
    results = _map(_picard_point, [(opts, N) for N in Ns])
    meta = {"converged": all(r["_converged"] for r in results), "device_constant": (2 * math.pi) ** (-2 * opts["d"])}
    rows = [{k: v for k, v in r.items() if not k.startswith("_")} for r in results]
    return rows, meta


def cmd_algebra_sweep(opts):
    from .picard import loglog_fit

    Ns = parse_sweep(opts["N"])
    results = _map(_picard_point, [(opts, N) for N in Ns])
    rows = [
        {
            "N": r["N"],
            "lambda": r["_lambda"],
            "norm_fN": r["norm_fN"],
            "norm_gN": r["norm_gN"],
            "product_lb": r["product_lb"],
            "product_err": r["_product_err"],
        }
        for r in results
    ]
    meta = {}
    if len(rows) >= 2:
        lb = np.array([r["product_lb"] for r in rows])
        lam = np.array([r["lambda"] for r in rows])
        meta["slope_raw"] = loglog_fit(Ns, lb)[0]
        meta["slope_without_lambda"] = loglog_fit(Ns, lb / lam)[0]
        meta["slope_norm_sum"] = loglog_fit(Ns, [r["norm_fN"] + r["norm_gN"] for r in rows])[0]
        meta["target_exponent"] = 1.0 - opts["alpha"]
    return rows, meta


def _sim_setup(opts, full_tracers=False):
    from .construction import build_initial_data
    from .mhd import SimConfig, seed_grid

    N = parse_sweep(opts["N"])
    if len(N) != 1:
        raise ValueError("simulate takes a single N")
    prm = _params(opts, N[0])
    if prm.d != 2:
        raise ValueError("the simulator is two-dimensional (d=2)")
    n, L = int(opts["grid"]), float(opts["period"])
    t_end = prm.T if str(opts["t_end"]) == "paper_T" else float(opts["t_end"])
    dt = None if str(opts["dt"]) == "auto" else float(opts["dt"])
    cfg = SimConfig((n, n), (L, L), dt, t_end, float(opts["dealias"]), checkpoints=int(opts["checkpoints"]), linearized=bool(opts.get("linearized")))
    if math.pi * n / L <= 2.0 ** (prm.N + 2) and not opts.get("small_N"):
        raise ResolutionError(f"grid Nyquist {math.pi * n / L:g} must exceed 2^(N+2) = {2.0 ** (prm.N + 2):g}")
    data = build_initial_data(prm, "dense", hermitian=True, shape=(n, n), period=(L, L))
    tracers = None
    if full_tracers:
        tracers = seed_grid(n, n, (L, L))
    elif opts.get("tracers"):
        nx, ny = (int(v) for v in str(opts["tracers"]).split(","))
        tracers = seed_grid(nx, ny, (L, L))
    return prm, cfg, data, tracers


def cmd_simulate(opts, decompose=False):
    from .mhd import decomposition_report, norm_timeseries, run
    from .lp import sobolev_norm

    prm, cfg, data, tracers = _sim_setup(opts, full_tracers=decompose)
    out = opts.get("output_dir")
    art = run(cfg, data.u0, data.b0, tracers=tracers, output_dir=out)
    buf = io.StringIO()
    rows = norm_timeseries(art, prm, buf)
    if out:
        with open(os.path.join(out, "norms.csv"), "w", newline="") as fh:
            fh.write(buf.getvalue())
    b_end = art.checkpoints[-1][2]
    meta = {
        "N": prm.N,
        "t_end": cfg.t_end,
        "dt": art.dt,
        "steps": art.final.step_count,
        "b_H1_ratio": sobolev_norm(b_end, 1.0) / sobolev_norm(data.b0, 1.0),
        "max_energy_residual": max(art.energy_residuals, default=0.0),
        "max_divergence": max((max(d) for d in art.divergence), default=0.0),
    }
    if decompose:
        from .picard import first_iterate_IB_field

        ib = first_iterate_IB_field(data, cfg.t_end)
        rep = decomposition_report(art, data.b0, ib, prm.N, cfg.t_end, q=prm.q)
        meta["decomposition"] = rep
        rows = [rep]
        if out:
            with open(os.path.join(out, "decomposition.json"), "w") as fh:
                json.dump(_jsonable(rep), fh, indent=1)
    meta["_artifacts"] = art
    return rows, meta


COMMANDS = {
    "norms": cmd_norms,
    "construct": cmd_construct,
    "picard-sweep": cmd_picard_sweep,
    "algebra-sweep": cmd_algebra_sweep,
    "simulate": cmd_simulate,
    "decompose": lambda o: cmd_simulate(o, decompose=True),
}


def write_table(rows, fmt_name, fh):
    if fmt_name == "json":
        json.dump(_jsonable(rows), fh, indent=1)
        fh.write("\n")
        return
    if not rows:
        return
    keys = list(rows[0].keys())
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow([fmt(r.get(k, "")) for k in keys])


def run_command(opts):
    """Dispatch ``opts['command']``; returns (rows, meta)."""
    t0 = time.perf_counter()
    rows, meta = COMMANDS[opts["command"]](opts)
    meta.pop("_artifacts", None)
    out = opts.get("output_dir")
    if out:
        os.makedirs(out, exist_ok=True)
        ext = "json" if opts["format"] == "json" else "csv"
        table = os.path.join(out, f"{opts['command']}.{ext}")
        with open(table, "w", newline="") as fh:
            write_table(rows, opts["format"], fh)
        manifest = {
            "command": opts["command"],
            "options": {k: v for k, v in opts.items() if k not in ("config",)},
            "config_file": opts.get("config"),
            "result": meta,
            "table": os.path.basename(table),
            "wall_time_s": time.perf_counter() - t0,
            "code_version": _version(),
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        }
        with open(os.path.join(out, "manifest.json"), "w") as fh:
            json.dump(_jsonable(manifest), fh, indent=1, default=str)
    return rows, meta


def _version():
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # running from a source tree without metadata
        return "unknown"


def _error(kind, exc, command, code):
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc), "command": command}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args)
        rows, meta = run_command(opts)
    except ResolutionError as exc:
        return _error("resolution", exc, args.command, EXIT_RESOLUTION)
    except (ValueError, KeyError, TypeError) as exc:
        return _error("invalid_parameter", exc, args.command, EXIT_DOMAIN)
    except OSError as exc:
        return _error("io", exc, args.command, EXIT_IO)
    except (RuntimeError, FloatingPointError) as exc:
        return _error("numerical", exc, args.command, EXIT_NUMERICAL)
    write_table(rows, opts["format"], sys.stdout)
    if meta and opts["format"] == "csv" and not opts.get("output_dir"):
        sys.stderr.write(json.dumps(_jsonable(meta)) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
