"""Command line: ``hierarchylab {gen,scatter,flow,verify}``.

Every artifact embeds the fully materialized configuration.  Files are written
through a temporary name and renamed, and JSON/CSV outputs carry no timestamps
or timings, so equal configurations give byte-identical files.

Exit codes: 0 success, 1 failed verification, 2 gen failure, 3 scattering
failure, 4 flow failure.  Usage errors exit with argparse's code 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

EXIT_VERIFY, EXIT_GEN, EXIT_SCATTER, EXIT_FLOW = 1, 2, 3, 4
THREADS_ENV = "HIERARCHYLAB_THREADS"
_BLAS_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "common": {"out": "hierarchylab-out", "seed": 0, "tol_ode": 1e-10, "tol_residual": 1e-7},
    "gen": {"family": "kdv", "n": 3},
    "scatter": {"family": "kdv", "potential": ["sech:a=0.5"], "z": ["0+2i"], "grid": 2048,
                "box": "-30,30", "tau0": 1.0, "det2": False, "remainder": None,
                "z_ray": "4,8,16,32", "tol_cross": 1e-6},
    "flow": {"family": "gardner", "n": 1, "tau0": 1.0, "tau": 2.0, "potential": ["wave"],
             "grid": 256, "period": 2 * math.pi, "dt": 2.5e-4, "t_end": 1.0, "sample_every": 40,
             "integrator": "auto", "intertwining": False, "flux": False, "plots": True},
    "verify": {"suite": "all", "fast": False, "inject_fault": []},
}


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, min(n, os.cpu_count() or 1))


def _cap_blas(n: int) -> None:
    for var in _BLAS_VARS:
        os.environ.setdefault(var, str(n))


def load_config_file(path: str) -> Dict[str, Any]:
    """JSON or TOML; either flat or with per-command tables."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".toml"):
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib  # type: ignore[no-redef]
        return tomllib.loads(raw.decode("utf-8"))
    return json.loads(raw.decode("utf-8"))


def parse_z(text: str) -> complex:
    """``"1+2i"``, ``"0+4i"``, ``"2i"`` or ``"3"`` -> complex."""
    t = text.strip().replace(" ", "").replace("I", "i").replace("j", "i")
    try:
        return complex(t.replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse z={text!r}; use re+imi, e.g. 1+2i")


def format_z(z: complex) -> str:
    return f"{z.real:g}{z.imag:+g}i"


def materialize(command: str, ns: argparse.Namespace, file_cfg: Dict[str, Any]) -> Dict[str, Any]:
    """Defaults < config file < explicit flags."""
    cfg: Dict[str, Any] = {"command": command}
    cfg.update(DEFAULTS["common"])
    cfg.update(DEFAULTS[command])
    flat = {k.replace("-", "_"): v for k, v in file_cfg.items() if not isinstance(v, dict)}
    section = {k.replace("-", "_"): v for k, v in file_cfg.get(command, {}).items()}
    for src in (flat, section):
        for k, v in src.items():
            if k in cfg:
                cfg[k] = v
    for k, v in vars(ns).items():
        if k in ("command", "config", "func") or v is None:
            continue
        cfg[k] = v
    if isinstance(cfg.get("potential"), str):
        cfg["potential"] = [cfg["potential"]]
    if isinstance(cfg.get("z"), str):
        cfg["z"] = [cfg["z"]]
    if "z" in cfg:
        cfg["z"] = [format_z(parse_z(z) if isinstance(z, str) else complex(z)) for z in cfg["z"]]
    cfg["threads"] = threads()
    from . import __version__
    cfg["version"] = __version__
    return dict(sorted(cfg.items()))


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def atomic_write(path: str, data: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _jsonable(x):
    import numpy as np
    from fractions import Fraction
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(np.real(x)), "im": float(np.imag(x))}
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, Fraction):
        return str(x)
    return x


def write_json(path: str, obj: Dict[str, Any], config: Dict[str, Any]) -> None:
    payload = {"config": config}
    payload.update(obj)
    atomic_write(path, json.dumps(_jsonable(payload), indent=1, sort_keys=False) + "\n")


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]],
              config: Dict[str, Any]) -> None:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(_jsonable(config), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    atomic_write(path, buf.getvalue())


def _say(msg: str) -> None:
    print(msg, flush=True)


# --------------------------------------------------------------------------
# gen
# --------------------------------------------------------------------------

def cmd_gen(cfg: Dict[str, Any]) -> int:
    from . import algebra as A
    from . import hierarchy as H
    from .errors import NotATotalDerivative, RecursionInconsistency, StructureViolation
    family, N = cfg["family"].lower(), int(cfg["n"])
    try:
        t = H.build_table(family, N)
    except (RecursionInconsistency, NotATotalDerivative, StructureViolation) as exc:
        print(f"gen failed: {exc}", file=sys.stderr)
        return EXIT_GEN
    d = os.path.join(cfg["out"], t.family)
    objs = H.table_to_json(t)
    written = []
    for n, obj in objs.items():
        obj = dict(obj)
        obj["checks"] = [{"name": c.name, "passed": c.passed} for c in t.checks]
        obj["meta"] = {k: v for k, v in t.meta.items()}
        path = os.path.join(d, f"{n}.json")
        write_json(path, obj, cfg)
        if family in ("goodvar", "goodvariable"):
            text = f"F{n} = {H.pretty_good_variable(t.entries[n].gradients['F'])}"
        else:
            text = H.pretty_entry(t, n)
        txt = os.path.join(d, f"{n}.txt")
        atomic_write(txt, "# config: " + json.dumps(_jsonable(cfg), sort_keys=True) + "\n" + text + "\n")
        written += [path, txt]
    _say(H.pretty_entry(t, N) if family not in ("goodvar", "goodvariable")
         else f"F{N} = {H.pretty_good_variable(t.entries[N].gradients['F'])}")
    _say(f"{len(t.checks)} identities checked; wrote {len(written)} files under {d}")
    return 0


# --------------------------------------------------------------------------
# scatter
# --------------------------------------------------------------------------

def _scatter_item(args) -> Dict[str, Any]:
    """One (potential, z) work item; returns a JSON-able record or an error record."""
    spec, zs, cfg = args
    from . import scattering as S
    from .errors import HierarchyLabError
    from .grid import Line, potential
    a, b = (float(v) for v in str(cfg["box"]).split(","))
    tol = S.Tolerances(rtol=cfg["tol_ode"], atol=min(cfg["tol_ode"] * 1e-2, 1e-12),
                       residual=cfg["tol_residual"], cross=cfg["tol_cross"])
    z = complex(zs.replace("i", "j"))
    rec: Dict[str, Any] = {"potential": spec, "z": zs}
    try:
        f = potential(spec, Line(a, b), int(cfg["grid"]))
        fam = cfg["family"].lower()
        if fam == "kdv":
            r = S.jost_solutions(S.Schrodinger(f), z, tol)
            g = S.generating_function("kdv", z, u=f, tol=tol)
        elif fam == "mkdv":
            r = S.jost_solutions(S.AKNS(f, f), z, tol)
            g = S.generating_function("kdv", z, u=S.miura_forward(f, 0.0), tol=tol)
        elif fam == "gardner":
            r = S.jost_solutions(S.Schrodinger(S.miura_forward(f, cfg["tau0"])), z, tol)
            g = S.generating_function("gardner", z, w=f, tau0=cfg["tau0"], tol=tol)
        else:
            raise ValueError(f"scatter supports kdv, mkdv, gardner; got {fam!r}")
        rec.update(T=r.T, T_renormalized=r.T_renormalized, wronskian_drift=r.wronskian_drift,
                   T_minus1_jost=g.jost, T_minus1_riccati=g.riccati,
                   route_difference=g.difference)
        if cfg["det2"]:
            if fam != "kdv":
                raise ValueError("--det2 applies to the Schroedinger (kdv) problem")
            d = S.fredholm_det2(z, f)
            rec.update(det2_T_minus1=d.value, det2_unrefined=d.fine, det2_coarse=d.coarse,
                       det2_difference=abs(d.value - g.jost))
    except (HierarchyLabError, ValueError, OSError) as exc:
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


def _remainder_item(args) -> Dict[str, Any]:
    spec, N, taus, cfg = args
    from . import scattering as S
    from .errors import HierarchyLabError
    from .grid import Line, potential
    a, b = (float(v) for v in str(cfg["box"]).split(","))
    try:
        u = potential(spec, Line(a, b), int(cfg["grid"]))
        p = S.remainder_slope(N, u, taus)
        return {"potential": spec, "N": N, "taus": p.taus, "values": p.values, "slope": p.slope}
    except (HierarchyLabError, ValueError, OSError) as exc:
        return {"potential": spec, "N": N, "error": f"{type(exc).__name__}: {exc}"}


def _parse_remainder(text: Optional[str]) -> Optional[int]:
    if text in (None, "", False):
        return None
    t = str(text).strip()
    if t.upper().startswith("N="):
        t = t[2:]
    return int(t)


def _pmap(fn, items: List, n_threads: int) -> List:
    if n_threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=min(n_threads, len(items))) as ex:
        return list(ex.map(fn, items))


def cmd_scatter(cfg: Dict[str, Any]) -> int:
    for zs in cfg["z"]:
        if complex(zs.replace("i", "j")).imag <= 0:
            print(f"scatter: z={zs} must lie in the upper half plane", file=sys.stderr)
            return EXIT_SCATTER
    items = [(p, z, cfg) for p in cfg["potential"] for z in cfg["z"]]
    records = _pmap(_scatter_item, items, cfg["threads"])
    out: Dict[str, Any] = {"records": records}
    N = _parse_remainder(cfg["remainder"])
    if N is not None:
        taus = [float(v) for v in str(cfg["z_ray"]).split(",")]
        out["remainder"] = _pmap(_remainder_item, [(p, N, taus, cfg) for p in cfg["potential"]],
                                 cfg["threads"])
    os.makedirs(cfg["out"], exist_ok=True)
    write_json(os.path.join(cfg["out"], "scatter.json"), out, cfg)
    cols = ["T_renormalized", "T_minus1_jost", "T_minus1_riccati", "det2_T_minus1"]
    header = ["potential", "z"] + [f"{c}_{p}" for c in cols for p in ("re", "im")] + \
             ["route_difference", "det2_difference", "error"]
    rows = []
    for r in records:
        row: List[Any] = [r["potential"], r["z"]]
        for c in cols:
            v = r.get(c)
            row += ["", ""] if v is None else [float(complex(v).real), float(complex(v).imag)]
        row += [r.get("route_difference", ""), r.get("det2_difference", ""), r.get("error", "")]
        rows.append(row)
    write_csv(os.path.join(cfg["out"], "scatter.csv"), header, rows, cfg)
    if N is not None:
        rrows = []
        for r in out["remainder"]:
            for t, v in zip(r.get("taus", []), r.get("values", [])):
                rrows.append([r["potential"], N, t, v, r["slope"]])
        write_csv(os.path.join(cfg["out"], "remainder.csv"),
                  ["potential", "N", "tau", "abs_T_N", "fitted_slope"], rrows, cfg)
    failed = [r for r in records + out.get("remainder", []) if "error" in r]
    for r in records:
        if "error" in r:
            continue
        line = (f"{r['potential']} z={r['z']}: T_r={complex(r['T_renormalized']):.10g} "
                f"T_-1={complex(r['T_minus1_jost']):.10g} |jost-riccati|={r['route_difference']:.1e}")
        if "det2_difference" in r:
            line += f" |det2-jost|={r['det2_difference']:.1e}"
        _say(line)
    for r in out.get("remainder", []):
        if "slope" in r:
            _say(f"{r['potential']} remainder N={r['N']}: slope {r['slope']:.3f} over tau {r['taus']}")
    for r in failed:
        print(f"scatter failed for potential={r['potential']} "
              f"{'z=' + r['z'] if 'z' in r else 'N=' + str(r.get('N'))}: {r['error']}", file=sys.stderr)
    return EXIT_SCATTER if failed else 0


# --------------------------------------------------------------------------
# flow
# --------------------------------------------------------------------------

def _plot(path: str, times, series: Dict[str, Any], ylabel: str, title: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, vals in series.items():
        ax.semilogy(times, np.maximum(np.abs(vals), 1e-18), label=name)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    tmp = path + ".tmp.png"
    fig.savefig(tmp, dpi=120)
    plt.close(fig)
    os.replace(tmp, path)


def cmd_flow(cfg: Dict[str, Any]) -> int:
    import numpy as np
    from . import flows as F
    from .errors import BlowupDetected, HierarchyLabError, StabilityViolation
    from .grid import potential
    out = cfg["out"]
    try:
        spec = F.FlowSpec(cfg["family"], int(cfg["n"]), tau0=float(cfg["tau0"]), tau=float(cfg["tau"]),
                          grid=int(cfg["grid"]), period=float(cfg["period"]), t_end=float(cfg["t_end"]),
                          dt=float(cfg["dt"]), integrator=cfg["integrator"],
                          sample_every=int(cfg["sample_every"]))
    except (ValueError, StabilityViolation) as exc:
        print(f"flow: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_FLOW
    cfg = dict(cfg)
    cfg["flow_spec"] = spec.to_json()
    try:
        init = potential(cfg["potential"][0], spec.geometry, spec.grid)
    except (HierarchyLabError, ValueError, OSError) as exc:
        print(f"flow: bad initial data {cfg['potential'][0]!r}: {exc}", file=sys.stderr)
        return EXIT_FLOW
    fam = spec.family
    diag: Dict[str, Any] = {}
    try:
        if cfg["intertwining"]:
            if fam != "gardner":
                raise ValueError("--intertwining starts from Gardner data (family gardner)")
            series, trajs = F.intertwining_check(spec, init)
            traj = trajs["gardner"]
            diag["intertwining"] = {k: v for k, v in series.residuals.items()}
            diag["intertwining_max"] = {k: float(np.max(v) if k != "min_one_plus_v" else np.min(v))
                                        for k, v in series.residuals.items()}
        else:
            traj = F.evolve(spec, init)
    except BlowupDetected as exc:
        print(f"flow failed: {exc} (last good time {exc.last_good_time:.6g})", file=sys.stderr)
        return EXIT_FLOW
    except StabilityViolation as exc:
        print(f"flow failed: {exc}", file=sys.stderr)
        return EXIT_FLOW
    except (HierarchyLabError, ValueError) as exc:
        print(f"flow failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FLOW
    # conserved quantities
    K = 3
    if fam == "gardner":
        hams = F.gardner_conserved(K)
    elif fam == "kdv":
        hams = F.kdv_conserved(K)
    else:
        hams = {}
    extra = {"L2": F.l2_squared}
    rep = F.conservation_report(traj, hams, extra=extra) if fam != "tauflow" else \
        F.conservation_report(traj, {}, extra=extra)
    drifts = {k: rep.drift(k) for k in rep.conserved}
    diag.update(drift=drifts, projection_defect=traj.projection_defect)
    if cfg["flux"]:
        if fam != "gardner":
            print("flow: --flux applies to the Gardner family", file=sys.stderr)
            return EXIT_FLOW
        st = F.flux_order_study(spec.N, init, spec.tau0, [spec.dt * 4, spec.dt * 2, spec.dt])
        diag["flux_study"] = st.to_json()
    os.makedirs(out, exist_ok=True)
    payload = {"times": traj.times, "conserved": {k: np.real(v) for k, v in rep.conserved.items()},
               **diag}
    write_json(os.path.join(out, "diagnostics.json"), payload, cfg)
    names = sorted(rep.conserved)
    rows = [[float(t)] + [float(np.real(rep.conserved[k][i])) for k in names]
            for i, t in enumerate(traj.times)]
    write_csv(os.path.join(out, "diagnostics.csv"), ["t"] + names, rows, cfg)
    xs = traj.geometry.nodes(spec.grid)
    write_csv(os.path.join(out, "trajectory.csv"), ["t"] + [f"x={x:.6g}" for x in xs],
              [[float(t)] + [float(v) for v in s] for t, s in zip(traj.times, traj.snapshots)], cfg)
    if "intertwining" in diag:
        keys = [k for k in diag["intertwining"] if k != "min_one_plus_v"]
        write_csv(os.path.join(out, "intertwining.csv"), ["t"] + keys,
                  [[float(t)] + [float(diag["intertwining"][k][i]) for k in keys]
                   for i, t in enumerate(traj.times)], cfg)
    if cfg["plots"]:
        rel = {k: (np.real(v) - np.real(v[0])) / max(abs(v[0]), 1e-300) for k, v in rep.conserved.items()}
        _plot(os.path.join(out, "drift.png"), traj.times, rel, "relative drift",
              f"{fam} N={spec.N}")
        if "intertwining" in diag:
            _plot(os.path.join(out, "residuals.png"), traj.times,
                  {k: diag["intertwining"][k] for k in ("miura", "good_variable")},
                  "sup residual", f"intertwining N={spec.N}")
    _say(f"{fam} N={spec.N}: t_end={spec.t_end:g} dt={spec.dt:g} integrator={spec.integrator}")
    for k, v in drifts.items():
        _say(f"  drift {k}: {v:.2e}")
    for k, v in diag.get("intertwining_max", {}).items():
        _say(f"  {k}: {v:.2e}")
    if "flux_study" in diag:
        fs = diag["flux_study"]
        _say("  flux residuals " + ", ".join(f"{x:.2e}" for x in fs["residuals"])
             + "; orders " + ", ".join(f"{x:.2f}" for x in fs["orders"]))
    return 0


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------

def cmd_verify(cfg: Dict[str, Any]) -> int:
    from .verify import run_suite

    def show(r):
        _say(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
    rep = run_suite(cfg["suite"], fast=bool(cfg["fast"]), faults=tuple(cfg["inject_fault"] or ()),
                    tol_cross=1e-6, tol_residual=float(cfg["tol_residual"]), progress=show)
    obj = rep.to_json()
    for c in obj["checks"]:
        c.pop("seconds", None)  # keep the report deterministic
    os.makedirs(cfg["out"], exist_ok=True)
    write_json(os.path.join(cfg["out"], f"verify-{cfg['suite']}.json"), obj, cfg)
    _say(f"{len(rep.results) - len(rep.failed)}/{len(rep.results)} checks passed")
    for r in rep.failed:
        print(f"FAILED {r.name}: {r.detail}", file=sys.stderr)
    return 0 if rep.passed else EXIT_VERIFY


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or TOML file; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="seed for randomized property checks")
    p.add_argument("--tol-ode", dest="tol_ode", type=float, help="relative ODE tolerance")
    p.add_argument("--tol-residual", dest="tol_residual", type=float, help="residual gate")


def _defaults_epilog(command: str) -> str:
    d = {**DEFAULTS["common"], **DEFAULTS[command]}
    return "defaults: " + ", ".join(f"{k}={v}" for k, v in sorted(d.items()))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hierarchylab",
                                 description="Integrable hierarchies: symbolic tables, scattering, flows.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a hierarchy table", epilog=_defaults_epilog("gen"))
    _common(g)
    g.add_argument("--family", choices=["akns", "kdv", "gardner", "mkdv", "goodvar"])
    g.add_argument("--n", type=int)

    s = sub.add_parser("scatter", help="transmission coefficients and generating functions", epilog=_defaults_epilog("scatter"))
    _common(s)
    s.add_argument("--family", choices=["kdv", "mkdv", "gardner"])
    s.add_argument("--potential", action="append", help="name:k=v,... or csv:path (repeatable)")
    s.add_argument("--z", action="append", help="spectral parameter re+imi (repeatable)")
    s.add_argument("--grid", type=int, help="grid points on the line")
    s.add_argument("--box", help="line interval a,b")
    s.add_argument("--tau0", type=float, help="Gardner parameter")
    s.add_argument("--det2", action="store_const", const=True, help="add the Fredholm determinant route")
    s.add_argument("--remainder", help="N=k: remainder probe of order k")
    s.add_argument("--z-ray", dest="z_ray", help="tau values for the remainder probe, comma separated")
    s.add_argument("--tol-cross", dest="tol_cross", type=float, help="cross-route gate")

    f = sub.add_parser("flow", help="evolve a flow and report diagnostics", epilog=_defaults_epilog("flow"))
    _common(f)
    f.add_argument("--family", choices=["kdv", "gardner", "goodvar", "tauflow"])
    f.add_argument("--n", type=int)
    f.add_argument("--tau0", type=float)
    f.add_argument("--tau", type=float, help="tau of the tau flow")
    f.add_argument("--potential", action="append", help="initial data name:k=v,... or csv:path")
    f.add_argument("--grid", type=int)
    f.add_argument("--period", type=float)
    f.add_argument("--dt", type=float)
    f.add_argument("--t-end", dest="t_end", type=float)
    f.add_argument("--sample-every", dest="sample_every", type=int)
    f.add_argument("--integrator", choices=["auto", "etdrk4", "exprb4", "gauss4", "rk4"])
    f.add_argument("--intertwining", action="store_const", const=True,
                   help="also evolve the KdV and good-variable partners")
    f.add_argument("--flux", action="store_const", const=True, help="flux residual order study")
    f.add_argument("--no-plots", dest="plots", action="store_const", const=False)

    v = sub.add_parser("verify", help="run verification suites", epilog=_defaults_epilog("verify"))
    _common(v)
    v.add_argument("--suite", choices=["symbolic", "scattering", "flows", "all"])
    v.add_argument("--fast", action="store_const", const=True)
    v.add_argument("--inject-fault", dest="inject_fault", action="append", help=argparse.SUPPRESS)
    return ap


COMMANDS = {"gen": cmd_gen, "scatter": cmd_scatter, "flow": cmd_flow, "verify": cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    _cap_blas(threads())
    ap = build_parser()
    ns = ap.parse_args(argv)
    file_cfg: Dict[str, Any] = {}
    if ns.config:
        try:
            file_cfg = load_config_file(ns.config)
        except (OSError, ValueError) as exc:
            ap.error(f"cannot read config {ns.config}: {exc}")
    try:
        cfg = materialize(ns.command, ns, file_cfg)
    except argparse.ArgumentTypeError as exc:
        ap.error(str(exc))
    print("config: " + json.dumps(_jsonable(cfg), sort_keys=True), file=sys.stderr, flush=True)
    if cfg.get("seed") is not None:
        import numpy as np
        np.random.seed(int(cfg["seed"]))
    return COMMANDS[ns.command](cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
