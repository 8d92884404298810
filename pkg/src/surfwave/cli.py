"""Command-line interface: ``surfwave <subcommand> ...``.

Every subcommand writes plot-ready CSV files whose first line is a
``# model_hash=... config_hash=...`` comment, plus a JSON summary
``<subcommand>.json`` in the output directory. Expensive tables are cached
as ``.npz`` files under ``<out>/cache`` keyed by the model hash, the
operation and a hash of its parameters. ``SURFWAVE_WORKERS`` sets the
number of worker processes; results are merged in task order, so the
output bytes do not depend on it.

Exit codes: 0 success, 1 validation failure, 2 numerical non-convergence,
64 usage error.
"""

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acoustic, modes, raytrace, spectrum, weyl
from . import impedance as imp
from .errors import ParseError, SurfwaveError, UsageError, ValidationError
from .model import load_model, validate

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 64
# parameters that do not change results and stay out of the config hash
_NOT_HASHED = {"out", "cache", "command", "func"}


@dataclass
class RunConfig:
    command: str
    model: str | None
    out: Path
    cache: bool = True
    seed: int = 0
    params: dict = field(default_factory=dict)

    @property
    def config_hash(self):
        blob = json.dumps({"command": self.command, "seed": self.seed, **self.params}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def check(self):
        for name, val in self.params.items():
            if ("tol" in name or name in ("tmax", "eps", "E")) and val is not None and not np.all(
                    np.asarray(val, float) > 0):
                raise UsageError(f"--{name} must be positive")
            if isinstance(val, list) and not val:
                raise UsageError(f"--{name} must not be empty")
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"output directory {self.out} is not writable: {exc}") from exc
        if not os.access(self.out, os.W_OK):
            raise UsageError(f"output directory {self.out} is not writable")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, cfg, model_hash, columns, rows):
    lines = [f"# model_hash={model_hash} config_hash={cfg.config_hash}", ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary(cfg, model_hash, payload, code=EXIT_OK):
    data = {"command": cfg.command, "model_hash": model_hash, "config_hash": cfg.config_hash,
            "exit_code": code, **payload}
    (cfg.out / f"{cfg.command}.json").write_text(json.dumps(data, indent=2, sort_keys=True,
                                                            default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return str(obj)


def _cache_path(cfg, model_hash, op, params):
    key = hashlib.sha256(json.dumps([model_hash, op, params], sort_keys=True).encode()).hexdigest()[:24]
    return cfg.out / "cache" / f"{op}-{key}.npz"


def cached(cfg, model_hash, op, params, compute):
    """Load ``compute()``'s array dict from the cache or compute and store it."""
    path = _cache_path(cfg, model_hash, op, params)
    if cfg.cache and path.exists():
        with np.load(path, allow_pickle=False) as f:
            return {k: f[k] for k in f.files}
    data = compute()
    if cfg.cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, **data)
        os.replace(tmp, path)
    return data


def workers():
    try:
        return max(1, int(os.environ.get("SURFWAVE_WORKERS", "1")))
    except ValueError as exc:
        raise UsageError("SURFWAVE_WORKERS must be an integer") from exc


def parallel_map(fn, tasks):
    """``[fn(t) for t in tasks]``, optionally across processes, in task order."""
    n = workers()
    if n == 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, tasks))


def _xi_hat(angle):
    return (float(np.cos(angle)), float(np.sin(angle)))


# ---------------------------------------------------------------- subcommands

def cmd_validate(cfg, model):
    report = validate(model)
    for line in report.lines():
        print(line)
    rows = [(k.where, k.kind, k.Z, k.min_eigenvalue, "pass" if k.passed else "FAIL") for k in report.knots]
    rows += [(k.where, k.kind, "", "", "pass" if k.passed else "FAIL") for k in report.other]
    write_csv(cfg.out / "validate.csv", cfg, model.model_hash, ("where", "kind", "Z", "min_eigenvalue", "status"),
              rows)
    code = EXIT_OK if report.passed else EXIT_INVALID
    failures = [{"where": f.where, "kind": f.kind, "message": f.message} for f in report.failures]
    write_summary(cfg, model.model_hash, {"passed": report.passed, "failures": failures}, code)
    return code


def cmd_vlimit(cfg, model):
    p = cfg.params
    x, xh = (p["x1"], p["x2"]), _xi_hat(p["angle"])
    prof = model.column(x)
    rows = []
    for Z in prof.Z:
        lv = acoustic.limiting_velocity(model, x, xh, float(Z), full=True)
        rows.append((float(Z), lv.v_L, " ".join(f"{a:.12g}" for a in lv.angles)))
    write_csv(cfg.out / "vlimit.csv", cfg, model.model_hash, ("Z", "v_L", "angles"), rows)
    dm = acoustic.infimum_limiting_velocity(model, x, xh)
    summary = {"v_inf": dm.v_inf, "Z_at_min": dm.Z_at_min, "v_tail": dm.v_tail, "v_surface": dm.v_surface,
               "surface_minimum": dm.surface_minimum, "assumption_holds": dm.assumption_holds}
    write_summary(cfg, model.model_hash, summary)
    print(f"v_L(Z_I) = {dm.v_tail:.12g}  inf_Z v_L = {dm.v_inf:.12g} at Z = {dm.Z_at_min:.6g}")
    return EXIT_OK


def _dispersion_row(task):
    model, x, xh, k, nb, solver, order = task
    res = spectrum.SOLVERS[solver](model, x, k, xh, order=order)
    out = []
    for b in range(min(nb, len(res.eigenvalues))):
        flag = "truncation_suspect" if res.truncation_suspect[b] else "ok"
        out.append((k, b, res.eigenvalues[b], res.phase_velocity[b], res.group_velocity[b], flag))
    return out


def cmd_dispersion(cfg, model):
    p = cfg.params
    if p["nk"] < 1 or p["branches"] < 1 or not 0 < p["kmin"] <= p["kmax"]:
        raise UsageError("need nk >= 1, branches >= 1 and 0 < kmin <= kmax")
    ks = np.geomspace(p["kmin"], p["kmax"], p["nk"]) if p["log"] else np.linspace(p["kmin"], p["kmax"], p["nk"])
    x, xh = (p["x1"], p["x2"]), _xi_hat(p["angle"])

    def compute():
        tasks = [(model, x, xh, float(k), p["branches"], p["solver"], p["order"]) for k in ks]
        rows = [r for chunk in parallel_map(_dispersion_row, tasks) for r in chunk]
        arr = np.array([r[:5] for r in rows], dtype=float).reshape(-1, 5)
        return {"rows": arr, "flags": np.array([r[5] for r in rows], dtype="U32")}

    data = cached(cfg, model.model_hash, "dispersion", {k: v for k, v in p.items()}, compute)
    rows = [(r[0], int(r[1]), r[2], r[3], r[4], f) for r, f in zip(data["rows"], data["flags"])]
    write_csv(cfg.out / "dispersion.csv", cfg, model.model_hash,
              ("k", "branch", "Lambda", "phase_velocity", "group_velocity", "flag"), rows)
    write_summary(cfg, model.model_hash, {"rows": len(rows), "k_values": len(ks),
                                          "truncation_suspect": int(np.sum(data["flags"] != "ok"))})
    print(f"{len(rows)} rows -> {cfg.out / 'dispersion.csv'}")
    return EXIT_OK


def cmd_impedance(cfg, model):
    p = cfg.params
    x, xh = (p["x1"], p["x2"]), _xi_hat(p["angle"])
    trip = acoustic.acoustic_triple(model, x, xh, 0.0)
    v_L = acoustic.limiting_velocity_triple(trip)
    vs = np.linspace(0.0, p["vmax_frac"] * v_L, p["nv"])
    rows = []
    for v in vs:
        it = imp.impedance_triple(trip, float(v))
        rows.append((float(v), *it.eigenvalues, it.det, it.trace_gap, it.riccati_residual, it.hermitian_defect))
    write_csv(cfg.out / "impedance.csv", cfg, model.model_hash,
              ("v", "eig1", "eig2", "eig3", "det", "trace_gap", "riccati_residual", "hermitian_defect"), rows)
    bl = imp.barnett_lothe_triple(trip, v_L=v_L)
    summary = {"v_L": v_L, "barnett_lothe": {"holds": bl.holds, "limit_det": bl.limit_det,
                                             "limit_trace_gap": bl.limit_trace_gap}}
    if bl.holds:
        root = imp.secular_root_triple(trip, v_L=v_L, check=False)
        summary["v0"] = root.v0
        print(f"v_L(0) = {v_L:.12g}  surface-wave speed v0 = {root.v0:.12g}")
    else:
        print(f"v_L(0) = {v_L:.12g}  Barnett-Lothe condition fails: no subsonic surface wave")
    write_summary(cfg, model.model_hash, summary)
    return EXIT_OK


def cmd_weyl(cfg, model):
    p = cfg.params
    x, xh = (p["x1"], p["x2"]), _xi_hat(p["angle"])
    rep = weyl.weyl_check(model, x, xh, p["E"], p["k"], kind=p["kind"], bound=p["bound"], order=p["order"])
    rows = [(r.k, r.N, r.prediction, r.rel_error) for r in rep.rows]
    write_csv(cfg.out / "weyl.csv", cfg, model.model_hash, ("k", "N", "prediction", "rel_error"), rows)
    summary = {"E": rep.E, "kind": rep.kind, "area": rep.area, "decreasing": rep.decreasing,
               "passed": rep.passed, "flags": rep.flags}
    if p["mc"]:
        est, box = weyl.monte_carlo_area(model, x, xh, p["E"], kind=p["kind"], m=p["mc_log2"], seed=cfg.seed)
        summary["monte_carlo_area"] = est
        summary["monte_carlo_rel_diff"] = abs(est / rep.area - 1.0)
    write_summary(cfg, model.model_hash, summary)
    for r in rep.rows:
        print(f"k={r.k:g} N={r.N} prediction={r.prediction:.4f} rel_error={r.rel_error:.4g}")
    print("pass" if rep.passed else "fail")
    return EXIT_OK


def cmd_trace(cfg, model):
    p = cfg.params
    fparams = {k: p[k] for k in ("branch", "solver", "kmin", "kmax", "nk", "nx", "ntheta", "order", "box")}

    def compute():
        fld = raytrace.build_hamiltonian(model, p["branch"], box=p["box"], k_range=(p["kmin"], p["kmax"]),
                                         n_k=p["nk"], n_x=(p["nx"], p["nx"]), n_theta=p["ntheta"],
                                         solver=p["solver"], order=p["order"], seed=cfg.seed)
        return raytrace.field_to_arrays(fld)

    fld = raytrace.field_from_arrays(cached(cfg, model.model_hash, "hamiltonian", fparams, compute))
    angles = p["angles"] if p["angles"] else list(np.linspace(0, 2 * np.pi, p["nrays"], endpoint=False))
    jac = None if p["jacobian"] == "none" else p["jacobian"]
    rays = raytrace.trace_fan(fld, np.array(p["y"]), p["k"], angles, p["tmax"], jacobian=jac,
                              rtol=p["rtol"])
    cols = ("t", "x1", "x2", "xi1", "xi2", "phase", "tau", "A0", "flags")
    drift = []
    for i, ray in enumerate(rays):
        rows = [(s.t, s.x[0], s.x[1], s.xi[0], s.xi[1], s.phase, s.tau, s.A0, "|".join(s.flags)) for s in ray]
        write_csv(cfg.out / f"ray_{i:03d}.csv", cfg, model.model_hash, cols, rows)
        H = np.array([fld.sqrt_lambda(s.x, s.xi) for s in ray])
        drift.append(float(np.max(np.abs(H / H[0] - 1.0))))
    write_summary(cfg, model.model_hash, {"rays": len(rays), "cv_error": fld.cv_error, "axes": list(fld.axes),
                                          "max_hamiltonian_drift": max(drift),
                                          "exited": sum("exit" in r[-1].flags for r in rays)})
    print(f"{len(rays)} rays, max relative Hamiltonian drift {max(drift):.2e}")
    return EXIT_OK


def cmd_modes(cfg, model):
    p = cfg.params
    ls = list(range(p["lmin"], p["lmax"] + 1))

    def compute():
        cat = modes.mode_catalog(model, p["eps"], ls, p["nmax"], types=tuple(p["types"]), jeans=p["jeans"],
                                 order=p["order"])
        return {"type": np.array([e.type for e in cat], dtype="U16"),
                "ints": np.array([(e.n, e.l, e.degeneracy) for e in cat], dtype=np.int64).reshape(-1, 3),
                "vals": np.array([(e.k, e.omega) for e in cat], dtype=float).reshape(-1, 2)}

    data = cached(cfg, model.model_hash, "modes", p, compute)
    rows = [(t, int(i[0]), int(i[1]), v[0], v[1], int(i[2]))
            for t, i, v in zip(data["type"], data["ints"], data["vals"])]
    write_csv(cfg.out / "modes.csv", cfg, model.model_hash, ("type", "n", "l", "k", "omega", "degeneracy"), rows)
    write_summary(cfg, model.model_hash, {"entries": len(rows)})
    print(f"{len(rows)} modes -> {cfg.out / 'modes.csv'}")
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "vlimit": cmd_vlimit, "dispersion": cmd_dispersion,
            "impedance": cmd_impedance, "weyl": cmd_weyl, "trace": cmd_trace, "modes": cmd_modes}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n\n{self.format_help()}")


def build_parser():
    ap = _Parser(prog="surfwave", description="Elastic surface waves in stratified anisotropic media.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, direction=True):
        sp.add_argument("--model", help="model JSON file")
        sp.add_argument("--out", default="surfwave_out", help="output directory")
        sp.add_argument("--no-cache", dest="cache", action="store_false", help="disable the result cache")
        sp.add_argument("--seed", type=int, default=0)
        if direction:
            sp.add_argument("--x1", type=float, default=0.0)
            sp.add_argument("--x2", type=float, default=0.0)
            sp.add_argument("--angle", type=float, default=0.0, help="propagation azimuth (radians)")
        return sp

    v = common(sub.add_parser("validate", help="check strong convexity, symmetry and tail"), direction=False)
    v.add_argument("model_path", nargs="?", help="model JSON file (alternative to --model)")
    common(sub.add_parser("vlimit", help="limiting velocity at every knot"))

    d = common(sub.add_parser("dispersion", help="dispersion table"))
    d.add_argument("--kmin", type=float, required=True)
    d.add_argument("--kmax", type=float, required=True)
    d.add_argument("--nk", type=int, default=20)
    d.add_argument("--branches", type=int, default=3)
    d.add_argument("--solver", choices=("full", "love", "rayleigh"), default="full")
    d.add_argument("--order", type=int, default=4)
    d.add_argument("--log", action="store_true", help="log-spaced k")

    i = common(sub.add_parser("impedance", help="surface impedance and Barnett-Lothe check"))
    i.add_argument("--nv", type=int, default=20)
    i.add_argument("--vmax-frac", type=float, default=0.95)

    w = common(sub.add_parser("weyl", help="Weyl-law counting check"))
    w.add_argument("--E", type=float, required=True, help="level in velocity squared")
    w.add_argument("--k", type=float, nargs="+", default=[10.0, 30.0, 100.0, 300.0])
    w.add_argument("--kind", choices=weyl.KINDS, default="love")
    w.add_argument("--bound", type=float, default=0.1)
    w.add_argument("--order", type=int, default=4)
    w.add_argument("--mc", action="store_true", help="Monte Carlo cross-check of the area")
    w.add_argument("--mc-log2", type=int, default=18)

    t = common(sub.add_parser("trace", help="ray fan under the branch Hamiltonian"), direction=False)
    t.add_argument("--branch", type=int, default=0)
    t.add_argument("--solver", choices=("full", "love", "rayleigh"), default="full")
    t.add_argument("--kmin", type=float, required=True)
    t.add_argument("--kmax", type=float, required=True)
    t.add_argument("--nk", type=int, default=8)
    t.add_argument("--nx", type=int, default=6)
    t.add_argument("--ntheta", type=int, default=16)
    t.add_argument("--order", type=int, default=4)
    t.add_argument("--box", type=float, nargs=4, default=None)
    t.add_argument("--y", type=float, nargs=2, default=[0.0, 0.0], help="source point")
    t.add_argument("--k", type=float, required=True, help="launch wavenumber")
    t.add_argument("--angles", type=float, nargs="*", default=None)
    t.add_argument("--nrays", type=int, default=8)
    t.add_argument("--tmax", type=float, required=True)
    t.add_argument("--jacobian", choices=("none", "point", "plane"), default="point")
    t.add_argument("--rtol", type=float, default=1e-11)

    m = common(sub.add_parser("modes", help="normal-mode catalog of a radial model"), direction=False)
    m.add_argument("--eps", type=float, required=True, help="inverse scaled radius")
    m.add_argument("--lmin", type=int, default=1)
    m.add_argument("--lmax", type=int, required=True)
    m.add_argument("--nmax", type=int, default=2)
    m.add_argument("--types", nargs="+", choices=tuple(modes.TYPES), default=["toroidal", "spheroidal"])
    m.add_argument("--jeans", action="store_true", help="use k = eps (l + 1/2)")
    m.add_argument("--order", type=int, default=4)
    return ap


def run(argv=None):
    """Parse ``argv``, execute one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        params = {k: v for k, v in vars(args).items() if k not in _NOT_HASHED | {"model", "model_path", "seed"}}
        model_path = args.model or getattr(args, "model_path", None)
        if model_path is None:
            raise UsageError(f"a model file is required\n\n{parser.format_help()}")
        cfg = RunConfig(args.command, model_path, Path(args.out), args.cache, args.seed, params)
        cfg.check()
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    model_hash = ""
    try:
        model = load_model(cfg.model, check=False)
        model_hash = model.model_hash
        if cfg.command != "validate":
            report = validate(model)
            if not report.passed:
                f = report.failures[0]
                raise ValidationError(f.kind, f.where, f.message)
        return COMMANDS[cfg.command](cfg, model)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        _safe_summary(cfg, model_hash, exc, EXIT_INVALID)
        return EXIT_INVALID
    except (UsageError, ValueError) as exc:
        # ValueError here means a parameter combination the numerics reject (e.g. E above threshold)
        print(f"usage error: {exc}", file=sys.stderr)
        _safe_summary(cfg, model_hash, exc, EXIT_USAGE)
        return EXIT_USAGE
    except (SurfwaveError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        _safe_summary(cfg, model_hash, exc, EXIT_NUMERIC)
        return EXIT_NUMERIC


def _safe_summary(cfg, model_hash, exc, code):
    try:
        write_summary(cfg, model_hash, {"error": type(exc).__name__, "message": str(exc)}, code)
    except OSError:
        pass


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
