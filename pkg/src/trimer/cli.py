"""Command-line interface: `trimer <subcommand> ...`."""
import argparse
import concurrent.futures as cf
import csv
import io
import json
import os
import sys
import time

import numpy as np

from . import bound_states, oracle, two_body
from .birman_schwinger import limit_funcs, limit_matrix_general_K
from .dispersion import ModelParams
from .errors import InvalidArgument, TrimerError
from .torus_grid import make_grid

CSV_COLUMNS = ["gamma", "lambda", "K1", "K2", "K3", "tau_min", "tau_max", "E_min", "E_max",
               "gap_width", "n_below", "mult_below", "n_gap", "z_below", "z_gap",
               "max_residual"]

SCAN_HELP = """\
phase-scan output, one row per (gamma, lambda), gamma outer and lambda inner:
  gamma, lambda, K1, K2, K3    parameters
  tau_min, tau_max             two-particle branch
  E_min, E_max                 three-particle band
  gap_width                    E_min - tau_max, or 0 when there is no gap
  n_below, mult_below          distinct states below tau_min and their total multiplicity
  n_gap                        distinct states in the gap window
  z_below, z_gap               JSON arrays of [z, multiplicity] pairs
  max_residual                 largest relative residual of the reconstructed eigenfunctions
Reals carry 12 significant digits.  JSON output is a list of objects with the same keys.

Config file (--config): a JSON object whose keys are the long flag names with
dashes replaced by underscores, e.g. {"gamma_range": [1, 6, 6], "K": [0, 0, 0]}.
Flags given on the command line override the file."""


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return "null"
    x = float(x)
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def _to_json(obj):
    if isinstance(obj, dict):
        return {k: _to_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_to_json(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj)) if np.isfinite(obj) else fmt(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj):
    return json.dumps(_to_json(obj), sort_keys=False)


def parse_vec(text, name="K"):
    try:
        if isinstance(text, str):
            vals = [float(t) for t in text.split(",")]
        else:
            vals = [float(t) for t in text]
    except (TypeError, ValueError):
        raise InvalidArgument(f"--{name}: expected three comma-separated reals, got {text!r}")
    if len(vals) != 3 or not all(np.isfinite(vals)):
        raise InvalidArgument(f"--{name}: expected three finite reals, got {text!r}")
    return tuple(vals)


def _vec_type(name):
    def conv(text):
        try:
            return parse_vec(text, name)
        except InvalidArgument as exc:
            raise argparse.ArgumentTypeError(str(exc).split(": ", 1)[1])
    return conv


def parse_range(text, name):
    try:
        vals = [float(t) for t in text.split(",")] if isinstance(text, str) else list(text)
        start, stop, count = float(vals[0]), float(vals[1]), vals[2]
        if len(vals) != 3 or int(count) != float(count):
            raise ValueError
        count = int(count)
    except (TypeError, ValueError, IndexError):
        raise InvalidArgument(f"--{name}: expected start,stop,count, got {text!r}")
    if count < 1:
        raise InvalidArgument(f"--{name}: empty range (count must be >= 1)")
    return start, stop, count


def spaced(rng, spacing, name):
    start, stop, count = rng
    if spacing == "log":
        if start <= 0 or stop <= 0:
            raise InvalidArgument(f"--{name}: log spacing needs positive bounds")
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


class Settings:
    """Flag values with config-file fallback."""

    def __init__(self, args, defaults):
        self.args = args
        self.file = {}
        if getattr(args, "config", None):
            try:
                with open(args.config) as fh:
                    self.file = json.load(fh)
            except OSError as exc:
                raise _IOFailure(f"cannot read config {args.config}: {exc}")
            except json.JSONDecodeError as exc:
                raise InvalidArgument(f"--config: invalid JSON ({exc})")
            if not isinstance(self.file, dict):
                raise InvalidArgument("--config: top level must be an object")
        self.defaults = defaults

    def __getitem__(self, key):
        v = getattr(self.args, key, None)
        if v is not None:
            return v
        if key in self.file:
            return self.file[key]
        return self.defaults.get(key)


class _IOFailure(TrimerError):
    exit_code = 3


def _params(s):
    K = s["K"]
    K = parse_vec(K, "K") if not isinstance(K, tuple) else K
    try:
        return ModelParams(float(s["gamma"]), float(s["lambda"]), K)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, TrimerError):
            raise
        raise InvalidArgument(str(exc))


def _grid(s):
    n = s["grid_n"]
    return make_grid(int(n), float(s["offset"])) if n is not None else None


def _emit(lines, out=sys.stdout):
    out.write("\n".join(lines) + "\n")


def cmd_two_body(s):
    params = _params(s)
    q = s["q"]
    q = parse_vec(q, "q") if not isinstance(q, tuple) else q
    sol = two_body.fiber_eigenvalue(params, q)
    thr = two_body.existence_threshold(params, q)
    bands = two_body.essential_spectrum(params)
    lines = [f"z: {fmt(sol.z)}", f"is_bound: {fmt(sol.is_bound)}",
             f"existence_threshold: {fmt(thr.value)}", f"threshold_divergent: {fmt(thr.divergent)}"]
    return lines + _bands_lines(bands)


def _bands_lines(b):
    gap = b.gap
    return [f"tau_min: {fmt(b.tau_min)}", f"tau_max: {fmt(b.tau_max)}",
            f"E_min: {fmt(b.E_min)}", f"E_max: {fmt(b.E_max)}",
            f"gap: {'none' if gap is None else fmt(gap[0]) + ' ' + fmt(gap[1])}",
            f"argmin_q: {' '.join(fmt(x) for x in b.argmin_q)}",
            f"argmax_q: {' '.join(fmt(x) for x in b.argmax_q)}"]


def cmd_essential(s):
    return _bands_lines(two_body.essential_spectrum(_params(s)))


def cmd_critical_gammas(s):
    K = s["K"]
    K = parse_vec(K, "K") if not isinstance(K, tuple) else K
    cg = bound_states.critical_gammas(K, s["route"])
    return [f"K: {' '.join(fmt(x) for x in cg.K)}",
            f"gamma1: {fmt(cg.gamma1)}", f"gamma1_tilde: {fmt(cg.gamma1_tilde)}",
            f"gamma2: {fmt(cg.gamma2_bound_or_value)}", f"gamma2_flag: {cg.gamma2_flag}",
            f"gamma2_tilde: {fmt(cg.gamma2_tilde)}"]


def _window(s):
    return bound_states.GapWindow(float(s["window_c"]), float(s["window_theta"]))


def _state_lines(tag, states):
    out = [f"{tag}: {len(states)}"]
    for st in states:
        out.append(f"  z={fmt(st.z)} multiplicity={st.multiplicity} parity={st.parity} "
                   f"residual={fmt(st.residual)} sectors={','.join(st.sector_tags)}")
    return out


def cmd_spectrum(s):
    params = _params(s)
    rep = bound_states.phase_point(params, _window(s), _grid(s))
    print(f"elapsed {rep.seconds:.2f} s", file=sys.stderr)
    return (_bands_lines(rep.bands) + _state_lines("below", rep.below)
            + _state_lines("gap", rep.gap))


def _scan_row(job):
    gamma, lam, K, grid_n, offset, c, theta = job
    params = ModelParams(gamma, lam, K)
    grid = make_grid(grid_n, offset) if grid_n else None
    rep = bound_states.phase_point(params, bound_states.GapWindow(c, theta), grid)
    b = rep.bands
    return {
        "gamma": gamma, "lambda": lam, "K1": params.K[0], "K2": params.K[1], "K3": params.K[2],
        "tau_min": b.tau_min, "tau_max": b.tau_max, "E_min": b.E_min, "E_max": b.E_max,
        "gap_width": 0.0 if b.gap is None else b.gap[1] - b.gap[0],
        "n_below": len(rep.below), "mult_below": sum(x.multiplicity for x in rep.below),
        "n_gap": len(rep.gap),
        "z_below": [[x.z, x.multiplicity] for x in rep.below],
        "z_gap": [[x.z, x.multiplicity] for x in rep.gap],
        "max_residual": rep.max_residual,
    }


def _threads(s):
    t = s["threads"]
    if t is None:
        t = os.environ.get("TRIMER_THREADS")
    try:
        t = int(t) if t is not None else (os.cpu_count() or 1)
    except ValueError:
        raise InvalidArgument(f"--threads: expected an integer, got {t!r}")
    if t < 1:
        raise InvalidArgument("--threads: must be >= 1")
    return t


def render_rows(rows, form):
    if form == "json":
        return dumps(rows) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([dumps(r[c]) if c in ("z_below", "z_gap") else fmt(r[c])
                    for c in CSV_COLUMNS])
    return buf.getvalue()


def cmd_phase_scan(s):
    gammas = spaced(parse_range(s["gamma_range"], "gamma-range"), s["gamma_spacing"],
                    "gamma-range")
    lams = spaced(parse_range(s["lambda_range"], "lambda-range"), s["lambda_spacing"],
                  "lambda-range")
    if np.any(gammas <= 0):
        raise InvalidArgument("--gamma-range: gamma must be positive")
    if np.any(lams < 0):
        raise InvalidArgument("--lambda-range: lambda must be nonnegative")
    K = s["K"]
    K = parse_vec(K, "K") if not isinstance(K, tuple) else K
    n = s["grid_n"]
    form = s["format"]
    if form not in ("csv", "json"):
        raise InvalidArgument(f"--format: expected csv or json, got {form!r}")
    out = s["output"]
    if not out:
        raise InvalidArgument("--output: a path is required")
    _window(s)
    d = os.path.dirname(os.path.abspath(out))
    if not os.path.isdir(d) or not os.access(d, os.W_OK):
        raise _IOFailure(f"--output: directory {d} is not writable")
    jobs = [(float(g), float(l), K, int(n) if n else None, float(s["offset"]),
             float(s["window_c"]), float(s["window_theta"])) for g in gammas for l in lams]
    t0 = time.perf_counter()
    threads = min(_threads(s), len(jobs))
    if threads > 1:
        with cf.ProcessPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(_scan_row, jobs))
    else:
        rows = [_scan_row(j) for j in jobs]
    text = render_rows(rows, form)
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise _IOFailure(f"--output: cannot write {out}: {exc}")
    print(f"{len(rows)} rows in {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    return [f"wrote {len(rows)} rows to {out}"]


def cmd_oracle_check(s):
    params = _params(s)
    n = int(s["n"])
    if n > oracle.THREE_BODY_N:
        from .errors import ResourceError
        raise ResourceError(f"--n: dense three-body solve is capped at n = {oracle.THREE_BODY_N}")
    rep = oracle.bs_exactness_check(params, make_grid(n, float(s["offset"])))
    lines = [f"isolated_states: {len(rep.entries)}",
             f"max_deviation: {fmt(rep.max_deviation)}",
             f"multiplicity_mismatches: {len(rep.mismatches)}",
             f"result: {'pass' if rep.passed else 'fail'}"]
    return lines, (0 if rep.passed else 1)


def cmd_limits(s):
    K = s["K"]
    K = parse_vec(K, "K") if not isinstance(K, tuple) else K
    alphas = spaced(parse_range(s["alpha_range"], "alpha-range"), s["alpha_spacing"],
                    "alpha-range")
    if np.any(alphas < 0):
        raise InvalidArgument("--alpha-range: alpha must be nonnegative")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    zero = all(k == 0 for k in ModelParams(1.0, 0.0, K).K)
    if zero:
        w.writerow(["alpha", "e1", "e3", "beta_bar"])
        for a in alphas:
            e1, e3, beta = limit_funcs(float(a))
            w.writerow([fmt(a), fmt(e1), fmt(e3), fmt(beta)])
    else:
        w.writerow(["alpha"] + [f"beta_below_{i}" for i in (1, 2, 3)]
                   + [f"beta_gap_{i}" for i in (1, 2, 3)])
        for a in alphas:
            bb = limit_matrix_general_K(K, float(a), "below").beta
            bg = limit_matrix_general_K(K, float(a), "gap").beta
            w.writerow([fmt(a)] + [fmt(x) for x in bb] + [fmt(x) for x in bg])
    return [buf.getvalue().rstrip("\n")]


COMMANDS = {
    "two-body": cmd_two_body, "essential": cmd_essential,
    "critical-gammas": cmd_critical_gammas, "spectrum": cmd_spectrum,
    "phase-scan": cmd_phase_scan, "oracle-check": cmd_oracle_check, "limits": cmd_limits,
}

DEFAULTS = {
    "K": (0.0, 0.0, 0.0), "q": (0.0, 0.0, 0.0), "gamma": None, "lambda": None,
    "grid_n": None, "offset": 0.5, "window_c": 1.0, "window_theta": 0.5,
    "route": None, "format": "csv", "gamma_spacing": "lin", "lambda_spacing": "lin",
    "n": 4, "alpha_range": "0,3,31", "alpha_spacing": "lin", "threads": None,
}


def build_parser():
    p = argparse.ArgumentParser(prog="trimer", description=(
        "Spectra of a lattice two-fermion plus one-particle system with contact attraction."))
    sub = p.add_subparsers(dest="command", required=True)
    vec = _vec_type

    def model(sp, needs_lambda=True):
        sp.add_argument("--gamma", type=float, help="mass ratio (> 0)")
        if needs_lambda:
            sp.add_argument("--lambda", dest="lambda", type=float, help="coupling (>= 0)")
        sp.add_argument("--K", type=vec("K"), help="quasi-momentum k1,k2,k3 (default 0,0,0)")
        sp.add_argument("--config", help="JSON config file; flags override it")

    def grid_flags(sp):
        sp.add_argument("--grid-n", type=int, help="grid points per axis")
        sp.add_argument("--offset", type=float, help="grid offset in cells (default 0.5)")

    def window_flags(sp):
        sp.add_argument("--window-c", type=float, help="gap window coefficient c in c*lambda^theta")
        sp.add_argument("--window-theta", type=float, help="gap window exponent theta")

    sp = sub.add_parser("two-body", help="fiber bound state at one q plus the bands")
    model(sp)
    sp.add_argument("--q", type=vec("q"), help="two-body momentum q1,q2,q3")
    sp = sub.add_parser("essential", help="two- and three-particle bands")
    model(sp)
    sp = sub.add_parser("critical-gammas", help="critical mass ratios at K")
    sp.add_argument("--K", type=vec("K"), help="quasi-momentum (default 0,0,0)")
    sp.add_argument("--route", choices=["closed", "limit"], help="computation route")
    sp.add_argument("--config", help="JSON config file; flags override it")
    sp = sub.add_parser("spectrum", help="bound states below the band and in the gap")
    model(sp)
    grid_flags(sp)
    window_flags(sp)
    sp = sub.add_parser("phase-scan", help="sweep over (gamma, lambda)",
                        epilog=SCAN_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.add_argument("--gamma-range", help="start,stop,count")
    sp.add_argument("--lambda-range", help="start,stop,count")
    sp.add_argument("--gamma-spacing", choices=["lin", "log"])
    sp.add_argument("--lambda-spacing", choices=["lin", "log"])
    sp.add_argument("--K", type=vec("K"), help="quasi-momentum (default 0,0,0)")
    sp.add_argument("--output", help="output file path")
    sp.add_argument("--format", choices=["csv", "json"])
    sp.add_argument("--threads", type=int, help="worker processes (fallback TRIMER_THREADS)")
    sp.add_argument("--config", help="JSON config file; flags override it")
    grid_flags(sp)
    window_flags(sp)
    sp = sub.add_parser("oracle-check", help="dense diagonalization versus the BS principle")
    model(sp)
    sp.add_argument("--n", type=int, help="grid points per axis (<= 5, default 4)")
    sp.add_argument("--offset", type=float, help="grid offset in cells (default 0)")
    sp = sub.add_parser("limits", help="large-coupling limit functions over alpha (CSV)")
    sp.add_argument("--K", type=vec("K"), help="quasi-momentum (default 0,0,0)")
    sp.add_argument("--alpha-range", help="start,stop,count (default 0,3,31)")
    sp.add_argument("--alpha-spacing", choices=["lin", "log"])
    sp.add_argument("--config", help="JSON config file; flags override it")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    defaults = dict(DEFAULTS)
    if args.command == "oracle-check":
        defaults["offset"] = 0.0
    try:
        s = Settings(args, defaults)
        for key in ("gamma", "lambda"):
            if key in vars(args) and s[key] is None:
                raise InvalidArgument(f"--{key}: required")
        res = COMMANDS[args.command](s)
        lines, code = res if isinstance(res, tuple) else (res, 0)
        _emit(lines)
        return code
    except TrimerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError as exc:
        print(f"error: out of memory ({exc})", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
