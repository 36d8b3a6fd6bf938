"""Command-line interface: ``fermistab <command> [flags]``.

Exit codes: 0 success, 1 failed check suite, 2 bad flags, 3 numeric domain error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import bounds, quadform_mc as mc, spectral, verify
from .errors import FermistabError
from .kernels import KernelParams, o_kernel


@dataclass
class RunConfig:
    command: str
    flags: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    output_format: str = "json"

    @classmethod
    def from_args(cls, ns):
        flags = {k: v for k, v in vars(ns).items() if k not in ("command", "seed", "threads", "format")}
        env = os.environ.get("FERMISTAB_THREADS")
        threads = int(env) if env else (ns.threads or os.cpu_count() or 1)
        return cls(ns.command, flags, ns.seed, max(1, threads), ns.format)


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(s):
    v = float(s)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError("must be positive and finite")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=_positive_int, default=None, help="overridden by FERMISTAB_THREADS")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--out", default=None, help="write output to PATH instead of stdout")

    p = argparse.ArgumentParser(prog="fermistab", description="Stability bounds for the 2+2 fermion system.")
    sub = p.add_subparsers(dest="command", required=True)

    w = sub.add_parser("window", parents=[common], help="mass-ratio stability window")
    w.add_argument("--bound", choices=["bar", "schur"], default="schur")
    w.add_argument("--tol", type=_positive_float, default=1e-8)

    lm = sub.add_parser("lambda", parents=[common], help="Schur bound lambda(m) or lambda(m, kappa)")
    lm.add_argument("--m", type=float, required=True)
    lm.add_argument("--kappa", type=float, default=None)

    sp = sub.add_parser("spectral", parents=[common], help="discretized-operator estimate of Lambda")
    sp.add_argument("--m", type=float, required=True)
    sp.add_argument("--b", type=float, default=0.0)
    sp.add_argument("--lmax", type=_positive_int, default=5)
    sp.add_argument("--grid", type=int, default=400, help="number of core log-radial cells")
    sp.add_argument("--r-min", type=_positive_float, default=1e-4)
    sp.add_argument("--r-max", type=_positive_float, default=1e4)
    sp.add_argument("--tail-cells", type=int, default=12)

    en = sub.add_parser("energy", parents=[common], help="lower bound on the energy per particle norm")
    en.add_argument("--m", type=float, required=True)
    en.add_argument("--alpha", type=float, required=True)
    en.add_argument("--bound", choices=["bar", "schur"], default="schur")

    sw = sub.add_parser("sweep", parents=[common], help="figure data as CSV")
    sw.add_argument("--figure", choices=["1", "2"], required=True)
    sw.add_argument("--points", type=int, default=200)
    sw.add_argument("--lo", type=_positive_float, default=None)
    sw.add_argument("--hi", type=_positive_float, default=None)
    sw.add_argument("--m", type=_positive_float, default=1.0, help="mass ratio for figure 1")

    ck = sub.add_parser("check", parents=[common], help="run invariant checks")
    ck.add_argument("--suite", choices=["identities", "mc", "all"], default="all")
    ck.add_argument("--samples", type=_positive_int, default=200_000)
    return p


# -- commands ---------------------------------------------------------------


def cmd_window(cfg):
    return bounds.mass_window(cfg.flags["bound"], tol=cfg.flags["tol"]).to_dict()


def cmd_lambda(cfg):
    m, kappa = cfg.flags["m"], cfg.flags["kappa"]
    out = {"m": m, "lambda_bar": bounds.lambda_bar(m).value}
    if kappa is None:
        up = bounds.lambda_upper(m)
        out.update(lambda_upper=up.value, abs_error=up.abs_error, kappa_argmax=bounds.lambda_upper_argmax(m))
    else:
        out.update(kappa=kappa, lambda_kappa=bounds.lambda_schur_kappa(m, kappa))
    return out


def cmd_spectral(cfg):
    f = cfg.flags
    grid = spectral.RadialGrid(f["r_min"], f["r_max"], f["grid"], tail_cells=f["tail_cells"])
    return spectral.lambda_lower_spectral(f["m"], f["b"], f["lmax"], grid).to_dict()


def cmd_energy(cfg):
    m, alpha = cfg.flags["m"], cfg.flags["alpha"]
    s = bounds.lambda_sum(m, cfg.flags["bound"]).value
    return {"m": m, "alpha": alpha, "lambda_sum": s, "energy_lower_bound": bounds.energy_lower_bound(alpha, m, s)}


def cmd_sweep(cfg):
    f = cfg.flags
    return bounds.sweep(f["figure"], f["lo"], f["hi"], f["points"], f["m"])


# -- check suites -----------------------------------------------------------


def _identity_checks(n, seed):
    def t_integral():
        worst = 0.0
        for r in np.geomspace(0.05, 20, 5):
            for k in np.geomspace(0.05, 20, 5):
                q, rhs = verify.t_integral_identity(r, k)
                worst = max(worst, abs(q.value - rhs) / rhs)
        return worst <= 1e-10, f"max rel err {worst:.2e} on 25 points"

    def closed_form():
        worst = 0.0
        for m in (0.2, 0.58, 1.0, 1.73, 5.0):
            for k in (0.01, 0.18, 1.0, 5.0):
                ok, cf, q = verify.closed_form_matches_quadrature(m, k)
                worst = max(worst, abs(cf - q) / abs(q))
        return worst <= 1e-8, f"max rel diff {worst:.2e} on 20 pairs"

    def lm2_le_lblr():
        pairs = [(m, k) for m in (0.5, 1.0, 2.0) for k in (0.1, 1.0)]
        bad = [(m, k) for m, k in pairs if not verify.lm2_quadrature(m, k).value <= verify.lblr_quadrature(m, k).value]
        return not bad, f"{len(pairs) - len(bad)}/{len(pairs)} ordered"

    def denominator():
        bad, worst = verify.denominator_scan(n, seed)
        return bad == 0, f"{bad} violations, worst rel margin {worst:.3e}"

    def l_nonneg():
        rep = verify.l_nonneg_scan(1.0, 1.0, n, seed)
        ok = rep.ok and rep.half_closed_form_dev < 1e-12
        return ok, f"min scaled {rep.min_scaled:.3e}, closed-form dev {rep.half_closed_form_dev:.1e}"

    def kernel_symmetry():
        rng = np.random.default_rng(seed)
        params = KernelParams(1.3, a=(0.2, -0.1, 0.4), b=0.3)
        p, q = rng.standard_normal((2, 1000, 3))
        a, b = o_kernel(p, q, params), o_kernel(q, p, params)
        return bool(np.all(a > 0) and np.allclose(a, b, rtol=1e-14, atol=0)), "O(p,q) = O(q,p) > 0"

    def sandwich():
        ms = np.geomspace(0.2, 5, 50)
        bad = [m for m in ms if not bounds.lambda_bar(m).value <= bounds.lambda_upper(m).value]
        return not bad, f"{50 - len(bad)}/50 with lambda_bar <= lambda"

    def windows():
        out = []
        for kind in ("schur", "bar"):
            w = bounds.mass_window(kind)
            out.append(abs(w.m_low * w.m_high - 1) < 1e-6)
        return all(out), "reciprocal windows"

    def spectral_checks():
        grid = spectral.RadialGrid(n=200, tail_cells=10)
        prev, ok = None, True
        for b in (0.0, 0.5, 1.0, 2.0):
            eig = [v for _, v in spectral.lambda_lower_spectral(1.0, b, 3, grid, error_estimate=False).per_l_min_eig]
            if prev is not None:
                tol = 1e-12 * max(map(abs, eig))
                ok &= all(e >= p - tol for e, p in zip(eig, prev))
            prev = eig
        est = spectral.lambda_lower_spectral(1.0, 0.0, 3, grid, error_estimate=False).lambda_estimate.value
        bar = bounds.lambda_bar(1.0).value
        ok &= est <= bar and abs(est - bar) < 0.01 * bar
        return ok, f"b-monotone eigenvalues, estimate {est:.6f} vs {bar:.6f}"

    return [
        ("t_integral_identity", t_integral),
        ("closed_form_vs_quadrature", closed_form),
        ("lm2_le_lblr", lm2_le_lblr),
        ("denominator_inequality", denominator),
        ("l_nonnegative", l_nonneg),
        ("kernel_symmetry", kernel_symmetry),
        ("lambda_bar_le_lambda", sandwich),
        ("window_reciprocity", windows),
        ("spectral_consistency", spectral_checks),
    ]


def _mc_checks(n, seed, shards):
    trials = [mc.GaussianTrial.random(np.random.default_rng([seed, i])) for i in range(2)]
    lam1 = bounds.lambda_upper(1.0).value

    def scaling():
        xi = trials[0]
        a = mc.t_mu(xi, 1.0, 1.0, n, seed, shards).mean
        b = mc.t_mu(xi.scaled(2.0), 1.0, 4.0, n, seed, shards).mean
        rel = abs(b - 2**10 * a) / abs(2**10 * a)
        return rel < 1e-12, f"rel deviation {rel:.1e}"

    def zero():
        xi = mc.GaussianTrial.single(coeff=0.0)
        v = mc.t_mu(xi, 1.0, 1.0, n, seed, shards).mean
        return v == 0.0, f"T_mu(0) = {v}"

    def shard_invariance():
        xi = trials[1]
        a = mc.phi1(xi, 1.0, 1.0, min(n, 4 * mc.CHUNK), seed, 1)
        b = mc.phi1(xi, 1.0, 1.0, min(n, 4 * mc.CHUNK), seed, 4)
        return a == b, "1 vs 4 shards identical"

    def theorem():
        zs = []
        for xi in trials:
            for mu in (1.0, 4.0):
                zs.append(mc.theorem_gap(xi, 1.0, mu, n, seed, shards, 2 * lam1).z_score())
        return min(zs) >= -3, f"min z {min(zs):.2f}"

    def steps():
        zs = []
        for which in ("bd1", "bd2", "bd3"):
            for xi in trials:
                zs.append(mc.check_step_bound(which, xi, 1.0, 1.0, n, seed, shards).z_score())
        return min(zs) >= -3, f"min z {min(zs):.2f}"

    return [
        ("mc_scaling_identity", scaling),
        ("mc_zero_trial", zero),
        ("mc_shard_invariance", shard_invariance),
        ("mc_theorem_gap", theorem),
        ("mc_step_bounds", steps),
    ]


def cmd_check(cfg):
    n, suite = cfg.flags["samples"], cfg.flags["suite"]
    checks = []
    if suite in ("identities", "all"):
        checks += _identity_checks(n, cfg.seed)
    if suite in ("mc", "all"):
        checks += _mc_checks(max(n, 1000), cfg.seed, cfg.threads)
    results = []
    for name, fn in checks:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except FermistabError as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append({"name": name, "passed": bool(ok), "detail": detail, "seconds": round(time.perf_counter() - t0, 3)})
    return {"suite": suite, "samples": n, "seed": cfg.seed, "passed": all(r["passed"] for r in results), "results": results}


COMMANDS = {
    "window": cmd_window,
    "lambda": cmd_lambda,
    "spectral": cmd_spectral,
    "energy": cmd_energy,
    "sweep": cmd_sweep,
    "check": cmd_check,
}


def _to_csv(result):
    if isinstance(result, bounds.SweepTable):
        return result.to_csv()
    if "per_l_min_eig" in result:
        est = result["lambda_estimate"]["value"]
        rows = [f"{l},{v:.12g},{est:.12g}" for l, v in result["per_l_min_eig"]]
        return "l,min_eig,lambda_estimate\n" + "\n".join(rows) + "\n"
    if "results" in result:
        lines = ["name,passed,detail"] + [f"{r['name']},{r['passed']},\"{r['detail']}\"" for r in result["results"]]
        return "\n".join(lines) + "\n"
    flat = {k: v for k, v in result.items() if not isinstance(v, (dict, list))}
    return ",".join(flat) + "\n" + ",".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in flat.values()) + "\n"


def _render(result, fmt):
    if isinstance(result, bounds.SweepTable) or fmt == "csv":
        return _to_csv(result)
    return json.dumps(result, indent=2) + "\n"


def run(argv=None, stdout=None):
    """Run one command and return its exit code."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = RunConfig.from_args(ns)
    try:
        result = COMMANDS[cfg.command](cfg)
    except FermistabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = _render(result, cfg.output_format)
    out = cfg.flags.get("out")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if cfg.command == "check" and not result["passed"]:
        return 1
    return 0


def main():
    sys.exit(run())
