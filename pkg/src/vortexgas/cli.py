"""Command-line front end: ``vortexgas <experiment> [--key value ...]``.

Every experiment writes CSV tables, an SVG plot where a scaling law is
fitted, and a ``manifest.json`` recording the configuration, timings,
verdicts and output files. Numeric outputs depend only on the configuration
and the seed.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import expansion as ex
from . import field as fl
from . import gibbs as gb
from . import meanfield as mf
from .errors import ConfigInvalid, NoiseDominated, VortexGasError
from .kernels import KernelSpec, tabulate
from .reporting import TOOL, git_describe, report, svg_loglog, write_csv, write_manifest
from .stats import Verdict

# Defaults per experiment. The type of each default fixes how a value given
# on the command line or in a config file is parsed.
DEFAULTS = {
    "kernels": {"masses": [2.0, 5.0, 10.0, 20.0], "grid_n": 128, "tol": 1e-10},
    "field-moments": {"masses": [8.0, 16.0, 32.0, 64.0, 128.0], "samples": 1000,
                      "alpha": 1.0, "alpha2": 1.5, "rel_tol": 0.10},
    "inequalities": {"samples": 10000, "orders": [1, 2, 3], "amplitude": 4.0,
                     "complex_amplitude": 2.0, "proof_beta": 1.0, "proof_n": 16,
                     "proof_m": 8.0, "proof_samples": 1000},
    "sine-gordon": {"betas": [0.5, 1.0, 2.0], "n_values": [2, 4], "masses": [3.0, 5.0, 10.0],
                    "field_samples": 100000, "tuples": 1000000, "max_rel_n2": 0.02},
    "remainder": {"tuples": 1000, "max_n": 64, "orders": [1, 2, 3, 4], "beta": 1.0,
                  "n_grid": [8, 16, 32, 64, 128], "a": 1.25, "k": 2, "samples": 400,
                  "max_exponent": -0.35},
    "partitions": {"betas": [1.0, 2.0], "n_values": [4, 8, 16], "samples": 20000,
                   "oracle_beta": 1.0, "oracle_samples": 200000, "yukawa_beta": 1.0,
                   "yukawa_n": 8, "yukawa_masses": [4.0, 8.0, 16.0, 32.0],
                   "yukawa_samples": 20000, "regular_beta": 1.0,
                   "regular_n_grid": [8, 16, 32, 64, 128], "a": 1.25,
                   "regular_samples": 2000, "max_ratio": 10.0},
    "rate": {"beta": 1.0, "p": 2.0, "h": 1, "l": 1, "n_grid": [8, 16, 32, 64], "bins": 2,
             "chains": 256, "records": 400, "control": True, "max_slope": -0.35,
             "fe_instances": 1000},
}
EXPERIMENTS = list(DEFAULTS) + ["all"]

HELP = {
    "kernels": "splitting of the Green function into smooth and Yukawa parts",
    "field-moments": "moments of the smooth Gaussian field against log m",
    "inequalities": "exponential-integral inequalities and the |E_j - W| bound",
    "sine-gordon": "Sine-Gordon identity for the smooth partition function",
    "remainder": "telescoping expansion identity and decay of E|R_k|",
    "partitions": "Jensen bound, two-vortex oracle, Yukawa and smooth partition functions",
    "rate": "decorrelation rate of the (h, l) correlation function in N",
    "all": "every experiment above in sequence",
}


def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").lower().replace("-", "_")


def _parse_list(text: str, elem):
    text = text.strip()
    if ".." in text:
        a, b = (elem(t) for t in text.split("..", 1))
        if a <= 0 or b < a:
            raise ConfigInvalid(f"bad range {text!r}")
        out = []
        v = a
        while v <= b:
            out.append(v)
            v = v * 2
        return out
    return [elem(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def parse_value(text: str, default):
    try:
        if isinstance(default, bool):
            return _bool(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, list):
            return _parse_list(text, type(default[0]))
    except ValueError as exc:
        raise ConfigInvalid(f"cannot parse {text!r}") from exc
    return text


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    p = Path(path)
    if not p.is_file():
        raise ConfigInvalid(f"config file {path} not found")
    for n, line in enumerate(p.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        out[normalize_key(k)] = v.strip()
    return out


def resolve(experiment: str, raw: dict) -> dict:
    """Merge raw string settings into the experiment defaults; reject unknown keys."""
    if experiment not in EXPERIMENTS:
        raise ConfigInvalid(f"unknown experiment {experiment!r}")
    names = list(DEFAULTS) if experiment == "all" else [experiment]
    known = {}
    for n in names:
        known.update(DEFAULTS[n])
    for k in raw:
        if k not in known:
            raise ConfigInvalid(f"unknown key {k!r} for experiment {experiment}")
    return {k: parse_value(v, known[k]) if isinstance(v, str) else v for k, v in raw.items()}


def _settings(name: str, overrides: dict) -> dict:
    cfg = dict(DEFAULTS[name])
    cfg.update({k: v for k, v in overrides.items() if k in cfg})
    return cfg


# ---------------------------------------------------------------------------
# experiments; each returns (verdicts, output paths)


def run_kernels(cfg, seed, out: Path):
    rows = []
    worst = 0.0
    n = cfg["grid_n"]
    for m in cfg["masses"]:
        spec = KernelSpec(m, (n - 2) // 2, n)
        g = tabulate(spec, "green").values
        w = tabulate(spec, "yukawa").values
        v = tabulate(spec, "smooth").values
        err = float(np.nanmax(np.abs(g - w - v)))
        worst = max(worst, err)
        rows.append({"m": m, "grid_n": n, "cutoff": spec.cutoff, "max_abs_error": err})
    path = write_csv(out / "splitting.csv", ["m", "grid_n", "cutoff", "max_abs_error"], rows)
    v = Verdict("splitting-identity", len(rows), sum(r["max_abs_error"] > cfg["tol"] for r in rows),
                cfg["tol"] - worst, {"max_abs_error": worst})
    return [v], [path]


def run_field_moments(cfg, seed, out: Path):
    masses = cfg["masses"]
    n = cfg["samples"]
    l2_rows, l2_fit = fl.l2_moment_study(masses, n, seed)
    target = 1.0 / (2 * math.pi)
    p1 = write_csv(out / "l2_moments.csv", ["m", "mc_mean", "mc_stderr", "exact", "n_samples"],
                   [{"m": m, "mc_mean": e.value, "mc_stderr": e.stderr, "exact": d,
                     "n_samples": e.n_samples} for m, e, d in l2_rows])
    rel = abs(l2_fit.slope - target) / target
    v1 = Verdict("l2-moment-slope", len(masses), int(rel > cfg["rel_tol"]),
                 cfg["rel_tol"] - rel, {"slope": l2_fit.slope, "slope_stderr": l2_fit.slope_stderr,
                                         "target": target})
    alpha = cfg["alpha"]
    rows, fit = fl.exp_moment_study(masses, alpha, n, seed + 7_919)
    p2 = write_csv(out / "exp_moments.csv", fl.MOMENT_COLUMNS, [r.as_csv_row() for r in rows])
    target2 = -alpha / (2 * math.pi)
    rel2 = abs(fit.slope - target2) / abs(target2)
    v2 = Verdict("exp-moment-slope", len(masses), int(rel2 > cfg["rel_tol"]),
                 cfg["rel_tol"] - rel2, {"slope": fit.slope, "target": target2})
    zs = [abs(r.mc.value - r.analytic) / r.mc.stderr if r.mc.stderr > 0 else 0.0 for r in rows]
    v3 = Verdict("exp-moment-mc", len(rows), sum(z > 3 for z in zs), 3 - max(zs),
                 {"max_z": max(zs)})
    specs = [KernelSpec.for_mass(m) for m in masses]
    rep = fl.exp_moment_diff_check(alpha, cfg["alpha2"], specs)
    p3 = write_csv(out / "exp_moment_diff.csv", ["m", "alpha", "alpha2", "difference", "ratio"],
                   list(rep.rows()))
    trend = rep.fit.slope - 2 * rep.fit.slope_stderr if rep.fit else 0.0
    v4 = Verdict("exp-moment-diff", len(masses), int(not (rep.bounded and rep.no_increasing_trend)),
                 -trend, {"max_ratio": max(rep.ratios),
                          "slope": rep.fit.slope if rep.fit else 0.0,
                          "slope_stderr": rep.fit.slope_stderr if rep.fit else 0.0})
    return [v1, v2, v3, v4], [p1, p2, p3]


def run_inequalities(cfg, seed, out: Path):
    rows, verdicts = ex.inequality_suite(cfg["samples"], seed, tuple(cfg["orders"]),
                                         cfg["amplitude"], cfg["complex_amplitude"])
    cols = ["instance"] + [f"even_margin_n{n}" for n in cfg["orders"]]
    if 1 in cfg["orders"]:
        cols.append("closed_form_gap")
    cols.append("complex_margin")
    p1 = write_csv(out / "inequalities.csv", cols, rows)
    m = cfg["proof_m"]
    spec = KernelSpec.for_mass(m)
    prow, pv = ex.proof_step_check(cfg["proof_beta"], cfg["proof_n"], spec,
                                   cfg["proof_samples"], seed + 1)
    p2 = write_csv(out / "proof_step.csv", ["sample", "abs_diff", "bound", "margin"], prow)
    return verdicts + [pv], [p1, p2]


def run_sine_gordon(cfg, seed, out: Path):
    results = []
    for m in cfg["masses"]:
        results += ex.sine_gordon_table(cfg["betas"], cfg["n_values"], ex.sine_gordon_spec(m),
                                        cfg["field_samples"], seed, cfg["tuples"])
    rows = [r.as_row() for r in results]
    path = write_csv(out / "sine_gordon.csv", list(rows[0]), rows)
    bad = [r for r in results if not r.passed or
           (r.n_vortices == 2 and r.relative_discrepancy > cfg["max_rel_n2"])]
    margin = min(r.tolerance - r.discrepancy for r in results)
    return [Verdict("sine-gordon", len(results), len(bad), margin,
                    {"max_rel_discrepancy": max(r.relative_discrepancy for r in results)})], [path]


def run_remainder(cfg, seed, out: Path):
    rows, v1 = ex.expansion_identity_suite(cfg["tuples"], seed, cfg["max_n"],
                                           tuple(cfg["orders"]))
    p1 = write_csv(out / "expansion_identity.csv", ["tuple", "N", "k", "n", "identity_error"], rows)
    st = ex.remainder_moment_study(cfg["beta"], cfg["n_grid"], cfg["a"], cfg["k"],
                                   cfg["samples"], seed + 1)
    p2 = write_csv(out / "remainder.csv", ["N", "m", "mean_abs_R", "stderr", "n_samples"], st.rows)
    p3 = svg_loglog(out / "remainder.svg",
                    [(r["N"], r["mean_abs_R"], r["stderr"]) for r in st.rows],
                    title=f"E|R_k|, k={cfg['k']}, m = N^{cfg['a']:g}", ylabel="E|R_k|",
                    fit=(st.fit.slope, st.fit.intercept))
    ok = st.passed(cfg["max_exponent"])
    v2 = Verdict("remainder-decay", len(st.rows), int(not ok),
                 min(cfg["max_exponent"] - st.fit.slope,
                     -(st.fit.slope + 2 * st.fit.slope_stderr)),
                 {"exponent": st.fit.slope, "exponent_stderr": st.fit.slope_stderr})
    return [v1, v2], [p1, p2, p3]


def run_partitions(cfg, seed, out: Path):
    verdicts, paths = [], []
    jrows = []
    for b in cfg["betas"]:
        for N in cfg["n_values"]:
            e = gb.partition_estimate(gb.EnsembleParams(b, N), n_samples=cfg["samples"],
                                      seed=seed + N)
            jrows.append({"beta": b, "N": N, "value": e.value, "stderr": e.stderr,
                          "n_samples": e.n_samples, "margin": e.value + 3 * e.stderr - 1})
    paths.append(write_csv(out / "jensen.csv", list(jrows[0]), jrows))
    verdicts.append(Verdict("jensen", len(jrows), sum(r["margin"] < 0 for r in jrows),
                            min(r["margin"] for r in jrows)))
    ob = cfg["oracle_beta"]
    quad = gb.pair_partition_quadrature(ob)
    mc = gb.partition_estimate(gb.EnsembleParams(ob, 2), n_samples=cfg["oracle_samples"],
                               seed=seed + 2)
    paths.append(write_csv(out / "pair_oracle.csv", ["beta", "quadrature", "mc", "mc_stderr"],
                           [{"beta": ob, "quadrature": quad, "mc": mc.value,
                             "mc_stderr": mc.stderr}]))
    gap = abs(mc.value - quad)
    verdicts.append(Verdict("pair-partition-oracle", 1, int(gap > 3 * mc.stderr),
                            3 * mc.stderr - gap))
    yrows, yfit = ex.yukawa_partition_check(cfg["yukawa_beta"], cfg["yukawa_n"],
                                            cfg["yukawa_masses"], cfg["yukawa_samples"], seed + 3)
    paths.append(write_csv(out / "yukawa.csv", ["N", "m", "value", "stderr", "n_samples", "g",
                                               "g_stderr"], [r.as_row() for r in yrows]))
    mono = ex.g_non_increasing(yrows)
    values = [r.estimate.value for r in yrows]
    decreasing = all(b <= a for a, b in zip(values, values[1:]))
    verdicts.append(Verdict("yukawa-partition", len(yrows), int(not (mono and decreasing)),
                            -(yfit.slope - 2 * yfit.slope_stderr) if yfit else 0.0,
                            {"g_slope": yfit.slope if yfit else 0.0}))
    rrows = ex.regular_partition_check(cfg["regular_beta"], cfg["regular_n_grid"], cfg["a"],
                                       cfg["regular_samples"], seed + 4)
    paths.append(write_csv(out / "regular.csv", ["N", "m", "value", "stderr", "n_samples"],
                           [r.as_row() for r in rrows]))
    ratio = ex.bounded_ratio(rrows)
    verdicts.append(Verdict("regular-partition", len(rrows), int(ratio >= cfg["max_ratio"]),
                            cfg["max_ratio"] - ratio, {"max_min_ratio": ratio}))
    return verdicts, paths


def run_rate(cfg, seed, out: Path):
    verdicts, paths = [], []
    kw = dict(p=cfg["p"], hl=(cfg["h"], cfg["l"]), n_grid=cfg["n_grid"], bins=cfg["bins"],
              n_chains=cfg["chains"], n_records=cfg["records"])
    try:
        series = mf.rate_experiment(cfg["beta"], seed=seed, **kw)
        noise = None
    except NoiseDominated as exc:
        series, noise = exc.series, str(exc)
    paths.append(series.to_csv(out / "rate.csv"))
    fit = series.fit
    paths.append(svg_loglog(out / "rate.svg",
                            [(e.N, e.distance.value, e.distance.stderr) for e in series.entries],
                            title=f"||rho_hat - 1||_{cfg['p']:g}, beta={cfg['beta']:g}",
                            ylabel="distance", fit=(fit.slope, fit.intercept) if fit else None))
    ok = noise is None and series.passed(cfg["max_slope"])
    details = {"slope": fit.slope if fit else None,
               "slope_stderr": fit.slope_stderr if fit else None,
               "slope_log_corrected": series.fit_log.slope if series.fit_log else None}
    if noise:
        details["noise_dominated"] = noise
    verdicts.append(Verdict("rate", len(series.entries), int(not ok),
                            (cfg["max_slope"] - fit.slope) if fit else -math.inf, details))
    if cfg["control"]:
        try:
            ctrl = mf.rate_experiment(0.0, seed=seed + 1, **kw)
            flagged = False
        except NoiseDominated as exc:
            ctrl, flagged = exc.series, True
        paths.append(ctrl.to_csv(out / "rate_control.csv"))
        verdicts.append(Verdict("rate-control", len(ctrl.entries), int(not flagged), 0.0,
                                {"noise_dominated": flagged}))
    fe = mf.perturbation_suite(cfg["beta"] if cfg["beta"] > 0 else 1.0, cfg["fe_instances"], seed)
    paths.append(write_csv(out / "free_energy.csv", ["instance", "eps_plus", "eps_minus",
                                                      "free_energy"], fe))
    worst = min(r["free_energy"] for r in fe)
    verdicts.append(Verdict("free-energy-positivity", len(fe), sum(r["free_energy"] <= 0 for r in fe),
                            worst))
    n = 64
    resid, defect = mf.sinh_poisson_residual(np.zeros((n, n)), cfg["beta"], 0.5)
    verdicts.append(Verdict("sinh-poisson-trivial", 1, int(resid + defect > 1e-12),
                            -(resid + defect)))
    return verdicts, paths


RUNNERS = {"kernels": run_kernels, "field-moments": run_field_moments,
           "inequalities": run_inequalities, "sine-gordon": run_sine_gordon,
           "remainder": run_remainder, "partitions": run_partitions, "rate": run_rate}


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run(experiment: str, overrides: dict, seed: int = 0, out: Path | str = "runs") -> dict:
    """Run one experiment (or all), write outputs and the manifest; return it."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    names = list(RUNNERS) if experiment == "all" else [experiment]
    started, t0 = _now(), time.perf_counter()
    verdicts, paths, configs = [], [], {}
    for name in names:
        cfg = _settings(name, overrides)
        configs[name] = cfg
        sub = out / name if experiment == "all" else out
        sub.mkdir(parents=True, exist_ok=True)
        v, p = RUNNERS[name](cfg, seed, sub)
        verdicts += v
        paths += p
    manifest = {
        "tool": TOOL, "experiment": experiment, "seed": seed, "config": configs,
        "git_describe": git_describe(), "started": started, "finished": _now(),
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "verdicts": [v.as_dict() for v in verdicts],
        "outputs": [str(p.relative_to(out)) for p in paths],
        "passed": all(v.passed for v in verdicts),
    }
    write_manifest(out / "manifest.json", manifest)
    return manifest


def build_parser() -> argparse.ArgumentParser:
    epilog = "\n".join(f"  {k:<14} {v}" for k, v in HELP.items())
    epilog += ("\n  report         merge manifest verdicts into a markdown table (plumbing)"
               "\n\nSettings are given as --key value (or key=value lines in --config);"
               " lists as 8,16,32 or 8..64 (doubling).")
    p = argparse.ArgumentParser(prog="vortexgas", description="Numerical experiments for the "
                                "neutral point-vortex gas on the torus.", epilog=epilog,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("experiment", choices=EXPERIMENTS + ["report"])
    p.add_argument("manifests", nargs="*", help="manifest files (report only)")
    p.add_argument("--config", help="flat key=value settings file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory (default runs/<experiment>)")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    known, extra = parser.parse_known_args(argv)
    try:
        if known.experiment == "report":
            text = report(known.manifests)
            if known.out:
                Path(known.out).write_text(text)
            else:
                print(text, end="")
            return 0
        if known.manifests:
            raise ConfigInvalid(f"unexpected positional arguments {known.manifests}")
        if not 0 <= known.seed < 2**64:
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")
        raw = read_config_file(known.config) if known.config else {}
        it = iter(extra)
        for tok in it:
            if not tok.startswith("--"):
                raise ConfigInvalid(f"unexpected argument {tok!r}")
            if "=" in tok:
                k, v = tok[2:].split("=", 1)
            else:
                k = tok[2:]
                v = next(it, None)
                if v is None:
                    raise ConfigInvalid(f"missing value for --{k}")
            raw[normalize_key(k)] = v
        overrides = resolve(known.experiment, raw)
        out = Path(known.out) if known.out else Path("runs") / known.experiment
        manifest = run(known.experiment, overrides, known.seed, out)
    except VortexGasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if exc.code == "config-invalid" else 1
    for v in manifest["verdicts"]:
        status = "pass" if v["passed"] else "FAIL"
        print(f"{status}  {v['check']}  (instances={v['instances']}, "
              f"worst_margin={v['worst_margin']:.4g})")
    if not manifest["passed"]:
        failed = [v["check"] for v in manifest["verdicts"] if not v["passed"]]
        print(f"error: contract-violation: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
