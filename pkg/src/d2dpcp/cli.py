"""``d2dpcp`` command-line front end.

Every run writes one directory holding ``config_resolved`` (INI, reloadable
with ``--config``), the CSV outputs, each starting with a ``# config:`` line
that embeds the full resolved configuration, and ``run.log``.

Exit codes: 0 success, 2 invalid configuration, 1 failure while running.
"""

from __future__ import annotations

import argparse
import configparser
import itertools
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from d2dpcp._rng import child_sequences
from d2dpcp.cluster_inference import ClumpingParams, g_pcp, g_sppp
from d2dpcp.coverage import (
    NetworkConfig,
    coverage_closed_alpha4,
    coverage_integral,
    db_to_linear,
    dbm_to_watt,
    simulate_coverage_mc,
)
from d2dpcp.ec_geometry import DomainGeometry, ec_densities, empirical_ec, expected_ec
from d2dpcp.point_process import RectWindow, sample_cox, sample_mh_fixed_n, sample_sppp
from d2dpcp.random_field import GridSpec, SquaredExponentialKernel, sample_chi2_batch, sample_chi2_field
from d2dpcp.summary_stats import ensemble_envelope, k_closed, k_hat, l_closed

COMMANDS = ("field", "points", "kstats", "ec", "gfunction", "coverage", "sweep")
EC_BLOCK = 250


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple:
    """Comma list of numbers; ``a:b:step`` expands to an inclusive range."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            a, b, s = (float(x) for x in part.split(":"))
            if not s > 0 or b < a:
                raise ValueError(f"bad range {part!r}")
            n = int(math.floor((b - a) / s + 1e-9)) + 1
            out.extend(round(a + i * s, 12) for i in range(n))
        else:
            out.append(float(part))
    if not out:
        raise ValueError("empty list")
    return tuple(out)


def _strs(text: str) -> tuple:
    return tuple(p.strip() for p in str(text).split(",") if p.strip())


# section -> key -> (parser, default)
SCHEMA: dict[str, dict] = {
    "run": {"seed": (int, 0)},
    "grid": {"nx": (int, 100), "ny": (int, 100), "spacing_m": (float, 1.0)},
    "kernel": {"l_m": (float, 50.0)},
    "field": {"k": (int, 2), "method": (str, "kron")},
    "points": {
        "sampler": (str, "cox"),
        "mean_intensity_per_m2": (float, 0.01),
        "n_points": (int, 1000),
        "burn_in": (int, -1),
        "thin": (int, 10),
        "proposal_sigma_m": (float, -1.0),
    },
    "kstats": {
        "model": (str, "both"),
        "replications": (int, 100),
        "mean_intensity_per_m2": (float, 0.01),
        "r_m": (_floats, _floats("1:20:1")),
        "level": (float, 0.95),
    },
    "ec": {
        "u": (_floats, _floats("0:20:0.5")),
        "domain": (str, "grid"),
        "width_m": (float, 100.0),
        "height_m": (float, 100.0),
        "radius_m": (float, 50.0),
        "metric_scaling": (str, "spectral"),
        "replications": (int, 0),
    },
    "gfunction": {
        "u": (float, 1.0),
        "v": (int, 1),
        "r_m": (_floats, _floats("0:5:0.25")),
        "lambda_sppp_per_m2": (float, -math.log(0.58) / (math.pi * 2.5**2)),
        "domain": (str, "ball"),
        "width_m": (float, 200.0),
        "height_m": (float, 200.0),
        "metric_scaling": (str, "none"),
    },
    "network": {
        "R_m": (float, 100.0),
        "R0_m": (float, 0.1),
        "alpha": (float, 4.0),
        "p_c_dbm": (float, 20.0),
        "p_i_dbm": (float, 0.0),
        "gamma_db": (float, 0.0),
        "u": (float, 31.0),
        "r_m": (float, 4.0),
        "k": (int, 2),
        "l_m": (float, 50.0),
        "metric_scaling": (str, "none"),
        "normalization": (str, "per_area"),
        "retention": (str, "extent_cdf"),
        "tdd_factor": (int, 1),
        "v": (int, 1),
    },
    "coverage": {
        "method": (str, "integral"),
        "n_trials": (int, 100_000),
        "disk_factor": (float, 10.0),
        "gamma_db": (_floats, None),
        "u": (_floats, None),
        "r_m": (_floats, None),
        "p_i_dbm": (_floats, None),
        "p_c_dbm": (_floats, None),
    },
    "sweep": {
        "param": (str, "u"),
        "values": (_floats, _floats("20:40:5")),
        "methods": (_strs, ("integral", "closed", "mc")),
        "n_trials": (int, 20_000),
        "disk_factor": (float, 10.0),
    },
}

# defaults that differ from the schema for a given command
COMMAND_DEFAULTS = {
    "kstats": {"grid": {"nx": 200, "ny": 200}},
}

SECTIONS = {
    "field": ("run", "grid", "kernel", "field", "points"),
    "points": ("run", "grid", "kernel", "field", "points"),
    "kstats": ("run", "grid", "kernel", "field", "kstats"),
    "ec": ("run", "grid", "kernel", "field", "ec"),
    "gfunction": ("run", "kernel", "field", "gfunction"),
    "coverage": ("run", "network", "coverage"),
    "sweep": ("run", "network", "sweep"),
}

# string keys with a closed set of values
CHOICES = {
    ("field", "method"): ("kron", "dense"),
    ("points", "sampler"): ("cox", "mh", "sppp"),
    ("kstats", "model"): ("pcp", "sppp", "both"),
    ("ec", "domain"): ("grid", "rectangle", "ball"),
    ("ec", "metric_scaling"): ("none", "spectral"),
    ("gfunction", "domain"): ("ball", "rectangle"),
    ("gfunction", "metric_scaling"): ("none", "spectral"),
    ("network", "metric_scaling"): ("none", "spectral"),
    ("network", "normalization"): ("per_area", "absolute"),
    ("network", "retention"): ("extent_cdf", "extent", "g_pcp"),
    ("coverage", "method"): ("integral", "closed", "mc"),
    ("sweep", "param"): ("u", "r_m", "gamma_db", "p_i_dbm", "p_c_dbm"),
}

METHOD_NAMES = {"integral": "integral", "closed": "closed_form_alpha4", "mc": "monte_carlo"}


def _parse_value(section: str, key: str, raw: str):
    parser, _ = SCHEMA[section][key]
    try:
        val = parser(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from None
    choices = CHOICES.get((section, key))
    if choices is not None:
        vals = val if isinstance(val, tuple) else (val,)
        bad = [v for v in vals if v not in choices]
        if bad:
            raise ConfigError(f"[{section}] {key}: {bad[0]!r} not in {choices}")
    if section == "sweep" and key == "methods":
        bad = [m for m in val if m not in METHOD_NAMES]
        if bad:
            raise ConfigError(f"[sweep] methods: {bad[0]!r} not in {tuple(METHOD_NAMES)}")
    return val


def resolve_config(command: str, config_path=None, overrides=(), seed=None) -> dict:
    """Defaults, then the config file, then ``--set`` overrides, then ``--seed``."""
    cfg = {}
    for sec in SECTIONS[command]:
        cfg[sec] = {k: d for k, (_, d) in SCHEMA[sec].items()}
        cfg[sec].update(COMMAND_DEFAULTS.get(command, {}).get(sec, {}))

    def put(sec, key, raw):
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        if key not in SCHEMA[sec]:
            raise ConfigError(f"unknown key {key!r} in [{sec}]")
        if sec in cfg:
            cfg[sec][key] = _parse_value(sec, key, raw)
        else:
            # valid for another command; still checked
            _parse_value(sec, key, raw)

    if config_path is not None:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            with open(config_path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        for sec in cp.sections():
            for key, raw in cp.items(sec):
                put(sec, key, raw)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        lhs, raw = item.split("=", 1)
        sec, key = lhs.split(".", 1)
        put(sec.strip(), key.strip(), raw.strip())
    if seed is not None:
        cfg["run"]["seed"] = int(seed)
    if cfg["run"]["seed"] < 0:
        raise ConfigError("seed must be non-negative")
    return cfg


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_config_resolved(path: Path, command: str, cfg: dict) -> None:
    lines = [f"# command: {command}"]
    for sec in sorted(cfg):
        lines.append(f"[{sec}]")
        lines += [f"{k} = {_fmt(v)}" for k, v in sorted(cfg[sec].items()) if v is not None]
        lines.append("")
    path.write_text("\n".join(lines))


def _header(command: str, cfg: dict) -> str:
    return "# config: " + json.dumps({"command": command, **cfg}, sort_keys=True, default=list)


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: str, columns, rows, extra_comment: dict | None = None) -> None:
    lines = [header]
    if extra_comment is not None:
        lines.append("# meta: " + json.dumps(extra_comment, sort_keys=True))
    lines.append(",".join(columns))
    lines += [",".join(_cell(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


@dataclass
class Run:
    command: str
    cfg: dict
    out: Path
    log: logging.Logger

    @property
    def seed(self) -> int:
        return self.cfg["run"]["seed"]

    @property
    def header(self) -> str:
        return _header(self.command, self.cfg)

    def csv(self, name, columns, rows, meta=None):
        write_csv(self.out / name, self.header, columns, rows, meta)
        self.log.info("wrote %s (%d rows)", name, len(rows))


# ---- plan construction: every module-level invariant is checked here ----

def _grid(cfg) -> GridSpec:
    g = cfg["grid"]
    return GridSpec(g["nx"], g["ny"], g["spacing_m"])


def _kernel(cfg) -> SquaredExponentialKernel:
    return SquaredExponentialKernel(cfg["kernel"]["l_m"])


def _positive(section, key, value):
    if not value > 0:
        raise ConfigError(f"[{section}] {key} must be positive")


def _r_grid(section, values):
    r = np.asarray(values, dtype=float)
    if np.any(r < 0) or np.any(np.diff(r) <= 0):
        raise ConfigError(f"[{section}] r_m must be non-negative and strictly ascending")
    return r


def _network(cfg, **kw) -> NetworkConfig:
    n = dict(cfg["network"])
    n.update(kw)
    return NetworkConfig(
        R=n["R_m"],
        R0=n["R0_m"],
        alpha=n["alpha"],
        p_c=float(dbm_to_watt(n["p_c_dbm"])),
        p_i=float(dbm_to_watt(n["p_i_dbm"])),
        gamma=float(db_to_linear(n["gamma_db"])),
        u=n["u"],
        r=n["r_m"],
        k=n["k"],
        l=n["l_m"],
        metric_scaling=n["metric_scaling"],
        normalization=n["normalization"],
        retention=n["retention"],
        tdd_factor=n["tdd_factor"],
        v=n["v"],
    )


def _plan_field(cfg):
    grid, kern = _grid(cfg), _kernel(cfg)
    if cfg["field"]["k"] < 1:
        raise ConfigError("[field] k must be >= 1")
    p = cfg["points"]
    _positive("points", "mean_intensity_per_m2", p["mean_intensity_per_m2"])
    if p["sampler"] == "mh":
        _positive("points", "n_points", p["n_points"])
        _positive("points", "thin", p["thin"])
    return grid, kern


def _plan_kstats(cfg):
    grid, kern = _grid(cfg), _kernel(cfg)
    ks = cfg["kstats"]
    _positive("kstats", "replications", ks["replications"])
    _positive("kstats", "mean_intensity_per_m2", ks["mean_intensity_per_m2"])
    if not 0 < ks["level"] < 1:
        raise ConfigError("[kstats] level must lie in (0, 1)")
    return grid, kern, _r_grid("kstats", ks["r_m"])


def _ec_domain(cfg) -> DomainGeometry:
    e = cfg["ec"]
    if e["domain"] == "grid":
        g = _grid(cfg)
        return DomainGeometry.rectangle(g.width, g.height)
    if e["domain"] == "rectangle":
        return DomainGeometry.rectangle(e["width_m"], e["height_m"])
    return DomainGeometry.ball(2, e["radius_m"])


def _plan_ec(cfg):
    e = cfg["ec"]
    u = np.asarray(e["u"], dtype=float)
    if np.any(u < 0):
        raise ConfigError("[ec] thresholds must be non-negative")
    if e["replications"] < 0:
        raise ConfigError("[ec] replications must be >= 0")
    if e["replications"] and e["domain"] != "grid":
        raise ConfigError("[ec] empirical overlay needs domain = grid")
    return _grid(cfg), _kernel(cfg), _ec_domain(cfg), u


def _plan_gfunction(cfg):
    gf = cfg["gfunction"]
    if gf["lambda_sppp_per_m2"] < 0:
        raise ConfigError("[gfunction] lambda_sppp_per_m2 must be non-negative")
    domain = None
    if gf["domain"] == "rectangle":
        domain = DomainGeometry.rectangle(gf["width_m"], gf["height_m"])
    params = ClumpingParams(
        gf["u"], cfg["field"]["k"], 2, domain, gf["v"], gf["metric_scaling"], cfg["kernel"]["l_m"]
    )
    return params, _r_grid("gfunction", gf["r_m"])


SWEEP_KEYS = ("gamma_db", "u", "r_m", "p_i_dbm", "p_c_dbm")


def _plan_coverage(cfg):
    c = cfg["coverage"]
    axes = {k: (c[k] if c[k] is not None else (cfg["network"][k],)) for k in SWEEP_KEYS}
    _positive("coverage", "n_trials", c["n_trials"])
    if c["method"] == "closed" and cfg["network"]["alpha"] != 4:
        raise ConfigError("closed-form coverage needs alpha = 4")
    points = []
    for combo in itertools.product(*(axes[k] for k in SWEEP_KEYS)):
        kw = dict(zip(SWEEP_KEYS, combo))
        points.append((kw, _network(cfg, **kw)))
    return points


def _plan_sweep(cfg):
    s = cfg["sweep"]
    _positive("sweep", "n_trials", s["n_trials"])
    if "closed" in s["methods"] and cfg["network"]["alpha"] != 4:
        raise ConfigError("closed-form coverage needs alpha = 4")
    return [({s["param"]: v}, _network(cfg, **{s["param"]: v})) for v in s["values"]]


PLANNERS = {
    "field": _plan_field,
    "points": _plan_field,
    "kstats": _plan_kstats,
    "ec": _plan_ec,
    "gfunction": _plan_gfunction,
    "coverage": _plan_coverage,
    "sweep": _plan_sweep,
}


# ---- commands ----

def _sample_pattern(run: Run, field, seed):
    p = run.cfg["points"]
    k = run.cfg["field"]["k"]
    if p["sampler"] == "cox":
        return sample_cox(field, seed, scale=p["mean_intensity_per_m2"] / k)
    if p["sampler"] == "sppp":
        return sample_sppp(RectWindow.from_grid(field.grid), p["mean_intensity_per_m2"], seed)
    return sample_mh_fixed_n(
        field,
        p["n_points"],
        burn_in=None if p["burn_in"] < 0 else p["burn_in"],
        thin=p["thin"],
        proposal_sigma=None if p["proposal_sigma_m"] <= 0 else p["proposal_sigma_m"],
        seed=seed,
    )


def _pattern_rows(pattern):
    return [tuple(pt) for pt in pattern.points]


def cmd_field(run: Run, plan) -> None:
    grid, kern = plan
    s_field, s_pts = child_sequences(run.seed, 2)
    field = sample_chi2_field(grid, kern, run.cfg["field"]["k"], s_field, run.cfg["field"]["method"])
    lines = [run.header, "# meta: " + json.dumps(field.metadata(), sort_keys=True, default=list)]
    lines += [",".join(repr(float(v)) for v in row) for row in field.values]
    (run.out / "field.csv").write_text("\n".join(lines) + "\n")
    run.log.info("wrote field.csv (%d x %d)", grid.ny, grid.nx)
    pattern = _sample_pattern(run, field, s_pts)
    run.csv("points.csv", ("x", "y"), _pattern_rows(pattern), pattern.header())


def cmd_points(run: Run, plan) -> None:
    grid, kern = plan
    s_field, s_pts = child_sequences(run.seed, 2)
    if run.cfg["points"]["sampler"] == "sppp":
        field = None
        pattern = sample_sppp(RectWindow.from_grid(grid), run.cfg["points"]["mean_intensity_per_m2"], s_pts)
    else:
        field = sample_chi2_field(grid, kern, run.cfg["field"]["k"], s_field, run.cfg["field"]["method"])
        pattern = _sample_pattern(run, field, s_pts)
    run.csv("points.csv", ("x", "y"), _pattern_rows(pattern), pattern.header())
    run.log.info("%s pattern with %d points", pattern.label, pattern.n)


def cmd_kstats(run: Run, plan) -> None:
    grid, kern, r = plan
    ks = run.cfg["kstats"]
    k = run.cfg["field"]["k"]
    lam = ks["mean_intensity_per_m2"]
    models = ("pcp", "sppp") if ks["model"] == "both" else (ks["model"],)
    window = RectWindow.from_grid(grid)
    roots = dict(zip(("pcp", "sppp"), child_sequences(run.seed, 2)))
    columns, cols = ["r"], [r]
    for m in models:
        curves = []
        for rep in child_sequences(roots[m], ks["replications"]):
            s_field, s_pts = child_sequences(rep, 2)
            if m == "pcp":
                field = sample_chi2_field(grid, kern, k, s_field, run.cfg["field"]["method"])
                pattern = sample_cox(field, s_pts, scale=lam / k)
            else:
                pattern = sample_sppp(window, lam, s_pts)
            curves.append(k_hat(pattern, r, lam).values)
        mean, lo, hi = ensemble_envelope(curves, ks["level"])
        kc = k_closed(r, kern.length_scale, m)
        lc = l_closed(r, kern.length_scale, m)
        columns += [f"K_closed_{m}", f"L_closed_{m}", f"K_mean_{m}", f"K_lo_{m}", f"K_hi_{m}", f"L_mean_{m}"]
        cols += [kc, lc, mean, lo, hi, np.sqrt(mean / np.pi)]
        run.log.info("%s: %d replications", m, ks["replications"])
    run.csv("kstats.csv", columns, list(zip(*cols)))


def cmd_ec(run: Run, plan) -> None:
    grid, kern, domain, u = plan
    e = run.cfg["ec"]
    k = run.cfg["field"]["k"]
    rho = ec_densities(u, k, 2)
    psi0 = expected_ec(u, k, domain, e["metric_scaling"], kern.length_scale)
    columns = ["u", "rho0", "rho1", "rho2", "psi0"]
    cols = [u, rho[0], rho[1], rho[2], psi0]
    n = e["replications"]
    if n:
        total = np.zeros(len(u))
        total_sq = np.zeros(len(u))
        blocks = -(-n // EC_BLOCK)
        for b, ss in enumerate(child_sequences(run.seed, blocks)):
            m = min(EC_BLOCK, n - b * EC_BLOCK)
            fields = sample_chi2_batch(grid, kern, k, m, ss, run.cfg["field"]["method"])
            for i, level in enumerate(u):
                chi = empirical_ec(fields, level)
                total[i] += chi.sum()
                total_sq[i] += (chi.astype(float) ** 2).sum()
        mean = total / n
        var = np.maximum(total_sq / n - mean**2, 0.0)
        se = np.sqrt(var / n)
        columns += ["empirical_mean", "empirical_se"]
        cols += [mean, se]
        run.log.info("empirical EC over %d fields", n)
    run.csv("ec.csv", columns, list(zip(*cols)))


def cmd_gfunction(run: Run, plan) -> None:
    params, r = plan
    lam = run.cfg["gfunction"]["lambda_sppp_per_m2"]
    gp = np.atleast_1d(g_pcp(r, params))
    gs = np.atleast_1d(g_sppp(r, lam))
    run.csv("gfunction.csv", ("r", "G_pcp", "G_sppp"), list(zip(r, gp, gs)))
    if params.per_ball:
        run.log.info("per-ball clumping domain, u=%g", params.u)
    elif r[0] == 0:
        # the clumping form does not vanish at r = 0 over a fixed domain
        run.log.warning("G_pcp(0) = %.6g over a fixed domain (a nearest-neighbor G would be 0)", gp[0])


COVERAGE_COLUMNS = ("gamma_dB", "u", "r", "p_cov", "method", "stderr", "p_i_dBm", "p_c_dBm")


def _evaluate(method, ncfg, n_trials, seed, disk_factor):
    if method == "integral":
        return coverage_integral(ncfg)
    if method == "closed":
        return coverage_closed_alpha4(ncfg)
    return simulate_coverage_mc(ncfg, n_trials, seed, disk_factor)


def _coverage_rows(run: Run, points, methods, n_trials, disk_factor):
    rows = []
    seeds = child_sequences(run.seed, len(points))
    net = run.cfg["network"]
    for (kw, ncfg), ss in zip(points, seeds):
        vals = {**{k: net[k] for k in SWEEP_KEYS}, **kw}
        for m in methods:
            res = _evaluate(m, ncfg, n_trials, ss, disk_factor)
            rows.append((vals["gamma_db"], vals["u"], vals["r_m"], res.p_cov, res.method, res.stderr,
                         vals["p_i_dbm"], vals["p_c_dbm"]))
    return rows


def cmd_coverage(run: Run, plan) -> None:
    c = run.cfg["coverage"]
    rows = _coverage_rows(run, plan, (c["method"],), c["n_trials"], c["disk_factor"])
    run.csv("coverage.csv", COVERAGE_COLUMNS, rows)


def cmd_sweep(run: Run, plan) -> None:
    s = run.cfg["sweep"]
    rows = _coverage_rows(run, plan, s["methods"], s["n_trials"], s["disk_factor"])
    run.csv("sweep.csv", COVERAGE_COLUMNS, rows)


RUNNERS = {
    "field": cmd_field,
    "points": cmd_points,
    "kstats": cmd_kstats,
    "ec": cmd_ec,
    "gfunction": cmd_gfunction,
    "coverage": cmd_coverage,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with [section] key = value entries")
    common.add_argument("--seed", type=int, help="integer seed (overrides [run] seed)")
    common.add_argument("--out", type=Path, help="output directory (default: runs/<command>)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")
    parser = argparse.ArgumentParser(prog="d2dpcp", description="PCP field, point, EC and coverage experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "field": "sample a chi-square intensity field and a point pattern from it",
        "points": "sample a point pattern (Cox, fixed-n MH, or homogeneous Poisson)",
        "kstats": "closed-form and ensemble K/L curves with envelopes",
        "ec": "EC densities and expected EC over a threshold grid",
        "gfunction": "nearest-neighbor G of the PCP (clumping) and of the Poisson baseline",
        "coverage": "coverage probability over a grid of gamma, u, r and powers",
        "sweep": "coverage along one parameter with several methods side by side",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _logger(out: Path) -> logging.Logger:
    log = logging.getLogger(f"d2dpcp.run.{out.resolve()}")
    log.setLevel(logging.INFO)
    log.propagate = False
    for h in list(log.handlers):
        log.removeHandler(h)
    h = logging.FileHandler(out / "run.log", mode="w")
    h.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(h)
    return log


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args.command, args.config, args.overrides, args.seed)
        plan = PLANNERS[args.command](cfg)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"d2dpcp: invalid configuration: {exc}", file=sys.stderr)
        return 2
    out = args.out if args.out is not None else Path("runs") / args.command
    log = None
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_config_resolved(out / "config_resolved", args.command, cfg)
        log = _logger(out)
        log.info("command %s seed %d", args.command, cfg["run"]["seed"])
        RUNNERS[args.command](Run(args.command, cfg, out, log), plan)
        log.info("done")
    except Exception as exc:
        if log is not None:
            log.error("failed: %s", exc)
        print(f"d2dpcp: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    finally:
        if log is not None:
            for h in list(log.handlers):
                h.close()
                log.removeHandler(h)
    return 0
