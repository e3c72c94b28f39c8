"""Command-line front end: ``ssdelay <command> [options]``.

Every command writes its results plus ``manifest.json`` into ``--out``
(default ``$SSDELAY_OUT`` or ``./runs``).  Exit codes: 0 success,
2 configuration error, 3 numerical divergence, 4 scan inconsistency.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import chaos, curves, models, orbit_analysis, ring_array, spectral
from .dde_core import HistorySegment, StepperConfig, integrate, write_trajectory_csv
from .errors import ConfigurationError, DivergenceError, ScanInconsistencyError, SSDelayError

OUT_ENV = "SSDELAY_OUT"

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_SCAN = 0, 2, 3, 4


def _code_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


@dataclass
class RunManifest:
    command: str
    argv: list
    parameters: dict
    settings: dict
    code_version: str = field(default_factory=_code_version)
    outputs: list = field(default_factory=list)
    wall_time: float = 0.0

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


# --------------------------------------------------------------------------
# Seeds
# --------------------------------------------------------------------------

def parse_seed(spec: str, tau: float, m: int) -> HistorySegment:
    """``const:v``, ``linear:v0,v1`` (values at -tau and 0), ``cos:a,b`` for
    ``a cos(theta) + b`` and ``exp:a,b`` for ``a e^theta + b``."""
    try:
        kind, rest = spec.split(":", 1)
        nums = [float(v) for v in rest.split(",")]
    except ValueError:
        raise ConfigurationError(f"malformed seed {spec!r}; expected kind:numbers")
    want = {"const": 1, "linear": 2, "cos": 2, "exp": 2}
    if kind not in want:
        raise ConfigurationError(f"unknown seed kind {kind!r}; use const, linear, cos or exp")
    if len(nums) != want[kind]:
        raise ConfigurationError(f"seed {spec!r} needs {want[kind]} number(s)")
    if kind == "const":
        return HistorySegment.constant(nums[0], tau, m)
    if kind == "linear":
        return HistorySegment.linear(nums[0], nums[1], tau, m)
    a, b = nums
    if kind == "cos":
        return HistorySegment.from_function(lambda th: a * np.cos(th) + b, tau, m,
                                            derivative=lambda th: -a * np.sin(th))
    return HistorySegment.from_function(lambda th: a * np.exp(th) + b, tau, m,
                                        derivative=lambda th: a * np.exp(th))


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigurationError(f"expected comma-separated numbers, got {text!r}")
    if n is not None and len(vals) != n:
        raise ConfigurationError(f"expected {n} numbers, got {text!r}")
    return vals


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------

class Outputs:
    """Collects files written under one run directory; refuses paths outside it."""

    def __init__(self, root: Path):
        self.root = root.resolve()
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        p = (self.root / name).resolve()
        if self.root not in p.parents:
            raise ConfigurationError(f"output name {name!r} escapes the --out directory")
        self.files.append(str(p.relative_to(self.root)))
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text)
        return p

    def write_csv(self, name: str, header, rows) -> Path:
        p = self.path(name)
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        return p


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# --------------------------------------------------------------------------
# Parameters
# --------------------------------------------------------------------------

_PARAM_FLAGS = {"alpha": float, "tau": float, "amplitude": float, "omega": float, "R": float,
                "mu": float, "mu_inf": float, "epsilon": float, "N": int, "a": float,
                "b": float, "d": float, "q": float}


def _params(args) -> dict:
    cfg = models.read_config(args.config) if args.config else {}
    for key in _PARAM_FLAGS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _ss(cfg):
    return models.ss_params_from(cfg)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_simulate(args, cfg, out: Outputs) -> dict:
    step = args.step
    if args.model == "ring":
        rp = models.ring_params_from(cfg)
        m = StepperConfig(step).snapped_m(rp.tau)
        seeds = [parse_seed(s, rp.tau, m) for s in (args.seed or [])]
        rc = ring_array.RingConfig(horizon=args.t_end, step=step)
        run = ring_array.stream_ring(rp, seeds, rc)
        ring_array.write_projection_csv(out.path("projection.csv"),
                                        ring_array.delayed_projection(run.times, run.states, rp.tau))
        write_trajectory_csv(out.path("trajectory.csv"), run.times, run.states)
        return dict(step=step, t_end=args.t_end, seeds=args.seed)
    p = _ss(cfg)
    m = StepperConfig(step).snapped_m(p.tau)
    seed = parse_seed((args.seed or ["const:0.01"])[0], p.tau, m)
    forcing = models.forcing_from(cfg)
    if args.model == "ss":
        rhs = models.ss_system(p, forcing)
    elif args.model == "truncated":
        rhs = models.truncated_system(p, models.TruncationSpec(cfg.get("R", 1.0)), forcing)
    else:
        rhs = models.family_system(models.gain_params_from(cfg))
    traj = integrate(rhs, seed, (0.0, args.t_end), StepperConfig(step))
    traj.to_csv(out.path("trajectory.csv"), stride=args.stride)
    return dict(step=traj.step, t_end=args.t_end, stride=args.stride, seeds=args.seed)


def cmd_roots(args, cfg, out: Outputs) -> dict:
    p = _ss(cfg)
    if args.variant == "zero":
        cf = spectral.zero_linearization(p.alpha, p.tau)
    elif args.variant == "symmetric":
        cf = spectral.symmetric_linearization(p.alpha, p.tau)
    else:
        cf = spectral.gained_linearization(p.alpha, p.tau, cfg["mu"])
    roots = spectral.characteristic_roots(cf, args.n_max)
    out.write_csv("roots.csv", ["re", "im", "residual", "multiplicity"],
                  [(r.real, r.imag, r.residual, r.multiplicity) for r in roots])
    return dict(variant=args.variant, n_max=args.n_max)


def cmd_freqcheck(args, cfg, out: Outputs) -> dict:
    p = _ss(cfg)
    tf = spectral.TransferFunction(args.variant, p.alpha, p.tau)
    rep = spectral.frequency_check(tf, args.nu0, args.Lambda, args.form)
    out.write_text("freqcheck.json", rep.to_json() + "\n")
    return dict(variant=args.variant, nu0=args.nu0, Lambda=args.Lambda, form=args.form)


def cmd_project(args, cfg, out: Outputs) -> dict:
    p = _ss(cfg)
    m = StepperConfig(args.step).snapped_m(p.tau)
    seg = parse_seed(args.seed[0] if args.seed else "const:1", p.tau, m)
    c = spectral.spectral_projector(seg, p.alpha, p.tau, raw=args.raw)
    out.write_text("projection.json", json.dumps(dict(c1=c.c1, c2=c.c2)) + "\n")
    return dict(seed=args.seed, raw=args.raw, m=m)


def cmd_curves(args, cfg, out: Outputs) -> dict:
    lo, hi, n = _floats(args.alpha_grid, 3)
    alphas = np.linspace(lo, hi, int(n))
    points = []
    for kind in args.kind:
        if kind == "gained":
            mu = cfg.get("mu")
            if mu is None:
                raise ConfigurationError("the gained curve needs --mu")
            points += [curves.CurvePoint(float(a), curves.gained_neutral_curve_tau(float(a), mu),
                                         curves.CurveKind.GAINED_NEUTRAL) for a in alphas]
        else:
            points += curves.curve_points(curves.CurveKind(kind), alphas)
    curves.write_curves_csv(out.path("curves.csv"), points)
    return dict(kinds=args.kind, alpha_grid=args.alpha_grid)


def cmd_hidden_scan(args, cfg, out: Outputs) -> dict:
    alphas = _floats(args.alphas) if args.alphas else [cfg["alpha"]]
    sc = curves.ScanConfig(tolerance=args.tolerance, threads=args.threads,
                           probe=orbit_analysis.ProbeConfig(horizon=args.horizon, step=args.step))
    results = []
    for a in alphas:
        bracket = _floats(args.bracket, 2) if args.bracket else curves.default_bracket(a)
        results.append(curves.hidden_curve_scan(a, tuple(bracket), sc))
    curves.write_scan_csv(out.path("hidden_scan.csv"), results)
    return dict(alphas=alphas, bracket=args.bracket, tolerance=args.tolerance,
                horizon=args.horizon, step=args.step)


def cmd_classify(args, cfg, out: Outputs) -> dict:
    p = _ss(cfg)
    cc = orbit_analysis.ClassifyConfig(probe=orbit_analysis.ProbeConfig(horizon=args.horizon,
                                                                        step=args.step))
    res = orbit_analysis.classify_attractor(p, cc)
    out.write_text("classification.json", res.to_json() + "\n")
    return dict(horizon=args.horizon, step=args.step)


def _chaos_config(args) -> chaos.ChaosConfig:
    return chaos.ChaosConfig(step=args.step, transient=args.transient, horizon=args.horizon,
                             renorm_interval=args.renorm)


def cmd_lyapunov(args, cfg, out: Outputs) -> dict:
    p = _ss(cfg)
    m = StepperConfig(args.step).snapped_m(p.tau)
    seed = parse_seed(args.seed[0] if args.seed else "const:5", p.tau, m)
    est = chaos.lyapunov_exponents(p, models.forcing_from(cfg), seed, args.k, _chaos_config(args))
    out.write_text("lyapunov.json", json.dumps(asdict(est), indent=2) + "\n")
    return dict(seed=args.seed, k=args.k, step=args.step, transient=args.transient,
                horizon=args.horizon, renorm=args.renorm)


def cmd_poincare(args, cfg, out: Outputs) -> dict:
    p = _ss(cfg)
    m = StepperConfig(args.step).snapped_m(p.tau)
    seed = parse_seed(args.seed[0] if args.seed else "const:5", p.tau, m)
    series = chaos.poincare_iterations(p, models.forcing_from(cfg), seed, args.transient,
                                       args.t_end, step=args.step, raw=args.raw)
    series.write_csv(out.path("poincare.csv"))
    return dict(seed=args.seed, step=args.step, transient=args.transient, t_end=args.t_end)


def cmd_sweep(args, cfg, out: Outputs) -> dict:
    p = _ss(cfg)
    lo, hi = _floats(args.a_range, 2)
    m = StepperConfig(args.step).snapped_m(p.tau)
    seed = parse_seed(args.seed[0] if args.seed else "const:5", p.tau, m)
    rows = chaos.amplitude_sweep(p, (lo, hi), args.a_step, _chaos_config(args), seed,
                                 omega=cfg.get("omega", 1.0), k=2, threads=args.threads)
    chaos.write_sweep_csv(out.path("sweep.csv"), rows)
    failures = [dict(A=r.amplitude, error=r.error) for r in rows if r.error]
    if failures:
        out.write_text("sweep_failures.json", json.dumps(failures, indent=2) + "\n")
    return dict(a_range=[lo, hi], a_step=args.a_step, step=args.step, transient=args.transient,
                horizon=args.horizon, renorm=args.renorm)


def cmd_continue(args, cfg, out: Outputs) -> dict:
    g = models.gain_params_from(cfg)
    sched = _floats(args.schedule)
    pc = orbit_analysis.ProbeConfig(horizon=args.horizon, step=args.step)
    steps = orbit_analysis.continuation_run(g, sched, pc)
    rows = [(s.epsilon, s.estimate.period, s.estimate.amplitude, s.estimate.confidence)
            for s in steps]
    out.write_csv("continuation.csv", ["epsilon", "period", "amplitude", "confidence"], rows)
    return dict(schedule=sched, horizon=args.horizon, step=args.step)


def cmd_ring(args, cfg, out: Outputs) -> dict:
    rp = models.ring_params_from(cfg)
    m = StepperConfig(args.step).snapped_m(rp.tau)
    seeds = [parse_seed(s, rp.tau, m) for s in (args.seed or [])]
    rc = ring_array.RingConfig(horizon=args.horizon, step=args.step)
    rep = ring_array.classify_ring_regime(rp, seeds, rc, probes=[] if args.no_probe else None)
    out.write_text("ring_report.json", rep.to_json() + "\n")
    return dict(seeds=args.seed, horizon=args.horizon, step=args.step, probe=not args.no_probe)


# --------------------------------------------------------------------------
# SVG plots
# --------------------------------------------------------------------------

_W, _H, _PAD = 640, 420, 50
_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def read_numeric_csv(path) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text()
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        return [], np.empty((0, 0))
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError:
        raise ConfigurationError(f"{path}: non-numeric CSV entry")
    if body and (data.ndim != 2 or data.shape[1] != len(header)):
        raise ConfigurationError(f"{path}: rows do not match the header")
    return header, data.reshape(len(body), len(header))


def _scale(v, lo, hi, a, b):
    if hi <= lo:
        return 0.5 * (a + b)
    return a + (v - lo) * (b - a) / (hi - lo)


def render_svg(kind: str, header: list[str], data: np.ndarray) -> str:
    """Deterministic SVG for ``timeseries``, ``plane`` or ``sweep`` plots."""
    if kind == "plane":
        cols = [header.index("c1"), header.index("c2")] if {"c1", "c2"} <= set(header) else [0, 1]
        xs, ys_list, labels = cols[0], [cols[1]], [header[cols[1]] if header else "y"]
    elif kind == "sweep":
        xs = 0
        ys_list = [header.index(c) for c in ("lambda1", "lambda2") if c in header] or [1]
        labels = [header[i] for i in ys_list] if header else []
    elif kind == "timeseries":
        xs, ys_list = 0, list(range(1, len(header)))
        labels = header[1:]
    else:
        raise ConfigurationError(f"unknown plot kind {kind!r}")
    finite = data[np.all(np.isfinite(data), axis=1)] if data.size else data
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
             f'viewBox="0 0 {_W} {_H}">',
             f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
             f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
             f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>']
    if finite.size and finite.shape[1] > max([xs] + ys_list):
        x = finite[:, xs]
        ys = finite[:, ys_list]
        xlo, xhi, ylo, yhi = x.min(), x.max(), ys.min(), ys.max()
        parts.append(f'<text x="{_PAD}" y="{_H - 15}" font-size="11">{xlo:.4g}</text>')
        parts.append(f'<text x="{_W - _PAD}" y="{_H - 15}" font-size="11" '
                     f'text-anchor="end">{xhi:.4g}</text>')
        parts.append(f'<text x="5" y="{_H - _PAD}" font-size="11">{ylo:.4g}</text>')
        parts.append(f'<text x="5" y="{_PAD}" font-size="11">{yhi:.4g}</text>')
        px = [_scale(v, xlo, xhi, _PAD, _W - _PAD) for v in x]
        for j in range(ys.shape[1]):
            color = _COLORS[j % len(_COLORS)]
            py = [_scale(v, ylo, yhi, _H - _PAD, _PAD) for v in ys[:, j]]
            if kind == "plane":
                parts += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="1.5" fill="{color}"/>'
                          for a, b in zip(px, py)]
            else:
                pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
                parts.append(f'<polyline fill="none" stroke="{color}" points="{pts}"/>')
    for j, lab in enumerate(labels):
        parts.append(f'<text x="{_W - _PAD}" y="{_PAD + 14 * j}" font-size="11" text-anchor="end" '
                     f'fill="{_COLORS[j % len(_COLORS)]}">{lab}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_plot(args, cfg, out: Outputs) -> dict:
    header, data = read_numeric_csv(args.input)
    out.write_text(args.name, render_svg(args.kind, header, data))
    return dict(input=str(args.input), kind=args.kind)


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, step: float = 1e-3) -> None:
    p.add_argument("--config", help="key = value parameter file; flags override it")
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./runs)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--step", type=float, default=step)
    for key, typ in _PARAM_FLAGS.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ssdelay", description=__doc__.splitlines()[0],
                                 allow_abbrev=False)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", allow_abbrev=False, help="integrate one model and write the trajectory")
    _common(p)
    p.add_argument("--model", choices=["ss", "truncated", "family", "ring"], default="ss")
    p.add_argument("--seed", action="append", help="seed spec; repeat once per ring node")
    p.add_argument("--t-end", type=float, default=1000.0)
    p.add_argument("--stride", type=int, default=10)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("roots", allow_abbrev=False, help="characteristic roots")
    _common(p)
    p.add_argument("--variant", choices=["zero", "symmetric", "gained"], default="symmetric")
    p.add_argument("--n-max", type=int, default=6)
    p.set_defaults(func=cmd_roots)

    p = sub.add_parser("freqcheck", allow_abbrev=False, help="frequency-inequality certification")
    _common(p)
    p.add_argument("--variant", choices=[v.value for v in spectral.Variant], default="gained_symmetric")
    p.add_argument("--nu0", type=float, required=True)
    p.add_argument("--Lambda", type=float, required=True)
    p.add_argument("--form", choices=[f.value for f in spectral.Form], default="modulus")
    p.set_defaults(func=cmd_freqcheck)

    p = sub.add_parser("project", allow_abbrev=False, help="spectral coordinates of a history segment")
    _common(p)
    p.add_argument("--seed", action="append")
    p.add_argument("--raw", action="store_true")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("curves", allow_abbrev=False, help="analytic bifurcation curves")
    _common(p)
    p.add_argument("--kind", action="append", choices=["neutral", "squeezing", "gained"])
    p.add_argument("--alpha-grid", default="0.51,0.99,49", help="start,stop,count")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("hidden-scan", allow_abbrev=False, help="lower and upper hidden curves by bisection")
    _common(p)
    p.add_argument("--alphas", help="comma-separated alpha values")
    p.add_argument("--bracket", help="lo,hi in tau")
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--horizon", type=float, default=1000.0)
    p.set_defaults(func=cmd_hidden_scan)

    p = sub.add_parser("classify", allow_abbrev=False, help="hidden / self-excited classification")
    _common(p)
    p.add_argument("--horizon", type=float, default=1000.0)
    p.set_defaults(func=cmd_classify)

    for name, func, help_ in (("lyapunov", cmd_lyapunov, "leading Lyapunov exponents"),
                              ("sweep", cmd_sweep, "Lyapunov exponents over forcing amplitudes")):
        p = sub.add_parser(name, help=help_, allow_abbrev=False)
        _common(p, step=1e-4)
        p.add_argument("--seed", action="append")
        p.add_argument("--transient", type=float, default=3000.0 * math.pi)
        p.add_argument("--horizon", type=float, default=10000.0)
        p.add_argument("--renorm", type=float, default=1.0)
        if name == "lyapunov":
            p.add_argument("--k", type=int, default=2)
        else:
            p.add_argument("--a-range", default="0.068,0.075")
            p.add_argument("--a-step", type=float, default=1e-4)
        p.set_defaults(func=func)

    p = sub.add_parser("poincare", allow_abbrev=False, help="stroboscopic map in spectral coordinates")
    _common(p, step=1e-4)
    p.add_argument("--seed", action="append")
    p.add_argument("--transient", type=float, default=600.0 * math.pi)
    p.add_argument("--t-end", type=float, default=10000.0)
    p.add_argument("--raw", action="store_true")
    p.set_defaults(func=cmd_poincare)

    p = sub.add_parser("continue", allow_abbrev=False, help="continuation from the gained system")
    _common(p)
    p.add_argument("--schedule", default="0,0.25,0.5,0.75,1")
    p.add_argument("--horizon", type=float, default=1000.0)
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("ring", allow_abbrev=False, help="ring-array regime classification")
    _common(p, step=1e-4)
    p.add_argument("--seed", action="append")
    p.add_argument("--horizon", type=float, default=1500.0)
    p.add_argument("--no-probe", action="store_true", help="skip the provenance probes")
    p.set_defaults(func=cmd_ring)

    p = sub.add_parser("plot", allow_abbrev=False, help="render a CSV produced by this tool as SVG")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=["timeseries", "plane", "sweep"], default="timeseries")
    p.add_argument("--name", default="plot.svg")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    out_root = Path(args.out or os.environ.get(OUT_ENV) or "runs")
    t0 = time.perf_counter()
    try:
        if args.threads < 1:
            raise ConfigurationError("--threads must be at least 1")
        cfg = _params(args)
        if args.command == "curves" and not args.kind:
            args.kind = ["neutral", "squeezing"]
        out = Outputs(out_root)
        settings = args.func(args, cfg, out)
        settings["step"] = args.step
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:
        print(f"configuration error: missing parameter {exc.args[0]!r}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence at t={exc.t}: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ScanInconsistencyError as exc:
        print(f"scan inconsistency: {exc}", file=sys.stderr)
        return EXIT_SCAN
    except SSDelayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest = RunManifest(args.command, argv, cfg, settings, outputs=sorted(out.files),
                           wall_time=time.perf_counter() - t0)
    manifest.write(out.root)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
