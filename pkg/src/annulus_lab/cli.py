"""Command-line entry point: ``annulus-lab <subcommand> [flags]``.

Exit codes: 0 success, 2 argument error, 3 capacity error, 4 internal
consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ArgumentError, CapacityError, IntegrityError, LabError, NumericalError

EXIT_OK, EXIT_ARG, EXIT_CAP, EXIT_CONSISTENCY = 0, 2, 3, 4
POISSON_TOL = 1e-6


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------


@dataclass
class PlotSpec:
    series: List[Tuple[str, Sequence[float], Sequence[float]]] = field(default_factory=list)
    references: List[Tuple[str, float, float]] = field(default_factory=list)
    loglog: bool = True
    title: str = ""
    xlabel: str = "x"
    ylabel: str = "y"

    def validate(self):
        for label, xs, ys in self.series:
            if len(xs) != len(ys):
                raise ArgumentError(f"series {label!r}: x and y lengths differ")
            for v in list(xs) + list(ys):
                if not math.isfinite(v) or (self.loglog and v <= 0):
                    raise ArgumentError(f"series {label!r}: values must be finite and positive on log axes")


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H, _PAD = 640, 480, 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def emit_svg(plot: PlotSpec, path) -> None:
    """Write a standalone SVG; the bytes depend only on ``plot``."""
    plot.validate()
    tx = (lambda v: math.log10(v)) if plot.loglog else float
    pts = [(tx(x), tx(y)) for _, xs, ys in plot.series for x, y in zip(xs, ys)]
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(v):
        return _PAD + (v - x0) / (x1 - x0) * (_W - 2 * _PAD)

    def sy(v):
        return _H - _PAD - (v - y0) / (y1 - y0) * (_H - 2 * _PAD)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        lx = f"1e{fx:.2f}" if plot.loglog else f"{fx:.3g}"
        ly = f"1e{fy:.2f}" if plot.loglog else f"{fy:.3g}"
        out.append(f'<text x="{_fmt(sx(fx))}" y="{_H - _PAD + 18}" font-size="11" text-anchor="middle">{lx}</text>')
        out.append(f'<text x="{_PAD - 6}" y="{_fmt(sy(fy) + 4)}" font-size="11" text-anchor="end">{ly}</text>')
    out.append(f'<text x="{_W / 2}" y="{_H - 15}" font-size="13" text-anchor="middle">{_esc(plot.xlabel)}</text>')
    out.append(f'<text x="15" y="{_H / 2}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 15 {_H / 2})">{_esc(plot.ylabel)}</text>')
    if plot.title:
        out.append(f'<text x="{_W / 2}" y="25" font-size="14" text-anchor="middle">{_esc(plot.title)}</text>')
    legend_y = _PAD + 10
    for i, (label, xs, ys) in enumerate(plot.series):
        c = _COLORS[i % len(_COLORS)]
        coords = [(sx(tx(x)), sy(tx(y))) for x, y in zip(xs, ys)]
        if len(coords) > 1:
            d = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in coords)
            out.append(f'<polyline points="{d}" fill="none" stroke="{c}"/>')
        for a, b in coords:
            out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3" fill="{c}"/>')
        out.append(f'<text x="{_W - _PAD - 150}" y="{legend_y}" font-size="11" fill="{c}">{_esc(label)}</text>')
        legend_y += 15
    for label, slope, icpt in plot.references:
        # reference line y = icpt + slope * x in the transformed coordinates
        ya, yb = icpt + slope * x0, icpt + slope * x1
        out.append(f'<line x1="{_fmt(sx(x0))}" y1="{_fmt(sy(ya))}" x2="{_fmt(sx(x1))}" '
                   f'y2="{_fmt(sy(yb))}" stroke="gray" stroke-dasharray="5,4"/>')
        out.append(f'<text x="{_W - _PAD - 150}" y="{legend_y}" font-size="11" fill="gray">{_esc(label)}</text>')
        legend_y += 15
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def _p_value(s: str) -> float:
    if s.lower() in ("inf", "infinity"):
        return math.inf
    return float(s)


def _common(sp: argparse.ArgumentParser, spec: bool = True):
    if spec:
        sp.add_argument("--lambda", dest="lam", type=float)
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--delta", type=float)
        g.add_argument("--alpha", type=float)
    sp.add_argument("--out", help="output path (stdout when omitted)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--plot", action="store_true", help="also write an SVG next to --out")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--config", help="key=value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="annulus-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("points", help="lattice points of an annulus or curve neighbourhood")
    _common(sp)
    sp.add_argument("--curve", choices=("unit-circle", "ellipse", "parabola"), default="unit-circle")
    sp.add_argument("--a", type=float, default=1.0, help="ellipse semi-axis along x")
    sp.add_argument("--b", type=float, default=1.0, help="ellipse semi-axis along y")

    sp = sub.add_parser("caps", help="cap partition and (s, m) census")
    _common(sp)
    sp.add_argument("--scale", type=float, help="cap length (default sqrt(lambda*delta))")
    sp.add_argument("--eta", action="store_true", help="small-cap case census instead")

    sp = sub.add_parser("kernel-norm", help="L^p norm of the annulus kernel")
    _common(sp)
    sp.add_argument("--p", type=_p_value, default=4.0)
    sp.add_argument("--oversampling", type=float, default=4.0)
    sp.add_argument("--grid-out", help="write the sample grid in binary form")

    sp = sub.add_parser("energy", help="additive energy of the annulus points")
    _common(sp)
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--method", default="auto")

    sp = sub.add_parser("examples", help="Knapp and spherical 2->p ratios")
    _common(sp)
    sp.add_argument("--p", type=_p_value, default=6.0)
    sp.add_argument("--oversampling", type=float, default=4.0)

    sp = sub.add_parser("expsum", help="dyadic exponential sums and the Poisson check")
    _common(sp)
    sp.add_argument("--samples", type=int, default=64)
    sp.add_argument("--poisson", type=int, default=0,
                    help="also compare spectral and spatial sums at this many points")

    sp = sub.add_parser("sweep", help="sweep a quantity over dyadic lambda and fit a slope")
    _common(sp)
    sp.add_argument("--quantity", required=False, default="point-count")
    sp.add_argument("--p", type=_p_value, default=4.0)
    sp.add_argument("--m", type=int, default=3)
    sp.add_argument("--lmin", type=float, default=128.0)
    sp.add_argument("--lmax", type=float, default=1024.0)
    sp.add_argument("--oversampling", type=float, default=4.0)

    sp = sub.add_parser("regions", help="status of (p, alpha) for either conjecture")
    _common(sp, spec=False)
    sp.add_argument("--which", choices=("A", "B"), default="A")
    sp.add_argument("--p", type=_p_value)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--grid", type=int, default=0, help="check consistency on an n x n grid")
    sp.set_defaults(format="json")
    return ap


def read_config(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ArgumentError(f"{path}:{n}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        cfg = read_config(args.config)
        if "lambda" in cfg:
            cfg["lam"] = cfg.pop("lambda")
        sub = ap._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(actions))
        if unknown:
            raise ArgumentError(f"unknown config keys: {', '.join(unknown)}")
        defaults = {}
        for k, v in cfg.items():
            a = actions[k]
            if a.const is True and a.nargs == 0:
                defaults[k] = v.lower() in ("1", "true", "yes")
            else:
                defaults[k] = a.type(v) if a.type else v
        sub.set_defaults(**defaults)
        args = ap.parse_args(argv)
        if getattr(args, "delta", None) is not None and getattr(args, "alpha", None) is not None \
                and args.command != "regions":
            # a flag of one kind overrides a file entry of the other
            if "--delta" in argv:
                args.alpha = None
            elif "--alpha" in argv:
                args.delta = None
            else:
                raise ArgumentError("give exactly one of delta or alpha")
    return args


def _spec(args):
    from .lattice import AnnulusSpec

    if args.lam is None:
        raise ArgumentError("--lambda is required")
    if (args.delta is None) == (args.alpha is None):
        raise ArgumentError("give exactly one of --delta or --alpha")
    if args.delta is not None:
        return AnnulusSpec(args.lam, args.delta)
    return AnnulusSpec.from_alpha(args.lam, args.alpha)


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _plot_path(args, default: str) -> str:
    if args.out:
        return os.path.splitext(args.out)[0] + ".svg"
    return default


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_points(args) -> int:
    from .lattice import CurveSpec, enumerate_annulus, enumerate_curve_neighborhood

    spec = _spec(args)
    if args.curve == "unit-circle":
        lset = enumerate_annulus(spec)
    else:
        curve = CurveSpec.parabola() if args.curve == "parabola" else CurveSpec.ellipse(args.a, args.b)
        lset = enumerate_curve_neighborhood(curve, spec.lam, spec.delta)
    _emit(args, lset.to_csv() if args.format == "csv" else lset.to_json() + "\n")
    return EXIT_OK


def cmd_caps(args) -> int:
    from .caps import census, eta_regime_census, partition
    from .lattice import enumerate_annulus

    spec = _spec(args)
    lset = enumerate_annulus(spec)
    if args.eta:
        rep = eta_regime_census(spec, lset=lset)
        if args.format == "json":
            d = {"lambda": spec.lam, "delta": spec.delta, "scale": rep.scale,
                 "in_regime": rep.in_regime, "lines_forced": rep.lines_forced,
                 "counts": {str(k): v for k, v in rep.counts.items()},
                 "points": {str(k): v for k, v in rep.points.items()}}
            _emit(args, json.dumps(d, sort_keys=True) + "\n")
        else:
            _emit(args, _rows_csv(["case", "caps", "points"],
                                  [[k, rep.counts[k], rep.points[k]] for k in sorted(rep.counts)]))
        return EXIT_OK
    part = partition(lset, args.scale, spec)
    cen = census(part)
    _emit(args, cen.to_csv() if args.format == "csv" else cen.to_json() + "\n")
    return EXIT_OK


def cmd_kernel_norm(args) -> int:
    from .kernel import FourierSupport, lp_norm, synthesize, write_grid
    from .lattice import enumerate_annulus

    spec = _spec(args)
    sup = FourierSupport(enumerate_annulus(spec))
    grid = synthesize(sup, args.oversampling)
    rep = lp_norm(grid, args.p)
    if args.grid_out:
        write_grid(grid, args.grid_out)
    if args.format == "json":
        _emit(args, rep.to_json() + "\n")
    else:
        p = "inf" if rep.p == math.inf else repr(rep.p)
        _emit(args, _rows_csv(["p", "value", "method", "oversampling", "error_estimate"],
                              [[p, repr(rep.value), rep.method, repr(rep.oversampling),
                                repr(rep.error_estimate)]]))
    return EXIT_OK


def cmd_energy(args) -> int:
    from .energy import additive_energy
    from .lattice import enumerate_annulus

    rep = additive_energy(enumerate_annulus(_spec(args)), args.m, args.method)
    if args.format == "json":
        _emit(args, rep.to_json() + "\n")
    else:
        _emit(args, _rows_csv(["m", "energy", "set_size", "method", "support_size"],
                              [[rep.m, rep.energy, rep.set_size, rep.method, rep.support_size]]))
    return EXIT_OK


def cmd_examples(args) -> int:
    from .analysis import envelope_terms
    from .kernel import knapp_support, ratio_2_to_p, spherical_support
    from .lattice import enumerate_annulus

    spec = _spec(args)
    lset = enumerate_annulus(spec)
    knapp = knapp_support(spec, lset=lset)
    sph = spherical_support(spec)
    if sph.empty:
        raise ArgumentError("the annulus has no lattice points")
    t_sph, t_knapp = envelope_terms("A", args.p, spec.lam, spec.delta)
    rows = [
        ["knapp", len(knapp), repr(ratio_2_to_p(knapp, args.p, args.oversampling)), repr(t_knapp)],
        ["spherical", len(sph), repr(ratio_2_to_p(sph, args.p, args.oversampling)), repr(t_sph)],
    ]
    if args.format == "json":
        _emit(args, json.dumps([dict(zip(["example", "size", "ratio", "envelope_term"], r))
                                for r in rows], sort_keys=True) + "\n")
    else:
        _emit(args, _rows_csv(["example", "size", "ratio", "envelope_term"], rows))
    return EXIT_OK


def cmd_expsum(args) -> int:
    from .dyadic import dyadic_bound_report, phi_flat, sample_points

    spec = _spec(args)
    rep = dyadic_bound_report(spec.lam, spec.delta, args.samples, args.seed)
    _emit(args, rep.to_csv() if args.format == "csv" else rep.to_json() + "\n")
    if args.plot:
        emit_svg(PlotSpec([("empirical sup", [r.M for r in rep.rows], [r.emp_sup for r in rep.rows]),
                           ("trivial", [r.M for r in rep.rows], [r.trivial for r in rep.rows])],
                          title="dyadic exponential sums", xlabel="M", ylabel="sup |S|"),
                 _plot_path(args, "expsum.svg"))
    for r in rep.rows:
        if r.emp_sup > r.envelope * (1 + 1e-9):
            print(f"error: empirical sup exceeds the trivial envelope at M={r.M}", file=sys.stderr)
            return EXIT_CONSISTENCY
    if args.poisson:
        worst = 0.0
        for x in sample_points(args.poisson, args.seed + 1):
            a = phi_flat(spec.lam, spec.delta, x, "spectral")
            b = phi_flat(spec.lam, spec.delta, x, "spatial")
            worst = max(worst, abs(a - b))
        print(f"poisson max abs mismatch {worst:.3e}", file=sys.stderr)
        if worst > POISSON_TOL:
            print(f"error: Poisson mismatch {worst:.3e} exceeds {POISSON_TOL:g}", file=sys.stderr)
            return EXIT_CONSISTENCY
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .analysis import SweepConfig, fit_loglog, geometric_grid, run_sweep, sweep_csv

    if args.alpha is None:
        raise ArgumentError("sweep needs --alpha")
    cfg = SweepConfig(args.quantity, args.alpha, geometric_grid(args.lmin, args.lmax),
                      args.p, args.m, args.oversampling, args.seed)
    rows = run_sweep(cfg)
    if args.format == "json":
        body = json.dumps([r.__dict__ for r in rows], sort_keys=True,
                          default=lambda v: None) + "\n"
    else:
        body = sweep_csv(rows)
    _emit(args, body)
    good = [r for r in rows if r.value is not None and r.value > 0]
    if len(good) >= 3:
        fit = fit_loglog(good)
        print(fit.to_json(), file=sys.stderr if not args.out else sys.stdout)
        if args.plot:
            emit_svg(PlotSpec([(cfg.quantity, [r.lam for r in good], [r.value for r in good])],
                              [(f"fit slope {fit.slope:.3f}", fit.slope, fit.intercept / math.log(10))],
                              title=f"{cfg.quantity} at alpha={cfg.alpha:g}",
                              xlabel="lambda", ylabel=cfg.quantity),
                     _plot_path(args, "sweep.svg"))
    else:
        print("fewer than three usable rows; no fit", file=sys.stderr)
    return EXIT_OK


def cmd_regions(args) -> int:
    from .analysis import (RegimePoint, region_consistency, regime_boundary,
                           side_of_curve, status)

    out = {"which": args.which}
    if args.p is not None or args.alpha is not None:
        if args.p is None or args.alpha is None:
            raise ArgumentError("give both --p and --alpha")
        st = status(args.which, RegimePoint(args.p, args.alpha))
        out.update({"p": "inf" if args.p == math.inf else args.p, "alpha": args.alpha,
                    "status": st.status, "source": st.source,
                    "red_curve": regime_boundary(args.which, args.p),
                    "side": side_of_curve(args.which, args.p, args.alpha)})
    bad = []
    if args.grid:
        ts = np.linspace(0.0, 0.5, args.grid)
        ps = [math.inf if t == 0 else 1 / t for t in ts]
        alphas = list(np.linspace(0.0, 1.0, args.grid))
        bad = region_consistency(args.which, ps, alphas)
        out["grid"] = args.grid
        out["violations"] = len(bad)
    if args.plot:
        _region_plot(args.which, _plot_path(args, f"regions_{args.which}.svg"))
    _emit(args, json.dumps(out, sort_keys=True) + "\n")
    if bad:
        print(f"error: {len(bad)} region consistency violations, first {bad[0]}", file=sys.stderr)
        return EXIT_CONSISTENCY
    return EXIT_OK


def _region_plot(which: str, path: str) -> None:
    from .analysis import RegimePoint, regime_boundary, status

    groups = {"proved": ([], []), "proved-with-eps": ([], []), "open": ([], [])}
    for t in np.linspace(0.0, 0.5, 26)[1:]:
        for a in np.linspace(0.0, 0.98, 25):
            s = status(which, RegimePoint(1 / t, a)).status
            groups[s][0].append(float(t))
            groups[s][1].append(float(a))
    red = np.linspace(0.02, 0.5, 25)
    series = [(k, xs, ys) for k, (xs, ys) in groups.items() if xs]
    series.append(("red curve", list(map(float, red)),
                   [max(regime_boundary(which, 1 / t), 0.0) for t in red]))
    emit_svg(PlotSpec(series, [], loglog=False, title=f"conjecture {which}",
                      xlabel="1/p", ylabel="alpha"), path)


COMMANDS = {
    "points": cmd_points, "caps": cmd_caps, "kernel-norm": cmd_kernel_norm,
    "energy": cmd_energy, "examples": cmd_examples, "expsum": cmd_expsum,
    "sweep": cmd_sweep, "regions": cmd_regions,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        code = COMMANDS[args.command](args)
        if args.plot and args.command in ("points", "caps", "kernel-norm", "energy", "examples"):
            print("note: --plot has no chart for this subcommand", file=sys.stderr)
        return code
    except SystemExit as exc:  # argparse reports bad flags this way
        return EXIT_OK if exc.code in (0, None) else EXIT_ARG
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (IntegrityError, NumericalError) as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
