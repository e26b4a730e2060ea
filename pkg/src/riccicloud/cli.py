"""Command-line experiment runner.

Subcommands: sample, build, curvature, global-bound, heat, consistency-sweep,
fig2, report. Every output file carries a provenance header (config hash,
package version, seed); histograms are emitted as standalone SVG with a
log-scale vertical axis. Exit codes: 0 success, 1 criterion failure (report),
2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .curvature import (
    circle_window_records,
    consistency_report,
    global_lower_bound,
    kappa_pair,
    pair_workload,
)
from .fields import make_field
from .graph_metric import GraphMetric, MetricError
from .heat import HeatSystem, contraction_experiment, degree_deviation
from .manifolds import PointCloud, make_oracle
from .rgg import build_rgg
from .transport import estimate_w_infty_empirical

FIG2_SETS = {
    1: {"n": 500, "eps": 0.2, "delta0": 0.01, "delta1": 0.02},
    2: {"n": 750, "eps": 0.2, "delta0": 0.01, "delta1": 0.02},
    3: {"n": 1000, "eps": 0.1, "delta0": 0.005, "delta1": 0.01},
    4: {"n": 1500, "eps": 0.1, "delta0": 0.005, "delta1": 0.01},
}


class CliError(Exception):
    """Usage / IO problem: exits with code 2."""


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def provenance(cfg: dict) -> dict:
    return {"config": cfg, "config_hash": _config_hash(cfg), "version": __version__,
            "seed": cfg.get("seed")}


def write_csv(path, header: str, rows, prov: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# provenance: {json.dumps(prov, sort_keys=True, default=str)}\r\n")
        fh.write(header + "\r\n")
        for row in rows:
            fh.write(row + "\r\n")


def write_json(path, payload: dict, prov: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = dict(payload)
    payload["provenance"] = prov
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)


def write_histogram_svg(path, values, title: str, prov: dict, bins: int = 24,
                        lo: float | None = None, hi: float | None = None) -> dict:
    """Bar histogram with a log-scale vertical axis; returns bin stats."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise CliError("nothing to histogram")
    lo = float(values.min()) if lo is None else lo
    hi = float(values.max()) if hi is None else hi
    if hi <= lo:
        hi = lo + 1e-9
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    width, height, mleft, mbot, mtop = 640, 400, 60, 40, 30
    plot_w, plot_h = width - mleft - 20, height - mbot - mtop
    log_counts = np.log10(1.0 + counts)
    peak = max(log_counts.max(), 1e-9)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f"<!-- provenance: {json.dumps(prov, sort_keys=True, default=str)} -->",
        f'<text x="{width/2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{mleft}" y1="{height-mbot}" x2="{width-20}" y2="{height-mbot}" stroke="black"/>',
        f'<line x1="{mleft}" y1="{mtop}" x2="{mleft}" y2="{height-mbot}" stroke="black"/>',
        f'<text x="12" y="{mtop+10}" font-size="10">log10(1+count)</text>',
    ]
    bw = plot_w / bins
    for k, (cnt, lc) in enumerate(zip(counts, log_counts)):
        h = plot_h * lc / peak
        x = mleft + k * bw
        y = height - mbot - h
        parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{bw*0.92:.2f}" height="{h:.2f}" '
            f'fill="steelblue"><title>{edges[k]:.4g}..{edges[k+1]:.4g}: {cnt}</title></rect>'
        )
    for frac in (0.0, 0.5, 1.0):
        xv = lo + frac * (hi - lo)
        xp = mleft + frac * plot_w
        parts.append(
            f'<text x="{xp:.1f}" y="{height-mbot+16}" text-anchor="middle" font-size="10">{xv:.3g}</text>'
        )
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts))
    modal = int(np.argmax(counts))
    return {
        "counts": counts.tolist(),
        "edges": edges.tolist(),
        "modal_bin": [float(edges[modal]), float(edges[modal + 1])],
    }


def load_config_file(path) -> dict:
    cfg = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from exc
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"bad config line: {line!r}")
        key, val = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


def _build_pipeline(args):
    oracle = make_oracle(args.manifold, m=args.m, radius=args.radius)
    cloud = oracle.sample_uniform(args.n, seed=args.seed)
    kw = {"h": 4.0 * args.eps} if args.field == "sff" else {}
    field = make_field(args.field, cloud, oracle=oracle, **kw)
    rgg = build_rgg(cloud, args.eps, field)
    metric = GraphMetric(rgg, c0=args.c0, c1=args.c1)
    if not metric.regime_ok:
        print(f"WARNING: scale regime violated: c1 = {metric.c1:.4g} < 2 + 4 c0 "
              f"= {2 + 4 * metric.c0:.4g}", file=sys.stderr)
    return oracle, cloud, rgg, metric


def _workload(rgg, metric, spec_str: str, seed: int):
    if spec_str == "all-edges":
        return pair_workload(rgg, metric, "all_edges")
    if spec_str == "theorem-window":
        return pair_workload(rgg, metric, "theorem_window", k=None, seed=seed)
    if spec_str.startswith("theorem-window:"):
        return pair_workload(rgg, metric, "theorem_window", k=int(spec_str.split(":")[1]), seed=seed)
    if spec_str.startswith("sample:"):
        return pair_workload(rgg, metric, "sample", k=int(spec_str.split(":")[1]), seed=seed)
    raise CliError(f"unknown --pairs value {spec_str!r}")


def cmd_sample(args, cfg):
    oracle = make_oracle(args.manifold, m=args.m, radius=args.radius)
    cloud = oracle.sample_uniform(args.n, seed=args.seed)
    out = Path(args.out) / "cloud.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    cloud.to_csv(out)
    print(f"wrote {out} ({cloud.n} points)")
    return 0


def cmd_build(args, cfg):
    oracle, cloud, rgg, metric = _build_pipeline(args)
    out = Path(args.out) / "graph.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    rgg.to_json(out, meta=provenance(cfg))
    print(f"wrote {out} ({rgg.edge_count()} edges, regime_ok={metric.regime_ok})")
    return 0


def cmd_curvature(args, cfg):
    oracle, cloud, rgg, metric = _build_pipeline(args)
    pairs = _workload(rgg, metric, args.pairs, args.seed)
    rows = []
    skipped = 0
    from .curvature import CurvatureRecord

    for i, j in pairs:
        try:
            rows.append(kappa_pair(rgg, metric, i, j, oracle=oracle).csv_row())
        except MetricError:
            skipped += 1
    out = Path(args.out) / "curvature.csv"
    write_csv(out, CurvatureRecord.CSV_HEADER, rows, provenance(cfg))
    print(f"wrote {out} ({len(rows)} records, {skipped} disconnected pairs skipped)")
    return 0


def cmd_global_bound(args, cfg):
    oracle, cloud, rgg, metric = _build_pipeline(args)
    proxy = estimate_w_infty_empirical(cloud, oracle, 4 * args.n, seed=args.seed + 1)
    rep = global_lower_bound(rgg, metric, oracle=oracle, w_infty_proxy=proxy["proxy"])
    payload = {
        "k_g_emp": rep.k_g_emp,
        "argmin_pair": list(rep.argmin_pair),
        "n_adjacent": rep.n_adjacent,
        "n_solved": rep.n_solved,
        "s_k": rep.s_k,
        "ric_lower_scaled": rep.ric_lower_scaled,
        "predicted_floor": rep.predicted_floor,
        "c_m": rep.c_m,
        "c_m_source": rep.c_m_source,
        "w_infty_proxy": rep.w_infty_proxy,
        "regime_ok": metric.regime_ok,
    }
    out = Path(args.out) / "global_bound.json"
    write_json(out, payload, provenance(cfg))
    print(f"wrote {out} (K_G_emp={rep.k_g_emp:.4g}, s_K={rep.s_k:.4g})")
    return 0


def cmd_heat(args, cfg):
    oracle, cloud, rgg, metric = _build_pipeline(args)
    system = HeatSystem(rgg, metric, oracle=oracle)
    bound = global_lower_bound(rgg, metric, oracle=oracle)
    rng = np.random.default_rng(args.seed + 7)
    u0 = rng.standard_normal(rgg.n)
    t_grid = [0.0, 0.5, 1.0, 2.0, 4.0]
    rep = contraction_experiment(system, u0, t_grid, bound.k_g_emp)
    rows = [
        f"{r['t']:.17g},{r['lip']:.17g},{r['envelope_lip']:.17g},"
        f"{r['linf_dev']:.17g},{r['envelope_linf']:.17g}"
        for r in rep.rows
    ]
    out = Path(args.out) / "heat.csv"
    write_csv(out, "t,lip,envelope_lip,linf_dev,envelope_linf", rows, provenance(cfg))
    note = "" if rep.rate_positive else " (rate <= 0: envelope vacuous, not asserted)"
    print(f"wrote {out} (rate={rep.rate:.4g}{note})")
    return 0


def cmd_consistency_sweep(args, cfg):
    schedule = [int(v) for v in args.schedule.split(",")]
    rows = []
    for n in schedule:
        eps = args.eps_scale * n ** (-1.0 / 8.0)
        oracle = make_oracle(args.manifold, m=args.m, radius=args.radius)
        cloud = oracle.sample_uniform(n, seed=args.seed + n)
        if oracle.kind == "circle":
            recs = circle_window_records(oracle, cloud, eps=eps, c0=args.c0, c1=args.c1,
                                         k=args.k, seed=args.seed)
        else:
            field = make_field(args.field, cloud, oracle=oracle,
                               **({"h": 4.0 * eps} if args.field == "sff" else {}))
            rgg = build_rgg(cloud, eps, field)
            metric = GraphMetric(rgg, c0=args.c0, c1=args.c1)
            pairs = pair_workload(rgg, metric, "theorem_window", k=args.k, seed=args.seed)
            recs = []
            for i, j in pairs:
                try:
                    recs.append(kappa_pair(rgg, metric, i, j, oracle=oracle))
                except MetricError:
                    continue
        rep = consistency_report(recs, n=n, eps=eps, m=oracle.intrinsic_dim)
        rows.append(
            f"{n},{eps:.17g},{rep['n_records']},{rep.get('median_abs_error', float('nan')):.17g},"
            f"{rep.get('mean_abs_error', float('nan')):.17g},{rep.get('mean_kappa_hat', float('nan')):.17g},"
            f"{rep['error_scale']:.17g}"
        )
        print(f"n={n} eps={eps:.3f} median_err={rep.get('median_abs_error')}")
    out = Path(args.out) / "consistency.csv"
    write_csv(out, "n,eps,records,median_abs_error,mean_abs_error,mean_kappa_hat,error_scale",
              rows, provenance(cfg))
    print(f"wrote {out}")
    return 0


def run_fig2_set(set_id: int, seed: int, oracle=None) -> dict:
    """One Fig. 2 parameter set: per-pair kappa over the metric's adjacent
    pairs with the exact geodesic field on the unit 2-sphere."""
    params = FIG2_SETS[set_id]
    oracle = oracle if oracle is not None else make_oracle("sphere", m=2)
    cloud = oracle.sample_uniform(params["n"], seed=seed)
    field = make_field("exact", cloud, oracle=oracle)
    rgg = build_rgg(cloud, params["eps"], field)
    metric = GraphMetric(rgg, delta0=params["delta0"], delta1=params["delta1"])
    kappas = []
    pairs = metric.adjacent_pairs()
    disconnected = 0
    for i, j in pairs:
        try:
            kappas.append(kappa_pair(rgg, metric, i, j, oracle=oracle).kappa)
        except MetricError:
            disconnected += 1
    return {
        "set": set_id,
        "params": params,
        "seed": seed,
        "n_pairs": len(pairs),
        "n_disconnected_transport": disconnected,
        "kappas": kappas,
        "regime_ok": metric.regime_ok,
    }


def cmd_fig2(args, cfg):
    sets = [args.set] if args.set else [1, 2, 3, 4]
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for set_id in sets:
        all_kappas = []
        total_pairs = 0
        total_disc = 0
        for s in range(args.seeds):
            res = run_fig2_set(set_id, seed=args.seed + s)
            all_kappas.extend(res["kappas"])
            total_pairs += res["n_pairs"]
            total_disc += res["n_disconnected_transport"]
            if not res["regime_ok"]:
                print(f"WARNING: fig2 set {set_id} uses the printed (delta0, delta1); "
                      "the scale regime c1 >= 2 + 4 c0 is violated (reproduced as-is)",
                      file=sys.stderr)
        prov = provenance({**cfg, "set": set_id})
        rows = [f"{v:.17g}" for v in all_kappas]
        write_csv(outdir / f"fig2_set{set_id}_kappa.csv", "kappa", rows, prov)
        if all_kappas:
            stats = write_histogram_svg(
                outdir / f"fig2_set{set_id}_hist.svg",
                all_kappas,
                f"edge curvature, set {set_id} (n={FIG2_SETS[set_id]['n']})",
                prov,
                bins=20,
                lo=min(min(all_kappas), 0.0),
                hi=1.0,
            )
            frac = float(np.mean(np.asarray(all_kappas) >= 0.5))
            print(
                f"set {set_id}: {len(all_kappas)} kappas over {total_pairs} adjacent pairs "
                f"({total_disc} transport-disconnected), modal bin {stats['modal_bin']}, "
                f"frac(kappa >= 0.5) = {frac:.3f}"
            )
        else:
            print(f"set {set_id}: no computable pairs")
    return 0


def cmd_report(args, cfg):
    """Aggregate artifacts in --out into report.json with simple pass/fail."""
    outdir = Path(args.out)
    if not outdir.exists():
        raise CliError(f"missing output directory {outdir}")
    summary = {"artifacts": {}, "checks": {}}
    for csv_path in sorted(outdir.glob("*.csv")):
        with open(csv_path) as fh:
            lines = fh.read().splitlines()
        summary["artifacts"][csv_path.name] = {
            "rows": max(0, len(lines) - 2),
            "has_provenance": bool(lines and lines[0].startswith("# provenance:")),
        }
    for name in sorted(outdir.glob("*.json")):
        if name.name == "report.json":
            continue
        summary["artifacts"][name.name] = {"json": True}
    ok = True
    for set_id in (1, 2, 3, 4):
        path = outdir / f"fig2_set{set_id}_kappa.csv"
        if not path.exists():
            continue
        vals = [float(v) for v in path.read_text().splitlines()[2:] if v]
        if not vals:
            summary["checks"][f"fig2_set{set_id}"] = {"pass": False, "reason": "empty"}
            ok = False
            continue
        counts, edges = np.histogram(vals, bins=20, range=(min(min(vals), 0.0), 1.0))
        modal = int(np.argmax(counts))
        modal_bin = (float(edges[modal]), float(edges[modal + 1]))
        frac = float(np.mean(np.asarray(vals) >= 0.5))
        passed = modal_bin[0] >= 0.8 - 1e-12 and frac >= 0.8
        summary["checks"][f"fig2_set{set_id}"] = {
            "pass": passed,
            "modal_bin": modal_bin,
            "frac_ge_half": frac,
        }
        ok = ok and passed
    write_json(outdir / "report.json", summary, provenance(cfg))
    print(f"wrote {outdir / 'report.json'} (pass={ok})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riccicloud",
        description="Ollivier-Ricci curvature from point clouds "
                    "(--config FILE before the subcommand loads key=value defaults)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--manifold", default="sphere", choices=["sphere", "circle", "clifford_torus"])
        p.add_argument("--m", type=int, default=2)
        p.add_argument("--radius", type=float, default=1.0)
        p.add_argument("--n", type=int, default=1000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--eps", type=float, default=0.3)
        p.add_argument("--c0", type=float, default=0.05)
        p.add_argument("--c1", type=float, default=2.2)
        p.add_argument("--field", default="exact", choices=["exact", "euclidean", "sff"])
        p.add_argument("--out", default="out")

    p = sub.add_parser("sample", help="sample a point cloud to CSV")
    common(p)
    p = sub.add_parser("build", help="build the RGG and persist it as JSON")
    common(p)
    p = sub.add_parser("curvature", help="per-pair curvature records to CSV")
    common(p)
    p.add_argument("--pairs", default="theorem-window:50",
                   help="all-edges | theorem-window[:K] | sample:K")
    p = sub.add_parser("global-bound", help="empirical global lower bound to JSON")
    common(p)
    p = sub.add_parser("heat", help="heat-flow contraction trajectory to CSV")
    common(p)
    p = sub.add_parser("consistency-sweep", help="(n, eps) schedule error trends")
    common(p)
    p.add_argument("--schedule", default="1000,4000,16000")
    p.add_argument("--eps-scale", type=float, default=1.2, dest="eps_scale")
    p.add_argument("--k", type=int, default=50)
    p = sub.add_parser("fig2", help="reproduce the curvature histograms")
    common(p)
    p.add_argument("--set", type=int, choices=[1, 2, 3, 4], default=None)
    p.add_argument("--seeds", type=int, default=5)
    p = sub.add_parser("report", help="aggregate artifacts into report.json")
    common(p)
    return parser


COMMANDS = {
    "sample": cmd_sample,
    "build": cmd_build,
    "curvature": cmd_curvature,
    "global-bound": cmd_global_bound,
    "heat": cmd_heat,
    "consistency-sweep": cmd_consistency_sweep,
    "fig2": cmd_fig2,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        # config file values become flags injected right after the subcommand,
        # so flags the user actually typed (which come later) win
        if "--config" in argv:
            pos = argv.index("--config")
            if pos + 1 >= len(argv):
                raise CliError("--config needs a file path")
            file_cfg = load_config_file(argv[pos + 1])
            del argv[pos : pos + 2]
            injected = []
            for key, val in file_cfg.items():
                injected.extend([f"--{key.replace('_', '-')}", val])
            for k, tok in enumerate(argv):
                if not tok.startswith("-"):
                    argv = argv[: k + 1] + injected + argv[k + 1 :]
                    break
            else:
                raise CliError("config file given but no subcommand")
        parser = build_parser()
        args = parser.parse_args(argv)
        cfg = {k: v for k, v in vars(args).items() if k not in ("config", "command")}
        cfg["command"] = args.command
        return COMMANDS[args.command](args, cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
