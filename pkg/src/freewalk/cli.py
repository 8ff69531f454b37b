"""Command-line interface.

Subcommands bind a JSON experiment configuration to the library: ``dist``
(exact or sampled length laws), ``rate`` (empirical rate curves, with the
closed form overlaid for uniform free-group walks), ``mgf`` (brackets for
the limiting scaled log-MGF on a tilt grid), ``legendre`` (the conjugate
curve), ``pattern`` (avoidance verdicts, minimal subsets, semigroup probe),
``extract`` (weakly additive subset extraction plus verification),
``automaton`` (cone-type automaton, connectivity, spheres, DOT), and
``report`` (consistency checks).

Every run writes CSV/JSON artifacts plus a manifest (config hash, seed,
versions); all randomized commands require an explicit ``--seed``.  Reruns
with the same configuration and seed produce byte-identical CSV files; the
timestamp lives only in the manifest.  Curve commands also render PNG
figures next to the delimited output unless ``--no-plot`` is given, and
``--emit-plot-data`` writes gnuplot-ready two-column files.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .automata import (
    FreeProductGeometry,
    build_automaton,
    condition_two_check,
    sphere_sizes,
    strongly_connected_components,
    to_adjacency_dict,
    to_dot,
)
from .config import ExperimentConfig, load_config
from .errors import FreewalkError, MalformedInputError, ResourceLimitError
from .patterns import (
    WeightedSet,
    extract_weakly_additive,
    extraction_weight_floor,
    is_pattern_avoiding,
    minimal_avoiding_subset,
    semigroup_pattern_probe,
    verify_weak_additivity,
)
from .rates import (
    BruteForceMgfProvider,
    ConsistencyParams,
    SrwMgfProvider,
    closed_form_curve,
    closed_form_rate_srw_free,
    consistency_report,
    empirical_rate_curve,
    fenchel_legendre,
    log_mgf_bracket,
)
from .walks import (
    exact_length_dist_bruteforce,
    monte_carlo_length_dist,
    srw_birth_death_dist,
)
from .words import ball_enumerate

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12g}"
    return str(v)


def _write_csv(path: Path, command: str, cfg_hash: str, seed, header: list[str], rows) -> None:
    lines = [f"# command={command} config={cfg_hash} seed={seed}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_plot_data(path: Path, pairs) -> None:
    lines = [f"{_fmt(a)} {_fmt(b)}" for a, b in pairs]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_manifest(outdir: Path, command: str, cfg: ExperimentConfig, seed) -> None:
    manifest = {
        "command": command,
        "config_hash": cfg.config_hash(),
        "seed": seed,
        "versions": {
            "freewalk": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (outdir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8", newline="\n"
    )


def _param(cfg: ExperimentConfig, key: str, default=None, required: bool = False):
    if key in cfg.params:
        return cfg.params[key]
    if required:
        raise MalformedInputError(f"missing required parameter {key!r} in config 'params'")
    return default


def _dist_provider(cfg: ExperimentConfig, n_top: int, cap: int):
    """All length laws up to n_top, routed through the fast recursion when
    the measure is a uniform free-group walk."""
    srw = cfg.measure.as_uniform_srw(cfg.ctx)
    if srw is not None:
        r, lazy = srw
        return srw_birth_death_dist(r, n_top, lazy, all_steps=True)
    return exact_length_dist_bruteforce(
        cfg.measure, cfg.ctx, n_top, 0.0, cap, all_steps=True
    )


# -- subcommand handlers -------------------------------------------------------


def _cmd_dist(cfg: ExperimentConfig, args, outdir: Path) -> None:
    if cfg.measure is None:
        raise MalformedInputError("dist needs a measure in the config")
    n = int(_param(cfg, "n", required=True))
    mode = _param(cfg, "mode", "exact")
    cfg_hash = cfg.config_hash()
    if mode == "exact":
        prune = float(_param(cfg, "prune_threshold", 0.0))
        dist = exact_length_dist_bruteforce(cfg.measure, cfg.ctx, n, prune, args.cap)
        rows = [(k, dist.mass[k], dist.pruned_mass) for k in sorted(dist.mass)]
        _write_csv(
            outdir / "dist.csv", "dist", cfg_hash, args.seed,
            ["length", "probability", "pruned_mass_bound"], rows,
        )
        if args.emit_plot_data:
            _write_plot_data(outdir / "dist.dat", [(k, dist.mass[k]) for k in sorted(dist.mass)])
        if not args.no_plot:
            from .plotting import plot_distribution
            plot_distribution(dist, str(outdir / "dist.png"), f"exact law at n={n}")
    elif mode == "srw":
        srw = cfg.measure.as_uniform_srw(cfg.ctx)
        if srw is None:
            raise MalformedInputError("mode 'srw' needs a uniform free-group walk")
        dist = srw_birth_death_dist(srw[0], n, srw[1])
        rows = [(k, dist.mass[k], 0.0) for k in sorted(dist.mass)]
        _write_csv(
            outdir / "dist.csv", "dist", cfg_hash, args.seed,
            ["length", "probability", "pruned_mass_bound"], rows,
        )
        if args.emit_plot_data:
            _write_plot_data(outdir / "dist.dat", [(k, dist.mass[k]) for k in sorted(dist.mass)])
        if not args.no_plot:
            from .plotting import plot_distribution
            plot_distribution(dist, str(outdir / "dist.png"), f"length recursion at n={n}")
    elif mode == "mc":
        if args.seed is None:
            raise MalformedInputError("Monte Carlo mode requires --seed")
        n_samples = int(_param(cfg, "N", required=True))
        stats = monte_carlo_length_dist(
            cfg.measure, cfg.ctx, n, n_samples, args.seed, args.workers
        )
        rows = [(k, stats.counts[k]) for k in sorted(stats.counts)]
        _write_csv(
            outdir / "counts.csv", "dist", cfg_hash, args.seed,
            ["length", "count"], rows,
        )
        if args.emit_plot_data:
            _write_plot_data(outdir / "counts.dat", rows)
        if not args.no_plot:
            from .plotting import plot_counts
            plot_counts(stats, str(outdir / "counts.png"), f"{n_samples} samples at n={n}")
    else:
        raise MalformedInputError(f"unknown dist mode {mode!r}")


def _cmd_rate(cfg: ExperimentConfig, args, outdir: Path) -> None:
    if cfg.measure is None:
        raise MalformedInputError("rate needs a measure in the config")
    schedule = _param(cfg, "n_schedule")
    if schedule is None:
        schedule = [int(_param(cfg, "n", required=True))]
    schedule = [int(v) for v in schedule]
    eps = float(_param(cfg, "eps", 0.02))
    xs = [float(v) for v in _param(cfg, "x_grid", [i / 20 for i in range(21)])]
    dists = _dist_provider(cfg, max(schedule), args.cap)
    curves = empirical_rate_curve(lambda n: dists[n], schedule, xs, eps)
    rows = []
    for n in schedule:
        c = curves[n]
        for x, v, prov in zip(c.xs, c.values, c.provenance):
            rows.append((x, v, prov, 0.0))
    named = {f"empirical n={n}": curves[n] for n in schedule}
    srw = cfg.measure.as_uniform_srw(cfg.ctx)
    if srw is not None:
        closed = closed_form_curve(srw[0], xs)
        named["closed-form"] = closed
        for x, v in zip(closed.xs, closed.values):
            rows.append((x, v, "closed-form", 0.0))
    _write_csv(
        outdir / "rate.csv", "rate", cfg.config_hash(), args.seed,
        ["x", "I", "provenance", "error_bar"], rows,
    )
    if args.emit_plot_data:
        top = curves[max(schedule)]
        _write_plot_data(outdir / "rate.dat", list(zip(top.xs, top.values)))
    if not args.no_plot:
        from .plotting import plot_rate_curves
        plot_rate_curves(named, str(outdir / "rate.png"), "rate curves")


def _make_mgf_provider(cfg: ExperimentConfig, n_max: int, cap: int):
    srw = cfg.measure.as_uniform_srw(cfg.ctx)
    if srw is not None:
        return SrwMgfProvider(srw[0], n_max, srw[1])
    return BruteForceMgfProvider(cfg.measure, cfg.ctx, n_max, cap=cap)


def _cmd_mgf(cfg: ExperimentConfig, args, outdir: Path) -> None:
    if cfg.measure is None:
        raise MalformedInputError("mgf needs a measure in the config")
    n_max = int(_param(cfg, "n_max", 1000))
    zs = [float(v) for v in _param(cfg, "z_grid", required=True)]
    provider = _make_mgf_provider(cfg, n_max, args.cap)
    brackets = [log_mgf_bracket(provider, z) for z in zs]
    rows = [(b.z, b.lower, b.upper, b.n_used) for b in brackets]
    _write_csv(
        outdir / "mgf.csv", "mgf", cfg.config_hash(), args.seed,
        ["z", "lower", "upper", "n_used"], rows,
    )
    if args.emit_plot_data:
        _write_plot_data(outdir / "mgf.dat", [(b.z, b.midpoint) for b in brackets])
    if not args.no_plot:
        from .plotting import plot_mgf
        plot_mgf(
            [b.z for b in brackets],
            [b.lower for b in brackets],
            [b.upper for b in brackets],
            str(outdir / "mgf.png"),
            f"scaled log-MGF brackets, n_max={n_max}",
        )


def _cmd_legendre(cfg: ExperimentConfig, args, outdir: Path) -> None:
    if cfg.measure is None:
        raise MalformedInputError("legendre needs a measure in the config")
    n_max = int(_param(cfg, "n_max", 1000))
    xs = [float(v) for v in _param(cfg, "x_grid", required=True)]
    z_min = float(_param(cfg, "z_min", -2.0))
    z_max = float(_param(cfg, "z_max", 2.0))
    z_points = int(_param(cfg, "z_points", 25))
    refinement = int(_param(cfg, "refinement", 20))
    provider = _make_mgf_provider(cfg, n_max, args.cap)
    z_grid = list(np.linspace(z_min, z_max, z_points))
    bracket_fn = lambda z: log_mgf_bracket(provider, z)
    pts = [fenchel_legendre(bracket_fn, x, z_grid, refinement) for x in xs]
    rows = [(p.x, p.value, "legendre", p.error_bar) for p in pts]
    srw = cfg.measure.as_uniform_srw(cfg.ctx)
    if srw is not None:
        for x in xs:
            rows.append((x, closed_form_rate_srw_free(srw[0], x), "closed-form", 0.0))
    _write_csv(
        outdir / "legendre.csv", "legendre", cfg.config_hash(), args.seed,
        ["x", "I", "provenance", "error_bar"], rows,
    )
    if args.emit_plot_data:
        _write_plot_data(outdir / "legendre.dat", [(p.x, p.value) for p in pts])
    if not args.no_plot:
        from .plotting import plot_rate_curves
        from .rates import RateCurve
        named = {
            "legendre": RateCurve(
                tuple(xs), tuple(p.value for p in pts), tuple("legendre" for _ in pts)
            )
        }
        if srw is not None:
            named["closed-form"] = closed_form_curve(srw[0], xs)
        plot_rate_curves(named, str(outdir / "legendre.png"), "conjugate rate curve")


def _cmd_pattern(cfg: ExperimentConfig, args, outdir: Path) -> None:
    if cfg.ctx is None:
        raise MalformedInputError("pattern needs a free-product group")
    d_size = int(_param(cfg, "D", required=True))
    report: dict = {"D": d_size}
    words_text = _param(cfg, "set")
    if words_text is not None:
        tset = [cfg.ctx.parse_word(t) for t in words_text]
        verdict = is_pattern_avoiding(tset, d_size, cfg.ctx)
        report["verdict"] = {
            "avoiding": verdict.avoiding,
            "defeating_pattern": (
                None if verdict.defeating_pattern is None
                else cfg.ctx.format_word(verdict.defeating_pattern)
            ),
            "vacuous": verdict.vacuous,
        }
        minimal = minimal_avoiding_subset(tset, d_size, cfg.ctx)
        report["minimal_subset"] = (
            None if minimal.subset is None
            else [cfg.ctx.format_word(w) for w in minimal.subset]
        )
    if _param(cfg, "probe", False):
        if cfg.measure is None:
            raise MalformedInputError("the probe needs a measure")
        probe = semigroup_pattern_probe(
            cfg.measure, d_size, int(_param(cfg, "max_products", 3)), cfg.ctx
        )
        report["probe"] = {
            "found": (
                None if probe.found is None
                else [cfg.ctx.format_word(w) for w in probe.found]
            ),
            "step_counts": {
                cfg.ctx.format_word(w): t for w, t in probe.step_counts.items()
            },
            "frontier_size": probe.frontier_size,
            "depth_reached": probe.depth_reached,
        }
    (outdir / "pattern.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8", newline="\n"
    )


def _cmd_extract(cfg: ExperimentConfig, args, outdir: Path) -> None:
    if cfg.ctx is None:
        raise MalformedInputError("extract needs a free-product group")
    d_size = int(_param(cfg, "D", required=True))
    tset = [cfg.ctx.parse_word(t) for t in _param(cfg, "set_t", required=True)]
    f_spec = _param(cfg, "set_f")
    if f_spec is not None:
        entries = tuple(
            (cfg.ctx.parse_word(w), float(p)) for w, p in f_spec
        )
    else:
        random_spec = _param(cfg, "random_ball", required=True)
        if args.seed is None:
            raise MalformedInputError("random extraction input requires --seed")
        radius = float(random_spec["radius"])
        count = int(random_spec["count"])
        ball = [w for w in ball_enumerate(cfg.ctx, radius, cap=args.cap) if not w.is_identity]
        rng = np.random.default_rng(args.seed)
        idx = rng.choice(len(ball), size=min(count, len(ball)), replace=False)
        weights = rng.random(len(idx))
        entries = tuple((ball[i], float(w)) for i, w in zip(idx, weights))
    fset = WeightedSet(entries)
    res = extract_weakly_additive(fset, tset, d_size, cfg.ctx)
    seed = args.seed if args.seed is not None else 0
    verification = verify_weak_additivity(
        res, cfg.ctx,
        k_max=int(_param(cfg, "k_max", 3)),
        samples=int(_param(cfg, "samples", 1000)),
        seed=seed,
    )
    report = {
        "subset": [[cfg.ctx.format_word(w), p] for w, p in res.subset.entries],
        "shift": None if res.shift is None else cfg.ctx.format_word(res.shift),
        "order": res.order,
        "weight_ratio": res.weight_ratio,
        "weight_floor": extraction_weight_floor(fset, d_size, cfg.ctx),
        "level": res.level,
        "case": res.case,
        "verification": {
            "worst_defect_per_factor": verification.worst_defect_per_factor,
            "per_k": verification.per_k,
            "checked": verification.checked,
            "within_order": verification.within_order,
            "within_global": verification.within_global,
        },
    }
    (outdir / "extract.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8", newline="\n"
    )


def _cmd_automaton(cfg: ExperimentConfig, args, outdir: Path) -> None:
    if cfg.lattice is not None:
        geom = cfg.lattice
    elif cfg.ctx is not None:
        geom = FreeProductGeometry(cfg.ctx, ball_cap=args.cap)
    else:
        raise MalformedInputError("automaton needs a group")
    probe_radius = int(_param(cfg, "probe_radius", 3))
    build_radius = int(_param(cfg, "build_radius", 6))
    spheres_n = int(_param(cfg, "spheres_n", min(8, build_radius)))
    auto = build_automaton(geom, probe_radius, build_radius)
    scc = strongly_connected_components(auto)
    cond2 = condition_two_check(auto, radius=min(4, build_radius))
    counts = sphere_sizes(auto, spheres_n, geom=geom)
    payload = to_adjacency_dict(auto, geom)
    payload["scc"] = {
        "components": [list(c) for c in scc.components],
        "whole_strongly_connected": scc.whole_strongly_connected,
        "non_initial_strongly_connected": scc.non_initial_strongly_connected,
    }
    payload["condition_two"] = {
        "holds": cond2.holds,
        "checked_words": cond2.checked_words,
        "failing_witnesses": [list(w) for w in cond2.failing_witnesses],
    }
    (outdir / "automaton.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8", newline="\n"
    )
    (outdir / "automaton.dot").write_text(to_dot(auto, geom) + "\n", encoding="utf-8", newline="\n")
    rows = []
    for n_val in range(spheres_n + 1):
        rows.append(
            (
                n_val,
                counts.word_counts[n_val],
                counts.element_counts[n_val] if counts.element_counts else "",
            )
        )
    _write_csv(
        outdir / "spheres.csv", "automaton", cfg.config_hash(), args.seed,
        ["n", "geodesic_words", "elements"], rows,
    )


def _cmd_report(cfg: ExperimentConfig, args, outdir: Path) -> None:
    if cfg.measure is None:
        raise MalformedInputError("report needs a measure in the config")
    params = ConsistencyParams(
        n_schedule=tuple(int(v) for v in _param(cfg, "n_schedule", [100, 400, 1000])),
        eps=float(_param(cfg, "eps", 0.02)),
        x_grid=tuple(float(v) for v in _param(cfg, "x_grid", [i / 20 for i in range(21)])),
        tau=float(_param(cfg, "tau", 0.5)),
        big_m=float(_param(cfg, "M", 2.0)),
        word_cap=args.cap,
    )
    report = consistency_report(cfg.measure, cfg.ctx, params)
    (outdir / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8", newline="\n"
    )
    if not args.no_plot:
        from .plotting import plot_rate_curves
        dists = _dist_provider(cfg, max(params.n_schedule), args.cap)
        curves = empirical_rate_curve(
            lambda n: dists[n], list(params.n_schedule), list(params.x_grid), params.eps
        )
        named = {f"empirical n={n}": curves[n] for n in params.n_schedule}
        srw = cfg.measure.as_uniform_srw(cfg.ctx)
        if srw is not None:
            named["closed-form"] = closed_form_curve(srw[0], list(params.x_grid))
        plot_rate_curves(named, str(outdir / "report.png"), "consistency overview")


_HANDLERS = {
    "dist": _cmd_dist,
    "rate": _cmd_rate,
    "mgf": _cmd_mgf,
    "legendre": _cmd_legendre,
    "pattern": _cmd_pattern,
    "extract": _cmd_extract,
    "automaton": _cmd_automaton,
    "report": _cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freewalk",
        description="Word-length statistics of random walks on free products",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the JSON experiment configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed (u64)")
        p.add_argument("--workers", type=int, default=1, help="Monte Carlo workers")
        p.add_argument("--cap", type=int, default=5_000_000, help="entry cap for enumerations")
        p.add_argument("--emit-plot-data", action="store_true",
                       help="also write gnuplot-ready two-column .dat files")
        p.add_argument("--no-plot", action="store_true", help="skip PNG rendering")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _HANDLERS[args.command](cfg, args, outdir)
        _write_manifest(outdir, args.command, cfg, args.seed)
    except MalformedInputError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as err:
        print(f"resource limit: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    except FreewalkError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
