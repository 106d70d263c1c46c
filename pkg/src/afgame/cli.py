"""Command-line driver.

Subcommands: solve-riccati, baseline, af-optimize, fisher, detect,
experiment {fig2|fig3|fig4}, validate.  Exit codes: 0 success,
1 validation failure, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .afcontrol import optimize
from .controls import CoefficientEngine, pair_gains
from .detect import detection_report, write_report_csv
from .experiments import (ConfigError, ExperimentConfig, run_fig2, run_fig3,
                          run_fig4, run_validate)
from .fisher import (SingularBlock, asymptotic_variance, fisher_from_moments,
                     fisher_mc, moment_path)
from .riccati import NonFinite, solve_riccati
from .simulate import euler_maruyama, load_batch, save_batch


def _progress(msg: str):
    print(msg, file=sys.stderr, flush=True)


def _load_config(args) -> ExperimentConfig:
    cfg = (ExperimentConfig.from_file(args.config) if args.config
           else ExperimentConfig.from_dict(None))
    if args.seed is not None:
        cfg.raw["sim"]["seed"] = int(args.seed)
    if args.steps is not None:
        cfg.raw["sim"]["n_steps"] = int(args.steps)
    if args.paths is not None:
        cfg.raw["sim"]["n_paths"] = int(args.paths)
    return cfg


def _write_rows(path: Path, header, rows, cfg):
    from .experiments import _write_csv
    _write_csv(path, header, rows, cfg)
    print(path)


def cmd_solve_riccati(args) -> int:
    cfg = _load_config(args)
    params = cfg.params()
    path = solve_riccati(params, params.mA, params.mB, cfg.grid())
    rows = [[t, *path.thetaA[k].ravel(), *path.thetaB[k].ravel()]
            for k, t in enumerate(cfg.grid().nodes)]
    _write_rows(Path(args.out) / "riccati.csv",
                ["t", "thetaA_11", "thetaA_12", "thetaA_21", "thetaA_22",
                 "thetaB_11", "thetaB_12", "thetaB_21", "thetaB_22"], rows, cfg)
    return 0


def _engine(cfg: ExperimentConfig) -> CoefficientEngine:
    return CoefficientEngine(cfg.params(), cfg.prior("a"), cfg.prior("b"), cfg.grid())


def cmd_baseline(args) -> int:
    cfg = _load_config(args)
    eng = _engine(cfg)
    avg = eng.averaged()
    grid = cfg.grid()
    rows = [[t,
             *avg.thetaAbar[k].ravel(), *avg.thetaBtilde[k].ravel(),
             *avg.thetaBbar[k].ravel(),
             *eng.row("A_baseline").nodes[k], *eng.row("B_tilde").nodes[k]]
            for k, t in enumerate(grid.nodes)]
    hdr = (["t"]
           + [f"thetaAbar_{i}{j}" for i in (1, 2) for j in (1, 2)]
           + [f"thetaBtilde_{i}{j}" for i in (1, 2) for j in (1, 2)]
           + [f"thetaBbar_{i}{j}" for i in (1, 2) for j in (1, 2)]
           + ["gainA_1", "gainA_2", "gainB_1", "gainB_2"])
    _write_rows(Path(args.out) / "baseline.csv", hdr, rows, cfg)
    return 0


def cmd_af_optimize(args) -> int:
    cfg = _load_config(args)
    eng = _engine(cfg)
    sol = optimize(eng, cfg.afconfig())
    rows = [[i, z[0], z[1], J, g] for i, (z, J, g) in enumerate(sol.history)]
    _write_rows(Path(args.out) / "af_history.csv",
                ["iter", "z1", "z2", "J", "grad_norm"], rows, cfg)
    grid = cfg.grid()
    rows = [[t, *sol.afGains.nodes[k], *sol.thetaAF[k].ravel(), *sol.gPath[k]]
            for k, t in enumerate(grid.nodes)]
    _write_rows(Path(args.out) / "af_gains.csv",
                ["t", "v_coef_1", "v_coef_2", "thetaAF_11", "thetaAF_12",
                 "thetaAF_21", "thetaAF_22", "g12", "g22"], rows, cfg)
    print(f"z*=({sol.zStar[0]:.6g},{sol.zStar[1]:.6g}) iterations={len(sol.history)} "
          f"converged={sol.converged}", file=sys.stderr)
    return 0


def cmd_fisher(args) -> int:
    cfg = _load_config(args)
    eng = _engine(cfg)
    params, grid = cfg.params(), cfg.grid()
    gains = pair_gains(eng.row("A_baseline"), eng.row("B_tilde"))
    rows = []
    for kind, rowB in (("true", "B_tilde"), ("proxy", "B_bar")):
        g = pair_gains(eng.row("A_baseline"), eng.row(rowB))
        mom = moment_path(g, params, params.x0, grid)
        F_mom = fisher_from_moments(eng.sensitivities(kind), mom, params, grid)
        batch = euler_maruyama(g, params, cfg.sim(f"fisher:{kind}"))
        F_mc = fisher_mc(eng.sensitivities(kind), batch, params, grid)
        rows.append([kind, *F_mom.entries.ravel(), asymptotic_variance(F_mom),
                     *F_mc.entries.ravel(), asymptotic_variance(F_mc)])
    hdr = (["kind"] + [f"mom_{i}{j}" for i in range(3) for j in range(3)]
           + ["var_mom"] + [f"mc_{i}{j}" for i in range(3) for j in range(3)]
           + ["var_mc"])
    _write_rows(Path(args.out) / "fisher.csv", hdr, rows, cfg)
    return 0


def cmd_detect(args) -> int:
    cfg = _load_config(args)
    eng = _engine(cfg)
    params, grid = cfg.params(), cfg.grid()
    n = int(cfg.raw["detect_reps"])
    base = eng.row("A_baseline")
    if args.batch:
        batch = load_batch(args.batch)
        if batch.states.shape[1] != grid.N + 1:
            print(f"configuration error: batch has {batch.states.shape[1] - 1} "
                  f"steps, grid has {grid.N}", file=sys.stderr)
            return 2
        actual = None
    else:
        batch = euler_maruyama(pair_gains(base, eng.row("B_tilde")), params,
                               cfg.sim("detect:baseline", n))
        actual = base
    if args.dump_batch:
        save_batch(Path(args.out) / "detect_batch.bin", batch)
    rep = detection_report(batch, eng.row("A_predicted"), grid, actual)
    out = Path(args.out) / "detect.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report_csv(out, rep, f"config_sha256={cfg.sha256} seed={cfg.raw['sim']['seed']}")
    print(out)
    print(f"DAF={rep.DAF:.6g} nReps={rep.nReps}", file=sys.stderr)
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    runner = {"fig2": run_fig2, "fig3": run_fig3, "fig4": run_fig4}[args.figure]
    for path in runner(cfg, args.out, progress=_progress):
        print(path)
    return 0


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    n = args.paths if args.paths else 5_000
    results = run_validate(cfg, n_paths=int(n), progress=_progress)
    ok = True
    for res in results:
        print(res.line())
        ok = ok and res.passed
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afgame",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="base RNG seed")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--paths", type=int, default=None, help="Monte Carlo paths")
        p.add_argument("--steps", type=int, default=None, help="time steps")

    for name, fn in (("solve-riccati", cmd_solve_riccati), ("baseline", cmd_baseline),
                     ("af-optimize", cmd_af_optimize), ("fisher", cmd_fisher)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(fn=fn)
    p = sub.add_parser("detect")
    common(p)
    p.add_argument("--dump-batch", action="store_true",
                   help="also write the binary trajectory dump")
    p.add_argument("--batch", type=Path, default=None,
                   help="analyze an existing trajectory dump instead of simulating")
    p.set_defaults(fn=cmd_detect)
    p = sub.add_parser("experiment")
    p.add_argument("figure", choices=["fig2", "fig3", "fig4"])
    common(p)
    p.set_defaults(fn=cmd_experiment)
    p = sub.add_parser("validate")
    common(p)
    p.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NonFinite, SingularBlock) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
