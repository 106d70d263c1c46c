"""Experiment orchestration: configuration, the three study sweeps, and the
self-validation suite.

Every experiment resolves a single JSON-serializable configuration whose
defaults reproduce the reference setup (horizon 1, unit cost weights,
noise 0.1, N=100 steps, 50,000 Monte Carlo samples, z0=0, eps=1e-4,
alpha=0.05).  CSVs carry a `# config_sha256=... seed=...` comment line
and 17-significant-digit numbers, so identical configurations reproduce
byte-identical outputs.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .afcontrol import AFConfig, AFSolution, optimize
from .controls import CoefficientEngine, GainRow, pair_gains
from .detect import detection_report
from .fisher import (SingularBlock, asymptotic_variance, asymptotic_variance_se,
                     fisher_from_moments, fisher_mc, moment_path, variational_value)
from .model import (GameParams, QuadratureRule, TruncGaussPrior, expect_over_prior,
                    score_mu, score_rho)
from .riccati import (TimeGrid, horizon_bound, af_horizon_bound,
                      sample_theta_bound, solve_batch, solve_riccati, solve_sensitivity)
from .simulate import SimConfig, euler_maruyama

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "run_fig2",
    "run_fig3",
    "run_fig4",
    "run_validate",
]


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


_DEFAULTS: dict = {
    "game": {"q_a": 1.0, "q_b": 1.0, "r_a": 1.0, "r_b": 1.0,
             "sigma_a": 0.1, "sigma_b": 0.1, "m_a": 1.0, "m_b": 1.0,
             "horizon": 1.0, "x0": [0.0, 0.0]},
    "prior_a": {"mu": 1.0, "rho": 0.1, "lo": -5.0, "hi": 5.0},
    "prior_b": {"mu": 1.0, "rho": 0.1, "lo": -5.0, "hi": 5.0},
    "af": {"q_af": 5.0, "r_af": 1.0, "lam_af": 2.5, "z0": [0.0, 0.0],
           "alpha": 0.05, "eps": 1e-4, "max_iter": 200, "info_weight": 0.64},
    "sim": {"n_steps": 100, "n_paths": 50_000, "seed": 20240501},
    "sweeps": {"mu_b": [1.0, 1.2, 1.5, 1.8, 2.0, 2.2],
               "mu_a": [1.0, 1.25, 1.5, 1.75, 2.0],
               "mu_b_fig3": [1.0, 1.25, 1.5, 1.75, 2.0, 2.25],
               "lambda_af": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
               "rho": [1e-7, 0.1, 0.5, 1.0]},
    "detect_reps": 10_000,
    "variance_mode": "mc",
    "experiment": "custom",
    "out_dir": "out",
}


def _merge(defaults, override, path="config"):
    if override is None:
        return json.loads(json.dumps(defaults))
    if not isinstance(override, dict):
        raise ConfigError(f"{path} must be an object")
    out = json.loads(json.dumps(defaults))
    for key, val in override.items():
        if key not in defaults:
            raise ConfigError(f"unknown key {path}.{key}")
        if isinstance(defaults[key], dict):
            out[key] = _merge(defaults[key], val, f"{path}.{key}")
        else:
            out[key] = val
    return out


@dataclass
class ExperimentConfig:
    """Resolved experiment configuration; `raw` is the canonical dict."""

    raw: dict

    @classmethod
    def from_dict(cls, data: dict | None) -> "ExperimentConfig":
        return cls(_merge(_DEFAULTS, data))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    # -- derived objects --------------------------------------------------
    def params(self, **overrides) -> GameParams:
        g = dict(self.raw["game"])
        g.update(overrides)
        try:
            return GameParams(qA=g["q_a"], qB=g["q_b"], rA=g["r_a"], rB=g["r_b"],
                              sigmaA=g["sigma_a"], sigmaB=g["sigma_b"],
                              mA=g["m_a"], mB=g["m_b"], T=g["horizon"],
                              x0=tuple(g["x0"]))
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"bad game parameters: {exc}") from exc

    def prior(self, side: str, **overrides) -> TruncGaussPrior:
        d = dict(self.raw[f"prior_{side}"])
        d.update(overrides)
        try:
            return TruncGaussPrior(**d)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad prior_{side}: {exc}") from exc

    def afconfig(self, **overrides) -> AFConfig:
        d = dict(self.raw["af"])
        d.update(overrides)
        try:
            return AFConfig(qAF=d["q_af"], rAF=d["r_af"], lamAF=d["lam_af"],
                            z0=tuple(d["z0"]), alpha=d["alpha"], eps=d["eps"],
                            maxIter=d["max_iter"], info_weight=d["info_weight"])
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"bad af config: {exc}") from exc

    def grid(self) -> TimeGrid:
        return TimeGrid(self.raw["game"]["horizon"], int(self.raw["sim"]["n_steps"]))

    def sim(self, tag: str, n_paths: int | None = None) -> SimConfig:
        s = self.raw["sim"]
        return SimConfig(nSteps=int(s["n_steps"]),
                         nPaths=int(n_paths if n_paths is not None else s["n_paths"]),
                         seed=self.seed_for(tag), x0=tuple(self.raw["game"]["x0"]))

    def seed_for(self, tag: str) -> int:
        base = int(self.raw["sim"]["seed"])
        return (base * 1_000_003 + zlib.crc32(tag.encode())) % 2**63

    @property
    def sha256(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _write_csv(path: Path, header: list[str], rows: list[list], cfg: ExperimentConfig):
    buf = io.StringIO()
    buf.write(f"# config_sha256={cfg.sha256} seed={cfg.raw['sim']['seed']}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else format(float(v), ".17g")
                         for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def _variance_mc(engine: CoefficientEngine, kind: str, rowA: GainRow, rowB: GainRow,
                 cfg: ExperimentConfig, tag: str, n_paths: int):
    """(variance, se, ridged) for one sensitivity kind under one pairing."""
    params, grid = engine.params, engine.grid
    gains = pair_gains(rowA, rowB)
    sens = engine.sensitivities(kind)
    if cfg.raw["variance_mode"] == "moments":
        mom = moment_path(gains, params, params.x0, grid)
        F = fisher_from_moments(sens, mom, params, grid)
    else:
        batch = euler_maruyama(gains, params, cfg.sim(tag, n_paths))
        F = fisher_mc(sens, batch, params, grid)
    try:
        var = asymptotic_variance(F)
        ridged = 0
    except SingularBlock:
        ridge = 1e-10 * np.trace(F.entries[1:, 1:]) / 2.0
        var = asymptotic_variance(F, cond_limit=np.inf, ridge=ridge)
        ridged = 1
    if F.entry_cov is not None:
        try:
            se = asymptotic_variance_se(F, cond_limit=np.inf,
                                        ridge=None if not ridged else ridge)
        except Exception:
            se = float("nan")
    else:
        se = 0.0
    return var, se, ridged


def _af_rows(engine: CoefficientEngine, afcfg: AFConfig) -> tuple[AFSolution, GainRow]:
    sol = optimize(engine, afcfg)
    return sol, sol.afGains


def run_fig2(cfg: ExperimentConfig, out_dir, n_paths: int | None = None,
             progress=None) -> list[Path]:
    """Accuracy-of-prior study: variance and detectability along a mu_B sweep.

    Writes fig2_variance.csv (mu_b, var_true_af, var_proxy_af,
    var_true_base + errors), fig2_detect.csv (mu_b, daf_af, daf_baseline)
    and a sample-trajectory dump for the well-specified point.
    """
    out_dir = Path(out_dir)
    params = cfg.params()
    grid = cfg.grid()
    priorA = cfg.prior("a", mu=params.mA)
    afcfg = cfg.afconfig()
    n_var = n_paths if n_paths is not None else cfg.raw["sim"]["n_paths"]
    n_det = int(cfg.raw["detect_reps"])
    var_rows, det_rows = [], []
    traj_rows = None
    for muB in cfg.raw["sweeps"]["mu_b"]:
        if progress:
            progress(f"fig2: mu_b={muB}")
        engine = CoefficientEngine(params, priorA, cfg.prior("b", mu=muB), grid)
        sol, af_row = _af_rows(engine, afcfg)
        base_row = engine.row("A_baseline")
        tag = f"fig2:mu_b={muB!r}"
        vt_af, se_t, r1 = _variance_mc(engine, "true", af_row, engine.row("B_tilde"),
                                       cfg, tag + ":true_af", n_var)
        vp_af, se_p, r2 = _variance_mc(engine, "proxy", af_row, engine.row("B_bar"),
                                       cfg, tag + ":proxy_af", n_var)
        vt_b, se_b, r3 = _variance_mc(engine, "true", base_row, engine.row("B_tilde"),
                                      cfg, tag + ":true_base", n_var)
        var_rows.append([muB, vt_af, vp_af, vt_b, se_t, se_p, se_b, max(r1, r2, r3)])
        # detection under true-world dynamics
        pred = engine.row("A_predicted")
        rep_af = detection_report(
            euler_maruyama(pair_gains(af_row, engine.row("B_tilde")), params,
                           cfg.sim(tag + ":det_af", n_det)), pred, grid, af_row)
        rep_b = detection_report(
            euler_maruyama(pair_gains(base_row, engine.row("B_tilde")), params,
                           cfg.sim(tag + ":det_base", n_det)), pred, grid, base_row)
        det_rows.append([muB, rep_af.DAF, rep_b.DAF])
        if traj_rows is None:
            traj_rows = _sample_trajectories(engine, af_row, base_row, params, grid,
                                             cfg, tag)
    paths = [out_dir / "fig2_variance.csv", out_dir / "fig2_detect.csv",
             out_dir / "fig2_trajectories.csv"]
    _write_csv(paths[0], ["mu_b", "var_true_af", "var_proxy_af", "var_true_base",
                          "se_true_af", "se_proxy_af", "se_true_base", "ridged"],
               var_rows, cfg)
    _write_csv(paths[1], ["mu_b", "daf_af", "daf_baseline"], det_rows, cfg)
    _write_csv(paths[2], ["t", "path", "x_a_af", "x_b_af", "v_af",
                          "x_a_base", "x_b_base", "u_base"], traj_rows, cfg)
    return paths


def _sample_trajectories(engine, af_row, base_row, params, grid, cfg, tag,
                         n_show: int = 2):
    sim = cfg.sim(tag + ":traj", n_show)
    batch_af = euler_maruyama(pair_gains(af_row, engine.row("B_tilde")), params, sim)
    batch_b = euler_maruyama(pair_gains(base_row, engine.row("B_tilde")), params, sim)
    v = np.einsum("tk,ptk->pt", af_row.nodes, batch_af.states)
    u = np.einsum("tk,ptk->pt", base_row.nodes, batch_b.states)
    rows = []
    for p in range(n_show):
        for k, t in enumerate(grid.nodes):
            rows.append([t, p, batch_af.states[p, k, 0], batch_af.states[p, k, 1],
                         v[p, k], batch_b.states[p, k, 0], batch_b.states[p, k, 1],
                         u[p, k]])
    return rows


def run_fig3(cfg: ExperimentConfig, out_dir, n_paths: int | None = None,
             progress=None) -> list[Path]:
    """Mean-misspecification study over the (mu_a, mu_b) cross product."""
    out_dir = Path(out_dir)
    params = cfg.params()
    grid = cfg.grid()
    afcfg = cfg.afconfig()
    n_var = n_paths if n_paths is not None else cfg.raw["sim"]["n_paths"]
    rows = []
    for muA in cfg.raw["sweeps"]["mu_a"]:
        priorA = cfg.prior("a", mu=muA)
        for muB in cfg.raw["sweeps"]["mu_b_fig3"]:
            if progress:
                progress(f"fig3: mu_a={muA} mu_b={muB}")
            engine = CoefficientEngine(params, priorA, cfg.prior("b", mu=muB), grid)
            sol, af_row = _af_rows(engine, afcfg)
            tag = f"fig3:mu_a={muA!r}:mu_b={muB!r}"
            vt_af, se_af, r1 = _variance_mc(engine, "true", af_row,
                                            engine.row("B_tilde"), cfg,
                                            tag + ":true_af", n_var)
            vt_b, se_b, r2 = _variance_mc(engine, "true", engine.row("A_baseline"),
                                          engine.row("B_tilde"), cfg,
                                          tag + ":true_base", n_var)
            rows.append([muA, muB, vt_af, vt_b, se_af, se_b, max(r1, r2)])
    path = out_dir / "fig3_variance.csv"
    _write_csv(path, ["mu_a", "mu_b", "var_true_af", "var_true_baseline",
                      "se_true_af", "se_true_baseline", "ridged"], rows, cfg)
    return [path]


def run_fig4(cfg: ExperimentConfig, out_dir, n_paths: int | None = None,
             progress=None) -> list[Path]:
    """Information-weight study: variances versus lambda for each prior scale."""
    out_dir = Path(out_dir)
    params = cfg.params()
    grid = cfg.grid()
    n_var = n_paths if n_paths is not None else cfg.raw["sim"]["n_paths"]
    rows = []
    for rho in cfg.raw["sweeps"]["rho"]:
        priorA = cfg.prior("a", rho=rho)
        priorB = cfg.prior("b", rho=rho)
        engine = CoefficientEngine(params, priorA, priorB, grid)
        base_row = engine.row("A_baseline")
        for lam in cfg.raw["sweeps"]["lambda_af"]:
            if progress:
                progress(f"fig4: rho={rho} lambda={lam}")
            afcfg = cfg.afconfig(q_af=10.0, lam_af=lam)
            sol, af_row = _af_rows(engine, afcfg)
            tag = f"fig4:rho={rho!r}:lam={lam!r}"
            vt_af, se_t, r1 = _variance_mc(engine, "true", af_row, engine.row("B_tilde"),
                                           cfg, tag + ":true_af", n_var)
            vt_b, _, r2 = _variance_mc(engine, "true", base_row, engine.row("B_tilde"),
                                       cfg, tag + ":true_base", n_var)
            vp_af, se_p, r3 = _variance_mc(engine, "proxy", af_row, engine.row("B_bar"),
                                           cfg, tag + ":proxy_af", n_var)
            vp_b, _, r4 = _variance_mc(engine, "proxy", base_row, engine.row("B_bar"),
                                       cfg, tag + ":proxy_base", n_var)
            rows.append([lam, rho, vt_af, vt_b, vp_af, vp_b, se_t, se_p,
                         max(r1, r2, r3, r4)])
    path = out_dir / "fig4_variance.csv"
    _write_csv(path, ["lambda", "rho", "var_true_af", "var_true_base",
                      "var_proxy_af", "var_proxy_base", "se_true_af",
                      "se_proxy_af", "ridged"], rows, cfg)
    return [path]


# ---------------------------------------------------------------------------
# validation suite
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.note})" if self.note else ""
        return (f"{status} {self.name}: measured={self.measured:.3g} "
                f"tol={self.tolerance:.3g}{extra}")


def run_validate(cfg: ExperimentConfig | None = None, n_paths: int = 5_000,
                 progress=None) -> list[CheckResult]:
    """Cross-method oracle suite; returns one result per check."""
    cfg = cfg or ExperimentConfig.from_dict(None)
    params = cfg.params()
    grid = cfg.grid()
    checks: list[CheckResult] = []

    def log(msg):
        if progress:
            progress(msg)

    # 1. existence-horizon bound on a (mA, mB) grid
    log("validate: horizon bound grid")
    worst = 0.0
    for mA in np.linspace(-2, 2, 5):
        for mB in np.linspace(-2, 2, 5):
            Tb = 0.9 * horizon_bound(mA, mB, params)
            p = GameParams(qA=params.qA, qB=params.qB, rA=params.rA, rB=params.rB,
                           sigmaA=params.sigmaA, sigmaB=params.sigmaB,
                           mA=mA, mB=mB, T=Tb, x0=params.x0)
            sol = solve_batch(p, [mA], [mB], grid.N, refine=1)
            fro = np.sqrt(np.sum(sol[:, :2] ** 2, axis=(1, 2, 3, 4)))
            worst = max(worst, float((fro / (1 + mA**2 + mB**2)).max()))
    checks.append(CheckResult("prop1_frobenius_bound", worst <= 1.0, worst, 1.0))

    # 2. fine-grid solver agreement
    log("validate: fine-grid solver")
    coarse = solve_riccati(params, params.mA, params.mB, grid)
    fine = solve_riccati(params, params.mA, params.mB, TimeGrid(params.T, 10 * grid.N))
    err = float(np.abs(coarse.thetaA[0] - fine.thetaA[0]).max())
    checks.append(CheckResult("riccati_fine_grid", err < 1e-8, err, 1e-8))

    # 3. sensitivity vs central finite differences
    log("validate: sensitivity FD")
    h = 1e-5
    sens = solve_sensitivity(params, params.mA, params.mB, grid, "mB")
    up = solve_riccati(params, params.mA, params.mB + h, grid)
    dn = solve_riccati(params, params.mA, params.mB - h, grid)
    fd = (up.thetaB[0] - dn.thetaB[0]) / (2 * h)
    err = float(np.abs(sens.dThetaB[0] - fd).max())
    checks.append(CheckResult("sensitivity_fd", err < 1e-6, err, 1e-6))

    # 4. score identities under quadrature
    log("validate: score identities")
    worst = 0.0
    for prior in (TruncGaussPrior(), TruncGaussPrior(mu=2.0, rho=1.0),
                  TruncGaussPrior(mu=0.5, rho=0.3, lo=-1.0, hi=2.0)):
        rule = QuadratureRule.for_prior(prior)
        worst = max(worst,
                    abs(expect_over_prior(lambda m: 1.0, prior, rule) - 1.0),
                    abs(expect_over_prior(lambda m: score_mu(m, prior), prior, rule)),
                    abs(expect_over_prior(lambda m: score_rho(m, prior), prior, rule)))
    checks.append(CheckResult("score_zero_mean", worst < 1e-8, worst, 1e-8))

    # 5. information matrix: moment route vs Monte Carlo route
    log("validate: fisher cross-check")
    priorA, priorB = cfg.prior("a"), cfg.prior("b")
    engine = CoefficientEngine(params, priorA, priorB, grid)
    gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
    mom = moment_path(gains, params, params.x0, grid)
    F_mom = fisher_from_moments(engine.sensitivities("true"), mom, params, grid)
    batch = euler_maruyama(gains, params, cfg.sim("validate:fisher", n_paths))
    F_mc = fisher_mc(engine.sensitivities("true"), batch, params, grid)
    dev = np.abs(F_mom.entries - F_mc.entries) / np.where(F_mc.se > 0, F_mc.se, np.inf)
    worst = float(dev.max())
    checks.append(CheckResult("fisher_mc_vs_moments", worst < 3.0, worst, 3.0,
                              note=f"{n_paths} paths"))

    # 6. Schur complement vs variational minimum on random PSD matrices
    log("validate: variational identity")
    rng = np.random.default_rng(7)
    worst = 0.0
    from .fisher import FisherMatrix
    for _ in range(100):
        Mx = rng.standard_normal((3, 3))
        F = FisherMatrix(Mx @ Mx.T + 0.1 * np.eye(3), "true", "synthetic")
        blk = F.entries[1:, 1:]
        zstar = -np.linalg.solve(blk, F.entries[1:, 0])
        gap = abs(variational_value(F, zstar) - 1.0 / asymptotic_variance(F))
        worst = max(worst, gap)
    checks.append(CheckResult("variational_identity", worst < 1e-10, worst, 1e-10))

    # 7. planted-coefficient recovery in the detection regression
    log("validate: detection recovery")
    from .detect import per_step_regression
    rng = np.random.default_rng(11)
    states = rng.standard_normal((500, grid.N + 1, 2))
    from .simulate import TrajectoryBatch
    planted = TrajectoryBatch(states, ("synthetic", "synthetic"), 0)
    res = 0.3 * states[:, :-1, 0] - 0.7 * states[:, :-1, 1]
    a1, a2, *_ = per_step_regression(res, planted, grid)
    worst = float(max(np.abs(a1 - 0.3).max(), np.abs(a2 + 0.7).max()))
    checks.append(CheckResult("detection_planted_recovery", worst < 1e-10, worst, 1e-10))

    # 8. saddle existence bound is positive at sampled constants
    log("validate: saddle horizon bound")
    cTheta = sample_theta_bound(params)
    sens_tab = engine.sensitivity_tables("proxy")
    cG = 0.0
    for z in ([0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0], [-2.0, -2.0]):
        g = (sens_tab[0] + z[0] * sens_tab[1] + z[1] * sens_tab[2]) / params.rB
        cG = max(cG, float(np.sqrt((g**2).sum(axis=-1)).max()))
    bound = af_horizon_bound(params, cfg.afconfig().qAF, cfg.afconfig().rAF,
                             cfg.afconfig().lamAF, cTheta, cG)
    checks.append(CheckResult("af_horizon_bound_positive", bound > 0.0, bound, 0.0,
                              note=f"cTheta={cTheta:.3g} cG={cG:.3g}"))
    return checks
