"""Dirichlet problem on the unrescaled domain, the strategy integral, and sweeps.

The domain is ``(-tau0, t0) x (-eps, eps)`` in Fermi coordinates.  Its nodes are
the images of the rescaled grid under ``t = t0 - delta^(1/3) x``, ``s = eps y``,
so every unrescaled array lines up index by index with the rescaled one and no
interpolation enters the gap comparison.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .airy import airy_zeros, build_airy_basis
from .cross_section import F1_T_INDEPENDENT, make_params
from .errors import GaplabError, NumericError
from .geometry import (CubicPotential, CurvatureProfile, DomainParams, FermiMetric, build_metric,
                       convexity_report, potential_convexity_report)
from .perturbation import check_guess_lemma, check_two_norm_perturbation, form_difference_bounds, measure_eps_comp
from .spectral2d import (Grid2D, WarpSamples, WeightedOperator2D, assemble_delta, assemble_delta0,
                         coefficient_difference, compare_spectra, guess_eigenfunction, normal_part_mass,
                         residual_norm, sample_warp, slice_energy_decay, slice_gram, solve_eigen,
                         symmetry_defect)
from .sturm_liouville import Spectrum, assemble_model_ode, solve_model_ode, verify_airy_asymptotics
from .tolerances import load_tolerances

TAG_OMEGA = "L2(Omega): J dt ds"


def limit_target() -> float:
    a = airy_zeros()
    return -2.0 / 3.0 * (a[1] - a[0])


# ----------------------------------------------------------------------------
# unrescaled operator


def unrescaled_operator(metric: FermiMetric, params: DomainParams, grid: Grid2D, r: float = 0.0,
                        pot=None, samples: WarpSamples | None = None) -> WeightedOperator2D:
    """``-(1/J) d_t(J d_t) - (1/J) d_s(J^-1 d_s) + r P`` with weight J."""
    if r < 0:
        raise ValueError("r must be non-negative")
    ws = samples or sample_warp(metric, params, grid)
    pot = pot or CubicPotential(params.tP)
    ny = grid.n_y_intervals
    x_faces = ws.J_xhalf.copy()
    y_faces = grid.kappa / ws.J_yhalf
    weight = ws.J_node.copy()
    P = np.asarray(pot(ws.t_node[1:-1]), dtype=float)
    potential = np.repeat((r * P)[:, None], ny - 1, axis=1)
    return WeightedOperator2D(grid, x_faces, y_faces, weight, potential,
                              params.d3 * grid.hx, params.eps * grid.hy, TAG_OMEGA)


def solve_unrescaled(metric: FermiMetric, params: DomainParams, r: float = 0.0, grid: Grid2D | None = None,
                     pot=None, samples: WarpSamples | None = None, guesses=None, k_max: int = 3) -> Spectrum:
    grid = grid or Grid2D.reference(params.x_max)
    op = unrescaled_operator(metric, params, grid, r, pot, samples)
    return solve_eigen(op, k_max, guesses)


def integral_I_eps(spectrum: Spectrum, params: DomainParams, pot=None, t_nodes=None) -> float:
    """``int P (u_2^2 - u_1^2) J dt ds`` by the node quadrature of the spectrum."""
    pot = pot or CubicPotential(params.tP)
    grid: Grid2D = spectrum.grid
    if t_nodes is None:
        t_nodes = params.t0 - params.d3 * grid.x.nodes
        t_nodes[-1] = -params.tau0
    P = np.asarray(pot(t_nodes), dtype=float)[:, None]
    u1, u2 = spectrum.vector(1), spectrum.vector(2)
    return float(spectrum.cell * np.sum(spectrum.weight * P * (u2 ** 2 - u1 ** 2)))


@dataclass(frozen=True)
class GapReport:
    gamma_0: float
    gamma_r: list
    I_eps: float
    rescaled_I: float
    hf_derivative: float
    hf_forward: float
    hf_rel_dev: float
    limit_target: float
    theorem_holds: bool
    r_step: float
    diameter_lower_bound: float
    unrescaled_consistency: float = float("nan")
    simple: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


def _gap(spec: Spectrum) -> float:
    return float(spec.eigenvalues[1] - spec.eigenvalues[0])


def hellmann_feynman_check(metric: FermiMetric, params: DomainParams, r_step: float | None = None,
                           grid: Grid2D | None = None, pot=None, samples: WarpSamples | None = None,
                           guesses=None, multiples=(1, 2, 4), simplicity_gap: float | None = None) -> GapReport:
    """Finite-difference dGamma/dr at 0 against the integral I_eps.

    The derivative is the two-point Richardson value ``2 D(r) - D(2r)`` with
    ``D(r) = (Gamma(r) - Gamma(0)) / r``; the plain forward value is reported too.
    """
    grid = grid or Grid2D.reference(params.x_max)
    pot = pot or CubicPotential(params.tP)
    samples = samples or sample_warp(metric, params, grid)
    if r_step is None:
        r_step = load_tolerances()["gap"]["r_step_factor"] / params.d3
    s0 = solve_unrescaled(metric, params, 0.0, grid, pot, samples, guesses)
    lam = s0.eigenvalues
    scale = params.d3 ** -2
    gap_floor = (simplicity_gap if simplicity_gap is not None else 0.0) * scale
    simple = bool(lam[1] - lam[0] > gap_floor and lam[2] - lam[1] > gap_floor)
    if not (lam[1] > lam[0] and lam[2] > lam[1]):
        raise NumericError(f"non-simple leading eigenvalues at r = 0: {lam}")
    g0 = _gap(s0)
    I = integral_I_eps(s0, params, pot, samples.t_node)
    rs = sorted(set(float(m) * r_step for m in multiples) | {r_step, 2.0 * r_step})
    gam = {}
    prev = [s0.vector(k) for k in (1, 2, 3)]
    for r in rs:
        sr = solve_unrescaled(metric, params, r, grid, pot, samples, prev)
        gam[r] = _gap(sr)
    d1 = (gam[r_step] - g0) / r_step
    d2 = (gam[2 * r_step] - g0) / (2 * r_step)
    rich = 2 * d1 - d2
    rel = abs(rich - I) / abs(I) if I != 0 else abs(rich)
    gamma_r = [(float(m) * r_step, gam[float(m) * r_step]) for m in multiples]
    holds = all(g < g0 for _, g in gamma_r)
    dP = float(pot.derivative(params.t0))
    rescaled = I / params.d3 / dP if dP != 0 else float("nan")
    return GapReport(g0, gamma_r, I, rescaled, rich, d1, rel, limit_target(), holds, r_step,
                     params.t0 + params.tau0, simple=simple)


# ----------------------------------------------------------------------------
# sweeps


@dataclass
class SweepConfig:
    t0: float = 1.0
    tP_fraction: float = 0.4
    n_y_intervals: int = 60
    nx_min: int = 1200
    nx_per_unit: float = 30.0
    k_max: int = 3
    seed: int = 0
    tau0: float | None = None
    r_multiples: tuple = (1, 2, 4)
    run_gap: bool = True


def _slope(deltas, values, floor: float = 0.0):
    d = np.asarray(deltas, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    ok = np.isfinite(v) & np.isfinite(d) & (v > floor) & (d > 0)
    if np.count_nonzero(ok) < 2:
        return float("nan")
    return float(np.polyfit(np.log(d[ok]), np.log(v[ok]), 1)[0])


def run_row(profile: CurvatureProfile, eps: float, cfg: SweepConfig) -> dict:
    """Everything measured at one epsilon; never raises for certification issues."""
    tols = load_tolerances()
    row: dict = {"epsilon": float(eps), "flags": []}
    metric = build_metric(profile, cfg.t0, eps, n_s=2 * cfg.n_y_intervals + 1)
    params = make_params(metric, cfg.t0, eps, cfg.tP_fraction, tau0=cfg.tau0)
    row.update(delta=params.delta, d3=params.d3, tau0=params.tau0, tP=params.tP, x_max=params.x_max)
    conv = convexity_report(metric, params)
    pconv = potential_convexity_report(metric, params)
    row["convexity"] = asdict(conv)
    row["potential_convexity"] = asdict(pconv)
    row["flags"].extend(f for f in conv.flags if f != "convexity_fail")
    if not (conv.passed and pconv.passed):
        row["flags"].append("convexity_fail")
        row["status"] = "convexity_fail"
        return row

    d3 = params.d3
    zeros = airy_zeros()
    basis = build_airy_basis(4)

    # model ODE at its own reference resolution
    model_ref = solve_model_ode(assemble_model_ode(metric, params), 4)
    airy_rep = verify_airy_asymptotics(model_ref, basis, params)
    mt = tols["model_ode"]
    row["model_ode"] = {
        "eigenvalues": model_ref.eigenvalues.tolist(),
        "base": model_ref.diagnostics["base"],
        "offsets": list(airy_rep.offsets),
        "gap": airy_rep.gap,
        "moment_deviation": list(airy_rep.moment_deviation),
        "key_integral": airy_rep.key_integral,
        "key_deviation": airy_rep.key_deviation,
        "h1_norms": list(airy_rep.h1_norms),
        "tail_violation": airy_rep.tail_violation,
        "bands": {
            "eigenvalue": all(abs(o) <= mt["eigenvalue_C"] * d3 for o in airy_rep.offsets[:2]),
            "gap": abs(airy_rep.gap - (zeros[1] - zeros[0])) <= mt["gap_C"] * d3,
            "key_integral": abs(airy_rep.key_deviation) <= mt["key_integral_C"] * d3,
            "moments": all(m <= mt["moment_C"] * d3 for m in airy_rep.moment_deviation),
            "h1": all(h <= mt["h1_bound"] for h in airy_rep.h1_norms),
            "tail": airy_rep.tail_violation <= 1.0,
        },
    }

    grid = Grid2D.reference(params.x_max, cfg.nx_min, cfg.nx_per_unit, cfg.n_y_intervals)
    ws = sample_warp(metric, params, grid)
    op0 = assemble_delta0(metric, params, grid, ws)
    op = assemble_delta(metric, params, grid, ws)
    model = solve_model_ode(assemble_model_ode(metric, params, grid.x), cfg.k_max)
    guesses = [guess_eigenfunction(k, model, grid, op0) for k in range(1, cfg.k_max + 1)]
    spec0 = solve_eigen(op0, cfg.k_max, guesses)
    spec = solve_eigen(op, cfg.k_max, guesses)

    pt = tols["pde"]
    rng = np.random.default_rng(cfg.seed)
    cmp_ = compare_spectra(spec, spec0, model, op0, guesses)
    lt, lt0 = spec.eigenvalues, spec0.eigenvalues
    sep_dev = [abs(float(lt0[k] - model_ref.eigenvalues[k])) for k in range(2)]
    row["pde"] = {
        "grid": [grid.x.n_intervals, grid.n_y_intervals],
        "lambda_tilde": lt.tolist(),
        "lambda_tilde0": lt0.tolist(),
        "lambda_ode_grid": model.eigenvalues.tolist(),
        "lambda_ode_ref": model_ref.eigenvalues[: cfg.k_max].tolist(),
        "separation_dev": sep_dev,
        "coefficient_difference": coefficient_difference(op, op0),
        "symmetry": [symmetry_defect(op, rng), symmetry_defect(op0, rng)],
        "gap": float(lt[1] - lt[0]),
        "gap_dev": float(lt[1] - lt[0] - (zeros[1] - zeros[0])),
        "gap_band": pt["gap_band_C"] * params.delta ** (1 / 6),
        "gaps": [float(lt[1] - lt[0]), float(lt[2] - lt[1])],
        "compare": {str(k): v for k, v in cmp_.items()},
        "residuals": [residual_norm(op0, guesses[k], model.eigenvalues[k]) for k in range(2)],
        "solver": {"delta": spec.diagnostics, "delta0": spec0.diagnostics},
        "degeneracy_flags": [F1_T_INDEPENDENT],
    }

    # certificates
    ct = tols["certificates"]
    guess_certs = [check_guess_lemma(spec0, op0, float(model.eigenvalues[k]), guesses[k], ct["guess_C"])
                   for k in range(2)]
    epsc = measure_eps_comp(op, op0, rng)
    two = []
    fdiffs = []
    for k in (1, 2):
        fd = form_difference_bounds(op, op0, spec, spec0, k)
        fdiffs.append(fd)
        two.append(check_two_norm_perturbation(spec, spec0, op0, epsc["eps_comp"], fd, k, ct["two_norm_C"]))
    gram = slice_gram([spec0.vector(1), spec0.vector(2)], op0)
    normal = [normal_part_mass(spec0.vector(k), op0) for k in (1, 2)]
    row["certificates"] = {
        "guess": [c.as_dict() for c in guess_certs],
        "eps_comp": epsc,
        "form_difference": fdiffs,
        "two_norm": [t.as_dict() for t in two],
        "slice_gram": gram.tolist(),
        "slice_gram_dev": float(np.max(np.abs(gram - np.eye(2)))),
        "slice_gram_band": pt["slice_gram_C"] * d3,
        "normal_mass": normal,
        "normal_mass_band": pt["normal_mass_C"] * d3,
    }

    dt = tols["decay"]
    decays = [slice_energy_decay(spec.vector(k), grid, zeros[k - 1], dt["noise_floor"], dt["end_margin"],
                                 dt["max_slope"]) for k in (1, 2)]
    row["decay"] = [asdict(d) for d in decays]

    if cfg.run_gap:
        gt = tols["gap"]
        r_step = gt["r_step_factor"] / d3
        guesses_un = [spec.vector(k) for k in range(1, cfg.k_max + 1)]
        rep = hellmann_feynman_check(metric, params, r_step, grid, samples=ws, guesses=guesses_un,
                                     multiples=cfg.r_multiples, simplicity_gap=pt["simplicity_gap"])
        # r = 0 rescaling consistency, lambda = delta^(-2/3) lambda~
        rep_d = rep.as_dict()
        rep_d["unrescaled_consistency"] = abs(rep.gamma_0 * d3 ** 2 - float(lt[1] - lt[0]))
        row["gap"] = rep_d

    row["status"] = "ok"
    row["checks"] = row_checks(row)
    if not all(row["checks"].values()):
        row["flags"].append("certification_fail")
    return row


def row_checks(row: dict) -> dict:
    """Pass/fail per certificate family for one solved row."""
    tols = load_tolerances()
    pt = tols["pde"]
    c = row["certificates"]
    checks = {
        "convexity": row["convexity"]["passed"] and row["potential_convexity"]["passed"],
        "symmetry": max(row["pde"]["symmetry"]) <= pt["symmetry_rel"],
        "simplicity": min(row["pde"]["gaps"]) >= pt["simplicity_gap"],
        "guess_lemma": all(g["passed"] for g in c["guess"]),
        "two_norm": all(t["passed"] for t in c["two_norm"]),
        "slice_gram": c["slice_gram_dev"] <= c["slice_gram_band"],
        "decay": all(d["passed"] for d in row["decay"]),
    }
    if "gap" in row:
        g = row["gap"]
        checks["theorem"] = bool(g["theorem_holds"])
        checks["hellmann_feynman"] = g["hf_rel_dev"] <= tols["gap"]["hf_rel"]
        checks["I_negative"] = g["I_eps"] < 0
    return checks


def _row_job(args):
    profile, eps, cfg = args
    try:
        return run_row(profile, eps, cfg)
    except GaplabError as exc:
        return {"epsilon": float(eps), "status": "error", "error": f"{type(exc).__name__}: {exc}",
                "flags": ["numeric_error"]}


@dataclass
class SweepResult:
    profile: str
    rows: list
    slopes: dict = field(default_factory=dict)

    def solved(self):
        return [r for r in self.rows if r.get("status") == "ok"]


def fit_slopes(rows: list) -> dict:
    """Log-log slopes vs delta of every tracked deviation."""
    ok = [r for r in rows if r.get("status") == "ok"]
    if len(ok) < 2:
        return {}
    dl = [r["delta"] for r in ok]
    target = limit_target()
    series = {
        "model_offset_k1": [r["model_ode"]["offsets"][0] for r in ok],
        "model_offset_k2": [r["model_ode"]["offsets"][1] for r in ok],
        "model_gap_dev": [r["model_ode"]["gap"] - (airy_zeros()[1] - airy_zeros()[0]) for r in ok],
        "key_integral_dev": [r["model_ode"]["key_deviation"] for r in ok],
        "delta_vs_delta0_k1": [r["pde"]["compare"]["1"]["delta_vs_delta0"] for r in ok],
        "delta_vs_delta0_k2": [r["pde"]["compare"]["2"]["delta_vs_delta0"] for r in ok],
        "eigvec_distance_k1": [r["pde"]["compare"]["1"]["eigvec_distance"] for r in ok],
        "eigvec_distance_k2": [r["pde"]["compare"]["2"]["eigvec_distance"] for r in ok],
        "pde_gap_dev": [r["pde"]["gap_dev"] for r in ok],
        "eps_comp": [r["certificates"]["eps_comp"]["eps_comp"] for r in ok],
    }
    if all("gap" in r for r in ok):
        series["rescaled_I_dev"] = [r["gap"]["rescaled_I"] - target for r in ok]
    # values at the roundoff floor carry no rate information
    return {k: _slope(dl, v, floor=1e-11) for k, v in series.items()}


def epsilon_sweep(profile: CurvatureProfile, eps_list, cfg: SweepConfig | None = None,
                  workers: int = 1) -> SweepResult:
    cfg = cfg or SweepConfig()
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    jobs = [(profile, e, cfg) for e in eps_list]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row_job, jobs))
    else:
        rows = [_row_job(j) for j in jobs]
    return SweepResult(profile.name, rows, fit_slopes(rows))


def pde_rows(result: SweepResult) -> list[dict]:
    """One record per (epsilon, k) for the tabular output."""
    out = []
    for r in result.solved():
        for k in (1, 2):
            c = r["pde"]["compare"][str(k)]
            out.append({
                "epsilon": r["epsilon"], "delta": r["delta"], "k": k,
                "lambda_tilde": c["lambda_tilde"], "lambda_tilde0": c["lambda_tilde0"],
                "lambda_ode": r["pde"]["lambda_ode_ref"][k - 1],
                "guess_distance": c["guess_distance"],
                "decay_slope": r["decay"][k - 1]["slope"],
            })
    return out


def gap_rows(result: SweepResult) -> list[dict]:
    out = []
    for r in result.solved():
        if "gap" not in r:
            continue
        g = r["gap"]
        band = load_tolerances()["gap"]["strategy_band"]
        ok = (g["theorem_holds"] and g["I_eps"] < 0 and g["hf_rel_dev"] <= load_tolerances()["gap"]["hf_rel"])
        out.append({
            "epsilon": r["epsilon"], "delta": r["delta"], "gamma0": g["gamma_0"],
            "gamma_r1": g["gamma_r"][0][1], "I_eps": g["I_eps"], "rescaled_I": g["rescaled_I"],
            "hf_deriv": g["hf_derivative"], "target": g["limit_target"],
            "pass": bool(ok),
            "strategy_band_ok": abs(g["rescaled_I"] - g["limit_target"]) <= band,
        })
    return out
