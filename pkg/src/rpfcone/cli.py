"""Command-line front end: config loading, run orchestration and
machine-readable reporting (JSON for scalars/verdicts, CSV for series).

Reports are deterministic for a fixed config + seed (no wall-clock content)
and embed the config hash, package version and kernel backend. Certificates
gate labeling, not execution: runs outside the certified class proceed and
are labeled as such.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__, kernels
from .analyticity import (derivative_check, kinked_control_curve,
                          projector_identities, resolvent_series_check,
                          smoothness_certificate, sweep)
from .cone import (ConeParams, cone_invariance_check, contraction_check,
                   default_k)
from .config import load_config
from .dynamics import map_from_config
from .errors import ConfigError, RpfconeError
from .grids import GridFunction
from .hyperbolic import (OrbitExpansionTrace, first_hyperbolic_time_at_least,
                         hyperbolic_density, hyperbolic_times,
                         sigma_membership_proxy)
from .potentials import GeometricPotential, ConstantPotential, certify, potential_from_config
from .spectral import (commutation_defect, e0_contraction,
                       eigenprojection_contour, pressure_via_separated_sets)
from .stats import (clt_empirical, clt_variance, correlation, entropy_identity,
                    gibbs_check)
from .skew import pushforward_check, skew_decay_and_clt, skew_from_config
from .transfer import DiscretizedOperator, eigen_residuals, power_iterate


def _atomic_write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _emit(cfg, command, payload, csv_rows=None, csv_header=None):
    os.makedirs(cfg.out_dir, exist_ok=True)
    report = {
        "command": command,
        "version": __version__,
        "backend": kernels.BACKEND,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
    }
    report.update(payload)
    path = os.path.join(cfg.out_dir, f"{command.replace('-', '_')}.json")
    _atomic_write(path, json.dumps(report, indent=2, default=_json_default,
                                   sort_keys=True) + "\n")
    if csv_rows is not None:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(csv_header)
        writer.writerows(csv_rows)
        _atomic_write(os.path.join(cfg.out_dir, f"{command.replace('-', '_')}.csv"),
                      buf.getvalue())
    print(json.dumps({k: report[k] for k in payload}, default=_json_default,
                     sort_keys=True))
    return report


def _setup(cfg):
    pmap = map_from_config(cfg.map)
    pot = potential_from_config(cfg.potential, pmap)
    return pmap, pot


def _spectral(cfg):
    pmap, pot = _setup(cfg)
    op = DiscretizedOperator(pmap, pot, cfg.resolution)
    data = power_iterate(op)
    return pmap, pot, op, data


def _certify_payload(cfg, pmap, pot):
    report = certify(pmap, pot, sigma=cfg.sigma, alpha=cfg.alpha, delta=cfg.delta,
                     q=cfg.q, resolution=cfg.resolution, seed=cfg.seed)
    certified = (report.passes_star and report.passes_double_star
                 and report.passes_small_variation)
    return report, {"smallness": asdict(report), "certified": certified,
                    "label": "certified" if certified else "outside certified class"}


def cmd_certify(cfg):
    pmap, pot = _setup(cfg)
    _, payload = _certify_payload(cfg, pmap, pot)
    return payload


def cmd_pressure(cfg):
    pmap, pot, op, data = _spectral(cfg)
    return {"lambda": data.lam, "pressure": data.pressure,
            "gap_ratio": data.gap_ratio, "iterations": data.iterations,
            "residuals": eigen_residuals(op, data)}


def cmd_equilibrium(cfg):
    pmap, pot, op, data = _spectral(cfg)
    payload = {"lambda": data.lam, "pressure": data.pressure,
               "gap_ratio": data.gap_ratio, "iterations": data.iterations,
               "residuals": eigen_residuals(op, data)}
    rows = list(zip(op.centers, data.h.values, data.nu, data.mu))
    return payload, rows, ["x", "h", "nu_weight", "mu_weight"]


def cmd_gap(cfg):
    pmap, pot, op, data = _spectral(cfg)
    proj = eigenprojection_contour(op, data, quad_points=64)
    e0 = e0_contraction(data, op, seed=cfg.seed)
    p_sep = pressure_via_separated_sets(pmap, pot, n=16, delta=cfg.delta)
    return {"lambda": data.lam, "gap_ratio": data.gap_ratio,
            "idempotency_defect": proj.idempotency_defect,
            "agreement_defect": proj.agreement_defect,
            "commutation_defect": commutation_defect(op, data, proj),
            "e0_step_factor": e0["max_step_factor"],
            "pressure_separated": p_sep, "pressure_spectral": data.pressure}


def cmd_cone_check(cfg):
    pmap, pot, op, data = _spectral(cfg)
    small, cert_payload = _certify_payload(cfg, pmap, pot)
    k = cfg.cone_k or default_k(pmap, pot, small.n_steps, cfg.resolution)
    params = ConeParams(k=k, delta=cfg.delta, alpha=cfg.alpha)
    inv = cone_invariance_check(op, params, small.n_steps, trials=16,
                                seed=cfg.seed, lambda_hat=small.lambda_hat)
    con = contraction_check(op, params, small.n_steps, pairs=16, seed=cfg.seed)
    payload = {"k": k, "delta": cfg.delta, "alpha": cfg.alpha,
               "N": small.n_steps, "lambda_hat": small.lambda_hat,
               "all_mapped": inv["all_mapped"], "worst_ratio": inv["worst_ratio"],
               "delta_diam": con["delta_diam"],
               "max_observed_factor": con["max_observed_factor"]}
    payload.update(cert_payload)
    rows = [(i, f) for i, f in enumerate(con["factors"])]
    return payload, rows, ["pair", "theta_factor"]


def cmd_hyptimes(cfg):
    pmap, pot = _setup(cfg)
    rng = np.random.default_rng(cfg.seed)
    x0s = rng.random(16)
    rows = []
    summaries = []
    for i, x0 in enumerate(x0s):
        trace = OrbitExpansionTrace.from_map(pmap, x0, cfg.horizon)
        times = set(hyperbolic_times(trace, cfg.sigma).tolist())
        avg = trace.prefix_averages
        rows.extend((i, n, int(n in times), avg[n - 1])
                    for n in range(1, cfg.horizon + 1))
        summaries.append({
            "x0": float(x0),
            "density": hyperbolic_density(trace, cfg.sigma),
            "proxy": sigma_membership_proxy(trace, cfg.sigma)
            if cfg.horizon >= 100 else None})
    n_mix = pmap.mixing_time(cfg.delta, n_centers=256)
    n_tilde = first_hyperbolic_time_at_least(pmap, cfg.sigma, 2 * n_mix, x0s,
                                             max(cfg.horizon, 10000))
    payload = {"orbits": summaries, "sigma": cfg.sigma,
               "n_tilde_mix": n_mix, "n_tilde": n_tilde}
    return payload, rows, ["orbit", "n", "is_hyperbolic", "prefix_average"]


def cmd_decay(cfg):
    pmap, pot, op, data = _spectral(cfg)
    obs = GridFunction.from_callable(pmap.space, lambda x: x, cfg.resolution)
    series = correlation(data, op, obs, obs, cfg.n_max)
    payload = {"tau_hat": series.tau_hat, "k_hat": series.k_hat,
               "fit_quality": series.fit_quality, "gap_ratio": data.gap_ratio,
               "c0": series.c0}
    rows = list(zip(range(cfg.n_max + 1), series.values))
    return payload, rows, ["n", "C_n"]


def cmd_clt(cfg):
    pmap, pot, op, data = _spectral(cfg)
    obs = GridFunction.from_callable(pmap.space, lambda x: x, cfg.resolution)
    var_rep = clt_variance(data, op, obs, n_max=cfg.n_max)
    emp = clt_empirical(op, data, obs, var_rep.sigma2, samples=cfg.samples,
                        birkhoff_n=cfg.birkhoff_n, seed=cfg.seed)
    return {"sigma2": var_rep.sigma2, "truncation": var_rep.truncation,
            "tail_bound": var_rep.tail_bound, "ks_distance": emp.ks_distance,
            "samples": emp.sample_count, "birkhoff_n": emp.birkhoff_length,
            "seed": cfg.seed}


def cmd_gibbs(cfg):
    pmap, pot, op, data = _spectral(cfg)
    rng = np.random.default_rng(cfg.seed)
    eps = cfg.epsilon if cfg.epsilon is not None else cfg.delta / 2.0
    out = gibbs_check(pmap, pot, data, rng.random(8), eps,
                      min(cfg.horizon, 48), cfg.sigma)
    payload = {"min_ratio": out["min_ratio"], "max_ratio": out["max_ratio"],
               "epsilon": eps, "count": len(out["ratios"])}
    ent = entropy_identity(data, pot, op)
    payload["entropy"] = ent["entropy"]
    rows = out["ratios"]
    return payload, rows, ["x0", "n", "gibbs_ratio"]


def cmd_analyticity(cfg):
    pmap, pot = _setup(cfg)
    if cfg.potential.get("family") == "constant":
        family = lambda t: ConstantPotential(t)
        dphi = np.ones(cfg.resolution)
    else:
        family = lambda t: GeometricPotential(pmap, t)
        x = (np.arange(cfg.resolution) + 0.5) / cfg.resolution
        dphi = -np.log(np.abs(pmap.derivative(x)))
    sw = sweep(pmap, family, cfg.t_min, cfg.t_max, cfg.t_steps, cfg.resolution)
    dcheck = derivative_check(sw, dphi)
    cert = smoothness_certificate(sw.t_grid, sw.pressure)
    control = smoothness_certificate(sw.t_grid, kinked_control_curve(sw.t_grid))
    ends = {}
    for label, idx in (("t_min", 0), ("t_max", len(sw.t_grid) - 1)):
        if sw.converged[idx]:
            op_t = DiscretizedOperator(pmap, family(sw.t_grid[idx]), cfg.resolution)
            ident = projector_identities(op_t, sw.data[idx])
            ends[label] = {k: v for k, v in ident.items() if k != "projector"}
    dP_fd = np.gradient(sw.pressure, sw.t_grid)
    dP_formula = np.array([np.dot(dphi, d.mu) if d is not None else np.nan
                           for d in sw.data])
    mid = len(sw.t_grid) // 2
    op_mid = DiscretizedOperator(pmap, family(sw.t_grid[mid]), min(cfg.resolution, 1024))
    series = resolvent_series_check(op_mid, power_iterate(op_mid),
                                    lambda u: np.ones_like(u), [0.0, 0.05],
                                    orders=8)
    payload = {"derivative_check": dcheck, "smoothness": cert,
               "negative_control_fails": not control["passes"],
               "identities": ends,
               "resolvent_series": {str(s): {k: v for k, v in r.items()}
                                    for s, r in series.items()}}
    rows = list(zip(sw.t_grid, sw.lam, sw.pressure, sw.gap_ratio, dP_fd,
                    dP_formula,
                    np.concatenate([sw.h_step_sup, [np.nan]]),
                    np.concatenate([sw.nu_step_tv, [np.nan]])))
    header = ["t", "lambda", "pressure", "gap_ratio", "dP_fd", "dP_formula",
              "h_step_norm", "nu_tv_step"]
    return payload, rows, header


def cmd_skew(cfg):
    pmap, pot = _setup(cfg)
    sys_ = skew_from_config(pmap, cfg.skew)

    def phi_product(x, y):
        return pot(np.asarray(x)) + 0.05 * np.sin(2.0 * np.pi * np.asarray(y))

    pf = pushforward_check(sys_, phi_product, samples=min(cfg.samples, 10 ** 5),
                           resolution=cfg.resolution, seed=cfg.seed,
                           alpha=cfg.alpha)
    obs = lambda x, y: np.cos(2 * np.pi * np.asarray(x)) + np.sin(2 * np.pi * np.asarray(y))
    dec = skew_decay_and_clt(sys_, phi_product, obs, resolution=cfg.resolution,
                             seed=cfg.seed, alpha=cfg.alpha)
    return {"cdf_distance": pf["cdf_distance"], "tau_F": dec["tau_F"],
            "sigma2_F": dec["sigma2_F"], "ks_F": dec["ks_F"], "seed": cfg.seed}


COMMANDS = {
    "certify": cmd_certify,
    "pressure": cmd_pressure,
    "equilibrium": cmd_equilibrium,
    "gap": cmd_gap,
    "cone-check": cmd_cone_check,
    "hyptimes": cmd_hyptimes,
    "decay": cmd_decay,
    "clt": cmd_clt,
    "gibbs": cmd_gibbs,
    "analyticity": cmd_analyticity,
    "skew": cmd_skew,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="rpfcone",
        description="Transfer-operator equilibrium states and spectral-gap "
                    "certificates for non-uniformly expanding interval maps.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON or TOML run config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--resolution", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, overrides={
            "seed": args.seed, "resolution": args.resolution,
            "out_dir": args.out, "threads": args.threads})
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        result = COMMANDS[args.command](cfg)
    except RpfconeError as e:
        os.makedirs(cfg.out_dir, exist_ok=True)
        blob = {"command": args.command, "error": type(e).__name__,
                "message": str(e), "config_hash": cfg.hash()}
        _atomic_write(os.path.join(cfg.out_dir, "error.json"),
                      json.dumps(blob, indent=2) + "\n")
        print(json.dumps(blob), file=sys.stderr)
        return 3
    if isinstance(result, tuple):
        payload, rows, header = result
        _emit(cfg, args.command, payload, rows, header)
    else:
        _emit(cfg, args.command, result)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
