"""Command-line entry point: ``hawkes-stability <subcommand> --config cfg.json``.

Every output file starts with a ``# config_hash=... seed=...`` line, is
written atomically, and depends only on the config bytes and the seed.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys

import numpy as np

from . import analysis as an
from .config import ExperimentConfig, atomic_write, load_config
from .coupling import check_ordering, couple, compute_K, recurrence_run
from .errors import ConfigError, HawkesError
from .kernels import Kernel
from .intensity import check_hyp1, check_hyp2, check_hyp4
from .multitype import simulate_multitype, stability_matrix
from .noise import CanonicalNoise
from .samplers import attribute_parents, map_replicas, simulate_cluster, simulate_thinning, summarize
from .state import EventStream, SumInitial, format_float, initial_from_dict


def _header(cfg: ExperimentConfig, seed: int) -> str:
    return f"config_hash={cfg.hash} seed={seed}"


def _csv(cfg, seed, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {_header(cfg, seed)}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_cell(v) for v in r) + "\n")
    return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def _json(cfg, seed, payload) -> str:
    doc = {"config_hash": cfg.hash, "seed": seed, **payload}
    return json.dumps(_plain(doc), sort_keys=True, indent=2, allow_nan=True) + "\n"


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (float, np.floating)):
        return None if math.isnan(x) else float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _events_csv(cfg, seed, streams) -> str:
    buf = io.StringIO()
    buf.write(f"# {_header(cfg, seed)}\n")
    multi = len(streams) > 1
    buf.write(("replica," if multi else "") + ",".join(EventStream.COLUMNS) + "\n")
    for i, s in enumerate(streams):
        for row in s.csv_rows():
            buf.write((f"{i}," if multi else "") + ",".join(row) + "\n")
    return buf.getvalue()


def _side(path, suffix):
    root, _ = os.path.splitext(path)
    return root + suffix


def _noise(cfg, seed, i):
    return CanonicalNoise(seed, (cfg.run["stream"], i))


# ------------------------------------------------------------------ commands
def cmd_simulate(cfg, args, sampler=None):
    sampler = sampler or args.sampler or cfg.run["sampler"]
    sim = cfg.sim_config()
    if sampler == "cluster":
        from .samplers import _require_linear
        _require_linear(sim)
        fn = lambda i: simulate_cluster(sim, _noise(cfg, args.seed, i))
    else:
        fn = lambda i: simulate_thinning(sim, _noise(cfg, args.seed, i))
    streams = map_replicas(fn, args.replicas, args.threads)
    for s in streams:
        s.validate()
    atomic_write(args.out, _events_csv(cfg, args.seed, streams))
    summ = summarize(streams, sim.horizon)
    summ["sampler"] = sampler
    atomic_write(_side(args.out, ".summary.json"), _json(cfg, args.seed, summ))


def cmd_attribute(cfg, args):
    sim = cfg.sim_config()

    def one(i):
        noise = _noise(cfg, args.seed, i)
        return attribute_parents(simulate_thinning(sim, noise), sim, noise.rng(1))

    streams = map_replicas(one, args.replicas, args.threads)
    atomic_write(args.out, _events_csv(cfg, args.seed, streams))
    atomic_write(_side(args.out, ".summary.json"), _json(cfg, args.seed, summarize(streams, sim.horizon)))


def cmd_couple(cfg, args):
    cfg_b = load_config(args.config_b) if args.config_b else None
    sim_a = cfg.sim_config()
    if cfg_b is not None:
        sim_b = cfg_b.sim_config(horizon=sim_a.horizon)
    elif cfg.analysis["overlap_f"] is not None:
        sim_b = sim_a.replace(initial=SumInitial([sim_a.initial, initial_from_dict(cfg.analysis["overlap_f"])]))
    else:
        sim_b = sim_a.replace(initial=Kernel.zero())
    ordering = check_ordering(sim_a, sim_b)

    def one(i):
        rec = couple(sim_a, sim_b, _noise(cfg, args.seed, i))
        return rec.delta_count, rec.last_discrepancy

    res = map_replicas(one, args.replicas, args.threads)
    rows = [(i, n, last, n == 0) for i, (n, last) in enumerate(res)]
    atomic_write(args.out, _csv(cfg, args.seed, ["replica", "delta_count", "L", "coupled"], rows))
    L = np.array([np.nan if last is None else last for _, last in res])
    tg = np.asarray(cfg.analysis["t_grid"], dtype=float)
    surv = [(float(t), float(np.mean(np.nan_to_num(L, nan=-np.inf) > t))) for t in tg]
    atomic_write(_side(args.out, ".summary.json"), _json(cfg, args.seed, {
        "replicas": args.replicas, "coupled_fraction": float(np.mean([n == 0 for n, _ in res])),
        "survival_L": surv, "ordered": ordering.ok, "ordering_failures": ordering.failures}))


def _tv(cfg, step, m):
    # same pair of starting conditions as `couple`: they differ by overlap_f
    f = cfg.analysis["overlap_f"]
    g = initial_from_dict(f) if f is not None else cfg.initial
    return an.tv_bound_for(cfg.intensity, cfg.phi, cfg.kernel, g, step, m)


def cmd_tvbound(cfg, args):
    step = args.grid_step or cfg.analysis["grid_step"]
    m = args.grid_len or cfg.analysis["grid_len"]
    res = _tv(cfg, step, m)
    atomic_write(args.out, _csv(cfg, args.seed, ["t", "bound"], zip(res.t, res.bound)))
    atomic_write(_side(args.out, ".summary.json"), _json(cfg, args.seed, {
        "B": res.B, "B_tilde": res.B_tilde, "terms": res.terms, "total_mass": res.total_mass,
        "expected_mass": res.expected_mass, "tail_ratio": res.tail_ratio,
        "bound_at": {format_float(t): float(res.at(t)) for t in cfg.analysis["t_grid"] if t <= res.r.end}}))


def _stationary(cfg, args):
    return an.stationary_runs(cfg.sim_config(horizon=1.0), cfg.run["burn_in"], cfg.run["horizon"], args.replicas,
                              args.seed, s_grid=cfg.analysis["s_grid"], sample_step=cfg.analysis["sample_step"],
                              threads=args.threads, stream=cfg.run["stream"])


def cmd_mgf(cfg, args):
    f = cfg.intensity
    if f.family != "linear":
        raise ConfigError("mgf needs a linear lambda")
    thetas = args.theta_list or cfg.analysis["thetas"]
    runs = _stationary(cfg, args) if args.replicas > 1 else None
    emp = an.empirical_mgf(runs, thetas) if runs else [None] * len(thetas)
    rows = []
    for th, e in zip(thetas, emp):
        r = an.solve_lambda_theta(cfg.kernel, f.params["B"], th, cfg.analysis["mgf_step"], cfg.analysis["mgf_len"],
                                  A=f.params["A"])
        rows.append((th, r.total, math.exp(r.total) if not r.diverged else math.inf, r.diverged,
                     None if e is None else e.estimate, None if e is None else e.stderr))
    atomic_write(args.out, _csv(cfg, args.seed,
                                ["theta", "Lambda_theta", "exp_Lambda_theta", "diverged", "empirical_mgf", "stderr"],
                                rows))


def cmd_meanfield(cfg, args):
    rep = an.mean_field_check(cfg.sim_config(), _stationary(cfg, args), cfg.analysis["s_grid"])
    rows = zip(rep.s, rep.E_g, rep.E_g_se, rep.E_lam_H, rep.rel_err, rep.z_score)
    atomic_write(args.out, _csv(cfg, args.seed, ["s", "E_g", "E_g_se", "E_lambda_H", "rel_err", "z_score"], rows))
    atomic_write(_side(args.out, ".summary.json"), _json(cfg, args.seed, {
        "max_rel_err": rep.max_rel_err, "rate": rep.rate, "rate_se": rep.rate_se,
        "drift_z": rep.drift_z, "drift_flag": rep.drift_flag}))


def cmd_tails(cfg, args):
    runs = _stationary(cfg, args)
    z = np.concatenate([r.z_samples for r in runs])
    rep = an.tail_estimate(z, cfg.intensity.lam, cfg.kernel.h0, cfg.analysis["thetas"])
    atomic_write(args.out, _json(cfg, args.seed, rep.to_dict()))


def cmd_check(cfg, args):
    f, k, phi = cfg.intensity, cfg.kernel, cfg.phi
    out = {}
    if cfg.multitype is not None:
        out["multitype"] = stability_matrix(cfg.multitype).to_dict()
    if k is None:
        atomic_write(args.out, _json(cfg, args.seed, out))
        return
    out |= {"hyp1": check_hyp1(f).to_dict(), "hyp3": k.check_hypothesis3().to_dict()}
    out["hyp2"] = check_hyp2(f, phi, k).to_dict() if f.monotone else {"error": "lambda is not monotone"}
    out["hyp4"] = check_hyp4(f, phi, k, cfg.initial).to_dict()
    out["hyp4"].pop("C4_trace", None)
    if f.B < 1 and out["hyp2"].get("C_finite"):
        out["K"] = compute_K(f, phi, k)
    atomic_write(args.out, _json(cfg, args.seed, out))


def cmd_multitype(cfg, args):
    if cfg.multitype is None:
        raise ConfigError("config has no model.multitype block")
    model = cfg.multitype
    fn = lambda i: simulate_multitype(model, cfg.run["horizon"], _noise(cfg, args.seed, i),
                                      max_events=cfg.run["max_events"])
    streams = map_replicas(fn, args.replicas, args.threads)
    atomic_write(args.out, _events_csv(cfg, args.seed, streams))
    counts = [np.bincount(s.types, minlength=model.d).tolist() for s in streams]
    atomic_write(_side(args.out, ".summary.json"), _json(cfg, args.seed, {
        "stability": stability_matrix(model).to_dict(), "type_counts": counts}))


def cmd_recurrence(cfg, args):
    sim = cfg.sim_config()
    K = cfg.analysis["K"] or compute_K(cfg.intensity, cfg.phi, cfg.kernel)
    from .coupling import JBound
    jb = JBound(cfg.phi, cfg.kernel, cfg.initial)
    logs = map_replicas(lambda i: recurrence_run(sim, cfg.phi, K, _noise(cfg, args.seed, i),
                                                 budget=cfg.analysis["budget"], jbound=jb),
                        args.replicas, args.threads)
    atomic_write(args.out, _json(cfg, args.seed, {"K": K, "runs": [l.to_dict() for l in logs]}))


COMMANDS = {
    "simulate": cmd_simulate,
    "cluster": lambda cfg, args: cmd_simulate(cfg, args, "cluster"),
    "attribute": cmd_attribute,
    "couple": cmd_couple,
    "tvbound": cmd_tvbound,
    "mgf": cmd_mgf,
    "meanfield": cmd_meanfield,
    "tails": cmd_tails,
    "check": cmd_check,
    "multitype": cmd_multitype,
    "recurrence": cmd_recurrence,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "--config-a", dest="config", required=True, help="experiment JSON")
    common.add_argument("--seed", type=int, default=None, help="overrides run.seed")
    common.add_argument("--replicas", type=int, default=None, help="overrides run.replicas")
    common.add_argument("--threads", type=int, default=None, help="overrides run.threads")
    common.add_argument("--out", required=True, help="output path")
    p = argparse.ArgumentParser(prog="hawkes-stability", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "simulate":
            sp.add_argument("--sampler", choices=("thinning", "cluster"), default=None)
        if name == "couple":
            sp.add_argument("--config-b", default=None, help="second leg; default is a zero-start leg")
        if name == "tvbound":
            sp.add_argument("--grid-step", type=float, default=None)
            sp.add_argument("--grid-len", type=int, default=None)
        if name == "mgf":
            sp.add_argument("--theta-list", type=float, nargs="+", default=None)
    return p


def run_experiment(cfg: ExperimentConfig, command: str, out, *, seed=None, replicas=None, threads=None,
                   **extra) -> int:
    """Dispatch one subcommand; returns the exit status (errors go to stderr as JSON)."""
    args = argparse.Namespace(command=command, out=os.fspath(out), seed=seed, replicas=replicas, threads=threads,
                              sampler=None, config_b=None, grid_step=None, grid_len=None, theta_list=None)
    vars(args).update(extra)
    return _dispatch(cfg, args)


def _dispatch(cfg, args) -> int:
    try:
        if cfg is None:
            cfg = load_config(args.config)
        args.seed = cfg.run["seed"] if args.seed is None else args.seed
        args.replicas = cfg.run["replicas"] if args.replicas is None else args.replicas
        args.threads = cfg.run["threads"] if args.threads is None else args.threads
        if args.replicas < 1 or args.threads < 1:
            raise ConfigError("--replicas and --threads must be positive")
        COMMANDS[args.command](cfg, args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a JSON report
        report = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(report), file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    return _dispatch(None, build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
