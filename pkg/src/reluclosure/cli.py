"""Command-line front end: experiment configs in, CSV and JSON artifacts out.

Exit codes: 0 success, 1 domain violation, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config, serialize
from .closure import ClosureError, LossAuditFailed, closure_curve, verify_improvement
from .landscape import (BadExponent, BudgetExceeded, NonFiniteLoss, best_constant, divergence_report,
                        loss_audit, oracle_path, train)
from .quadrature import error_functional
from .response import GeneralizedResponse, ResponseError, evaluator, validate

OK, DOMAIN, USAGE = 0, 1, 2
ENV_OUT = "RELUCLOSURE_OUT_DIR"


def fmt(v) -> str:
    """17 significant digits: enough to round-trip a double."""
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def out_dir(args, cfg) -> Path:
    if args.out_dir:
        return Path(args.out_dir)
    if "dir" in cfg.get("output", {}):
        return Path(cfg["output"]["dir"])
    return Path(os.environ.get(ENV_OUT, "out"))


def out_path(args, cfg, name: str) -> Path:
    prefix = cfg.get("output", {}).get("prefix", "")
    return out_dir(args, cfg) / f"{prefix}{name}"


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args, cfg) -> int:
    clean = True
    objs = []
    if "response" in cfg:
        objs.append(("response", cfg["response"]))
    if "perturbation" in cfg:
        objs.append(("perturbation.response", cfg["perturbation"]["response"]))
    for where, spec in objs:
        r = config.load_object(spec, cfg)
        bad = validate(r) if isinstance(r, GeneralizedResponse) else []
        for v in bad:
            print(f"{where}: {v}")
        clean &= not bad
        print(f"{where}: {type(r).__name__} {'invalid' if bad else 'ok'}")
    if "measure" in cfg and "target" in cfg and "loss" in cfg:
        m = config.measure(cfg)
        rep = loss_audit(config.loss(cfg, m.dim), m)
        print(rep)
        clean &= rep.ok
    print("clean" if clean else "violations found")
    return OK if clean else DOMAIN


def cmd_train(args, cfg) -> int:
    m = config.measure(cfg)
    loss = config.loss(cfg, m.dim)
    tc = config.train_config(cfg, args.seed)
    try:
        best, traj = train(tc, loss, m)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.trajectory is not None:
            write_csv(out_path(args, cfg, "trajectory.csv"), ["step", "err", "param_norm"], exc.trajectory.rows())
        return DOMAIN
    write_csv(out_path(args, cfg, "trajectory.csv"), ["step", "err", "param_norm"], traj.rows())
    final = serialize.to_dict(best)
    (out_path(args, cfg, "final_tuple.json")).write_text(json.dumps(final, indent=2) + "\n")
    best_err = float(np.min(traj.err))
    verdict = divergence_report(traj) if len(traj) >= 100 else "undecided (fewer than 100 steps)"
    summary = {"d": tc.d, "steps": tc.steps, "seed": tc.seed, "final_err": float(traj.err[-1]),
               "best_err": best_err, "final_param_norm": float(traj.param_norm[-1]), "verdict": verdict}
    print(f"steps={tc.steps} final_err={fmt(traj.err[-1])} best_err={fmt(best_err)} "
          f"param_norm={fmt(traj.param_norm[-1])}")
    print(f"divergence report: {verdict}")
    if tc.d == 0:
        c, e = best_constant(loss, m, tc.quadrature)
        summary.update(closed_form_constant=c, closed_form_err=e)
        print(f"closed form: best constant {fmt(c)} err {fmt(e)}; optimizer err {fmt(best_err)} "
              f"(diff {abs(best_err - e):.3g})")
    write_json(out_path(args, cfg, "train_summary.json"), summary)
    return OK


def cmd_oracle(args, cfg) -> int:
    m = config.measure(cfg)
    loss = config.loss(cfg, m.dim)
    s = cfg["oracle"]
    seed = args.seed if args.seed is not None else s.get("seed", 0)
    try:
        path = oracle_path(s["d"], loss, m, s.get("budget", 8000), seed,
                           config.quadrature(s.get("quadrature")), s.get("restarts", 6))
    except (BudgetExceeded, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN
    write_csv(out_path(args, cfg, "oracle.csv"), ["d", "err"], [(k, e) for k, (e, _) in enumerate(path)])
    write_json(out_path(args, cfg, "oracle_tuple.json"), serialize.to_dict(path[-1][1]))
    for k, (e, _) in enumerate(path):
        print(f"d={k} err={fmt(e)}")
    return OK


def cmd_perturb(args, cfg) -> int:
    m = config.measure(cfg)
    loss = config.loss(cfg, m.dim)
    s = cfg["perturbation"]
    r = config.load_object(s["response"], cfg, "GeneralizedResponse")
    bad = validate(r)
    if bad:
        for v in bad:
            print(f"response: {v}")
        return DOMAIN
    grid = [serialize.num(k) for k in s.get("kappa_grid", [50, 100, 200, 400])]
    try:
        rep = verify_improvement(r, loss, m, grid, config.quadrature(s.get("quadrature")),
                                 config.surface_rule(s), s.get("check_loss", True))
    except LossAuditFailed as exc:
        print(exc.report)
        print("loss fails the strict-convexity audit; perturbation not attempted")
        return DOMAIN
    write_csv(out_path(args, cfg, "perturbation.csv"),
              ["kappa", "err_R", "err_plus", "err_minus", "scaled_sum"], rep.rows())
    summary = rep.summary()
    summary["kappa_min"] = rep.kappa_min
    write_json(out_path(args, cfg, "perturbation_summary.json"), summary)
    for k, eR, ep, em, ss in rep.rows():
        print(f"kappa={fmt(k)} err_plus={fmt(ep)} err_minus={fmt(em)} scaled_sum={fmt(ss)}")
    print(f"err_R={fmt(rep.err_R)} decrement={fmt(rep.decrement)} improving_kappa={fmt(rep.improving_kappa)}")
    if rep.decrement < 0 and rep.improving_kappa is None:
        print("negative decrement but no improving kappa in the grid")
        return DOMAIN
    return OK


def cmd_closure_demo(args, cfg) -> int:
    m = config.measure(cfg)
    s = cfg["closure"]
    h = config.closure_plane(s)
    jump = serialize.num(s.get("jump", 1.0))
    if "target" in cfg:
        loss = config.loss(cfg, m.dim)
    else:
        # default: the discontinuous step itself is the target
        cfg = dict(cfg, target={"kind": "step", "normal": h.normal.tolist(), "offset": h.offset, "jump": jump},
                   loss=cfg.get("loss", {"kind": "lp", "p": 2}))
        loss = config.loss(cfg, m.dim)
    grid = [serialize.num(t) for t in s["t_grid"]]
    rows, limit = closure_curve(h, jump, grid, loss, m, config.quadrature(s.get("quadrature")))
    write_csv(out_path(args, cfg, "closure.csv"), ["t", "err", "param_norm"],
              [(r.t, r.err, r.param_norm) for r in rows])
    gaps = [(r.t, abs(r.err - limit)) for r in rows]
    C = max(t * g for t, g in gaps)
    write_json(out_path(args, cfg, "closure_summary.json"), {"limit_err": limit, "C": C})
    for r in rows:
        print(f"t={fmt(r.t)} err={fmt(r.err)} param_norm={fmt(r.param_norm)}")
    print(f"limit_err={fmt(limit)} fitted C={fmt(C)} (|err - limit| <= C/t)")
    return OK


def cmd_eval(args, cfg) -> int:
    s = cfg["eval"]
    obj = config.load_object(s["object"], cfg)
    d_in = obj.d_in
    X = config.as_points(s["points"], d_in)
    vals = evaluator(obj)(X)
    rows = [list(x) + [v] for x, v in zip(X, np.atleast_1d(vals))]
    write_csv(out_path(args, cfg, "eval.csv"), [f"x{i}" for i in range(d_in)] + ["value"], rows)
    for r in rows:
        print(",".join(fmt(v) for v in r))
    if "measure" in cfg and "target" in cfg and "loss" in cfg:
        m = config.measure(cfg)
        print(f"err={fmt(error_functional(obj, config.loss(cfg, m.dim), m))}")
    return OK


COMMANDS = {
    "validate": cmd_validate,
    "train": cmd_train,
    "oracle": cmd_oracle,
    "perturb": cmd_perturb,
    "closure-demo": cmd_closure_demo,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reluclosure", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="experiment config (JSON)")
        sp.add_argument("--config", dest="config_flag", metavar="PATH")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out-dir", default=None, help=f"output directory (default ${ENV_OUT} or ./out)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    path = args.config_flag or args.config
    if path is None:
        parser.error("a config file is required")
    try:
        cfg = config.load(path, args.command)
        return COMMANDS[args.command](args, cfg)
    except (config.ConfigError, serialize.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except (ResponseError, ClosureError, BadExponent, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN


if __name__ == "__main__":
    sys.exit(main())
