"""Command-line front end.

Every command writes one JSON report (stdout, or ``--out``).  Exit status
is 0 on success, 1 when a certification or verification step fails and
2 on bad input.  Floats are printed with 17 significant digits, so equal
inputs give byte-identical reports.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import kernels
from .bounding import check_assumption_HT, check_assumption_T, compute_mu_ell
from .core import ModelError, NotTransientError, labelled
from .modelfile import ModelFileError, parse_model
from .models import (GOLDEN_ELL, build_inventory_mdp, build_lost_sale_total_cost_mdp,
                     build_remark1_mdp, check_assumption_D, fix_inv, k_ell_bound,
                     remark1_closed_form, simulate_policy)
from .oracle import OracleTooLarge, brute_force_optimum
from .pipeline import CertificationError, reduce_average, reduce_total
from .solve import dcoe_residual, solve
from .transform import TransformError, as_discounted

COMMANDS = ("validate", "certify-t", "certify-ht", "reduce-total", "reduce-average",
            "solve", "oracle", "inventory-demo", "remark1-demo")
VERIFY_TOL = 1e-8
ORACLE_TOL = 1e-6

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


# -- report formatting -----------------------------------------------------
def _num(x):
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps(obj, indent=0):
    """JSON text with fixed 17-digit floats and insertion-ordered keys."""
    pad, inner = " " * indent, " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 2)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 2) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return json.dumps(str(obj))


def _table(m, values, n=None):
    vals = np.asarray(values, dtype=float)[: n or m.n_states]
    return labelled(m, vals)


def _policy(m, phi):
    return {s: m.actions[x][int(a)] for x, (s, a) in enumerate(zip(m.states, phi))}


def _check(cid, value, tol, passed=None, **extra):
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"id": cid, "value": value, "tol": tol, "pass": ok, **extra}


def _bound_section(rep):
    out = {"certified": rep.certified, "message": rep.message, "k_hat": rep.k_hat,
           "min_beta": rep.min_beta if rep.certified else None,
           "iterations": rep.iterations, "residual": rep.residual, "tol": rep.tol}
    if rep.k_without_ell is not None:
        out["k_hat_without_ell"] = rep.k_without_ell
    return out


def _transform_section(dp):
    return {"kind": dp.kind, "beta": dp.beta, "n_states": dp.mdp.n_states,
            "max_row_defect": dp.max_row_defect}


# -- commands ----------------------------------------------------------------
def _load(args, need_ell=False):
    if not args.model:
        raise InputError("--model is required for this command")
    pm = parse_model(args.model)
    ell = args.ell if args.ell is not None else pm.ell
    if need_ell and ell is None:
        raise InputError("no ell given (--ell or 'ell' in the model file)")
    if ell is not None:
        pm.mdp.state_index(ell)
    return pm, ell


def cmd_validate(args, report):
    pm, _ = _load(args)
    m = pm.mdp
    report["model_summary"] = {"states": m.n_states, "rows": m.n_rows,
                               "entries": int(m.indices.size),
                               "sup_row_mass": float(m.row_mass().max()),
                               "stochastic": m.is_stochastic()}
    report["checks"] = [_check("model-invariants", 0.0, 0.0, True)]
    return EXIT_OK, None


def cmd_certify_t(args, report):
    pm, _ = _load(args)
    K = args.K if args.K is not None else np.inf
    chk = check_assumption_T(pm.mdp, pm.V, K, args.tol, keep_trace=False)
    report["certification"] = _bound_section(chk.bound)
    report["certification"]["K"] = K
    report["message"] = chk.message
    report["checks"] = [_check("transient-bound", chk.bound.k_hat, K, chk.holds)]
    w = chk.bound.weight
    return (EXIT_OK if chk.holds else EXIT_FAIL), (pm.mdp, w.values if w else None)


def cmd_certify_ht(args, report):
    pm, ell = _load(args, need_ell=True)
    K = args.K if args.K is not None else np.inf
    chk = check_assumption_HT(pm.mdp, ell, K, args.tol, keep_trace=False)
    report["certification"] = _bound_section(chk.bound)
    report["certification"]["K_ell"] = K
    report["message"] = chk.message
    report["checks"] = [_check("hitting-time-bound", chk.bound.k_hat, K, chk.holds)]
    w = chk.bound.weight
    return (EXIT_OK if chk.holds else EXIT_FAIL), (pm.mdp, w.values if w else None)


def _oracle_total(m, cap, value):
    o = brute_force_optimum(m, "total", cap=cap)
    gap = float(np.max(np.abs(o.best_value - value)))
    return {"policies": o.policies_enumerated, "value": _table(m, o.best_value),
            "max_abs_gap": gap}, _check("oracle-total-value", gap, ORACLE_TOL)


def _oracle_average(m, ell, cap, w):
    o = brute_force_optimum(m, "average", ell=ell, cap=cap)
    gap = abs(o.best_value - w)
    return {"policies": o.policies_enumerated, "w": o.best_value,
            "policy": _policy(m, o.best_policy), "abs_gap": gap}, \
        _check("oracle-average-cost", gap, ORACLE_TOL)


def cmd_reduce_total(args, report):
    pm, _ = _load(args)
    m = pm.mdp
    sol = reduce_total(m, pm.V, args.beta, args.tol)
    report["certification"] = _bound_section(sol.bound)
    report["transformation"] = _transform_section(sol.problem)
    report["solution"] = {"value": _table(m, sol.value), "policy": _policy(m, sol.policy),
                          "solver_iterations": sol.solve_report.iterations}
    checks = [_check("tcoe-residual", sol.tcoe, VERIFY_TOL),
              _check("dcoe-residual", sol.dcoe[0], VERIFY_TOL),
              _check("dcoe-policy-residual", sol.dcoe[1], VERIFY_TOL)]
    if args.oracle:
        report["oracle"], c = _oracle_total(m, args.oracle_cap, sol.value)
        checks.append(c)
    report["checks"] = checks
    return _status(checks), (m, sol.value)


def cmd_reduce_average(args, report):
    pm, ell = _load(args, need_ell=True)
    m = pm.mdp
    sol = reduce_average(m, ell, args.beta, args.tol)
    report["certification"] = _bound_section(sol.bound)
    report["transformation"] = _transform_section(sol.problem)
    report["solution"] = {"w": sol.w, "h": _table(m, sol.h), "policy": _policy(m, sol.policy),
                          "solver_iterations": sol.solve_report.iterations}
    checks = [_check("acoe-residual", sol.acoe, VERIFY_TOL),
              _check("dcoe-residual", sol.dcoe[0], VERIFY_TOL),
              _check("bias-zero-at-ell", abs(sol.h[m.state_index(ell)]), 0.0)]
    if args.oracle:
        report["oracle"], c = _oracle_average(m, ell, args.oracle_cap, sol.w)
        checks.append(c)
    report["checks"] = checks
    return _status(checks), (m, sol.h)


def cmd_solve(args, report):
    pm, _ = _load(args)
    if args.beta is None:
        raise InputError("solve needs --beta (the model is solved as a discounted MDP)")
    dp = as_discounted(pm.mdp, args.beta)
    rep = solve(dp, "policy_iteration", args.tol)
    m = pm.mdp
    d = dcoe_residual(dp, rep.value, rep.greedy_policy)
    report["transformation"] = _transform_section(dp)
    report["solution"] = {"value": _table(m, rep.value), "policy": _policy(m, rep.greedy_policy),
                          "solver_iterations": rep.iterations}
    checks = [_check("dcoe-residual", d[0], VERIFY_TOL),
              _check("dcoe-policy-residual", d[1], VERIFY_TOL)]
    report["checks"] = checks
    return _status(checks), (m, rep.value)


def cmd_oracle(args, report):
    pm, ell = _load(args)
    m = pm.mdp
    criterion = args.criterion or ("average" if ell is not None and m.is_stochastic() else "total")
    if criterion == "average":
        if ell is None:
            raise InputError("average criterion needs ell")
        o = brute_force_optimum(m, "average", ell=ell, cap=args.oracle_cap)
        report["oracle"] = {"criterion": criterion, "policies": o.policies_enumerated,
                            "w": o.best_value, "policy": _policy(m, o.best_policy)}
        return EXIT_OK, None
    o = brute_force_optimum(m, "total", cap=args.oracle_cap)
    report["oracle"] = {"criterion": criterion, "policies": o.policies_enumerated,
                        "value": _table(m, o.best_value), "policy": _policy(m, o.best_policy),
                        "single_policy_attains_minimum": o.consistent}
    return EXIT_OK, (m, o.best_value)


def cmd_inventory_demo(args, report):
    spec = fix_inv()
    m = build_inventory_mdp(spec)
    ok_d, gamma = check_assumption_D(spec)
    bound = k_ell_bound(spec)
    mu = compute_mu_ell(m, "0_L", args.tol, keep_trace=False)
    report["inventory"] = {"capacity": spec.capacity, "max_order": spec.max_order,
                           "demand_pmf": {str(k): v for k, v in spec.demand_pmf.items()},
                           "fixed_cost": spec.fixed_cost, "unit_cost": spec.unit_cost,
                           "holding_rate": spec.holding}
    report["certification"] = _bound_section(mu)
    report["certification"]["mu_ell"] = _table(m, mu.weight.values) if mu.weight else None
    report["certification"]["gamma"] = gamma
    report["certification"]["k_ell_bound"] = bound
    checks = [_check("demand-tail-positive", gamma, 0.0, ok_d),
              _check("mu-ell-within-closed-form-bound", mu.k_hat, bound, mu.k_hat <= bound)]
    try:
        sol = reduce_average(m, "0_L", args.beta, args.tol)
    except CertificationError as exc:
        report["message"] = str(exc)
        report["checks"] = checks
        return EXIT_FAIL, None
    o = brute_force_optimum(m, "average", ell="0_L", cap=args.oracle_cap)
    sim = simulate_policy(m, sol.policy, "0_L", args.horizon, args.replications, args.seed)
    report["transformation"] = _transform_section(sol.problem)
    report["solution"] = {"w": sol.w, "h": _table(m, sol.h), "policy": _policy(m, sol.policy)}
    report["oracle"] = {"policies": o.policies_enumerated, "w": o.best_value}
    report["simulation"] = {"seed": args.seed, "horizon": args.horizon,
                            "replications": args.replications, "mean": sim.mean,
                            "stderr": sim.stderr}
    sim_gap = abs(sim.mean - sol.w)
    checks += [_check("acoe-residual", sol.acoe, VERIFY_TOL),
               _check("oracle-average-cost", abs(o.best_value - sol.w), ORACLE_TOL),
               _check("simulation-within-3se", sim_gap, 3 * sim.stderr,
                      sim_gap <= 3 * sim.stderr)]

    lost = build_lost_sale_total_cost_mdp(spec)
    chk = check_assumption_T(lost, None, bound, args.tol, keep_trace=False)
    tot = reduce_total(lost, None, None, args.tol)
    ot = brute_force_optimum(lost, "total", cap=args.oracle_cap)
    gap = float(np.max(np.abs(ot.best_value - tot.value)))
    report["lost_sale_total_cost"] = {"k_hat": chk.bound.k_hat, "value": _table(lost, tot.value),
                                      "policy": _policy(lost, tot.policy),
                                      "oracle_value": _table(lost, ot.best_value)}
    checks += [_check("lost-sale-transient-bound", chk.bound.k_hat, bound, chk.holds),
               _check("lost-sale-tcoe-residual", tot.tcoe, VERIFY_TOL),
               _check("lost-sale-oracle-total-value", gap, ORACLE_TOL)]
    report["checks"] = checks
    return _status(checks), (m, sol.h)


def cmd_remark1_demo(args, report):
    grid = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, GOLDEN_ELL - 1e-3]
    m = build_remark1_mdp(grid)
    mu = compute_mu_ell(m, "ell", args.tol, keep_trace=False)
    report["certification"] = _bound_section(mu)
    if mu.weight is None:
        report["checks"] = []
        return EXIT_FAIL, None
    golden = remark1_closed_form(grid)
    err = float(np.max(np.abs(mu.weight.values - golden)))
    gap = float(mu.weight.values[-2] - mu.weight.values[-1])
    report["grid"] = grid
    report["mu_ell"] = _table(m, mu.weight.values)
    report["closed_form"] = _table(m, golden)
    report["discontinuity_gap"] = gap
    checks = [_check("golden-values", err, 1e-10),
              _check("discontinuity-gap", gap, 0.9, gap >= 0.9)]
    report["checks"] = checks
    return _status(checks), (m, mu.weight.values)


HANDLERS = {"validate": cmd_validate, "certify-t": cmd_certify_t, "certify-ht": cmd_certify_ht,
            "reduce-total": cmd_reduce_total, "reduce-average": cmd_reduce_average,
            "solve": cmd_solve, "oracle": cmd_oracle, "inventory-demo": cmd_inventory_demo,
            "remark1-demo": cmd_remark1_demo}


def _status(checks):
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="mdpreduce", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--model", help="model file path or bundled fixture name")
    p.add_argument("--beta", type=float, default=None,
                   help="discount factor (default: smallest admissible)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--ell", default=None, help="marked state label")
    p.add_argument("--K", type=float, default=None, help="bound to certify against")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle", action="store_true", help="compare with brute force")
    p.add_argument("--oracle-cap", type=int, default=10**6)
    p.add_argument("--criterion", choices=("total", "average"), default=None)
    p.add_argument("--horizon", type=int, default=100_000)
    p.add_argument("--replications", type=int, default=20)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--csv", help="write the value table here")
    return p


def _write_csv(path, m, values):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state", "value"])
    for s, v in zip(m.states, values):
        w.writerow([s, _num(v)])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def run(argv=None):
    """Parse ``argv``, run the command and return ``(report, exit status)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return {"status": "input error", "message": "bad arguments"}, \
            EXIT_INPUT if exc.code else EXIT_OK
    report = {"command": args.command, "model": args.model,
              "inputs": {"beta": args.beta, "tol": args.tol, "ell": args.ell,
                         "seed": args.seed, "oracle_cap": args.oracle_cap}}
    table = None
    try:
        if not args.tol > 0:
            raise InputError("--tol must be positive")
        code, table = HANDLERS[args.command](args, report)
    except (InputError, ModelFileError, ModelError, TransformError, OracleTooLarge,
            ValueError) as exc:
        code = EXIT_INPUT
        report["message"] = str(exc)
    except CertificationError as exc:
        code = EXIT_FAIL
        report["certification"] = _bound_section(exc.report)
        report["message"] = str(exc)
    except NotTransientError as exc:
        code = EXIT_FAIL
        report["message"] = str(exc)
    report["status"] = {EXIT_OK: "ok", EXIT_FAIL: "failed", EXIT_INPUT: "input error"}[code]
    if args.csv and table is not None and table[1] is not None:
        _write_csv(args.csv, table[0], table[1])
    text = dumps(report) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return report, code


def main(argv=None):
    t0 = time.perf_counter()
    _, code = run(argv)
    if code == EXIT_FAIL:
        print(f"mdpreduce: check failed ({time.perf_counter() - t0:.2f}s, "
              f"backend {kernels.BACKEND})", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
