"""Command-line frontend for the planning, learning and translation pipeline.

All probabilities cross this boundary as exact "num/den" strings; outputs are
byte-deterministic for identical inputs, flags and seeds.  Exit codes: 0
success, 2 infeasible constrained problem, 3 validation or input error.
"""

import argparse
import json
import sys
from fractions import Fraction

from . import lagrange as lagmod
from .evaluation import EvaluationError, evaluate
from .fixtures import fixture_names, get_fixture
from .graph import classify, mec_decompose
from .learn import default_schedule, run_experiment, write_curve_csv
from .model import (LabeledMDP, ModelError, RabinAutomaton, build_product,
                    format_fraction, parse_fraction, validate)
from .rewardmachine import (RewardMachineTranslation, commitment_policy,
                            enumerate_two_memory_policies,
                            independent_translation_counterexample,
                            machine_limit_average, simulate_limit_average,
                            stratified_limit_average)
from .synthesis import MixturePolicy, SynthesisError, plan_product, policy_from_point

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _parse_threshold(text):
    try:
        p = parse_fraction(text)
    except (ModelError, ValueError) as exc:
        raise CliError(f"bad threshold {text!r}: {exc}")
    if not Fraction(0) <= p <= Fraction(1):
        raise CliError(f"threshold {text!r} outside [0, 1]")
    return p


def _load_fixture(args):
    try:
        return get_fixture(args.fixture)
    except KeyError:
        names = ", ".join(fixture_names())
        raise CliError(f"unknown fixture {args.fixture!r} (known: {names})")


def _load_inputs(args):
    """Resolve --fixture or the --mdp/--objective/--constraint triple into
    (product, mdp, objective automaton, constraint automaton, default p)."""
    if args.fixture:
        fx = _load_fixture(args)
        return fx.product(), fx.mdp, fx.objective, fx.constraint, fx.default_threshold
    if not (args.mdp and args.objective and args.constraint):
        raise CliError("provide --fixture or all of --mdp/--objective/--constraint")
    try:
        mdp = LabeledMDP.from_file(args.mdp)
        obj = RabinAutomaton.from_file(args.objective)
        con = RabinAutomaton.from_file(args.constraint)
    except (OSError, ModelError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load inputs: {exc}")
    report = validate(mdp)
    if not report.ok:
        raise CliError("invalid MDP: " + "; ".join(report.violations))
    return build_product(mdp, obj, con), mdp, obj, con, None


def _threshold(args, default):
    if args.threshold is not None:
        return _parse_threshold(args.threshold)
    if default is not None:
        return default
    raise CliError("no --threshold given and the input has no default")


def _emit(payload, out_path):
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_plan(args):
    product, _, _, _, default_p = _load_inputs(args)
    p = _threshold(args, default_p)
    result = plan_product(product, p)
    if result.status != "optimal":
        print(f"constrained problem is {result.status}", file=sys.stderr)
        return EXIT_INFEASIBLE
    report = evaluate(product, result.policy)
    payload = result.to_dict()
    payload["evaluation"] = report.to_dict()
    if args.policy:
        result.policy.save(args.policy)
    _emit(payload, args.out)
    return EXIT_OK


def cmd_evaluate(args):
    product, _, _, _, _ = _load_inputs(args)
    if not args.policy:
        raise CliError("evaluate needs --policy")
    try:
        mix = MixturePolicy.from_file(args.policy)
        report = evaluate(product, mix)
    except (OSError, ValueError, KeyError, EvaluationError) as exc:
        raise CliError(f"cannot evaluate policy: {exc}")
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def _parse_schedule(args):
    if args.schedule:
        try:
            schedule = sorted({int(tok) for tok in args.schedule.split(",")})
        except ValueError:
            raise CliError(f"bad schedule {args.schedule!r}")
        if any(k < 1 for k in schedule):
            raise CliError("schedule entries must be positive")
    else:
        schedule = default_schedule()
    if args.steps is not None:
        schedule = [k for k in schedule if k <= args.steps]
    return schedule


def cmd_learn(args):
    _, mdp, obj, con, default_p = _load_inputs(args)
    if mdp is None:
        raise CliError("learning needs an MDP-level input, not a direct product")
    p = _threshold(args, default_p)
    schedule = _parse_schedule(args)
    records = run_experiment(mdp, obj, con, p, schedule,
                             seeds=range(args.seeds),
                             reset_period=args.reset_period)
    if not args.out:
        raise CliError("learn needs --out for the curve CSV")
    write_curve_csv(records, args.out)
    return EXIT_OK


def _counterexample_report():
    bundle = independent_translation_counterexample()
    switch_once = {(0, "s0"): "b", (0, "s1"): "a", (1, "s0"): "b", (1, "s1"): "a"}
    identity = {(m, s, a): m for m in (0, 1) for s in ("s0", "s1")
                for a in bundle.actions}
    obj_avg, con_avg = machine_limit_average(bundle, switch_once, identity)
    feasible_but_unrewarded = 0
    for selector, updater in enumerate_two_memory_policies(bundle):
        a, b = machine_limit_average(bundle, selector, updater)
        if b == 1 and a > 0:
            feasible_but_unrewarded += 1
    return {
        "switch_once_then_stay": {
            "objective_machine": format_fraction(obj_avg),
            "constraint_machine": format_fraction(con_avg),
        },
        "policies_with_constraint_average_1_and_positive_objective":
            feasible_but_unrewarded,
    }


def cmd_rm(args):
    if args.counterexample:
        _emit(_counterexample_report(), args.out)
        return EXIT_OK
    product, _, _, _, default_p = _load_inputs(args)
    p = _threshold(args, default_p)
    result = plan_product(product, p)
    if result.status != "optimal":
        print(f"constrained problem is {result.status}", file=sys.stderr)
        return EXIT_INFEASIBLE
    translation = RewardMachineTranslation(product)
    lam = result.lam
    totals = [Fraction(0), Fraction(0)]
    for point, weight, tag in ((result.point1, lam, "1"),
                               (result.point2, 1 - lam, "2")):
        if weight == 0:
            continue
        base = policy_from_point(result.decomposition, product, point)
        policy = commitment_policy(product, translation, result.decomposition,
                                   point, base)
        if args.trace and tag == "1":
            simulate_limit_average(product, policy, translation, args.horizon,
                                   f"{args.seed}:trace", trace_path=args.trace)
        avg_a, avg_b = stratified_limit_average(
            product, policy, translation, args.horizon, f"{args.seed}:{tag}",
            base.act(product.initial))
        totals[0] += weight * avg_a
        totals[1] += weight * avg_b
    _emit({
        "horizon": args.horizon,
        "seed": str(args.seed),
        "average_objective_reward": format_fraction(totals[0]),
        "average_constraint_reward": format_fraction(totals[1]),
        "planner_value": format_fraction(result.value),
    }, args.out)
    return EXIT_OK


def cmd_lagrange(args):
    product, mdp, _, _, _ = _load_inputs(args)
    if args.multiplier is not None:
        lam = parse_fraction(args.multiplier)
        if lam < 0:
            raise CliError("multiplier must be nonnegative")
    else:
        if mdp is not None:
            p_min = mdp.p_min()
        else:
            p_min = min(p for row in product.kernel.values() for _, p in row)
        if p_min >= 1:
            p_min = Fraction(1, 2)
        nobj = len(product.obj_aut.states) if product.obj_aut else 1
        ncon = len(product.con_aut.states) if product.con_aut else 1
        lam = lagmod.lambda_bound(p_min, product.mdp_state_count(), nobj, ncon)
    dec = classify(mec_decompose(product), product)
    try:
        result = lagmod.solve_weighted(product, dec, lam)
    except (lagmod.LagrangeError, SynthesisError) as exc:
        raise CliError(f"weighted solve failed: {exc}")
    if result.status != "optimal":
        print(f"weighted problem is {result.status}", file=sys.stderr)
        return EXIT_INFEASIBLE
    gap = lagmod.check_feasibility_gap(result.policy, product, lam)
    payload = result.to_dict()
    payload["feasibility"] = gap.to_dict()
    if result.constraint_prob < 1:
        print("warning: weighted optimum does not satisfy the constraint "
              "almost surely", file=sys.stderr)
    _emit(payload, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omegaplan",
        description="Exact constrained planning, learning and reward-machine "
                    "translation for MDPs with omega-regular objectives.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--fixture", help="built-in example by name "
                       f"({', '.join(fixture_names())})")
        p.add_argument("--mdp", help="MDP JSON file")
        p.add_argument("--objective", help="objective automaton JSON file")
        p.add_argument("--constraint", help="constraint automaton JSON file")
        p.add_argument("--threshold", help='probability threshold "num/den"')
        p.add_argument("--out", help="output file (default: stdout)")

    p_plan = sub.add_parser("plan", help="synthesise a constrained-optimal policy")
    add_common(p_plan)
    p_plan.add_argument("--policy", help="where to write the policy JSON")
    p_plan.set_defaults(func=cmd_plan)

    p_eval = sub.add_parser("evaluate", help="exactly evaluate a policy file")
    add_common(p_eval)
    p_eval.add_argument("--policy", help="policy JSON to evaluate")
    p_eval.set_defaults(func=cmd_evaluate)

    p_learn = sub.add_parser("learn", help="model-based learning convergence curves")
    add_common(p_learn)
    p_learn.add_argument("--seeds", type=int, default=20,
                         help="number of independent seeds (0..n-1)")
    p_learn.add_argument("--schedule", help="comma-separated sample counts")
    p_learn.add_argument("--steps", type=int,
                         help="cap the schedule at this many samples")
    p_learn.add_argument("--reset-period", type=int, default=10,
                         help="exploration resets to the initial state this often")
    p_learn.set_defaults(func=cmd_learn)

    p_rm = sub.add_parser("rm", help="reward-machine translation and simulation")
    add_common(p_rm)
    p_rm.add_argument("--horizon", type=int, default=10000)
    p_rm.add_argument("--seed", default="0")
    p_rm.add_argument("--trace", help="write a step trace CSV here")
    p_rm.add_argument("--counterexample", action="store_true",
                      help="report on the independent-translation counterexample")
    p_rm.set_defaults(func=cmd_rm)

    p_lag = sub.add_parser("lagrange", help="weighted unconstrained planning")
    add_common(p_lag)
    p_lag.add_argument("--multiplier", help='multiplier "num/den" '
                       "(default: the model-knowledge bound)")
    p_lag.set_defaults(func=cmd_lagrange)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ModelError, SynthesisError, EvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
