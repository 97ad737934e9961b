"""Command-line front end: ``ctmdp-opt COMMAND MODEL [options]``.

Exit status is 0 on success, 1 when a model, scheduler or requested
computation is rejected, and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .greedy import greed_bound, greedy_analysis
from .model import (
    ModelError,
    absorb_goal,
    check,
    format_rational,
    load_model,
    model_to_dict,
    parse_rational,
    serialize_model,
    validate,
)
from .reachability import ValueInterval, evaluate, step_bounded
from .schedulers import (
    Positional,
    SchedulerError,
    check_scheduler,
    load_scheduler,
    scheduler_to_dict,
    serialize_scheduler,
)
from .simulate import estimate
from .synthesis import check_saddle, determinise, synth_enumerate, synth_uniform_dp
from .uniformise import is_uniform, lift_scheduler, prune, uniformise


# -- argument types ------------------------------------------------------------

def _time(text: str) -> Fraction:
    try:
        t = parse_rational(text, "time")
    except ModelError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if t < 0:
        raise argparse.ArgumentTypeError("time must be >= 0")
    return t


def _positive_float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not x > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return x


def _confidence(text: str) -> float:
    x = _positive_float(text)
    if not x < 1:
        raise argparse.ArgumentTypeError("confidence must lie in (0, 1)")
    return x


def _natural(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return n


def _positive_int(text: str) -> int:
    n = _natural(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


# -- formatting ----------------------------------------------------------------

def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _interval_text(v: ValueInterval) -> str:
    return f"[{_num(v.lo)}, {_num(v.hi)}]"


def _interval_json(v: ValueInterval) -> dict:
    return {"lo": v.lo, "hi": v.hi}


def _value(x) -> dict:
    if isinstance(x, Fraction):
        return {"value": format_rational(x)}
    return {"value": x}


def _emit(args, text_lines, doc) -> None:
    if args.format == "json":
        print(json.dumps(doc, indent=2))
    else:
        print("\n".join(text_lines))


# -- shared loading ------------------------------------------------------------

def _load(args):
    model = load_model(args.model, check_valid=False)
    if getattr(args, "absorb_goal", False):
        model = absorb_goal(model)
    return check(model)


def _scheduler(args, model, required=True):
    if args.scheduler is None:
        if required:
            raise SchedulerError("this command needs --scheduler")
        return None
    sched = load_scheduler(args.scheduler)
    check_scheduler(model, sched)
    return sched


def _greedy_target(model):
    """The model itself when uniform, else its uniformisation."""
    lam = is_uniform(model)
    if lam is not None:
        return model, lam, None
    u = uniformise(model)
    return u.uniform_model, u.rate, u


# -- commands ------------------------------------------------------------------

def cmd_validate(args) -> int:
    model = load_model(args.model, check_valid=False)
    if args.absorb_goal:
        model = absorb_goal(model)
    problems = validate(model)
    doc = {"valid": not problems, "errors": problems, "name": model.name}
    if problems:
        lines = [f"invalid: {p}" for p in problems]
    else:
        lines = [
            f"valid: {model.name} ({len(model.locations)} locations, "
            f"{len(model.actions)} actions, {len(model.transitions)} transitions)"
        ]
    _emit(args, lines, doc)
    return 1 if problems else 0


def cmd_uniformise(args) -> int:
    model = _load(args)
    u = uniformise(model)
    out = prune(u.uniform_model) if args.prune else u.uniform_model
    if args.format == "json":
        _emit(args, [], {"rate": _value(u.rate), "model": model_to_dict(out)})
    else:
        print(serialize_model(out))
    return 0


def cmd_greedy(args) -> int:
    model = _load(args)
    target, lam, _ = _greedy_target(model)
    ga = greedy_analysis(target)
    shown = [l for l in model.location_ids if l not in model.goal]
    mu = "none" if ga.discriminator is None else format_rational(ga.discriminator)
    lines = [
        f"lambda = {format_rational(lam)}",
        f"mu = {mu}",
        "greedy: " + ", ".join(f"{l} -> {ga.standard_greedy[l]}" for l in shown),
    ]
    ties = [l for l in shown if len(ga.greedy_actions[l]) > 1]
    if ties:
        lines.append("greedy sets: " + ", ".join(f"{l} -> {{{', '.join(ga.greedy_actions[l])}}}" for l in ties))
    doc = {
        "lambda": _value(lam),
        "mu": None if ga.discriminator is None else _value(ga.discriminator),
        "greedy": {l: ga.standard_greedy[l] for l in shown},
        "greedy_actions": {l: list(ga.greedy_actions[l]) for l in shown},
    }
    _emit(args, lines, doc)
    return 0


def cmd_bound(args) -> int:
    model = _load(args)
    target, lam, _ = _greedy_target(model)
    ga = greedy_analysis(target)
    b = greed_bound(lam, ga.discriminator, args.time)
    _emit(
        args,
        [f"coarse = {b.coarse}, refined = {b.refined}"],
        {"coarse": _value(b.coarse), "refined": _value(b.refined)},
    )
    return 0


def _default_scheduler(model):
    target, _, _ = _greedy_target(model)
    greedy = greedy_analysis(target).standard_greedy
    return Positional({l: greedy[l] for l in model.location_ids})


def cmd_evaluate(args) -> int:
    model = _load(args)
    sched = _scheduler(args, model, required=False) or _default_scheduler(model)
    v = evaluate(model, sched, args.time, args.epsilon, exact=args.exact_steps)
    _emit(args, [f"value = {_interval_text(v)}"], {"value": _interval_json(v), "slack": v.slack})
    return 0


def cmd_step_bounded(args) -> int:
    model = _load(args)
    sched = _scheduler(args, model, required=False) or _default_scheduler(model)
    target = model
    if is_uniform(model) is None:
        u = uniformise(model)
        target, sched = u.uniform_model, lift_scheduler(sched, u)
    v = step_bounded(target, sched, args.time, args.steps, args.epsilon, exact=args.exact_steps)
    _emit(args, [f"value = {_interval_text(v)}"], {"value": _interval_json(v), "slack": v.slack})
    return 0


def cmd_simulate(args) -> int:
    model = _load(args)
    sched = _scheduler(args, model, required=False) or _default_scheduler(model)
    est = estimate(model, sched, args.time, args.samples, args.seed, args.confidence, args.workers)
    lines = [
        f"estimate = {est.mean!r} +- {est.half_width!r}",
        f"interval = [{_num(est.lo)}, {_num(est.hi)}]",
        f"samples = {est.samples}, seed = {est.seed}, confidence = {est.confidence!r}",
    ]
    doc = {
        "mean": _value(est.mean),
        "half_width": _value(est.half_width),
        "interval": {"lo": est.lo, "hi": est.hi},
        "samples": est.samples,
        "seed": est.seed,
        "confidence": est.confidence,
    }
    _emit(args, lines, doc)
    return 0


def _write_scheduler(args, sched) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(serialize_scheduler(sched) + "\n")


def cmd_synthesize(args) -> int:
    model = _load(args)
    method = args.method or ("dp" if is_uniform(model) is not None else "enumerate")
    if method == "dp":
        if is_uniform(model) is None:
            raise ModelError("dp synthesis needs a uniform model; use --method enumerate")
        res = synth_uniform_dp(model, args.time, args.epsilon)
    else:
        res = synth_enumerate(model, args.time, args.epsilon, args.preamble)
    _write_scheduler(args, res.scheduler)
    lines = [
        f"method = {res.method}",
        f"value = {_interval_text(res.value)}",
        f"preamble depth = {res.preamble_depth}",
        f"greed bound: coarse = {res.greed_bound_used.coarse}, refined = {res.greed_bound_used.refined}",
        f"candidates = {res.candidates}, ties = {len(res.ties)}, complete = {str(res.complete).lower()}",
    ]
    if not args.output:
        lines.append(serialize_scheduler(res.scheduler))
    doc = {
        "method": res.method,
        "value": _interval_json(res.value),
        "preamble_depth": _value(res.preamble_depth),
        "greed_bound": {
            "coarse": _value(res.greed_bound_used.coarse),
            "refined": _value(res.greed_bound_used.refined),
        },
        "candidates": res.candidates,
        "ties": len(res.ties),
        "complete": res.complete,
        "scheduler": scheduler_to_dict(res.scheduler),
    }
    _emit(args, lines, doc)
    return 0


def cmd_saddle(args) -> int:
    model = _load(args)
    rep = check_saddle(model, args.time, args.preamble or 0, args.epsilon)
    lines = [
        f"sup_inf = {_interval_text(rep.sup_inf)}",
        f"inf_sup = {_interval_text(rep.inf_sup)}",
        f"gap = {_num(rep.gap)}",
    ]
    doc = {
        "sup_inf": _interval_json(rep.sup_inf),
        "inf_sup": _interval_json(rep.inf_sup),
        "gap": _value(rep.gap),
    }
    _emit(args, lines, doc)
    return 0


def cmd_determinise(args) -> int:
    model = _load(args)
    sched = _scheduler(args, model)
    if not hasattr(sched, "preamble"):
        sched_out = sched
    else:
        sched_out = determinise(model, sched, args.time, args.epsilon)
    before = evaluate(model, sched, args.time, args.epsilon)
    after = evaluate(model, sched_out, args.time, args.epsilon)
    _write_scheduler(args, sched_out)
    lines = [f"before = {_interval_text(before)}", f"after = {_interval_text(after)}"]
    if not args.output:
        lines.append(serialize_scheduler(sched_out))
    doc = {
        "before": _interval_json(before),
        "after": _interval_json(after),
        "scheduler": scheduler_to_dict(sched_out),
    }
    _emit(args, lines, doc)
    return 0


COMMANDS = {
    "validate": (cmd_validate, "check a model document"),
    "uniformise": (cmd_uniformise, "print the uniformised model"),
    "greedy": (cmd_greedy, "greedy actions and discriminator"),
    "bound": (cmd_bound, "coarse and refined greed bounds"),
    "evaluate": (cmd_evaluate, "time-bounded reachability of a scheduler"),
    "step-bounded": (cmd_step_bounded, "time- and step-bounded reachability"),
    "simulate": (cmd_simulate, "Monte-Carlo estimate with a confidence interval"),
    "synthesize": (cmd_synthesize, "optimal scheduler or strategy pair"),
    "saddle": (cmd_saddle, "compare max-min and min-max game values"),
    "determinise": (cmd_determinise, "replace randomised decisions by pure ones"),
}

# which optional flags each command accepts, beyond --format and --absorb-goal
_FLAGS = {
    "validate": set(),
    "uniformise": {"prune"},
    "greedy": set(),
    "bound": {"time!"},
    "evaluate": {"scheduler", "time!", "epsilon", "exact_steps"},
    "step-bounded": {"scheduler", "time!", "steps!", "epsilon", "exact_steps"},
    "simulate": {"scheduler", "time!", "samples", "seed", "confidence", "workers"},
    "synthesize": {"time!", "epsilon", "method", "preamble", "output"},
    "saddle": {"time!", "epsilon", "preamble"},
    "determinise": {"scheduler!", "time!", "epsilon", "output"},
}


def _add_flag(p: argparse.ArgumentParser, name: str) -> None:
    required = name.endswith("!")
    name = name.rstrip("!")
    if name == "scheduler":
        p.add_argument("--scheduler", required=required, help="scheduler document (.sched)")
    elif name == "time":
        p.add_argument("--time", type=_time, required=required, help="time bound, decimal or p/q")
    elif name == "epsilon":
        p.add_argument("--epsilon", type=_positive_float, default=1e-9)
    elif name == "exact_steps":
        p.add_argument("--exact-steps", action="store_true", help="exact rational step recursion")
    elif name == "prune":
        p.add_argument("--prune", action="store_true", help="drop locations unreachable from the initial ones")
    elif name == "steps":
        p.add_argument("--steps", type=_natural, required=required)
    elif name == "samples":
        p.add_argument("--samples", type=_positive_int, default=100_000)
    elif name == "seed":
        p.add_argument("--seed", type=_natural, default=0)
    elif name == "confidence":
        p.add_argument("--confidence", type=_confidence, default=0.99)
    elif name == "workers":
        p.add_argument("--workers", type=_positive_int, default=1)
    elif name == "method":
        p.add_argument("--method", choices=("dp", "enumerate"))
    elif name == "preamble":
        p.add_argument("--preamble", type=_natural)
    elif name == "output":
        p.add_argument("--output", help="also write the scheduler document here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctmdp-opt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("model", help="model document (.ctmdp)")
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--absorb-goal", action="store_true", help="make goal locations absorbing first")
        for flag in sorted(_FLAGS[name]):
            _add_flag(p, flag)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except (ValueError, OSError) as exc:
        # ModelError, SchedulerError and the synthesis budget are ValueErrors
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
