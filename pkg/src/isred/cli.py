"""Command-line entry point.

Exit status: 0 on success or a certified verdict, 1 on a refuted or
inconclusive verdict or a failed claim, 2 on usage, parse or structural errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import harness, lq, scenarios, serialization as ser
from .core import DEFAULT_SEED, validate_partial_nestedness
from .equilibria import (
    Concept,
    DeviationClass,
    Tolerances,
    Verdict,
    best_response_iteration,
    solve_affine_stationary,
    verify_equilibrium,
)
from .errors import ArgumentError, IsredError
from .model import AffinePolicy, GameSpec, PolicyProfile, Variant
from .reductions import (
    ReductionKind,
    certify,
    control_sharing_expand,
    control_sharing_reduce,
    embed_profile,
    policy_dependent_reduce,
    policy_independent_reduce,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass
class CliConfig:
    """Options shared by every subcommand."""

    command: str
    inputs: list = field(default_factory=list)
    output: str = None
    seed: int = DEFAULT_SEED
    certify_tol: float = 1e-8
    refute_tol: float = 1e-6
    deviation: str = "polynomial"
    degree: int = 3
    directions: int = 4
    fmt: str = "human"

    def __post_init__(self):
        if self.certify_tol <= 0 or self.refute_tol <= 0:
            raise ArgumentError("tolerances must be positive")
        if self.fmt not in ("human", "machine"):
            raise ArgumentError("format must be 'human' or 'machine'")

    @property
    def tolerances(self) -> Tolerances:
        return Tolerances(self.certify_tol, self.refute_tol)

    def deviation_class(self) -> DeviationClass:
        return DeviationClass(self.deviation, self.degree, self.directions, self.seed)


def _env_seed():
    raw = os.environ.get("ISRED_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw, 0)
    except ValueError:
        raise ArgumentError(f"ISRED_SEED={raw!r} is not an integer") from None


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", dest="fmt", choices=("human", "machine"), default="human")
    common.add_argument("-o", "--output", help="write the machine-readable document here")
    common.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="default: ISRED_SEED or 0x5EED")

    p = argparse.ArgumentParser(prog="isred", description="Information-structure reductions for stochastic games.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("describe", parents=[common], help="summarize a game or multi-stage model file")
    d.add_argument("input")

    r = sub.add_parser("reduce", parents=[common], help="apply a reduction to a game (and profile)")
    r.add_argument("--kind", choices=("pi", "pd", "cs"), required=True)
    r.add_argument("game")
    r.add_argument("profile", nargs="?")
    r.add_argument("--game-out", help="also write the reduced game document here")
    r.add_argument("--profile-out", help="also write the reduced profile document here")

    s = sub.add_parser("solve", parents=[common], help="compute a profile")
    s.add_argument("--method", choices=("stationary", "best-response", "feedback", "open-loop"), required=True)
    s.add_argument("input", help="game file (stationary, best-response) or multi-stage model file")
    s.add_argument("--tag", help="information tag for model inputs (open-loop default: OL)")
    s.add_argument("--init", help="initial profile for best-response iteration (default: zero policies)")
    s.add_argument("--max-iter", type=int, default=200)
    s.add_argument("--gauss-seidel", action="store_true")
    s.add_argument("--profile-out", help="also write the profile document here")
    s.add_argument("--game-out", help="also write the game the profile is defined on")

    v = sub.add_parser("verify", parents=[common], help="verify an equilibrium concept")
    v.add_argument("--concept", choices=[c.value for c in Concept], required=True)
    v.add_argument("game", help="game file, or a reduction/solution document holding a game and profile")
    v.add_argument("profile", nargs="?")
    v.add_argument("--deviation", choices=("affine", "polynomial"), default="polynomial")
    v.add_argument("--degree", type=int, default=3)
    v.add_argument("--directions", type=int, default=4)
    v.add_argument("--certify-tol", type=float, default=1e-8)
    v.add_argument("--refute-tol", type=float, default=1e-6)

    h = sub.add_parser("reproduce", parents=[common], help="run the scenario harness")
    h.add_argument("name", nargs="?")
    h.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a scenario parameter")
    h.add_argument("--list", action="store_true", help="list scenarios and exit")

    e = sub.add_parser("export", parents=[common], help="write a built-in scenario as files")
    e.add_argument("name", choices=sorted(EXPORTS))
    e.add_argument("directory")
    e.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return p


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------


def _emit(cfg, tree, human):
    if cfg.output:
        ser.write_document(cfg.output, tree)
    if cfg.fmt == "machine":
        sys.stdout.write(ser.dumps(tree))
    else:
        sys.stdout.write(human.rstrip("\n") + "\n")


def _full(a):
    return np.array2string(np.asarray(a), precision=17, floatmode="unique", separator=", ")


def _load(path, expect=None):
    obj = ser.read_document(path)
    if expect is not None and not isinstance(obj, expect):
        names = expect.__name__ if isinstance(expect, type) else " or ".join(t.__name__ for t in expect)
        raise ser.FormatError(str(path), f"expected a {names} document")
    return obj


def _load_game_and_profile(game_path, profile_path):
    obj = ser.read_document(game_path)
    profile = None
    if isinstance(obj, dict):
        if "game" not in obj:
            raise ser.FormatError(str(game_path), "document holds no game")
        game = ser.tree_to_game(obj["game"])
        if obj.get("profile") is not None:
            profile = ser.tree_to_profile(obj["profile"])
    elif isinstance(obj, GameSpec):
        game = obj
    else:
        raise ser.FormatError(str(game_path), "expected a game document")
    if profile_path is not None:
        profile = _load(profile_path, PolicyProfile)
    return game, profile


def _overrides(items):
    out = {}
    for item in items:
        if "=" not in item:
            raise ArgumentError(f"override {item!r} must look like KEY=VALUE")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# --------------------------------------------------------------------------
# describe
# --------------------------------------------------------------------------


def _describe_game(game):
    lines = [f"game {game.name or '<unnamed>'}: {game.family} primitives, variant {game.variant.value}"
             + (", zero-sum" if game.zero_sum else "")]
    if game.family == "gaussian":
        lines.append("primitive blocks: " + ", ".join(f"{n}[{k}]" for n, k in game.primitives.blocks))
    else:
        lines.append("primitive blocks: " + ", ".join(f"{n}[{len(m)}]" for n, m in game.primitives.blocks))
    for d, dm in enumerate(game.dms):
        obs = game.observations[d]
        lines.append(f"  DM {dm.name} {dm.label}: action size {dm.size}, info dim {game.info_dim(d)}, "
                     f"precedence {[game.dms[j].name for j in obs.precedence]}, "
                     f"forward {[game.dms[j].name for j in obs.forward]}")
    nest = validate_partial_nestedness(game)
    lines.append(f"partially nested: {'yes' if nest.nested else 'no'}")
    for a, b in nest.violations:
        lines.append(f"  DM {a} is affected by {b} without holding its information")
    tree = {
        "format": ser.DESCRIPTION, "name": game.name, "family": game.family, "variant": game.variant.value,
        "zero_sum": bool(game.zero_sum), "n_players": game.n_players,
        "dms": [{"name": dm.name, "player": dm.player, "stage": dm.stage, "size": dm.size,
                 "info_dim": game.info_dim(d)} for d, dm in enumerate(game.dms)],
        "partially_nested": bool(nest.nested),
        "violations": [[list(a), list(b)] for a, b in nest.violations],
    }
    return tree, "\n".join(lines)


def _describe_lq(model):
    lines = [f"multi-stage model {model.name or '<unnamed>'}: horizon {model.horizon}, {model.n_players} players, "
             f"state size {model.n_state}, action sizes {list(model.action_sizes)}",
             f"{'deterministic' if model.deterministic else 'stochastic'} dynamics, "
             f"{'with' if model.has_measurements else 'without'} measurements"
             + (", zero-sum" if model.zero_sum else "")]
    tree = {"format": ser.DESCRIPTION, "name": model.name, "family": "multi-stage",
            "horizon": model.horizon, "n_players": model.n_players, "n_state": model.n_state,
            "action_sizes": list(model.action_sizes), "deterministic": model.deterministic,
            "measurements": model.has_measurements, "zero_sum": bool(model.zero_sum)}
    return tree, "\n".join(lines)


def cmd_describe(cfg, args):
    obj = _load(args.input, (GameSpec, lq.LqStageModel))
    tree, text = _describe_game(obj) if isinstance(obj, GameSpec) else _describe_lq(obj)
    _emit(cfg, tree, text)
    return EXIT_OK


# --------------------------------------------------------------------------
# reduce
# --------------------------------------------------------------------------


def cmd_reduce(cfg, args):
    game, profile = _load_game_and_profile(args.game, args.profile)
    out_profile = None
    if args.kind == "pi":
        reduced, cert = policy_independent_reduce(game)
        out_profile = profile
    elif args.kind == "pd":
        if profile is None:
            raise ArgumentError("the policy-dependent reduction needs a profile")
        cert = certify(game, ReductionKind.POLICY_DEPENDENT)
        out_profile = policy_dependent_reduce(game, profile, cert)
        reduced = game.with_variant(Variant.STATIC)
    else:
        cs = game if game.variant.control_sharing else control_sharing_expand(game)
        cert = certify(cs, ReductionKind.CONTROL_SHARING)
        reduced = cs.with_variant(Variant.STATIC_CS)
        if profile is not None:
            if not profile.variant.control_sharing:
                profile = embed_profile(game, profile)
            out_profile = control_sharing_reduce(cs, profile, cert)
    tree = {
        "format": ser.REDUCTION,
        "kind": cert.kind.value,
        "certificate": ser.certificate_to_tree(cert),
        "game": ser.game_to_tree(reduced),
        "profile": None if out_profile is None else ser.profile_to_tree(out_profile),
    }
    if args.game_out:
        ser.write_document(args.game_out, ser.game_to_tree(reduced))
    if args.profile_out and out_profile is not None:
        ser.write_document(args.profile_out, ser.profile_to_tree(out_profile))
    lines = [f"{cert.kind.value} reduction of {game.name or 'game'}: variant {game.variant.value} -> "
             f"{reduced.variant.value}"]
    lines += [f"  {entry}" for entry in cert.log]
    if out_profile is not None:
        for d, pol in enumerate(out_profile.policies):
            if isinstance(pol, AffinePolicy):
                lines.append(f"  DM {reduced.dms[d].name}: gain {_full(pol.gain)}, offset {_full(pol.offset)}")
            else:
                lines.append(f"  DM {reduced.dms[d].name}: actions {list(pol.key())}")
    _emit(cfg, tree, "\n".join(lines))
    return EXIT_OK


# --------------------------------------------------------------------------
# solve
# --------------------------------------------------------------------------


def _profile_lines(game, profile):
    lines = []
    for d, pol in enumerate(profile.policies):
        dm = game.dms[d]
        if isinstance(pol, AffinePolicy):
            lines.append(f"  DM {dm.name} {dm.label}: gain {_full(pol.gain)}, offset {_full(pol.offset)}")
        else:
            lines.append(f"  DM {dm.name} {dm.label}: actions {list(pol.key())}")
    return lines


def cmd_solve(cfg, args):
    status = EXIT_OK
    extra = {}
    if args.method in ("stationary", "best-response"):
        obj = ser.read_document(args.input)
        if isinstance(obj, lq.LqStageModel):
            if args.tag is None:
                raise ArgumentError("multi-stage model inputs need --tag")
            game = lq.lq_game(obj, args.tag)
            init = None if args.init is None else _load(args.init, PolicyProfile)
        else:
            game, init = _load_game_and_profile(args.input, args.init)
        if args.method == "stationary":
            sol = solve_affine_stationary(game)
            profile = sol.profile
            extra = {"feasible": bool(sol.feasible), "residual": float(sol.residual),
                     "manifold_dim": int(sol.manifold_dim), "rank": int(sol.rank)}
            head = (f"stationary solve: {'feasible' if sol.feasible else 'infeasible'}, residual {sol.residual!r}, "
                    f"manifold dimension {sol.manifold_dim}")
            status = EXIT_OK if sol.feasible else EXIT_FAIL
        else:
            if init is None:
                init = PolicyProfile(tuple(AffinePolicy.zeros(dm.size, game.info_dim(d))
                                           for d, dm in enumerate(game.dms)), game.variant)
            trace = best_response_iteration(game, init, max_iter=args.max_iter, gauss_seidel=args.gauss_seidel)
            profile = trace.profile
            extra = {"converged": bool(trace.converged), "iterations": int(trace.iterations),
                     "contraction": float(trace.contraction), "steps": [float(x) for x in trace.steps]}
            head = (f"best-response iteration: {'converged' if trace.converged else 'did not converge'} after "
                    f"{trace.iterations} sweeps, observed contraction {trace.contraction!r}")
            status = EXIT_OK if trace.converged else EXIT_FAIL
    else:
        model = _load(args.input, lq.LqStageModel)
        if args.method == "feedback":
            fb = lq.feedback_spe(model)
            game, profile = lq.lq_game(model, "F"), fb.profile(model)
            extra = {"gains": [[g.tolist() for g in stage] for stage in fb.gains],
                     "value_matrices": [P.tolist() for P in fb.P], "value": fb.expected_value(model.x0_cov)}
            head = f"feedback saddle point, expected value {extra['value']!r}"
        else:
            ol = lq.openloop_spe(model, args.tag or "OL")
            game, profile = lq.lq_game(model, ol.tag), ol.profile
            extra = {"tag": ol.tag, "action_map": [a.tolist() for a in ol.action_map],
                     "values": [float(v) for v in ol.values]}
            head = f"open-loop ({ol.tag}) saddle point, expected values {[float(v) for v in ol.values]}"
    tree = {"format": ser.SOLUTION, "method": args.method, **extra,
            "game": ser.game_to_tree(game),
            "profile": None if profile is None else ser.profile_to_tree(profile)}
    if args.profile_out and profile is not None:
        ser.write_document(args.profile_out, ser.profile_to_tree(profile))
    if args.game_out:
        ser.write_document(args.game_out, ser.game_to_tree(game))
    lines = [head] + ([] if profile is None else _profile_lines(game, profile))
    _emit(cfg, tree, "\n".join(lines))
    return status


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------


def cmd_verify(cfg, args):
    game, profile = _load_game_and_profile(args.game, args.profile)
    if profile is None:
        raise ArgumentError("verify needs a profile")
    dev = None if game.family == "finite" else cfg.deviation_class()
    rep = verify_equilibrium(game, profile, args.concept, dev, cfg.tolerances)
    tree = ser.report_to_tree(rep)
    lines = [f"{rep.concept.value}: {rep.verdict.value.upper()} (deviation class {rep.deviation_class})",
             f"  largest improvement {rep.max_improvement!r}"]
    for who, r in rep.residuals.items():
        lines.append(f"  stationarity residual {who}: {r!r}")
    if rep.witness is not None:
        w = rep.witness
        lines.append(f"  witness: {w.who} improves by {w.improvement!r} with {w.deviation}")
    lines += [f"  note: {n}" for n in rep.notes]
    _emit(cfg, tree, "\n".join(lines))
    return EXIT_OK if rep.verdict is Verdict.CERTIFIED else EXIT_FAIL


# --------------------------------------------------------------------------
# reproduce and export
# --------------------------------------------------------------------------


def cmd_reproduce(cfg, args):
    if args.list:
        text = "\n".join(f"{n}: {harness.SCENARIOS[n].summary}" for n in harness.scenario_names())
        _emit(cfg, {"format": ser.HARNESS, "scenarios": harness.scenario_names()}, text)
        return EXIT_OK
    over = _overrides(args.set)
    if args.name is None:
        if over:
            raise ArgumentError("--set needs a scenario name")
        rep = harness.reproduce_all()
    else:
        rep = harness.HarnessReport([harness.run_scenario(args.name, over)])
    _emit(cfg, rep.machine(), rep.text())
    return EXIT_OK if rep.passed else EXIT_FAIL


def _export_two_dm(builder, profile, **kw):
    def make(params):
        return {"game": builder(**{k: float(params.get(k, v)) for k, v in kw.items()}), "profile": profile}

    return make


EXPORTS = {
    "example-3.1": _export_two_dm(scenarios.example_nonexistence, scenarios.two_dm_profile(-1.0), B=1.0),
    "example-4.1": _export_two_dm(scenarios.example_concave_reduction, scenarios.two_dm_profile(1.0), alpha=0.5),
    "example-4.2": _export_two_dm(scenarios.example_concave_lift,
                                  scenarios.two_dm_profile(1.0, variant=Variant.STATIC), alpha=0.5, beta=2.0),
    "gaussian-channel": lambda p: {"game": scenarios.gaussian_channel(), "profile": scenarios.gaussian_channel_profile()},
    "relay": lambda p: {"game": scenarios.relay_game(float(p.get("p", 0.5)))},
    "guessing": lambda p: {"game": scenarios.guessing_game(float(p.get("p", 0.5)))},
    "xor-channel": lambda p: {"game": scenarios.xor_channel_game(float(p.get("p", 0.3)))},
    "lq-deterministic": lambda p: {"model": lq.LqStageModel.scalar_zero_sum(
        int(p.get("T", 2)), q=1.0, r2=float(p.get("r2", 3.0)), name="lq-deterministic")},
    "lq-stochastic": lambda p: {"model": harness.mqi_instance(int(p.get("T", 2)), float(p.get("noise_var", 0.5)))[0]},
    "delay-sharing": lambda p: {"model": harness.delay_sharing_instance(int(p.get("T", 2)))},
}


def cmd_export(cfg, args):
    parts = EXPORTS[args.name](_overrides(args.set))
    out = Path(args.directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, obj in parts.items():
        suffix = {"game": "game", "profile": "pol", "model": "lq"}[kind]
        path = out / f"{args.name}.{suffix}"
        ser.write_document(path, ser.to_tree(obj))
        written.append(str(path))
    _emit(cfg, {"format": ser.EXPORT, "scenario": args.name, "files": written},
          "\n".join(f"wrote {w}" for w in written))
    return EXIT_OK


COMMANDS = {"describe": cmd_describe, "reduce": cmd_reduce, "solve": cmd_solve, "verify": cmd_verify,
            "reproduce": cmd_reproduce, "export": cmd_export}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        seed = args.seed if args.seed is not None else _env_seed()
        cfg = CliConfig(args.command, output=args.output, seed=seed, fmt=args.fmt,
                        certify_tol=getattr(args, "certify_tol", 1e-8), refute_tol=getattr(args, "refute_tol", 1e-6),
                        deviation=getattr(args, "deviation", "polynomial"), degree=getattr(args, "degree", 3),
                        directions=getattr(args, "directions", 4))
        return COMMANDS[args.command](cfg, args)
    except (IsredError, ValueError) as exc:
        sys.stderr.write(f"isred: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
