"""Structured-text scenario format.

Documents are JSON objects tagged with ``"format"``:

``isred-game/1``
    ``primitives``, ``dms``, ``observations``, ``costs``, ``variant``,
    ``zero_sum``, ``name``.
``isred-profile/1``
    ``variant`` and one ``{"kind": "affine" | "table", ...}`` entry per DM.
``isred-lq/1``
    Stage matrices of an :class:`~isred.lq.LqStageModel`.
``isred-report/1``, ``isred-reduction/1``, ``isred-solution/1``,
``isred-harness/1``, ``isred-description/1``, ``isred-export/1``
    Machine-readable command output.

Arrays are ``{"shape": [...], "data": [...]}`` with row-major data.  Floats
are written with ``repr`` precision, so every round trip is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import StructuralError
from .model import (
    AffineObservation,
    AffinePolicy,
    Dm,
    FinitePrimitives,
    GameSpec,
    GaussianPrimitives,
    PolicyProfile,
    QuadraticCost,
    TableCost,
    TableObservation,
    TablePolicy,
    TiltedCost,
    Variant,
)

GAME = "isred-game/1"
PROFILE = "isred-profile/1"
LQ = "isred-lq/1"
REPORT = "isred-report/1"
REDUCTION = "isred-reduction/1"
SOLUTION = "isred-solution/1"
HARNESS = "isred-harness/1"
DESCRIPTION = "isred-description/1"
EXPORT = "isred-export/1"


class FormatError(StructuralError):
    """A document does not follow the scenario format; ``where`` locates the problem."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


# --------------------------------------------------------------------------
# arrays
# --------------------------------------------------------------------------


def array_to_tree(a) -> dict:
    a = np.asarray(a)
    data = a.reshape(-1).tolist()
    out = {"shape": list(a.shape), "data": data}
    if a.dtype.kind in "iub":
        out["dtype"] = "int"
    return out


def tree_to_array(t, where="array") -> np.ndarray:
    if not isinstance(t, dict) or "shape" not in t or "data" not in t:
        raise FormatError(where, "expected an object with 'shape' and 'data'")
    dtype = np.int64 if t.get("dtype") == "int" else float
    try:
        a = np.array(t["data"], dtype=dtype)
        return a.reshape(tuple(int(s) for s in t["shape"]))
    except (TypeError, ValueError) as exc:
        raise FormatError(where, str(exc)) from None


def _opt_array(a):
    return None if a is None else array_to_tree(a)


def _get(tree, key, where):
    if not isinstance(tree, dict) or key not in tree:
        raise FormatError(where, f"missing key {key!r}")
    return tree[key]


# --------------------------------------------------------------------------
# games
# --------------------------------------------------------------------------


def _primitives_to_tree(p):
    if p.family == "gaussian":
        return {"family": "gaussian", "mean": array_to_tree(p.mean), "cov": array_to_tree(p.cov),
                "blocks": [[n, k] for n, k in p.blocks]}
    return {"family": "finite", "blocks": [[n, array_to_tree(m)] for n, m in p.blocks]}


def _tree_to_primitives(t, where):
    fam = _get(t, "family", where)
    if fam == "gaussian":
        return GaussianPrimitives(tree_to_array(_get(t, "mean", where), f"{where}.mean"),
                                  tree_to_array(_get(t, "cov", where), f"{where}.cov"),
                                  tuple((n, k) for n, k in _get(t, "blocks", where)))
    if fam == "finite":
        return FinitePrimitives(tuple((n, tree_to_array(m, f"{where}.blocks[{i}]"))
                                      for i, (n, m) in enumerate(_get(t, "blocks", where))))
    raise FormatError(f"{where}.family", f"unknown family {fam!r}")


def _observation_to_tree(o):
    common = {"precedence": list(o.precedence), "forward": list(o.forward), "noise_block": o.noise_block}
    if isinstance(o, AffineObservation):
        return {"kind": "affine", "H": array_to_tree(o.H), "G": array_to_tree(o.G), "D": _opt_array(o.D), **common}
    return {"kind": "table", "n_obs": o.n_obs, "table": array_to_tree(o.table), **common}


def _tree_to_observation(t, where):
    kind = _get(t, "kind", where)
    common = dict(precedence=tuple(t.get("precedence", ())), forward=tuple(t.get("forward", ())),
                  noise_block=t.get("noise_block"))
    if kind == "affine":
        D = t.get("D")
        return AffineObservation(tree_to_array(_get(t, "H", where), f"{where}.H"),
                                 tree_to_array(t["G"], f"{where}.G") if t.get("G") is not None else None,
                                 None if D is None else tree_to_array(D, f"{where}.D"), **common)
    if kind == "table":
        return TableObservation(int(_get(t, "n_obs", where)), tree_to_array(_get(t, "table", where), f"{where}.table"),
                                **common)
    raise FormatError(f"{where}.kind", f"unknown observation kind {kind!r}")


def _ratio_to_tree(r):
    from .reductions import GaussianDensityRatio

    if not isinstance(r, GaussianDensityRatio):
        raise StructuralError(f"cannot serialize density ratio of type {type(r).__name__}")
    return {
        "kind": "gaussian",
        "rest_cols": array_to_tree(np.asarray(r.rest_cols, dtype=np.int64)),
        "factors": [
            {"y_slice": [f.y_slice.start, f.y_slice.stop], "rest_gain": array_to_tree(f.rest_gain),
             "action_gain": array_to_tree(f.action_gain),
             "action_cols": array_to_tree(np.asarray(f.action_cols, dtype=np.int64)),
             "shift": array_to_tree(f.shift), "cov": array_to_tree(f.cov)}
            for f in r.factors
        ],
    }


def _tree_to_ratio(t, where):
    from .reductions import GaussianDensityRatio, GaussianFactor

    if _get(t, "kind", where) != "gaussian":
        raise FormatError(f"{where}.kind", "only Gaussian density ratios are stored")
    factors = []
    for i, f in enumerate(_get(t, "factors", where)):
        w = f"{where}.factors[{i}]"
        factors.append(GaussianFactor(slice(*f["y_slice"]), tree_to_array(f["rest_gain"], w),
                                      tree_to_array(f["action_gain"], w), tree_to_array(f["action_cols"], w),
                                      tree_to_array(f["shift"], w), tree_to_array(f["cov"], w)))
    return GaussianDensityRatio(tuple(factors), tree_to_array(_get(t, "rest_cols", where), where))


def _cost_to_tree(c):
    if isinstance(c, QuadraticCost):
        return {"kind": "quadratic", "M": array_to_tree(c.M), "b": array_to_tree(c.b), "const": float(c.const)}
    if isinstance(c, TableCost):
        return {"kind": "table", "values": array_to_tree(c.values)}
    if isinstance(c, TiltedCost):
        return {"kind": "tilted", "base": _cost_to_tree(c.base), "ratio": _ratio_to_tree(c.ratio)}
    raise StructuralError(f"cannot serialize cost of type {type(c).__name__}")


def _tree_to_cost(t, where):
    kind = _get(t, "kind", where)
    if kind == "quadratic":
        return QuadraticCost(tree_to_array(_get(t, "M", where), f"{where}.M"),
                             tree_to_array(_get(t, "b", where), f"{where}.b"), float(t.get("const", 0.0)))
    if kind == "table":
        return TableCost(tree_to_array(_get(t, "values", where), f"{where}.values"))
    if kind == "tilted":
        return TiltedCost(_tree_to_cost(_get(t, "base", where), f"{where}.base"),
                          _tree_to_ratio(_get(t, "ratio", where), f"{where}.ratio"))
    raise FormatError(f"{where}.kind", f"unknown cost kind {kind!r}")


def game_to_tree(game: GameSpec) -> dict:
    return {
        "format": GAME,
        "name": game.name,
        "variant": game.variant.value,
        "zero_sum": bool(game.zero_sum),
        "primitives": _primitives_to_tree(game.primitives),
        "dms": [{"name": dm.name, "player": dm.player, "stage": dm.stage, "size": dm.size} for dm in game.dms],
        "observations": [_observation_to_tree(o) for o in game.observations],
        "costs": [_cost_to_tree(c) for c in game.costs],
    }


def tree_to_game(t) -> GameSpec:
    _expect(t, GAME)
    dms = tuple(Dm(str(_get(d, "name", f"dms[{i}]")), int(_get(d, "player", f"dms[{i}]")),
                   int(_get(d, "stage", f"dms[{i}]")), int(d.get("size", 1)))
                for i, d in enumerate(_get(t, "dms", "game")))
    obs = tuple(_tree_to_observation(o, f"observations[{i}]") for i, o in enumerate(_get(t, "observations", "game")))
    costs = tuple(_tree_to_cost(c, f"costs[{i}]") for i, c in enumerate(_get(t, "costs", "game")))
    return GameSpec(_tree_to_primitives(_get(t, "primitives", "game"), "primitives"), dms, obs, costs,
                    _variant(t.get("variant", "general")), bool(t.get("zero_sum", False)), str(t.get("name", "")))


# --------------------------------------------------------------------------
# profiles
# --------------------------------------------------------------------------


def profile_to_tree(profile: PolicyProfile) -> dict:
    pols = []
    for p in profile.policies:
        if isinstance(p, AffinePolicy):
            pols.append({"kind": "affine", "gain": array_to_tree(p.gain), "offset": array_to_tree(p.offset)})
        else:
            pols.append({"kind": "table", "actions": array_to_tree(p.actions)})
    return {"format": PROFILE, "variant": profile.variant.value, "policies": pols}


def tree_to_profile(t) -> PolicyProfile:
    _expect(t, PROFILE)
    pols = []
    for i, p in enumerate(_get(t, "policies", "profile")):
        w = f"policies[{i}]"
        kind = _get(p, "kind", w)
        if kind == "affine":
            pols.append(AffinePolicy(tree_to_array(_get(p, "gain", w), f"{w}.gain"),
                                     tree_to_array(_get(p, "offset", w), f"{w}.offset")))
        elif kind == "table":
            pols.append(TablePolicy(tree_to_array(_get(p, "actions", w), f"{w}.actions")))
        else:
            raise FormatError(f"{w}.kind", f"unknown policy kind {kind!r}")
    return PolicyProfile(tuple(pols), _variant(t.get("variant", "general")))


# --------------------------------------------------------------------------
# multi-stage models
# --------------------------------------------------------------------------


def lq_to_tree(model) -> dict:
    def arrs(x):
        if x is None:
            return None
        if isinstance(x, np.ndarray):
            return array_to_tree(x)
        return [arrs(v) for v in x]

    return {
        "format": LQ, "name": model.name, "zero_sum": bool(model.zero_sum),
        "A": arrs(model.A), "B": arrs(model.B), "Q": arrs(model.Q), "R": arrs(model.R),
        "x0_cov": arrs(model.x0_cov), "noise_cov": arrs(model.noise_cov),
        "obs": arrs(model.obs), "obs_cov": arrs(model.obs_cov),
    }


def tree_to_lq(t):
    from .lq import LqStageModel

    _expect(t, LQ)

    def arrs(x, where):
        if x is None:
            return None
        if isinstance(x, dict):
            return tree_to_array(x, where)
        return tuple(arrs(v, f"{where}[{i}]") for i, v in enumerate(x))

    keys = ("A", "B", "Q", "R", "x0_cov")
    vals = {k: arrs(_get(t, k, "lq"), k) for k in keys}
    return LqStageModel(**vals, noise_cov=arrs(t.get("noise_cov"), "noise_cov"), obs=arrs(t.get("obs"), "obs"),
                        obs_cov=arrs(t.get("obs_cov"), "obs_cov"), zero_sum=bool(t.get("zero_sum", False)),
                        name=str(t.get("name", "")))


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def report_to_tree(report) -> dict:
    out = {"format": REPORT}
    out.update(report.summary())
    out["values"] = None if report.values is None else [float(v) for v in report.values]
    out["notes"] = list(report.notes)
    return out


def certificate_to_tree(cert) -> dict:
    nest = cert.nestedness
    return {
        "kind": cert.kind.value,
        "conditioning": {k: float(v) for k, v in cert.conditioning.items()},
        "nested": None if nest is None else bool(nest.nested),
        "violations": [] if nest is None else [[list(a), list(b)] for a, b in nest.violations],
        "log": list(cert.log),
    }


# --------------------------------------------------------------------------
# documents
# --------------------------------------------------------------------------


def _variant(v):
    try:
        return Variant(v)
    except ValueError:
        raise FormatError("variant", f"unknown variant {v!r}") from None


def _expect(t, fmt):
    if not isinstance(t, dict):
        raise FormatError("document", "expected a JSON object")
    if t.get("format") != fmt:
        raise FormatError("format", f"expected {fmt!r}, found {t.get('format')!r}")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(tree) -> str:
    """Deterministic text form: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(tree, indent=1, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def loads(text: str, where: str = "<text>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{where}:{exc.lineno}:{exc.colno}", exc.msg) from None


_READERS = {GAME: tree_to_game, PROFILE: tree_to_profile, LQ: tree_to_lq}


def parse_document(tree):
    """Object for game, profile and model documents; the tree itself for command output."""
    if not isinstance(tree, dict) or "format" not in tree:
        raise FormatError("document", "missing 'format' tag")
    fmt = tree["format"]
    if fmt in _READERS:
        return _READERS[fmt](tree)
    if fmt in (REPORT, REDUCTION, SOLUTION, HARNESS, DESCRIPTION, EXPORT):
        return tree
    raise FormatError("format", f"unknown document format {fmt!r}")


def read_document(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(str(path), exc.strerror or "cannot read file") from None
    return parse_document(loads(text, str(path)))


def write_document(path, tree):
    Path(path).write_text(dumps(tree))


def to_tree(obj) -> dict:
    """Tree of a game, profile or multi-stage model."""
    from .lq import LqStageModel

    if isinstance(obj, GameSpec):
        return game_to_tree(obj)
    if isinstance(obj, PolicyProfile):
        return profile_to_tree(obj)
    if isinstance(obj, LqStageModel):
        return lq_to_tree(obj)
    raise StructuralError(f"cannot serialize {type(obj).__name__}")
