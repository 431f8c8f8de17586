"""JSON schema for configurations, generator specs, and result objects.

Configuration schema (version 1):

    {
      "schema_version": 1,
      "n": 2,
      "cube": {"min_corner": [-5.0, -5.0], "side": 10.0},
      "families": [
        {"axis": 0, "radius": 1.0, "members": [
          {"anchor": [...], "dir": [...], "weight": 1.0},
          {"polyline": {"breakpoints": [...], "values": [[...], ...],
                        "lip": 0.05}, "weight": 1.0}
        ]}
      ]
    }

Members carry either ``anchor``+``dir`` (straight tube) or ``polyline``
(Lipschitz graph).  Numbers are written with full repr precision, so files
round-trip bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .evaluator import FamilyMember, TubeFamily
from .generators import (
    AxisParallel,
    GeneralAngle,
    GenSpec,
    Lipschitz,
    Regime,
    SmallAngle,
    Weighted,
)
from .geometry import Cap, Cube, Direction, Line, LipschitzCurve, Tube

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class Configuration:
    n: int
    cube: Cube
    families: tuple
    direction_sets: tuple | None = None  # optional per-axis caps (wedge runs)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def cube_to_json(cube: Cube) -> dict:
    return {"min_corner": cube.min_corner.tolist(), "side": cube.side}


def cube_from_json(data) -> Cube:
    _require(isinstance(data, dict) and "min_corner" in data and "side" in data,
             "cube stanza needs min_corner and side")
    return Cube(np.asarray(data["min_corner"], dtype=float), float(data["side"]))


def member_to_json(member: FamilyMember) -> dict:
    g = member.geometry
    if isinstance(g, Tube):
        return {
            "anchor": g.line.anchor.tolist(),
            "dir": g.line.direction.components.tolist(),
            "weight": member.weight,
        }
    return {
        "polyline": {
            "breakpoints": g.breakpoints.tolist(),
            "values": g.values.tolist(),
            "lip": g.lip,
        },
        "weight": member.weight,
    }


def member_from_json(data, axis: int, radius: float) -> FamilyMember:
    _require(isinstance(data, dict), "member stanza must be an object")
    weight = float(data.get("weight", 1.0))
    if "polyline" in data:
        p = data["polyline"]
        curve = LipschitzCurve(
            axis,
            np.asarray(p["breakpoints"], dtype=float),
            np.asarray(p["values"], dtype=float),
            float(p["lip"]),
        )
        return FamilyMember(curve, weight)
    _require("anchor" in data and "dir" in data,
             "member needs anchor+dir or polyline")
    line = Line(np.asarray(data["anchor"], dtype=float),
                Direction(np.asarray(data["dir"], dtype=float)))
    return FamilyMember(Tube(line, radius), weight)


def family_to_json(family: TubeFamily) -> dict:
    return {
        "axis": family.axis,
        "radius": family.base_radius,
        "members": [member_to_json(m) for m in family.members],
    }


def config_to_json(config: Configuration) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "n": config.n,
        "cube": cube_to_json(config.cube),
        "families": [family_to_json(f) for f in config.families],
    }
    if config.direction_sets is not None:
        out["direction_sets"] = [
            {"center": c.center.components.tolist(), "ang_radius": c.ang_radius}
            for c in config.direction_sets
        ]
    return out


def config_from_json(data) -> Configuration:
    _require(isinstance(data, dict), "top level must be an object")
    _require(data.get("schema_version") == SCHEMA_VERSION,
             f"unsupported schema_version {data.get('schema_version')!r}")
    _require("n" in data and "cube" in data and "families" in data,
             "config needs n, cube, families")
    n = int(data["n"])
    cube = cube_from_json(data["cube"])
    _require(cube.n == n, "cube dimension differs from n")
    families = []
    for stanza in data["families"]:
        _require(isinstance(stanza, dict) and "axis" in stanza,
                 "family stanza needs an axis")
        axis = int(stanza["axis"])
        radius = float(stanza.get("radius", 1.0))
        members = tuple(
            member_from_json(m, axis, radius) for m in stanza.get("members", [])
        )
        families.append(TubeFamily(axis, n, members, radius))
    direction_sets = None
    if "direction_sets" in data:
        direction_sets = tuple(
            Cap(Direction(np.asarray(c["center"], dtype=float)), float(c["ang_radius"]))
            for c in data["direction_sets"]
        )
        _require(len(direction_sets) == n, "need one direction set per axis")
    return Configuration(n, cube, tuple(families), direction_sets)


_REGIME_KINDS = {
    "axis_parallel": AxisParallel,
    "small_angle": SmallAngle,
    "general": GeneralAngle,
    "lipschitz": Lipschitz,
    "weighted": Weighted,
}


def regime_to_json(regime: Regime) -> dict:
    if isinstance(regime, AxisParallel):
        return {"kind": "axis_parallel"}
    if isinstance(regime, SmallAngle):
        return {"kind": "small_angle", "delta": regime.delta}
    if isinstance(regime, GeneralAngle):
        return {"kind": "general"}
    if isinstance(regime, Lipschitz):
        return {"kind": "lipschitz", "delta": regime.delta,
                "breakpoints": regime.breakpoints}
    if isinstance(regime, Weighted):
        return {"kind": "weighted", "low": regime.low, "high": regime.high,
                "delta": regime.delta}
    raise ValidationError(f"unknown regime {regime!r}")


def regime_from_json(data) -> Regime:
    _require(isinstance(data, dict) and "kind" in data, "regime stanza needs a kind")
    kind = data["kind"]
    _require(kind in _REGIME_KINDS, f"unknown regime kind {kind!r}")
    if kind == "axis_parallel":
        return AxisParallel()
    if kind == "small_angle":
        return SmallAngle(float(data["delta"]))
    if kind == "general":
        return GeneralAngle()
    if kind == "lipschitz":
        return Lipschitz(float(data["delta"]), int(data["breakpoints"]))
    return Weighted(float(data["low"]), float(data["high"]), float(data["delta"]))


def genspec_to_json(spec: GenSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "n": spec.n,
        "counts": list(spec.counts),
        "regime": regime_to_json(spec.regime),
        "cube": cube_to_json(spec.cube),
        "seed": spec.seed,
        "radius": spec.radius,
    }


def genspec_from_json(data) -> GenSpec:
    _require(isinstance(data, dict), "generator spec must be an object")
    for key in ("n", "counts", "regime", "cube", "seed"):
        _require(key in data, f"generator spec needs {key!r}")
    return GenSpec(
        int(data["n"]),
        tuple(int(c) for c in data["counts"]),
        regime_from_json(data["regime"]),
        cube_from_json(data["cube"]),
        int(data["seed"]),
        float(data.get("radius", 1.0)),
    )


def dump_json(obj: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
