"""
YAML experiment configs. The grammar (keys, defaults, map tokens) is
documented in the README; this module is its only reader.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import yaml

from neumannlab.errors import ParseError, ValidationError
from neumannlab.maps import conformal_maps as cm
from neumannlab.maps.conformal_maps import ConformalMap

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
KNOWN_KEYS = {
    "schema_version", "alpha", "K", "refinement", "k", "quadrature_level",
    "sobolev_ascent_iters", "output_dir", "emit_plot_data", "map_pairs",
}
BUILTINS = ("identity", "scale", "moebius", "poly_perturb")

MapPair = Tuple[ConformalMap, ConformalMap]


@dataclass
class ExperimentConfig:
    map_pairs: List[MapPair] = field(default_factory=list)
    alpha: float = 4.0
    K: Optional[float] = None
    refinement: int = 64
    k: int = 6
    quadrature_level: int = 16
    sobolev_ascent_iters: int = 50
    output_dir: str = "reports"
    emit_plot_data: bool = False
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "alpha": self.alpha,
            "K": self.K,
            "refinement": self.refinement,
            "k": self.k,
            "quadrature_level": self.quadrature_level,
            "sobolev_ascent_iters": self.sobolev_ascent_iters,
            "output_dir": self.output_dir,
            "emit_plot_data": self.emit_plot_data,
            "map_pairs": [[m1.to_dict(), m2.to_dict()] for m1, m2 in self.map_pairs],
        }


def _numbers(token: str, raw: str) -> List[float]:
    try:
        return [float(x) for x in raw.split(",")]
    except ValueError:
        raise ParseError(f"bad numeric arguments in map token {token!r}", token=token) from None


def parse_map_token(token: str, where: str = "map") -> ConformalMap:
    """identity | scale:c | moebius:re[,im] | poly_perturb:eps,k"""
    name, _, raw = token.strip().partition(":")
    if name not in BUILTINS:
        raise ParseError(f"unknown built-in map {name!r}", token=token)
    args = _numbers(token, raw) if raw else []
    arity = {"identity": (0,), "scale": (1, 2), "moebius": (1, 2), "poly_perturb": (2,)}[name]
    if len(args) not in arity:
        raise ParseError(f"map {name!r} takes {' or '.join(map(str, arity))} arguments", token=token)
    try:
        if name == "identity":
            return cm.identity()
        if name == "scale":
            return cm.scale(complex(*args))
        if name == "moebius":
            return cm.moebius(complex(*args))
        return cm.poly_perturb(args[0], args[1])
    except ValueError as e:
        raise ValidationError(where, str(e)) from None


def _pair_of_floats(value: Any, where: str) -> Tuple[float, float]:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(_is_number(v) for v in value)):
        raise ValidationError(where, "expected [re, im]")
    return float(value[0]), float(value[1])


def _parse_map(entry: Any, where: str) -> ConformalMap:
    if isinstance(entry, str):
        return parse_map_token(entry, where)
    if isinstance(entry, dict):
        unknown = set(entry) - {"moebius", "coeffs", "label"}
        if unknown:
            token = sorted(map(str, unknown))[0]
            raise ParseError(f"unknown key {token!r} in {where}", token=token)
        if "coeffs" not in entry or not isinstance(entry["coeffs"], list):
            raise ValidationError(f"{where}.coeffs", "a list of [re, im] pairs is required")
        coeffs = [_pair_of_floats(c, f"{where}.coeffs[{i}]") for i, c in enumerate(entry["coeffs"])]
        a = _pair_of_floats(entry.get("moebius", [0.0, 0.0]), f"{where}.moebius")
        try:
            return cm.from_coefficients(coeffs, a, str(entry.get("label", "custom")))
        except ValueError as e:
            raise ValidationError(where, str(e)) from None
    raise ParseError(f"{where} must be a map token or a mapping", token=repr(entry))


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _number(data: Dict[str, Any], key: str, default: float, constraint: str, ok) -> float:
    value = data.get(key, default)
    if not _is_number(value) or not ok(value):
        raise ValidationError(key, constraint)
    return float(value)


def _integer(data: Dict[str, Any], key: str, default: int, minimum: int) -> int:
    value = data.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ValidationError(key, f"{key} >= {minimum} (integer)")
    return value


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        line, column = (mark.line + 1, mark.column + 1) if mark is not None else (None, None)
        logger.error("Config is not valid YAML: %s", e.problem)
        raise ParseError(str(e.problem or "invalid YAML"), line=line, column=column) from e
    except yaml.YAMLError as e:
        raise ParseError(f"invalid YAML: {e}") from e

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ParseError("config must be a mapping at the top level")
    unknown = set(data) - KNOWN_KEYS
    if unknown:
        token = sorted(map(str, unknown))[0]
        raise ParseError(f"unknown config key {token!r}", token=token)

    if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ValidationError("schema_version", f"schema_version == {SCHEMA_VERSION}")

    K = None
    if data.get("K") is not None:
        K = _number(data, "K", 1.0, "K >= 1", lambda v: 1 <= v < math.inf)

    pairs_raw = data.get("map_pairs", [])
    if not isinstance(pairs_raw, list):
        raise ValidationError("map_pairs", "a list of [map, map] pairs")
    pairs: List[MapPair] = []
    for i, entry in enumerate(pairs_raw):
        if not isinstance(entry, list) or len(entry) != 2:
            raise ValidationError(f"map_pairs[{i}]", "exactly two maps per pair")
        pairs.append((_parse_map(entry[0], f"map_pairs[{i}][0]"), _parse_map(entry[1], f"map_pairs[{i}][1]")))

    emit = data.get("emit_plot_data", False)
    if not isinstance(emit, bool):
        raise ValidationError("emit_plot_data", "a boolean")
    output_dir = data.get("output_dir", "reports")
    if not isinstance(output_dir, str) or not output_dir:
        raise ValidationError("output_dir", "a non-empty path")

    refinement = _integer(data, "refinement", 64, 8)
    k = _integer(data, "k", 6, 2)
    # the solver needs k < n_vertices - 1 = 3R^2 + 3R
    if k >= 3 * refinement * (refinement + 1):
        raise ValidationError("k", f"k < {3 * refinement * (refinement + 1)} for refinement {refinement}")

    config = ExperimentConfig(
        map_pairs=pairs,
        alpha=_number(data, "alpha", 4.0, "alpha > 2", lambda v: 2 < v < math.inf),
        K=K,
        refinement=refinement,
        k=k,
        quadrature_level=_integer(data, "quadrature_level", 16, 8),
        sobolev_ascent_iters=_integer(data, "sobolev_ascent_iters", 50, 1),
        output_dir=output_dir,
        emit_plot_data=emit,
    )
    logger.debug("Parsed config with %d map pairs", len(config.map_pairs))
    return config
