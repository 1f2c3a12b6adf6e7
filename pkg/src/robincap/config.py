"""Shape-pair configuration files.

INI-style text with three required sections and one optional::

    [params]
    p = 2
    beta = 1
    # n must be 2 if given; M defaults to area(Omega)
    M = 12.566370614359172

    [K]
    center = 0, 0
    a0 = 1
    a = 0.05, 0, 0.02     # cos coefficients for k = 1, 2, ...
    b = 0, 0.01           # sin coefficients

    [Omega]
    a0 = 2

    [mesh]
    n_theta = 256
    n_radial = 32
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass

import numpy as np

from .geometry import StarShape, area
from .radial import ProblemParams

__all__ = ["ConfigError", "PairConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


@dataclass
class PairConfig:
    params: ProblemParams
    K: StarShape
    Omega: StarShape
    M: float
    n_theta: int = 256
    n_radial: int = 32


def _floats(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]


def _shape(section) -> StarShape:
    center = _floats(section.get("center", "0, 0"))
    if len(center) != 2:
        raise ConfigError("center needs two numbers")
    if "a0" not in section:
        raise ConfigError(f"[{section.name}] is missing a0")
    a0 = float(section["a0"])
    a = np.array(_floats(section.get("a", "")))
    b = np.array(_floats(section.get("b", "")))
    shape = StarShape(tuple(center), a0, a, b)
    if not shape.is_valid():
        raise ConfigError(f"[{section.name}] radius function is not positive")
    return shape


def parse_config(text: str) -> PairConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
        for name in ("params", "K", "Omega"):
            if name not in cp:
                raise ConfigError(f"missing section [{name}]")
        prm = cp["params"]
        n = int(prm.get("n", "2"))
        if n != 2:
            raise ConfigError("only n = 2 is supported for shape pairs")
        params = ProblemParams(n, float(prm["p"]), float(prm["beta"]))
        K = _shape(cp["K"])
        Omega = _shape(cp["Omega"])
        M = float(prm["M"]) if "M" in prm else area(Omega)
        if not math.isfinite(M):
            raise ConfigError("M must be finite")
        mesh = cp["mesh"] if "mesh" in cp else {}
        n_theta = int(mesh.get("n_theta", 256))
        n_radial = int(mesh.get("n_radial", 32))
    except ConfigError:
        raise
    except (configparser.Error, KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return PairConfig(params, K, Omega, M, n_theta, n_radial)


def load_config(path) -> PairConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    return parse_config(text)
