"""JSON configuration and report serialization.

Complex numbers are always ``{"re": float, "im": float}`` objects.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np

from .errors import ParameterError, SovkitError
from .model import ModelParams, TwistSpec


class ConfigError(SovkitError):
    """Configuration or report file does not follow the schema."""


def encode_complex(z) -> dict:
    z = complex(z)
    return {"re": encode_float(z.real), "im": encode_float(z.imag)}


def encode_float(x):
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def decode_complex(obj) -> complex:
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return complex(obj)
    if not isinstance(obj, dict) or set(obj) != {"re", "im"}:
        raise ConfigError(f"expected a {{re, im}} object, got {obj!r}")
    try:
        return complex(float(obj["re"]), float(obj["im"]))
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad complex number {obj!r}") from err


def encode_array(values) -> list:
    return [encode_complex(v) for v in np.ravel(values)]


def encode_fraction(s) -> str:
    s = Fraction(s)
    return str(s.numerator) if s.denominator == 1 else f"{s.numerator}/{s.denominator}"


def _twist_from_json(obj, n) -> TwistSpec:
    if not isinstance(obj, dict) or "variant" not in obj:
        raise ConfigError("twist must be an object with a 'variant' field")
    variant = obj["variant"]
    if variant == "diagonal":
        if "k" not in obj or not isinstance(obj["k"], list):
            raise ConfigError("diagonal twist needs a list 'k'")
        return TwistSpec("diagonal", tuple(decode_complex(v) for v in obj["k"]))
    if variant in ("gl3_cyclic2", "gl3_cyclic3"):
        try:
            vals = tuple(decode_complex(obj[key]) for key in ("alpha", "beta", "gamma"))
        except KeyError as err:
            raise ConfigError(f"cyclic twist needs alpha, beta and gamma (missing {err})") from err
        return TwistSpec(variant, vals)
    raise ConfigError(f"unknown twist variant {variant!r}")


def params_from_dict(cfg: dict) -> tuple:
    """``(ModelParams, reference_covector or None)`` from a parsed config."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    missing = [k for k in ("n", "N", "eta", "xi", "twist") if k not in cfg]
    if missing:
        raise ConfigError(f"config is missing {', '.join(missing)}")
    n, N = cfg["n"], cfg["N"]
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in (n, N)):
        raise ConfigError("n and N must be integers")
    if not isinstance(cfg["xi"], list):
        raise ConfigError("xi must be a list")
    cov = cfg.get("reference_covector")
    if cov is not None:
        if not isinstance(cov, list):
            raise ConfigError("reference_covector must be a list")
        cov = tuple(decode_complex(c) for c in cov)
    try:
        params = ModelParams(
            n,
            N,
            decode_complex(cfg["eta"]),
            tuple(decode_complex(x) for x in cfg["xi"]),
            _twist_from_json(cfg["twist"], n),
            float(cfg.get("tolerance", 1e-9)),
            int(cfg.get("seed", 0)),
        )
    except ParameterError as err:
        raise ConfigError(str(err)) from err
    return params, cov


def load_config(path) -> tuple:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return params_from_dict(cfg)


def params_to_dict(params: ModelParams, covector=None) -> dict:
    spec = params.twist
    if spec.is_diagonal:
        twist = {"variant": "diagonal", "k": encode_array(spec.values)}
    else:
        a, b, c = spec.values
        twist = {"variant": spec.variant, "alpha": encode_complex(a), "beta": encode_complex(b), "gamma": encode_complex(c)}
    out = {
        "n": params.n,
        "N": params.N,
        "eta": encode_complex(params.eta),
        "xi": encode_array(params.xi),
        "twist": twist,
        "tolerance": params.tolerance,
        "seed": params.seed,
    }
    if covector is not None:
        out["reference_covector"] = encode_array(covector)
    return out


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, no NaN literals)."""
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))
