"""Scenario files: domain, coefficients, boundary behavior, numerics, seeds.

A scenario is a JSON object. The domain is either a full domain spec or a
reference ``{"fixture": name, "params": {...}}`` to one of the builtin
domains. Builtin scenarios ship with the package and can be loaded by name.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .controlled import SELECT_MODES, BoundaryBehavior, DiffusionCoefficients
from .errors import InputError
from .fixtures import DOMAINS
from .geometry import DomainSpec

DEFAULT_TOLERANCES = {
    "clock": 1e-9,
    "naturality_factor": 2.0,
    "ks_alpha": 0.01,
    "viscosity": 0.05,
    "min_bin": 50,
}


@dataclass
class Numerics:
    dt: float = 1e-3
    delta: float = None
    t_trunc: float = 20.0
    select_mode: str = "first"
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("dt", "t_trunc"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InputError(f"numerics.{name} must be a positive number, got {v!r}")
        if self.delta is not None and not (math.isfinite(self.delta) and self.delta > 0):
            raise InputError(f"numerics.delta must be positive, got {self.delta!r}")
        if self.select_mode not in SELECT_MODES:
            raise InputError(f"numerics.select_mode must be one of {sorted(SELECT_MODES)}")
        self.tolerances = {**DEFAULT_TOLERANCES, **self.tolerances}

    def to_dict(self):
        return {"dt": self.dt, "delta": self.delta, "t_trunc": self.t_trunc,
                "select_mode": self.select_mode, "tolerances": dict(self.tolerances)}


def _resolve_domain(d):
    if "fixture" in d:
        name = d["fixture"]
        if name not in DOMAINS:
            raise InputError(f"unknown domain fixture {name!r}; choose from {sorted(DOMAINS)}")
        try:
            return DOMAINS[name](**d.get("params", {}))
        except TypeError as exc:
            raise InputError(f"bad parameters for domain fixture {name!r}: {exc}") from None
    return DomainSpec.from_dict(d)


@dataclass
class ScenarioConfig:
    name: str
    domain: DomainSpec
    coefficients: DiffusionCoefficients
    behavior: BoundaryBehavior
    numerics: Numerics
    x0: tuple
    seeds: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    domain_ref: dict = None

    def __post_init__(self):
        if self.coefficients.dim != self.domain.dim:
            raise InputError(f"coefficients are {self.coefficients.dim}-dimensional, "
                             f"domain is {self.domain.dim}")
        self.x0 = tuple(float(v) for v in np.atleast_1d(self.x0))
        if len(self.x0) != self.domain.dim:
            raise InputError(f"x0 must have {self.domain.dim} coordinates")
        self.coefficients.check_bounded(self.domain)
        self.behavior.validate(self.domain)
        if self.delta > math.sqrt(self.numerics.dt) * (1 + 1e-12):
            raise InputError(f"delta={self.delta} exceeds sqrt(dt)")

    @property
    def delta(self):
        return self.behavior.delta if self.numerics.delta is None else self.numerics.delta

    @property
    def dt(self):
        return self.numerics.dt

    def seed(self, purpose):
        return int(self.seeds.get(purpose, self.seeds.get("default", 0)))

    def to_dict(self):
        return {
            "name": self.name,
            "domain": self.domain_ref if self.domain_ref is not None else self.domain.to_dict(),
            "coefficients": self.coefficients.to_dict(),
            "behavior": self.behavior.to_dict(),
            "numerics": self.numerics.to_dict(),
            "x0": list(self.x0),
            "seeds": dict(self.seeds),
            "output": dict(self.output),
        }

    @property
    def hash(self):
        """sha256 over the canonical JSON of the resolved scenario (names and
        output options excluded, fixture references expanded)."""
        content = self.to_dict()
        content["domain"] = self.domain.to_dict()
        del content["name"], content["output"]
        blob = json.dumps(content, sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise InputError("a scenario must be a JSON object")
        try:
            domain_ref = d["domain"] if "fixture" in d["domain"] else None
            domain = _resolve_domain(d["domain"])
            coeffs = DiffusionCoefficients.from_dict(d["coefficients"], dim=domain.dim)
            behavior = BoundaryBehavior.from_dict(d.get("behavior", {}))
            numerics = Numerics(**d.get("numerics", {}))
            x0 = d.get("x0")
        except KeyError as exc:
            raise InputError(f"scenario missing field {exc}") from None
        except TypeError as exc:
            raise InputError(f"bad scenario field: {exc}") from None
        if x0 is None:
            raise InputError("scenario missing field 'x0'")
        return cls(d.get("name", "unnamed"), domain, coeffs, behavior, numerics, x0,
                   dict(d.get("seeds", {})), dict(d.get("output", {})), domain_ref)

    def with_numerics(self, **changes):
        """Copy with some numerics (or the behavior's delta) replaced."""
        d = self.to_dict()
        delta = changes.pop("delta", None)
        d["numerics"].update(changes)
        if delta is not None:
            d["numerics"]["delta"] = delta
            d["behavior"]["delta"] = delta
        return ScenarioConfig.from_dict(d)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def builtin_names():
    return sorted(p.name[:-5] for p in resources.files("reflectdiff.scenarios").iterdir()
                  if p.name.endswith(".json"))


def load_scenario(ref):
    """Scenario from a JSON file path, or a builtin scenario name."""
    if isinstance(ref, ScenarioConfig):
        return ref
    if isinstance(ref, dict):
        return ScenarioConfig.from_dict(ref)
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        res = resources.files("reflectdiff.scenarios") / f"{ref}.json"
        if not res.is_file():
            raise InputError(f"no scenario file {ref!r} and no builtin of that name "
                             f"(builtins: {', '.join(builtin_names())})")
        text = res.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"scenario {ref!r} is not valid JSON: {exc}") from None
    return ScenarioConfig.from_dict(data)
