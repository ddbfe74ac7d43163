"""Run configuration: a validated, JSON-backed record of every knob.

Cross-field validity is enforced up front so that no pipeline stage can
start from an inconsistent configuration: the scaling exponent must be
non-resonant, the mollification scale resolvable on the grid, and the
jet order large enough for every derivation the grading admits.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

from .fields import NoiseSpec, TorusGrid, decay_for_alpha
from .indices import Homogeneity, critical_integers
from .jets import EllipticityWindow, default_order
from .series import Context
from .indices import enumerate_populated


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    alpha: str = "3/4"
    d: int = 1
    lam: float = 0.75
    n0: float = 0.4
    cutoff_int: int = 2
    cutoff_alpha: int = 1
    nx: int = 256
    nt: int = 512
    seed: int = 7
    eps: float = 0.0625
    ensemble: int = 16
    eps_ladder: List[float] = field(default_factory=list)
    a_coeffs: List[float] = field(default_factory=lambda: [1.0, 0.25])
    eta: Optional[float] = None
    threads: int = 1
    out_dir: str = "runs"
    jet_order: Optional[int] = None

    def __post_init__(self):
        self.validate()

    @property
    def alpha_fraction(self) -> Fraction:
        return Fraction(self.alpha)

    def validate(self):
        try:
            alpha = Fraction(self.alpha)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"alpha {self.alpha!r} is not a fraction: {exc}")
        try:
            critical_integers(alpha)
        except ValueError as exc:
            raise ConfigError(str(exc))
        if not 0 < self.lam <= 1:
            raise ConfigError("ellipticity constant must lie in (0, 1]")
        if not 0 < self.n0 <= 1:
            raise ConfigError("noise amplitude must lie in (0, 1]")
        if self.nx & (self.nx - 1):
            raise ConfigError("nx must be a power of two")
        dx = 1.0 / self.nx
        if self.eps < 2 * dx:
            raise ConfigError(
                f"eps={self.eps} below the resolvable scale {2 * dx}")
        for e in self.eps_ladder:
            if e < 2 * dx:
                raise ConfigError(
                    f"ladder eps={e} below the resolvable scale {2 * dx}")
        needed = default_order(alpha)
        order = self.jet_order if self.jet_order is not None else needed
        if order < needed:
            raise ConfigError(
                f"jet order {order} below the derivation budget {needed}")
        if self.ensemble < 2:
            raise ConfigError("ensemble size must be at least 2")
        if self.threads < 1:
            raise ConfigError("threads must be positive")

    def grid(self) -> TorusGrid:
        return TorusGrid(d=self.d, nx=self.nx, nt=self.nt)

    def context(self) -> Context:
        alpha = self.alpha_fraction
        cutoff = Homogeneity(self.cutoff_int, self.cutoff_alpha)
        iset = enumerate_populated(alpha, self.d, cutoff)
        return Context(alpha, self.d, cutoff, EllipticityWindow(self.lam),
                       self.jet_order, iset)

    def noise_spec(self, eps: Optional[float] = None,
                   seed: Optional[int] = None) -> NoiseSpec:
        return NoiseSpec(seed=self.seed if seed is None else seed,
                         decay=decay_for_alpha(self.alpha_fraction, self.d),
                         eps=self.eps if eps is None else eps,
                         n0=self.n0)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "RunConfig":
        data = json.loads(text)
        unknown = set(data) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return RunConfig(**data)

    @staticmethod
    def load(path: str) -> "RunConfig":
        with open(path) as fh:
            return RunConfig.from_json(fh.read())

    def with_overrides(self, overrides: Dict[str, str]) -> "RunConfig":
        data = asdict(self)
        for key, raw in overrides.items():
            if key not in data:
                raise ConfigError(f"unknown config key {key!r}")
            current = data[key]
            if isinstance(current, bool):
                data[key] = raw.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                data[key] = int(raw)
            elif isinstance(current, float):
                data[key] = float(raw)
            elif isinstance(current, list):
                data[key] = json.loads(raw)
            elif current is None:
                data[key] = None if raw == "null" else float(raw)
            else:
                data[key] = raw
        return RunConfig(**data)
