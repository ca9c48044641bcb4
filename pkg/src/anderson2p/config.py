"""Experiment configuration: flat key = value text with dotted sections.

Values are decimal numbers, true/false booleans, bare strings, or
comma-separated lists.  Defaults reproduce the desk-scale verification
suite with no flags.  Keys that do not affect results (worker count,
output location, figure rendering) are excluded from the canonical form
used for hashing and replay.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .disorder import DistributionSpec
from .lattice import Cube, InteractionSpec
from .msa import EnergyInterval, MsaParameters, MsaSchedule


class ConfigError(ValueError):
    """A configuration value violates one of the standing invariants."""


DEFAULTS = {
    "model.d": "1",
    "model.dist": "uniform",
    "model.dist.a": "0.0",
    "model.dist.b": "1.0",
    "model.dist.p": "0.5",
    "model.dist.levels": "0.0, 1.0",
    "model.dist.values": "0.0, 1.0",
    "model.dist.weights": "0.5, 0.5",
    "model.dist.value": "0.0",
    "model.amplitude": "1.0",
    "model.q0": "20.0",
    "interaction.r0": "1",
    "interaction.profile": "1.0, 0.5",
    "msa.alpha": "1.5",
    "msa.beta": "0.5",
    "msa.p": "13.0",
    "msa.q": "53.0",
    "msa.p_tilde": "37.0",
    "msa.gamma": "0.5",
    "msa.J": "3",
    "msa.L0": "5",
    "msa.m0": "0.35",
    "msa.K": "3",
    "msa.k": "0",
    "msa.grid_points": "64",
    "msa.cnr_budget": "100000",
    "msa.distant_mode": "center",
    "interval.e_low": "0.0",
    "interval.e_high": "0.5",
    "run.n_samples": "200",
    "run.seed": "1",
    "run.workers": "1",
    "run.mode": "auto",
    "output.directory": "",
    "output.figures": "true",
    "cube.center": "0, 0",
    "cube.radius": "5",
    "w1.energy": "0.5",
    "dsk.pair_kind": "interactive",
    "lifshitz.C": "1.0",
    "lifshitz.lengths": "10, 20, 40",
    "lifshitz.particles": "one",
    "lifshitz.n_samples": "2000",
    "ct.instances": "200",
    "ct.L_min": "2",
    "ct.L_max": "8",
    "ct.amplitude_max": "2.0",
    "ct.energies": "5",
    "green.energy": "-0.5",
    "classify.prev_length": "0",
    "decay.max_states": "10",
    "decay.n_samples": "1",
    "spectrum.dump_matrix": "false",
}

# keys that cannot change results and are excluded from the canonical form
VOLATILE_KEYS = ("run.workers", "output.directory", "output.figures")

PAIR_KINDS = {"interactive": "I", "noninteractive": "NI", "mixed": "mixed",
              "I": "I", "NI": "NI"}


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def from_sources(
        cls,
        config_path: Optional[str] = None,
        overrides=(),
        seed: Optional[int] = None,
        workers: Optional[int] = None,
        outdir: Optional[str] = None,
        exhaustive: bool = False,
    ) -> "ExperimentConfig":
        merged = dict(DEFAULTS)
        if config_path is not None:
            with open(config_path) as fh:
                merged.update(parse_config_text(fh.read()))
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            key, value = item.split("=", 1)
            merged[key.strip()] = value.strip()
        if seed is not None:
            merged["run.seed"] = str(seed)
        if workers is not None:
            merged["run.workers"] = str(workers)
        if outdir is not None:
            merged["output.directory"] = outdir
        if exhaustive:
            merged["run.mode"] = "exhaustive"
        cfg = cls(merged)
        cfg.validate()
        return cfg

    # -- typed access -------------------------------------------------------

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        v = self.values.get(key, default)
        return v if v != "" else default

    def _convert(self, key, conv, default):
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {raw!r}") from None

    def get_int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        return self._convert(key, int, default)

    def get_float(self, key: str, default: Optional[float] = None) -> Optional[float]:
        return self._convert(key, float, default)

    def get_bool(self, key: str, default: bool = False) -> bool:
        raw = self.get(key)
        if raw is None:
            return default
        low = raw.lower()
        if low not in ("true", "false"):
            raise ConfigError(f"{key}: expected true/false, got {raw!r}")
        return low == "true"

    def get_floats(self, key: str, default=()) -> tuple:
        raw = self.get(key)
        if raw is None:
            return tuple(default)
        try:
            return tuple(float(x) for x in raw.split(",") if x.strip() != "")
        except ValueError:
            raise ConfigError(f"{key}: cannot parse list {raw!r}") from None

    def get_ints(self, key: str, default=()) -> tuple:
        return tuple(int(x) for x in self.get_floats(key, default))

    # -- domain objects -----------------------------------------------------

    def distribution(self) -> DistributionSpec:
        kind = self.get("model.dist")
        common = dict(
            amplitude=self.get_float("model.amplitude"),
            q0=self.get_float("model.q0"),
            beta=self.get_float("msa.beta"),
        )
        try:
            if kind == "uniform":
                return DistributionSpec.uniform(
                    self.get_float("model.dist.a"), self.get_float("model.dist.b"), **common
                )
            if kind == "bernoulli":
                return DistributionSpec.bernoulli(
                    self.get_float("model.dist.p"),
                    self.get_floats("model.dist.levels"),
                    **common,
                )
            if kind == "discrete":
                return DistributionSpec.discrete(
                    self.get_floats("model.dist.values"),
                    self.get_floats("model.dist.weights"),
                    **common,
                )
            if kind == "constant":
                return DistributionSpec.constant(
                    self.get_float("model.dist.value"), **common
                )
        except ValueError as exc:
            raise ConfigError(f"model.dist: {exc}") from None
        raise ConfigError(f"model.dist: unknown kind {kind!r}")

    def interaction(self) -> InteractionSpec:
        try:
            return InteractionSpec(
                r0=self.get_int("interaction.r0"),
                profile=self.get_floats("interaction.profile"),
            )
        except ValueError as exc:
            raise ConfigError(f"interaction: {exc}") from None

    def msa_params(self) -> MsaParameters:
        try:
            return MsaParameters(
                d=self.get_int("model.d"),
                alpha=self.get_float("msa.alpha"),
                beta=self.get_float("msa.beta"),
                p=self.get_float("msa.p"),
                q=self.get_float("msa.q"),
                p_tilde=self.get_float("msa.p_tilde"),
                gamma=self.get_float("msa.gamma"),
                J=self.get_int("msa.J"),
                grid_points=self.get_int("msa.grid_points"),
                cnr_budget=self.get_int("msa.cnr_budget"),
                distant_mode=self.get("msa.distant_mode"),
            )
        except ValueError as exc:
            raise ConfigError(f"msa: {exc}") from None

    def interval(self) -> EnergyInterval:
        try:
            return EnergyInterval(
                self.get_float("interval.e_low"),
                self.get_float("interval.e_high"),
                self.get_int("msa.grid_points"),
            )
        except ValueError as exc:
            raise ConfigError(f"interval: {exc}") from None

    def schedule(self) -> MsaSchedule:
        try:
            return MsaSchedule.build(
                L0=self.get_int("msa.L0"),
                m0=self.get_float("msa.m0"),
                gamma=self.get_float("msa.gamma"),
                K=self.get_int("msa.K"),
                alpha=self.get_float("msa.alpha"),
            )
        except ValueError as exc:
            raise ConfigError(f"msa schedule: {exc}") from None

    def cube(self) -> Cube:
        center = self.get_ints("cube.center")
        try:
            return Cube(center, self.get_int("cube.radius"), self.get_int("model.d"))
        except ValueError as exc:
            raise ConfigError(f"cube: {exc}") from None

    def pair_kind(self) -> str:
        raw = self.get("dsk.pair_kind")
        if raw not in PAIR_KINDS:
            raise ConfigError(
                f"dsk.pair_kind: expected one of {sorted(set(PAIR_KINDS))}, got {raw!r}"
            )
        return PAIR_KINDS[raw]

    # -- validation and identity ---------------------------------------------

    def validate(self) -> None:
        self.distribution()
        self.interaction()
        self.msa_params()
        self.interval()
        if self.get_int("msa.L0") <= 2:
            raise ConfigError("msa.L0: initial length must satisfy L0 > 2")
        if self.get_int("run.n_samples") < 1:
            raise ConfigError("run.n_samples: must be at least 1")
        if self.get_int("run.workers") < 1:
            raise ConfigError("run.workers: must be at least 1")
        if self.get("run.mode") not in ("auto", "montecarlo", "mc", "exhaustive"):
            raise ConfigError(f"run.mode: unknown mode {self.get('run.mode')!r}")
        self.pair_kind()

    def canonical_text(self) -> str:
        lines = [
            f"{k} = {v}"
            for k, v in sorted(self.values.items())
            if k not in VOLATILE_KEYS
        ]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]
