"""Environment defaults and TOML run configuration."""

import math
import os
import re
import tomllib
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

from .errors import ConfigError, GBCMassError
from .mass_integrals import METHODS, IdentityConfig
from .models import ModelSpec, make_model
from .suite import ALL_CHECKS

CONSTANT_VARIANTS = ("proof", "printed")
FIELDS = ("position", "gradient")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

_TOML_POSITION = re.compile(r"at line (\d+), column (\d+)")


class Settings:
    """Defaults read from the environment (and a .env file)."""

    def __init__(self, env_file: str | None = None):
        """
        Initialize settings.

        Args:
            env_file: Optional path to a .env file. If None, the default
                .env lookup of python-dotenv is used.
        """
        if env_file:
            load_dotenv(env_file)
        else:
            load_dotenv()

    @property
    def threads(self) -> int:
        """Worker threads for quadrature nodes."""
        return int(os.getenv("GBC_THREADS", "1"))

    @property
    def output_dir(self) -> str:
        return os.getenv("GBC_OUTPUT_DIR", "reports")

    @property
    def nodes_per_angle(self) -> int:
        """Default sphere rule resolution."""
        return int(os.getenv("GBC_NODES_PER_ANGLE", "16"))

    @property
    def log_level(self) -> str:
        return os.getenv("GBC_LOG_LEVEL", "INFO").upper()

    @property
    def constant_variant(self) -> str:
        """Bulk constant of the integral identity: proof or printed."""
        variant = os.getenv("GBC_CONSTANT_VARIANT", "proof")
        if variant not in CONSTANT_VARIANTS:
            raise ValueError(
                f"GBC_CONSTANT_VARIANT must be one of {CONSTANT_VARIANTS}, "
                f"got {variant!r}"
            )
        return variant


@dataclass(frozen=True)
class RunConfig:
    """
    A validated run description.

    Args:
        model: Zoo model request
        q: Mass order
        methods: Mass methods to run
        vector_field: Field for the Lovelock flux
        identity: Ladder, resolution and tolerances for global checks
        sample_points: Random points per pointwise identity
        seed: Seed for sample points
        pointwise_rtol: Override of the per-check pointwise tolerances
        checks: Checks to run in the verify suite; None runs all that apply
        flip_riemann_sign: Debug flag reversing the Riemann sign
        sweep_nodes: Sphere resolutions of the refinement study
        sweep_rungs: Ladder lengths of the refinement study
        output_dir: Directory for JSON and CSV reports
        log_level: Logging level name
    """

    model: ModelSpec
    q: int = 1
    methods: tuple[str, ...] = ("coordinate-adm",)
    vector_field: str = "position"
    identity: IdentityConfig = field(default_factory=IdentityConfig)
    sample_points: int = 50
    seed: int = 0
    pointwise_rtol: float | None = None
    checks: tuple[str, ...] | None = None
    flip_riemann_sign: bool = False
    sweep_nodes: tuple[int, ...] = (4, 8, 16)
    sweep_rungs: tuple[int, ...] = (3, 4, 5)
    output_dir: str = "reports"
    log_level: str = "INFO"

    @property
    def riemann_sign(self) -> float:
        return -1.0 if self.flip_riemann_sign else 1.0


def set_path(data: dict[str, Any], dotted: str, value: Any) -> None:
    """Set ``data[a][b] = value`` for the dotted path ``a.b``."""
    *parents, leaf = dotted.split(".")
    node = data
    for key in parents:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError("Expected a table", field=key)
    node[leaf] = value


def read_toml(path: str | Path) -> dict[str, Any]:
    """
    Parse a TOML file.

    Raises:
        ConfigError: If the file is missing or malformed; syntax errors
            carry their line and column
    """
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"Config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        match = _TOML_POSITION.search(str(exc))
        line, column = (
            (int(match.group(1)), int(match.group(2))) if match else (None, None)
        )
        raise ConfigError(
            f"Invalid TOML in {path}: {exc}", line=line, column=column
        ) from exc


class _Reader:
    """Typed access to one table of the raw config, with dotted paths."""

    def __init__(self, data: Mapping[str, Any], section: str):
        table = data.get(section, {})
        if not isinstance(table, Mapping):
            raise ConfigError("Expected a table", field=section)
        self.table = table
        self.section = section

    def path(self, key: str) -> str:
        return f"{self.section}.{key}"

    def get(self, key: str, default: Any) -> Any:
        return self.table.get(key, default)

    def integer(self, key: str, default: int, minimum: int = 0) -> int:
        value = self.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"Expected an integer, got {value!r}", self.path(key))
        if value < minimum:
            raise ConfigError(f"Must be >= {minimum}, got {value}", self.path(key))
        return value

    def number(self, key: str, default: float | None) -> float | None:
        value = self.get(key, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ConfigError(f"Expected a number, got {value!r}", self.path(key))
        return float(value)

    def positive(self, key: str, default: float) -> float:
        value = self.number(key, default)
        if value is None or not value > 0 or not math.isfinite(value):
            raise ConfigError(f"Must be positive, got {value!r}", self.path(key))
        return value

    def choice(self, key: str, default: str, options: tuple[str, ...]) -> str:
        value = self.get(key, default)
        if value not in options:
            raise ConfigError(
                f"Expected one of {list(options)}, got {value!r}", self.path(key)
            )
        return value

    def integers(self, key: str, default: tuple[int, ...]) -> tuple[int, ...]:
        value = self.get(key, list(default))
        if not isinstance(value, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in value
        ):
            raise ConfigError(
                f"Expected a list of positive integers, got {value!r}",
                self.path(key),
            )
        return tuple(value)


def _ladder(reader: _Reader) -> tuple[float, ...]:
    radii = reader.get("radii", None)
    if radii is None:
        rho0 = reader.positive("rho0", 25.0)
        rungs = reader.integer("rungs", 4, minimum=3)
        return tuple(rho0 * 2.0**k for k in range(rungs))
    if not isinstance(radii, list) or not all(
        isinstance(r, int | float) and not isinstance(r, bool) for r in radii
    ):
        raise ConfigError("Expected a list of numbers", reader.path("radii"))
    values = tuple(float(r) for r in radii)
    if len(values) < 3:
        raise ConfigError("Need at least 3 radii", reader.path("radii"))
    if any(r <= 0 for r in values) or any(
        b <= a for a, b in zip(values, values[1:], strict=False)
    ):
        raise ConfigError(
            "Radii must be positive and strictly increasing", reader.path("radii")
        )
    return values


def _optional_positive(reader: _Reader, key: str) -> float | None:
    if reader.get(key, None) is None:
        return None
    return reader.positive(key, 0.0)


def _checks(reader: _Reader) -> tuple[str, ...] | None:
    checks = reader.get("checks", None)
    if checks is None:
        return None
    if not isinstance(checks, list) or not checks:
        raise ConfigError("Expected a non-empty list", reader.path("checks"))
    unknown = [c for c in checks if c not in ALL_CHECKS]
    if unknown:
        raise ConfigError(
            f"Unknown checks {unknown}; expected some of {list(ALL_CHECKS)}",
            reader.path("checks"),
        )
    return tuple(checks)


def build_run_config(
    data: Mapping[str, Any], settings: Settings | None = None
) -> RunConfig:
    """
    Validate raw config tables into a RunConfig.

    Settings fill values missing from ``data``. The model is built once
    to check 2q < n and that the ladder lies inside its chart.

    Raises:
        ConfigError: With the dotted path of the offending field
    """
    settings = settings or Settings()
    model_table = _Reader(data, "model")
    run = _Reader(data, "run")
    quad = _Reader(data, "quadrature")
    ladder = _Reader(data, "ladder")
    tol = _Reader(data, "tolerances")
    sweep = _Reader(data, "sweep")
    output = _Reader(data, "output")

    name = model_table.get("name", None)
    if not isinstance(name, str):
        raise ConfigError("A model name is required", "model.name")
    parameters = {k: v for k, v in model_table.table.items() if k != "name"}
    spec = ModelSpec(name, parameters)
    try:
        model = make_model(spec)
    except GBCMassError as exc:
        raise ConfigError(str(exc), "model") from exc

    q = run.integer("q", 1, minimum=1)
    if 2 * q >= model.dim:
        raise ConfigError(f"Order q={q} requires 2q < n={model.dim}", "run.q")
    methods = run.get("methods", ["coordinate-adm"])
    if isinstance(methods, str):
        methods = [methods]
    if not isinstance(methods, list) or not methods:
        raise ConfigError("Expected a non-empty list", "run.methods")
    for method in methods:
        if method not in METHODS:
            raise ConfigError(
                f"Unknown method {method!r}; expected one of {list(METHODS)}",
                "run.methods",
            )

    radii = _ladder(ladder)
    for rho in radii:
        if not (model.rho_min < rho <= model.rho_max):
            raise ConfigError(
                f"Radius {rho} outside the chart ({model.rho_min}, "
                f"{model.rho_max}] of {model.name!r}",
                "ladder.radii",
            )
    hint = run.number("fit_exponent", None)
    if hint is not None and hint <= 0:
        raise ConfigError("Must be positive", "run.fit_exponent")
    r_max = quad.number("r_max", None)
    if r_max is not None and not model.rho_min < r_max <= model.rho_max:
        raise ConfigError("Outside the model's chart", "quadrature.r_max")

    identity = IdentityConfig(
        radii=radii,
        nodes_per_angle=quad.integer(
            "nodes_per_angle", settings.nodes_per_angle, minimum=1
        ),
        radial_shells=quad.integer("radial_shells", 10, minimum=1),
        radial_nodes=quad.integer("radial_nodes", 8, minimum=1),
        r_max=r_max,
        rtol=tol.positive("rtol", 0.02),
        atol=tol.positive("atol", 1e-6),
        constant_variant=run.choice(
            "constant", settings.constant_variant, CONSTANT_VARIANTS
        ),
        threads=run.integer("threads", settings.threads, minimum=1),
        fit_exponent_hint=hint,
        correction_terms=run.integer("correction_terms", 2, minimum=1),
        tail_uncertainty=tol.positive("tail_uncertainty", 0.25),
    )
    if identity.correction_terms >= len(radii):
        raise ConfigError(
            "Need more radii than correction terms", "run.correction_terms"
        )

    flip = run.get("flip_riemann_sign", False)
    if not isinstance(flip, bool):
        raise ConfigError("Expected true or false", "run.flip_riemann_sign")
    return RunConfig(
        model=spec,
        q=q,
        methods=tuple(methods),
        vector_field=run.choice("field", "position", FIELDS),
        identity=identity,
        sample_points=run.integer("sample_points", 50, minimum=1),
        seed=run.integer("seed", 0),
        pointwise_rtol=_optional_positive(tol, "pointwise_rtol"),
        checks=_checks(run),
        flip_riemann_sign=flip,
        sweep_nodes=sweep.integers("nodes", (4, 8, 16)),
        sweep_rungs=sweep.integers("rungs", (3, 4, 5)),
        output_dir=str(output.get("dir", settings.output_dir)),
        log_level=output.choice("log_level", settings.log_level, LOG_LEVELS),
    )


def load_run_config(
    path: str | Path | None,
    overrides: Mapping[str, Any] | None = None,
    settings: Settings | None = None,
) -> RunConfig:
    """
    Read a TOML config, apply dotted-path overrides and validate.

    Args:
        path: TOML file, or None to build from overrides alone
        overrides: Values such as {"run.q": 2} that take precedence
        settings: Environment defaults

    Examples:
        >>> cfg = load_run_config(None, {"model.name": "flat"})
        >>> cfg.methods
        ('coordinate-adm',)
    """
    data = read_toml(path) if path is not None else {}
    for dotted, value in (overrides or {}).items():
        if value is not None:
            set_path(data, dotted, value)
    return build_run_config(data, settings)
