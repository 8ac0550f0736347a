"""Run configuration: one INI-style file, strictly validated.

Unknown sections or keys are rejected with their line numbers, as are
malformed values.  The effective configuration (after command-line
overrides) is what gets hashed into artifacts; the output block is left out
of the hash because it controls placement and rendering, not content.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, replace
from typing import Optional

from .errors import ConfigError
from .models import PriorSpec

__all__ = [
    "ModelBlock",
    "SolverBlock",
    "ExperimentBlock",
    "OutputBlock",
    "RunConfig",
    "load_run_config",
]

_SCHEMA = {
    "model": {
        "family", "n", "param", "categories", "prior", "prior_params",
        "eps_trunc",
    },
    "solver": {"method", "k", "k_range", "restarts", "seed", "mesh_constant"},
    "experiment": {
        "theta0", "n_grid", "replicates", "region", "exclude_clamped",
    },
    "output": {"directory", "format", "figures"},
}

_DEFAULT_PRIORS = {
    "binomial": ("beta", (1.0, 1.0)),
    "poisson": ("gamma", (1.0, 1.0)),
}


@dataclass(frozen=True)
class ModelBlock:
    family: str = "binomial"
    sample_size: int = 20
    param: str = "mean"
    categories: int = 3
    prior_family: str = "beta"
    prior_params: tuple = (1.0, 1.0)
    eps_trunc: float = 1e-10

    def prior(self) -> PriorSpec:
        return PriorSpec(self.prior_family, self.prior_params)


@dataclass(frozen=True)
class SolverBlock:
    method: str = "dp"
    k: Optional[int] = None
    k_range: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    restarts: int = 20
    seed: int = 0
    mesh_constant: float = 1.0


@dataclass(frozen=True)
class ExperimentBlock:
    theta0: tuple = (0.3,)
    n_grid: tuple = (50, 100, 200, 400, 800, 1600)
    replicates: int = 2000
    region: tuple = ((0.01, 0.99),)
    exclude_clamped: bool = True


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "out"
    format: str = "csv"
    figures: bool = True


@dataclass(frozen=True)
class RunConfig:
    model: ModelBlock = ModelBlock()
    solver: SolverBlock = SolverBlock()
    experiment: ExperimentBlock = ExperimentBlock()
    output: OutputBlock = OutputBlock()

    def with_overrides(
        self,
        seed: Optional[int] = None,
        directory: Optional[str] = None,
        fmt: Optional[str] = None,
    ) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, solver=replace(cfg.solver, seed=int(seed)))
        out = cfg.output
        if directory is not None:
            out = replace(out, directory=str(directory))
        if fmt is not None:
            out = replace(out, format=str(fmt))
        return replace(cfg, output=out)

    def hash_dict(self) -> dict:
        """Content-determining configuration as plain nested primitives."""
        return {
            "model": {
                "family": self.model.family,
                "n": self.model.sample_size,
                "param": self.model.param,
                "categories": self.model.categories,
                "prior": self.model.prior_family,
                "prior_params": list(self.model.prior_params),
                "eps_trunc": self.model.eps_trunc,
            },
            "solver": {
                "method": self.solver.method,
                "k": self.solver.k,
                "k_range": list(self.solver.k_range),
                "restarts": self.solver.restarts,
                "seed": self.solver.seed,
                "mesh_constant": self.solver.mesh_constant,
            },
            "experiment": {
                "theta0": list(self.experiment.theta0),
                "n_grid": list(self.experiment.n_grid),
                "replicates": self.experiment.replicates,
                "region": [list(ax) for ax in self.experiment.region],
                "exclude_clamped": self.experiment.exclude_clamped,
            },
        }


# ---------------------------------------------------------------------------
# parsing


def _scan_locations(text: str) -> dict:
    """Map (section, key) and ('section', name) to 1-based line numbers."""
    locs = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw[:1] in (" ", "\t"):
            continue  # continuation line of the previous value
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            locs.setdefault(("section", section), lineno)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            locs.setdefault((section, m.group(1).strip().lower()), lineno)
    return locs


class _Reader:
    """Typed access to one section with line-numbered error messages."""

    def __init__(self, path, parser, section, locs):
        self.path = path
        self.section = section
        self.locs = locs
        self.sec = (
            parser[section] if parser.has_section(section) else {}
        )

    def _where(self, key) -> str:
        lineno = self.locs.get((self.section, key))
        at = f":{lineno}" if lineno else ""
        return f"{self.path}{at}: [{self.section}] {key}"

    def _fetch(self, key, conv, default, what):
        if key not in self.sec:
            return default
        raw = self.sec[key].strip()
        try:
            return conv(raw)
        except (ValueError, ConfigError):
            raise ConfigError(f"{self._where(key)}: expected {what}, got {raw!r}")

    def str_choice(self, key, choices, default):
        def conv(raw):
            low = raw.lower()
            if low not in choices:
                raise ConfigError("bad choice")
            return low
        return self._fetch(key, conv, default, " | ".join(sorted(choices)))

    def integer(self, key, default, minimum=None):
        def conv(raw):
            value = int(raw)
            if minimum is not None and value < minimum:
                raise ConfigError("below minimum")
            return value
        what = "an integer" + (f" >= {minimum}" if minimum is not None else "")
        return self._fetch(key, conv, default, what)

    def floating(self, key, default, positive=False):
        def conv(raw):
            value = float(raw)
            if positive and not value > 0.0:
                raise ConfigError("not positive")
            return value
        return self._fetch(
            key, conv, default, "a positive number" if positive else "a number"
        )

    def boolean(self, key, default):
        table = {"true": True, "yes": True, "1": True, "on": True,
                 "false": False, "no": False, "0": False, "off": False}

        def conv(raw):
            low = raw.lower()
            if low not in table:
                raise ConfigError("bad bool")
            return table[low]

        return self._fetch(key, conv, default, "a boolean")

    def float_list(self, key, default):
        def conv(raw):
            parts = [p for p in (s.strip() for s in raw.split(",")) if p]
            if not parts:
                raise ConfigError("empty list")
            return tuple(float(p) for p in parts)
        return self._fetch(key, conv, default, "a comma-separated number list")

    def int_list(self, key, default):
        def conv(raw):
            parts = [p for p in (s.strip() for s in raw.split(",")) if p]
            if not parts:
                raise ConfigError("empty list")
            return tuple(int(p) for p in parts)
        return self._fetch(key, conv, default, "a comma-separated integer list")

    def int_span(self, key, default):
        """Either 'lo..hi' or an explicit comma list."""
        def conv(raw):
            m = re.fullmatch(r"(-?\d+)\s*\.\.\s*(-?\d+)", raw)
            if m:
                lo, hi = int(m.group(1)), int(m.group(2))
                if hi < lo:
                    raise ConfigError("empty span")
                return tuple(range(lo, hi + 1))
            parts = [p for p in (s.strip() for s in raw.split(",")) if p]
            if not parts:
                raise ConfigError("empty list")
            return tuple(int(p) for p in parts)
        return self._fetch(key, conv, default, "'lo..hi' or an integer list")

    def axis_spans(self, key, default):
        """Semicolon-separated per-axis 'lo..hi' float intervals."""
        def conv(raw):
            axes = []
            for chunk in raw.split(";"):
                m = re.fullmatch(
                    r"\s*(-?[\d.eE+-]+)\s*\.\.\s*(-?[\d.eE+-]+)\s*", chunk
                )
                if not m:
                    raise ConfigError("bad interval")
                lo, hi = float(m.group(1)), float(m.group(2))
                if not lo < hi:
                    raise ConfigError("empty interval")
                axes.append((lo, hi))
            return tuple(axes)
        return self._fetch(
            key, conv, default, "per-axis 'lo..hi' intervals joined by ';'"
        )


def load_run_config(path) -> RunConfig:
    """Parse and validate one configuration file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")

    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}")

    locs = _scan_locations(text)
    problems = []
    for section in parser.sections():
        name = section.lower()
        if name not in _SCHEMA:
            lineno = locs.get(("section", name), 0)
            problems.append(f"{path}:{lineno}: unknown section [{section}]")
            continue
        for key in parser[section]:
            if key not in _SCHEMA[name]:
                lineno = locs.get((name, key), 0)
                problems.append(
                    f"{path}:{lineno}: unknown key '{key}' in [{section}]"
                )
    if problems:
        raise ConfigError("; ".join(problems))

    model_r = _Reader(path, parser, "model", locs)
    family = model_r.str_choice(
        "family", {"binomial", "multinomial", "poisson"}, "binomial"
    )
    default_prior, default_params = _DEFAULT_PRIORS.get(
        family, ("dirichlet", None)
    )
    categories = model_r.integer("categories", 3, minimum=2)
    if default_params is None:
        default_params = (1.0,) * categories
    model = ModelBlock(
        family=family,
        sample_size=model_r.integer("n", 20, minimum=1),
        param=model_r.str_choice("param", {"mean", "logit", "arcsin"}, "mean"),
        categories=categories,
        prior_family=model_r.str_choice(
            "prior", {"beta", "dirichlet", "gamma"}, default_prior
        ),
        prior_params=model_r.float_list("prior_params", default_params),
        eps_trunc=model_r.floating("eps_trunc", 1e-10, positive=True),
    )

    solver_r = _Reader(path, parser, "solver", locs)
    solver = SolverBlock(
        method=solver_r.str_choice("method", {"dp", "lloyd", "mesh"}, "dp"),
        k=solver_r.integer("k", None, minimum=1),
        k_range=solver_r.int_span("k_range", SolverBlock.k_range),
        restarts=solver_r.integer("restarts", 20, minimum=1),
        seed=solver_r.integer("seed", 0, minimum=0),
        mesh_constant=solver_r.floating("mesh_constant", 1.0, positive=True),
    )

    exp_r = _Reader(path, parser, "experiment", locs)
    experiment = ExperimentBlock(
        theta0=exp_r.float_list("theta0", (0.3,)),
        n_grid=exp_r.int_list("n_grid", ExperimentBlock.n_grid),
        replicates=exp_r.integer("replicates", 2000, minimum=1),
        region=exp_r.axis_spans("region", ExperimentBlock.region),
        exclude_clamped=exp_r.boolean("exclude_clamped", True),
    )

    out_r = _Reader(path, parser, "output", locs)
    output = OutputBlock(
        directory=(
            out_r.sec["directory"].strip() if "directory" in out_r.sec else "out"
        ),
        format=out_r.str_choice("format", {"csv", "json"}, "csv"),
        figures=out_r.boolean("figures", True),
    )

    return RunConfig(
        model=model, solver=solver, experiment=experiment, output=output
    )
