"""Run configuration: dataclasses plus an INI reader/writer."""
from __future__ import annotations

import configparser
import hashlib
import json
from io import StringIO
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

PRECONDITIONERS = ("none", "bpx", "jacobi", "richardson")
PATHS = ("auto", "modal", "dense", "krylov")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemConfig:
    dim: int = 2
    J: int = 3
    initial_divisions: int = 2
    solution: str = "trig_log"
    neumann: tuple[str, ...] = ("x1",)  # faces with Neumann data; the rest are Dirichlet


@dataclass(frozen=True)
class SolverConfig:
    preconditioner: str = "bpx"
    omega: float = 1.0
    eps: float = 1e-4
    T: float | None = None  # None: log(1/eps) / lambda_min(BA)


@dataclass(frozen=True)
class SchrodingerConfig:
    Np: int | None = 2048  # None: smallest power of two with dp <= eps^(1/r)
    r: int = 3
    margin: float = 2.0
    path: str = "auto"
    embedded: bool = False
    L: float | None = None
    R: float | None = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    matrices: bool = False
    state: bool = False
    shots: int = 0  # measurement samples per run; 0 disables sampling


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    schrodinger: SchrodingerConfig = field(default_factory=SchrodingerConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0
    level_min: int = 1
    level_max: int = 4

    def validate(self) -> "RunConfig":
        p, s, q = self.problem, self.solver, self.schrodinger
        if p.dim not in (1, 2):
            raise ConfigError(f"problem.dim must be 1 or 2, got {p.dim}")
        if p.solution == "trig_log" and p.dim != 2:
            raise ConfigError("the 'trig_log' solution needs problem.dim = 2")
        if p.J < 0 or p.initial_divisions < 1:
            raise ConfigError("problem.J must be >= 0 and initial_divisions >= 1")
        faces = ("x0", "x1") if p.dim == 1 else ("x0", "x1", "y0", "y1")
        if any(f not in faces for f in p.neumann):
            raise ConfigError(f"unknown Neumann face in {p.neumann}")
        if s.preconditioner not in PRECONDITIONERS:
            raise ConfigError(f"solver.preconditioner must be one of {PRECONDITIONERS}")
        if s.omega <= 0:
            raise ConfigError("solver.omega must be positive")
        if not 0 < s.eps < 1:
            raise ConfigError("solver.eps must lie in (0, 1)")
        if s.T is not None and s.T <= 0:
            raise ConfigError("solver.T must be positive")
        if q.Np is not None and (q.Np < 2 or q.Np & (q.Np - 1)):
            raise ConfigError("schrodinger.Np must be a power of two")
        if not 1 <= q.r <= 12:
            raise ConfigError("schrodinger.r must lie in 1..12")
        if q.path not in PATHS:
            raise ConfigError(f"schrodinger.path must be one of {PATHS}")
        if not 0 <= self.level_min <= self.level_max:
            raise ConfigError("need 0 <= level_min <= level_max")
        return self

    def bc(self) -> dict[str, str]:
        faces = ("x0", "x1") if self.problem.dim == 1 else ("x0", "x1", "y0", "y1")
        return {f: "neumann" if f in self.problem.neumann else "dirichlet" for f in faces}

    def with_level(self, J: int) -> "RunConfig":
        return replace(self, problem=replace(self.problem, J=J))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["problem"]["neumann"] = list(self.problem.neumann)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_SECTIONS = {"problem": ProblemConfig, "solver": SolverConfig,
             "schrodinger": SchrodingerConfig, "output": OutputConfig}
_TOP = ("seed", "level_min", "level_max")


def _coerce(raw: str, default, name: str):
    text = raw.strip()
    if text.lower() in ("auto", "none", "") and (default is None or name in ("T", "Np", "L", "R")):
        return None
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(text)
            return low in ("true", "yes", "1")
        if isinstance(default, tuple):
            return tuple(t.strip() for t in text.split(",") if t.strip())
        if isinstance(default, int) or name in ("Np",):
            return int(text)
        if isinstance(default, float) or name in ("T", "L", "R"):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name} = {raw!r}") from exc


def from_ini(text: str) -> RunConfig:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys such as Np and T are case sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    unknown = set(parser.sections()) - set(_SECTIONS) - {"run"}
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    parts = {}
    for sec, cls in _SECTIONS.items():
        base = cls()
        known = {f.name for f in fields(cls)}
        kw = {}
        if parser.has_section(sec):
            for key, raw in parser.items(sec):
                if key not in known:
                    raise ConfigError(f"unknown key {sec}.{key}")
                kw[key] = _coerce(raw, getattr(base, key), key)
        parts[sec] = replace(base, **kw)
    top = {}
    if parser.has_section("run"):
        for key, raw in parser.items("run"):
            if key not in _TOP:
                raise ConfigError(f"unknown key run.{key}")
            top[key] = _coerce(raw, 0, key)
    return RunConfig(**parts, **top).validate()


def load(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return from_ini(text)


def to_ini(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    d = cfg.to_dict()
    for sec in _SECTIONS:
        parser[sec] = {k: _fmt(v) for k, v in d[sec].items()}
    parser["run"] = {k: _fmt(d[k]) for k in _TOP}
    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, (list, tuple)):
        return ",".join(v)
    return str(v)
