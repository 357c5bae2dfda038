from __future__ import annotations
import os
from enum import Enum
from pathlib import Path
from typing import Optional, List, Dict, Any

import numpy as np
import tomlkit
from tomlkit.exceptions import ParseError
from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

from .errors import ConfigError, DataIOError
from .links import LinkKind
from .montecarlo import noise_factor
from .survival import WeightScale

USER_HOME = Path.home() / ".lbsimex"
DEFAULT_PROFILE = "desk"


def zeta_grid(zeta_max: float = 2.0, zeta_step: float = 0.25) -> List[float]:
    if zeta_step <= 0 or zeta_max <= 0:
        raise ConfigError("zeta_max and zeta_step must be positive")
    m = int(round(zeta_max / zeta_step))
    return [round(i * zeta_step, 12) for i in range(m + 1)]


class Extrapolant(str, Enum):
    QUADRATIC = "quadratic"

    @property
    def n_params(self) -> int:
        return 3


class Method(str, Enum):
    NAIVE = "naive"
    SIMEX = "simex"
    TRUE = "true"


class SolverOptions(BaseModel):
    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(100, ge=1)
    beta_init: Optional[List[float]] = None
    fd_step: float = Field(1e-5, gt=0)        # Jacobian step is fd_step * (1 + |beta_j|)
    max_halvings: int = Field(30, ge=0)
    ridge: float = Field(1e-8, ge=0)
    weight_scale: WeightScale = WeightScale.DELAYED
    root_xtol: float = Field(1e-12, gt=0)
    root_maxiter: int = Field(200, ge=1)
    max_doublings: int = Field(200, ge=1)


class SimexConfig(BaseModel):
    B: int = Field(50, ge=1)
    zeta_grid: List[float] = Field(default_factory=zeta_grid)
    extrapolant: Extrapolant = Extrapolant.QUADRATIC
    seed: int = 20240601
    bootstrap_reps: int = Field(200, ge=0)
    error_cov: Optional[List[List[float]]] = None
    max_drop_fraction: float = Field(0.2, ge=0, le=1)
    solver: SolverOptions = Field(default_factory=SolverOptions)

    @field_validator("zeta_grid")
    @classmethod
    def _grid(cls, v: List[float]) -> List[float]:
        if not v or v[0] != 0:
            raise ValueError("zeta grid must start at 0")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("zeta grid must be strictly increasing")
        return v

    @field_validator("error_cov")
    @classmethod
    def _cov(cls, v: Optional[List[List[float]]]) -> Optional[List[List[float]]]:
        if v is not None:
            noise_factor(v)
        return v

    @model_validator(mode="after")
    def _enough_points(self) -> "SimexConfig":
        if len(self.zeta_grid) < self.extrapolant.n_params:
            raise ValueError(
                f"{self.extrapolant.value} extrapolant needs at least "
                f"{self.extrapolant.n_params} zeta values"
            )
        return self

    def covariance(self, p: int) -> np.ndarray:
        if self.error_cov is None:
            raise ConfigError("SIMEX needs the measurement-error covariance (error_cov)")
        S = np.atleast_2d(np.asarray(self.error_cov, dtype=float))
        if S.shape != (p, p):
            raise ConfigError(f"error_cov is {S.shape[0]}x{S.shape[1]} but the cohort has p={p}")
        return S

    def with_cov(self, cov: Any) -> "SimexConfig":
        S = np.atleast_2d(np.asarray(cov, dtype=float))
        noise_factor(S)
        return self.model_copy(update={"error_cov": S.tolist()})


class SimScenario(BaseModel):
    link: LinkKind = LinkKind.PH
    beta0: List[float] = Field(default_factory=lambda: [1.0, 1.0])
    cov_x: List[List[float]] = Field(default_factory=lambda: [[4.0, 0.7], [0.7, 3.0]])
    trunc_upper: float = Field(1.0, gt=0)     # A* ~ U(0, trunc_upper)
    target_censoring: float = Field(0.25, gt=0, lt=1)
    sigma_eta: float = Field(0.5, ge=0)
    sigma_eta_is_sd: bool = False             # default: sigma_eta is the diagonal variance
    n: int = Field(200, ge=1)

    @model_validator(mode="after")
    def _shapes(self) -> "SimScenario":
        p = len(self.beta0)
        S = np.asarray(self.cov_x, dtype=float)
        if S.shape != (p, p):
            raise ValueError(f"cov_x must be {p}x{p} to match beta0")
        noise_factor(S)
        return self

    @property
    def p(self) -> int:
        return len(self.beta0)

    @property
    def error_cov(self) -> np.ndarray:
        v = self.sigma_eta ** 2 if self.sigma_eta_is_sd else self.sigma_eta
        return v * np.eye(self.p)


class CsvSchema(BaseModel):
    id: Optional[str] = "id"
    trunc_time: str = "trunc_time"
    obs_time: str = "obs_time"
    status: str = "status"
    covariates: Optional[List[str]] = None    # None: every w1..wp column
    truth: Optional[List[str]] = None         # None: every x1..xp column, if present


class Profile(BaseModel):
    name: str = DEFAULT_PROFILE
    model: LinkKind = LinkKind.PH
    censoring: List[float] = Field(default_factory=lambda: [0.25])
    sigma_eta: List[float] = Field(default_factory=lambda: [0.5])
    n: int = 200
    reps: int = Field(200, ge=2)
    B: int = Field(50, ge=1)
    zeta_max: float = 2.0
    zeta_step: float = 0.25
    bootstrap_reps: int = Field(200, ge=0)
    seed: int = 20240601
    methods: List[Method] = Field(default_factory=lambda: [Method.NAIVE, Method.SIMEX, Method.TRUE])
    workers: int = Field(1, ge=1)
    tol: float = 1e-8
    max_iter: int = 100
    weight_scale: WeightScale = WeightScale.DELAYED
    sigma_e: List[float] = Field(default_factory=lambda: [0.15, 0.5, 0.75])
    csv: CsvSchema = Field(default_factory=CsvSchema)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(tol=self.tol, max_iter=self.max_iter, weight_scale=self.weight_scale)

    def simex_config(self, error_cov: Any = None) -> SimexConfig:
        cov = None if error_cov is None else np.atleast_2d(np.asarray(error_cov, float)).tolist()
        return SimexConfig(
            B=self.B,
            zeta_grid=zeta_grid(self.zeta_max, self.zeta_step),
            seed=self.seed,
            bootstrap_reps=self.bootstrap_reps,
            error_cov=cov,
            solver=self.solver_options(),
        )


def _read_toml(path: Path) -> Dict[str, Any]:
    try:
        return tomlkit.parse(path.read_text(encoding="utf-8")).unwrap()
    except OSError as e:
        raise DataIOError(f"cannot read config {path}: {e}") from e
    except ParseError as e:
        raise ConfigError(f"{path}: {e}") from e


def _merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def load_profile(profile_name: Optional[str] = None, local_config: Optional[Path] = None) -> Profile:
    # Load .env early
    load_dotenv(dotenv_path=Path(".env"), override=False)
    name = profile_name or os.environ.get("LBSIMEX_PROFILE") or DEFAULT_PROFILE

    # 1) packaged profile, 2) user profile, 3) project-local file
    base: Dict[str, Any] = {}
    pkg_profile_path = Path(__file__).with_name("profiles") / f"{name}.toml"
    user_profile_path = USER_HOME / "profiles" / f"{name}.toml"
    found = False
    for path in (pkg_profile_path, user_profile_path):
        if path.exists():
            base = _merge(base, _read_toml(path))
            found = True
    if profile_name and not found:
        raise ConfigError(f"unknown profile '{profile_name}'")
    if local_config is not None and local_config.exists():
        base = _merge(base, _read_toml(local_config))

    if os.environ.get("LBSIMEX_WORKERS"):
        base["workers"] = int(os.environ["LBSIMEX_WORKERS"])
    base.setdefault("name", name)
    return Profile(**base)
