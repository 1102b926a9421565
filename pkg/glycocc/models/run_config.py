"""
Run configuration documents: model, schedule, data, split, complex and baseline sections.
"""
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from glycocc.config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_HIDDEN_DIM,
    DEFAULT_INPUT_DIM,
    DEFAULT_LAYERS,
    DEFAULT_LR,
    DEFAULT_SPLIT,
    DROPOUT_P,
    EXHAUSTIVE_CHECK_LIMIT,
    MIN_TWO_CELL_SIZE,
    MORGAN_BITS,
    MORGAN_RADIUS,
    OOD_THRESHOLD,
)
from glycocc.errors import ConfigError
from glycocc.models.complex import NeighborhoodSpec, default_specs

logger = logging.getLogger(__name__)


class TaskKind(str, Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"
    MULTILABEL = "multilabel"
    REGRESSION = "regression"


class PoolingMode(str, Enum):
    GLOBAL_MEAN = "global_mean"
    LOCAL_MEAN = "local_mean"
    WEIGHTED_LOCAL_MEAN = "weighted_local_mean"
    GLOBAL_ATTENTION = "global_attention"
    LOCAL_ATTENTION = "local_attention"
    WEIGHTED_LOCAL_ATTENTION = "weighted_local_attention"


class PEKind(str, Enum):
    NONE = "none"
    RANDOM_WALK = "random_walk"
    LAPLACIAN = "laplacian"
    BOTH = "both"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PEConfig(_Section):
    kind: PEKind = PEKind.NONE
    k: int = Field(default=20, ge=1)

    @property
    def dim(self) -> int:
        if self.kind is PEKind.NONE:
            return 0
        return 2 * self.k if self.kind is PEKind.BOTH else self.k


class HeadConfig(_Section):
    task: TaskKind = TaskKind.BINARY
    n_outputs: int = Field(default=1, ge=1)
    protein_dim: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_outputs(self) -> "HeadConfig":
        if self.task in (TaskKind.BINARY, TaskKind.REGRESSION) and self.n_outputs != 1:
            raise ValueError(f"{self.task.value} heads have exactly one output")
        if self.task is TaskKind.MULTICLASS and self.n_outputs < 2:
            raise ValueError("multiclass heads need at least two outputs")
        return self


class ModelConfig(_Section):
    layers: int = Field(default=DEFAULT_LAYERS, ge=1)
    input_dim: int = Field(default=DEFAULT_INPUT_DIM, ge=1)
    hidden_dim: int = Field(default=DEFAULT_HIDDEN_DIM, ge=1)
    neighborhoods: Optional[List[NeighborhoodSpec]] = None
    epsilon: float = 0.0
    learn_epsilon: bool = False
    pooling: PoolingMode = PoolingMode.GLOBAL_MEAN
    pe: PEConfig = Field(default_factory=PEConfig)
    head: HeadConfig = Field(default_factory=HeadConfig)
    dropout: float = Field(default=DROPOUT_P, ge=0.0, lt=1.0)
    bias: bool = True
    seed: int = 0

    def specs(self) -> List[NeighborhoodSpec]:
        return list(self.neighborhoods) if self.neighborhoods is not None else default_specs()


class ScheduleConfig(_Section):
    epochs: int = Field(default=DEFAULT_EPOCHS, ge=1)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)
    lr: float = Field(default=DEFAULT_LR, gt=0.0)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    eval_every: int = Field(default=1, ge=1)


class DataConfig(_Section):
    dataset: Optional[str] = None
    name: Optional[str] = None
    task: TaskKind = TaskKind.BINARY
    n_classes: int = Field(default=2, ge=1)
    protein_embeddings: Optional[str] = None
    zscore: bool = False
    split_file: Optional[str] = None


class SplitConfig(_Section):
    fractions: Tuple[float, float, float] = DEFAULT_SPLIT
    seed: int = 0
    ood_threshold: float = Field(default=OOD_THRESHOLD, ge=0.0, le=1.0)


class ComplexConfig(_Section):
    min_2cell_size: int = Field(default=MIN_TWO_CELL_SIZE, ge=1)
    alternative_bond_neighborhood: bool = False
    reverse_incidence: bool = False
    exhaustive_limit: int = Field(default=EXHAUSTIVE_CHECK_LIMIT, ge=0)


class BaselineConfig(_Section):
    hidden_dim: int = Field(default=256, ge=1)
    radius: int = Field(default=MORGAN_RADIUS, ge=0)
    n_bits: int = Field(default=MORGAN_BITS, ge=1)
    dropout: float = Field(default=DROPOUT_P, ge=0.0, lt=1.0)


class ModelFamily(str, Enum):
    GIFFLAR = "gifflar"
    FINGERPRINT_MLP = "fingerprint_mlp"


class RunConfig(_Section):
    name: str = "GIFFLAR"
    family: ModelFamily = ModelFamily.GIFFLAR
    model: ModelConfig = Field(default_factory=ModelConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    split: SplitConfig = Field(default_factory=SplitConfig)
    complex: ComplexConfig = Field(default_factory=ComplexConfig)
    baseline: BaselineConfig = Field(default_factory=BaselineConfig)
    output_dir: str = "runs/default"

    @model_validator(mode="after")
    def _resolve(self) -> "RunConfig":
        if self.model.neighborhoods is None:
            self.model.neighborhoods = default_specs(
                self.complex.alternative_bond_neighborhood, self.complex.reverse_incidence
            )
        task = self.data.task
        expected = 1 if task in (TaskKind.BINARY, TaskKind.REGRESSION) else self.data.n_classes
        if self.model.head.task is not task or self.model.head.n_outputs != expected:
            self.model.head = HeadConfig(task=task, n_outputs=expected, protein_dim=self.model.head.protein_dim)
        return self


def _field_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ())) or "<root>"


def parse_run_config(document: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first.get("msg", "invalid value"), _field_path(first)) from e


def load_run_config(path: Optional[Union[str, Path]]) -> RunConfig:
    """Read a JSON config file; None yields the defaults."""
    if path is None:
        return parse_run_config({})
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config file: {e}", str(path)) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON at line {e.lineno}", str(path)) from e
    if not isinstance(document, dict):
        raise ConfigError("Config document must be a JSON object", str(path))
    return parse_run_config(document)


def write_resolved_config(config: RunConfig, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "resolved_config.json"
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
    return path
