"""
Pydantic schemas for command runs and stage-1 manifests
"""
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from app.common.enums import Command, TrainingMode
from app.common.errors import ConfigError
from app.model.forecaster import ModelConfig
from app.model.resampling import ResampleConfig
from app.training.schemas import TrainConfig

RUN_CONFIG_FILE = "run_config.json"
MANIFEST_FILE = "manifest.json"
TRAINING_LOG_FILE = "training_log.jsonl"

# Where a run reads and writes artifacts; left out of checkpoint metadata
LOCATION_FIELDS = {"output", "experts_dir"}


class RunConfig(BaseModel):
    """
    Fully resolved configuration of one command

    Written next to every output so each artifact records how (and with which seed) it was made.
    """
    command: Command
    mode: TrainingMode = TrainingMode.ZERO_SHOT
    data: List[Path] = Field(default_factory=list)
    metadata: Optional[Path] = None
    checkpoint: Optional[Path] = None
    experts_dir: Optional[Path] = None
    output: Path = Path("runs")
    seed: int = 2025
    threads: int = Field(default=1, ge=1)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    resample: ResampleConfig = Field(default_factory=ResampleConfig)

    @model_validator(mode="after")
    def check_paths(self):
        missing = [str(p) for p in self.data if not Path(p).exists()]
        for path in (self.metadata, self.checkpoint):
            if path is not None and not Path(path).exists():
                missing.append(str(path))
        if missing:
            raise ConfigError(f"Paths not found: {', '.join(missing)}")
        if self.train.seed != self.seed:
            self.train = self.train.model_copy(update={"seed": self.seed})
        return self

    def checkpoint_snapshot(self) -> dict:
        """
        Settings recorded inside checkpoints: everything but the run locations
        """
        return self.model_dump(mode="json", exclude=LOCATION_FIELDS)

    def write(self, directory: Optional[Path] = None) -> Path:
        directory = Path(directory or self.output)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / RUN_CONFIG_FILE
        path.write_text(self.model_dump_json(indent=2))
        return path

    class Config:
        json_schema_extra = {
            "example": {
                "command": "train-router",
                "mode": "fs",
                "data": ["data/ETTh1.csv"],
                "experts_dir": "runs/experts",
                "output": "runs/etth1",
                "seed": 2025,
                "model": {"lookback": 512, "horizon": 96, "num_complementary": 10},
                "train": {"learning_rate": 0.05, "batch_size": 32, "k_sweep": [6, 8, 10, 12, 20]},
            }
        }


class ManifestEntry(BaseModel):
    """
    One stage-1 expert artifact
    """
    label: str
    frequency: float
    file: str
    sha256: str
    best_val_loss: Optional[float] = None


class ExpertManifest(BaseModel):
    """
    Index of the per-frequency expert files of a stage-1 run
    """
    lookback: int
    horizon: int
    seed: int
    entries: List[ManifestEntry] = Field(default_factory=list)

    def find(self, frequency: float) -> Optional[ManifestEntry]:
        return next((e for e in self.entries if e.frequency == frequency), None)

    def upsert(self, entry: ManifestEntry) -> None:
        self.entries = [e for e in self.entries if e.frequency != entry.frequency] + [entry]
        self.entries.sort(key=lambda e: e.frequency)
