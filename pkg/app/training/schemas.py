"""
Pydantic schemas for training runs
"""
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from app.common.enums import ChannelMode, LrDecay, TrainStage
from app.common.errors import ConfigError


class TrainConfig(BaseModel):
    """
    Hyperparameters of one training stage
    """
    learning_rate: float = Field(default=0.1, gt=0.0)
    batch_size: int = Field(default=512, ge=1)
    epochs: int = Field(default=30, ge=1)
    patience: int = Field(default=5, ge=1)
    lr_decay: LrDecay = LrDecay.EXPONENTIAL
    top_k: int = Field(default=12, ge=1)
    k_sweep: List[int] = Field(default_factory=list)
    noise_std: float = Field(default=0.1, ge=0.0)
    seed: int = 2025
    stage: TrainStage = TrainStage.EXPERT_PRETRAIN
    channel_mode: ChannelMode = ChannelMode.INDEPENDENT
    stride: int = Field(default=1, ge=1)
    window_cap: Optional[int] = Field(default=100_000, ge=1)
    total_cap: Optional[int] = Field(default=1_000_000, ge=1)

    @model_validator(mode="after")
    def check_patience(self):
        if self.patience > self.epochs:
            raise ConfigError(f"Patience {self.patience} exceeds the epoch budget {self.epochs}")
        if any(k < 1 for k in self.k_sweep):
            raise ConfigError(f"Every swept k must be positive, got {self.k_sweep}")
        return self

    class Config:
        json_schema_extra = {
            "example": {
                "learning_rate": 0.05,
                "batch_size": 32,
                "epochs": 30,
                "patience": 5,
                "lr_decay": "none",
                "top_k": 12,
                "k_sweep": [6, 8, 10, 12, 20],
                "noise_std": 0.1,
                "seed": 2025,
                "stage": "router_train",
                "channel_mode": "multivariate",
            }
        }


# Zero-shot pretraining recipe
ZS_TRAIN = TrainConfig()

# Full-shot recipe on a single target dataset
FS_TRAIN = TrainConfig(
    learning_rate=0.05,
    batch_size=32,
    lr_decay=LrDecay.NONE,
    k_sweep=[6, 8, 10, 12, 20],
    stage=TrainStage.ROUTER_TRAIN,
    channel_mode=ChannelMode.MULTIVARIATE,
    window_cap=None,
    total_cap=None,
)


class EpochLog(BaseModel):
    """
    One line of the training log
    """
    stage: TrainStage
    epoch: int
    lr: float
    train_loss: float
    val_loss: Optional[float] = None
    seconds: float

    def record(self) -> dict:
        """
        The log line without wall-clock timing, as stored in checkpoints
        """
        return self.model_dump(mode="json", exclude={"seconds"})


class TrainingHistory(BaseModel):
    """
    Every epoch of a stage plus where the kept snapshot came from
    """
    stage: TrainStage
    epochs: List[EpochLog] = Field(default_factory=list)
    best_epoch: Optional[int] = None
    best_val_loss: Optional[float] = None
    stopped_early: bool = False

    def to_jsonl(self) -> str:
        return "".join(log.model_dump_json() + "\n" for log in self.epochs)
