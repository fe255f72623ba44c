"""
Shared enum types for the application
"""
from enum import Enum

class ExpertKind(str, Enum):
    FREQUENCY = "frequency"
    COMPLEMENTARY = "complementary"
    NAIVE = "naive"
    MEAN = "mean"

class TrainStage(str, Enum):
    EXPERT_PRETRAIN = "expert_pretrain"
    ROUTER_TRAIN = "router_train"
    JOINT = "joint"

class ChannelMode(str, Enum):
    INDEPENDENT = "independent"
    MULTIVARIATE = "multivariate"

class LrDecay(str, Enum):
    EXPONENTIAL = "exponential"
    NONE = "none"

class MissingPolicy(str, Enum):
    FORWARD_FILL = "forward_fill"
    DROP_ROW = "drop_row"

class ResampleDirection(str, Enum):
    UP = "up"
    DOWN = "down"
    NONE = "none"

class AdaptationMethod(str, Enum):
    SHORT_UPSAMPLE = "short_upsample"
    LONG_SEARCH = "long_search"
    NONE = "none"

class ShortLookbackMode(str, Enum):
    CEIL_FACTOR = "ceil_factor"
    EXACT = "exact"

class TrainingMode(str, Enum):
    ZERO_SHOT = "zs"
    FULL_SHOT = "fs"

class MetricName(str, Enum):
    MSE = "mse"
    MAE = "mae"
    MASE = "mase"

class Command(str, Enum):
    TRAIN_EXPERTS = "train-experts"
    TRAIN_ROUTER = "train-router"
    FORECAST = "forecast"
    EVALUATE = "evaluate"
    ANALYZE = "analyze"
    SINE_EXP = "sine-exp"
