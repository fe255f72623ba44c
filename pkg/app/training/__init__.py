"""
Training from scratch: loss, analytic gradients, Adam and the two training stages
"""
from app.training.corpus import FrequencyPool, PooledBatches
from app.training.schemas import FS_TRAIN, ZS_TRAIN, EpochLog, TrainConfig, TrainingHistory
from app.training.stages import (
    complementary_init,
    freeze_frequency_experts,
    select_k_full_shot,
    train_expert_stage1,
    train_joint,
    train_router_stage2,
)
from app.training.trainer import Trainer, WindowBatches

__all__ = [
    'FrequencyPool',
    'PooledBatches',
    'FS_TRAIN',
    'ZS_TRAIN',
    'EpochLog',
    'TrainConfig',
    'TrainingHistory',
    'complementary_init',
    'freeze_frequency_experts',
    'select_k_full_shot',
    'train_expert_stage1',
    'train_joint',
    'train_router_stage2',
    'Trainer',
    'WindowBatches',
]
