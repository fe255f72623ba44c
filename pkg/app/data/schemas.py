"""
Pydantic schemas for dataset ingestion
"""
from fractions import Fraction
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.common.enums import MissingPolicy
from app.common.errors import ConfigError

# Fractions must sum to one within this tolerance
SPLIT_TOLERANCE = 1e-9


def parse_frequency(value) -> float:
    """
    Parse a frequency written as "1/N", a decimal string or a number into cycles per step
    """
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"Cannot parse frequency {value!r}: {e}")


class SplitSpec(BaseModel):
    """
    Chronological train/validation/test fractions
    """
    train_frac: float = Field(ge=0.0)
    val_frac: float = Field(ge=0.0)
    test_frac: float = Field(ge=0.0)

    @model_validator(mode="after")
    def check_sum(self):
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > SPLIT_TOLERANCE:
            raise ConfigError(
                f"Split fractions must sum to 1, got {total!r} "
                f"({self.train_frac}, {self.val_frac}, {self.test_frac})"
            )
        return self

    @classmethod
    def parse(cls, text: str) -> "SplitSpec":
        """
        Build a split from "0.6,0.2,0.2"
        """
        parts = [p for p in text.replace("/", ",").split(",") if p.strip()]
        if len(parts) != 3:
            raise ConfigError(f"Split needs three fractions, got {text!r}")
        try:
            train, val, test = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"Split fractions must be numbers, got {text!r}")
        return cls(train_frac=train, val_frac=val, test_frac=test)

    class Config:
        json_schema_extra = {
            "example": {"train_frac": 0.7, "val_frac": 0.1, "test_frac": 0.2}
        }


# Splits used by the long-horizon benchmarks
ETT_SPLIT = SplitSpec(train_frac=0.6, val_frac=0.2, test_frac=0.2)
LTSF_SPLIT = SplitSpec(train_frac=0.7, val_frac=0.1, test_frac=0.2)
# Pretraining corpora: first 80% of each timeline trains, the rest validates
PRETRAIN_SPLIT = SplitSpec(train_frac=0.8, val_frac=0.2, test_frac=0.0)


class CsvSchema(BaseModel):
    """
    Which columns of a CSV become channels and how missing cells are handled
    """
    columns: Optional[List[str]] = None
    timestamp_column: Optional[str] = "date"
    delimiter: str = ","
    missing_policy: MissingPolicy = MissingPolicy.FORWARD_FILL


class DatasetMetadata(BaseModel):
    """
    Sidecar metadata record for one dataset
    """
    name: str
    sampling_rate_label: Optional[str] = None
    dominant_frequency: Optional[float] = None

    @field_validator("dominant_frequency", mode="before")
    @classmethod
    def parse_dominant_frequency(cls, value):
        if value is None:
            return None
        return parse_frequency(value)

    @field_validator("dominant_frequency")
    @classmethod
    def check_range(cls, value):
        if value is not None and not 0.0 < value <= 0.5:
            raise ValueError(f"dominant_frequency must lie in (0, 0.5], got {value}")
        return value

    class Config:
        json_schema_extra = {
            "example": {
                "name": "kdd_cup_2018",
                "sampling_rate_label": "hourly",
                "dominant_frequency": "1/24",
            }
        }
