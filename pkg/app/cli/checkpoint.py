"""
Single-file binary checkpoints

Layout (all integers little-endian):

    magic       8 bytes  b"SPMOECKP"
    version     u16
    meta_len    u32
    metadata    meta_len bytes of UTF-8 JSON (CheckpointMetadata)
    arrays      float64 little-endian, row-major, in the order listed in the metadata
    crc32       u32 over every preceding byte

The frequency table travels inside the metadata, so loading never needs external files.
"""
import hashlib
import logging
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from app.common.enums import ExpertKind
from app.common.errors import IntegrityError, VersionError
from app.model.experts import ExpertBank, LinearExpert
from app.model.forecaster import MixtureForecaster
from app.model.gating import GatingNetwork

logger = logging.getLogger(__name__)

MAGIC = b"SPMOECKP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHI")
_CRC = struct.Struct("<I")
_FLOAT = np.dtype("<f8")


class ArrayRecord(BaseModel):
    name: str
    shape: List[int]


class ExpertRecord(BaseModel):
    name: str
    kind: ExpertKind
    assigned_frequency: Optional[float] = None
    frozen: bool = False


class GateRecord(BaseModel):
    spectrum_size: int
    num_experts: int
    top_k: int
    noise_std: float


class CheckpointMetadata(BaseModel):
    """
    Everything but the raw parameter bytes
    """
    format_version: int = FORMAT_VERSION
    lookback: int
    horizon: int
    include_naive: bool
    include_mean: bool
    frequency_table: List[float]
    experts: List[ExpertRecord]
    gate: Optional[GateRecord] = None
    arrays: List[ArrayRecord] = Field(default_factory=list)
    run_config: Optional[Dict[str, Any]] = None
    history: Optional[List[Dict[str, Any]]] = None


@dataclass
class LoadedCheckpoint:
    bank: ExpertBank
    gate: Optional[GatingNetwork]
    metadata: CheckpointMetadata

    def model(self) -> MixtureForecaster:
        if self.gate is None:
            raise IntegrityError("Checkpoint holds experts only, no gate")
        return MixtureForecaster(bank=self.bank, gate=self.gate)


def _collect(bank: ExpertBank, gate: Optional[GatingNetwork]) -> List[Tuple[str, np.ndarray]]:
    arrays = []
    for expert in bank.learnable():
        arrays.append((f"{expert.name}.weight", expert.weight))
        arrays.append((f"{expert.name}.bias", expert.bias))
    if gate is not None:
        arrays.append(("gate.weight", gate.weight))
        arrays.append(("gate.bias", gate.bias))
    return arrays


def encode_checkpoint(
    bank: ExpertBank,
    gate: Optional[GatingNetwork] = None,
    run_config: Optional[Dict[str, Any]] = None,
    history: Optional[List[Dict[str, Any]]] = None,
) -> bytes:
    """
    Serialize a bank (and optionally its gate) to checkpoint bytes
    """
    arrays = _collect(bank, gate)
    metadata = CheckpointMetadata(
        lookback=bank.lookback,
        horizon=bank.horizon,
        include_naive=bank.include_naive,
        include_mean=bank.include_mean,
        frequency_table=bank.frequency_table(),
        experts=[
            ExpertRecord(name=e.name, kind=e.kind, assigned_frequency=e.assigned_frequency, frozen=e.frozen)
            for e in bank.learnable()
        ],
        gate=None if gate is None else GateRecord(
            spectrum_size=gate.spectrum_size,
            num_experts=gate.num_experts,
            top_k=gate.top_k,
            noise_std=gate.noise_std,
        ),
        arrays=[ArrayRecord(name=name, shape=list(value.shape)) for name, value in arrays],
        run_config=run_config,
        history=history,
    )
    meta_bytes = metadata.model_dump_json().encode("utf-8")
    body = bytearray(_HEADER.pack(MAGIC, FORMAT_VERSION, len(meta_bytes)))
    body += meta_bytes
    for _, value in arrays:
        body += np.ascontiguousarray(value, dtype=_FLOAT).tobytes()
    body += _CRC.pack(zlib.crc32(bytes(body)))
    return bytes(body)


def save_checkpoint(
    path: Path,
    bank: ExpertBank,
    gate: Optional[GatingNetwork] = None,
    run_config: Optional[Dict[str, Any]] = None,
    history: Optional[List[Dict[str, Any]]] = None,
) -> str:
    """
    Write a checkpoint atomically and return its SHA-256
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_checkpoint(bank, gate, run_config, history)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    digest = hashlib.sha256(data).hexdigest()
    logger.info(f"Saved checkpoint {path} ({len(data)} bytes, sha256 {digest[:12]})")
    return digest


def save_model(path: Path, model: MixtureForecaster, **kwargs) -> str:
    return save_checkpoint(path, model.bank, model.gate, **kwargs)


def decode_checkpoint(data: bytes) -> LoadedCheckpoint:
    """
    Parse and validate checkpoint bytes

    Raises:
        IntegrityError: truncated or corrupt data, with the offending offset
        VersionError: written by another format version
    """
    if len(data) < _HEADER.size + _CRC.size:
        raise IntegrityError(f"Checkpoint truncated: {len(data)} bytes", offset=len(data))
    magic, version, meta_len = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise IntegrityError("Not a checkpoint file (bad magic)", offset=0)
    if version != FORMAT_VERSION:
        raise VersionError(f"Checkpoint format version {version}, this build reads {FORMAT_VERSION}", offset=8)

    crc_offset = len(data) - _CRC.size
    (stored_crc,) = _CRC.unpack_from(data, crc_offset)
    if zlib.crc32(data[:crc_offset]) != stored_crc:
        raise IntegrityError("Checkpoint checksum mismatch (truncated or corrupt)", offset=crc_offset)

    meta_end = _HEADER.size + meta_len
    if meta_end > crc_offset:
        raise IntegrityError("Metadata block runs past the end of the file", offset=_HEADER.size)
    try:
        metadata = CheckpointMetadata.model_validate_json(data[_HEADER.size : meta_end])
    except ValidationError as e:
        raise IntegrityError(f"Invalid checkpoint metadata: {e}", offset=_HEADER.size)

    offset = meta_end
    arrays: Dict[str, np.ndarray] = {}
    for record in metadata.arrays:
        count = int(np.prod(record.shape)) if record.shape else 1
        end = offset + count * _FLOAT.itemsize
        if end > crc_offset:
            raise IntegrityError(f"Array {record.name} runs past the end of the file", offset=offset)
        arrays[record.name] = np.frombuffer(data, dtype=_FLOAT, count=count, offset=offset).reshape(record.shape).astype(np.float64)
        offset = end
    if offset != crc_offset:
        raise IntegrityError(f"{crc_offset - offset} unexpected bytes after the arrays", offset=offset)

    return _rebuild(metadata, arrays)


def _rebuild(metadata: CheckpointMetadata, arrays: Dict[str, np.ndarray]) -> LoadedCheckpoint:
    try:
        frequency, complementary = [], []
        for record in metadata.experts:
            expert = LinearExpert(
                weight=arrays[f"{record.name}.weight"],
                bias=arrays[f"{record.name}.bias"],
                kind=record.kind,
                assigned_frequency=record.assigned_frequency,
                frozen=record.frozen,
            )
            (frequency if record.kind == ExpertKind.FREQUENCY else complementary).append(expert)
        bank = ExpertBank(
            frequency_experts=frequency,
            complementary_experts=complementary,
            include_naive=metadata.include_naive,
            include_mean=metadata.include_mean,
            lookback=metadata.lookback,
            horizon=metadata.horizon,
        )
        gate = None
        if metadata.gate is not None:
            gate = GatingNetwork(
                weight=arrays["gate.weight"],
                bias=arrays["gate.bias"],
                noise_std=metadata.gate.noise_std,
                top_k=metadata.gate.top_k,
            )
    except KeyError as e:
        raise IntegrityError(f"Checkpoint misses array {e}")
    if bank.frequency_table() != metadata.frequency_table:
        raise IntegrityError("Frequency table disagrees with the stored experts")
    if gate is not None and gate.num_experts != bank.size:
        raise IntegrityError(f"Gate scores {gate.num_experts} experts, checkpoint holds {bank.size}")
    return LoadedCheckpoint(bank=bank, gate=gate, metadata=metadata)


def load_checkpoint(path: Path) -> LoadedCheckpoint:
    path = Path(path)
    if not path.exists():
        raise IntegrityError(f"Checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes())


def load_model(path: Path) -> MixtureForecaster:
    return load_checkpoint(path).model()


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
