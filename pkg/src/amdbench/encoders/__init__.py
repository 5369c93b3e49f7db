"""Approach-specific feature encoders (fit on train / transform any)."""

from .base import Encoder, NotFittedError, labels_of, row_ids_of
from .binary import (
    DREBIN_CATEGORIES,
    RAMDA_CATEGORIES,
    XMAL_CATEGORIES,
    CategoryBinaryEncoder,
    HinDroidKernelEncoder,
    MultimodalEncoder,
    prefixed_features,
)
from .cache import cache_key, config_hash, corpus_hash, load_encoded, save_encoded
from .graphenc import (
    ApiPermissionMap,
    HomDroidEncoder,
    MalScanEncoder,
    MamaDroidEncoder,
    MsDroidEncoder,
    SdacEncoder,
    homdroid_vector,
    malscan_vector,
)
from .sequence import OpcodeImageEncoder, TokenSequenceEncoder, opcode_image

__all__ = [
    "ApiPermissionMap",
    "CategoryBinaryEncoder",
    "DREBIN_CATEGORIES",
    "Encoder",
    "HinDroidKernelEncoder",
    "HomDroidEncoder",
    "MalScanEncoder",
    "MamaDroidEncoder",
    "MsDroidEncoder",
    "MultimodalEncoder",
    "NotFittedError",
    "OpcodeImageEncoder",
    "RAMDA_CATEGORIES",
    "SdacEncoder",
    "TokenSequenceEncoder",
    "XMAL_CATEGORIES",
    "cache_key",
    "config_hash",
    "corpus_hash",
    "homdroid_vector",
    "labels_of",
    "load_encoded",
    "malscan_vector",
    "opcode_image",
    "prefixed_features",
    "row_ids_of",
    "save_encoded",
]
