from vixify.crypto.hashing import (
    ADDRESS,
    EMPTY_TREE,
    LEAF,
    NODE,
    SECTION_A,
    SECTION_AB,
    hash_digest,
)
from vixify.crypto.vdf import (
    VdfCancelled,
    VdfError,
    VdfParams,
    VdfProof,
    vdf_eval,
    vdf_setup,
    vdf_verify,
)
from vixify.crypto.vrf import (
    VrfError,
    VrfKeyPair,
    VrfOutput,
    vrf_eval,
    vrf_eval_int,
    vrf_hash,
    vrf_keygen,
    vrf_verify,
)

__all__ = [
    "ADDRESS",
    "EMPTY_TREE",
    "LEAF",
    "NODE",
    "SECTION_A",
    "SECTION_AB",
    "VdfCancelled",
    "VdfError",
    "VdfParams",
    "VdfProof",
    "VrfError",
    "VrfKeyPair",
    "VrfOutput",
    "hash_digest",
    "vdf_eval",
    "vdf_setup",
    "vdf_verify",
    "vrf_eval",
    "vrf_eval_int",
    "vrf_hash",
    "vrf_keygen",
    "vrf_verify",
]
