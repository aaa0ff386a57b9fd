from .bigmath import NotInvertibleError, invmod, mod_arith, mulmod, powmod
from .fixedpoint import DEFAULT_CODEC, FixedPointCodec, FixedPointOverflow, decode_fixed, encode_fixed
from .riac import (
    Ciphertext,
    HeadroomExhausted,
    KeyMismatch,
    PlaintextOutOfRange,
    RiacContext,
    RiacKey,
    ct_add,
    ct_scalar_mul,
    ct_sum,
    decrypt,
    decrypt_raw,
    encrypt,
    encrypt_many,
    generate_key,
)

__all__ = [
    "Ciphertext",
    "DEFAULT_CODEC",
    "FixedPointCodec",
    "FixedPointOverflow",
    "HeadroomExhausted",
    "KeyMismatch",
    "NotInvertibleError",
    "PlaintextOutOfRange",
    "RiacContext",
    "RiacKey",
    "ct_add",
    "ct_scalar_mul",
    "ct_sum",
    "decode_fixed",
    "decrypt",
    "decrypt_raw",
    "encode_fixed",
    "encrypt",
    "encrypt_many",
    "generate_key",
    "invmod",
    "mod_arith",
    "mulmod",
    "powmod",
]
