"""Additively homomorphic encryption with fixed-point plaintext encoding.

Plaintexts are residues modulo the public modulus n.  Multiplying two
ciphertexts adds their plaintexts; raising a ciphertext to an integer power
multiplies its plaintext by that integer.  Real-valued quantities ride on top
of this as scaled integers: a value x is carried as round(x * 2**scale_exp),
with negative values mapped to the upper half of the residue range.  Scales
add under scalar multiplication, so :class:`Ciphertext` and
:class:`EncodedPlain` track ``scale_exp`` and the operations refuse to mix
mismatched scales.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from random import Random
from typing import Union

Real = Union[int, float, Fraction]

__all__ = [
    "PaillierError",
    "KeyGenerationError",
    "PlaintextOverflowError",
    "EncodingOverflowError",
    "ScaleMismatchError",
    "MalformedCiphertextError",
    "PublicKey",
    "PrivateKey",
    "EncodedPlain",
    "Ciphertext",
    "keygen",
    "keypair_from_primes",
    "encrypt",
    "decrypt",
    "add_cipher",
    "scalar_mul",
    "encode_fixed",
    "decode_fixed",
    "serialize_keypair",
    "deserialize_keypair",
    "ciphertext_to_record",
    "ciphertext_from_record",
]


class PaillierError(Exception):
    """Base class for key, encoding and ciphertext failures."""


class KeyGenerationError(PaillierError):
    """No admissible key material could be produced from the given inputs."""


class PlaintextOverflowError(PaillierError):
    """A residue or multiplier falls outside [0, n)."""


class EncodingOverflowError(PaillierError):
    """A real value does not fit the signed range at the requested scale."""


class ScaleMismatchError(PaillierError):
    """Operands carry different fixed-point scales."""


class MalformedCiphertextError(PaillierError):
    """A ciphertext or blinding factor is not a unit in its residue ring."""


@dataclass(frozen=True)
class PublicKey:
    n: int
    g: int

    @property
    def n_sq(self) -> int:
        return self.n * self.n


@dataclass(frozen=True)
class PrivateKey:
    lam: int
    mu: int


@dataclass(frozen=True)
class EncodedPlain:
    """A plaintext residue together with its fixed-point scale."""

    residue: int
    scale_exp: int


@dataclass(frozen=True)
class Ciphertext:
    value: int
    scale_exp: int


_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def _is_probable_prime(candidate: int, rng: Random, rounds: int = 40) -> bool:
    if candidate < 2:
        return False
    for small in _SMALL_PRIMES:
        if candidate % small == 0:
            return candidate == small
    d = candidate - 1
    twos = (d & -d).bit_length() - 1
    d >>= twos
    for _ in range(rounds):
        witness = rng.randrange(2, candidate - 1)
        x = pow(witness, d, candidate)
        if x == 1 or x == candidate - 1:
            continue
        for _ in range(twos - 1):
            x = x * x % candidate
            if x == candidate - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: Random) -> int:
    if bits < 2:
        raise KeyGenerationError("prime width must be at least 2 bits")
    while True:
        candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if _is_probable_prime(candidate, rng):
            return candidate


def _L(value: int, n: int) -> int:
    return (value - 1) // n


def keypair_from_primes(p: int, q: int) -> tuple[PublicKey, PrivateKey]:
    """Assemble a keypair from two distinct primes; the generator is n + 1."""
    if p == q:
        raise KeyGenerationError("the two primes must differ")
    n = p * q
    if math.gcd(n, (p - 1) * (q - 1)) != 1:
        raise KeyGenerationError("n shares a factor with (p-1)(q-1)")
    lam = math.lcm(p - 1, q - 1)
    g = n + 1
    reduced = _L(pow(g, lam, n * n), n)
    if math.gcd(reduced, n) != 1:
        raise KeyGenerationError("generator does not admit decryption")
    mu = pow(reduced, -1, n)
    return PublicKey(n=n, g=g), PrivateKey(lam=lam, mu=mu)


def keygen(bits: int, rng: Random, max_attempts: int = 10_000) -> tuple[PublicKey, PrivateKey]:
    """Generate a keypair whose modulus has exactly ``bits`` bits.

    Key material is a deterministic function of the rng state, so seeded
    generation is reproducible.
    """
    if bits < 16:
        raise KeyGenerationError("modulus width must be at least 16 bits")
    p_bits = (bits + 1) // 2
    q_bits = bits // 2
    for _ in range(max_attempts):
        p = _random_prime(p_bits, rng)
        q = _random_prime(q_bits, rng)
        if p == q:
            continue
        n = p * q
        if n.bit_length() != bits:
            continue
        if math.gcd(n, (p - 1) * (q - 1)) != 1:
            continue
        return keypair_from_primes(p, q)
    raise KeyGenerationError(f"no admissible prime pair found in {max_attempts} attempts")


def _draw_unit(n: int, rng: Random) -> int:
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            return r


def encrypt(
    pk: PublicKey,
    plain: EncodedPlain,
    rng: Random | None = None,
    r: int | None = None,
) -> Ciphertext:
    """Encrypt an encoded residue under ``pk``.

    The blinding factor ``r`` is drawn uniformly from the units modulo n; pass
    an explicit value only when replaying known-answer vectors.
    """
    if not 0 <= plain.residue < pk.n:
        raise PlaintextOverflowError(f"residue {plain.residue} outside [0, {pk.n})")
    if r is None:
        if rng is None:
            raise ValueError("an rng is required when no blinding factor is given")
        r = _draw_unit(pk.n, rng)
    elif not 0 < r < pk.n or math.gcd(r, pk.n) != 1:
        raise MalformedCiphertextError("blinding factor must be a unit modulo n")
    n_sq = pk.n_sq
    if pk.g == pk.n + 1:
        # (n+1)**m = 1 + m*n modulo n**2
        g_pow = (1 + plain.residue * pk.n) % n_sq
    else:
        g_pow = pow(pk.g, plain.residue, n_sq)
    value = g_pow * pow(r, pk.n, n_sq) % n_sq
    return Ciphertext(value=value, scale_exp=plain.scale_exp)


def decrypt(pk: PublicKey, sk: PrivateKey, cipher: Ciphertext) -> EncodedPlain:
    if not 0 < cipher.value < pk.n_sq or math.gcd(cipher.value, pk.n_sq) != 1:
        raise MalformedCiphertextError("ciphertext is not a unit modulo n**2")
    residue = _L(pow(cipher.value, sk.lam, pk.n_sq), pk.n) * sk.mu % pk.n
    return EncodedPlain(residue=residue, scale_exp=cipher.scale_exp)


def add_cipher(pk: PublicKey, first: Ciphertext, second: Ciphertext) -> Ciphertext:
    """Combine two ciphertexts so their plaintexts add; scales must agree."""
    if first.scale_exp != second.scale_exp:
        raise ScaleMismatchError(
            f"cannot add scale {first.scale_exp} to scale {second.scale_exp}"
        )
    return Ciphertext(value=first.value * second.value % pk.n_sq, scale_exp=first.scale_exp)


def scalar_mul(pk: PublicKey, cipher: Ciphertext, k: int, k_scale_exp: int = 0) -> Ciphertext:
    """Multiply the plaintext by the residue ``k``.

    ``k`` must already be in residue form (signed multipliers are mapped in
    via :func:`encode_fixed` first); the result scale is the sum of scales.
    """
    if not 0 <= k < pk.n:
        raise PlaintextOverflowError(f"multiplier residue {k} outside [0, {pk.n})")
    return Ciphertext(
        value=pow(cipher.value, k, pk.n_sq),
        scale_exp=cipher.scale_exp + k_scale_exp,
    )


def encode_fixed(x: Real, scale_exp: int, pk: PublicKey) -> EncodedPlain:
    """Quantize ``x`` to ``scale_exp`` fractional bits and wrap it into [0, n).

    Signed values occupy the two halves of the residue range, so the usable
    magnitude is limited to n / 2 at the chosen scale.
    """
    if scale_exp < 0:
        raise ValueError("scale_exp must be non-negative")
    scaled = round(x * (1 << scale_exp))
    if 2 * abs(scaled) >= pk.n:
        raise EncodingOverflowError(
            f"{x!r} does not fit the signed range at scale 2**{scale_exp}"
        )
    return EncodedPlain(residue=scaled % pk.n, scale_exp=scale_exp)


def decode_fixed(plain: EncodedPlain, pk: PublicKey) -> float:
    """Invert :func:`encode_fixed`; residues above n/2 decode as negative."""
    signed = plain.residue - pk.n if 2 * plain.residue > pk.n else plain.residue
    return signed / (1 << plain.scale_exp)


def serialize_keypair(pk: PublicKey, sk: PrivateKey) -> str:
    """Render a keypair as a text record of decimal strings."""
    record = {"n": str(pk.n), "g": str(pk.g), "lambda": str(sk.lam), "mu": str(sk.mu)}
    return json.dumps(record, sort_keys=True)


def deserialize_keypair(text: str) -> tuple[PublicKey, PrivateKey]:
    record = json.loads(text)
    try:
        pk = PublicKey(n=int(record["n"]), g=int(record["g"]))
        sk = PrivateKey(lam=int(record["lambda"]), mu=int(record["mu"]))
    except KeyError as missing:
        raise KeyGenerationError(f"key record is missing field {missing}") from missing
    return pk, sk


def ciphertext_to_record(cipher: Ciphertext) -> dict:
    return {"value": str(cipher.value), "scale_exp": cipher.scale_exp}


def ciphertext_from_record(record: dict) -> Ciphertext:
    return Ciphertext(value=int(record["value"]), scale_exp=int(record["scale_exp"]))
