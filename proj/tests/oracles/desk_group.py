"""Generates the 512-bit / 256-bit Schnorr group frozen into tests/fixtures.

q is the first prime above a fixed SHA3-derived 256-bit seed; p = q*m + 1 for
the smallest even m that gives a 512-bit prime; g = 2^((p-1)/q) mod p.
"""
import hashlib
from sympy import isprime, nextprime

seed = int.from_bytes(hashlib.sha3_256(b"desk-group-q").digest(), "big") | (1 << 255)
q = nextprime(seed)
m = ((1 << 511) // q) + 1
if m % 2:
    m += 1
while True:
    p = q * m + 1
    if p.bit_length() == 512 and isprime(p):
        break
    m += 2
g = pow(2, (p - 1) // q, p)
assert g != 1 and pow(g, q, p) == 1
print("p", format(p, "x"))
print("q", format(q, "x"))
print("g", format(g, "x"))
