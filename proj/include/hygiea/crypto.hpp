#pragma once

#include "hygiea/codec.hpp"

#include <gmpxx.h>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hygiea::crypto {

using BigInt = mpz_class;

class ParamError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// Order-q subgroup of the integers mod p, generated by g.
struct GroupParams
{
  BigInt p;
  BigInt q;
  BigInt g;

  // p = 23, q = 11, g = 2. Small enough to enumerate every element.
  static GroupParams test();
  // 2048-bit safe prime (RFC 3526 group 14), q = (p - 1) / 2, g = 2.
  static GroupParams modp2048();

  // Throws ParamError unless p, q are prime, q | p - 1, g != 1 and g^q = 1.
  void validate() const;

  std::size_t element_size() const;  // bytes
  std::size_t scalar_size() const;   // bytes

  bool operator==(GroupParams const &other) const
  {
    return p == other.p && q == other.q && g == other.g;
  }
};

// Deterministic random source. Every random choice in the library is drawn
// from an instance of this class so that runs replay exactly from a seed.
// Simulation grade only: mt19937_64 is not a cryptographic generator.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : engine_(seed)
  {}

  std::uint64_t next()
  {
    return engine_();
  }

  // Uniform in [0, bound).
  BigInt below(BigInt const &bound);
  // Uniform in [1, q - 1].
  BigInt nonzero_scalar(BigInt const &q);
  // Uniform double in [0, 1).
  double uniform();

private:
  std::mt19937_64 engine_;
};

struct KeyPair
{
  BigInt sk;
  BigInt pk;
};

struct Signature
{
  BigInt c;
  BigInt z;

  bool operator==(Signature const &other) const
  {
    return c == other.c && z == other.z;
  }
};

BigInt pow_mod(BigInt const &base, BigInt const &exp, BigInt const &mod);
BigInt inverse_mod(BigInt const &value, BigInt const &mod);

// True iff 1 < x < p and x lies in the order-q subgroup.
bool is_element(GroupParams const &params, BigInt const &x);

// Fixed-width big-endian encodings.
Bytes encode_element(GroupParams const &params, BigInt const &x);
Bytes encode_scalar(GroupParams const &params, BigInt const &x);
BigInt decode_unsigned(std::span<std::uint8_t const> bytes);

std::string element_to_hex(GroupParams const &params, BigInt const &x);
BigInt element_from_hex(GroupParams const &params, std::string_view hex);
std::string signature_to_hex(GroupParams const &params, Signature const &sig);
Signature signature_from_hex(GroupParams const &params, std::string_view hex);

// SHA3-256.
Digest hash_digest(std::span<std::uint8_t const> data);
inline Digest hash_digest(std::string_view text)
{
  return hash_digest(std::span{reinterpret_cast<std::uint8_t const *>(text.data()), text.size()});
}

// Digest read as a big-endian integer, reduced mod q.
BigInt hash_to_scalar(Digest const &digest, BigInt const &q);

KeyPair keygen(GroupParams const &params, Rng &rng);
// Rejects sk outside [1, q - 1].
KeyPair keypair_from_secret(GroupParams const &params, BigInt const &sk);

// Schnorr signature: I = g^k, c = H(I || pk || msg) mod q, z = k + c*sk mod q.
Signature sign(GroupParams const &params, BigInt const &sk, std::span<std::uint8_t const> msg,
               Rng &rng);
Signature sign_with_nonce(GroupParams const &params, BigInt const &sk,
                          std::span<std::uint8_t const> msg, BigInt const &nonce);
bool verify(GroupParams const &params, BigInt const &pk, std::span<std::uint8_t const> msg,
            Signature const &sig);

inline Signature sign(GroupParams const &params, BigInt const &sk, std::string_view msg, Rng &rng)
{
  return sign(params, sk, std::span{reinterpret_cast<std::uint8_t const *>(msg.data()), msg.size()},
              rng);
}

inline bool verify(GroupParams const &params, BigInt const &pk, std::string_view msg,
                   Signature const &sig)
{
  return verify(params, pk,
                std::span{reinterpret_cast<std::uint8_t const *>(msg.data()), msg.size()}, sig);
}

// Schnorr identification, one round. The prover runs commit and respond, the
// verifier runs challenge and check.
struct Commitment
{
  BigInt I;   // sent to the verifier
  BigInt st;  // nonce, stays with the prover
};

Commitment schnorr_commit(GroupParams const &params, Rng &rng);
BigInt     schnorr_challenge(GroupParams const &params, Rng &rng);
BigInt     schnorr_respond(GroupParams const &params, BigInt const &sk, BigInt const &st,
                           BigInt const &r);
// Accepts iff g^s = I * pk^r (mod p) with all inputs in range.
bool schnorr_check(GroupParams const &params, BigInt const &pk, BigInt const &I, BigInt const &r,
                   BigInt const &s);

// Special soundness: two accepting transcripts sharing I with r1 != r2 yield
// sk = (s1 - s2) / (r1 - r2) mod q.
BigInt extract_witness(GroupParams const &params, BigInt const &r1, BigInt const &s1,
                       BigInt const &r2, BigInt const &s2);

// Prover half of one identification round. The nonce is consumed by respond().
class SchnorrProver
{
public:
  SchnorrProver(GroupParams const &params, BigInt sk)
    : params_(params)
    , sk_(std::move(sk))
  {}

  BigInt commit(Rng &rng);
  BigInt respond(BigInt const &challenge);

private:
  GroupParams const &params_;
  BigInt             sk_;
  BigInt             nonce_;
  bool               committed_{false};
};

// Verifier half of one identification round.
class SchnorrVerifier
{
public:
  SchnorrVerifier(GroupParams const &params, BigInt pk)
    : params_(params)
    , pk_(std::move(pk))
  {}

  BigInt challenge(BigInt const &commitment, Rng &rng);
  bool   check(BigInt const &response) const;

private:
  GroupParams const &params_;
  BigInt             pk_;
  BigInt             commitment_;
  BigInt             challenge_;
  bool               challenged_{false};
};

// Account address: last 20 bytes of H(encoded pk).
Address account_address(GroupParams const &params, BigInt const &pk);
// Contract address: last 20 bytes of H(creator address || creator nonce as big-endian u64).
Address contract_address(Address const &creator, std::uint64_t creator_nonce);

// Sequential rounds needed so that a cheating prover succeeds with
// probability at most 2^-bits.
unsigned identification_rounds(GroupParams const &params, unsigned bits = 80);

}  // namespace hygiea::crypto
