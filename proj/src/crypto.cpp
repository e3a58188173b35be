#include "hygiea/crypto.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <memory>

namespace hygiea::crypto {
namespace {

constexpr char kModp2048[] =
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

std::size_t byte_length(BigInt const &x)
{
  return (mpz_sizeinbase(x.get_mpz_t(), 2) + 7) / 8;
}

Bytes encode_fixed(BigInt const &x, std::size_t width)
{
  Bytes out(width, 0);
  if (x == 0)
  {
    return out;
  }
  std::size_t count = 0;
  Bytes       raw(byte_length(x));
  mpz_export(raw.data(), &count, 1, 1, 1, 0, x.get_mpz_t());
  raw.resize(count);
  if (count > width)
  {
    throw ParamError("value does not fit the fixed encoding width");
  }
  std::copy(raw.begin(), raw.end(), out.begin() + static_cast<std::ptrdiff_t>(width - count));
  return out;
}

// Cheap structural checks used on every key generation.
void check_structure(GroupParams const &params)
{
  if (params.p < 5 || params.q < 2 || params.q >= params.p)
  {
    throw ParamError("group parameters out of range");
  }
  BigInt pm1 = params.p - 1;
  if (pm1 % params.q != 0)
  {
    throw ParamError("q does not divide p - 1");
  }
  if (params.g <= 1 || params.g >= params.p)
  {
    throw ParamError("generator out of range");
  }
  if (pow_mod(params.g, params.q, params.p) != 1)
  {
    throw ParamError("generator does not have order q");
  }
}

Bytes challenge_input(GroupParams const &params, BigInt const &commitment, BigInt const &pk,
                      std::span<std::uint8_t const> msg)
{
  Bytes data = encode_element(params, commitment);
  Bytes pk_bytes = encode_element(params, pk);
  data.insert(data.end(), pk_bytes.begin(), pk_bytes.end());
  data.insert(data.end(), msg.begin(), msg.end());
  return data;
}

bool in_scalar_range(GroupParams const &params, BigInt const &x)
{
  return x >= 0 && x < params.q;
}

}  // namespace

GroupParams GroupParams::test()
{
  return GroupParams{BigInt(23), BigInt(11), BigInt(2)};
}

GroupParams GroupParams::modp2048()
{
  BigInt p(kModp2048, 16);
  return GroupParams{p, (p - 1) / 2, BigInt(2)};
}

void GroupParams::validate() const
{
  check_structure(*this);
  if (mpz_probab_prime_p(p.get_mpz_t(), 25) == 0)
  {
    throw ParamError("p is not prime");
  }
  if (mpz_probab_prime_p(q.get_mpz_t(), 25) == 0)
  {
    throw ParamError("q is not prime");
  }
}

std::size_t GroupParams::element_size() const
{
  return byte_length(p);
}

std::size_t GroupParams::scalar_size() const
{
  return byte_length(q);
}

BigInt Rng::below(BigInt const &bound)
{
  if (bound <= 0)
  {
    throw ParamError("empty sampling range");
  }
  std::size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
  while (true)
  {
    BigInt candidate = 0;
    std::size_t produced = 0;
    while (produced < bits)
    {
      std::uint64_t word = next();
      BigInt        chunk;
      mpz_import(chunk.get_mpz_t(), 1, 1, sizeof(word), 0, 0, &word);
      candidate <<= 64;
      candidate += chunk;
      produced += 64;
    }
    candidate >>= static_cast<mp_bitcnt_t>(produced - bits);
    if (candidate < bound)
    {
      return candidate;
    }
  }
}

BigInt Rng::nonzero_scalar(BigInt const &q)
{
  return below(q - 1) + 1;
}

double Rng::uniform()
{
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

BigInt pow_mod(BigInt const &base, BigInt const &exp, BigInt const &mod)
{
  BigInt out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

BigInt inverse_mod(BigInt const &value, BigInt const &mod)
{
  BigInt out;
  if (mpz_invert(out.get_mpz_t(), value.get_mpz_t(), mod.get_mpz_t()) == 0)
  {
    throw ParamError("value is not invertible");
  }
  return out;
}

bool is_element(GroupParams const &params, BigInt const &x)
{
  return x > 1 && x < params.p && pow_mod(x, params.q, params.p) == 1;
}

Bytes encode_element(GroupParams const &params, BigInt const &x)
{
  return encode_fixed(x, params.element_size());
}

Bytes encode_scalar(GroupParams const &params, BigInt const &x)
{
  return encode_fixed(x, params.scalar_size());
}

BigInt decode_unsigned(std::span<std::uint8_t const> bytes)
{
  BigInt out = 0;
  if (!bytes.empty())
  {
    mpz_import(out.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  }
  return out;
}

std::string element_to_hex(GroupParams const &params, BigInt const &x)
{
  return to_hex(encode_element(params, x));
}

BigInt element_from_hex(GroupParams const &params, std::string_view hex)
{
  auto raw = from_hex(hex);
  if (raw.size() != params.element_size())
  {
    throw DecodeError("group element has wrong encoded length");
  }
  return decode_unsigned(raw);
}

std::string signature_to_hex(GroupParams const &params, Signature const &sig)
{
  Bytes out = encode_scalar(params, sig.c);
  Bytes z   = encode_scalar(params, sig.z);
  out.insert(out.end(), z.begin(), z.end());
  return to_hex(out);
}

Signature signature_from_hex(GroupParams const &params, std::string_view hex)
{
  auto raw = from_hex(hex);
  auto width = params.scalar_size();
  if (raw.size() != 2 * width)
  {
    throw DecodeError("signature has wrong encoded length");
  }
  std::span<std::uint8_t const> all{raw};
  return Signature{decode_unsigned(all.first(width)), decode_unsigned(all.subspan(width))};
}

Digest hash_digest(std::span<std::uint8_t const> data)
{
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  Digest       out{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha3_256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != out.size())
  {
    throw std::runtime_error("SHA3-256 digest failed");
  }
  return out;
}

BigInt hash_to_scalar(Digest const &digest, BigInt const &q)
{
  BigInt x = decode_unsigned(digest);
  return x % q;
}

KeyPair keygen(GroupParams const &params, Rng &rng)
{
  check_structure(params);
  BigInt sk = rng.nonzero_scalar(params.q);
  return KeyPair{sk, pow_mod(params.g, sk, params.p)};
}

KeyPair keypair_from_secret(GroupParams const &params, BigInt const &sk)
{
  check_structure(params);
  if (sk < 1 || sk >= params.q)
  {
    throw ParamError("secret key must lie in [1, q - 1]");
  }
  return KeyPair{sk, pow_mod(params.g, sk, params.p)};
}

Signature sign(GroupParams const &params, BigInt const &sk, std::span<std::uint8_t const> msg,
               Rng &rng)
{
  return sign_with_nonce(params, sk, msg, rng.nonzero_scalar(params.q));
}

Signature sign_with_nonce(GroupParams const &params, BigInt const &sk,
                          std::span<std::uint8_t const> msg, BigInt const &nonce)
{
  if (sk < 1 || sk >= params.q)
  {
    throw ParamError("secret key must lie in [1, q - 1]");
  }
  if (nonce < 1 || nonce >= params.q)
  {
    throw ParamError("nonce must lie in [1, q - 1]");
  }
  BigInt pk         = pow_mod(params.g, sk, params.p);
  BigInt commitment = pow_mod(params.g, nonce, params.p);
  BigInt c          = hash_to_scalar(hash_digest(challenge_input(params, commitment, pk, msg)), params.q);
  BigInt z          = (nonce + c * sk) % params.q;
  return Signature{c, z};
}

bool verify(GroupParams const &params, BigInt const &pk, std::span<std::uint8_t const> msg,
            Signature const &sig)
{
  if (!is_element(params, pk) || !in_scalar_range(params, sig.c) ||
      !in_scalar_range(params, sig.z))
  {
    return false;
  }
  // I' = g^z * pk^-c
  BigInt neg_c      = (params.q - sig.c) % params.q;
  BigInt commitment = (pow_mod(params.g, sig.z, params.p) * pow_mod(pk, neg_c, params.p)) % params.p;
  if (commitment == 1)
  {
    return false;
  }
  return hash_to_scalar(hash_digest(challenge_input(params, commitment, pk, msg)), params.q) == sig.c;
}

Commitment schnorr_commit(GroupParams const &params, Rng &rng)
{
  BigInt k = rng.nonzero_scalar(params.q);
  return Commitment{pow_mod(params.g, k, params.p), k};
}

BigInt schnorr_challenge(GroupParams const &params, Rng &rng)
{
  return rng.below(params.q);
}

BigInt schnorr_respond(GroupParams const &params, BigInt const &sk, BigInt const &st,
                       BigInt const &r)
{
  return (st + r * sk) % params.q;
}

bool schnorr_check(GroupParams const &params, BigInt const &pk, BigInt const &I, BigInt const &r,
                   BigInt const &s)
{
  if (!is_element(params, pk) || !is_element(params, I) || !in_scalar_range(params, r) ||
      !in_scalar_range(params, s))
  {
    return false;
  }
  return pow_mod(params.g, s, params.p) == (I * pow_mod(pk, r, params.p)) % params.p;
}

BigInt extract_witness(GroupParams const &params, BigInt const &r1, BigInt const &s1,
                       BigInt const &r2, BigInt const &s2)
{
  BigInt dr = r1 - r2;
  BigInt ds = s1 - s2;
  dr %= params.q;
  ds %= params.q;
  if (dr < 0)
  {
    dr += params.q;
  }
  if (ds < 0)
  {
    ds += params.q;
  }
  return (ds * inverse_mod(dr, params.q)) % params.q;
}

BigInt SchnorrProver::commit(Rng &rng)
{
  auto c     = schnorr_commit(params_, rng);
  nonce_     = c.st;
  committed_ = true;
  return c.I;
}

BigInt SchnorrProver::respond(BigInt const &challenge)
{
  if (!committed_)
  {
    throw std::logic_error("respond called without a pending commitment");
  }
  committed_ = false;
  BigInt s   = schnorr_respond(params_, sk_, nonce_, challenge);
  nonce_     = 0;
  return s;
}

BigInt SchnorrVerifier::challenge(BigInt const &commitment, Rng &rng)
{
  commitment_ = commitment;
  challenge_  = schnorr_challenge(params_, rng);
  challenged_ = true;
  return challenge_;
}

bool SchnorrVerifier::check(BigInt const &response) const
{
  return challenged_ && schnorr_check(params_, pk_, commitment_, challenge_, response);
}

Address account_address(GroupParams const &params, BigInt const &pk)
{
  return address_from_digest(hash_digest(encode_element(params, pk)));
}

Address contract_address(Address const &creator, std::uint64_t creator_nonce)
{
  Bytes data(creator.bytes.begin(), creator.bytes.end());
  append_be64(data, creator_nonce);
  return address_from_digest(hash_digest(data));
}

unsigned identification_rounds(GroupParams const &params, unsigned bits)
{
  // log2(q) from mantissa and exponent; exact enough for a round count
  long   exp       = 0;
  double mant      = mpz_get_d_2exp(&exp, params.q.get_mpz_t());
  double per_round = std::log2(mant) + static_cast<double>(exp);
  return std::max(1u, static_cast<unsigned>(std::ceil(bits / per_round)));
}

}  // namespace hygiea::crypto
