#pragma once

// Single-validator Proof-of-Authority ledger. The Governing Body key is the
// only key that can seal blocks; everyone else submits signed transactions.

#include "hygiea/codec.hpp"
#include "hygiea/contracts.hpp"
#include "hygiea/crypto.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hygiea::ledger {

using contracts::Call;
using contracts::ContractStore;
using contracts::Receipt;
using crypto::BigInt;
using crypto::GroupParams;
using crypto::Signature;

class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

class TxRejected : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class SealRefused : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class NotFound : public std::out_of_range
{
public:
  using std::out_of_range::out_of_range;
};

struct GenesisConfig
{
  std::string         chain_name;
  Timestamp           genesis_time{0};
  GroupParams         group;
  std::vector<BigInt> validators;  // exactly one
  contracts::Policy   policy;
};

// Parses and validates: group structure and primality, exactly one validator
// key that is a group element.
GenesisConfig  genesis_config_from_json(nlohmann::json const &j);
nlohmann::json to_json(GenesisConfig const &config);

// Unsigned big integer as lowercase hex without leading zeros ("0" for zero).
std::string big_to_hex(BigInt const &x);
BigInt      big_from_hex(std::string_view hex);

struct SignedTransaction
{
  BigInt        sender;
  std::uint64_t nonce{0};
  Call          payload;
  Signature     signature;

  // Canonical bytes covered by the signature.
  std::string signing_string(GroupParams const &params) const;
};

SignedTransaction make_transaction(GroupParams const &params, BigInt const &sk,
                                   std::uint64_t nonce, Call payload, crypto::Rng &rng);
bool              transaction_signature_valid(GroupParams const &params,
                                              SignedTransaction const &tx);

struct Block
{
  std::uint64_t                  height{0};
  Digest                         parent_hash{};
  Timestamp                      timestamp{0};
  Digest                         tx_root{};
  Digest                         state_root{};
  std::vector<SignedTransaction> transactions;
  std::vector<Receipt>           receipts;  // one per transaction, same order
  std::optional<Signature>       validator_signature;  // absent only at genesis

  std::string header_string() const;
  Digest      hash() const;
};

nlohmann::json    to_json(GroupParams const &params, SignedTransaction const &tx);
SignedTransaction transaction_from_json(GroupParams const &params, nlohmann::json const &j);
nlohmann::json    to_json(GroupParams const &params, Block const &block);
Block             block_from_json(GroupParams const &params, nlohmann::json const &j);

Digest tx_root(GroupParams const &params, std::vector<SignedTransaction> const &txs,
               std::vector<Receipt> const &receipts);

class ChainState
{
public:
  static ChainState genesis(GenesisConfig config);

  GenesisConfig const                  &config() const { return config_; }
  GroupParams const                    &params() const { return config_.group; }
  BigInt const                         &validator() const { return config_.validators.front(); }
  std::vector<Block> const             &blocks() const { return blocks_; }
  ContractStore const                  &store() const { return store_; }
  std::vector<SignedTransaction> const &pending() const { return pending_; }
  Block const                          &head() const { return blocks_.back(); }

  Address governance_address() const;
  Address factory_address() const;

  // Smallest nonce the sender may use next.
  std::uint64_t next_nonce(BigInt const &sender) const;

  // Throws TxRejected for a bad signature, a sender that is not a group
  // element, or a nonce not above every nonce already seen for the sender.
  void submit(SignedTransaction tx);

  // Throws SealRefused unless sk belongs to the validator and timestamp is
  // not older than the head.
  Block const &seal(BigInt const &validator_sk, Timestamp timestamp, crypto::Rng &rng);

  // Read-only view of one contract field. Throws NotFound for an unknown
  // address and std::invalid_argument for an unknown selector.
  nlohmann::json query(Address const &address, std::string const &selector) const;

  // Chain export: one canonical JSON block per line.
  std::string export_blocks() const;
  std::string export_store() const;

private:
  GenesisConfig                          config_;
  std::vector<Block>                     blocks_;
  ContractStore                          store_;
  std::vector<SignedTransaction>         pending_;
  std::map<BigInt, std::uint64_t>        last_nonce_;
};

Address governance_address(GroupParams const &params, BigInt const &validator);
Address factory_address(GroupParams const &params, BigInt const &validator);

enum class ViolationKind
{
  Malformed,
  GenesisMismatch,
  BadHeight,
  BrokenLink,
  TimestampRegression,
  TxRootMismatch,
  BadTxSignature,
  NonceRegression,
  BadValidatorSignature,
  ReceiptMismatch,
  StateRootMismatch,
  ReplayMismatch,
};

std::string_view to_string(ViolationKind kind);

struct Violation
{
  std::uint64_t height{0};
  ViolationKind kind{ViolationKind::Malformed};
  std::string   detail;
};

// Checks hash links, timestamps, transaction and validator signatures, nonce
// monotonicity, and that replaying every block from genesis reproduces the
// receipts, every state root and the supplied contract store. Returns the
// lowest-height violation, or nothing when the chain is intact.
std::optional<Violation> verify_chain(GenesisConfig const &config, std::vector<Block> const &blocks,
                                      ContractStore const &store);
std::optional<Violation> verify_chain(ChainState const &state);

// Raw chain directory contents: genesis.json, chain.jsonl, store.json.
struct ChainFiles
{
  std::string genesis;
  std::string blocks;
  std::string store;
};

ChainFiles read_chain_files(std::filesystem::path const &dir);
void       write_chain_files(std::filesystem::path const &dir, ChainFiles const &files);
ChainFiles export_files(ChainState const &state);

// Parses strictly (every line must be canonical JSON) and then verifies.
// Unparseable genesis is reported as Malformed at height 0; an unparseable
// block line at that block's height; an unparseable store at the head height.
std::optional<Violation> verify_chain_files(ChainFiles const &files);

}  // namespace hygiea::ledger
