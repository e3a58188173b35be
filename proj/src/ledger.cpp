#include "hygiea/ledger.hpp"

#include <algorithm>
#include <initializer_list>
#include <set>

namespace hygiea::ledger {
namespace {

using nlohmann::json;
using crypto::element_from_hex;
using crypto::element_to_hex;
using crypto::signature_from_hex;
using crypto::signature_to_hex;

void expect_keys(json const &j, std::initializer_list<char const *> keys)
{
  if (!j.is_object() || j.size() != keys.size())
  {
    throw DecodeError("unexpected object shape");
  }
  for (auto const *k : keys)
  {
    if (!j.contains(k))
    {
      throw DecodeError(std::string("missing key: ") + k);
    }
  }
}

std::string str(json const &j, char const *key)
{
  auto const &v = j.at(key);
  if (!v.is_string())
  {
    throw DecodeError(std::string("expected string: ") + key);
  }
  return v.get<std::string>();
}

std::uint64_t u64(json const &j, char const *key)
{
  auto const &v = j.at(key);
  if (!v.is_number_unsigned())
  {
    throw DecodeError(std::string("expected unsigned integer: ") + key);
  }
  return v.get<std::uint64_t>();
}

json receipt_to_json(Receipt const &r)
{
  return json{{"applied", r.applied},
              {"reason", r.reason},
              {"created", r.created ? r.created->hex() : std::string()}};
}

Receipt receipt_from_json(json const &j)
{
  expect_keys(j, {"applied", "reason", "created"});
  if (!j.at("applied").is_boolean())
  {
    throw DecodeError("expected boolean: applied");
  }
  Receipt r;
  r.applied    = j.at("applied").get<bool>();
  r.reason     = str(j, "reason");
  auto created = str(j, "created");
  if (!created.empty())
  {
    r.created = Address::from_hex(created);
  }
  return r;
}

Block make_genesis_block(GenesisConfig const &config, ContractStore const &store)
{
  Block b;
  b.height     = 0;
  b.timestamp  = config.genesis_time;
  b.tx_root    = tx_root(config.group, {}, {});
  b.state_root = contracts::state_root(config.group, store);
  return b;
}

ContractStore genesis_store(GenesisConfig const &config)
{
  auto const &params = config.group;
  auto const &gb     = config.validators.front();
  auto        gov    = governance_address(params, gb);
  ContractStore store;
  store.emplace(gov, contracts::make_governance(gb));
  store.emplace(factory_address(params, gb), contracts::make_factory(gb, gov, config.policy));
  return store;
}

std::string hex_digest(Digest const &d)
{
  return to_hex(d);
}

}  // namespace

std::string big_to_hex(BigInt const &x)
{
  if (x < 0)
  {
    throw std::invalid_argument("negative value");
  }
  return x.get_str(16);
}

BigInt big_from_hex(std::string_view hex)
{
  if (hex.empty() || (hex.size() > 1 && hex.front() == '0'))
  {
    throw DecodeError("malformed hex integer");
  }
  for (char ch : hex)
  {
    if (!((ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f')))
    {
      throw DecodeError("malformed hex integer");
    }
  }
  return BigInt(std::string(hex), 16);
}

GenesisConfig genesis_config_from_json(json const &j)
{
  try
  {
    if (!j.is_object())
    {
      throw ConfigError("genesis must be a JSON object");
    }
    for (auto const &[key, value] : j.items())
    {
      static std::set<std::string> const allowed{"chain_name", "genesis_time", "group",
                                                 "validators", "policy"};
      if (allowed.count(key) == 0)
      {
        throw ConfigError("unknown genesis key: " + key);
      }
    }
    for (auto const *key : {"chain_name", "genesis_time", "group"})
    {
      if (!j.contains(key))
      {
        throw ConfigError(std::string("genesis is missing ") + key);
      }
    }
    GenesisConfig c;
    c.chain_name   = str(j, "chain_name");
    c.genesis_time = u64(j, "genesis_time");
    auto const &g  = j.at("group");
    expect_keys(g, {"p", "q", "g"});
    c.group.p = big_from_hex(str(g, "p"));
    c.group.q = big_from_hex(str(g, "q"));
    c.group.g = big_from_hex(str(g, "g"));
    c.group.validate();

    if (!j.contains("validators") || !j.at("validators").is_array() ||
        j.at("validators").empty())
    {
      throw ConfigError("genesis must name a validator key");
    }
    if (j.at("validators").size() != 1)
    {
      throw ConfigError("exactly one validator is supported");
    }
    auto const &v = j.at("validators").front();
    if (!v.is_string())
    {
      throw ConfigError("validator key must be a hex string");
    }
    auto pk = element_from_hex(c.group, v.get<std::string>());
    if (!crypto::is_element(c.group, pk))
    {
      throw ConfigError("validator key is not a group element");
    }
    c.validators.push_back(pk);
    if (j.contains("policy"))
    {
      c.policy = contracts::policy_from_json(j.at("policy"));
    }
    return c;
  }
  catch (ConfigError const &)
  {
    throw;
  }
  catch (std::exception const &e)
  {
    throw ConfigError(std::string("invalid genesis: ") + e.what());
  }
}

json to_json(GenesisConfig const &c)
{
  json validators = json::array();
  for (auto const &v : c.validators)
  {
    validators.push_back(element_to_hex(c.group, v));
  }
  return json{{"chain_name", c.chain_name},
              {"genesis_time", c.genesis_time},
              {"group",
               json{{"p", big_to_hex(c.group.p)},
                    {"q", big_to_hex(c.group.q)},
                    {"g", big_to_hex(c.group.g)}}},
              {"validators", validators},
              {"policy", contracts::to_json(c.policy)}};
}

std::string SignedTransaction::signing_string(GroupParams const &params) const
{
  return canonical({{"sender", element_to_hex(params, sender)},
                    {"nonce", std::to_string(nonce)},
                    {"to", payload.to.hex()},
                    {"method", payload.method},
                    {"args", canonical(payload.args)}});
}

SignedTransaction make_transaction(GroupParams const &params, BigInt const &sk,
                                   std::uint64_t nonce, Call payload, crypto::Rng &rng)
{
  SignedTransaction tx;
  tx.sender    = crypto::keypair_from_secret(params, sk).pk;
  tx.nonce     = nonce;
  tx.payload   = std::move(payload);
  tx.signature = crypto::sign(params, sk, tx.signing_string(params), rng);
  return tx;
}

bool transaction_signature_valid(GroupParams const &params, SignedTransaction const &tx)
{
  return crypto::verify(params, tx.sender, tx.signing_string(params), tx.signature);
}

std::string Block::header_string() const
{
  return canonical({{"height", std::to_string(height)},
                    {"parent_hash", hex_digest(parent_hash)},
                    {"timestamp", std::to_string(timestamp)},
                    {"tx_root", hex_digest(tx_root)},
                    {"state_root", hex_digest(state_root)}});
}

Digest Block::hash() const
{
  return crypto::hash_digest(header_string());
}

json to_json(GroupParams const &params, SignedTransaction const &tx)
{
  json args = json::object();
  for (auto const &[k, v] : tx.payload.args)
  {
    args[k] = v;
  }
  return json{{"sender", element_to_hex(params, tx.sender)},
              {"nonce", tx.nonce},
              {"payload",
               json{{"to", tx.payload.to.hex()}, {"method", tx.payload.method}, {"args", args}}},
              {"signature", signature_to_hex(params, tx.signature)}};
}

SignedTransaction transaction_from_json(GroupParams const &params, json const &j)
{
  expect_keys(j, {"sender", "nonce", "payload", "signature"});
  SignedTransaction tx;
  tx.sender     = element_from_hex(params, str(j, "sender"));
  tx.nonce      = u64(j, "nonce");
  auto const &p = j.at("payload");
  expect_keys(p, {"to", "method", "args"});
  tx.payload.to     = Address::from_hex(str(p, "to"));
  tx.payload.method = str(p, "method");
  auto const &args  = p.at("args");
  if (!args.is_object())
  {
    throw DecodeError("args must be an object");
  }
  for (auto const &[k, v] : args.items())
  {
    if (!v.is_string())
    {
      throw DecodeError("argument values must be strings");
    }
    tx.payload.args.emplace(k, v.get<std::string>());
  }
  tx.signature = signature_from_hex(params, str(j, "signature"));
  return tx;
}

Digest tx_root(GroupParams const &params, std::vector<SignedTransaction> const &txs,
               std::vector<Receipt> const &receipts)
{
  json t = json::array();
  json r = json::array();
  for (auto const &tx : txs)
  {
    t.push_back(to_json(params, tx));
  }
  for (auto const &rc : receipts)
  {
    r.push_back(receipt_to_json(rc));
  }
  return crypto::hash_digest(json{{"transactions", t}, {"receipts", r}}.dump());
}

json to_json(GroupParams const &params, Block const &b)
{
  json txs      = json::array();
  json receipts = json::array();
  for (auto const &tx : b.transactions)
  {
    txs.push_back(to_json(params, tx));
  }
  for (auto const &r : b.receipts)
  {
    receipts.push_back(receipt_to_json(r));
  }
  return json{{"height", b.height},
              {"parent_hash", hex_digest(b.parent_hash)},
              {"timestamp", b.timestamp},
              {"tx_root", hex_digest(b.tx_root)},
              {"state_root", hex_digest(b.state_root)},
              {"transactions", txs},
              {"receipts", receipts},
              {"validator_signature",
               b.validator_signature ? signature_to_hex(params, *b.validator_signature)
                                     : std::string()}};
}

Block block_from_json(GroupParams const &params, json const &j)
{
  expect_keys(j, {"height", "parent_hash", "timestamp", "tx_root", "state_root", "transactions",
                  "receipts", "validator_signature"});
  Block b;
  b.height      = u64(j, "height");
  b.parent_hash = digest_from_hex(str(j, "parent_hash"));
  b.timestamp   = u64(j, "timestamp");
  b.tx_root     = digest_from_hex(str(j, "tx_root"));
  b.state_root  = digest_from_hex(str(j, "state_root"));
  auto const &txs      = j.at("transactions");
  auto const &receipts = j.at("receipts");
  if (!txs.is_array() || !receipts.is_array() || txs.size() != receipts.size())
  {
    throw DecodeError("transactions and receipts must be arrays of equal length");
  }
  for (auto const &t : txs)
  {
    b.transactions.push_back(transaction_from_json(params, t));
  }
  for (auto const &r : receipts)
  {
    b.receipts.push_back(receipt_from_json(r));
  }
  auto sig = str(j, "validator_signature");
  if (!sig.empty())
  {
    b.validator_signature = signature_from_hex(params, sig);
  }
  return b;
}

Address governance_address(GroupParams const &params, BigInt const &validator)
{
  return crypto::contract_address(crypto::account_address(params, validator), 0);
}

Address factory_address(GroupParams const &params, BigInt const &validator)
{
  return crypto::contract_address(crypto::account_address(params, validator), 1);
}

ChainState ChainState::genesis(GenesisConfig config)
{
  if (config.validators.size() != 1)
  {
    throw ConfigError("exactly one validator is supported");
  }
  if (!crypto::is_element(config.group, config.validators.front()))
  {
    throw ConfigError("validator key is not a group element");
  }
  ChainState s;
  s.config_ = std::move(config);
  s.store_  = genesis_store(s.config_);
  s.blocks_.push_back(make_genesis_block(s.config_, s.store_));
  return s;
}

Address ChainState::governance_address() const
{
  return ledger::governance_address(params(), validator());
}

Address ChainState::factory_address() const
{
  return ledger::factory_address(params(), validator());
}

std::uint64_t ChainState::next_nonce(BigInt const &sender) const
{
  auto it = last_nonce_.find(sender);
  return it == last_nonce_.end() ? 0 : it->second + 1;
}

void ChainState::submit(SignedTransaction tx)
{
  if (!crypto::is_element(params(), tx.sender))
  {
    throw TxRejected("sender is not a valid public key");
  }
  if (!transaction_signature_valid(params(), tx))
  {
    throw TxRejected("invalid transaction signature");
  }
  auto it = last_nonce_.find(tx.sender);
  if (it != last_nonce_.end() && tx.nonce <= it->second)
  {
    throw TxRejected("stale nonce");
  }
  last_nonce_[tx.sender] = tx.nonce;
  pending_.push_back(std::move(tx));
}

Block const &ChainState::seal(BigInt const &validator_sk, Timestamp timestamp, crypto::Rng &rng)
{
  BigInt pk;
  try
  {
    pk = crypto::keypair_from_secret(params(), validator_sk).pk;
  }
  catch (crypto::ParamError const &)
  {
    throw SealRefused("sealing key is not a valid secret key");
  }
  if (pk != validator())
  {
    throw SealRefused("only the validator may seal blocks");
  }
  if (timestamp < head().timestamp)
  {
    throw SealRefused("block timestamp precedes the chain head");
  }

  Block b;
  b.height      = head().height + 1;
  b.parent_hash = head().hash();
  b.timestamp   = timestamp;
  for (auto &tx : pending_)
  {
    contracts::ExecutionContext ctx{params(), tx.sender, timestamp};
    b.receipts.push_back(contracts::execute(store_, ctx, tx.payload));
    b.transactions.push_back(std::move(tx));
  }
  pending_.clear();
  b.tx_root             = tx_root(params(), b.transactions, b.receipts);
  b.state_root          = contracts::state_root(params(), store_);
  b.validator_signature = crypto::sign(params(), validator_sk, b.header_string(), rng);
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

json ChainState::query(Address const &address, std::string const &selector) const
{
  auto it = store_.find(address);
  if (it == store_.end())
  {
    throw NotFound("no contract at " + address.hex());
  }
  auto full = contracts::to_json(params(), it->second);
  auto kind = full.at("kind").get<std::string>();
  if (kind == "factory" && selector == "issued_count")
  {
    return full.at("issued").size();
  }
  if (kind == "certificate")
  {
    if (selector == "status_flag")
    {
      return full.at("certificate").at("status_flag");
    }
    if (selector == "log")
    {
      return full.at("verification_log");
    }
  }
  if (selector == "kind" || !full.contains(selector))
  {
    throw std::invalid_argument("unknown selector '" + selector + "' for " + kind + " contract");
  }
  return full.at(selector);
}

std::string ChainState::export_blocks() const
{
  std::string out;
  for (auto const &b : blocks_)
  {
    out += to_json(params(), b).dump();
    out.push_back('\n');
  }
  return out;
}

std::string ChainState::export_store() const
{
  return contracts::to_json(params(), store_).dump() + "\n";
}

std::string_view to_string(ViolationKind kind)
{
  switch (kind)
  {
  case ViolationKind::Malformed: return "Malformed";
  case ViolationKind::GenesisMismatch: return "GenesisMismatch";
  case ViolationKind::BadHeight: return "BadHeight";
  case ViolationKind::BrokenLink: return "BrokenLink";
  case ViolationKind::TimestampRegression: return "TimestampRegression";
  case ViolationKind::TxRootMismatch: return "TxRootMismatch";
  case ViolationKind::BadTxSignature: return "BadTxSignature";
  case ViolationKind::NonceRegression: return "NonceRegression";
  case ViolationKind::BadValidatorSignature: return "BadValidatorSignature";
  case ViolationKind::ReceiptMismatch: return "ReceiptMismatch";
  case ViolationKind::StateRootMismatch: return "StateRootMismatch";
  case ViolationKind::ReplayMismatch: return "ReplayMismatch";
  }
  return "?";
}

namespace detail {

// store == nullptr skips the final comparison against a supplied store.
std::optional<Violation> verify_blocks(GenesisConfig const &config,
                                       std::vector<Block> const &blocks,
                                       ContractStore const *store)
{
  auto const &params = config.group;
  if (blocks.empty())
  {
    return Violation{0, ViolationKind::Malformed, "chain has no genesis block"};
  }
  auto expected = ChainState::genesis(config);
  if (to_json(params, blocks.front()) != to_json(params, expected.head()))
  {
    return Violation{0, ViolationKind::GenesisMismatch, "genesis block differs from config"};
  }

  // Structural checks first; they are cheap and bound how far the replay
  // below has to go.
  std::optional<Violation> structural;
  for (std::size_t i = 1; i < blocks.size() && !structural; ++i)
  {
    auto const &b    = blocks[i];
    auto const &prev = blocks[i - 1];
    if (b.height != i)
    {
      structural = Violation{i, ViolationKind::BadHeight, "height field does not match position"};
    }
    else if (b.parent_hash != prev.hash())
    {
      structural = Violation{i, ViolationKind::BrokenLink, "parent hash mismatch"};
    }
    else if (b.timestamp < prev.timestamp)
    {
      structural = Violation{i, ViolationKind::TimestampRegression, "timestamp goes backwards"};
    }
    else if (b.tx_root != tx_root(params, b.transactions, b.receipts))
    {
      structural = Violation{i, ViolationKind::TxRootMismatch, "transaction root mismatch"};
    }
  }

  std::size_t const last = structural ? structural->height : blocks.size() - 1;
  ContractStore     replay = expected.store();
  std::map<BigInt, std::uint64_t> nonces;
  auto const &validator = config.validators.front();

  for (std::size_t i = 1; i <= last; ++i)
  {
    if (structural && structural->height == i)
    {
      return structural;
    }
    auto const &b = blocks[i];
    for (std::size_t t = 0; t < b.transactions.size(); ++t)
    {
      auto const &tx = b.transactions[t];
      if (!transaction_signature_valid(params, tx))
      {
        return Violation{i, ViolationKind::BadTxSignature,
                         "transaction " + std::to_string(t) + " has an invalid signature"};
      }
      auto it = nonces.find(tx.sender);
      if (it != nonces.end() && tx.nonce <= it->second)
      {
        return Violation{i, ViolationKind::NonceRegression,
                         "transaction " + std::to_string(t) + " reuses a nonce"};
      }
      nonces[tx.sender] = tx.nonce;
    }
    if (!b.validator_signature ||
        !crypto::verify(params, validator, b.header_string(), *b.validator_signature))
    {
      return Violation{i, ViolationKind::BadValidatorSignature, "block not sealed by validator"};
    }
    for (std::size_t t = 0; t < b.transactions.size(); ++t)
    {
      auto const &tx = b.transactions[t];
      contracts::ExecutionContext ctx{params, tx.sender, b.timestamp};
      if (contracts::execute(replay, ctx, tx.payload) != b.receipts[t])
      {
        return Violation{i, ViolationKind::ReceiptMismatch,
                         "transaction " + std::to_string(t) + " replays to a different receipt"};
      }
    }
    if (contracts::state_root(params, replay) != b.state_root)
    {
      return Violation{i, ViolationKind::StateRootMismatch, "state root does not match replay"};
    }
  }
  if (store != nullptr &&
      contracts::state_root(params, *store) != contracts::state_root(params, replay))
  {
    return Violation{blocks.size() - 1, ViolationKind::ReplayMismatch,
                     "contract store differs from replay of the chain"};
  }
  return std::nullopt;
}

}  // namespace detail

std::optional<Violation> verify_chain(GenesisConfig const &config, std::vector<Block> const &blocks,
                                      ContractStore const &store)
{
  return detail::verify_blocks(config, blocks, &store);
}

std::optional<Violation> verify_chain(ChainState const &state)
{
  return verify_chain(state.config(), state.blocks(), state.store());
}

}  // namespace hygiea::ledger
