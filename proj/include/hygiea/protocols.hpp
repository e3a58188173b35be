#pragma once

// Registration, issuance and verification sessions between simulated
// parties. Every session runs over the in-process Channel, proves key
// ownership with repeated Schnorr identification rounds, and reaches the
// ledger only through signed transactions that the Governing Body seals.

#include "hygiea/analytics.hpp"
#include "hygiea/binding.hpp"
#include "hygiea/contracts.hpp"
#include "hygiea/crypto.hpp"
#include "hygiea/ledger.hpp"

#include <nlohmann/json.hpp>

#include <deque>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hygiea::protocols {

using contracts::CertStatus;
using contracts::CertType;
using crypto::BigInt;
using crypto::GroupParams;

enum class Role
{
  GoverningBody,
  Issuer,
  Verifier,
  Holder,
};

std::string_view to_string(Role r);
Role             role_from_string(std::string_view text);

struct Party
{
  std::string              id;
  Role                     role{Role::Holder};
  crypto::KeyPair          keys;
  FieldMap                 civil_identity;  // holders only
  crypto::BindingMechanism binding{crypto::BindingMechanism::HashedInfo};
  std::vector<Address>     wallet;          // holders only
};

class ChannelError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct Message
{
  std::string    from;
  std::string    to;
  std::string    kind;
  nlohmann::json body;
};

struct FaultConfig
{
  double drop{0};     // probability a message is lost
  double reorder{0};  // probability a message overtakes the one queued before it
};

// FIFO between the two parties of one session, with an optional fault
// injector. Receiving from an empty queue or getting an unexpected message
// kind raises ChannelError, which aborts the session.
class Channel
{
public:
  explicit Channel(std::uint64_t seed = 0)
    : rng_(seed)
  {}

  void set_faults(FaultConfig faults) { faults_ = faults; }
  void reset() { queue_.clear(); }

  void    send(Message message);
  Message receive(std::string const &to, std::string const &kind);

  std::size_t sent() const { return sent_; }

private:
  crypto::Rng         rng_;
  FaultConfig         faults_;
  std::deque<Message> queue_;
  std::size_t         sent_{0};
};

// One identification round as seen on the wire.
struct Transcript
{
  BigInt pk;
  BigInt I;
  BigInt r;
  BigInt s;
};

// How a (possibly dishonest) prover behaves. Defaults are honest.
struct ProverConduct
{
  std::optional<BigInt>   claimed_pk;  // key announced instead of its own
  std::optional<BigInt>   proving_sk;  // secret used in identification
  std::vector<Transcript> replay;      // replay recorded rounds instead of proving
};

// Holder behaviour during issuance and verification.
struct HolderConduct
{
  ProverConduct                      prover;
  std::optional<crypto::BindingData> presented_binding;      // B_H sent
  std::optional<Address>             presented_certificate;  // C_H sent
  std::optional<FieldMap>            document;  // civil document shown in person
  // Rewrites the contract data the verifier reads (a compromised gateway
  // between verifier and ledger).
  std::function<void(contracts::ContractStore &)> tamper_view;
};

// Stand-in for inspecting a physical identity document: does the document
// belong to the identity the binding was made from?
using DocumentOracle =
    std::function<bool(FieldMap const &document, crypto::BindingData const &binding)>;

// Recomputes the binding from the document with the binding's mechanism.
bool binding_matches_document(FieldMap const &document, crypto::BindingData const &binding);

struct ProtocolConfig
{
  unsigned  identification_rounds{0};  // 0: enough rounds for 2^-80 soundness
  Timestamp max_snapshot_age{24 * kHour};
};

struct RevocationSnapshot
{
  std::set<Address> revoked;
  Timestamp         as_of{0};

  bool operator==(RevocationSnapshot const &) const = default;
};

nlohmann::json     to_json(RevocationSnapshot const &snapshot);
RevocationSnapshot snapshot_from_json(nlohmann::json const &j);

// The on-chain revocation list at the head; as_of is the head timestamp.
RevocationSnapshot export_revocation_snapshot(ledger::ChainState const &chain);

// What an offline verifier carries: the revocation snapshot plus a copy of
// the contract store and the sealed head it was taken from.
struct OfflineCache
{
  RevocationSnapshot      snapshot;
  contracts::ContractStore store;
  ledger::Block           head;
};

OfflineCache export_offline_cache(ledger::ChainState const &chain);

class Consortium
{
public:
  // gb_sk must match the single validator key in the genesis config.
  Consortium(ledger::GenesisConfig genesis, BigInt const &gb_sk, std::uint64_t seed,
             ProtocolConfig config = {});

  ledger::ChainState       &chain() { return chain_; }
  ledger::ChainState const &chain() const { return chain_; }
  GroupParams const        &params() const { return chain_.params(); }
  Party const              &governing_body() const { return gb_; }
  crypto::Rng              &rng() { return rng_; }
  Channel                  &channel() { return channel_; }
  ProtocolConfig const     &config() const { return config_; }
  analytics::RecordStore   &health_records() { return health_; }

  unsigned identification_rounds() const;

  Timestamp now() const { return now_; }
  void      advance_time(Timestamp seconds) { now_ += seconds; }

  // Everything an eavesdropper on the channel saw, in order.
  std::vector<Transcript> const &observed() const { return observed_; }

  DocumentOracle document_oracle = binding_matches_document;

  // Governing Body seals pending transactions at the current time.
  ledger::Block const &seal();

  // Signs with the next nonce, submits, seals, and returns the receipt.
  // Throws ledger::TxRejected when the ledger refuses the transaction.
  contracts::Receipt transact(BigInt const &sk, contracts::Call call);

  // Runs the identification rounds with `prover` proving ownership of pk to
  // `verifier_id`. False on the first failed round.
  bool identify(std::string const &prover_id, std::string const &verifier_id, BigInt const &pk,
                BigInt const &prover_sk, std::vector<Transcript> const &replay);

private:
  ledger::ChainState      chain_;
  Party                   gb_;
  crypto::Rng             rng_;
  Channel                 channel_;
  ProtocolConfig          config_;
  analytics::RecordStore  health_;
  Timestamp               now_;
  std::vector<Transcript> observed_;
};

struct ProtocolResult
{
  bool                   ok{false};
  std::string            reason;   // failure cause, empty on success
  std::optional<Address> address;  // issued certificate
};

struct RegistrationRequest
{
  Role                    role{Role::Issuer};  // Issuer or Verifier
  std::string             country;
  std::string             name;
  std::string             id;
  std::set<CertType>      allowed_types;  // issuers only
  Timestamp               valid_from{0};
  contracts::LoggingClass logging_class{contracts::LoggingClass::ReadOnly};  // verifiers only
};

ProtocolResult run_registration(Consortium &consortium, Party const &candidate,
                                RegistrationRequest const &request,
                                ProverConduct const &conduct = {});

struct IssuanceRequest
{
  CertType                             cert_type{CertType::Test};
  std::optional<analytics::HealthRecord> clinical;
  bool                                 consent{false};
};

ProtocolResult run_issuance(Consortium &consortium, Party const &issuer, Party &holder,
                            IssuanceRequest const &request, HolderConduct const &conduct = {});

// Governing Body actions.
ProtocolResult revoke_certificate(Consortium &consortium, Address const &certificate);
ProtocolResult set_role_status(Consortium &consortium, BigInt const &pk,
                               contracts::RoleStatus status);

enum class Mode
{
  Online,
  Offline,
};

enum class Verdict
{
  Accept,
  Reject,
};

enum class Reason
{
  None,
  MissingSnapshot,
  StaleSnapshot,
  TamperedState,
  VerifierNotAuthorized,
  ChannelFailure,
  UnknownCertificate,
  HolderKeyMismatch,
  IdentificationFailed,
  Revoked,
  InvalidSignature,
  IssuerUntrusted,
  NotYetValid,
  Expired,
  BindingMismatch,
  DocumentMismatch,
  IssuerSignatureInvalid,
};

std::string_view to_string(Mode m);
std::string_view to_string(Verdict v);
std::string_view to_string(Reason r);
Mode             mode_from_string(std::string_view text);
Verdict          verdict_from_string(std::string_view text);
Reason           reason_from_string(std::string_view text);

struct VerificationVerdict
{
  Verdict     outcome{Verdict::Reject};
  Reason      reason{Reason::None};
  Mode        mode{Mode::Online};
  Timestamp   checked_at{0};
  bool        logged{false};     // verification stamped on-chain
  std::string log_error;         // why stamping failed, if it did
};

nlohmann::json to_json(VerificationVerdict const &verdict);

// Online reads the live chain. Offline reads the cache and rejects a missing
// or too old snapshot. A StateUpdating verifier stamps an accepted online
// verification on-chain.
VerificationVerdict run_verification(Consortium &consortium, Party const &verifier,
                                     Party const &holder, Address const &certificate, Mode mode,
                                     OfflineCache const *cache = nullptr,
                                     HolderConduct const &conduct = {});

}  // namespace hygiea::protocols
