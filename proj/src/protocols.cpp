#include "hygiea/protocols.hpp"

#include <algorithm>

namespace hygiea::protocols {
namespace {

using nlohmann::json;
using contracts::Receipt;
using crypto::element_from_hex;
using crypto::element_to_hex;
using ledger::big_from_hex;
using ledger::big_to_hex;

template <typename E, std::size_t N>
E lookup(std::string_view text, std::array<std::pair<E, char const *>, N> const &table,
         char const *what)
{
  for (auto const &[value, name] : table)
  {
    if (text == name)
    {
      return value;
    }
  }
  throw DecodeError(std::string("unknown ") + what + ": " + std::string(text));
}

template <typename E, std::size_t N>
std::string_view name_of(E value, std::array<std::pair<E, char const *>, N> const &table)
{
  for (auto const &[v, name] : table)
  {
    if (v == value)
    {
      return name;
    }
  }
  return "?";
}

constexpr std::array<std::pair<Role, char const *>, 4> kRoles{{
    {Role::GoverningBody, "GoverningBody"},
    {Role::Issuer, "Issuer"},
    {Role::Verifier, "Verifier"},
    {Role::Holder, "Holder"},
}};
constexpr std::array<std::pair<Mode, char const *>, 2> kModes{{
    {Mode::Online, "Online"},
    {Mode::Offline, "Offline"},
}};
constexpr std::array<std::pair<Verdict, char const *>, 2> kVerdicts{{
    {Verdict::Accept, "Accept"},
    {Verdict::Reject, "Reject"},
}};
constexpr std::array<std::pair<Reason, char const *>, 17> kReasons{{
    {Reason::None, "None"},
    {Reason::MissingSnapshot, "MissingSnapshot"},
    {Reason::StaleSnapshot, "StaleSnapshot"},
    {Reason::TamperedState, "TamperedState"},
    {Reason::VerifierNotAuthorized, "VerifierNotAuthorized"},
    {Reason::ChannelFailure, "ChannelFailure"},
    {Reason::UnknownCertificate, "UnknownCertificate"},
    {Reason::HolderKeyMismatch, "HolderKeyMismatch"},
    {Reason::IdentificationFailed, "IdentificationFailed"},
    {Reason::Revoked, "Revoked"},
    {Reason::InvalidSignature, "InvalidSignature"},
    {Reason::IssuerUntrusted, "IssuerUntrusted"},
    {Reason::NotYetValid, "NotYetValid"},
    {Reason::Expired, "Expired"},
    {Reason::BindingMismatch, "BindingMismatch"},
    {Reason::DocumentMismatch, "DocumentMismatch"},
    {Reason::IssuerSignatureInvalid, "IssuerSignatureInvalid"},
}};

json binding_to_json(crypto::BindingData const &b)
{
  return json{{"mechanism", std::string(crypto::to_string(b.mechanism))},
              {"payload", to_hex(b.payload)}};
}

crypto::BindingData binding_from_json(json const &j)
{
  crypto::BindingData b;
  try
  {
    b.mechanism = crypto::binding_mechanism_from_string(j.at("mechanism").get<std::string>());
  }
  catch (crypto::BindingError const &e)
  {
    throw DecodeError(e.what());
  }
  b.payload = from_hex(j.at("payload").get<std::string>());
  return b;
}

contracts::GovernanceState const &governance_of(contracts::ContractStore const &store,
                                                Address const &address)
{
  auto it = store.find(address);
  if (it == store.end() || !std::holds_alternative<contracts::GovernanceState>(it->second))
  {
    throw std::logic_error("governance contract missing from store");
  }
  return std::get<contracts::GovernanceState>(it->second);
}

ProtocolResult failure(std::string reason)
{
  return ProtocolResult{false, std::move(reason), std::nullopt};
}

ProtocolResult from_receipt(Receipt const &r)
{
  return ProtocolResult{r.applied, r.reason, r.created};
}

Reason reason_for(CertStatus status)
{
  switch (status)
  {
  case CertStatus::Valid: return Reason::None;
  case CertStatus::NotYetValid: return Reason::NotYetValid;
  case CertStatus::Expired: return Reason::Expired;
  case CertStatus::Revoked: return Reason::Revoked;
  case CertStatus::InvalidSignature: return Reason::InvalidSignature;
  case CertStatus::IssuerUntrusted: return Reason::IssuerUntrusted;
  }
  return Reason::InvalidSignature;
}

}  // namespace

std::string_view to_string(Role r)
{
  return name_of(r, kRoles);
}
Role role_from_string(std::string_view text)
{
  return lookup(text, kRoles, "role");
}
std::string_view to_string(Mode m)
{
  return name_of(m, kModes);
}
std::string_view to_string(Verdict v)
{
  return name_of(v, kVerdicts);
}
std::string_view to_string(Reason r)
{
  return name_of(r, kReasons);
}
Mode mode_from_string(std::string_view text)
{
  return lookup(text, kModes, "mode");
}
Verdict verdict_from_string(std::string_view text)
{
  return lookup(text, kVerdicts, "verdict");
}
Reason reason_from_string(std::string_view text)
{
  return lookup(text, kReasons, "reason");
}

void Channel::send(Message message)
{
  ++sent_;
  if (faults_.drop > 0 && rng_.uniform() < faults_.drop)
  {
    return;
  }
  if (faults_.reorder > 0 && !queue_.empty() && rng_.uniform() < faults_.reorder)
  {
    queue_.insert(queue_.end() - 1, std::move(message));
    return;
  }
  queue_.push_back(std::move(message));
}

Message Channel::receive(std::string const &to, std::string const &kind)
{
  if (queue_.empty())
  {
    throw ChannelError("expected " + kind + " for " + to + ", nothing arrived");
  }
  Message m = std::move(queue_.front());
  queue_.pop_front();
  if (m.to != to || m.kind != kind)
  {
    throw ChannelError("expected " + kind + " for " + to + ", got " + m.kind + " for " + m.to);
  }
  return m;
}

bool binding_matches_document(FieldMap const &document, crypto::BindingData const &binding)
{
  try
  {
    return crypto::bind_identity(document, binding.mechanism) == binding;
  }
  catch (crypto::BindingError const &)
  {
    return false;
  }
}

json to_json(RevocationSnapshot const &s)
{
  json revoked = json::array();
  for (auto const &a : s.revoked)
  {
    revoked.push_back(a.hex());
  }
  return json{{"revoked", revoked}, {"as_of", s.as_of}};
}

RevocationSnapshot snapshot_from_json(json const &j)
{
  if (!j.is_object() || j.size() != 2 || !j.contains("revoked") || !j.contains("as_of") ||
      !j.at("revoked").is_array() || !j.at("as_of").is_number_unsigned())
  {
    throw DecodeError("malformed revocation snapshot");
  }
  RevocationSnapshot s;
  s.as_of = j.at("as_of").get<Timestamp>();
  for (auto const &a : j.at("revoked"))
  {
    if (!a.is_string())
    {
      throw DecodeError("malformed revocation snapshot");
    }
    s.revoked.insert(Address::from_hex(a.get<std::string>()));
  }
  return s;
}

RevocationSnapshot export_revocation_snapshot(ledger::ChainState const &chain)
{
  auto const        &gov = governance_of(chain.store(), chain.governance_address());
  RevocationSnapshot s;
  s.revoked.insert(gov.revoked.begin(), gov.revoked.end());
  s.as_of = chain.head().timestamp;
  return s;
}

OfflineCache export_offline_cache(ledger::ChainState const &chain)
{
  return OfflineCache{export_revocation_snapshot(chain), chain.store(), chain.head()};
}

Consortium::Consortium(ledger::GenesisConfig genesis, BigInt const &gb_sk, std::uint64_t seed,
                       ProtocolConfig config)
  : chain_(ledger::ChainState::genesis(std::move(genesis)))
  , rng_(seed)
  , channel_(seed ^ 0x9e3779b97f4a7c15ULL)
  , config_(config)
  , now_(chain_.head().timestamp)
{
  gb_.id   = "governing-body";
  gb_.role = Role::GoverningBody;
  try
  {
    gb_.keys = crypto::keypair_from_secret(chain_.params(), gb_sk);
  }
  catch (crypto::ParamError const &e)
  {
    throw ledger::ConfigError(e.what());
  }
  if (gb_.keys.pk != chain_.validator())
  {
    throw ledger::ConfigError("Governing Body key does not match the genesis validator");
  }
}

unsigned Consortium::identification_rounds() const
{
  return config_.identification_rounds != 0 ? config_.identification_rounds
                                            : crypto::identification_rounds(params());
}

ledger::Block const &Consortium::seal()
{
  return chain_.seal(gb_.keys.sk, now_, rng_);
}

Receipt Consortium::transact(BigInt const &sk, contracts::Call call)
{
  auto pk = crypto::keypair_from_secret(params(), sk).pk;
  auto tx = ledger::make_transaction(params(), sk, chain_.next_nonce(pk), std::move(call), rng_);
  chain_.submit(std::move(tx));
  return seal().receipts.back();
}

bool Consortium::identify(std::string const &prover_id, std::string const &verifier_id,
                          BigInt const &pk, BigInt const &prover_sk,
                          std::vector<Transcript> const &replay)
{
  auto const &params = chain_.params();
  auto const  rounds = identification_rounds();
  for (unsigned i = 0; i < rounds; ++i)
  {
    crypto::SchnorrProver   prover(params, prover_sk);
    crypto::SchnorrVerifier verifier(params, pk);
    Transcript const       *recorded = replay.empty() ? nullptr : &replay[i % replay.size()];

    BigInt I = recorded ? recorded->I : prover.commit(rng_);
    channel_.send({prover_id, verifier_id, "commit", big_to_hex(I)});
    BigInt I_seen = big_from_hex(channel_.receive(verifier_id, "commit").body.get<std::string>());

    BigInt r = verifier.challenge(I_seen, rng_);
    channel_.send({verifier_id, prover_id, "challenge", big_to_hex(r)});
    BigInt r_seen = big_from_hex(channel_.receive(prover_id, "challenge").body.get<std::string>());

    BigInt s = recorded ? recorded->s : prover.respond(r_seen);
    channel_.send({prover_id, verifier_id, "response", big_to_hex(s)});
    BigInt s_seen = big_from_hex(channel_.receive(verifier_id, "response").body.get<std::string>());

    observed_.push_back({pk, I_seen, r, s_seen});
    if (!verifier.check(s_seen))
    {
      return false;
    }
  }
  return true;
}

ProtocolResult run_registration(Consortium &consortium, Party const &candidate,
                                RegistrationRequest const &request, ProverConduct const &conduct)
{
  if (request.role != Role::Issuer && request.role != Role::Verifier)
  {
    return failure("only issuers and verifiers register");
  }
  auto const &params = consortium.params();
  auto const &gb     = consortium.governing_body();
  auto       &chan   = consortium.channel();
  chan.reset();

  BigInt pk;
  try
  {
    json attrs{{"pk", element_to_hex(params, conduct.claimed_pk.value_or(candidate.keys.pk))},
               {"role", std::string(to_string(request.role))},
               {"country", request.country},
               {"name", request.name},
               {"id", request.id}};
    chan.send({candidate.id, gb.id, "registration_request", attrs});
    auto msg = chan.receive(gb.id, "registration_request");
    pk       = element_from_hex(params, msg.body.at("pk").get<std::string>());
    if (!consortium.identify(candidate.id, gb.id, pk,
                             conduct.proving_sk.value_or(candidate.keys.sk), conduct.replay))
    {
      return failure("identification failed");
    }
  }
  catch (ChannelError const &e)
  {
    return failure(std::string("channel failure: ") + e.what());
  }

  auto &rng = consortium.rng();
  auto  gov = consortium.chain().governance_address();
  contracts::Call call;
  if (request.role == Role::Issuer)
  {
    contracts::IssuerRecord r;
    r.country       = request.country;
    r.name          = request.name;
    r.id            = request.id;
    r.allowed_types = request.allowed_types;
    r.valid_from    = request.valid_from;
    r.pk            = pk;
    r.attestation   = contracts::attest(params, gb.keys.sk, r, rng);
    call            = contracts::calls::register_issuer(params, gov, r);
  }
  else
  {
    contracts::VerifierRecord r;
    r.country       = request.country;
    r.name          = request.name;
    r.id            = request.id;
    r.valid_from    = request.valid_from;
    r.logging_class = request.logging_class;
    r.pk            = pk;
    r.attestation   = contracts::attest(params, gb.keys.sk, r, rng);
    call            = contracts::calls::register_verifier(params, gov, r);
  }
  try
  {
    return from_receipt(consortium.transact(gb.keys.sk, std::move(call)));
  }
  catch (ledger::TxRejected const &e)
  {
    return failure(e.what());
  }
}

ProtocolResult run_issuance(Consortium &consortium, Party const &issuer, Party &holder,
                            IssuanceRequest const &request, HolderConduct const &conduct)
{
  auto const &params = consortium.params();
  auto       &chan   = consortium.channel();
  chan.reset();

  BigInt              pk;
  crypto::BindingData binding;
  try
  {
    chan.send({holder.id, issuer.id, "holder_key",
               element_to_hex(params, conduct.prover.claimed_pk.value_or(holder.keys.pk))});
    pk = element_from_hex(params, chan.receive(issuer.id, "holder_key").body.get<std::string>());
    if (!consortium.identify(holder.id, issuer.id, pk,
                             conduct.prover.proving_sk.value_or(holder.keys.sk),
                             conduct.prover.replay))
    {
      return failure("identification failed");
    }
    auto sent = conduct.presented_binding
                    ? *conduct.presented_binding
                    : crypto::bind_identity(holder.civil_identity, holder.binding);
    chan.send({holder.id, issuer.id, "binding", binding_to_json(sent)});
    binding = binding_from_json(chan.receive(issuer.id, "binding").body);
  }
  catch (ChannelError const &e)
  {
    return failure(std::string("channel failure: ") + e.what());
  }
  catch (crypto::BindingError const &e)
  {
    return failure(e.what());
  }
  if (!consortium.document_oracle(conduct.document.value_or(holder.civil_identity), binding))
  {
    return failure("civil document does not match binding");
  }

  auto const dates = contracts::certificate_dates(request.cert_type, consortium.now(),
                                                  consortium.chain().config().policy);
  contracts::Certificate cert;
  cert.personal_identifier = binding;
  cert.cert_type           = request.cert_type;
  cert.issuance_date       = dates.issuance_date;
  cert.valid_from          = dates.valid_from;
  cert.expiry_date         = dates.expiry_date;
  cert.issuer_pk           = issuer.keys.pk;
  cert.governance_address  = consortium.chain().governance_address();
  cert.holder_pk           = pk;
  cert.issuer_signature    = contracts::sign_certificate(params, issuer.keys.sk, cert, consortium.rng());

  Receipt receipt;
  try
  {
    receipt = consortium.transact(
        issuer.keys.sk,
        contracts::calls::create_certificate(params, consortium.chain().factory_address(), cert));
  }
  catch (ledger::TxRejected const &e)
  {
    return failure(e.what());
  }
  if (!receipt.applied)
  {
    return from_receipt(receipt);
  }

  ProtocolResult result = from_receipt(receipt);
  try
  {
    chan.send({issuer.id, holder.id, "certificate_address", receipt.created->hex()});
    auto addr = Address::from_hex(chan.receive(holder.id, "certificate_address").body.get<std::string>());
    holder.wallet.push_back(addr);
  }
  catch (ChannelError const &e)
  {
    result.ok     = false;
    result.reason = std::string("channel failure: ") + e.what();
    return result;
  }

  if (request.consent && request.clinical)
  {
    auto record             = *request.clinical;
    record.consent          = true;
    record.certificate_type = request.cert_type;
    try
    {
      consortium.health_records().ingest(record);
    }
    catch (analytics::ValidationError const &e)
    {
      result.reason = std::string("health record not stored: ") + e.what();
    }
  }
  return result;
}

ProtocolResult revoke_certificate(Consortium &consortium, Address const &certificate)
{
  try
  {
    return from_receipt(consortium.transact(
        consortium.governing_body().keys.sk,
        contracts::calls::revoke_certificate(consortium.chain().governance_address(), certificate)));
  }
  catch (ledger::TxRejected const &e)
  {
    return failure(e.what());
  }
}

ProtocolResult set_role_status(Consortium &consortium, BigInt const &pk,
                               contracts::RoleStatus status)
{
  auto const &params = consortium.params();
  auto const &gb     = consortium.governing_body();
  auto const  gov    = consortium.chain().governance_address();
  auto const &reg    = governance_of(consortium.chain().store(), gov).registry;

  // The status change carries a fresh attestation over the updated record.
  crypto::Signature attestation;
  if (auto const *r = reg.issuer(pk))
  {
    auto updated   = *r;
    updated.status = status;
    attestation    = contracts::attest(params, gb.keys.sk, updated, consortium.rng());
  }
  else if (auto const *v = reg.verifier(pk))
  {
    auto updated   = *v;
    updated.status = status;
    attestation    = contracts::attest(params, gb.keys.sk, updated, consortium.rng());
  }
  else
  {
    attestation = crypto::sign(params, gb.keys.sk, "unregistered key", consortium.rng());
  }
  try
  {
    return from_receipt(consortium.transact(
        gb.keys.sk, contracts::calls::set_status(params, gov, pk, status, attestation)));
  }
  catch (ledger::TxRejected const &e)
  {
    return failure(e.what());
  }
}

json to_json(VerificationVerdict const &v)
{
  return json{{"outcome", std::string(to_string(v.outcome))},
              {"reason", std::string(to_string(v.reason))},
              {"mode", std::string(to_string(v.mode))},
              {"checked_at", v.checked_at},
              {"logged", v.logged},
              {"log_error", v.log_error}};
}

VerificationVerdict run_verification(Consortium &consortium, Party const &verifier,
                                     Party const &holder, Address const &certificate, Mode mode,
                                     OfflineCache const *cache, HolderConduct const &conduct)
{
  auto const &params = consortium.params();
  auto const &chain  = consortium.chain();
  auto const  now    = consortium.now();

  VerificationVerdict verdict;
  verdict.mode       = mode;
  verdict.checked_at = now;
  auto reject        = [&](Reason r) {
    verdict.outcome = Verdict::Reject;
    verdict.reason  = r;
    return verdict;
  };

  contracts::ContractStore const *store = &chain.store();
  ledger::Block const            *head  = &chain.head();
  if (mode == Mode::Offline)
  {
    if (cache == nullptr)
    {
      return reject(Reason::MissingSnapshot);
    }
    if (now > cache->snapshot.as_of && now - cache->snapshot.as_of > consortium.config().max_snapshot_age)
    {
      return reject(Reason::StaleSnapshot);
    }
    store = &cache->store;
    head  = &cache->head;
  }
  contracts::ContractStore rewritten;
  if (conduct.tamper_view)
  {
    rewritten = *store;
    conduct.tamper_view(rewritten);
    store = &rewritten;
  }

  // The data read must be what the validator sealed.
  if (contracts::state_root(params, *store) != head->state_root || !head->validator_signature ||
      !crypto::verify(params, chain.validator(), head->header_string(), *head->validator_signature))
  {
    return reject(Reason::TamperedState);
  }
  auto const &gov = governance_of(*store, chain.governance_address());
  if (mode == Mode::Offline)
  {
    std::set<Address> listed(gov.revoked.begin(), gov.revoked.end());
    if (listed != cache->snapshot.revoked || cache->snapshot.as_of != head->timestamp)
    {
      return reject(Reason::TamperedState);
    }
  }
  auto const &registry = gov.registry;
  auto const *vrec     = registry.verifier(verifier.keys.pk);
  if (vrec == nullptr || vrec->status != contracts::RoleStatus::Active || now < vrec->valid_from)
  {
    return reject(Reason::VerifierNotAuthorized);
  }

  auto &chan = consortium.channel();
  chan.reset();
  crypto::BindingData     binding;
  Address                 presented;
  BigInt                  pk;
  contracts::Certificate  cert;
  try
  {
    auto sent_binding = conduct.presented_binding
                            ? *conduct.presented_binding
                            : crypto::bind_identity(holder.civil_identity, holder.binding);
    chan.send({holder.id, verifier.id, "presentation",
               json{{"binding", binding_to_json(sent_binding)},
                    {"certificate", conduct.presented_certificate.value_or(certificate).hex()},
                    {"pk", element_to_hex(params, conduct.prover.claimed_pk.value_or(holder.keys.pk))}}});
    auto body = chan.receive(verifier.id, "presentation").body;
    binding   = binding_from_json(body.at("binding"));
    presented = Address::from_hex(body.at("certificate").get<std::string>());
    pk        = element_from_hex(params, body.at("pk").get<std::string>());

    auto it = store->find(presented);
    if (it == store->end() || !std::holds_alternative<contracts::CertificateState>(it->second))
    {
      return reject(Reason::UnknownCertificate);
    }
    cert = std::get<contracts::CertificateState>(it->second).cert;
    if (cert.holder_pk != pk)
    {
      return reject(Reason::HolderKeyMismatch);
    }
    if (!consortium.identify(holder.id, verifier.id, pk,
                             conduct.prover.proving_sk.value_or(holder.keys.sk),
                             conduct.prover.replay))
    {
      return reject(Reason::IdentificationFailed);
    }
  }
  catch (ChannelError const &)
  {
    return reject(Reason::ChannelFailure);
  }
  catch (DecodeError const &)
  {
    return reject(Reason::ChannelFailure);
  }
  catch (crypto::BindingError const &)
  {
    return reject(Reason::BindingMismatch);
  }

  if (mode == Mode::Offline)
  {
    cert.status_flag = cache->snapshot.revoked.count(presented) != 0 ? contracts::StatusFlag::Revoked
                                                                     : contracts::StatusFlag::Issued;
  }
  if (auto status = contracts::effective_status(params, cert, now, registry);
      status != CertStatus::Valid)
  {
    return reject(reason_for(status));
  }
  if (binding != cert.personal_identifier)
  {
    return reject(Reason::BindingMismatch);
  }
  if (!consortium.document_oracle(conduct.document.value_or(holder.civil_identity), binding))
  {
    return reject(Reason::DocumentMismatch);
  }
  if (!contracts::certificate_signature_valid(params, cert))
  {
    return reject(Reason::IssuerSignatureInvalid);
  }

  verdict.outcome = Verdict::Accept;
  verdict.reason  = Reason::None;
  if (mode == Mode::Online && vrec->logging_class == contracts::LoggingClass::StateUpdating)
  {
    try
    {
      auto receipt = consortium.transact(verifier.keys.sk,
                                         contracts::calls::log_verification(presented, now));
      verdict.logged    = receipt.applied;
      verdict.log_error = receipt.reason;
    }
    catch (ledger::TxRejected const &e)
    {
      verdict.log_error = e.what();
    }
  }
  return verdict;
}

}  // namespace hygiea::protocols
