#include "hygiea/protocols.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace hygiea;
using namespace hygiea::protocols;
using contracts::CertType;
using contracts::LoggingClass;
using contracts::RoleStatus;

namespace {

class Protocols : public ::testing::Test
{
protected:
  fixture::World w{fixture::desk_group(), 3};

  void SetUp() override { w.onboard(); }

  Reason verdict_reason(VerificationVerdict const &v)
  {
    return v.outcome == Verdict::Accept ? Reason::None : v.reason;
  }
};

}  // namespace

TEST_F(Protocols, HonestRegistrationWritesAttestedRecord)
{
  auto const &gov = std::get<contracts::GovernanceState>(
      w.c->chain().store().at(w.c->chain().governance_address()));
  auto const *lab = gov.registry.issuer(w.lab.keys.pk);
  ASSERT_NE(lab, nullptr);
  EXPECT_TRUE(contracts::attestation_valid(w.params, w.c->governing_body().keys.pk, *lab));
  auto const *border = gov.registry.verifier(w.border.keys.pk);
  ASSERT_NE(border, nullptr);
  EXPECT_EQ(border->logging_class, LoggingClass::StateUpdating);
}

TEST_F(Protocols, RegistrationWithWrongKeyAborts)
{
  auto stranger = fixture::make_party(w.params, "stranger", Role::Issuer, 12345);
  auto blocks   = w.c->chain().blocks().size();
  ProverConduct conduct;
  conduct.claimed_pk = w.maria.keys.pk;  // claims a key it cannot prove
  RegistrationRequest req;
  req.role          = Role::Issuer;
  req.allowed_types = {CertType::Test};
  auto r            = run_registration(*w.c, stranger, req, conduct);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.reason, "identification failed");
  EXPECT_EQ(w.c->chain().blocks().size(), blocks);  // nothing written
}

TEST_F(Protocols, VerifierRegistersWithoutTypes)
{
  auto airport = fixture::make_party(w.params, "airport", Role::Verifier, 999);
  auto r       = w.register_verifier(airport, LoggingClass::ReadOnly);
  EXPECT_TRUE(r.ok) << r.reason;
}

TEST_F(Protocols, DuplicateRegistrationSurfacesRevert)
{
  auto r = w.register_issuer(w.lab, {CertType::Test});
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.reason, "issuer already registered");
}

TEST_F(Protocols, IssuanceFillsWalletAndFactory)
{
  auto addr = w.issue(w.lab, w.maria, CertType::Test);
  EXPECT_EQ(w.maria.wallet, std::vector<Address>{addr});
  EXPECT_EQ(w.c->chain().query(w.c->chain().factory_address(), "issued_count"), 1);
  auto const &cs = std::get<contracts::CertificateState>(w.c->chain().store().at(addr));
  EXPECT_EQ(cs.cert.holder_pk, w.maria.keys.pk);
  EXPECT_EQ(cs.cert.personal_identifier,
            crypto::bind_identity(w.maria.civil_identity, crypto::BindingMechanism::HashedInfo));
}

TEST_F(Protocols, ImpersonatedHolderKeyAborts)
{
  HolderConduct conduct;
  conduct.prover.claimed_pk = w.nikos.keys.pk;
  IssuanceRequest req;
  auto            issued = w.c->chain().query(w.c->chain().factory_address(), "issued_count");
  auto            r      = run_issuance(*w.c, w.lab, w.maria, req, conduct);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.reason, "identification failed");
  EXPECT_TRUE(w.maria.wallet.empty());
  EXPECT_EQ(w.c->chain().query(w.c->chain().factory_address(), "issued_count"), issued);
}

TEST_F(Protocols, DocumentMismatchAborts)
{
  HolderConduct conduct;
  conduct.document = w.nikos.civil_identity;
  IssuanceRequest req;
  auto            r = run_issuance(*w.c, w.lab, w.maria, req, conduct);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.reason, "civil document does not match binding");
}

TEST_F(Protocols, InactiveIssuerRevertPropagates)
{
  ASSERT_TRUE(set_role_status(*w.c, w.lab.keys.pk, RoleStatus::Inactive).ok);
  IssuanceRequest req;
  auto            r = run_issuance(*w.c, w.lab, w.maria, req);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.reason, "issuer inactive");
  ASSERT_TRUE(set_role_status(*w.c, w.lab.keys.pk, RoleStatus::Active).ok);
  EXPECT_TRUE(run_issuance(*w.c, w.lab, w.maria, req).ok);
}

TEST_F(Protocols, SetStatusOfUnknownKeyFails)
{
  auto r = set_role_status(*w.c, w.maria.keys.pk, RoleStatus::Inactive);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.reason, "unknown public key");
}

TEST_F(Protocols, ConsentControlsAnalytics)
{
  analytics::HealthRecord rec;
  rec.age               = 40;
  rec.geolocation       = "CY";
  rec.test_result       = analytics::TestResult::Positive;
  rec.demographic_group = "A";
  rec.observed_at       = analytics::parse_date("2021-01-01");
  IssuanceRequest req;
  req.clinical = rec;
  req.consent  = false;
  ASSERT_TRUE(run_issuance(*w.c, w.lab, w.maria, req).ok);
  EXPECT_EQ(w.c->health_records().size(), 0u);
  req.consent = true;
  ASSERT_TRUE(run_issuance(*w.c, w.lab, w.maria, req).ok);
  ASSERT_EQ(w.c->health_records().size(), 1u);
  EXPECT_EQ(w.c->health_records().records()[0].certificate_type, CertType::Test);
}

TEST_F(Protocols, HonestVerificationAcceptsAndLogs)
{
  auto addr = w.issue(w.lab, w.maria, CertType::Test);
  auto v    = w.verify(w.border, w.maria, addr);
  EXPECT_EQ(v.outcome, Verdict::Accept);
  EXPECT_TRUE(v.logged);
  auto ro = w.verify(w.cafe, w.maria, addr);
  EXPECT_EQ(ro.outcome, Verdict::Accept);
  EXPECT_FALSE(ro.logged);
  EXPECT_EQ(w.c->chain().query(addr, "log").size(), 1u);
}

TEST_F(Protocols, StolenCertificateRejected)
{
  auto addr = w.issue(w.lab, w.maria, CertType::Test);
  // nikos presents maria's certificate with his own key
  auto v = w.verify(w.border, w.nikos, addr);
  EXPECT_EQ(verdict_reason(v), Reason::HolderKeyMismatch);
  // or claims maria's key without knowing her secret
  HolderConduct conduct;
  conduct.prover.claimed_pk = w.maria.keys.pk;
  conduct.presented_binding = crypto::bind_identity(w.maria.civil_identity, w.maria.binding);
  conduct.document          = w.maria.civil_identity;
  v = w.verify(w.border, w.nikos, addr, Mode::Online, nullptr, conduct);
  EXPECT_EQ(verdict_reason(v), Reason::IdentificationFailed);
}

TEST_F(Protocols, ReplayedTranscriptsRejected)
{
  auto addr = w.issue(w.lab, w.maria, CertType::Test);
  ASSERT_EQ(w.verify(w.border, w.maria, addr).outcome, Verdict::Accept);
  HolderConduct conduct;
  conduct.prover.claimed_pk = w.maria.keys.pk;
  for (auto const &t : w.c->observed())
  {
    if (t.pk == w.maria.keys.pk)
    {
      conduct.prover.replay.push_back(t);
    }
  }
  ASSERT_FALSE(conduct.prover.replay.empty());
  conduct.document = w.maria.civil_identity;
  conduct.presented_binding = crypto::bind_identity(w.maria.civil_identity, w.maria.binding);
  auto v = w.verify(w.border, w.nikos, addr, Mode::Online, nullptr, conduct);
  EXPECT_EQ(verdict_reason(v), Reason::IdentificationFailed);
}

TEST_F(Protocols, BindingAndDocumentChecks)
{
  auto          addr = w.issue(w.lab, w.maria, CertType::Test);
  HolderConduct wrong_binding;
  wrong_binding.presented_binding = crypto::bind_identity(w.nikos.civil_identity, w.nikos.binding);
  EXPECT_EQ(verdict_reason(w.verify(w.border, w.maria, addr, Mode::Online, nullptr, wrong_binding)),
            Reason::BindingMismatch);
  HolderConduct wrong_document;
  wrong_document.document = w.nikos.civil_identity;
  EXPECT_EQ(verdict_reason(w.verify(w.border, w.maria, addr, Mode::Online, nullptr, wrong_document)),
            Reason::DocumentMismatch);
}

TEST_F(Protocols, UnknownCertificateRejected)
{
  auto v = w.verify(w.border, w.maria, Address{});
  EXPECT_EQ(verdict_reason(v), Reason::UnknownCertificate);
}

TEST_F(Protocols, VerifierMustBeRegisteredAndActive)
{
  auto addr     = w.issue(w.lab, w.maria, CertType::Test);
  auto stranger = fixture::make_party(w.params, "stranger", Role::Verifier, 4242);
  EXPECT_EQ(verdict_reason(w.verify(stranger, w.maria, addr)), Reason::VerifierNotAuthorized);
  ASSERT_TRUE(set_role_status(*w.c, w.cafe.keys.pk, RoleStatus::Inactive).ok);
  EXPECT_EQ(verdict_reason(w.verify(w.cafe, w.maria, addr)), Reason::VerifierNotAuthorized);
}

TEST_F(Protocols, TimeWindow)
{
  auto test = w.issue(w.lab, w.maria, CertType::Test);
  auto vax  = w.issue(w.clinic, w.nikos, CertType::Vaccination);
  EXPECT_EQ(verdict_reason(w.verify(w.cafe, w.nikos, vax)), Reason::NotYetValid);
  w.c->advance_time(72 * kHour + 1);
  EXPECT_EQ(verdict_reason(w.verify(w.cafe, w.maria, test)), Reason::Expired);
  w.c->advance_time(21 * kDay);
  EXPECT_EQ(verdict_reason(w.verify(w.cafe, w.nikos, vax)), Reason::None);
}

TEST_F(Protocols, DeactivatedIssuerUntrusted)
{
  auto addr = w.issue(w.lab, w.maria, CertType::Test);
  ASSERT_TRUE(set_role_status(*w.c, w.lab.keys.pk, RoleStatus::Inactive).ok);
  EXPECT_EQ(verdict_reason(w.verify(w.cafe, w.maria, addr)), Reason::IssuerUntrusted);
}

TEST_F(Protocols, RevocationOnlineAndOffline)
{
  auto addr  = w.issue(w.lab, w.maria, CertType::Test);
  auto cache = export_offline_cache(w.c->chain());
  w.c->advance_time(kHour);
  ASSERT_TRUE(revoke_certificate(*w.c, addr).ok);
  EXPECT_EQ(verdict_reason(w.verify(w.border, w.maria, addr)), Reason::Revoked);
  auto off = w.verify(w.border, w.maria, addr, Mode::Offline, &cache);
  EXPECT_EQ(off.outcome, Verdict::Accept);
  EXPECT_FALSE(off.logged);
  auto fresh = export_offline_cache(w.c->chain());
  EXPECT_EQ(verdict_reason(w.verify(w.border, w.maria, addr, Mode::Offline, &fresh)), Reason::Revoked);
  // monotone: stays revoked online
  for (int i = 0; i < 3; ++i)
  {
    w.c->advance_time(kHour);
    EXPECT_EQ(verdict_reason(w.verify(w.border, w.maria, addr)), Reason::Revoked);
  }
}

TEST_F(Protocols, OfflineNeedsFreshSnapshot)
{
  auto addr = w.issue(w.lab, w.maria, CertType::Recovery);
  EXPECT_EQ(verdict_reason(w.verify(w.cafe, w.maria, addr, Mode::Offline)), Reason::MissingSnapshot);
  auto cache = export_offline_cache(w.c->chain());
  w.c->advance_time(24 * kHour);
  EXPECT_EQ(verdict_reason(w.verify(w.cafe, w.maria, addr, Mode::Offline, &cache)), Reason::None);
  w.c->advance_time(1);
  EXPECT_EQ(verdict_reason(w.verify(w.cafe, w.maria, addr, Mode::Offline, &cache)),
            Reason::StaleSnapshot);
}

TEST_F(Protocols, TamperedViewRejected)
{
  auto          addr = w.issue(w.lab, w.maria, CertType::Test);
  HolderConduct conduct;
  auto          nikos_pk = w.nikos.keys.pk;
  conduct.tamper_view    = [&](contracts::ContractStore &store) {
    std::get<contracts::CertificateState>(store.at(addr)).cert.holder_pk = nikos_pk;
  };
  EXPECT_EQ(verdict_reason(w.verify(w.border, w.nikos, addr, Mode::Online, nullptr, conduct)),
            Reason::TamperedState);

  auto cache = export_offline_cache(w.c->chain());
  cache.snapshot.revoked.insert(Address{});
  EXPECT_EQ(verdict_reason(w.verify(w.border, w.maria, addr, Mode::Offline, &cache)),
            Reason::TamperedState);
}

TEST_F(Protocols, ChannelFaultsFailClosed)
{
  auto addr = w.issue(w.lab, w.maria, CertType::Test);
  w.c->channel().set_faults({1.0, 0.0});
  EXPECT_EQ(verdict_reason(w.verify(w.border, w.maria, addr)), Reason::ChannelFailure);
  IssuanceRequest req;
  auto            r = run_issuance(*w.c, w.lab, w.maria, req);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.reason.rfind("channel failure", 0), 0u);
  w.c->channel().set_faults({});
  EXPECT_EQ(w.verify(w.border, w.maria, addr).outcome, Verdict::Accept);
}

TEST_F(Protocols, SnapshotExport)
{
  EXPECT_TRUE(export_revocation_snapshot(w.c->chain()).revoked.empty());
  auto a = w.issue(w.lab, w.maria, CertType::Test);
  auto b = w.issue(w.lab, w.nikos, CertType::Test);
  ASSERT_TRUE(revoke_certificate(*w.c, a).ok);
  ASSERT_TRUE(revoke_certificate(*w.c, b).ok);
  auto snap = export_revocation_snapshot(w.c->chain());
  EXPECT_EQ(snap.revoked.size(), 2u);
  EXPECT_LE(snap.as_of, w.c->chain().head().timestamp);
  EXPECT_EQ(snapshot_from_json(to_json(snap)), snap);
}

TEST_F(Protocols, OnlineMatchesOfflineAtHead)
{
  std::vector<std::pair<Party *, Address>> cases;
  cases.push_back({&w.maria, w.issue(w.lab, w.maria, CertType::Test)});
  cases.push_back({&w.nikos, w.issue(w.clinic, w.nikos, CertType::Vaccination)});
  cases.push_back({&w.eleni, w.issue(w.lab, w.eleni, CertType::Recovery)});
  ASSERT_TRUE(revoke_certificate(*w.c, cases[2].second).ok);
  cases.push_back({&w.nikos, cases[0].second});  // stolen
  auto cache = export_offline_cache(w.c->chain());
  for (auto const &[holder, addr] : cases)
  {
    auto on  = w.verify(w.cafe, *holder, addr);
    auto off = w.verify(w.cafe, *holder, addr, Mode::Offline, &cache);
    EXPECT_EQ(on.outcome, off.outcome);
    EXPECT_EQ(on.reason, off.reason);
  }
}

TEST_F(Protocols, LedgerNeverSeesSecretsOrCivilIdentity)
{
  auto addr = w.issue(w.lab, w.maria, CertType::Test);
  w.verify(w.border, w.maria, addr);
  auto files = ledger::export_files(w.c->chain());
  auto all   = files.genesis + files.blocks + files.store;
  for (auto const *p : {&w.lab, &w.border, &w.maria})
  {
    EXPECT_EQ(all.find(ledger::big_to_hex(p->keys.sk)), std::string::npos) << p->id;
  }
  for (auto const &[field, value] : w.maria.civil_identity)
  {
    EXPECT_EQ(all.find(value), std::string::npos) << field;
  }
}

TEST_F(Protocols, VerdictJsonAndNames)
{
  VerificationVerdict v;
  v.reason = Reason::StaleSnapshot;
  auto j   = to_json(v);
  EXPECT_EQ(j["reason"], "StaleSnapshot");
  EXPECT_EQ(reason_from_string("Revoked"), Reason::Revoked);
  EXPECT_EQ(mode_from_string("Offline"), Mode::Offline);
  EXPECT_THROW(reason_from_string("nope"), DecodeError);
}

TEST(ProtocolsSetup, GoverningBodyKeyMustMatchValidator)
{
  auto params = fixture::desk_group();
  auto config = fixture::genesis_for(params, 5);
  EXPECT_THROW(Consortium(config, 6, 1), ledger::ConfigError);
}

TEST(ProtocolsSmallGroup, FlowsWorkInTestGroup)
{
  fixture::World w(crypto::GroupParams::test(), 11);
  w.onboard();
  auto addr = w.issue(w.lab, w.maria, CertType::Test);
  EXPECT_EQ(w.verify(w.border, w.maria, addr).outcome, Verdict::Accept);
  EXPECT_EQ(w.verify(w.border, w.nikos, addr).reason, Reason::HolderKeyMismatch);
}
