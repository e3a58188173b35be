#pragma once

// Scripted end-to-end runs: parties, an ordered list of protocol actions
// with expected outcomes, and final assertions over chain state.

#include "hygiea/ledger.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hygiea::scenario {

// Malformed script (unknown action, undeclared party, bad field).
class ScriptError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

struct Report
{
  std::vector<std::string>  lines;  // one per action, then one per assertion
  std::optional<std::size_t> failed_action;     // index of the first failed expectation
  std::optional<std::size_t> failed_assertion;  // index into "assertions"
  std::string               failure;

  ledger::ChainFiles                 chain;
  std::string                        verdicts;   // JSON lines
  std::map<std::string, std::string> analytics;  // file name -> contents

  bool passed() const { return !failed_action && !failed_assertion; }
  std::string text() const;
};

// Named group presets accepted by scripts: "test", "modp2048".
crypto::GroupParams group_from_json(nlohmann::json const &j);

// Throws ScriptError for malformed scripts and ledger::ConfigError for an
// unusable genesis.
Report run(nlohmann::json const &script, std::uint64_t seed);

}  // namespace hygiea::scenario
