#include "hygiea/ledger.hpp"

#include <fstream>
#include <sstream>

namespace hygiea::ledger {

namespace detail {
std::optional<Violation> verify_blocks(GenesisConfig const &config,
                                       std::vector<Block> const &blocks,
                                       ContractStore const *store);
}

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(fs::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw std::runtime_error("cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(fs::path const &path, std::string const &text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

// Accepts only text that re-serializes to exactly the same bytes.
std::optional<json> parse_canonical(std::string_view text)
{
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded() || j.dump() != text)
  {
    return std::nullopt;
  }
  return j;
}

std::optional<json> parse_canonical_file(std::string const &text)
{
  if (text.empty() || text.back() != '\n')
  {
    return std::nullopt;
  }
  return parse_canonical(std::string_view(text).substr(0, text.size() - 1));
}

}  // namespace

ChainFiles read_chain_files(fs::path const &dir)
{
  return ChainFiles{slurp(dir / "genesis.json"), slurp(dir / "chain.jsonl"),
                    slurp(dir / "store.json")};
}

void write_chain_files(fs::path const &dir, ChainFiles const &files)
{
  fs::create_directories(dir);
  spit(dir / "genesis.json", files.genesis);
  spit(dir / "chain.jsonl", files.blocks);
  spit(dir / "store.json", files.store);
}

ChainFiles export_files(ChainState const &state)
{
  return ChainFiles{to_json(state.config()).dump() + "\n", state.export_blocks(),
                    state.export_store()};
}

std::optional<Violation> verify_chain_files(ChainFiles const &files)
{
  GenesisConfig config;
  {
    auto j = parse_canonical_file(files.genesis);
    if (!j)
    {
      return Violation{0, ViolationKind::Malformed, "genesis.json is not canonical JSON"};
    }
    try
    {
      config = genesis_config_from_json(*j);
    }
    catch (ConfigError const &e)
    {
      return Violation{0, ViolationKind::Malformed, e.what()};
    }
  }

  std::vector<std::string_view> lines;
  std::string_view              text       = files.blocks;
  bool const                    terminated = !text.empty() && text.back() == '\n';
  while (!text.empty())
  {
    auto nl = text.find('\n');
    lines.push_back(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
  }

  std::vector<Block>       blocks;
  std::optional<Violation> bad_line;
  for (std::size_t h = 0; h < lines.size(); ++h)
  {
    auto j = parse_canonical(lines[h]);
    if (!j || (!terminated && h + 1 == lines.size()))
    {
      bad_line = Violation{h, ViolationKind::Malformed, "block line is not canonical JSON"};
      break;
    }
    try
    {
      blocks.push_back(block_from_json(config.group, *j));
    }
    catch (std::exception const &e)
    {
      bad_line = Violation{h, ViolationKind::Malformed, e.what()};
      break;
    }
  }
  if (bad_line)
  {
    if (auto v = detail::verify_blocks(config, blocks, nullptr); v && v->height < bad_line->height)
    {
      return v;
    }
    return bad_line;
  }

  std::optional<ContractStore> store;
  if (auto j = parse_canonical_file(files.store))
  {
    try
    {
      store = contracts::store_from_json(config.group, *j);
    }
    catch (std::exception const &)
    {
    }
  }
  if (!store)
  {
    if (auto v = detail::verify_blocks(config, blocks, nullptr))
    {
      return v;
    }
    return Violation{blocks.size() - 1, ViolationKind::Malformed, "store.json is malformed"};
  }
  return detail::verify_blocks(config, blocks, &*store);
}

}  // namespace hygiea::ledger
