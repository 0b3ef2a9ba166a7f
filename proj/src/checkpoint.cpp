#include "cprnn/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace cprnn {

std::string_view to_string(LoadErrorCode code) {
  switch (code) {
    case LoadErrorCode::io: return "io error";
    case LoadErrorCode::bad_magic: return "bad magic";
    case LoadErrorCode::unsupported_version: return "unsupported version";
    case LoadErrorCode::kind_mismatch: return "kind mismatch";
    case LoadErrorCode::truncated: return "truncated file";
    case LoadErrorCode::dim_mismatch: return "dimension mismatch";
    case LoadErrorCode::malformed: return "malformed header";
  }
  return "?";
}

namespace {

constexpr std::string_view kMagic = "CPRNN-CKPT";

Index rank_of(const CellParams& cell) {
  if (const auto* cp = std::get_if<CpRnnParams>(&cell)) return cp->rank();
  return 0;
}

void put_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ckpt.model.validate();
  if (ckpt.config_json.find('\n') != std::string::npos) throw DataError("checkpoint config must be a single line");
  const LmModel& m = ckpt.model;
  std::ostringstream h;
  h << kMagic << '\n'
    << "version " << kCheckpointVersion << '\n'
    << "kind " << to_string(m.kind()) << '\n'
    << "activation " << to_string(activation_of(m.cell)) << '\n'
    << "n " << m.hidden() << '\n'
    << "d " << m.vocab() << '\n'
    << "rank " << rank_of(m.cell) << '\n'
    << "seed " << ckpt.seed << '\n'
    << "vocab " << ckpt.vocab_symbols.size();
  for (char32_t c : ckpt.vocab_symbols) h << ' ' << static_cast<std::uint32_t>(c);
  h << '\n' << "config " << ckpt.config_json << '\n';
  const auto blocks = parameter_blocks(m);
  for (const auto& b : blocks) h << "section " << b.name << ' ' << b.values.size() << '\n';
  h << "end\n";
  std::string out = h.str();
  for (const auto& b : blocks)
    for (double v : b.values) put_le(out, v);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError(LoadErrorCode::io, "cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw LoadError(LoadErrorCode::io, "write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path, std::optional<ModelKind> expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError(LoadErrorCode::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string data = ss.str();

  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = data.find('\n', pos);
    if (nl == std::string::npos) throw LoadError(LoadErrorCode::truncated, "header ends before 'end'");
    std::string line = data.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  auto keyed = [&](std::string_view key) -> std::istringstream {
    const std::string line = next_line();
    if (line.rfind(std::string(key) + ' ', 0) != 0)
      throw LoadError(LoadErrorCode::malformed, "expected '" + std::string(key) + "', got '" + line.substr(0, 40) + "'");
    return std::istringstream(line.substr(key.size() + 1));
  };
  auto read_int = [&](std::string_view key) {
    auto in = keyed(key);
    long long v = 0;
    if (!(in >> v) || v < 0) throw LoadError(LoadErrorCode::malformed, "bad value for '" + std::string(key) + "'");
    return v;
  };

  if (data.compare(0, kMagic.size() + 1, std::string(kMagic) + '\n') != 0)
    throw LoadError(LoadErrorCode::bad_magic, "'" + path + "' is not a checkpoint");
  pos = kMagic.size() + 1;
  if (const long long v = read_int("version"); v != kCheckpointVersion)
    throw LoadError(LoadErrorCode::unsupported_version,
                    "version " + std::to_string(v) + ", this build reads " + std::to_string(kCheckpointVersion));

  ModelKind kind{};
  Activation act{};
  try {
    std::string s;
    keyed("kind") >> s;
    kind = parse_model_kind(s);
    keyed("activation") >> s;
    act = parse_activation(s);
  } catch (const LoadError&) {
    throw;
  } catch (const DataError& e) {
    throw LoadError(LoadErrorCode::malformed, e.what());
  }
  if (expected && *expected != kind)
    throw LoadError(LoadErrorCode::kind_mismatch, "file holds a " + std::string(to_string(kind)) + " model, expected " +
                                                      std::string(to_string(*expected)));
  const Index n = read_int("n");
  const Index d = read_int("d");
  const Index rank = read_int("rank");
  Checkpoint ckpt;
  {
    auto in = keyed("seed");
    if (!(in >> ckpt.seed)) throw LoadError(LoadErrorCode::malformed, "bad seed");
  }
  {
    auto in = keyed("vocab");
    std::size_t count = 0;
    if (!(in >> count)) throw LoadError(LoadErrorCode::malformed, "bad vocab count");
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t c = 0;
      if (!(in >> c)) throw LoadError(LoadErrorCode::malformed, "vocab list shorter than its count");
      ckpt.vocab_symbols.push_back(static_cast<char32_t>(c));
    }
  }
  ckpt.config_json = keyed("config").str();

  if (n < 1 || d < 1) throw LoadError(LoadErrorCode::dim_mismatch, "hidden and vocab sizes must be positive");
  if (!ckpt.vocab_symbols.empty() && static_cast<Index>(ckpt.vocab_symbols.size()) + 1 != d)
    throw LoadError(LoadErrorCode::dim_mismatch, "vocab lists " + std::to_string(ckpt.vocab_symbols.size()) +
                                                     " symbols but d = " + std::to_string(d));
  ckpt.model = init_params(kind, n, d, rank, act, 0);
  auto blocks = parameter_blocks(ckpt.model);
  for (const auto& b : blocks) {
    auto in = keyed("section");
    std::string name;
    std::size_t len = 0;
    if (!(in >> name >> len)) throw LoadError(LoadErrorCode::malformed, "bad section line");
    if (name != b.name || len != b.values.size())
      throw LoadError(LoadErrorCode::dim_mismatch, "section '" + name + "' of length " + std::to_string(len) +
                                                       ", expected '" + b.name + "' of length " +
                                                       std::to_string(b.values.size()));
  }
  if (next_line() != "end") throw LoadError(LoadErrorCode::dim_mismatch, "more sections than the header dims allow");

  std::size_t expected_bytes = 0;
  for (const auto& b : blocks) expected_bytes += 8 * b.values.size();
  const std::size_t available = data.size() - pos;
  if (available < expected_bytes)
    throw LoadError(LoadErrorCode::truncated, std::to_string(available) + " payload bytes, expected " +
                                                  std::to_string(expected_bytes));
  if (available > expected_bytes)
    throw LoadError(LoadErrorCode::dim_mismatch, std::to_string(available - expected_bytes) + " trailing bytes");
  for (auto& b : blocks)
    for (double& v : b.values) {
      v = get_le(data.data() + pos);
      pos += 8;
    }
  return ckpt;
}

}  // namespace cprnn
