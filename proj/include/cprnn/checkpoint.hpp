#pragma once

// Checkpoint container:
//
//   CPRNN-CKPT
//   version 1
//   kind <rnn|2rnn|cprnn|cpbirnn|mirnn>
//   activation <linear|tanh|relu>
//   n <hidden>  d <vocab>  rank <R>          (one key per line)
//   seed <u64>
//   vocab <count> <codepoint>...             (decimal, reserved index excluded)
//   config <single-line JSON>
//   section <name> <length>                  (one per trainable array)
//   end
//   <little-endian IEEE-754 doubles of every section, in header order>
//
// Arrays are stored in the in-memory order of parameter_blocks: Eigen
// matrices column-major, the 2RNN tensor with its last index fastest.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cprnn/errors.hpp"
#include "cprnn/training.hpp"

namespace cprnn {

struct Checkpoint {
  LmModel model;
  std::uint64_t seed = 0;
  std::string config_json = "{}";
  /// Vocabulary symbols for indices 1..d-1.
  std::vector<char32_t> vocab_symbols;
};

enum class LoadErrorCode { io, bad_magic, unsupported_version, kind_mismatch, truncated, dim_mismatch, malformed };

std::string_view to_string(LoadErrorCode code);

class LoadError : public DataError {
 public:
  LoadError(LoadErrorCode code, const std::string& what)
      : DataError("checkpoint " + std::string(to_string(code)) + ": " + what), code_(code) {}
  LoadErrorCode code() const { return code_; }

 private:
  LoadErrorCode code_;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Throws LoadError. With `expected`, a checkpoint of another kind is
/// rejected rather than converted.
Checkpoint load_checkpoint(const std::string& path, std::optional<ModelKind> expected = std::nullopt);

}  // namespace cprnn
