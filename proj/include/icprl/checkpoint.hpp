#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace icprl {

// Flat parameter dump shared by policy and world-model checkpoints:
//
//   icprl-checkpoint 1
//   kind <policy|worldmodel>
//   env <griddrop|timedremove>
//   dims <name>=<int> ...
//   vocab-hash <hex>
//   count <n>
//   <n lines, one C99 hex-float per parameter>
//   end
//
// Hex floats make the round trip bit-exact.
struct Checkpoint {
  std::string kind;
  std::string env;
  std::map<std::string, int> dims;
  std::uint64_t vocab_hash = 0;
  std::vector<double> values;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace icprl
