#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ranklab/core/params.hpp"
#include "ranklab/core/tensor.hpp"

namespace ranklab {

// Self-describing text checkpoint.  Layout:
//
//   ranklab-checkpoint 1
//   arch <single line describing the architecture>
//   seed <u64 used to initialize the parameters>
//   tensors <count>
//   tensor <name> <rank> <dim...>
//   <values, 8 per line, printf %.17g>
//   ...
//
// %.17g prints enough digits that strtod recovers every double bit-exactly,
// so save -> load round-trips are lossless.
struct CheckpointDoc {
  std::string arch;
  uint64_t seed = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const CheckpointDoc& doc);
CheckpointDoc read_checkpoint(const std::string& path);

// Snapshot of a parameter set's values (gradients are not persisted).
CheckpointDoc checkpoint_of(const ParameterSet& ps, const std::string& arch);

// Restores values into an already-constructed set; entry names and shapes
// must match exactly.  Gradients are zeroed.
void load_into(ParameterSet& ps, const CheckpointDoc& doc);

// Formats one double with enough digits to round-trip exactly.
std::string format_double(double v);

// Width-list helpers for arch strings ("64,32" <-> {64, 32}).
std::string join_widths(const std::vector<int>& widths);
std::vector<int> parse_widths(const std::string& s);

}  // namespace ranklab
