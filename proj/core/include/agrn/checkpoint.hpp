#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "agrn/model.hpp"

namespace agrn {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Archive layout, all little endian: "AGRN", then per tensor a u32 name
// length, the UTF-8 name, a u32 rank, rank u32 dims, and the f64 payload.
// Tensors run to end of stream.
void write_archive(std::ostream& out, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_archive(std::istream& in);

/// Trainable tensors followed by batch-norm running statistics.
std::vector<NamedTensor> snapshot(ModelParams& params);

/// Copies archived values into `params` by name. Every parameter and
/// running statistic must be present with a matching shape; unrelated
/// archive entries are ignored.
void restore(std::span<const NamedTensor> archive, ModelParams& params);

const NamedTensor* find_tensor(std::span<const NamedTensor> archive, const std::string& name);

}  // namespace agrn
