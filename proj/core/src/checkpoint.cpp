#include "agrn/checkpoint.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "agrn/byte_io.hpp"

namespace agrn {
namespace {

constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxRank = 16;

}  // namespace

void write_archive(std::ostream& out, std::span<const NamedTensor> tensors) {
  byte_io::put_magic(out, "AGRN");
  for (const auto& t : tensors) {
    if (t.values.size() != numel(t.shape)) {
      throw std::invalid_argument("write_archive: tensor '" + t.name + "' has " + std::to_string(t.values.size()) +
                                  " values for shape " + to_string(t.shape));
    }
    byte_io::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    byte_io::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) byte_io::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values) byte_io::put_f64(out, v);
  }
  if (!out) throw std::runtime_error("write_archive: stream error");
}

std::vector<NamedTensor> read_archive(std::istream& in) {
  byte_io::expect_magic(in, "AGRN");
  std::vector<NamedTensor> tensors;
  while (in.peek() != std::char_traits<char>::eof()) {
    NamedTensor t;
    const std::uint32_t length = byte_io::get_u32(in, "tensor name length");
    if (length > kMaxNameLength) throw std::runtime_error("read_archive: implausible name length");
    t.name.resize(length);
    if (!in.read(t.name.data(), length)) throw std::runtime_error("read_archive: truncated tensor name");
    const std::uint32_t rank = byte_io::get_u32(in, "tensor rank of '" + t.name + "'");
    if (rank > kMaxRank) throw std::runtime_error("read_archive: implausible rank for '" + t.name + "'");
    for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(byte_io::get_u32(in, "shape of '" + t.name + "'"));
    t.values.resize(numel(t.shape));
    for (double& v : t.values) v = byte_io::get_f64(in, "payload of '" + t.name + "'");
    tensors.push_back(std::move(t));
  }
  return tensors;
}

std::vector<NamedTensor> snapshot(ModelParams& params) {
  std::vector<NamedTensor> out;
  for (const auto& p : named_parameters(params)) {
    const auto v = p.tensor.values();
    out.push_back({p.name, p.tensor.shape(), {v.begin(), v.end()}});
  }
  for (const auto& [name, state] : named_norm_states(params)) {
    out.push_back({name + ".running_mean", {state->running_mean.size()}, state->running_mean});
    out.push_back({name + ".running_var", {state->running_var.size()}, state->running_var});
  }
  return out;
}

const NamedTensor* find_tensor(std::span<const NamedTensor> archive, const std::string& name) {
  const auto it = std::find_if(archive.begin(), archive.end(), [&](const NamedTensor& t) { return t.name == name; });
  return it == archive.end() ? nullptr : &*it;
}

void restore(std::span<const NamedTensor> archive, ModelParams& params) {
  auto require = [&](const std::string& name, const Shape& shape) -> const NamedTensor& {
    const NamedTensor* t = find_tensor(archive, name);
    if (!t) throw std::runtime_error("restore: checkpoint lacks tensor '" + name + "'");
    if (t->shape != shape) {
      throw std::runtime_error("restore: tensor '" + name + "' has shape " + to_string(t->shape) +
                               ", model expects " + to_string(shape));
    }
    return *t;
  };
  for (auto& p : named_parameters(params)) {
    const auto& t = require(p.name, p.tensor.shape());
    std::copy(t.values.begin(), t.values.end(), p.tensor.mutable_values().begin());
  }
  for (auto& [name, state] : named_norm_states(params)) {
    const Shape shape{state->running_mean.size()};
    state->running_mean = require(name + ".running_mean", shape).values;
    state->running_var = require(name + ".running_var", shape).values;
  }
}

}  // namespace agrn
