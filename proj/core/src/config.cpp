#include "agrn/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace agrn {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view why) {
  throw std::invalid_argument("config: " + std::string(key) + " = '" + std::string(value) + "': " + std::string(why));
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) bad(key, value, "expected an integer");
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) bad(key, value, "expected a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  bad(key, value, "expected true or false");
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = text.find(sep, start);
    parts.push_back(trim(text.substr(start, end == std::string_view::npos ? end : end - start)));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return parts;
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view value) {
  std::vector<T> out;
  if (trim(value).empty()) return out;
  for (auto part : split(value, ',')) out.push_back(parse_integer<T>(key, part));
  return out;
}

std::uint8_t parse_class(std::string_view key, std::string_view name) {
  for (std::size_t c = 0; c < kClassNames.size(); ++c)
    if (name == kClassNames[c]) return static_cast<std::uint8_t>(c);
  bad(key, name, "unknown class (expected L, R, B or F)");
}

// "4/8/12:T1=L:T2=R;6/10/14:T1=B:T2=F"
std::vector<LabelRule> parse_rules(std::string_view key, std::string_view value) {
  std::vector<LabelRule> rules;
  for (auto text : split(value, ';')) {
    if (text.empty()) continue;
    const auto fields = split(text, ':');
    if (fields.size() != 3) bad(key, text, "expected runs:CODE=CLASS:CODE=CLASS");
    LabelRule rule;
    for (auto run : split(fields[0], '/')) rule.runs.push_back(parse_integer<std::uint32_t>(key, run));
    auto mapping = [&](std::string_view f, std::string& code, std::uint8_t& label) {
      const auto eq = f.find('=');
      if (eq == std::string_view::npos) bad(key, f, "expected CODE=CLASS");
      code = std::string(trim(f.substr(0, eq)));
      label = parse_class(key, trim(f.substr(eq + 1)));
    };
    mapping(fields[1], rule.first_code, rule.first_label);
    mapping(fields[2], rule.second_code, rule.second_label);
    rules.push_back(std::move(rule));
  }
  if (rules.empty()) bad(key, value, "no rules");
  return rules;
}

template <typename T>
std::string join(const std::vector<T>& values, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? sep : "") + std::to_string(values[i]);
  return out;
}

std::string format_rules(const std::vector<LabelRule>& rules) {
  std::string out;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& r = rules[i];
    out += (i ? ";" : "") + join(r.runs, "/") + ":" + r.first_code + "=" + kClassNames.at(r.first_label) + ":" +
           r.second_code + "=" + kClassNames.at(r.second_label);
  }
  return out;
}

std::string real(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

Precision parse_precision(std::string_view text) {
  if (text == "f64") return Precision::f64;
  if (text == "f32") return Precision::f32;
  throw std::invalid_argument("precision must be f32 or f64, got '" + std::string(text) + "'");
}

std::string_view precision_name(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
  value = trim(value);
  auto size = [&] { return parse_integer<std::size_t>(key, value); };
  if (key == "seed") c.seed = parse_integer<std::uint64_t>(key, value);
  else if (key == "folds") c.folds = size();
  else if (key == "precision") c.train.precision = parse_precision(value);
  else if (key == "scope") {
    if (value == "group") c.train.adam.learning_rate = default_learning_rate(TrainingScope::group);
    else if (value == "subject") c.train.adam.learning_rate = default_learning_rate(TrainingScope::subject);
    else bad(key, value, "expected group or subject");
  }
  else if (key == "model.n_conv_layers") c.model.n_conv_layers = size();
  else if (key == "model.convs_per_block") c.model.convs_per_block = size();
  else if (key == "model.cheb_order") c.model.cheb_order = size();
  else if (key == "model.feature_widths") c.model.feature_widths = parse_list<std::size_t>(key, value);
  else if (key == "model.pool_after_every") c.model.pool_after_every = size();
  else if (key == "model.pooling") c.model.pooling = parse_bool(key, value);
  else if (key == "model.n_classes") c.model.n_classes = size();
  else if (key == "model.leaky_slope") c.model.leaky_slope = parse_real(key, value);
  else if (key == "model.bn_momentum") c.model.bn_momentum = parse_real(key, value);
  else if (key == "model.bn_eps") c.model.bn_eps = parse_real(key, value);
  else if (key == "train.epochs") c.train.epochs = size();
  else if (key == "train.batch_size") c.train.batch_size = size();
  else if (key == "train.learning_rate") c.train.adam.learning_rate = parse_real(key, value);
  else if (key == "train.beta1") c.train.adam.beta1 = parse_real(key, value);
  else if (key == "train.beta2") c.train.adam.beta2 = parse_real(key, value);
  else if (key == "train.adam_eps") c.train.adam.eps = parse_real(key, value);
  else if (key == "train.l2_lambda") c.train.l2_lambda = parse_real(key, value);
  else if (key == "train.eval_interval") c.train.eval_interval = size();
  else if (key == "train.early_stop_patience") c.train.early_stop_patience = size();
  else if (key == "data.subjects") c.data.subjects = parse_list<std::uint32_t>(key, value);
  else if (key == "data.label_rules") c.data.rules = parse_rules(key, value);
  else if (key == "data.trials_per_label_per_run") c.data.trials_per_label_per_run = size();
  else if (key == "data.channels") c.data.channels = size();
  else if (key == "data.trial_length") c.data.trial_length = size();
  else if (key == "data.sample_rate") c.data.sample_rate = parse_real(key, value);
  else if (key == "data.zscore") c.data.zscore = parse_bool(key, value);
  else if (key == "data.per_trial_split") c.data.per_trial_split = parse_bool(key, value);
  else throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  // scope is applied first so an explicit learning rate wins wherever it appears.
  std::vector<std::pair<std::string_view, std::string_view>> settings;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    settings.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  std::stable_partition(settings.begin(), settings.end(), [](const auto& s) { return s.first == "scope"; });
  for (const auto& [key, value] : settings) apply_setting(base, key, value);
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_config(text, std::move(base));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto b = [](bool v) { return v ? "true" : "false"; };
  out << "seed = " << c.seed << '\n'
      << "folds = " << c.folds << '\n'
      << "precision = " << precision_name(c.train.precision) << '\n'
      << "model.n_conv_layers = " << c.model.n_conv_layers << '\n'
      << "model.convs_per_block = " << c.model.convs_per_block << '\n'
      << "model.cheb_order = " << c.model.cheb_order << '\n'
      << "model.feature_widths = " << join(c.model.feature_widths) << '\n'
      << "model.pool_after_every = " << c.model.pool_after_every << '\n'
      << "model.pooling = " << b(c.model.pooling) << '\n'
      << "model.n_classes = " << c.model.n_classes << '\n'
      << "model.leaky_slope = " << real(c.model.leaky_slope) << '\n'
      << "model.bn_momentum = " << real(c.model.bn_momentum) << '\n'
      << "model.bn_eps = " << real(c.model.bn_eps) << '\n'
      << "train.epochs = " << c.train.epochs << '\n'
      << "train.batch_size = " << c.train.batch_size << '\n'
      << "train.learning_rate = " << real(c.train.adam.learning_rate) << '\n'
      << "train.beta1 = " << real(c.train.adam.beta1) << '\n'
      << "train.beta2 = " << real(c.train.adam.beta2) << '\n'
      << "train.adam_eps = " << real(c.train.adam.eps) << '\n'
      << "train.l2_lambda = " << real(c.train.l2_lambda) << '\n'
      << "train.eval_interval = " << c.train.eval_interval << '\n'
      << "train.early_stop_patience = " << c.train.early_stop_patience << '\n'
      << "data.subjects = " << join(c.data.subjects) << '\n'
      << "data.label_rules = " << format_rules(c.data.rules) << '\n'
      << "data.trials_per_label_per_run = " << c.data.trials_per_label_per_run << '\n'
      << "data.channels = " << c.data.channels << '\n'
      << "data.trial_length = " << c.data.trial_length << '\n'
      << "data.sample_rate = " << real(c.data.sample_rate) << '\n'
      << "data.zscore = " << b(c.data.zscore) << '\n'
      << "data.per_trial_split = " << b(c.data.per_trial_split) << '\n';
  return out.str();
}

}  // namespace agrn
