#include "agrn/edf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>

namespace agrn {
namespace {

constexpr std::size_t kFixedHeader = 256;
constexpr std::size_t kSignalHeader = 256;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(' ');
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(' ');
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& field, const char* what, std::size_t offset) {
  const std::string t = trim(field);
  if (t.empty()) throw EdfError(std::string("empty numeric field '") + what + "'", offset);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !std::isfinite(v)) {
    throw EdfError(std::string("non-numeric field '") + what + "': \"" + t + "\"", offset);
  }
  return v;
}

long long parse_int(const std::string& field, const char* what, std::size_t offset) {
  const std::string t = trim(field);
  long long v = 0;
  const char* begin = t.data();
  if (!t.empty() && t[0] == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw EdfError(std::string("non-integer field '") + what + "': \"" + t + "\"", offset);
  }
  return v;
}

std::string pad(const std::string& value, std::size_t width, const char* what) {
  if (value.size() > width) {
    throw std::invalid_argument(std::string("EDF field '") + what + "' value \"" + value + "\" exceeds " +
                                std::to_string(width) + " characters");
  }
  return value + std::string(width - value.size(), ' ');
}

// Shortest %g rendering that fits in `width` characters.
std::string format_number(double v, std::size_t width) {
  char buffer[64];
  for (int precision = static_cast<int>(width); precision >= 1; --precision) {
    std::snprintf(buffer, sizeof buffer, "%.*g", precision, v);
    if (std::char_traits<char>::length(buffer) <= width) return buffer;
  }
  throw std::invalid_argument("EDF: cannot fit " + std::to_string(v) + " into " + std::to_string(width) + " characters");
}

std::string format_seconds(double t) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.6g", t);
  return buffer;
}

// Time-stamped annotation lists of one data record (EDF+ TAL encoding):
// "+onset[\x15duration]\x14text\x14...\x14\0".
void parse_tals(std::span<const std::uint8_t> bytes, std::size_t base_offset, std::vector<EdfAnnotation>& out) {
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes[pos] == 0) {
      ++pos;
      continue;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != 0) ++pos;
    const std::string tal(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                          bytes.begin() + static_cast<std::ptrdiff_t>(pos));
    const std::size_t first_sep = tal.find('\x14');
    if (first_sep == std::string::npos) throw EdfError("annotation list without 0x14 separator", base_offset + start);
    const std::string stamp = tal.substr(0, first_sep);
    const std::size_t dur_sep = stamp.find('\x15');
    EdfAnnotation a;
    a.onset = parse_double(stamp.substr(0, dur_sep), "annotation onset", base_offset + start);
    if (dur_sep != std::string::npos) {
      a.duration = parse_double(stamp.substr(dur_sep + 1), "annotation duration", base_offset + start);
    }
    std::size_t text_start = first_sep + 1;
    while (text_start < tal.size()) {
      std::size_t text_end = tal.find('\x14', text_start);
      if (text_end == std::string::npos) text_end = tal.size();
      if (text_end > text_start) {
        EdfAnnotation entry = a;
        entry.text = tal.substr(text_start, text_end - text_start);
        out.push_back(std::move(entry));
      }
      text_start = text_end + 1;
    }
  }
}

}  // namespace

EdfError::EdfError(const std::string& what, std::size_t offset)
    : std::runtime_error("EDF: " + what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

std::string EdfSignal::name() const { return trim(label); }

double EdfSignal::to_physical(std::int16_t d) const {
  return physical_min + (static_cast<double>(d) - digital_min) * (physical_max - physical_min) /
                            static_cast<double>(digital_max - digital_min);
}

std::vector<double> EdfSignal::physical() const {
  std::vector<double> out(digital.size());
  std::transform(digital.begin(), digital.end(), out.begin(), [this](std::int16_t d) { return to_physical(d); });
  return out;
}

double EdfFile::sample_rate(std::size_t i) const {
  return static_cast<double>(signals.at(i).samples_per_record) / record_duration;
}

std::vector<std::size_t> EdfFile::data_signals() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < signals.size(); ++i)
    if (!signals[i].is_annotation()) out.push_back(i);
  return out;
}

EdfFile parse_edf(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFixedHeader) throw EdfError("file shorter than the 256-byte header", bytes.size());
  std::size_t cursor = 0;
  auto take = [&](std::size_t width) {
    if (cursor + width > bytes.size()) throw EdfError("truncated header", cursor);
    std::string field(bytes.begin() + static_cast<std::ptrdiff_t>(cursor),
                      bytes.begin() + static_cast<std::ptrdiff_t>(cursor + width));
    cursor += width;
    return field;
  };

  EdfFile f;
  f.version = take(8);
  f.patient = take(80);
  f.recording = take(80);
  f.start_date = take(8);
  f.start_time = take(8);
  const std::size_t header_bytes_at = cursor;
  f.header_bytes = take(8);
  f.reserved = take(44);
  const std::size_t records_at = cursor;
  f.records_field = take(8);
  const std::size_t duration_at = cursor;
  f.duration_field = take(8);
  const std::size_t signals_at = cursor;
  f.signals_field = take(4);

  const long long declared_header = parse_int(f.header_bytes, "header bytes", header_bytes_at);
  const long long declared_records = parse_int(f.records_field, "number of data records", records_at);
  f.record_duration = parse_double(f.duration_field, "record duration", duration_at);
  const long long ns = parse_int(f.signals_field, "number of signals", signals_at);
  if (ns < 0 || ns > 4096) throw EdfError("implausible signal count " + std::to_string(ns), signals_at);
  const auto n_signals = static_cast<std::size_t>(ns);
  if (declared_header != static_cast<long long>(kFixedHeader + n_signals * kSignalHeader)) {
    throw EdfError("header byte count " + std::to_string(declared_header) + " does not match " +
                       std::to_string(n_signals) + " signals",
                   header_bytes_at);
  }
  if (bytes.size() < kFixedHeader + n_signals * kSignalHeader) {
    throw EdfError("truncated signal headers", bytes.size());
  }

  f.signals.resize(n_signals);
  auto fields = [&](std::size_t width, std::string EdfSignal::*member) {
    for (auto& s : f.signals) s.*member = take(width);
  };
  fields(16, &EdfSignal::label);
  fields(80, &EdfSignal::transducer);
  fields(8, &EdfSignal::physical_dimension);
  const std::size_t pmin_at = cursor;
  fields(8, &EdfSignal::physical_min_field);
  const std::size_t pmax_at = cursor;
  fields(8, &EdfSignal::physical_max_field);
  const std::size_t dmin_at = cursor;
  fields(8, &EdfSignal::digital_min_field);
  const std::size_t dmax_at = cursor;
  fields(8, &EdfSignal::digital_max_field);
  fields(80, &EdfSignal::prefiltering);
  const std::size_t spr_at = cursor;
  fields(8, &EdfSignal::samples_field);
  fields(32, &EdfSignal::reserved);

  std::size_t record_bytes = 0;
  for (std::size_t i = 0; i < n_signals; ++i) {
    auto& s = f.signals[i];
    s.physical_min = parse_double(s.physical_min_field, "physical minimum", pmin_at + 8 * i);
    s.physical_max = parse_double(s.physical_max_field, "physical maximum", pmax_at + 8 * i);
    s.digital_min = static_cast<int>(parse_int(s.digital_min_field, "digital minimum", dmin_at + 8 * i));
    s.digital_max = static_cast<int>(parse_int(s.digital_max_field, "digital maximum", dmax_at + 8 * i));
    const long long spr = parse_int(s.samples_field, "samples per record", spr_at + 8 * i);
    if (s.digital_min == s.digital_max) {
      throw EdfError("digital minimum equals digital maximum for signal " + std::to_string(i), dmin_at + 8 * i);
    }
    if (spr < 0) throw EdfError("negative samples per record", spr_at + 8 * i);
    s.samples_per_record = static_cast<std::size_t>(spr);
    record_bytes += 2 * s.samples_per_record;
  }

  const std::size_t data_start = cursor;
  if (declared_records < -1) throw EdfError("invalid number of data records", records_at);
  if (declared_records == -1) {
    f.n_records = record_bytes == 0 ? 0 : (bytes.size() - data_start) / record_bytes;
  } else {
    f.n_records = static_cast<std::size_t>(declared_records);
  }
  if (f.n_records > 0 && !(f.record_duration > 0.0)) {
    throw EdfError("record duration must be positive", duration_at);
  }
  for (auto& s : f.signals) s.digital.reserve(f.n_records * s.samples_per_record);

  for (std::size_t r = 0; r < f.n_records; ++r) {
    const std::size_t record_at = data_start + r * record_bytes;
    if (record_at + record_bytes > bytes.size()) {
      throw EdfError("truncated data record " + std::to_string(r) + " (need " + std::to_string(record_bytes) +
                         " bytes, have " + std::to_string(bytes.size() - std::min(bytes.size(), record_at)) + ")",
                     record_at);
    }
    std::size_t at = record_at;
    for (auto& s : f.signals) {
      const std::size_t signal_at = at;
      for (std::size_t k = 0; k < s.samples_per_record; ++k, at += 2) {
        const auto raw = static_cast<std::uint16_t>(bytes[at] | (bytes[at + 1] << 8));
        s.digital.push_back(static_cast<std::int16_t>(raw));
      }
      if (s.is_annotation()) parse_tals(bytes.subspan(signal_at, 2 * s.samples_per_record), signal_at, f.annotations);
    }
  }
  return f;
}

EdfFile read_edf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_edf: cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_edf(bytes);
  } catch (const EdfError& e) {
    throw EdfError(path.string() + ": " + e.what(), e.offset());
  }
}

std::vector<std::uint8_t> write_edf(const EdfFile& f) {
  std::string header;
  auto put = [&](const std::string& value, std::size_t width, const char* what) {
    if (value.size() != width) {
      throw std::invalid_argument(std::string("write_edf: field '") + what + "' is " + std::to_string(value.size()) +
                                  " bytes, expected " + std::to_string(width));
    }
    header += value;
  };
  put(f.version, 8, "version");
  put(f.patient, 80, "patient");
  put(f.recording, 80, "recording");
  put(f.start_date, 8, "start date");
  put(f.start_time, 8, "start time");
  put(f.header_bytes, 8, "header bytes");
  put(f.reserved, 44, "reserved");
  put(f.records_field, 8, "number of records");
  put(f.duration_field, 8, "record duration");
  put(f.signals_field, 4, "number of signals");
  auto each = [&](std::size_t width, const std::string EdfSignal::*member, const char* what) {
    for (const auto& s : f.signals) put(s.*member, width, what);
  };
  each(16, &EdfSignal::label, "label");
  each(80, &EdfSignal::transducer, "transducer");
  each(8, &EdfSignal::physical_dimension, "physical dimension");
  each(8, &EdfSignal::physical_min_field, "physical minimum");
  each(8, &EdfSignal::physical_max_field, "physical maximum");
  each(8, &EdfSignal::digital_min_field, "digital minimum");
  each(8, &EdfSignal::digital_max_field, "digital maximum");
  each(80, &EdfSignal::prefiltering, "prefiltering");
  each(8, &EdfSignal::samples_field, "samples per record");
  each(32, &EdfSignal::reserved, "signal reserved");

  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (const auto& s : f.signals) {
    if (s.digital.size() != f.n_records * s.samples_per_record) {
      throw std::invalid_argument("write_edf: signal '" + s.name() + "' holds " + std::to_string(s.digital.size()) +
                                  " samples for " + std::to_string(f.n_records) + " records");
    }
  }
  for (std::size_t r = 0; r < f.n_records; ++r) {
    for (const auto& s : f.signals) {
      for (std::size_t k = 0; k < s.samples_per_record; ++k) {
        const auto raw = static_cast<std::uint16_t>(s.digital[r * s.samples_per_record + k]);
        out.push_back(static_cast<std::uint8_t>(raw & 0xFF));
        out.push_back(static_cast<std::uint8_t>(raw >> 8));
      }
    }
  }
  return out;
}

EdfFile make_edf(const EdfRecordingSpec& spec) {
  if (spec.samples_per_record == 0) throw std::invalid_argument("make_edf: samples_per_record must be positive");
  if (!(spec.record_duration > 0.0)) throw std::invalid_argument("make_edf: record_duration must be positive");
  if (spec.digital_min >= spec.digital_max) throw std::invalid_argument("make_edf: empty digital range");
  std::size_t n_samples = spec.channels.empty() ? 0 : spec.channels.front().physical.size();
  for (const auto& c : spec.channels) {
    if (c.physical.size() != n_samples) throw std::invalid_argument("make_edf: channels differ in length");
    if (!(c.physical_max > c.physical_min)) {
      throw std::invalid_argument("make_edf: empty physical range for '" + c.label + "'");
    }
  }
  const std::size_t n_records = (n_samples + spec.samples_per_record - 1) / spec.samples_per_record;

  // TAL bytes per record: a timekeeping entry plus the annotations whose
  // onset falls inside the record.
  std::vector<std::string> tals(n_records);
  const bool annotated = !spec.annotations.empty();
  if (annotated) {
    for (std::size_t r = 0; r < n_records; ++r) {
      tals[r] = "+" + format_seconds(static_cast<double>(r) * spec.record_duration) + "\x14\x14";
      tals[r].push_back('\0');
    }
    for (const auto& a : spec.annotations) {
      const auto r = std::min(n_records - 1, static_cast<std::size_t>(std::max(0.0, a.onset / spec.record_duration)));
      std::string tal = "+" + format_seconds(a.onset);
      if (a.duration > 0.0) tal += "\x15" + format_seconds(a.duration);
      tal += "\x14" + a.text + "\x14";
      tal.push_back('\0');
      tals[r] += tal;
    }
  }
  std::size_t annotation_bytes = 0;
  for (const auto& t : tals) annotation_bytes = std::max(annotation_bytes, t.size());
  const std::size_t annotation_samples = (annotation_bytes + 1) / 2;

  EdfFile f;
  const std::size_t ns = spec.channels.size() + (annotated ? 1 : 0);
  f.version = pad("0", 8, "version");
  f.patient = pad(spec.patient, 80, "patient");
  f.recording = pad(spec.recording, 80, "recording");
  f.start_date = pad("01.01.09", 8, "start date");
  f.start_time = pad("00.00.00", 8, "start time");
  f.header_bytes = pad(std::to_string(kFixedHeader + ns * kSignalHeader), 8, "header bytes");
  f.reserved = pad(annotated ? "EDF+C" : "", 44, "reserved");
  f.records_field = pad(std::to_string(n_records), 8, "number of records");
  f.duration_field = pad(format_number(spec.record_duration, 8), 8, "record duration");
  f.signals_field = pad(std::to_string(ns), 4, "number of signals");
  f.n_records = n_records;
  f.record_duration = spec.record_duration;

  auto make_signal = [&](const std::string& label, const std::string& dimension, double pmin, double pmax, int dmin,
                         int dmax, std::size_t spr) {
    EdfSignal s;
    s.label = pad(label, 16, "label");
    s.transducer = pad("", 80, "transducer");
    s.physical_dimension = pad(dimension, 8, "physical dimension");
    s.physical_min_field = pad(format_number(pmin, 8), 8, "physical minimum");
    s.physical_max_field = pad(format_number(pmax, 8), 8, "physical maximum");
    s.digital_min_field = pad(std::to_string(dmin), 8, "digital minimum");
    s.digital_max_field = pad(std::to_string(dmax), 8, "digital maximum");
    s.prefiltering = pad("", 80, "prefiltering");
    s.samples_field = pad(std::to_string(spr), 8, "samples per record");
    s.reserved = pad("", 32, "signal reserved");
    // Use the values the header text round-trips to, as a reader would.
    s.physical_min = std::strtod(s.physical_min_field.c_str(), nullptr);
    s.physical_max = std::strtod(s.physical_max_field.c_str(), nullptr);
    s.digital_min = dmin;
    s.digital_max = dmax;
    s.samples_per_record = spr;
    return s;
  };

  for (const auto& c : spec.channels) {
    EdfSignal s = make_signal(c.label, spec.physical_dimension, c.physical_min, c.physical_max, spec.digital_min,
                              spec.digital_max, spec.samples_per_record);
    const double scale = static_cast<double>(spec.digital_max - spec.digital_min) / (s.physical_max - s.physical_min);
    s.digital.resize(n_records * spec.samples_per_record);
    for (std::size_t k = 0; k < s.digital.size(); ++k) {
      const double p = k < c.physical.size() ? c.physical[k] : 0.0;
      const double d = std::round((p - s.physical_min) * scale + spec.digital_min);
      s.digital[k] = static_cast<std::int16_t>(std::clamp(d, double(spec.digital_min), double(spec.digital_max)));
    }
    f.signals.push_back(std::move(s));
  }
  if (annotated) {
    EdfSignal s = make_signal("EDF Annotations", "", -1, 1, -32768, 32767, annotation_samples);
    s.digital.assign(n_records * annotation_samples, 0);
    for (std::size_t r = 0; r < n_records; ++r) {
      std::vector<std::uint8_t> raw(2 * annotation_samples, 0);
      std::copy(tals[r].begin(), tals[r].end(), raw.begin());
      for (std::size_t k = 0; k < annotation_samples; ++k) {
        s.digital[r * annotation_samples + k] =
            static_cast<std::int16_t>(static_cast<std::uint16_t>(raw[2 * k] | (raw[2 * k + 1] << 8)));
      }
    }
    f.signals.push_back(std::move(s));
    f.annotations = spec.annotations;
  }
  return f;
}

}  // namespace agrn
