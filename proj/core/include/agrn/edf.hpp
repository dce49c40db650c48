#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace agrn {

class EdfError : public std::runtime_error {
 public:
  EdfError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct EdfAnnotation {
  double onset = 0.0;
  double duration = 0.0;
  std::string text;
};

/// One signal. Header fields are kept verbatim (fixed width, space padded)
/// so a parsed file re-serialises byte for byte.
struct EdfSignal {
  std::string label;               // 16
  std::string transducer;          // 80
  std::string physical_dimension;  // 8
  std::string physical_min_field;  // 8
  std::string physical_max_field;  // 8
  std::string digital_min_field;   // 8
  std::string digital_max_field;   // 8
  std::string prefiltering;        // 80
  std::string samples_field;       // 8
  std::string reserved;            // 32

  double physical_min = 0.0;
  double physical_max = 0.0;
  int digital_min = 0;
  int digital_max = 0;
  std::size_t samples_per_record = 0;

  /// Samples of all data records, concatenated.
  std::vector<std::int16_t> digital;

  std::string name() const;
  bool is_annotation() const { return name() == "EDF Annotations"; }
  double to_physical(std::int16_t d) const;
  std::vector<double> physical() const;
};

struct EdfFile {
  std::string version;        // 8
  std::string patient;        // 80
  std::string recording;      // 80
  std::string start_date;     // 8
  std::string start_time;     // 8
  std::string header_bytes;   // 8
  std::string reserved;       // 44
  std::string records_field;  // 8
  std::string duration_field; // 8
  std::string signals_field;  // 4

  std::size_t n_records = 0;
  double record_duration = 0.0;
  std::vector<EdfSignal> signals;
  std::vector<EdfAnnotation> annotations;

  /// Samples per second of signal i.
  double sample_rate(std::size_t i) const;
  /// Indices of the non-annotation signals.
  std::vector<std::size_t> data_signals() const;
};

/// Decodes an EDF/EDF+ file: 256-byte fixed header, 256 bytes per signal,
/// then 16-bit little-endian two's-complement data records. Annotation
/// signals are decoded into time-stamped annotation lists.
EdfFile parse_edf(std::span<const std::uint8_t> bytes);
EdfFile read_edf(const std::filesystem::path& path);

/// Serialises from the verbatim header fields and digital samples.
std::vector<std::uint8_t> write_edf(const EdfFile& file);

/// Description of a new recording for make_edf.
struct EdfRecordingSpec {
  struct Channel {
    std::string label;
    std::vector<double> physical;
    double physical_min = -1.0;
    double physical_max = 1.0;
  };
  std::vector<Channel> channels;
  std::size_t samples_per_record = 160;
  double record_duration = 1.0;
  int digital_min = -32768;
  int digital_max = 32767;
  std::string physical_dimension = "uV";
  std::vector<EdfAnnotation> annotations;
  std::string patient = "X";
  std::string recording = "Startdate X";
};

/// Builds an EDF+ file (with an annotation signal when annotations are
/// given) by quantising physical values to the digital range.
EdfFile make_edf(const EdfRecordingSpec& spec);

}  // namespace agrn
