#pragma once

// Synthetic motor-imagery recordings in the on-disk layout of the public
// dataset, for tests that exercise the loader end to end.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "agrn/dataset.hpp"
#include "agrn/edf.hpp"

namespace fake {

inline constexpr double kRate = 160.0;
inline constexpr double kRestSeconds = 4.2;
inline constexpr double kTaskSeconds = 4.1;

/// Physical value of channel c at sample t of a run.
inline double signal_value(std::size_t c, std::size_t t, std::uint32_t run) {
  return 40.0 * std::sin(0.013 * double(t) * double(c + 1)) + double(run);
}

/// Alternating T0 rest and T1/T2 task blocks, `per_code` tasks of each code.
inline agrn::EdfRecordingSpec run_spec(std::uint32_t run, std::size_t per_code, std::size_t channels = 64) {
  agrn::EdfRecordingSpec spec;
  spec.samples_per_record = 160;
  spec.record_duration = 1.0;
  double t = 0.0;
  for (std::size_t k = 0; k < 2 * per_code; ++k) {
    spec.annotations.push_back({t, kRestSeconds, "T0"});
    t += kRestSeconds;
    spec.annotations.push_back({t, kTaskSeconds, k % 2 == 0 ? "T1" : "T2"});
    t += kTaskSeconds;
  }
  spec.annotations.push_back({t, kRestSeconds, "T0"});
  t += kRestSeconds;
  const auto samples = static_cast<std::size_t>(std::ceil(t * kRate));
  for (std::size_t c = 0; c < channels; ++c) {
    agrn::EdfRecordingSpec::Channel ch;
    ch.label = "C" + std::to_string(c);
    ch.physical_min = -100.0;
    ch.physical_max = 100.0;
    ch.physical.resize(samples);
    for (std::size_t s = 0; s < samples; ++s) ch.physical[s] = signal_value(c, s, run);
    spec.channels.push_back(std::move(ch));
  }
  return spec;
}

inline void write_file(const std::filesystem::path& path, const agrn::EdfFile& file) {
  std::filesystem::create_directories(path.parent_path());
  const auto bytes = agrn::write_edf(file);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Writes runs 4, 6, 8, 10, 12 and 14 of `subject` under `dir`.
inline void write_subject(const std::filesystem::path& dir, std::uint32_t subject, std::size_t per_code) {
  for (std::uint32_t run : {4u, 6u, 8u, 10u, 12u, 14u})
    write_file(agrn::run_path(dir, subject, run), agrn::make_edf(run_spec(run, per_code)));
}

}  // namespace fake
