#pragma once

#include <functional>
#include <string_view>

namespace agrn {

using WarningSink = std::function<void(std::string_view)>;

/// Emit a warning through the installed sink (stderr by default).
void warn(std::string_view message);

/// Replace the warning sink; returns the previous one. Passing an empty
/// function restores the stderr sink.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace agrn
