#pragma once

namespace scrooge {

inline constexpr const char* kVersionTag = "scrooge-0.1.0";

}  // namespace scrooge
