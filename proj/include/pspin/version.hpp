#ifndef PSPIN_VERSION_HPP
#define PSPIN_VERSION_HPP

namespace pspin {

inline constexpr const char* version = "0.1.0";

} // namespace pspin

#endif
