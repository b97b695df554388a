#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace rgpipe {

// Error taxonomy maps onto process exit codes at the CLI boundary:
// ConfigError -> 1 (usage / configuration), DataError -> 2 (bad inputs).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class DataError : public Error {
public:
  using Error::Error;
};

namespace detail {

inline void msg_append(std::ostringstream&) {}

template <typename T, typename... Rest>
void msg_append(std::ostringstream& oss, T&& head, Rest&&... rest) {
  oss << std::forward<T>(head);
  msg_append(oss, std::forward<Rest>(rest)...);
}

template <typename... Parts>
std::string msg(Parts&&... parts) {
  std::ostringstream oss;
  msg_append(oss, std::forward<Parts>(parts)...);
  return oss.str();
}

}  // namespace detail

template <typename... Parts>
[[noreturn]] void fail_config(Parts&&... parts) {
  throw ConfigError(detail::msg(std::forward<Parts>(parts)...));
}

template <typename... Parts>
[[noreturn]] void fail_data(Parts&&... parts) {
  throw DataError(detail::msg(std::forward<Parts>(parts)...));
}

}  // namespace rgpipe
