#pragma once

#include <stdexcept>
#include <string>

namespace navgen {

// Error categories map onto CLI exit codes: config=2, data=3, generation=4.
enum class ErrorKind { config, data, generation };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(std::string msg) { return Error(ErrorKind::config, std::move(msg)); }
inline Error data_error(std::string msg) { return Error(ErrorKind::data, std::move(msg)); }

}  // namespace navgen
