#ifndef SFIE_ERRORS_HPP
#define SFIE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sfie {

/// Invalid or inconsistent problem setup: bad parameter ranges, malformed
/// configuration files, missing inputs. Maps to CLI exit code 2.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch between coupled objects (e.g. a noise path sampled on a
/// different grid than the one being assembled on).
class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace sfie

#endif  // SFIE_ERRORS_HPP
