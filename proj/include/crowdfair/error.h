#ifndef CROWDFAIR_ERROR_H_
#define CROWDFAIR_ERROR_H_

#include <stdexcept>
#include <string>

namespace crowdfair {

// Raised for malformed input data (CSV content, inconsistent tables) and for
// violated preconditions on library calls.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace crowdfair

#endif  // CROWDFAIR_ERROR_H_
