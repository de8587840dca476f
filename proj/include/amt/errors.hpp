#pragma once

#include <stdexcept>
#include <string>

namespace amt {

/// API misuse: consuming a future twice, starting a sender twice, width mismatch.
class usage_error : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

/// Invalid runtime or solver configuration (zero workers, theta <= 0, ...).
class configuration_error : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

/// Work submitted to a scheduler that has been shut down.
class rejected_error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Domain violation of a numerical routine (e.g. |x| >= 1 for ln(1+x)).
class domain_error : public std::domain_error
{
  public:
    using std::domain_error::domain_error;
};

}    // namespace amt
