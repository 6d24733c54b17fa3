#pragma once

#include <stdexcept>
#include <string>

namespace tangled {

/// Precondition violation on an argument (bad index, invalid trace, ...).
class domain_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The operation is well defined but deliberately not performed: exact
/// exponential solvers past their size cap, bounds outside their hypotheses,
/// quantities that are undefined at q in {0, 1}.
class refusal_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw domain_error(what);
}

}  // namespace detail
}  // namespace tangled
