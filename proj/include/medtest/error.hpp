#pragma once

#include <stdexcept>
#include <string>

namespace medtest {

/// Malformed graph query: unknown node, overlapping sets, bad query spec.
class invalid_query : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Graph construction rejected (cycle, malformed latent node, parse failure).
class graph_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input data violates a precondition (non-finite values, degenerate columns, missing blocks).
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace medtest
