#pragma once

#include <stdexcept>
#include <string>

namespace fourie {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape disagreement inside a numeric primitive.
struct ShapeError : Error {
    using Error::Error;
};

// Broken API precondition (caller bug, not bad input data).
struct ContractError : Error {
    using Error::Error;
};

// Malformed or inconsistent external input (corpus, inventory, checkpoint).
struct DataError : Error {
    using Error::Error;
};

// Invalid run configuration or command-line usage.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace fourie
