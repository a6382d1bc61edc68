#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace madl {

// Error taxonomy. The CLI maps these onto process exit codes:
// ConfigError -> 2, DataError -> 3, NumericError -> 4, anything else -> 1.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a training fold diverges; carries the epoch index.
struct FoldDivergenceError : NumericError {
    FoldDivergenceError(int fold, int epoch, const std::string& what_arg)
        : NumericError("fold " + std::to_string(fold) + " epoch " +
                       std::to_string(epoch) + ": " + what_arg),
          fold_index(fold),
          epoch_index(epoch) {}

    int fold_index;
    int epoch_index;
};

// Checkpoint / file-format corruption; carries the byte offset of the fault.
struct FormatError : std::runtime_error {
    FormatError(std::size_t offset, const std::string& what_arg)
        : std::runtime_error("at byte " + std::to_string(offset) + ": " + what_arg),
          byte_offset(offset) {}

    std::size_t byte_offset;
};

}  // namespace madl
