#pragma once

#include <stdexcept>
#include <string>

namespace pcl {

/// Tensor/batch dimension mismatch.
struct shape_error : std::invalid_argument {
    explicit shape_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid argument value (step counts, probabilities, capacities, ...).
struct param_error : std::invalid_argument {
    explicit param_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Training diverged or produced non-finite values.
struct training_error : std::runtime_error {
    explicit training_error(const std::string& what) : std::runtime_error(what) {}
};

/// File/config ingestion failure. Carries a line number when known (0 = unknown).
struct io_error : std::runtime_error {
    io_error(const std::string& what, long line = 0)
        : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_number(line) {}
    long line_number = 0;
};

}  // namespace pcl
