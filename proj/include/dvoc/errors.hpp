#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dvoc {

/// Invalid input: bad parameters, malformed scenario files, impossible topologies.
/// Carries every problem found, not just the first.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(std::string message)
        : std::invalid_argument(message), problems_{std::move(message)} {}

    explicit ValidationError(std::vector<std::string> problems)
        : std::invalid_argument(join(problems)), problems_(std::move(problems)) {}

    [[nodiscard]] const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out;
        for (const auto& item : items) {
            if (!out.empty()) out += "; ";
            out += item;
        }
        return out;
    }

    std::vector<std::string> problems_;
};

/// Network that cannot be solved (no return path, structurally singular KCL).
class TopologyError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Integration blew up or produced non-finite values.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dvoc
