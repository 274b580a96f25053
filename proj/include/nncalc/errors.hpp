#pragma once

#include <stdexcept>
#include <string>

namespace nncalc {

// Bad input. `field` is a dotted path to the offending value (e.g.
// "dataset.noise") so the service can return it as-is.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& message)
        : std::invalid_argument(field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class TrainingError : public std::runtime_error {
public:
    TrainingError(int epoch, const std::string& message)
        : std::runtime_error("epoch " + std::to_string(epoch) + ": " + message), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

// Measured states fall outside the reference support, so the exact KL
// divergence does not exist. Signals insufficient representation power.
class UndefinedDivergence : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class EmptyRegister : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace nncalc
