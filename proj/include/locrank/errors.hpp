#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace locrank {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Fatal configuration problem: dimension mismatch, unknown provider name,
// incompatible index/spec pairing. Never retriable.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or unusable input data: bad diff hunks, invalid instances,
// texts that tokenize to nothing.
class InputError : public Error {
public:
    using Error::Error;
};

// A vector that would have to be normalized is (numerically) zero.
class DegenerateVectorError : public InputError {
public:
    using InputError::InputError;
};

// An embedding or completion provider call failed. `retriable` distinguishes
// transient transport failures from permanent ones.
class ProviderError : public Error {
public:
    ProviderError(const std::string& msg, bool retriable,
                  std::vector<std::string> failed_batch = {})
        : Error(msg), retriable_(retriable), failed_batch_(std::move(failed_batch)) {}

    bool retriable() const { return retriable_; }
    const std::vector<std::string>& failed_batch() const { return failed_batch_; }

private:
    bool retriable_;
    std::vector<std::string> failed_batch_;
};

// The prompt budget cannot be satisfied even with an empty query.
class BudgetError : public Error {
public:
    BudgetError(const std::string& msg, long min_feasible_total)
        : Error(msg), min_feasible_total_(min_feasible_total) {}

    long min_feasible_total() const { return min_feasible_total_; }

private:
    long min_feasible_total_;
};

// Training hit a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, std::size_t step)
        : Error(msg), step_(step) {}

    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

// A ranked list or benchmark references a unit that does not exist.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Evaluation inputs are missing ranked lists for some instances.
class IncompleteRunError : public Error {
public:
    IncompleteRunError(const std::string& msg, std::vector<std::string> missing_ids)
        : Error(msg), missing_ids_(std::move(missing_ids)) {}

    const std::vector<std::string>& missing_ids() const { return missing_ids_; }

private:
    std::vector<std::string> missing_ids_;
};

} // namespace locrank
