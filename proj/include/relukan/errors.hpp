#pragma once

#include <stdexcept>
#include <string>

namespace relukan {

// Shapes of two operands disagree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A configuration or argument value is out of range.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A basis interval collapsed (e <= s) under dynamic normalization.
class DegenerateBasisError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A cache or gradient buffer does not belong to the layer state it is used with.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Training produced a non-finite loss.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, long iteration)
        : std::runtime_error(what), iteration_(iteration) {}
    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

}  // namespace relukan
