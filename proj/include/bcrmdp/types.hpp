#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace bcrmdp {

using State = std::size_t;
using Action = std::size_t;

struct StateAction {
    State state;
    Action action;

    friend bool operator==(const StateAction&, const StateAction&) = default;
};

struct StateActionHash {
    std::size_t operator()(const StateAction& sa) const noexcept {
        return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(sa.state) << 32) ^ sa.action);
    }
};

/// One interaction step: action `a` taken in `x` produced reward `r` and successor `x_next`.
struct TransitionRecord {
    State x;
    Action a;
    double r;
    State x_next;

    friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

// Error hierarchy. Everything derives from std::runtime_error (or out_of_range for
// index errors) so callers can catch broadly at the CLI boundary.

class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DiagnosticsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RefusalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GridSpecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AggregationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bcrmdp
