#pragma once

#include <stdexcept>
#include <string>

namespace sbmp {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad arguments, malformed configs, degenerate shapes.
struct invalid_input_error : error {
    using error::error;
};

// Bridge quantities evaluated at t in {0,1} where alpha or the score diverge.
struct singular_time_error : error {
    using error::error;
};

// Unreadable, truncated, or version-mismatched checkpoint files.
struct checkpoint_format_error : error {
    using error::error;
};

// Non-finite loss, gradient, or parameter during training.
struct diverged_training_error : error {
    using error::error;
};

// Non-finite state during flow integration.
struct sampling_diverged_error : error {
    using error::error;
};

// Environment generation could not produce a valid instance.
struct generation_error : error {
    using error::error;
};

// Dataset file violates the schema; message carries a JSON pointer.
struct parse_error : error {
    using error::error;
};

struct corrupt_model_error : error {
    using error::error;
};

}  // namespace sbmp
