#pragma once

#include <stdexcept>
#include <string>

namespace skillforge {

// Stable error codes for everything the library can reject. Tests and the CLI
// dispatch on the code, never on the message text.
enum class errc {
    malformed_front_matter,
    missing_field,
    unknown_predicate,
    bad_polarity,
    negative_count,
    malformed_entry,
    unknown_skill,
    demoted_skill,
    invariant_violation,
    missing_terminal,
    duplicate_terminal,
    non_monotone_step,
    ambiguous_polarity,
    empty_input,
    degenerate_cohort,
    no_llm_calls,
    bad_partition,
    zero_tokens,
    unknown_model,
    length_mismatch,
    config_invalid,
    io_error,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::malformed_front_matter: return "malformed_front_matter";
        case errc::missing_field:          return "missing_field";
        case errc::unknown_predicate:      return "unknown_predicate";
        case errc::bad_polarity:           return "bad_polarity";
        case errc::negative_count:         return "negative_count";
        case errc::malformed_entry:        return "malformed_entry";
        case errc::unknown_skill:          return "unknown_skill";
        case errc::demoted_skill:          return "demoted_skill";
        case errc::invariant_violation:    return "invariant_violation";
        case errc::missing_terminal:       return "missing_terminal";
        case errc::duplicate_terminal:     return "duplicate_terminal";
        case errc::non_monotone_step:      return "non_monotone_step";
        case errc::ambiguous_polarity:     return "ambiguous_polarity";
        case errc::empty_input:            return "empty_input";
        case errc::degenerate_cohort:      return "degenerate_cohort";
        case errc::no_llm_calls:           return "no_llm_calls";
        case errc::bad_partition:          return "bad_partition";
        case errc::zero_tokens:            return "zero_tokens";
        case errc::unknown_model:          return "unknown_model";
        case errc::length_mismatch:        return "length_mismatch";
        case errc::config_invalid:         return "config_invalid";
        case errc::io_error:               return "io_error";
    }
    return "unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

} // namespace skillforge
