#pragma once

// The acceptance battery: eleven analytic-oracle and property checks, shared
// by the acceptance test binary and `aml suite`.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace aml::acceptance {

struct CriterionResult {
    int id = 0;
    std::string module;
    std::string title;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    double budget_seconds = 0.0;
};

struct SuiteOptions {
    std::vector<std::string> only;  // module names; empty runs everything
    std::uint64_t seed = 2024;
};

/// Modules that own at least one criterion.
std::vector<std::string> module_names();

/// Runs the selected criteria in order, calling `on_result` after each.
/// A criterion that throws is recorded as FAIL with the error message.
std::vector<CriterionResult> run(const SuiteOptions& opts,
                                 const std::function<void(const CriterionResult&)>& on_result = {});

/// "PASS  4 quantum      free quantum measure ... (1.23 s) detail".
std::string format_line(const CriterionResult& r);

}  // namespace aml::acceptance
