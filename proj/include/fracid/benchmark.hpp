#pragma once

#include <string>
#include <vector>

namespace fracid {

// ---------------------------------------------------------------------------
// Self-contained validation suite: each criterion simulates its own data with
// fixed seeds, runs the relevant pipeline, and reports measured numbers. The
// detail string is deterministic; wall time is reported separately so text
// reports stay byte-stable.
// ---------------------------------------------------------------------------

struct CriterionResult {
    int index = 0;
    std::string name;
    bool pass = false;
    std::string detail;    // deterministic measured numbers
    double seconds = 0.0;  // wall time of the criterion body
};

// Runs one criterion (1..8). tolerance_scale multiplies every pass tolerance
// (values < 1 tighten the gates, e.g. to exercise failure reporting).
CriterionResult run_criterion(int index, double tolerance_scale = 1.0);

std::vector<CriterionResult> run_benchmark_suite(
    const std::vector<int>& indices, double tolerance_scale = 1.0);

// Deterministic multi-line text report (no timings).
std::string benchmark_report(const std::vector<CriterionResult>& results);

}  // namespace fracid
