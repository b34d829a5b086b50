// Acceptance gate: runs every benchmark criterion and prints one PASS/FAIL
// line per criterion. Exits nonzero unless all pass.

#include <cstdio>
#include <exception>

#include "fracid/benchmark.hpp"

int main() {
    try {
        const auto results =
            fracid::run_benchmark_suite({1, 2, 3, 4, 5, 6, 7, 8});
        std::fputs(fracid::benchmark_report(results).c_str(), stdout);
        for (const auto& r : results)
            if (!r.pass) return 1;
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance suite aborted: %s\n", e.what());
        return 1;
    }
}
