// Acceptance gate: runs every criterion against the reference configuration
// and exits nonzero if any fails.  Invoked by ctest; also usable standalone
// with any config path.

#include <cstdio>
#include <iostream>

#include "smp/acceptance.hpp"
#include "smp/config.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <config.json>\n", argv[0]);
        return 2;
    }
    try {
        const smp::ExperimentConfig cfg = smp::load_config(argv[1]);
        std::printf("acceptance battery: %s\n", argv[1]);
        const auto results = smp::acceptance::run(cfg, std::cout);
        int failed = 0;
        for (const auto& r : results)
            if (!r.pass) ++failed;
        if (failed == 0) {
            std::printf("all %zu criteria passed\n", results.size());
            return 0;
        }
        std::printf("%d of %zu criteria FAILED\n", failed, results.size());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fatal: %s\n", e.what());
        return 1;
    }
}
