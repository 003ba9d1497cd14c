// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Arguments, if any, select criteria by name.
#include "acceptance.hpp"

#include <torch/torch.h>

#include <algorithm>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>

using namespace napa::acceptance;

int main(int argc, char** argv) {
  at::set_num_threads(1);
  const std::vector<std::pair<std::string, std::function<void(Report&)>>> criteria{
      {"bonemap-geometry", bonemap_geometry},
      {"loop-parameterization", loop_parameterization},
      {"soft-renderer", soft_renderer},
      {"loss-suite", loss_suite},
      {"metrics", metrics},
      {"training-protocol", training_protocol},
      {"instance-norm", instance_norm},
      {"service", service},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Report r;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      run(r);
    } catch (const std::exception& e) {
      r.check(false, std::string("exception: ") + e.what());
    }
    char elapsed[32];
    std::snprintf(elapsed, sizeof elapsed, "%.1fs", seconds_since(t0));
    std::cout << (r.passed() ? "PASS " : "FAIL ") << name << " (" << elapsed << ")";
    for (const auto& n : r.notes()) std::cout << ' ' << n;
    std::cout << '\n';
    for (const auto& f : r.failures()) std::cout << "    failed: " << f << '\n';
    std::cout.flush();
    failed += r.passed() ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
