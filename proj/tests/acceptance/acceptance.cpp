// Acceptance run: one pass/fail line per criterion 1-10. Criteria 1-9 come
// from the verify suites; 10 repeats them and compares the CSV output bytes.
// Usage: acceptance [output_dir]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "lphom/verify.hpp"

using namespace lph;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  std::vector<CheckReport> reports;
  std::string csv;  // reports plus the convergence tables
};

Outcome run_once(std::uint64_t seed) {
  AcceptanceOptions opts;
  opts.seed = seed;
  opts.include_convergence = false;
  Outcome o;
  o.reports = run_acceptance_suite(opts);
  std::vector<ConvergenceReport> studies;
  const auto conv = run_convergence_acceptance(opts.convergence, &studies);
  o.reports.insert(o.reports.end(), conv.begin(), conv.end());
  std::stable_sort(o.reports.begin(), o.reports.end(), [](const CheckReport& a, const CheckReport& b) {
    return a.criterion != b.criterion ? a.criterion < b.criterion : a.id < b.id;
  });
  o.csv = reports_csv(o.reports);
  for (const auto& s : studies) o.csv += convergence_csv(s);
  return o;
}

const char* title(int c) {
  switch (c) {
    case 1: return "laminate oracle";
    case 2: return "trivial reductions";
    case 3: return "effective tensor structure";
    case 4: return "H = K fast path";
    case 5: return "material uniformity";
    case 6: return "corrector linearity";
    case 7: return "convergence study";
    case 8: return "residual irrelevance";
    case 9: return "nonperiodic diagnostic";
    case 10: return "determinism";
  }
  return "";
}

// seconds allowed per criterion; 0 = no limit stated
double runtime_limit(int c) {
  switch (c) {
    case 1: return 30;
    case 2: return 5;
    case 3: return 300;
    case 4: return 300;
    case 7: return 900;
    case 9: return 120;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::create_directories(out);
  const std::uint64_t seed = 20240611;

  const Outcome first = run_once(seed);
  const Outcome second = run_once(seed);

  std::map<int, std::vector<const CheckReport*>> by;
  for (const auto& r : first.reports) by[r.criterion].push_back(&r);

  int failed = 0;
  for (int c = 1; c <= 9; ++c) {
    const auto& list = by[c];
    bool pass = !list.empty();
    double seconds = 0;
    std::string summary;
    for (const auto* r : list) {
      pass &= r->status == CheckStatus::Pass;
      seconds += r->runtime;
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s%s %.3g %s %.3g%s", summary.empty() ? "" : "; ", r->id.c_str(), r->measured,
                    r->relation.c_str(), r->tolerance, r->status == CheckStatus::Pass ? "" : (" [" + to_string(r->status) + "]").c_str());
      summary += buf;
    }
    const double limit = runtime_limit(c);
    const bool in_time = limit == 0 || seconds <= limit;
    pass &= in_time;
    char timing[96];
    if (limit > 0)
      std::snprintf(timing, sizeof timing, "runtime %.2f s <= %.0f s%s", seconds, limit, in_time ? "" : " EXCEEDED");
    else
      std::snprintf(timing, sizeof timing, "runtime %.2f s", seconds);
    std::printf("criterion %-2d %s  %-27s %s | %s\n", c, pass ? "PASS" : "FAIL", title(c), summary.c_str(), timing);
    failed += !pass;
  }
  const bool same = first.csv == second.csv;
  std::printf("criterion 10 %s  %-27s two runs of criteria 1-9, %zu CSV bytes, %s\n", same ? "PASS" : "FAIL", title(10),
              first.csv.size(), same ? "byte-identical" : "outputs differ");
  failed += !same;

  std::ofstream(out / "acceptance.csv") << first.csv;
  std::ofstream(out / "traceability.csv") << traceability_csv(first.reports);
  std::ofstream(out / "acceptance_junit.xml") << reports_junit(first.reports, "lphom.acceptance");
  std::fflush(stdout);
  return failed ? 1 : 0;
}
