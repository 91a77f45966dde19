// Runs every acceptance criterion at full size and prints one PASS/FAIL line
// per criterion. Exit status is the number of failing criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "csbp/verify.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Timed {
  csbp::ReportBundle bundle;
  double seconds = 0.0;
};

Timed timed_suite(const std::string& name, unsigned threads) {
  csbp::SuiteConfig cfg;
  cfg.threads = threads;
  const auto t0 = Clock::now();
  Timed out{csbp::run_suite(name, cfg), 0.0};
  out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

// Reports of a bundle whose name contains any of the given fragments.
bool subset_passed(const csbp::ReportBundle& b, const std::vector<std::string>& fragments,
                   int& matched) {
  bool ok = true;
  matched = 0;
  for (const auto& r : b.reports) {
    for (const auto& f : fragments) {
      if (r.test_name.find(f) == std::string::npos) continue;
      ++matched;
      ok = ok && r.passed();
      break;
    }
  }
  return ok && matched > 0;
}

void print_failures(const csbp::ReportBundle& b) {
  for (const auto& r : b.reports) {
    if (!r.passed()) std::cerr << r.text_table() << "\n";
  }
}

int failures = 0;

void verdict(int id, bool ok, const std::string& what, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string secs(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f s", s);
  return buf;
}

}  // namespace

int main() {
  const unsigned kThreads = 0;

  {
    const auto r = timed_suite("identities", kThreads);
    if (!r.bundle.passed()) print_failures(r.bundle);
    verdict(1, r.bundle.passed() && r.seconds < 5.0, "analytic identity suite",
            std::to_string(r.bundle.reports.size()) + " reports, " + secs(r.seconds) + ", limit 5 s");
  }

  const auto exact = timed_suite("exact", kThreads);
  {
    if (!exact.bundle.passed()) print_failures(exact.bundle);
    verdict(2, exact.bundle.passed() && exact.seconds < 30.0,
            "exact Feller sampler against Laplace and extinction-atom oracles",
            secs(exact.seconds) + ", limit 30 s");
  }

  {
    const auto r = timed_suite("euler", kThreads);
    if (!r.bundle.passed()) print_failures(r.bundle);
    verdict(3, r.bundle.passed() && r.seconds < 120.0,
            "Euler scheme against the exact sampler and mean growth",
            secs(r.seconds) + ", limit 120 s");
  }

  {
    const auto r = timed_suite("theorem21", kThreads);
    int n4 = 0, n5 = 0;
    const bool ok4 = subset_passed(r.bundle, {"/marginal", "vs_euler_csbp", "no_death"}, n4);
    const bool ok5 =
        subset_passed(r.bundle, {"joint_poissonization", "joint_laplace_oracle", "dispersion"}, n5);
    if (!r.bundle.passed()) print_failures(r.bundle);
    verdict(4, ok4, "lambda-skeleton marginal equals the CSBP law at lambda* and 2 lambda*",
            std::to_string(n4) + " reports, " + secs(r.seconds));
    verdict(5, ok5, "joint Poissonization grid and conditional dispersion",
            std::to_string(n5) + " reports");
  }

  const auto t22 = timed_suite("theorem22", 2);
  {
    if (!t22.bundle.passed()) print_failures(t22.bundle);
    verdict(6, t22.bundle.passed(),
            "T-skeleton marginal, die-by-T branch and first-branch survival",
            secs(t22.seconds));
  }

  {
    const auto r = timed_suite("theorem23", kThreads);
    if (!r.bundle.passed()) print_failures(r.bundle);
    verdict(7, r.bundle.passed(), "skeleton thins to the spine as T grows", secs(r.seconds));
  }

  {
    const auto r = timed_suite("extinction", kThreads);
    if (!r.bundle.passed()) print_failures(r.bundle);
    verdict(8, r.bundle.passed(), "extinction frequencies at x = 1, 3", secs(r.seconds));
  }

  {
    // Rerun with different worker counts; the serialized report must not change.
    const std::string a = exact.bundle.to_json().dump(2);
    const std::string b = timed_suite("exact", 4).bundle.to_json().dump(2);
    const std::string c = t22.bundle.to_json().dump(2);
    const std::string d = timed_suite("theorem22", 1).bundle.to_json().dump(2);
    const bool ok = a == b && c == d;
    verdict(9, ok, "report.json is byte-identical across thread counts",
            "exact: " + std::string(a == b ? "same" : "differs") +
                ", theorem22: " + std::string(c == d ? "same" : "differs"));
  }

  return failures;
}
