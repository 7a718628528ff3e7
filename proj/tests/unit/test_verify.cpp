#include <doctest.h>

#include <set>

#include "lphom/error.hpp"
#include "lphom/verify.hpp"

using namespace lph;

namespace {

std::set<std::string> ids_with(const std::vector<CheckReport>& v, CheckStatus s) {
  std::set<std::string> out;
  for (const auto& r : v)
    if (r.status == s) out.insert(r.id);
  return out;
}

}  // namespace

TEST_CASE("grading relations") {
  CheckReport r;
  r.measured = 1.0;
  r.tolerance = 1.0;
  for (const auto& [rel, pass] : std::vector<std::pair<std::string, bool>>{{"<=", true}, {"<", false}, {">=", true}, {">", false}}) {
    r.relation = rel;
    grade(r);
    CHECK((r.status == CheckStatus::Pass) == pass);
  }
  r.relation = "<=";
  r.measured = std::nan("");
  grade(r);
  CHECK(r.status == CheckStatus::Fail);
  r.relation = "~";
  CHECK_THROWS_AS(grade(r), InputError);
}

TEST_CASE("invariant suite passes on a clean build") {
  const auto v = run_invariant_suite();
  CHECK(v.size() == 10);
  for (const auto& r : v) CHECK_MESSAGE(r.status == CheckStatus::Pass, r.id << ": " << r.measured << " " << r.detail);
  CHECK(std::is_sorted(v.begin(), v.end(), [](const CheckReport& a, const CheckReport& b) { return a.id < b.id; }));
}

TEST_CASE("broken major symmetry fails exactly the symmetry checks") {
  InvariantOptions o;
  o.major_perturbation = 0.1;
  const auto v = run_invariant_suite(o);
  CHECK(ids_with(v, CheckStatus::Fail) == std::set<std::string>{"law.chom_symmetry", "tensor.symmetry_preservation"});
}

TEST_CASE("a 1e-15 tolerance fails the discrete checks and keeps the exact ones") {
  InvariantOptions o;
  o.tolerance = 1e-15;
  const auto v = run_invariant_suite(o);
  int discrete = 0;
  for (const auto& r : v) {
    if (r.kind == CheckKind::Discrete) {
      ++discrete;
      CHECK_MESSAGE(r.status == CheckStatus::Fail, r.id);
    } else {
      CHECK_MESSAGE(r.status == CheckStatus::Pass, r.id << ": " << r.measured);
    }
  }
  CHECK(discrete == 3);
}

TEST_CASE("laminate oracle") {
  const auto v = run_laminate_oracle({});
  REQUIRE(v.size() == 3);
  CHECK(all_passed(v));
  LaminateOracleConfig bad;
  bad.fraction = 1.0;
  CHECK_THROWS_AS(run_laminate_oracle(bad), InputError);
  LaminateOracleConfig strict;
  strict.tolerance = 0;
  strict.resolutions = {8};
  const auto s = run_laminate_oracle(strict);
  CHECK(ids_with(s, CheckStatus::Fail).count("laminate.c1111") == 1);
}

TEST_CASE("report exports") {
  auto v = run_invariant_suite();
  const std::string csv = reports_csv(v);
  CHECK(csv.rfind("id,criterion,kind,status,measured,tolerance,relation,reference,detail\n", 0) == 0);
  for (auto& r : v) r.runtime += 17.0;
  CHECK(reports_csv(v) == csv);
  CHECK(reports_csv(run_invariant_suite()) == csv);

  v[0].status = CheckStatus::Fail;
  v[1].status = CheckStatus::Inconclusive;
  const std::string xml = reports_junit(v, "invariants");
  CHECK(xml.find("failures=\"1\"") != std::string::npos);
  CHECK(xml.find("skipped=\"1\"") != std::string::npos);
  CHECK(xml.find("<testcase classname=\"invariants\" name=\"" + v[2].id + "\"") != std::string::npos);

  const std::string trace = traceability_csv(v);
  CHECK(trace.rfind("criterion,checks,status\n", 0) == 0);
  CHECK(trace.find("3,law.chom_symmetry;tensor.coercivity_inheritance;tensor.symmetry_preservation,pass") !=
        std::string::npos);
}
