#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "paic/errors.hpp"
#include "paic/scales.hpp"
#include "paic/stats.hpp"

using namespace paic;

namespace {
const std::filesystem::path kDataDir = PAIC_TEST_DATA_DIR;
AldTable worked_ald() { return parse_ald(kDataDir / "bc_ald_bin.csv"); }
}  // namespace

TEST_CASE("log-odds contrast on the worked binary table") {
  const AldTable ald = worked_ald();
  const EstimateWithVar bc =
      ald_contrast(ald, Scale{ScaleKind::log_odds}, "y", "B", "C", Family::binomial);
  // direct arithmetic oracle from the event counts
  const double expected = std::log(37.0 / 98.0) - std::log(40.0 / 25.0);
  const double expected_var = 1.0 / 37.0 + 1.0 / 98.0 + 1.0 / 40.0 + 1.0 / 25.0;
  CHECK(bc.estimate == doctest::Approx(expected).epsilon(1e-12));
  CHECK(bc.variance == doctest::Approx(expected_var).epsilon(1e-12));
  CHECK(bc.estimate == doctest::Approx(-1.4442).epsilon(0.001));
  CHECK(bc.variance == doctest::Approx(0.10223).epsilon(0.005));
}

TEST_CASE("risk difference contrast on the worked binary table") {
  const AldTable ald = worked_ald();
  const EstimateWithVar bc =
      ald_contrast(ald, Scale{ScaleKind::risk_difference}, "y", "B", "C", Family::binomial);
  const double pb = 37.0 / 135.0, pc = 40.0 / 65.0;
  CHECK(bc.estimate == doctest::Approx(pb - pc).epsilon(1e-12));
  CHECK(bc.variance ==
        doctest::Approx(pb * (1 - pb) / 135.0 + pc * (1 - pc) / 65.0).epsilon(1e-12));
  CHECK(bc.estimate == doctest::Approx(-0.34131).epsilon(1e-4));
  CHECK(bc.variance == doctest::Approx(0.0051151).epsilon(1e-4));
}

TEST_CASE("equal proportions give a zero contrast on every binary scale") {
  std::vector<AldRecord> records;
  records.push_back({"y", "sum", 30.0, std::string("B")});
  records.push_back({std::nullopt, "N", 100.0, std::string("B")});
  records.push_back({"y", "sum", 15.0, std::string("C")});
  records.push_back({std::nullopt, "N", 50.0, std::string("C")});
  const AldTable ald = AldTable::from_records(records);
  for (const ScaleKind kind : {ScaleKind::log_odds, ScaleKind::risk_difference,
                               ScaleKind::probit_difference, ScaleKind::log_rr_cloglog,
                               ScaleKind::log_rr_log}) {
    const EstimateWithVar c = ald_contrast(ald, Scale{kind}, "y", "B", "C", Family::binomial);
    CHECK(c.estimate == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(c.variance > 0.0);
  }
}

TEST_CASE("count and continuous scale variances follow the per-arm formulas") {
  std::vector<AldRecord> records;
  records.push_back({"y", "mean", 2.5, std::string("B")});
  records.push_back({"y", "sum", 250.0, std::string("B")});
  records.push_back({std::nullopt, "N", 100.0, std::string("B")});
  records.push_back({"y", "mean", 4.0, std::string("C")});
  records.push_back({"y", "sum", 200.0, std::string("C")});
  records.push_back({std::nullopt, "N", 50.0, std::string("C")});
  const AldTable count_ald = AldTable::from_records(records);

  const EstimateWithVar rr = ald_contrast(count_ald, Scale{ScaleKind::log_relative_risk}, "y",
                                          "B", "C", Family::poisson);
  CHECK(rr.estimate == doctest::Approx(std::log(2.5) - std::log(4.0)).epsilon(1e-12));
  CHECK(rr.variance ==
        doctest::Approx(1.0 / (100.0 * 2.5) + 1.0 / (50.0 * 4.0)).epsilon(1e-12));

  const EstimateWithVar rd = ald_contrast(count_ald, Scale{ScaleKind::rate_difference}, "y",
                                          "B", "C", Family::poisson);
  CHECK(rd.estimate == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(rd.variance == doctest::Approx(2.5 / 100.0 + 4.0 / 50.0).epsilon(1e-12));

  std::vector<AldRecord> cont;
  cont.push_back({"y", "mean", 0.3, std::string("B")});
  cont.push_back({"y", "sd", 1.2, std::string("B")});
  cont.push_back({std::nullopt, "N", 80.0, std::string("B")});
  cont.push_back({"y", "mean", 0.8, std::string("C")});
  cont.push_back({"y", "sd", 0.9, std::string("C")});
  cont.push_back({std::nullopt, "N", 40.0, std::string("C")});
  const AldTable cont_ald = AldTable::from_records(cont);

  const EstimateWithVar md = ald_contrast(cont_ald, Scale{ScaleKind::mean_difference}, "y",
                                          "B", "C", Family::gaussian);
  CHECK(md.estimate == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(md.variance ==
        doctest::Approx(1.2 * 1.2 / 80.0 + 0.9 * 0.9 / 40.0).epsilon(1e-12));

  // continuous log-odds uses the logit-transformed-mean variance pi^2/(3N)
  const EstimateWithVar lo = ald_contrast(cont_ald, Scale{ScaleKind::log_odds}, "y", "B", "C",
                                          Family::gaussian);
  const double pi2_3 = M_PI * M_PI / 3.0;
  CHECK(lo.variance == doctest::Approx(pi2_3 / 80.0 + pi2_3 / 40.0).epsilon(1e-12));
  CHECK(lo.estimate == doctest::Approx(std::log(0.3 / 0.7) - std::log(0.8 / 0.2)).epsilon(1e-12));
}

TEST_CASE("apply and invert link") {
  CHECK(apply_link(Scale{ScaleKind::log_odds}, 0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(apply_link(Scale{ScaleKind::log_odds}, 40.0 / 65.0) ==
        doctest::Approx(0.4700036292457356).epsilon(1e-12));
  CHECK(invert_link(Scale{ScaleKind::log_odds}, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(apply_link(Scale{ScaleKind::log_odds}, 1.2), numeric_error);
  CHECK_THROWS_AS(apply_link(Scale{ScaleKind::log_rr_log}, -0.1), numeric_error);

  for (const ScaleKind kind : {ScaleKind::log_odds, ScaleKind::probit_difference,
                               ScaleKind::log_rr_cloglog, ScaleKind::log_rr_log}) {
    const Scale s{kind};
    for (double mu = 0.02; mu < 0.99; mu += 0.07)
      CHECK(s.inverse(s.transform(mu)) == doctest::Approx(mu).epsilon(1e-10));
  }
}

TEST_CASE("validate_scale enforces the outcome-type table") {
  CHECK_THROWS_WITH_AS(validate_scale(Scale{ScaleKind::mean_difference}, Family::binomial),
                       doctest::Contains("not valid"), validation_error);
  CHECK_NOTHROW(validate_scale(Scale{ScaleKind::log_odds}, Family::binomial));
  CHECK_NOTHROW(validate_scale(Scale{ScaleKind::rate_difference}, Family::poisson));
  CHECK_THROWS_AS(validate_scale(Scale{ScaleKind::risk_difference}, Family::poisson),
                  validation_error);
  CHECK_NOTHROW(validate_scale(Scale{ScaleKind::log_odds}, Family::gaussian));
  CHECK_NOTHROW(validate_scale(Scale{ScaleKind::log_relative_risk}, Family::gaussian));
  CHECK_THROWS_AS(validate_scale(Scale{ScaleKind::log_rr_log}, Family::gaussian),
                  validation_error);
}

TEST_CASE("scale token parsing accepts both log-odds spellings") {
  CHECK(Scale::parse("log-odds").kind == ScaleKind::log_odds);
  CHECK(Scale::parse("log_odds").kind == ScaleKind::log_odds);
  CHECK(Scale::parse("log_odds").name() == "log_odds");
  CHECK_THROWS_AS(Scale::parse("odds"), validation_error);
}

TEST_CASE("absolute_from_contrast inverts the worked example") {
  const AldTable ald = worked_ald();
  const EstimateWithVar bc =
      ald_contrast(ald, Scale{ScaleKind::log_odds}, "y", "B", "C", Family::binomial);
  const AbsoluteEstimate back = absolute_from_contrast(40.0 / 65.0, bc);
  CHECK(back.value == doctest::Approx(37.0 / 135.0).epsilon(1e-12));
  CHECK_FALSE(back.clamped);

  // every transform scale recovers the comparator arm mean exactly
  for (const ScaleKind kind : {ScaleKind::log_odds, ScaleKind::probit_difference,
                               ScaleKind::log_rr_cloglog, ScaleKind::log_rr_log}) {
    const EstimateWithVar c = ald_contrast(ald, Scale{kind}, "y", "B", "C", Family::binomial);
    CHECK(absolute_from_contrast(40.0 / 65.0, c).value ==
          doctest::Approx(37.0 / 135.0).epsilon(1e-10));
  }

  EstimateWithVar null_lo{0.0, 0.1, ScaleKind::log_odds};
  CHECK(absolute_from_contrast(0.5, null_lo).value == doctest::Approx(0.5).epsilon(1e-14));

  EstimateWithVar rd{-0.2, 0.01, ScaleKind::risk_difference};
  const AbsoluteEstimate clamped = absolute_from_contrast(0.1, rd);
  CHECK(clamped.value == 0.0);
  CHECK(clamped.clamped);
}

TEST_CASE("swapping comparator and reference negates the contrast, variance unchanged") {
  const AldTable ald = worked_ald();
  for (const ScaleKind kind : {ScaleKind::log_odds, ScaleKind::risk_difference,
                               ScaleKind::probit_difference, ScaleKind::log_rr_cloglog,
                               ScaleKind::log_rr_log}) {
    const Scale s{kind};
    const EstimateWithVar fwd = ald_contrast(ald, s, "y", "B", "C", Family::binomial);
    const EstimateWithVar rev = ald_contrast(ald, s, "y", "C", "B", Family::binomial);
    CHECK(fwd.estimate == doctest::Approx(-rev.estimate).epsilon(1e-12));
    CHECK(fwd.variance == doctest::Approx(rev.variance).epsilon(1e-12));
    CHECK(fwd.variance > 0.0);
  }
}

TEST_CASE("zero cells on the log-odds scale are an explicit error") {
  std::vector<AldRecord> records;
  records.push_back({"y", "sum", 0.0, std::string("B")});
  records.push_back({std::nullopt, "N", 50.0, std::string("B")});
  records.push_back({"y", "sum", 10.0, std::string("C")});
  records.push_back({std::nullopt, "N", 50.0, std::string("C")});
  const AldTable ald = AldTable::from_records(records);
  CHECK_THROWS_WITH_AS(
      static_cast<void>(ald_contrast(ald, Scale{ScaleKind::log_odds}, "y", "B", "C",
                                     Family::binomial)),
      doctest::Contains("continuity"), numeric_error);
}

TEST_CASE("default scales per family") {
  CHECK(Scale::default_for(Family::binomial).kind == ScaleKind::log_odds);
  CHECK(Scale::default_for(Family::poisson).kind == ScaleKind::log_relative_risk);
  CHECK(Scale::default_for(Family::gaussian).kind == ScaleKind::mean_difference);
}
