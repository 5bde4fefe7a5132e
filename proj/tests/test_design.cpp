#include <doctest.h>

#include <cmath>

#include "crashre/data_model.hpp"
#include "crashre/design.hpp"
#include "crashre/errors.hpp"

using namespace crashre;

namespace {

const std::string kFixtures = CRASHRE_FIXTURE_DIR;

Dataset toy() { return derive_partner_volumes(load_dataset(kFixtures + "/toy12.csv").dataset); }

}  // namespace

TEST_CASE("exposure rules by crash type") {
  const auto ds = toy();
  const auto& n = ds.record(0);  // A1 N: total 13042, through 9870, left 1902
  // Opposite S: left 1985; near-side E: through 6120.
  CHECK(conflicting_volume(n, exposure_rule(CrashType::kRearEnd)) == 13042.0);
  CHECK(conflicting_volume(n, exposure_rule(CrashType::kSideswipe)) == 13042.0);
  CHECK(conflicting_volume(n, exposure_rule(CrashType::kOpposingLeftTurn)) == 9870.0 * 1985.0);
  CHECK(conflicting_volume(n, exposure_rule(CrashType::kCrossingLeftTurn)) == 1902.0 * 6120.0);
  CHECK(conflicting_volume(n, exposure_rule(CrashType::kRightAngle)) == 9870.0 * 6120.0);
}

TEST_CASE("missing or zero volume names the field") {
  ApproachRecord rec;
  rec.intersection_id = "Z";
  rec.aadt_through = 500;
  rec.opposing_aadt_left = 0;
  try {
    conflicting_volume(rec, exposure_rule(CrashType::kOpposingLeftTurn));
    FAIL("expected ExposureError");
  } catch (const ExposureError& e) {
    CHECK(e.field() == "opposing_aadt_left");
  }
  rec.opposing_aadt_left.reset();
  CHECK_THROWS_AS(conflicting_volume(rec, exposure_rule(CrashType::kOpposingLeftTurn)),
                  ExposureError);
}

TEST_CASE("large volume products stay exact") {
  ApproachRecord rec;
  rec.aadt_through = 50464;
  rec.near_cross_aadt_through = 50463;
  const double v = conflicting_volume(rec, exposure_rule(CrashType::kRightAngle));
  CHECK(v == 2546564832.0);
}

TEST_CASE("left-turn control expands to two indicators") {
  const std::vector<std::string> cov{"left_turn_control", "speed_limit"};
  const auto cols = expand_covariates(cov);
  REQUIRE(cols.size() == 3);
  CHECK(cols[0] == "lt_protected");
  CHECK(cols[1] == "lt_protected_permissive");
  ApproachRecord rec;
  rec.left_turn_control = 2;
  CHECK(*covariate_value(rec, "lt_protected") == 1.0);
  CHECK(*covariate_value(rec, "lt_protected_permissive") == 0.0);
  rec.left_turn_control = 0;
  CHECK(*covariate_value(rec, "lt_protected") + *covariate_value(rec, "lt_protected_permissive") ==
        0.0);
}

TEST_CASE("bad covariate lists are spec errors") {
  const std::vector<std::string> unknown{"bogus"};
  CHECK_THROWS_AS(expand_covariates(unknown), SpecError);
  const std::vector<std::string> dup{"left_turn_control", "lt_protected"};
  CHECK_THROWS_AS(expand_covariates(dup), SpecError);
}

TEST_CASE("rear-end design on the toy fixture") {
  const auto ds = toy();
  const auto dm = build_design(ds, {CrashType::kRearEnd, default_covariates(CrashType::kRearEnd)});
  CHECK(dm.rows() == 12);
  CHECK(dm.group_count() == 3);
  CHECK(dm.columns()[0] == "intercept");
  CHECK(dm.columns()[1] == "log_exposure");
  REQUIRE(dm.cols() == 8);
  const auto row = dm.row(0);
  CHECK(row.x[0] == 1.0);
  CHECK(row.x[1] == doctest::Approx(std::log(13042.0)).epsilon(1e-15));
  CHECK(row.response == 12);
  CHECK(*dm.log_exposure(0) == row.x[1]);
  for (std::size_t i = 0; i < dm.rows(); ++i) {
    const auto r = dm.row(i);
    const auto p = *dm.column_index("lt_protected");
    CHECK(r.x[p] + r.x[p + 1] <= 1.0);
  }
}

TEST_CASE("five crash types give five distinct exposure columns") {
  const auto ds = toy();
  std::vector<double> first;
  for (auto t : kAllCrashTypes) {
    const auto dm = build_design(ds, {t, {}});
    first.push_back(*dm.log_exposure(0));
  }
  // Rear-end and sideswipe share aadt_total; the three products differ.
  CHECK(first[0] == first[4]);
  CHECK(first[1] != first[2]);
  CHECK(first[1] != first[3]);
  CHECK(first[2] != first[3]);
}

TEST_CASE("records with missing covariates are excluded and counted") {
  const std::string csv =
      "intersection_id,approach_id,aadt_total,speed_limit,crashes_rear_end,"
      "crashes_opposing_left_turn,crashes_crossing_left_turn,crashes_right_angle,"
      "crashes_sideswipe\n"
      "I1,N,1000,40,1,0,0,0,0\nI1,S,1100,,2,0,0,0,0\nI2,N,900,35,0,0,0,0,0\n";
  const auto ds = parse_dataset(csv).dataset;
  const auto dm = build_design(ds, {CrashType::kRearEnd, {"speed_limit"}});
  CHECK(dm.rows() == 2);
  CHECK(dm.excluded_records == 1);
  CHECK(dm.record_index[1] == 2);
  CHECK(dm.group_count() == 2);
  CHECK(dm.row(1).group == 1);
}

TEST_CASE("no usable rows is a spec error") {
  const std::string csv =
      "intersection_id,approach_id,crashes_rear_end,crashes_opposing_left_turn,"
      "crashes_crossing_left_turn,crashes_right_angle,crashes_sideswipe\nI1,N,1,0,0,0,0\n";
  CHECK_THROWS_AS(build_design(parse_dataset(csv).dataset, {CrashType::kRearEnd, {}}), SpecError);
}

TEST_CASE("centering subtracts column means and keeps log exposure recoverable") {
  const auto ds = toy();
  ModelSpec spec{CrashType::kRearEnd, {"speed_limit"}, true};
  const auto dm = build_design(ds, spec);
  for (std::size_t c = 1; c < dm.cols(); ++c) {
    double sum = 0;
    for (std::size_t i = 0; i < dm.rows(); ++i) sum += dm.row(i).x[c];
    CHECK(std::abs(sum) < 1e-9);
  }
  CHECK(*dm.log_exposure(0) == doctest::Approx(std::log(13042.0)));
}
