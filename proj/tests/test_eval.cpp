#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "rtkar/eval.hpp"

using namespace rtkar;

namespace {

OverlayEstimate at(double e, double n, double u = 0.0) { return {{e, n, u}, 1, 100}; }

}  // namespace

TEST(RecordSample, Coincident) {
  EXPECT_EQ(record_sample({2, 3, 0}, at(2, 3), "L1", SensorKind::RTK, true).error_m, 0.0);
}

TEST(RecordSample, ThreeFourFive) {
  const ErrorSample s = record_sample({0, 0, 0}, at(3, 4), "L1", SensorKind::GPS, true);
  EXPECT_EQ(s.error_m, 5.0);
  EXPECT_EQ(s.location_id, "L1");
  EXPECT_EQ(s.sensor_kind, SensorKind::GPS);
  EXPECT_EQ(s.timestamp_ms, 100);
}

TEST(RecordSample, HeightIgnored) {
  EXPECT_EQ(record_sample({0, 0, 7}, at(0, 0), "L1", SensorKind::RTK, true).error_m, 0.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> v(-100, 100);
  for (int i = 0; i < 200; ++i) {
    const LocalPoint h{v(rng), v(rng), 0.0};
    const OverlayEstimate o = at(v(rng), v(rng));
    const double flat = record_sample(h, o, "L", SensorKind::GPS, true).error_m;
    LocalPoint h_up = h;
    h_up.up_m = v(rng);
    OverlayEstimate o_up = o;
    o_up.target_hmd.up_m = v(rng);
    EXPECT_EQ(record_sample(h_up, o_up, "L", SensorKind::GPS, true).error_m, flat);
  }
}

TEST(RecordSample, RequiresPause) {
  EXPECT_THROW(record_sample({}, at(0, 0), "L1", SensorKind::RTK, false), SamplingStateError);
}

TEST(Summarize, FixtureGps) {
  const KindStats s = sample_statistics({std::begin(kFixtureGpsErrors), std::end(kFixtureGpsErrors)});
  const auto want = oracle::moments(kFixtureGpsErrors);
  EXPECT_EQ(s.count, 7u);
  EXPECT_NEAR(s.mean_m, 8.906, 0.001);
  EXPECT_NEAR(s.sample_std_m, 7.453, 0.001);
  EXPECT_NEAR(s.mean_m, want.mean, 1e-12);
  EXPECT_NEAR(s.sample_std_m, want.std, 1e-12);
}

TEST(Summarize, FixtureRtk) {
  const KindStats s = sample_statistics({std::begin(kFixtureRtkErrors), std::end(kFixtureRtkErrors)});
  EXPECT_NEAR(s.mean_m, 0.793, 0.001);
  EXPECT_NEAR(s.sample_std_m, 0.0594, 0.001);
  EXPECT_NEAR(s.sample_std_m, oracle::moments(kFixtureRtkErrors).std, 1e-12);
}

TEST(Summarize, TwoEqualSamples) {
  EXPECT_EQ(sample_statistics({0.5, 0.5}).sample_std_m, 0.0);
}

TEST(Summarize, NeedsTwoSamples) {
  EXPECT_THROW(sample_statistics({1.0}), InsufficientData);
  EXPECT_THROW(summarize({}), InsufficientData);
  EXPECT_THROW(summarize({{"L1", SensorKind::GPS, 1.0, 0}}), InsufficientData);
}

TEST(Summarize, PermutationInvariant) {
  std::vector<ErrorSample> samples = fixture_samples();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> v(0, 20);
  for (int i = 0; i < 50; ++i) {
    samples.push_back({"X" + std::to_string(i), SensorKind::GPS, v(rng), 100 + i});
  }
  const EvalReport base = summarize(samples);
  for (int trial = 0; trial < 50; ++trial) {
    std::shuffle(samples.begin(), samples.end(), rng);
    const EvalReport r = summarize(samples);
    for (auto kind : {SensorKind::GPS, SensorKind::RTK}) {
      EXPECT_EQ(r.at(kind).mean_m, base.at(kind).mean_m);
      EXPECT_EQ(r.at(kind).sample_std_m, base.at(kind).sample_std_m);
    }
    ASSERT_EQ(r.locations.size(), base.locations.size());
    for (std::size_t i = 0; i < r.locations.size(); ++i) {
      EXPECT_EQ(r.locations[i].location_id, base.locations[i].location_id);
    }
  }
}

TEST(Summarize, LocationPairing) {
  const EvalReport r = replay_fixture();
  ASSERT_EQ(r.locations.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(r.locations[i].location_id, "L" + std::to_string(i + 1));
    EXPECT_EQ(*r.locations[i].gps_error_m, kFixtureGpsErrors[i]);
    EXPECT_EQ(*r.locations[i].rtk_error_m, kFixtureRtkErrors[i]);
  }
}

TEST(ReplayFixture, CarriesReportedFigures) {
  const EvalReport r = replay_fixture();
  EXPECT_NEAR(r.at(SensorKind::GPS).mean_m, 8.906, 0.001);
  const auto has = [&](const std::string& k, const std::string& v) {
    return std::find(r.annotations.begin(), r.annotations.end(), std::pair{k, v}) !=
           r.annotations.end();
  };
  EXPECT_TRUE(has("reported_gps_mean_m", "8.907"));
  EXPECT_TRUE(has("reported_rtk_mean_m", "0.745"));
  EXPECT_TRUE(has("reported_rtk_std_m", "0.126"));
  const std::string text = render_report(r);
  EXPECT_NE(text.find("8.9061"), std::string::npos);
  EXPECT_NE(text.find("7.4533"), std::string::npos);
  EXPECT_NE(text.find("0.7929"), std::string::npos);
}

TEST(Csv, SamplesRoundTrip) {
  std::vector<ErrorSample> samples = fixture_samples();
  samples.push_back({"L8", SensorKind::RTK, 0.1 + 0.2, -5});
  std::stringstream io;
  write_samples_csv(io, samples);
  EXPECT_EQ(read_samples_csv(io), samples);
}

TEST(Csv, HeadersAndLocations) {
  std::ostringstream sum, loc;
  EvalReport r = summarize({{"A", SensorKind::GPS, 1.0, 0},
                            {"B", SensorKind::GPS, 3.0, 1},
                            {"B", SensorKind::RTK, 0.5, 1},
                            {"C", SensorKind::RTK, 0.25, 2}});
  write_summary_csv(sum, r);
  write_locations_csv(loc, r);
  EXPECT_EQ(sum.str(),
            "sensor_kind,count,mean_m,sample_std_m\n"
            "RTK,2,0.375,0.1767766952966369\n"
            "GPS,2,2,1.4142135623730951\n");
  EXPECT_EQ(loc.str(), "location_id,gps_error_m,rtk_error_m\nA,1,\nB,3,0.5\nC,,0.25\n");
}

TEST(Csv, RejectsBadInput) {
  std::istringstream wrong_header("a,b,c\n");
  EXPECT_THROW(read_samples_csv(wrong_header), ParseError);
  std::istringstream bad_kind("location_id,sensor_kind,error_m,timestamp_ms\nL1,LIDAR,1,0\n");
  EXPECT_THROW(read_samples_csv(bad_kind), ParseError);
  std::istringstream negative("location_id,sensor_kind,error_m,timestamp_ms\nL1,GPS,-1,0\n");
  EXPECT_THROW(read_samples_csv(negative), ParseError);
}

TEST(Compare, IdenticalAndDifferent) {
  const auto a = fixture_samples();
  EXPECT_TRUE(compare_samples(a, a).identical());
  auto b = a;
  b[3].error_m += 0.01;
  b.pop_back();
  const CompareResult r = compare_samples(a, b);
  EXPECT_EQ(r.differences.size(), 2u);
  EXPECT_NE(r.differences[0].find("L2/RTK"), std::string::npos);
}
