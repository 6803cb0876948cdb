#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "aisroutes/errors.hpp"
#include "aisroutes/ingest.hpp"
#include "aisroutes/synthgen.hpp"

using namespace aisroutes;

namespace {

const char* kHeader = "mmsi,timestamp,lat,lon,sog,cog,heading,ship_type,destination,nav_status\n";

ParseResult parse(const std::string& csv, const ColumnMap& cols = {}) {
  std::istringstream in(csv);
  return parse_records(in, cols);
}

AisRecord fix(Mmsi mmsi, Timestamp ts, double lat, double lon) {
  AisRecord r;
  r.mmsi = mmsi;
  r.ts = ts;
  r.pos = LatLon::make(lat, lon);
  return r;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("latitude out of range is rejected as bad_coords") {
  const auto res = parse(std::string(kHeader) + "257000001,1700000000,91.0,10.0,5,90,90,70,OSLO,0\n");
  CHECK(res.records.empty());
  CHECK(res.report.rejected_by_reason.at(RejectReason::BadCoords) == 1);
  CHECK(res.report.records_in == 1);
  CHECK(res.report.records_out == 0);
}

TEST_CASE("byte-identical row is rejected as duplicate") {
  const std::string row = "257000001,1700000000,60.0,10.0,5,90,90,70,OSLO,0\n";
  const auto res = parse(std::string(kHeader) + row + row);
  CHECK(res.records.size() == 1);
  CHECK(res.report.rejected_by_reason.at(RejectReason::Duplicate) == 1);
}

TEST_CASE("planted defect fixture: 900 kept, 100 rejected by planted reason") {
  const auto spec = synth::defect_fixture_preset(42);
  const auto sc = synth::generate(spec);
  REQUIRE(sc.truth.rows == 1000);
  auto res = parse(sc.csv);
  QualityReport rep = res.report;
  const auto tracks = build_tracks(std::move(res.records), rep);
  CHECK(rep.records_in == 1000);
  CHECK(rep.records_out == 900);
  CHECK(rep.total_rejected() == 100);
  CHECK(rep.rejected_by_reason.at(RejectReason::BadCoords) == 20);
  CHECK(rep.rejected_by_reason.at(RejectReason::BadMmsi) == 20);
  CHECK(rep.rejected_by_reason.at(RejectReason::Duplicate) == 20);
  CHECK(rep.rejected_by_reason.at(RejectReason::Malformed) == 10);
  CHECK(rep.rejected_by_reason.at(RejectReason::TimeRegression) == 15);
  CHECK(rep.rejected_by_reason.at(RejectReason::SpeedJump) == 15);
  std::size_t kept = 0;
  for (const auto& t : tracks) kept += t.records.size();
  CHECK(kept == 900);
}

TEST_CASE("missing mandatory column or header is a configuration error") {
  CHECK_THROWS_AS(parse("mmsi,timestamp,lat\n257000001,1,2,3\n"), ConfigError);
  CHECK_THROWS_AS(parse(""), ConfigError);
}

TEST_CASE("column mapping renames input headers") {
  const auto res = parse("MMSI,BaseDateTime,LAT,LON,SOG\n257000001,2024-01-31T12:00:00Z,60.5,10.25,7.5\n",
                         {{"timestamp", "BaseDateTime"}});
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].ts == 1706702400);
  CHECK(res.records[0].pos.lat == 60.5);
  CHECK(res.records[0].sog == 7.5);
  CHECK(res.records[0].flag == "NO");
}

TEST_CASE("AIS not-available sentinels read as absent") {
  const auto res = parse(std::string(kHeader) + "257000001,1700000000,60.0,10.0,102.3,360,511,,,\n");
  REQUIRE(res.records.size() == 1);
  CHECK_FALSE(res.records[0].sog.has_value());
  CHECK_FALSE(res.records[0].cog.has_value());
  CHECK_FALSE(res.records[0].heading.has_value());
  CHECK(res.records[0].vessel_type == VesselType::Unknown);
}

TEST_CASE("out-of-range speed and bad mmsi are rejected") {
  const auto res = parse(std::string(kHeader) + "257000001,1700000000,60.0,10.0,150,90,90,70,,\n" +
                         "12345,1700000000,60.0,10.0,5,90,90,70,,\n" + "257000001,yesterday,60.0,10.0,5,90,90,70,,\n");
  CHECK(res.records.empty());
  CHECK(res.report.rejected_by_reason.at(RejectReason::Malformed) == 2);
  CHECK(res.report.rejected_by_reason.at(RejectReason::BadMmsi) == 1);
}

TEST_CASE("timestamp formats") {
  CHECK(parse_timestamp("1700000000") == 1700000000);
  CHECK(parse_timestamp("2024-01-31T12:00:00Z") == 1706702400);
  CHECK(parse_timestamp("2024-01-31 12:00:00") == 1706702400);
  CHECK(parse_timestamp("2024-01-31T12:00:00.750Z") == 1706702400);
  CHECK(parse_timestamp("2024-01-31T14:00:00+02:00") == 1706702400);
  CHECK_FALSE(parse_timestamp("2024-02-30T00:00:00Z").has_value());
  CHECK_FALSE(parse_timestamp("noon").has_value());
  CHECK(format_timestamp(1706702400) == "2024-01-31T12:00:00Z");
  for (Timestamp t : {0LL, 86399LL, 951782400LL, 4102444800LL}) CHECK(parse_timestamp(format_timestamp(t)) == t);
}

TEST_CASE("vessel classification") {
  CHECK(classify_vessel(70) == VesselType::Cargo);
  CHECK(classify_vessel(30) == VesselType::Fishing);
  CHECK(classify_vessel(std::nullopt) == VesselType::Unknown);
  CHECK(classify_vessel(79) == VesselType::Cargo);
  CHECK(classify_vessel(84) == VesselType::Tanker);
  CHECK(classify_vessel(60) == VesselType::Passenger);
  CHECK(classify_vessel(52) == VesselType::Tug);
  CHECK(classify_vessel(36) == VesselType::Pleasure);
  CHECK(classify_vessel(37) == VesselType::Pleasure);
  CHECK(classify_vessel(0) == VesselType::Other);
  CHECK(classify_vessel(99) == VesselType::Other);
}

TEST_CASE("flag from maritime identification digits") {
  CHECK(flag_from_mmsi(257123456) == "NO");
  CHECK(flag_from_mmsi(219123456) == "DK");
  CHECK(flag_from_mmsi(111123456).empty());
}

TEST_CASE("interleaved vessels become separate time-sorted tracks") {
  std::vector<AisRecord> recs{fix(257000002, 300, 60, 10), fix(257000001, 200, 60, 10),
                              fix(257000002, 100, 60, 10.001), fix(257000001, 50, 60, 10.001)};
  QualityReport rep;
  const auto tracks = build_tracks(recs, rep);
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[0].mmsi == 257000001);
  CHECK(tracks[1].mmsi == 257000002);
  for (const auto& t : tracks) CHECK(t.records.front().ts < t.records.back().ts);
}

TEST_CASE("teleport is dropped as a speed jump") {
  // Implied speed from the independent distance formula: about 50,816 kn.
  const double kn = oracle::cosine_distance(0, 0, 10, 10) / 60.0 * 3600.0 / 1852.0;
  CHECK(kn == doctest::Approx(50816.0).epsilon(1e-4));
  std::vector<AisRecord> recs{fix(257000001, 1000, 0, 0), fix(257000001, 1060, 10, 10)};
  QualityReport rep;
  rep.records_in = rep.records_out = 2;
  const auto tracks = build_tracks(recs, rep);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].records.size() == 1);
  CHECK(rep.rejected_by_reason.at(RejectReason::SpeedJump) == 1);
  CHECK(rep.records_out == 1);
}

TEST_CASE("empty input gives no tracks") {
  QualityReport rep;
  CHECK(build_tracks({}, rep).empty());
}

TEST_CASE("repeated timestamps collapse to the first occurrence") {
  auto a = fix(257000001, 100, 60, 10);
  auto b = fix(257000001, 100, 60, 10.0001);
  QualityReport rep;
  const auto tracks = build_tracks({a, b}, rep);
  REQUIRE(tracks[0].records.size() == 1);
  CHECK(tracks[0].records[0].pos == a.pos);
  CHECK(rep.rejected_by_reason.at(RejectReason::TimeRegression) == 1);
}

TEST_CASE("conservation holds on randomly corrupted input") {
  std::mt19937_64 gen(17);
  for (int round = 0; round < 20; ++round) {
    std::string csv = kHeader;
    std::vector<std::string> rows;
    for (int i = 0; i < 200; ++i) {
      const auto mmsi = 257000000 + static_cast<int>(gen() % 5);
      const long ts = 1700000000 + static_cast<long>(gen() % 5000);
      const double lat = 60.0 + static_cast<double>(gen() % 1000) / 1e4;
      std::string row = std::to_string(mmsi) + "," + std::to_string(ts) + "," + std::to_string(lat) + ",10.0,5,90,90,70,,";
      switch (gen() % 8) {
        case 0: row = "x" + row; break;
        case 1: row = "257000001,1700000000,95,10,5,90,90,70,,"; break;
        case 2: row += ",extra"; break;
        case 3: if (!rows.empty()) row = rows.back(); break;
        default: break;
      }
      rows.push_back(row);
    }
    for (const auto& r : rows) csv += r + "\n";
    auto res = parse(csv);
    QualityReport rep = res.report;
    const auto tracks = build_tracks(std::move(res.records), rep);
    std::size_t kept = 0;
    for (const auto& t : tracks) {
      kept += t.records.size();
      for (std::size_t i = 1; i < t.records.size(); ++i) CHECK(t.records[i - 1].ts < t.records[i].ts);
    }
    CHECK(rep.records_in == 200);
    CHECK(rep.records_out + rep.total_rejected() == rep.records_in);
    CHECK(rep.records_out == kept);
  }
}

TEST_CASE("re-parsing serialized output yields identical records") {
  const auto sc = synth::generate(synth::fork_preset(3));
  auto first = parse(sc.csv);
  QualityReport rep = first.report;
  const auto tracks = build_tracks(first.records, rep);
  for (const auto& t : tracks) {
    std::ostringstream out;
    write_records_csv(out, t.records);
    const auto again = parse(out.str());
    CHECK(again.report.total_rejected() == 0);
    CHECK(again.records == t.records);
  }
}

TEST_CASE("track order does not depend on input order") {
  const auto sc = synth::generate(synth::fork_preset(5));
  auto base = parse(sc.csv).records;
  QualityReport r0;
  const auto want = build_tracks(base, r0);
  std::mt19937_64 gen(23);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(base.begin(), base.end(), gen);
    QualityReport r1;
    const auto got = build_tracks(base, r1, {}, 3);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k].records == want[k].records);
  }
}

}
