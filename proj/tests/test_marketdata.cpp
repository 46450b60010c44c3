#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "bayesviews/marketdata.hpp"
#include "testutil.hpp"

using namespace bayesviews;
using namespace bayesviews::marketdata;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("bvtest_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name, const std::string& body) const {
    const auto p = path / name;
    std::ofstream out(p);
    out << body;
    return p.string();
  }
};

struct Fixture {
  TempDir dir;
  std::string prices, volumes, mcaps, sentiment;

  explicit Fixture(const std::string& price_body =
                       "date,ticker,value\n"
                       "2020-01-01,AAA,100\n"
                       "2020-01-01,BBB,50\n"
                       "2020-01-02,AAA,101\n"
                       "2020-01-02,BBB,51\n"
                       "2020-01-03,AAA,102\n"
                       "2020-01-03,BBB,49\n") {
    prices = dir.file("prices.csv", price_body);
    volumes = dir.file("volumes.csv",
                       "date,ticker,value\n"
                       "2020-01-01,AAA,1000\n"
                       "2020-01-01,BBB,2000\n"
                       "2020-01-02,AAA,1100\n"
                       "2020-01-02,BBB,2100\n"
                       "2020-01-03,AAA,1200\n"
                       "2020-01-03,BBB,2200\n");
    mcaps = dir.file("mcap.csv",
                     "date,ticker,value\n"
                     "2020-01-01,AAA,1e9\n"
                     "2020-01-01,BBB,5e8\n"
                     "2020-01-02,AAA,1.01e9\n"
                     "2020-01-02,BBB,5.1e8\n"
                     "2020-01-03,AAA,1.02e9\n"
                     "2020-01-03,BBB,4.9e8\n");
    sentiment = dir.file("sentiment.csv",
                         "date,ticker,pos_count,neg_count,pos_intensity,neg_intensity\n"
                         "2020-01-01,AAA,164,58,1.90,-1.77\n"
                         "2020-01-02,AAA,3,1,0.5,-0.25\n");
  }

  MarketFrame load(std::vector<std::string> tickers = {"AAA", "BBB"}) const {
    return load_csv(prices, volumes, mcaps, sentiment, AssetUniverse(std::move(tickers)));
  }
};

}  // namespace

TEST_CASE("well-formed files load into an aligned frame") {
  Fixture fx;
  const auto frame = fx.load();
  CHECK(frame.n_days() == 3);
  CHECK(frame.n_assets() == 2);
  CHECK(frame.date(0).to_iso() == "2020-01-01");
  CHECK(frame.price(0, 0) == doctest::Approx(100.0));
  CHECK(frame.price(2, 1) == doctest::Approx(49.0));
  CHECK(frame.volume(1, 1) == doctest::Approx(2100.0));
  CHECK(frame.mcap(0, 0) == doctest::Approx(1e9));
  CHECK(frame.sentiment(0, 0).pos_count == 164);
  CHECK(frame.sentiment(0, 0).neg_intensity == doctest::Approx(-1.77));
  CHECK(frame.sentiment(0, 1).is_empty());  // no row for BBB
}

TEST_CASE("non-positive price is rejected with file and line") {
  Fixture fx(
      "date,ticker,value\n"
      "2020-01-01,AAA,100\n"
      "2020-01-02,AAA,-3\n");
  try {
    fx.load({"AAA"});
    FAIL("expected NonPositivePrice");
  } catch (const NonPositivePrice& e) {
    const std::string msg = e.what();
    CHECK(msg.find("prices.csv:3") != std::string::npos);
  }
}

TEST_CASE("schema violations carry the offending file") {
  Fixture fx;
  const auto bad = fx.dir.file("bad.csv", "date,value\n2020-01-01,3\n");
  CHECK_THROWS_AS(load_csv(bad, fx.volumes, fx.mcaps, fx.sentiment, AssetUniverse({"AAA"})),
                  MissingColumn);

  const auto dup = fx.dir.file("dup.csv",
                               "date,ticker,value\n"
                               "2020-01-01,AAA,100\n"
                               "2020-01-01,AAA,101\n");
  CHECK_THROWS_AS(load_csv(dup, fx.volumes, fx.mcaps, fx.sentiment, AssetUniverse({"AAA"})),
                  DuplicateDateTicker);
}

TEST_CASE("a row ticker outside the requested universe is an error") {
  Fixture fx;
  CHECK_THROWS_AS(fx.load({"AAA"}), UnknownTicker);  // BBB rows present
}

TEST_CASE("requested tickers without price data are dropped (intersection)") {
  Fixture fx;
  const auto frame = fx.load({"AAA", "BBB", "CCC"});
  CHECK(frame.n_assets() == 2);
  CHECK(frame.universe().index_of("CCC") == -1);
}

TEST_CASE("fill carries the last prior observation across the weekend") {
  // Fri=100, Sat/Sun missing, Mon=102
  Fixture fx(
      "date,ticker,value\n"
      "2020-01-03,AAA,100\n"
      "2020-01-06,AAA,102\n");
  auto frame = load_csv(fx.prices, fx.dir.file("v.csv", "date,ticker,value\n2020-01-03,AAA,7\n"),
                        fx.dir.file("m.csv", "date,ticker,value\n2020-01-03,AAA,1e9\n"),
                        fx.dir.file("s.csv",
                                    "date,ticker,pos_count,neg_count,pos_intensity,neg_intensity\n"
                                    "2020-01-03,AAA,5,1,1.0,-1.0\n"),
                        AssetUniverse({"AAA"}));
  const auto filled = fill_missing(frame);
  CHECK(filled.n_days() == 4);
  CHECK(filled.price(0, 0) == doctest::Approx(100.0));
  CHECK(filled.price(1, 0) == doctest::Approx(100.0));  // Sat
  CHECK(filled.price(2, 0) == doctest::Approx(100.0));  // Sun
  CHECK(filled.price(3, 0) == doctest::Approx(102.0));  // Mon
  CHECK(filled.volume(2, 0) == doctest::Approx(7.0));
  CHECK(filled.mcap(2, 0) == doctest::Approx(1e9));
  // sentiment gaps become all-zero records, not carried values
  CHECK(filled.sentiment(0, 0).pos_count == 5);
  CHECK(filled.sentiment(1, 0).is_empty());
  CHECK(filled.sentiment(2, 0).is_empty());
}

TEST_CASE("fill_missing is idempotent and dense frames pass through") {
  const auto frame = testutil::synthetic_frame(3, 40, 99);
  const auto once = fill_missing(frame);
  const auto twice = fill_missing(once);
  CHECK(once.n_days() == frame.n_days());
  REQUIRE(twice.n_days() == once.n_days());
  CHECK((once.price_matrix() - twice.price_matrix()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((once.volume_matrix() - twice.volume_matrix()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((once.mcap_matrix() - twice.mcap_matrix()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a ticker with no observation at the frame start is an error") {
  Fixture fx(
      "date,ticker,value\n"
      "2020-01-01,AAA,100\n"
      "2020-01-02,AAA,101\n"
      "2020-01-02,BBB,50\n");
  auto frame = load_csv(fx.prices, fx.dir.file("v.csv",
                                               "date,ticker,value\n"
                                               "2020-01-01,AAA,1\n2020-01-01,BBB,1\n"),
                        fx.dir.file("m.csv",
                                    "date,ticker,value\n"
                                    "2020-01-01,AAA,1\n2020-01-01,BBB,1\n"),
                        fx.dir.file("s.csv",
                                    "date,ticker,pos_count,neg_count,pos_intensity,neg_intensity\n"),
                        AssetUniverse({"AAA", "BBB"}));
  CHECK_THROWS_AS(fill_missing(frame), NoHistoricalValue);
}

TEST_CASE("split adjustment keeps the return series continuous") {
  // price 700 the day before a 7-for-1 split, 100 after
  Fixture fx(
      "date,ticker,value\n"
      "2020-01-01,AAA,695\n"
      "2020-01-02,AAA,700\n"
      "2020-01-03,AAA,100\n");
  auto frame = load_csv(fx.prices,
                        fx.dir.file("v.csv",
                                    "date,ticker,value\n"
                                    "2020-01-01,AAA,50\n2020-01-02,AAA,50\n2020-01-03,AAA,350\n"),
                        fx.dir.file("m.csv",
                                    "date,ticker,value\n"
                                    "2020-01-01,AAA,7e9\n2020-01-02,AAA,7e9\n2020-01-03,AAA,7e9\n"),
                        fx.dir.file("s.csv",
                                    "date,ticker,pos_count,neg_count,pos_intensity,neg_intensity\n"),
                        AssetUniverse({"AAA"}));
  const auto adjusted = adjust_splits(frame, {{"AAA", Date(2020, 1, 3), 7.0}});
  CHECK(adjusted.price(1, 0) == doctest::Approx(100.0));
  CHECK(adjusted.price(2, 0) == doctest::Approx(100.0));
  const double gross = adjusted.price(2, 0) / adjusted.price(1, 0);
  CHECK(gross == doctest::Approx(1.0));
  // volumes scale the other way, market cap is untouched
  CHECK(adjusted.volume(0, 0) == doctest::Approx(350.0));
  CHECK(adjusted.mcap(0, 0) == doctest::Approx(7e9));

  SUBCASE("the rest of the return series is unchanged") {
    const double before = frame.price(1, 0) / frame.price(0, 0);
    const double after = adjusted.price(1, 0) / adjusted.price(0, 0);
    CHECK(after == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("split edge cases") {
  const auto frame = testutil::synthetic_frame(2, 10, 7);
  SUBCASE("empty event list is the identity") {
    const auto out = adjust_splits(frame, {});
    CHECK((out.price_matrix() - frame.price_matrix()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("ratio 1 is the identity") {
    const auto out = adjust_splits(frame, {{"A0", frame.date(5), 1.0}});
    CHECK((out.price_matrix() - frame.price_matrix()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((out.volume_matrix() - frame.volume_matrix()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("2-for-1 doubles the pre-split volume") {
    const auto out = adjust_splits(frame, {{"A0", frame.date(5), 2.0}});
    CHECK(out.volume(4, 0) == doctest::Approx(2.0 * frame.volume(4, 0)));
    CHECK(out.volume(5, 0) == doctest::Approx(frame.volume(5, 0)));
  }
  SUBCASE("unknown ticker or out-of-range date is rejected") {
    CHECK_THROWS_AS(adjust_splits(frame, {{"ZZZ", frame.date(5), 2.0}}), EventOutOfRange);
    CHECK_THROWS_AS(adjust_splits(frame, {{"A0", frame.date(9) + 10, 2.0}}), EventOutOfRange);
  }
}

TEST_CASE("write/load round-trips numeric fields exactly") {
  const auto frame = testutil::synthetic_frame(3, 25, 1234);
  TempDir dir;
  const auto p = (dir.path / "p.csv").string();
  const auto v = (dir.path / "v.csv").string();
  const auto m = (dir.path / "m.csv").string();
  const auto s = (dir.path / "s.csv").string();
  write_csv(frame, p, v, m, s);
  const auto back = load_csv(p, v, m, s, frame.universe());
  REQUIRE(back.n_days() == frame.n_days());
  CHECK((back.price_matrix() - frame.price_matrix()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.volume_matrix() - frame.volume_matrix()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.mcap_matrix() - frame.mcap_matrix()).cwiseAbs().maxCoeff() == 0.0);
  for (int t = 0; t < frame.n_days(); ++t) {
    for (int i = 0; i < frame.n_assets(); ++i) {
      CHECK(back.sentiment(t, i) == frame.sentiment(t, i));
    }
  }
}

TEST_CASE("access audit records the deepest row touched") {
  auto frame = testutil::synthetic_frame(2, 10, 5);
  auto audit = std::make_shared<AccessAudit>();
  frame.attach_access_audit(audit);
  audit->limit = 4;
  (void)frame.price(3, 0);
  (void)frame.volume(4, 1);
  CHECK(audit->violations.load() == 0);
  (void)frame.price(5, 0);
  CHECK(audit->violations.load() == 1);
  CHECK(audit->max_row.load() == 5);
}
