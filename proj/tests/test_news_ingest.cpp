#include <doctest.h>

#include <map>
#include <sstream>

#include "nsp/common.hpp"
#include "nsp/news_ingest.hpp"
#include "nsp/text_distance.hpp"
#include "oracles.hpp"

using namespace nsp;
using news::HeadlineRecord;
using news::StoryType;

namespace {

HeadlineRecord story(const std::string& id, const std::string& firm, const std::string& when,
                     const std::string& text) {
  HeadlineRecord r;
  r.story_id = id;
  r.firm_id = firm;
  r.firm_name = "Firm " + firm;
  r.published_at = parse_timestamp(when);
  r.headline = text;
  r.relevance = 100;
  r.category = "markets";
  r.event_similarity_days = 365.0;
  r.story_type = StoryType::FullArticle;
  return r;
}

}  // namespace

TEST_CASE("parse_headlines csv with and without vendor sentiment") {
  std::istringstream in(
      "story_id,firm_id,firm_name,published_at,headline,relevance,category,"
      "event_similarity_days,story_type,vendor_sentiment\n"
      "S1,F1,Acme,2023-01-02T10:00:00-05:00,\"Acme wins, big\",100,markets,365,full_article,0.5\n"
      "S2,F1,Acme,2023-01-02T11:00:00-05:00,Acme loses,90,markets,365,press_release,\n");
  auto rows = news::parse_headlines(in, FileFormat::Csv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].headline == "Acme wins, big");
  CHECK(rows[0].vendor_sentiment == doctest::Approx(0.5));
  CHECK(!rows[1].vendor_sentiment.has_value());
  CHECK(rows[1].relevance == 90);
  CHECK(rows[1].story_type == StoryType::PressRelease);
}

TEST_CASE("parse_headlines jsonl") {
  std::istringstream in(
      R"({"story_id":"S1","firm_id":"F1","firm_name":"Acme","published_at":"2023-01-02T10:00:00-05:00","headline":"Acme wins","relevance":100,"category":"markets","event_similarity_days":365,"story_type":"full_article","vendor_sentiment":-0.25})"
      "\n");
  auto rows = news::parse_headlines(in, FileFormat::Jsonl);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].vendor_sentiment == doctest::Approx(-0.25));
  CHECK(rows[0].published_at.offset_minutes == -300);
}

TEST_CASE("parse_headlines rejects bad rows with line numbers") {
  std::istringstream in(
      "story_id,firm_id,firm_name,published_at,headline,relevance,category,"
      "event_similarity_days,story_type\n"
      "S1,F1,Acme,2023-01-02T10:00:00-05:00,Acme wins,150,markets,365,full_article\n");
  CHECK_THROWS_WITH_AS(news::parse_headlines(in, FileFormat::Csv), doctest::Contains("line 2"),
                       ValidationError);
}

TEST_CASE("filter_headlines applies the four gates") {
  auto base = story("S1", "F1", "2023-01-02T10:00:00-05:00", "Acme wins");

  auto low_relevance = base;
  low_relevance.story_id = "S2";
  low_relevance.relevance = 99;

  auto wrong_type = base;
  wrong_type.story_id = "S3";
  wrong_type.story_type = StoryType::Other;

  auto gain_echo = base;
  gain_echo.story_id = "S4";
  gain_echo.category = "stock-gain";

  auto loss_echo = base;
  loss_echo.story_id = "S5";
  loss_echo.category = "stock-loss";

  auto stale = base;
  stale.story_id = "S6";
  stale.event_similarity_days = 90.0;  // boundary: strictly above 90 survives

  auto press = base;
  press.story_id = "S7";
  press.story_type = StoryType::PressRelease;

  auto kept = news::filter_headlines(
      {base, low_relevance, wrong_type, gain_echo, loss_echo, stale, press});
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].story_id == "S1");
  CHECK(kept[1].story_id == "S7");
}

TEST_CASE("normalize_headline folds case, collapses whitespace, and applies NFC") {
  CHECK(news::normalize_headline("  Acme   WINS Big  ") == "acme wins big");
  CHECK(news::normalize_headline("Tabs\tand\nnewlines") == "tabs and newlines");
  // e + combining acute composes to the same scalar as precomposed e-acute.
  std::string decomposed = "cafe\xcc\x81";
  std::string precomposed = "caf\xc3\xa9";
  CHECK(news::normalize_headline(decomposed) == news::normalize_headline(precomposed));
  // Full case folding, not just ASCII.
  CHECK(news::normalize_headline("STRA\xc3\x9f" "E") == news::normalize_headline("strasse"));
}

TEST_CASE("dedup drops near-duplicates within a firm-day only") {
  std::map<std::string, Date> day;
  auto a = story("S1", "F1", "2023-01-02T10:00:00-05:00", "Acme wins a huge contract today");
  auto b = story("S2", "F1", "2023-01-02T11:00:00-05:00", "Acme wins a huge contract today!");
  auto c = story("S3", "F1", "2023-01-02T12:00:00-05:00", "Completely different story entirely");
  auto d = story("S4", "F2", "2023-01-02T11:30:00-05:00", "Acme wins a huge contract today");
  auto e = story("S5", "F1", "2023-01-03T10:00:00-05:00", "Acme wins a huge contract today");
  day["S1"] = day["S2"] = day["S3"] = day["S4"] = parse_date("2023-01-02");
  day["S5"] = parse_date("2023-01-03");

  news::DedupStats stats;
  auto kept = news::dedup_firm_day({a, b, c, d, e}, 0.6, day, 0, &stats);
  REQUIRE(kept.size() == 4);
  CHECK(kept[0].story_id == "S1");  // earliest in its group wins
  CHECK(kept[1].story_id == "S3");
  CHECK(kept[2].story_id == "S4");  // other firm, kept
  CHECK(kept[3].story_id == "S5");  // other day, kept
  CHECK(stats.dropped == 1);
  CHECK(stats.kept == 4);

  // Idempotent: running again on the kept set drops nothing.
  news::DedupStats again;
  auto kept2 = news::dedup_firm_day(kept, 0.6, day, 0, &again);
  CHECK(kept2.size() == kept.size());
  CHECK(again.dropped == 0);
}

TEST_CASE("dedup threshold is strict") {
  // Craft a pair whose similarity is exactly 0.6: distance 2 on length 5.
  std::string base = "abcde";
  std::string var = "abcxy";
  double sim = text::similarity_utf8(base, var);
  REQUIRE(sim == doctest::Approx(0.6));

  std::map<std::string, Date> day;
  auto a = story("S1", "F1", "2023-01-02T10:00:00-05:00", base);
  auto b = story("S2", "F1", "2023-01-02T11:00:00-05:00", var);
  day["S1"] = day["S2"] = parse_date("2023-01-02");

  // similarity == threshold is not "exceeds": both kept.
  auto kept = news::dedup_firm_day({a, b}, 0.6, day);
  CHECK(kept.size() == 2);
  // A hair lower and the pair collapses.
  auto kept2 = news::dedup_firm_day({a, b}, 0.59, day);
  CHECK(kept2.size() == 1);
}

TEST_CASE("dedup compares normalized text") {
  std::map<std::string, Date> day;
  auto a = story("S1", "F1", "2023-01-02T10:00:00-05:00", "Acme Wins   Big");
  auto b = story("S2", "F1", "2023-01-02T11:00:00-05:00", "acme wins big");
  day["S1"] = day["S2"] = parse_date("2023-01-02");
  auto kept = news::dedup_firm_day({a, b}, 0.9, day);
  CHECK(kept.size() == 1);
  CHECK(kept[0].story_id == "S1");
}

TEST_CASE("dedup visits records in publication order regardless of input order") {
  std::map<std::string, Date> day;
  auto a = story("S1", "F1", "2023-01-02T10:00:00-05:00", "Acme wins a huge contract");
  auto b = story("S2", "F1", "2023-01-02T11:00:00-05:00", "Acme wins a huge contract!");
  day["S1"] = day["S2"] = parse_date("2023-01-02");
  // Feed later story first: the earlier one must still be the survivor.
  auto kept = news::dedup_firm_day({b, a}, 0.6, day);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].story_id == "S1");
}

TEST_CASE("dedup requires an effective day for every story") {
  std::map<std::string, Date> day;
  auto a = story("S1", "F1", "2023-01-02T10:00:00-05:00", "Acme wins");
  CHECK_THROWS_AS(news::dedup_firm_day({a}, 0.6, day), ValidationError);
}
