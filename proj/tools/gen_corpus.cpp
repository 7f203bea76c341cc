// Deterministic synthetic corpus generator for the bundled fixtures: a
// trading calendar, a returns panel, a headline feed with planted filter
// rejects and near-duplicates, and the scorer lexicon. Distributions are
// hand-rolled from mt19937_64 words so regenerated fixtures are identical on
// any standard library.
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "nsp/io_util.hpp"
#include "nsp/time_util.hpp"

namespace {

using nsp::Date;
using nlohmann::json;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive bounds
  return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1));
}

double normal(std::mt19937_64& rng) {
  double u1 = 1.0 - uniform01(rng);  // (0, 1]
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

struct Firm {
  std::string id;
  std::string name;
  const char* exchange;
  int share_code;
  double market_cap;  // 0 = missing
  int n_stories;
};

// Caps are constant across days. With twelve NYSE firms the breakpoint is the
// second-smallest NYSE cap (120), so firms below 120 form the small half.
const std::vector<Firm> kFirms = {
    {"F01", "Aldrin Systems", "NYSE", 10, 50.0, 16},
    {"F02", "Borel Industries", "NYSE", 11, 120.0, 9},
    {"F03", "Cavett Holdings", "NYSE", 10, 800.0, 9},
    {"F04", "Dunmore Energy", "NYSE", 11, 1500.0, 9},
    {"F05", "Ellery Foods", "NYSE", 10, 2600.0, 9},
    {"F06", "Fenwick Labs", "NYSE", 11, 4000.0, 9},
    {"F07", "Garnet Airlines", "NYSE", 10, 5200.0, 9},
    {"F08", "Halcyon Media", "NYSE", 11, 8000.0, 9},
    {"F09", "Ibex Logistics", "NYSE", 10, 9500.0, 9},
    {"F10", "Juniper Retail", "NYSE", 11, 14000.0, 9},
    {"F11", "Kestrel Semiconductors", "NYSE", 10, 21000.0, 9},
    {"F12", "Lumen Dynamics", "NYSE", 11, 30000.0, 9},
    {"F13", "Mistral Pharma", "NASDAQ", 10, 30.0, 16},
    {"F14", "Nordlicht Mining", "NASDAQ", 11, 60.0, 16},
    {"F15", "Opaline Telecom", "NASDAQ", 10, 90.0, 16},
    {"F16", "Pinewood Motors", "AMEX", 11, 100.0, 16},
    {"F17", "Quill Software", "NASDAQ", 10, 500.0, 7},
    {"F18", "Rowan Chemicals", "NASDAQ", 11, 5000.0, 7},
    {"F19", "Sablewood Bank", "AMEX", 10, 2000.0, 4},
    {"F20", "Tern Shipping", "NASDAQ", 11, 0.0, 3},
};

const std::vector<std::string> kPositiveTemplates = {
    "{} reports record quarterly profit",
    "{} wins major supply contract",
    "{} raises full year growth outlook",
    "{} announces expanded buyback and dividend",
    "{} shares upgraded after strong earnings",
};

const std::vector<std::string> kNegativeTemplates = {
    "{} faces lawsuit over contract dispute",
    "{} announces layoffs amid weak demand",
    "{} pulls flagship product after regulatory probe",
    "{} warns of losses as sales slump",
    "{} supplier files for bankruptcy protection",
};

const std::vector<std::string> kNeutralTemplates = {
    "{} schedules annual shareholder meeting",
    "{} appoints new regional manager",
    "{} to present at industry conference",
    "{} updates corporate branding guidelines",
    "{} relocates headquarters downtown",
};

const std::vector<std::string> kCategories = {"earnings", "litigation", "product", "management",
                                              "markets"};

// US eastern offset for early 2023; daylight time began March 12.
int offset_minutes_for(Date d) {
  return nsp::to_days(d) >= nsp::to_days(Date{std::chrono::year{2023} / 3 / 12}) ? -240 : -300;
}

nsp::Timestamp make_timestamp(Date d, int hour, int minute, int second) {
  int offset = offset_minutes_for(d);
  std::chrono::sys_seconds wall{std::chrono::sys_days{nsp::to_days(d)} +
                                std::chrono::hours{hour} + std::chrono::minutes{minute} +
                                std::chrono::seconds{second}};
  return nsp::Timestamp{wall - std::chrono::minutes{offset}, offset};
}

struct Story {
  std::string story_id;
  const Firm* firm;
  nsp::Timestamp published_at;
  std::string headline;
  int relevance;
  std::string category;
  int event_similarity_days;
  std::string story_type;
  double vendor_sentiment;
  int klass;       // -1, 0, +1 as the built-in lexicon will read it
  bool kept;       // survives the relevance/category/type/novelty filter
  bool duplicate;  // near-duplicate slated for removal by dedup
  int effective_day;  // trading-day index the story lands on
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generate the synthetic fixture corpus"};
  std::string out_dir = "data/fixtures";
  std::uint64_t seed = 42;
  int n_days = 60;
  app.add_option("--out", out_dir, "fixture output directory");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--days", n_days, "trading days in the calendar");
  CLI11_PARSE(app, argc, argv);

  std::filesystem::create_directories(out_dir);
  std::mt19937_64 rng(seed);

  // Calendar: weekdays from 2023-01-02.
  std::vector<Date> days;
  std::chrono::sys_days cursor{Date{std::chrono::year{2023} / 1 / 2}};
  while (static_cast<int>(days.size()) < n_days) {
    std::chrono::weekday wd{cursor};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) {
      days.push_back(Date{cursor});
    }
    cursor += std::chrono::days{1};
  }
  {
    std::string out = json{{"close_time", "16:00"}, {"timezone", "America/New_York"}}.dump() + "\n";
    for (Date d : days) out += json{{"date", nsp::format_date(d)}}.dump() + "\n";
    nsp::write_file(std::filesystem::path(out_dir) / "calendar.jsonl", out);
  }

  // Lexicon used by the mock scorer; the headline templates above only move
  // the verdict through these words.
  {
    json lex;
    lex["positive"] = {"beat",     "beats",    "breakthrough", "buyback", "dividend", "growth",
                       "profit",   "profits",  "raises",       "record",  "strong",   "surges",
                       "upgrade",  "upgraded", "wins"};
    lex["negative"] = {"bankruptcy", "downgrade", "downgraded", "fined",  "fraud",
                       "lawsuit",    "layoffs",   "loss",       "losses", "probe",
                       "recall",     "slump",     "warns",      "weak"};
    nsp::write_file(std::filesystem::path(out_dir) / "lexicon.json", lex.dump(2) + "\n");
  }

  // Headlines. Base stories pick a sentiment class and a publication slot;
  // some are planted filter rejects, and some kept intraday/evening stories
  // spawn a near-duplicate copy that dedup must remove.
  std::vector<Story> stories;
  int reject_cycle = 0;
  for (const Firm& firm : kFirms) {
    bool has_base = false;
    std::size_t last_base_index = 0;
    for (int i = 0; i < firm.n_stories; ++i) {
      double roll = uniform01(rng);
      bool make_copy = roll < 0.07 && has_base;
      Story s;
      s.firm = &firm;
      s.relevance = 100;
      s.category = kCategories[uniform_int(rng, 0, 4)];
      s.event_similarity_days = uniform_int(rng, 91, 365);
      s.story_type = uniform01(rng) < 0.5 ? "full_article" : "press_release";
      s.vendor_sentiment = std::round(uniform(rng, -1.0, 1.0) * 1e4) / 1e4;
      s.kept = true;
      s.duplicate = false;

      if (make_copy) {
        const Story& base = stories[last_base_index];
        s.klass = base.klass;
        s.headline = base.headline + " today";
        s.category = base.category;
        s.effective_day = base.effective_day;
        s.published_at = nsp::Timestamp{base.published_at.instant + std::chrono::minutes{17},
                                        base.published_at.offset_minutes};
        s.duplicate = true;
      } else {
        double klass_roll = uniform01(rng);
        const std::vector<std::string>* templates = &kNeutralTemplates;
        s.klass = 0;
        if (klass_roll < 0.40) {
          templates = &kPositiveTemplates;
          s.klass = 1;
        } else if (klass_roll < 0.70) {
          templates = &kNegativeTemplates;
          s.klass = -1;
        }
        s.headline = fmt::format(fmt::runtime((*templates)[uniform_int(rng, 0, 4)]), firm.name);

        double slot = uniform01(rng);
        if (slot < 0.60) {  // intraday, effective the same session
          int base_day = uniform_int(rng, 0, n_days - 3);
          s.published_at = make_timestamp(days[base_day], uniform_int(rng, 9, 15),
                                          uniform_int(rng, 30, 59), uniform_int(rng, 0, 59));
          s.effective_day = base_day;
        } else if (slot < 0.70) {  // exactly at the close, still same session
          int base_day = uniform_int(rng, 0, n_days - 3);
          s.published_at = make_timestamp(days[base_day], 16, 0, 0);
          s.effective_day = base_day;
        } else if (slot < 0.90) {  // evening, rolls to the next session
          int base_day = uniform_int(rng, 0, n_days - 3);
          s.published_at = make_timestamp(days[base_day], uniform_int(rng, 17, 22),
                                          uniform_int(rng, 0, 59), uniform_int(rng, 0, 59));
          s.effective_day = base_day + 1;
        } else {  // weekend, rolls to Monday
          int base_day = uniform_int(rng, 0, n_days - 9);
          std::chrono::sys_days base{nsp::to_days(days[base_day])};
          std::chrono::sys_days saturday = base;
          while (std::chrono::weekday{saturday} != std::chrono::Saturday) {
            saturday += std::chrono::days{1};
          }
          Date sat{saturday};
          s.published_at = make_timestamp(sat, uniform_int(rng, 10, 18),
                                          uniform_int(rng, 0, 59), 0);
          int eff = base_day;
          while (nsp::to_days(days[eff]) < saturday) ++eff;
          s.effective_day = eff;  // first trading day after the weekend
        }

        // A slice of base stories is planted to fail exactly one filter.
        if (uniform01(rng) < 0.14) {
          s.kept = false;
          switch (reject_cycle++ % 4) {
            case 0: s.relevance = uniform_int(rng, 55, 99); break;
            case 1: s.category = reject_cycle % 2 == 0 ? "stock-gain" : "stock-loss"; break;
            case 2: s.story_type = "other"; break;
            default: s.event_similarity_days = uniform_int(rng, 1, 90); break;
          }
        }
        // Copies must share the base's dedup group, so 16:00 stories (which
        // sit on the close boundary) never serve as a copy base.
        if (s.kept && slot >= 0.60 && slot < 0.70) {
          has_base = false;
        } else if (s.kept) {
          last_base_index = stories.size();
          has_base = true;
        }
      }
      stories.push_back(std::move(s));
    }
  }

  {
    std::vector<std::string> header = {"story_id",  "firm_id",
                                       "firm_name", "published_at",
                                       "headline",  "relevance",
                                       "category",  "event_similarity_days",
                                       "story_type", "vendor_sentiment"};
    // Stable ids in publication order so the feed reads naturally.
    std::vector<std::size_t> order(stories.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (stories[a].published_at.instant != stories[b].published_at.instant) {
        return stories[a].published_at.instant < stories[b].published_at.instant;
      }
      return a < b;
    });
    std::string out = nsp::csv_join(header) + "\n";
    int next_id = 1;
    for (std::size_t idx : order) {
      Story& s = stories[idx];
      s.story_id = fmt::format("S{:04d}", next_id++);
      out += nsp::csv_join({s.story_id, s.firm->id, s.firm->name,
                            nsp::format_timestamp(s.published_at), s.headline,
                            fmt::format("{}", s.relevance), s.category,
                            fmt::format("{}", s.event_similarity_days), s.story_type,
                            nsp::format_double(s.vendor_sentiment)}) +
             "\n";
    }
    nsp::write_file(std::filesystem::path(out_dir) / "headlines.csv", out);
  }

  // Expected firm-day signal from the stories the pipeline will keep: filter
  // rejects and dedup casualties contribute nothing.
  std::map<std::pair<std::string, int>, std::pair<int, int>> signal;  // sum, count
  for (const Story& s : stories) {
    if (!s.kept || s.duplicate) continue;
    auto&[sum, count] = signal[{s.firm->id, s.effective_day}];
    sum += s.klass;
    count += 1;
  }

  // Returns: beta * signal + noise, so the planted predictability is
  // recoverable. Junk rows exercise the universe filter.
  {
    std::vector<std::string> header = {"firm_id", "date", "ret", "market_cap", "share_code",
                                       "exchange"};
    std::string out = nsp::csv_join(header) + "\n";
    for (const Firm& firm : kFirms) {
      for (int d = 0; d < n_days; ++d) {
        double expected = 0.0;
        auto it = signal.find({firm.id, d});
        if (it != signal.end()) {
          expected = static_cast<double>(it->second.first) / it->second.second;
        }
        double ret = 0.002 * expected + 0.005 * normal(rng);
        out += nsp::csv_join({firm.id, nsp::format_date(days[d]), nsp::format_double(ret),
                              firm.market_cap > 0.0 ? nsp::format_double(firm.market_cap) : "",
                              fmt::format("{}", firm.share_code), firm.exchange}) +
               "\n";
      }
    }
    for (int d = 0; d < 5; ++d) {
      out += nsp::csv_join({"X90", nsp::format_date(days[d]),
                            nsp::format_double(0.001 * normal(rng)), "400", "14", "NYSE"}) + "\n";
      out += nsp::csv_join({"X91", nsp::format_date(days[d]),
                            nsp::format_double(0.001 * normal(rng)), "700", "10", "OTHER"}) + "\n";
      out += nsp::csv_join({"X92", nsp::format_date(days[d]),
                            nsp::format_double(0.001 * normal(rng)), "900", "12", "NASDAQ"}) + "\n";
    }
    nsp::write_file(std::filesystem::path(out_dir) / "returns.csv", out);
  }

  fmt::print("wrote {} stories, {} firms, {} trading days to {}\n", stories.size(),
             kFirms.size(), n_days, out_dir);
  return 0;
}
