// Timing harness for the OpenMP kernels against their serial references:
// within-group demeaning, clustered-covariance meat accumulation, and the
// per-group dedup scan.
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "nsp/news_ingest.hpp"
#include "nsp/panel.hpp"
#include "nsp/time_util.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    auto t0 = Clock::now();
    fn();
    std::chrono::duration<double, std::milli> dt = Clock::now() - t0;
    best = std::min(best, dt.count());
  }
  return best;
}

void report(const char* kernel, double serial_ms, double parallel_ms) {
  fmt::print("{:<14} serial {:>9.2f} ms   parallel {:>9.2f} ms   speedup {:.2f}x\n", kernel,
             serial_ms, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel benchmarks: serial reference vs OpenMP"};
  int rows = 200000;
  int firms = 2000;
  int dates = 500;
  int groups = 400;
  int group_size = 24;
  int jobs = 0;
  int reps = 3;
  app.add_option("--rows", rows, "panel rows");
  app.add_option("--firms", firms, "firm groups");
  app.add_option("--dates", dates, "date groups");
  app.add_option("--groups", groups, "dedup firm-day groups");
  app.add_option("--group-size", group_size, "headlines per dedup group");
  app.add_option("--jobs", jobs, "threads for the parallel kernels (0 = all)");
  app.add_option("--reps", reps, "repetitions, best time reported");
  CLI11_PARSE(app, argc, argv);

  std::mt19937_64 rng(7);
  auto unif = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };

  std::vector<int> firm_labels(rows);
  std::vector<int> date_labels(rows);
  for (int r = 0; r < rows; ++r) {
    // Cover every group id, then scatter.
    firm_labels[r] = r < firms ? r : static_cast<int>(unif(0, firms));
    date_labels[r] = r < dates ? dates - 1 - r : static_cast<int>(unif(0, dates));
  }
  nsp::panel::GroupIndex firm_index = nsp::panel::make_group_index(firm_labels);
  nsp::panel::GroupIndex date_index = nsp::panel::make_group_index(date_labels);
  Eigen::MatrixXd cols(rows, 3);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < 3; ++c) cols(r, c) = unif(-1.0, 1.0);
  }

  {
    Eigen::MatrixXd serial_copy;
    Eigen::MatrixXd parallel_copy;
    double serial_ms = best_of(reps, [&] {
      serial_copy = cols;
      nsp::panel::demean_serial(serial_copy, {firm_index, date_index});
    });
    double parallel_ms = best_of(reps, [&] {
      parallel_copy = cols;
      nsp::panel::demean(parallel_copy, {firm_index, date_index}, 1e-10, 10000, jobs);
    });
    report("demean", serial_ms, parallel_ms);
  }

  {
    Eigen::MatrixXd X = cols;
    Eigen::VectorXd u(rows);
    for (int r = 0; r < rows; ++r) u(r) = unif(-0.05, 0.05);
    Eigen::MatrixXd meat_serial;
    Eigen::MatrixXd meat_parallel;
    double serial_ms =
        best_of(reps, [&] { meat_serial = nsp::panel::clustered_meat_serial(X, u, firm_index); });
    double parallel_ms =
        best_of(reps, [&] { meat_parallel = nsp::panel::clustered_meat(X, u, firm_index, jobs); });
    report("cluster meat", serial_ms, parallel_ms);
  }

  {
    std::vector<nsp::news::HeadlineRecord> records;
    std::map<std::string, nsp::Date> effective;
    nsp::Date day = nsp::Date{std::chrono::year{2023} / 1 / 2};
    int next_id = 0;
    for (int g = 0; g < groups; ++g) {
      for (int i = 0; i < group_size; ++i) {
        nsp::news::HeadlineRecord r;
        r.story_id = fmt::format("S{:06d}", next_id++);
        r.firm_id = fmt::format("F{:04d}", g);
        r.firm_name = "Bench Firm";
        r.published_at =
            nsp::Timestamp{std::chrono::sys_seconds{std::chrono::sys_days{nsp::to_days(day)} +
                                                    std::chrono::hours{10} +
                                                    std::chrono::minutes{i}},
                           0};
        r.headline = fmt::format("bench firm {} announces item {} in segment {}", g, i % 5,
                                 static_cast<int>(unif(0, 50)));
        r.relevance = 100;
        r.category = "earnings";
        r.event_similarity_days = 120;
        r.story_type = nsp::news::StoryType::FullArticle;
        effective[r.story_id] = day;
        records.push_back(std::move(r));
      }
    }
    std::vector<nsp::news::HeadlineRecord> kept;
    double serial_ms = best_of(
        reps, [&] { kept = nsp::news::dedup_firm_day_serial(records, 0.6, effective); });
    double parallel_ms =
        best_of(reps, [&] { kept = nsp::news::dedup_firm_day(records, 0.6, effective, jobs); });
    report("dedup scan", serial_ms, parallel_ms);
  }
  return 0;
}
