#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "nsp/common.hpp"
#include "nsp/pipeline.hpp"

namespace {

int fail(const char* kind, const std::exception& e) {
  nlohmann::json err;
  err["error"] = kind;
  err["message"] = e.what();
  fmt::print(stderr, "{}\n", err.dump());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"newspanel: headline sentiment panel pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  int jobs = 0;
  std::uint64_t seed = 0;
  double similarity_threshold = 0.6;
  std::string dedup_day;
  app.add_option("--config", config_path, "run configuration JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  CLI::Option* output_opt =
      app.add_option("--output-dir", output_dir, "override the configured output directory");
  app.add_option("--jobs", jobs, "worker threads (0 = all hardware threads)")
      ->check(CLI::NonNegativeNumber);
  CLI::Option* seed_opt = app.add_option("--seed", seed, "override the configured seed");
  CLI::Option* threshold_opt =
      app.add_option("--similarity-threshold", similarity_threshold,
                     "override the dedup similarity threshold (default 0.6)")
          ->check(CLI::Range(0.0, 1.0));
  CLI::Option* dedup_day_opt =
      app.add_option("--dedup-day", dedup_day, "dedup grouping day")
          ->check(CLI::IsMember({"effective", "calendar"}));

  app.add_subcommand("ingest", "filter returns and headlines, deduplicate");
  app.add_subcommand("score", "score filtered headlines through the configured backend");
  app.add_subcommand("signal", "aggregate scores to firm-day signals and build the panel");
  app.add_subcommand("regress", "estimate the configured panel regressions");
  app.add_subcommand("backtest", "form long-short portfolios, overall and by size");
  app.add_subcommand("report", "render the text report and finalize the manifest");
  app.add_subcommand("run", "all stages in order");

  CLI11_PARSE(app, argc, argv);

  try {
    nsp::pipeline::CliOverrides overrides;
    if (output_opt->count() > 0) overrides.output_dir = output_dir;
    if (seed_opt->count() > 0) overrides.seed = seed;
    if (threshold_opt->count() > 0) overrides.similarity_threshold = similarity_threshold;
    if (dedup_day_opt->count() > 0) overrides.dedup_day = dedup_day;
    overrides.jobs = jobs;
    nsp::pipeline::RunConfig config = nsp::pipeline::load_run_config(config_path, overrides);

    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "ingest") {
      nsp::pipeline::cmd_ingest(config);
    } else if (command == "score") {
      nsp::pipeline::cmd_score(config);
    } else if (command == "signal") {
      nsp::pipeline::cmd_signal(config);
    } else if (command == "regress") {
      nsp::pipeline::cmd_regress(config);
    } else if (command == "backtest") {
      nsp::pipeline::cmd_backtest(config);
    } else if (command == "report") {
      nsp::pipeline::cmd_report(config);
    } else {
      nsp::pipeline::cmd_run(config);
    }
    return 0;
  } catch (const nsp::DependencyError& e) {
    return fail("dependency", e);
  } catch (const nsp::ResponseParseError& e) {
    return fail("response_parse", e);
  } catch (const nsp::BackendError& e) {
    return fail("backend", e);
  } catch (const nsp::EstimationError& e) {
    return fail("estimation", e);
  } catch (const nsp::ValidationError& e) {
    return fail("validation", e);
  } catch (const nsp::IoError& e) {
    return fail("io", e);
  } catch (const std::exception& e) {
    return fail("internal", e);
  }
}
