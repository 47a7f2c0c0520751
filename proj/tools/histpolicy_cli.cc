/*
 * Copyright 2026 The histpolicy Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line entry point: generate, experiment, sweep-trees, ope, report.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "histpolicy/csv.h"
#include "histpolicy/errors.h"
#include "histpolicy/ope.h"
#include "histpolicy/runner.h"
#include "histpolicy/synthgen.h"

namespace fs = std::filesystem;
using namespace histpolicy;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

int cmd_generate(const fs::path& config, const fs::path& out_dir, std::optional<std::uint64_t> seed,
                 const std::string& format) {
  GeneratorConfig cfg = generator_config_from_json(read_json(config));
  if (seed) cfg.seed = *seed;
  const SyntheticCohort cohort = generate_cohort(cfg);
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / (format == "csv" ? "episodes.csv" : "episodes.jsonl"));
    if (format == "csv") {
      write_episodes_csv(out, cohort.episodes, cohort.schema);
    } else {
      write_episodes_jsonl(out, cohort.episodes, cohort.schema);
    }
  }
  {
    std::ofstream out(out_dir / "oracle.csv");
    write_oracle_csv(out, cohort);
  }
  write_file(out_dir / "schema.json", schema_to_json(cohort.schema).dump(2) + "\n");
  write_file(out_dir / "generator.json", generator_config_to_json(cfg).dump(2) + "\n");
  const OracleResult oracle = oracle_probabilities(cfg, cohort.episodes);
  std::cout << "patients " << cohort.episodes.size() << ", stages "
            << total_stages(cohort.episodes) << ", oracle AUROC " << csv::fixed(oracle.auroc)
            << "\n";
  return 0;
}

int cmd_experiment(const fs::path& config, std::optional<fs::path> out_dir,
                   std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg = load_experiment_config(config);
  if (seed) override_seed(cfg, *seed);
  if (out_dir) cfg.output_dir = *out_dir;
  const ExperimentReport report = run_experiment(cfg);
  const auto files = render_report(report, cfg.output_dir);
  std::cout << "fits attempted " << report.fits_attempted << ", wrote " << files.size()
            << " files to " << cfg.output_dir.string() << "\n";
  for (const auto& c : report.cells) {
    std::cout << "  " << c.state.label() << " / " << model_kind_name(c.model) << ": ";
    if (c.skip_reason) {
      std::cout << "skipped (" << *c.skip_reason << ")\n";
    } else {
      std::cout << "AUROC " << csv::fixed(c.auroc.value, 4) << " [" << csv::fixed(c.auroc.ci_low, 4)
                << ", " << csv::fixed(c.auroc.ci_high, 4) << "]\n";
    }
  }
  return 0;
}

int cmd_sweep(const fs::path& config, std::size_t n, std::optional<std::size_t> width,
              std::optional<fs::path> out_dir, std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg = load_experiment_config(config);
  if (seed) override_seed(cfg, *seed);
  cfg.sweep = true;
  cfg.sweep_models = n;
  if (width) cfg.sweep_bucket_width = *width;
  const fs::path dir = out_dir.value_or(cfg.output_dir);
  const auto sweep = run_sweep(cfg);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "complexity.csv");
    write_complexity_csv(out, sweep);
  }
  write_file(dir / "complexity.svg", complexity_svg(sweep));
  write_complexity_csv(std::cout, sweep);
  return 0;
}

int cmd_ope(const fs::path& model_path, const fs::path& data_path,
            std::optional<fs::path> spec_path, std::optional<fs::path> target_path,
            std::optional<fs::path> out_dir, std::size_t max_stage, bool use_mean) {
  const ModelBundle bundle = load_model_bundle(model_path);
  StateSpec spec = bundle.spec;
  if (spec_path) {
    spec = state_spec_from_json(read_json(*spec_path));
    spec.validate();
  }
  const CohortSchema& schema = bundle.preprocessor.schema();
  const EpisodeSet episodes = load_episodes(data_path, schema);
  const NumericEpisodeSet numeric = bundle.preprocessor.apply(episodes);
  const StateMatrix states = assemble_state(numeric, spec);
  const Matrix probs = bundle.model->predict_proba(states);
  const auto products = inverse_probability_products(states, probs);
  const ProductCurve curve = median_product_curve(products, max_stage, use_mean);

  std::optional<ImportanceRatios> ratios;
  if (target_path) {
    const ModelBundle target = load_model_bundle(*target_path);
    const NumericEpisodeSet tn = target.preprocessor.apply(episodes);
    const StateMatrix ts = assemble_state(tn, target.spec);
    ratios = importance_ratios(states, probs, target.model->predict_proba(ts));
  }

  if (out_dir) {
    fs::create_directories(*out_dir);
    {
      std::ofstream out(*out_dir / "ope_curve.csv");
      write_curve_csv(out, curve);
    }
    write_file(*out_dir / "ope_curve.svg", curve_svg({{spec.label(), curve}}));
    {
      std::ofstream out(*out_dir / "products.csv");
      out << csv::join({"patient_id", "t", "product", "floored"}) << '\n';
      for (const auto& s : products) {
        for (std::size_t t = 0; t < s.cumulative.size(); ++t) {
          out << csv::join({s.patient_id, std::to_string(t + 1), csv::fixed(s.cumulative[t]),
                            s.floored[t] ? "1" : "0"})
              << '\n';
        }
      }
    }
    if (ratios) {
      std::ofstream out(*out_dir / "importance_ratios.csv");
      out << csv::join({"patient_id", "t", "rho", "overlap_violation"}) << '\n';
      for (std::size_t i = 0; i < states.rows; ++i) {
        out << csv::join({states.patient_ids[states.patient[i]], std::to_string(states.stage[i]),
                          csv::fixed(ratios->rho[i]), ratios->overlap_violation[i] ? "1" : "0"})
            << '\n';
      }
    }
  }
  write_curve_csv(std::cout, curve);
  if (ratios) {
    std::cerr << "overlap-violation candidates: " << ratios->violations() << " of "
              << ratios->rho.size() << " rows\n";
  }
  return 0;
}

int cmd_report(const fs::path& in_dir, std::optional<fs::path> out_dir) {
  const ExperimentReport report = report_from_json(read_json(in_dir / "report.json"));
  const auto files = render_report(report, out_dir.value_or(in_dir));
  std::cout << "wrote " << files.size() << " files\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable behavior-policy modeling from sequential decision logs"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic cohort with oracle probabilities");
  fs::path gen_config, gen_out;
  std::string gen_format = "jsonl";
  gen->add_option("--config", gen_config, "Generator config JSON")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--format", gen_format, "Episode format")->check(CLI::IsMember({"jsonl", "csv"}));
  gen->add_option("--seed", seed, "Override the generator seed");

  auto* exp = app.add_subcommand("experiment", "Run the full evaluation protocol");
  fs::path exp_config;
  std::optional<fs::path> exp_out;
  exp->add_option("--config", exp_config, "Experiment config JSON")->required();
  exp->add_option("--out", exp_out, "Output directory (overrides the config)");
  exp->add_option("--seed", seed, "Override all seeds");

  auto* sweep = app.add_subcommand("sweep-trees", "Decision-tree complexity sweep");
  fs::path sweep_config;
  std::size_t sweep_n = 500;
  std::optional<std::size_t> sweep_width;
  std::optional<fs::path> sweep_out;
  sweep->add_option("--config", sweep_config, "Experiment config JSON")->required();
  sweep->add_option("--n", sweep_n, "Models per state")->check(CLI::PositiveNumber);
  sweep->add_option("--bucket-width", sweep_width, "Leaves per bucket")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_out, "Output directory");
  sweep->add_option("--seed", seed, "Override all seeds");

  auto* ope = app.add_subcommand("ope", "Inverse-probability product diagnostics");
  fs::path ope_model, ope_data;
  std::optional<fs::path> ope_spec, ope_target, ope_out;
  std::size_t ope_stages = 10;
  bool ope_mean = false;
  ope->add_option("--model", ope_model, "Model bundle JSON")->required();
  ope->add_option("--data", ope_data, "Episodes (JSONL or CSV)")->required();
  ope->add_option("--spec", ope_spec, "State spec JSON (defaults to the bundle's)");
  ope->add_option("--target", ope_target, "Target policy bundle for importance ratios");
  ope->add_option("--out", ope_out, "Output directory");
  ope->add_option("--max-stage", ope_stages, "Last stage of the curve")->check(CLI::PositiveNumber);
  ope->add_flag("--mean", ope_mean, "Use means instead of medians");

  auto* rep = app.add_subcommand("report", "Re-render report files from report.json");
  fs::path rep_in;
  std::optional<fs::path> rep_out;
  rep->add_option("--in", rep_in, "Directory holding report.json")->required();
  rep->add_option("--out", rep_out, "Output directory (defaults to --in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_config, gen_out, seed, gen_format);
    if (exp->parsed()) return cmd_experiment(exp_config, exp_out, seed);
    if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_n, sweep_width, sweep_out, seed);
    if (ope->parsed()) {
      return cmd_ope(ope_model, ope_data, ope_spec, ope_target, ope_out, ope_stages, ope_mean);
    }
    if (rep->parsed()) return cmd_report(rep_in, rep_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
