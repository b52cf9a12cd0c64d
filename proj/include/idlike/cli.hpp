// Copyright (c) 2026, The idlike Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IDLIKE_CLI_HPP_
#define IDLIKE_CLI_HPP_

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "idlike/adapter.hpp"
#include "idlike/config.hpp"
#include "idlike/experiment.hpp"
#include "idlike/metrics.hpp"
#include "idlike/report.hpp"
#include "idlike/synth.hpp"

namespace idlike {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Codes that indicate bad input or configuration rather than a failed computation.
inline bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::UsageError:
    case ErrorCode::MissingFile:
    case ErrorCode::EmptyManifest:
    case ErrorCode::UnknownLabel:
    case ErrorCode::InsufficientSamples:
    case ErrorCode::LabelOutOfRange:
    case ErrorCode::TooFewPrompts:
    case ErrorCode::NoOodPrompts:
    case ErrorCode::GradientUnsupported:
      return true;
    default:
      return false;
  }
}

namespace cli_detail {

// --config plus one --<key> override flag per config key and repeatable --ood NAME=PATH.
struct ConfigOptions {
  std::filesystem::path config;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> ood;
  std::map<std::string, CLI::Option*> flags;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "Run configuration file (key = value lines)")->required();
    for (const auto& [key, unused] : detail::config_keys()) {
      (void)unused;
      flags[key] = app.add_option("--" + key, overrides[key], "Override config key " + key);
    }
    app.add_option("--ood", ood, "Add or replace an OOD test set, NAME=MANIFEST");
  }

  RunConfig load() const {
    RunConfig cfg = load_config(config);
    for (const auto& [key, opt] : flags)
      if (opt->count() > 0) set_config_value(cfg, key, overrides.at(key));
    for (const auto& spec : ood) {
      const auto eq = spec.find('=');
      enforce(eq != std::string::npos && eq > 0 && eq + 1 < spec.size(), ErrorCode::UsageError,
              "--ood expects NAME=PATH, got '" + spec + "'");
      set_config_value(cfg, std::string(detail::kOodPrefix) + spec.substr(0, eq), spec.substr(eq + 1));
    }
    validate(cfg);
    return cfg;
  }
};

}  // namespace cli_detail

/**
 * Command-line entry point. Returns 0 on success, 1 for usage or validation
 * errors (the message names the offending flag or key) and 2 when a stage
 * fails at run time.
 */
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot OOD detection with ID-like prompt learning", "idlike"};
  app.require_subcommand(1);

  cli_detail::ConfigOptions mine_opts, train_opts, score_opts, run_opts;
  auto* mine = app.add_subcommand("mine", "Mine ID crops and ID-like outliers from the few-shot set");
  mine_opts.attach(*mine);
  auto* train_cmd = app.add_subcommand("train", "Learn ID and OOD prompts from mined crops");
  train_opts.attach(*train_cmd);
  auto* score = app.add_subcommand("score", "Score the ID test set and every OOD set");
  score_opts.attach(*score);
  auto* run = app.add_subcommand("run", "mine, train, score and eval in one go");
  run_opts.attach(*run);

  std::filesystem::path eval_scores, eval_out;
  auto* eval = app.add_subcommand("eval", "Recompute metrics from a score dump");
  eval->add_option("--scores", eval_scores, "Score dump (JSON lines)")->required();
  eval->add_option("--out", eval_out, "Directory for report.jsonl and report.txt");

  std::filesystem::path cal_scores;
  std::string cal_method = "idlike";
  double cal_tpr = 0.95;
  auto* calibrate = app.add_subcommand("calibrate", "Threshold reaching a target TPR on the dump's ID scores");
  calibrate->add_option("--scores", cal_scores, "Score dump (JSON lines)")->required();
  calibrate->add_option("--method", cal_method, "idlike | mcm | msp | mcm_zeroshot");
  calibrate->add_option("--tpr", cal_tpr, "Target true positive rate")->check(CLI::Range(0.0, 1.0));

  std::filesystem::path report_path;
  auto* report = app.add_subcommand("report", "Print the summary table of a report");
  report->add_option("--report", report_path, "report.jsonl")->required();

  std::filesystem::path synth_out;
  synth::SynthConfig synth_cfg;
  auto* synth_cmd = app.add_subcommand("synth", "Write the procedural toy task and its toy.cfg");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_cfg.seed, "Generator seed");
  synth_cmd->add_option("--classes", synth_cfg.id_classes, "Number of ID classes");

  std::string serve_host = "127.0.0.1";
  int serve_port = 8777;
  std::uint64_t serve_seed = 1;
  std::size_t serve_dim = 32;
  auto* serve = app.add_subcommand("serve", "Serve the toy encoder over the adapter protocol");
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "TCP port");
  serve->add_option("--seed", serve_seed, "Toy encoder seed");
  serve->add_option("--dim", serve_dim, "Toy encoder embedding width");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (mine->parsed()) {
      const RunConfig cfg = mine_opts.load();
      const auto mined = stage_mine(cfg, *make_backend(cfg));
      out << "mined " << mined.d_in.size() << " ID crops and " << mined.d_out.size() << " outlier crops into "
          << cfg.output_dir.string() << '\n';
    } else if (train_cmd->parsed()) {
      const RunConfig cfg = train_opts.load();
      const auto result = stage_train(cfg, *make_backend(cfg));
      out << "trained " << result.history.size() << " steps";
      if (!result.history.empty()) out << ", final loss " << format_double(result.history.back().loss.total);
      out << '\n';
    } else if (score->parsed()) {
      const RunConfig cfg = score_opts.load();
      const auto records = stage_score(cfg, *make_backend(cfg));
      out << "scored " << records.size() << " samples into " << (cfg.output_dir / files::kScores).string() << '\n';
    } else if (run->parsed()) {
      const RunConfig cfg = run_opts.load();
      out << report_table(run_experiment(cfg));
    } else if (eval->parsed()) {
      out << report_table(stage_eval(eval_scores, eval_out));
    } else if (calibrate->parsed()) {
      const Method m = parse_method(cal_method);
      std::vector<double> id_scores;
      for (const auto& r : read_score_dump(cal_scores))
        if (r.split == kIdSplit) id_scores.push_back(ranking_score(r, m));
      const double log_gamma = calibrate_gamma(id_scores, cal_tpr);
      std::size_t accepted = 0;
      for (double s : id_scores)
        if (detect(s, Detector{log_gamma}) == Decision::ID) ++accepted;
      ojson j;
      j["method"] = to_string(m);
      j["target_tpr"] = cal_tpr;
      j["log_gamma"] = log_gamma;
      j["gamma"] = std::exp(log_gamma);
      j["tpr"] = static_cast<double>(accepted) / static_cast<double>(id_scores.size());
      out << j.dump() << '\n';
    } else if (report->parsed()) {
      std::ifstream in(report_path);
      enforce(static_cast<bool>(in), ErrorCode::MissingFile, "--report: cannot open " + report_path.string());
      out << report_table(parse_report_jsonl(in));
    } else if (synth_cmd->parsed()) {
      const auto layout = synth::write_synthetic_task(synth_out, synth_cfg);
      out << "wrote " << layout.config.string() << '\n';
    } else if (serve->parsed()) {
      const auto backend = toy_backend(serve_seed, serve_dim);
      httplib::Server server;
      out << "serving toy encoder on " << serve_host << ':' << serve_port << std::endl;
      serve_adapter(server, *backend, serve_host, serve_port);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation_error(e.code()) ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace idlike

#endif  // IDLIKE_CLI_HPP_
