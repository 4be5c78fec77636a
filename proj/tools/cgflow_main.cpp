#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cgflow/config.hpp"
#include "cgflow/diagnostics.hpp"
#include "cgflow/runner.hpp"
#include "cgflow/snapshot.hpp"

namespace {

constexpr int kExitNumerical = 1;
constexpr int kExitConfig = 2;

std::optional<cgflow::RunConfig> load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open config file: " << path << "\n";
    return std::nullopt;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto parsed = cgflow::parse_config(buf.str());
  if (!parsed.ok()) {
    std::cerr << "config errors in " << path << ":\n";
    for (const auto& e : parsed.errors) std::cerr << "  - " << e << "\n";
    return std::nullopt;
  }
  return parsed.config;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  return out;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = load_config(config_path);
  if (!cfg) return kExitConfig;
  try {
    const auto status = cgflow::run(*cfg, out_dir);
    if (status == cgflow::RunStatus::kNumericalFailure) {
      std::cerr << "run ended in numerical failure; see "
                << (std::filesystem::path(out_dir) / "failure.json") << "\n";
      return kExitNumerical;
    }
  } catch (const cgflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_converge(const std::string& config_path, const std::string& dts_csv,
                 double ref_dt, const std::string& out_dir) {
  const auto cfg = load_config(config_path);
  if (!cfg) return kExitConfig;
  const auto dts = parse_double_list(dts_csv);
  if (dts.empty()) {
    std::cerr << "--dts must list at least one time step\n";
    return kExitConfig;
  }
  try {
    std::filesystem::create_directories(out_dir);
    const auto rep = cgflow::run_convergence_study(*cfg, dts, ref_dt);
    std::ofstream csv(std::filesystem::path(out_dir) / "convergence.csv");
    csv << "dt,linf_error\n";
    for (std::size_t i = 0; i < rep.dts.size(); ++i) {
      csv << cgflow::format_double(rep.dts[i]) << ","
          << cgflow::format_double(rep.errors[i]) << "\n";
    }
    nlohmann::json j;
    j["observed_order"] = rep.observed_order;
    j["at_floor"] = rep.at_floor;
    std::ofstream jf(std::filesystem::path(out_dir) / "convergence.json");
    jf << j.dump(2) << "\n";
    std::cout << "observed order: " << rep.observed_order
              << (rep.at_floor ? " (error floor)" : "") << "\n";
  } catch (const cgflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& approaches_csv,
                const std::string& out_dir) {
  const auto cfg = load_config(config_path);
  if (!cfg) return kExitConfig;
  const auto approaches = parse_int_list(approaches_csv);
  if (approaches.empty()) {
    std::cerr << "--approaches must list at least one approach\n";
    return kExitConfig;
  }
  try {
    std::filesystem::create_directories(out_dir);
    const auto bundle = cgflow::compare_approaches(*cfg, approaches);
    nlohmann::json j;
    j["max_lambda_discrepancy"] = bundle.max_lambda_discrepancy;
    nlohmann::json runs = nlohmann::json::array();
    for (std::size_t i = 0; i < bundle.labels.size(); ++i) {
      const auto csv_path = std::filesystem::path(out_dir) /
                            ("series_" + bundle.labels[i] + ".csv");
      cgflow::write_series_csv(csv_path.string(), bundle.series[i]);
      nlohmann::json r;
      r["label"] = bundle.labels[i];
      r["constraint_drift"] = bundle.constraint_drift[i];
      r["failed"] = bundle.failures[i].has_value();
      if (bundle.failures[i]) r["failure"] = bundle.failures[i]->what;
      runs.push_back(r);
    }
    j["runs"] = runs;
    std::ofstream jf(std::filesystem::path(out_dir) / "compare_summary.json");
    jf << j.dump(2) << "\n";
    std::cout << "max lambda discrepancy: " << bundle.max_lambda_discrepancy
              << "\n";
  } catch (const cgflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cgflow: spectral schemes for gradient flows with global constraints"};
  app.require_subcommand(1);

  std::string config_path, out_dir, dts_csv, approaches_csv;
  double ref_dt = 0.0;

  auto* run_cmd = app.add_subcommand("run", "advance one configured simulation");
  run_cmd->add_option("--config", config_path, "config file")->required();
  run_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* conv_cmd =
      app.add_subcommand("converge", "time-step refinement study");
  conv_cmd->add_option("--config", config_path, "config file")->required();
  conv_cmd->add_option("--dts", dts_csv, "comma-separated dt list")->required();
  conv_cmd->add_option("--ref-dt", ref_dt, "reference dt")->required();
  conv_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* cmp_cmd =
      app.add_subcommand("compare", "run several multiplier approaches");
  cmp_cmd->add_option("--config", config_path, "config file")->required();
  cmp_cmd->add_option("--approaches", approaches_csv, "comma-separated list")
      ->required();
  cmp_cmd->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) return cmd_run(config_path, out_dir);
  if (conv_cmd->parsed()) return cmd_converge(config_path, dts_csv, ref_dt, out_dir);
  if (cmp_cmd->parsed()) return cmd_compare(config_path, approaches_csv, out_dir);
  return kExitConfig;
}
