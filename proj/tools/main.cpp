// Command line front end: run an anchored population-adjusted indirect
// comparison, simulate a matched trial pair, or extract diagnostics from a
// stored result. Exit codes: 0 success, 2 validation error, 3 numerical
// failure.
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "paic/errors.hpp"
#include "paic/pipeline.hpp"
#include "paic/report.hpp"
#include "paic/rng.hpp"
#include "paic/simulate.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

paic::TrialDgp dgp_from_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw paic::validation_error("cannot open dgp file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw paic::validation_error("invalid dgp JSON: " + std::string(e.what()));
  }

  paic::TrialDgp dgp;
  if (j.contains("family")) dgp.family = paic::parse_family(j["family"]);
  dgp.link = j.contains("link") ? paic::parse_link(j["link"]) : paic::default_link(dgp.family);
  if (j.contains("outcome")) dgp.outcome_name = j["outcome"];
  if (j.contains("treatment")) dgp.treatment_name = j["treatment"];
  if (j.contains("ipd_comp")) dgp.ipd_comparator = j["ipd_comp"];
  if (j.contains("ald_comp")) dgp.ald_comparator = j["ald_comp"];
  if (j.contains("ref_trt")) dgp.reference = j["ref_trt"];
  if (j.contains("n_ipd_per_arm")) dgp.n_ipd_per_arm = j["n_ipd_per_arm"];
  if (j.contains("n_ald_per_arm")) dgp.n_ald_per_arm = j["n_ald_per_arm"];
  if (j.contains("correlation")) {
    dgp.ipd_correlation = j["correlation"];
    dgp.ald_correlation = j["correlation"];
  }
  if (j.contains("ipd_correlation")) dgp.ipd_correlation = j["ipd_correlation"];
  if (j.contains("ald_correlation")) dgp.ald_correlation = j["ald_correlation"];
  if (j.contains("intercept")) dgp.intercept = j["intercept"];
  if (j.contains("trt_ipd_comp")) dgp.trt_ipd_comparator = j["trt_ipd_comp"];
  if (j.contains("trt_ald_comp")) dgp.trt_ald_comparator = j["trt_ald_comp"];
  if (j.contains("sigma")) dgp.sigma = j["sigma"];

  if (!j.contains("covariates") || !j["covariates"].is_array())
    throw paic::validation_error("dgp: 'covariates' array is required");
  for (const auto& cj : j["covariates"]) {
    paic::DgpCovariate c;
    c.name = cj.at("name");
    if (cj.contains("prognostic")) c.prognostic = cj["prognostic"];
    if (cj.contains("effect_modifier")) c.effect_modifier = cj["effect_modifier"];
    if (cj.contains("dist")) c.dist = paic::parse_marginal_dist(cj["dist"]);
    if (cj.contains("ipd_mean")) c.ipd_mean = cj["ipd_mean"];
    if (cj.contains("ipd_sd")) c.ipd_sd = cj["ipd_sd"];
    if (cj.contains("ald_mean")) c.ald_mean = cj["ald_mean"];
    if (cj.contains("ald_sd")) c.ald_sd = cj["ald_sd"];
    if (cj.contains("pf_coef")) dgp.pf_coefficients[c.name] = cj["pf_coef"];
    if (cj.contains("em_coef")) dgp.em_coefficients[c.name] = cj["em_coef"];
    dgp.covariates.push_back(std::move(c));
  }
  return dgp;
}

int run_command(const std::map<std::string, std::string>& kv, const std::string& out_path,
                const std::string& format_token) {
  const paic::RunConfig config = paic::config_from_map(kv);
  const paic::ComparisonResult result = paic::run_analysis(config);
  const paic::ReportFormat format = paic::parse_format(format_token);
  if (out_path.empty() || out_path == "-") {
    switch (format) {
      case paic::ReportFormat::text: std::cout << paic::render_text(result); break;
      case paic::ReportFormat::json: std::cout << paic::to_json_string(result); break;
      case paic::ReportFormat::csv: std::cout << paic::render_csv(result); break;
      case paic::ReportFormat::svg_forest:
        std::cout << paic::render_svg_forest({result});
        break;
    }
  } else {
    paic::emit_report(result, format, out_path);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchored population-adjusted indirect treatment comparison"};
  app.require_subcommand(1);

  // ---- run ----
  auto* run = app.add_subcommand("run", "Run an indirect comparison analysis");
  std::string config_path, ipd, ald, strategy, formula, family, link, scale, ref_trt, var_method;
  std::string out_path, format_token = "text";
  double ci = -1.0;
  std::string seed_str;
  std::vector<std::string> opts;
  run->add_option("--config", config_path, "Flat key = value configuration file");
  run->add_option("--ipd", ipd, "IPD CSV/JSON file");
  run->add_option("--ald", ald, "ALD CSV/JSON file");
  run->add_option("--strategy", strategy, "maic | stc | gcomp_ml | gcomp_bayes | mim");
  run->add_option("--formula", formula, "e.g. \"y ~ PF1 + PF2 + trt + trt:EM1\"");
  run->add_option("--family", family, "gaussian | binomial | poisson");
  run->add_option("--link", link, "identity | logit | log | probit | cloglog");
  run->add_option("--scale", scale, "output contrast scale");
  run->add_option("--ref-trt", ref_trt, "common (anchor) treatment label");
  run->add_option("--ci", ci, "confidence level, default 0.95");
  run->add_option("--var-method", var_method, "sample | sandwich | rubin");
  run->add_option("--seed", seed_str, "random seed");
  run->add_option("--out", out_path, "output file ('-' for stdout)");
  run->add_option("--format", format_token, "text | json | csv | svg-forest");
  run->add_option("--opt", opts, "extra key=value options (n_boot, N, n_imp, workers, rho, ...)");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "Simulate a matched IPD/ALD trial pair");
  std::string dgp_path, out_dir = ".";
  std::string sim_seed_str = "0";
  sim->add_option("--dgp", dgp_path, "DGP description (JSON)")->required();
  sim->add_option("--out-dir", out_dir, "output directory");
  sim->add_option("--seed", sim_seed_str, "random seed");

  // ---- diagnose ----
  auto* diag = app.add_subcommand("diagnose", "Extract diagnostics from a result JSON");
  std::string result_path, diag_out;
  diag->add_option("result", result_path, "result JSON produced by 'run --format json'")
      ->required();
  diag->add_option("--out", diag_out, "output file ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (run->parsed()) {
      std::map<std::string, std::string> kv;
      if (!config_path.empty()) kv = paic::read_config_file(config_path);
      auto set_if = [&](const char* key, const std::string& value) {
        if (!value.empty()) kv[key] = value;
      };
      set_if("ipd", ipd);
      set_if("ald", ald);
      set_if("strategy", strategy);
      set_if("formula", formula);
      set_if("family", family);
      set_if("link", link);
      set_if("scale", scale);
      set_if("ref_trt", ref_trt);
      set_if("var_method", var_method);
      set_if("seed", seed_str);
      if (run->count("--ci") > 0) kv["ci"] = std::to_string(ci);
      for (const auto& o : opts) {
        const auto eq = o.find('=');
        if (eq == std::string::npos)
          throw paic::validation_error("--opt expects key=value, got '" + o + "'");
        kv[o.substr(0, eq)] = o.substr(eq + 1);
      }
      return run_command(kv, out_path, format_token);
    }

    if (sim->parsed()) {
      const paic::TrialDgp dgp = dgp_from_json(dgp_path);
      std::uint64_t seed = 0;
      try {
        seed = static_cast<std::uint64_t>(std::stoull(sim_seed_str));
      } catch (const std::exception&) {
        throw paic::validation_error("simulate: --seed must be a non-negative integer");
      }
      paic::Rng rng = paic::Rng::substream(seed, paic::streams::dgp, 0);
      const paic::TrialPair pair = paic::simulate_trial_pair(dgp, rng);

      const std::filesystem::path dir(out_dir);
      std::filesystem::create_directories(dir);
      const auto ipd_file = dir / (paic::dgp_dataset_stem(dgp, true) + ".csv");
      const auto ald_file = dir / (paic::dgp_dataset_stem(dgp, false) + ".csv");
      paic::serialize_ipd(pair.ipd, dgp.outcome_name, dgp.treatment_name, ipd_file);
      paic::serialize_ald(pair.ald, ald_file);

      paic::Rng oracle_rng = paic::Rng::substream(seed, paic::streams::oracle, 0);
      const paic::Scale scale = paic::Scale::default_for(dgp.family);
      const double truth = paic::dgp_true_marginal(dgp, scale, 1000000, oracle_rng);
      std::cout << "ipd: " << ipd_file.string() << "\n";
      std::cout << "ald: " << ald_file.string() << "\n";
      std::cout << "true_marginal_" << dgp.ipd_comparator << dgp.ald_comparator << " ("
                << scale.name() << "): " << truth << "\n";
      return kExitOk;
    }

    if (diag->parsed()) {
      std::ifstream in(result_path);
      if (!in) throw paic::validation_error("cannot open result file: " + result_path);
      std::stringstream buffer;
      buffer << in.rdbuf();
      const paic::ComparisonResult result = paic::result_from_json(buffer.str());
      const std::string diagnostics = paic::diagnose_json(result);
      if (diag_out.empty() || diag_out == "-") {
        std::cout << diagnostics;
      } else {
        std::ofstream out(diag_out);
        if (!out) throw paic::validation_error("cannot write " + diag_out);
        out << diagnostics;
      }
      return kExitOk;
    }
  } catch (const paic::validation_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const paic::numeric_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
