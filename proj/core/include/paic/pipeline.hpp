#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "paic/copula.hpp"
#include "paic/gcomp.hpp"
#include "paic/scales.hpp"
#include "paic/trial_data.hpp"

namespace paic {

enum class StrategyKind { maic, stc, gcomp_ml, gcomp_bayes, mim };
StrategyKind parse_strategy(const std::string& token);
std::string to_string(StrategyKind s);
std::string method_name(StrategyKind s);  // MAIC, STC, GCOMP_ML, GCOMP_BAYES, MIM

enum class VarMethod { sample, sandwich, rubin };
VarMethod parse_var_method(const std::string& token);
std::string to_string(VarMethod v);

struct Roles {
  std::string ref;
  std::string ipd_comparator;
  std::string ald_comparator;
};

struct StrategyOptions {
  std::optional<CorrelationMatrix> rho;
  int cohort_size = 1000;  // N
  int n_boot = 1000;
  int n_imp = 20;  // M
  std::map<std::string, std::string> marginal_distns;
  std::map<std::string, std::map<std::string, double>> marginal_params;
  PosteriorOptions posterior;
  int workers = 1;
};

struct RunConfig {
  std::filesystem::path ipd_path;
  std::filesystem::path ald_path;
  StrategyKind strategy = StrategyKind::maic;
  ModelSpec spec;
  std::optional<Scale> scale;  // absent -> family default
  std::string ref_trt;         // empty -> inferred common label
  std::string ipd_comp;        // empty -> inferred
  std::string ald_comp;        // empty -> inferred
  double ci_level = 0.95;
  std::optional<VarMethod> var_method;  // absent -> strategy default
  std::uint64_t seed = 0;
  StrategyOptions options;

  void validate() const;
};

struct EffectRow {
  std::string label;
  double estimate = 0.0;
  double variance = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct FitSummary {
  std::vector<std::string> columns;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd se;
  double log_likelihood = 0.0;
  double deviance = 0.0;
  bool converged = false;
  int n_iterations = 0;
  double dispersion = 1.0;
};

struct PosteriorSummary {
  double acceptance_rate = 0.0;
  int burnin = 0;
  int chains = 1;
  int draws_kept = 0;
  double ci_lower = 0.0;  // equal-tailed credible interval for the contrast
  double ci_upper = 0.0;
  std::vector<std::string> parameters;
  Eigen::VectorXd rhat;
  Eigen::VectorXd ess;
  Eigen::MatrixXd draws;  // kept draws, one column per parameter
};

struct RubinSummary {
  RubinPooled pooled;
  Eigen::VectorXd q;
  Eigen::VectorXd u;
};

struct ModelExtras {
  std::string method_name;
  std::vector<std::string> warnings;
  std::optional<int> n_boot;
  std::optional<double> ess;
  std::optional<Eigen::VectorXd> weights;
  std::optional<CorrelationMatrix> rho;
  std::optional<int> cohort_size;
  std::optional<int> n_imp;
  std::map<std::string, std::string> marginal_distns;
  std::map<std::string, std::map<std::string, double>> marginal_params;
  std::optional<FitSummary> fit;
  std::optional<PosteriorSummary> posterior;
  std::optional<RubinSummary> rubin;
};

struct ResultMetadata {
  std::string strategy;
  std::string scale;
  std::string family;
  std::string link;
  std::string formula;
  Roles roles;
  double ci_level = 0.95;
  std::string var_method;
  std::uint64_t seed = 0;
};

struct ComparisonResult {
  std::vector<EffectRow> contrasts;  // AB, AC, BC ordering
  std::vector<EffectRow> absolute;   // ipd comparator, ald comparator, reference
  ResultMetadata meta;
  ModelExtras model;

  const EffectRow& contrast(const std::string& label) const;
  const EffectRow& absolute_row(const std::string& label) const;
};

ComparisonResult run_analysis(const RunConfig& config);
ComparisonResult run_analysis(const RunConfig& config, const IpdTable& ipd, const AldTable& ald);

// Flat key = value configuration (CLI --opt uses the same key space).
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);
RunConfig config_from_map(const std::map<std::string, std::string>& kv);
CorrelationMatrix read_correlation_csv(const std::filesystem::path& path);

}  // namespace paic
