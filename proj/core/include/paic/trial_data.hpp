#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace paic {

enum class Family { gaussian, binomial, poisson };
enum class Link { identity, logit, log, probit, cloglog };

Family parse_family(const std::string& token);
Link parse_link(const std::string& token);
std::string to_string(Family f);
std::string to_string(Link l);
Link default_link(Family f);
bool family_link_supported(Family f, Link l);

// Outcome/treatment names plus the covariate roles of the regression:
// prognostic factors enter as main effects, effect modifiers as
// treatment interactions. The two lists may overlap.
struct ModelSpec {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> prognostic_factors;
  std::vector<std::string> effect_modifiers;
  Family family = Family::binomial;
  Link link = Link::logit;

  // Union of PFs and EMs, first-appearance order.
  std::vector<std::string> covariates() const;
  void validate() const;
};

// Patient-level rows: numeric covariates, a treatment label and an outcome.
// Immutable after construction; shared freely across workers.
class IpdTable {
 public:
  IpdTable(std::vector<std::string> covariate_names, Eigen::MatrixXd covariates,
           std::vector<std::string> treatments, Eigen::VectorXd outcomes, Family family);

  int n_rows() const { return static_cast<int>(outcomes_.size()); }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  int covariate_index(const std::string& name) const;
  Eigen::VectorXd covariate(const std::string& name) const;
  const std::vector<std::string>& treatments() const { return treatments_; }
  const Eigen::VectorXd& outcomes() const { return outcomes_; }
  Family family() const { return family_; }

  // The two distinct labels, in first-appearance order.
  const std::vector<std::string>& treatment_labels() const { return labels_; }
  int arm_count(const std::string& label) const;
  Eigen::VectorXd treatment_indicator(const std::string& comparator) const;

  IpdTable subset(const std::vector<int>& rows) const;

 private:
  std::vector<std::string> covariate_names_;
  Eigen::MatrixXd covariates_;
  std::vector<std::string> treatments_;
  Eigen::VectorXd outcomes_;
  Family family_;
  std::vector<std::string> labels_;
};

// One tidy aggregate row: (variable, statistic, value, trt). Absent variable
// marks trial-level records (arm sizes); absent trt marks statistics shared
// across arms.
struct AldRecord {
  std::optional<std::string> variable;
  std::string statistic;  // mean | sd | prop | sum | N
  double value = 0.0;
  std::optional<std::string> trt;
};

class AldTable {
 public:
  static AldTable from_records(std::vector<AldRecord> records);

  const std::vector<AldRecord>& records() const { return records_; }

  // Exact match modulo the mean/prop synonym and the arm -> shared fallback.
  std::optional<double> try_lookup(const std::optional<std::string>& variable,
                                   const std::string& statistic,
                                   const std::optional<std::string>& trt) const;
  double lookup(const std::optional<std::string>& variable, const std::string& statistic,
                const std::optional<std::string>& trt) const;

  std::vector<std::string> arm_labels() const;
  double arm_size(const std::string& trt) const;

 private:
  std::vector<AldRecord> records_;
};

// Population-level covariate statistic: shared record when present, else the
// arm-size-weighted average of the arm-specific records.
double population_statistic(const AldTable& ald, const std::string& variable,
                            const std::string& statistic);

IpdTable parse_ipd(const std::filesystem::path& path, const ModelSpec& spec);
AldTable parse_ald(const std::filesystem::path& path);

std::string serialize_ald(const AldTable& ald);
void serialize_ald(const AldTable& ald, const std::filesystem::path& path);
std::string serialize_ipd(const IpdTable& ipd, const std::string& outcome_name,
                          const std::string& treatment_name);
void serialize_ipd(const IpdTable& ipd, const std::string& outcome_name,
                   const std::string& treatment_name, const std::filesystem::path& path);

}  // namespace paic
