#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>

#include "paic/trial_data.hpp"

namespace paic {

struct BootstrapPlan {
  int n_boot = 1000;
  std::uint64_t master_seed = 0;
  int workers = 1;
};

struct BootstrapSummary {
  Eigen::MatrixXd replicates;  // successful replicates x statistic dimension
  Eigen::VectorXd variance;    // componentwise sample variance
  int n_failed = 0;
};

// Resamples rows with replacement across the whole table; replicate r draws
// from a substream keyed by (master_seed, r) so results do not depend on the
// worker count. Failing replicates are redrawn up to 5 times; more than 1%
// residual failures is an error.
BootstrapSummary bootstrap_estimates(
    const IpdTable& ipd, const std::function<Eigen::VectorXd(const IpdTable&)>& statistic,
    const BootstrapPlan& plan);

double bootstrap_variance(const std::function<double(const IpdTable&)>& statistic,
                          const IpdTable& ipd, const BootstrapPlan& plan);

}  // namespace paic
