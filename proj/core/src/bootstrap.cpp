#include "paic/bootstrap.hpp"

#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "paic/errors.hpp"
#include "paic/rng.hpp"

namespace paic {

BootstrapSummary bootstrap_estimates(
    const IpdTable& ipd, const std::function<Eigen::VectorXd(const IpdTable&)>& statistic,
    const BootstrapPlan& plan) {
  if (plan.n_boot < 2) throw validation_error("bootstrap: n_boot must be at least 2");
  const int workers = std::max(plan.workers, 1);
  const int n = ipd.n_rows();
  const int r_total = plan.n_boot;

  std::vector<Eigen::VectorXd> results(r_total);
  std::vector<char> ok(r_total, 0);

  auto run_replicate = [&](int r) {
    Rng rng = Rng::substream(plan.master_seed, streams::bootstrap, static_cast<std::uint64_t>(r));
    for (int attempt = 0; attempt < 6; ++attempt) {
      std::vector<int> rows(n);
      for (int i = 0; i < n; ++i) rows[i] = rng.uniform_int(n);
      try {
        Eigen::VectorXd est = statistic(ipd.subset(rows));
        if (!est.allFinite()) continue;
        results[r] = std::move(est);
        ok[r] = 1;
        return;
      } catch (const std::exception&) {
        // resample and retry
      }
    }
  };

  if (workers == 1) {
    for (int r = 0; r < r_total; ++r) run_replicate(r);
  } else {
    std::atomic<int> cursor{0};
    auto worker = [&]() {
      for (int r = cursor.fetch_add(1); r < r_total; r = cursor.fetch_add(1)) run_replicate(r);
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  BootstrapSummary out;
  out.n_failed = 0;
  int n_ok = 0;
  int dim = -1;
  for (int r = 0; r < r_total; ++r) {
    if (ok[r]) {
      ++n_ok;
      if (dim < 0) dim = static_cast<int>(results[r].size());
    } else {
      ++out.n_failed;
    }
  }
  if (out.n_failed > 0.01 * r_total)
    throw numeric_error("bootstrap: " + std::to_string(out.n_failed) + " of " +
                        std::to_string(r_total) + " replicates failed to converge");
  if (n_ok < 2) throw numeric_error("bootstrap: fewer than 2 successful replicates");

  out.replicates.resize(n_ok, dim);
  int row = 0;
  for (int r = 0; r < r_total; ++r)  // replicate-index order keeps reductions deterministic
    if (ok[r]) out.replicates.row(row++) = results[r];

  out.variance.resize(dim);
  for (int j = 0; j < dim; ++j) {
    const Eigen::VectorXd col = out.replicates.col(j);
    const double m = col.mean();
    out.variance[j] = (col.array() - m).square().sum() / (n_ok - 1);
  }
  return out;
}

double bootstrap_variance(const std::function<double(const IpdTable&)>& statistic,
                          const IpdTable& ipd, const BootstrapPlan& plan) {
  auto wrapped = [&](const IpdTable& t) {
    Eigen::VectorXd v(1);
    v[0] = statistic(t);
    return v;
  };
  return bootstrap_estimates(ipd, wrapped, plan).variance[0];
}

}  // namespace paic
