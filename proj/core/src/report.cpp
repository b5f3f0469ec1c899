#include "paic/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "paic/errors.hpp"

namespace paic {

using ordered_json = nlohmann::ordered_json;

ReportFormat parse_format(const std::string& token) {
  if (token == "text") return ReportFormat::text;
  if (token == "json") return ReportFormat::json;
  if (token == "csv") return ReportFormat::csv;
  if (token == "svg-forest" || token == "svg") return ReportFormat::svg_forest;
  throw validation_error("unknown report format '" + token + "'");
}

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

std::string level_tag(double ci) {
  std::ostringstream out;
  out << ci;
  return out.str();
}

void render_table(std::ostringstream& out, const std::vector<EffectRow>& rows, double ci) {
  const std::string lo = "lower." + level_tag(ci);
  const std::string hi = "upper." + level_tag(ci);
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Treatments", "Estimate", "Variance", "Std.Error", lo, hi});
  for (const auto& r : rows)
    cells.push_back({r.label, fmt(r.estimate), fmt(r.variance), fmt(r.se), fmt(r.lower),
                     fmt(r.upper)});
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
  for (const auto& row : cells) {
    out << "  ";
    for (std::size_t j = 0; j < row.size(); ++j) {
      out << row[j];
      if (j + 1 < row.size()) out << std::string(width[j] - row[j].size() + 2, ' ');
    }
    out << '\n';
  }
}

}  // namespace

std::string render_text(const ComparisonResult& result) {
  std::ostringstream out;
  out << "Anchored population-adjusted indirect comparison\n";
  out << "ITC algorithm: " << result.model.method_name << '\n';
  out << "Model: " << result.meta.family << '\n';
  out << "Scale: " << result.meta.scale << '\n';
  out << "Common treatment: " << result.meta.roles.ref << '\n';
  out << "Individual patient data study: " << result.meta.roles.ipd_comparator << " vs "
      << result.meta.roles.ref << '\n';
  out << "Aggregate level data study: " << result.meta.roles.ald_comparator << " vs "
      << result.meta.roles.ref << '\n';
  out << "Confidence interval level: " << level_tag(result.meta.ci_level) << '\n';
  out << "Variance method: " << result.meta.var_method << '\n';
  out << '\n' << "Contrasts:\n\n";
  render_table(out, result.contrasts, result.meta.ci_level);
  out << '\n' << "Absolute:\n\n";
  render_table(out, result.absolute, result.meta.ci_level);
  for (const auto& w : result.model.warnings) out << '\n' << "Warning: " << w << '\n';
  return out.str();
}

std::string render_csv(const ComparisonResult& result) {
  std::ostringstream out;
  out << "block,name,estimate,variance,se,lower,upper\n";
  auto emit = [&](const char* block, const std::vector<EffectRow>& rows) {
    for (const auto& r : rows) {
      ordered_json nums = {r.estimate, r.variance, r.se, r.lower, r.upper};
      out << block << ',' << r.label;
      for (const auto& v : nums) out << ',' << v.dump();
      out << '\n';
    }
  };
  emit("contrast", result.contrasts);
  emit("absolute", result.absolute);
  return out.str();
}

namespace {

ordered_json rows_to_json(const std::vector<EffectRow>& rows, const char* label_key) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json item;
    item[label_key] = r.label;
    item["estimate"] = r.estimate;
    item["variance"] = r.variance;
    item["se"] = r.se;
    item["lower"] = r.lower;
    item["upper"] = r.upper;
    arr.push_back(std::move(item));
  }
  return arr;
}

std::vector<EffectRow> rows_from_json(const ordered_json& arr, const char* label_key) {
  std::vector<EffectRow> rows;
  for (const auto& item : arr) {
    EffectRow r;
    r.label = item.at(label_key).get<std::string>();
    r.estimate = item.at("estimate").get<double>();
    r.variance = item.at("variance").get<double>();
    r.se = item.at("se").get<double>();
    r.lower = item.at("lower").get<double>();
    r.upper = item.at("upper").get<double>();
    rows.push_back(std::move(r));
  }
  return rows;
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json arr = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const ordered_json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  ordered_json arr = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    arr.push_back(std::move(row));
  }
  return arr;
}

Eigen::MatrixXd matrix_from_json(const ordered_json& arr) {
  const auto rows = arr.size();
  const auto cols = rows == 0 ? 0 : arr[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = arr[i][j].get<double>();
  return m;
}

ordered_json model_to_json(const ModelExtras& model) {
  ordered_json j;
  j["method_name"] = model.method_name;
  if (!model.warnings.empty()) j["warnings"] = model.warnings;
  if (model.n_boot) j["n_boot"] = *model.n_boot;
  if (model.ess) j["ESS"] = *model.ess;
  if (model.weights) j["weights"] = vector_to_json(*model.weights);
  if (model.rho) {
    j["rho"] = {{"names", model.rho->names}, {"matrix", matrix_to_json(model.rho->rho)}};
  }
  if (model.cohort_size) j["N"] = *model.cohort_size;
  if (model.n_imp) j["n_imp"] = *model.n_imp;
  if (!model.marginal_distns.empty()) j["marginal_distns"] = model.marginal_distns;
  if (!model.marginal_params.empty()) j["marginal_params"] = model.marginal_params;
  if (model.fit) {
    j["fit"] = {{"columns", model.fit->columns},
                {"coefficients", vector_to_json(model.fit->coefficients)},
                {"se", vector_to_json(model.fit->se)},
                {"log_likelihood", model.fit->log_likelihood},
                {"deviance", model.fit->deviance},
                {"converged", model.fit->converged},
                {"n_iterations", model.fit->n_iterations},
                {"dispersion", model.fit->dispersion}};
  }
  if (model.posterior) {
    const auto& p = *model.posterior;
    j["posterior"] = {{"acceptance_rate", p.acceptance_rate},
                      {"burnin", p.burnin},
                      {"chains", p.chains},
                      {"draws_kept", p.draws_kept},
                      {"credible_interval", {p.ci_lower, p.ci_upper}},
                      {"parameters", p.parameters},
                      {"rhat", vector_to_json(p.rhat)},
                      {"ess", vector_to_json(p.ess)},
                      {"draws", matrix_to_json(p.draws)}};
  }
  if (model.rubin) {
    const auto& r = *model.rubin;
    j["rubin"] = {{"n_imp", r.pooled.m},       {"q_bar", r.pooled.q_bar},
                  {"u_bar", r.pooled.u_bar},   {"b", r.pooled.b},
                  {"total_var", r.pooled.total_var}, {"nu", r.pooled.nu},
                  {"q", vector_to_json(r.q)},  {"u", vector_to_json(r.u)}};
  }
  return j;
}

ModelExtras model_from_json(const ordered_json& j) {
  ModelExtras model;
  model.method_name = j.at("method_name").get<std::string>();
  if (j.contains("warnings")) model.warnings = j["warnings"].get<std::vector<std::string>>();
  if (j.contains("n_boot")) model.n_boot = j["n_boot"].get<int>();
  if (j.contains("ESS")) model.ess = j["ESS"].get<double>();
  if (j.contains("weights")) model.weights = vector_from_json(j["weights"]);
  if (j.contains("rho")) {
    CorrelationMatrix c;
    c.names = j["rho"]["names"].get<std::vector<std::string>>();
    c.rho = matrix_from_json(j["rho"]["matrix"]);
    model.rho = std::move(c);
  }
  if (j.contains("N")) model.cohort_size = j["N"].get<int>();
  if (j.contains("n_imp")) model.n_imp = j["n_imp"].get<int>();
  if (j.contains("marginal_distns"))
    model.marginal_distns = j["marginal_distns"].get<std::map<std::string, std::string>>();
  if (j.contains("marginal_params"))
    model.marginal_params =
        j["marginal_params"].get<std::map<std::string, std::map<std::string, double>>>();
  if (j.contains("fit")) {
    FitSummary f;
    f.columns = j["fit"]["columns"].get<std::vector<std::string>>();
    f.coefficients = vector_from_json(j["fit"]["coefficients"]);
    f.se = vector_from_json(j["fit"]["se"]);
    f.log_likelihood = j["fit"]["log_likelihood"].get<double>();
    f.deviance = j["fit"]["deviance"].get<double>();
    f.converged = j["fit"]["converged"].get<bool>();
    f.n_iterations = j["fit"]["n_iterations"].get<int>();
    f.dispersion = j["fit"]["dispersion"].get<double>();
    model.fit = std::move(f);
  }
  if (j.contains("posterior")) {
    PosteriorSummary p;
    const auto& pj = j["posterior"];
    p.acceptance_rate = pj["acceptance_rate"].get<double>();
    p.burnin = pj["burnin"].get<int>();
    p.chains = pj["chains"].get<int>();
    p.draws_kept = pj["draws_kept"].get<int>();
    p.ci_lower = pj["credible_interval"][0].get<double>();
    p.ci_upper = pj["credible_interval"][1].get<double>();
    p.parameters = pj["parameters"].get<std::vector<std::string>>();
    p.rhat = vector_from_json(pj["rhat"]);
    p.ess = vector_from_json(pj["ess"]);
    p.draws = matrix_from_json(pj["draws"]);
    model.posterior = std::move(p);
  }
  if (j.contains("rubin")) {
    RubinSummary r;
    const auto& rj = j["rubin"];
    r.pooled.m = rj["n_imp"].get<int>();
    r.pooled.q_bar = rj["q_bar"].get<double>();
    r.pooled.u_bar = rj["u_bar"].get<double>();
    r.pooled.b = rj["b"].get<double>();
    r.pooled.total_var = rj["total_var"].get<double>();
    r.pooled.nu = rj["nu"].get<double>();
    r.q = vector_from_json(rj["q"]);
    r.u = vector_from_json(rj["u"]);
    model.rubin = std::move(r);
  }
  return model;
}

}  // namespace

std::string to_json_string(const ComparisonResult& result) {
  ordered_json j;
  j["contrasts"] = rows_to_json(result.contrasts, "treatments");
  j["absolute"] = rows_to_json(result.absolute, "treatment");
  j["metadata"] = {{"strategy", result.meta.strategy},
                   {"scale", result.meta.scale},
                   {"family", result.meta.family},
                   {"link", result.meta.link},
                   {"formula", result.meta.formula},
                   {"ref_trt", result.meta.roles.ref},
                   {"ipd_comp", result.meta.roles.ipd_comparator},
                   {"ald_comp", result.meta.roles.ald_comparator},
                   {"ci_level", result.meta.ci_level},
                   {"var_method", result.meta.var_method},
                   {"seed", result.meta.seed}};
  j["model"] = model_to_json(result.model);
  return j.dump(2) + "\n";
}

ComparisonResult result_from_json(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("invalid result JSON: ") + e.what());
  }
  ComparisonResult result;
  result.contrasts = rows_from_json(j.at("contrasts"), "treatments");
  result.absolute = rows_from_json(j.at("absolute"), "treatment");
  const auto& meta = j.at("metadata");
  result.meta.strategy = meta.at("strategy").get<std::string>();
  result.meta.scale = meta.at("scale").get<std::string>();
  result.meta.family = meta.at("family").get<std::string>();
  result.meta.link = meta.at("link").get<std::string>();
  result.meta.formula = meta.at("formula").get<std::string>();
  result.meta.roles.ref = meta.at("ref_trt").get<std::string>();
  result.meta.roles.ipd_comparator = meta.at("ipd_comp").get<std::string>();
  result.meta.roles.ald_comparator = meta.at("ald_comp").get<std::string>();
  result.meta.ci_level = meta.at("ci_level").get<double>();
  result.meta.var_method = meta.at("var_method").get<std::string>();
  result.meta.seed = meta.at("seed").get<std::uint64_t>();
  result.model = model_from_json(j.at("model"));
  return result;
}

namespace {

struct Panel {
  std::string title;
  std::vector<std::string> row_labels;
  // estimate, lower, upper per (row, result)
  std::vector<std::vector<const EffectRow*>> cells;
};

void draw_panel(std::ostringstream& svg, const Panel& panel, int x0, int y0, int width,
                int row_height, const std::vector<std::string>& series_names) {
  const int n_rows = static_cast<int>(panel.row_labels.size());
  const int n_series = static_cast<int>(series_names.size());
  const int plot_x = x0 + 90;
  const int plot_w = width - 120;

  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& row : panel.cells)
    for (const auto* cell : row) {
      if (!cell) continue;
      lo = first ? cell->lower : std::min(lo, cell->lower);
      hi = first ? cell->upper : std::max(hi, cell->upper);
      first = false;
    }
  if (first) return;
  const double span = (hi - lo) > 0.0 ? (hi - lo) : 1.0;
  lo -= 0.05 * span;
  hi += 0.05 * span;
  auto sx = [&](double v) { return plot_x + (v - lo) / (hi - lo) * plot_w; };

  static const char* palette[] = {"#1b6ca8", "#c2571a", "#2e8540", "#7b4fa6",
                                  "#a8201a", "#3c6e71", "#8a6d3b", "#555555"};

  svg << "<text x=\"" << x0 << "\" y=\"" << y0 - 8 << "\" font-size=\"14\" font-weight=\"bold\">"
      << panel.title << "</text>\n";
  for (int r = 0; r < n_rows; ++r) {
    const int yc = y0 + r * row_height + row_height / 2;
    svg << "<text x=\"" << x0 << "\" y=\"" << yc + 4 << "\" font-size=\"12\">"
        << panel.row_labels[r] << "</text>\n";
    svg << "<line x1=\"" << plot_x << "\" y1=\"" << yc << "\" x2=\"" << plot_x + plot_w
        << "\" y2=\"" << yc << "\" stroke=\"#dddddd\"/>\n";
    for (int s = 0; s < n_series; ++s) {
      const EffectRow* cell = panel.cells[r][s];
      if (!cell) continue;
      const int yy = yc - (n_series - 1) * 4 + s * 8;
      const char* color = palette[s % 8];
      svg << "<line x1=\"" << sx(cell->lower) << "\" y1=\"" << yy << "\" x2=\""
          << sx(cell->upper) << "\" y2=\"" << yy << "\" stroke=\"" << color
          << "\" stroke-width=\"2\"/>\n";
      svg << "<circle cx=\"" << sx(cell->estimate) << "\" cy=\"" << yy << "\" r=\"4\" fill=\""
          << color << "\"/>\n";
    }
  }
  // zero / null reference line when inside the window
  if (lo < 0.0 && hi > 0.0) {
    svg << "<line x1=\"" << sx(0.0) << "\" y1=\"" << y0 << "\" x2=\"" << sx(0.0) << "\" y2=\""
        << y0 + n_rows * row_height << "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
  }
  svg << "<text x=\"" << plot_x << "\" y=\"" << y0 + n_rows * row_height + 16
      << "\" font-size=\"11\">" << fmt(lo) << "</text>\n";
  svg << "<text x=\"" << plot_x + plot_w - 30 << "\" y=\"" << y0 + n_rows * row_height + 16
      << "\" font-size=\"11\">" << fmt(hi) << "</text>\n";
}

}  // namespace

std::string render_svg_forest(const std::vector<ComparisonResult>& results) {
  if (results.empty()) throw validation_error("svg forest: no results");
  const int n_series = static_cast<int>(results.size());
  const int row_height = 18 + 8 * n_series;
  const int width = 840;

  auto build_panel = [&](const std::string& title, bool contrasts_block) {
    Panel panel;
    panel.title = title;
    const auto& rows0 = contrasts_block ? results[0].contrasts : results[0].absolute;
    for (const auto& r : rows0) panel.row_labels.push_back(r.label);
    panel.cells.assign(panel.row_labels.size(), std::vector<const EffectRow*>(n_series, nullptr));
    for (int s = 0; s < n_series; ++s) {
      const auto& rows = contrasts_block ? results[s].contrasts : results[s].absolute;
      for (const auto& r : rows) {
        const auto it =
            std::find(panel.row_labels.begin(), panel.row_labels.end(), r.label);
        if (it != panel.row_labels.end())
          panel.cells[it - panel.row_labels.begin()][s] = &r;
      }
    }
    return panel;
  };

  const Panel contrasts = build_panel("Contrasts", true);
  const Panel absolute = build_panel("Absolute", false);

  const int contrasts_h = static_cast<int>(contrasts.row_labels.size()) * row_height;
  const int absolute_h = static_cast<int>(absolute.row_labels.size()) * row_height;
  const int legend_h = 22 * n_series;
  const int height = 40 + contrasts_h + 60 + absolute_h + 40 + legend_h;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\">\n";
  std::vector<std::string> series_names;
  for (const auto& r : results) series_names.push_back(r.model.method_name);

  draw_panel(svg, contrasts, 20, 40, width - 40, row_height, series_names);
  draw_panel(svg, absolute, 20, 40 + contrasts_h + 60, width - 40, row_height, series_names);

  static const char* palette[] = {"#1b6ca8", "#c2571a", "#2e8540", "#7b4fa6",
                                  "#a8201a", "#3c6e71", "#8a6d3b", "#555555"};
  const int legend_y = 40 + contrasts_h + 60 + absolute_h + 30;
  for (int s = 0; s < n_series; ++s) {
    svg << "<rect x=\"30\" y=\"" << legend_y + 22 * s - 9 << "\" width=\"12\" height=\"12\" fill=\""
        << palette[s % 8] << "\"/>\n";
    svg << "<text x=\"50\" y=\"" << legend_y + 22 * s + 2 << "\" font-size=\"12\">"
        << series_names[s] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_report(const ComparisonResult& result, ReportFormat format,
                 const std::filesystem::path& path) {
  std::string payload;
  switch (format) {
    case ReportFormat::text: payload = render_text(result); break;
    case ReportFormat::json: payload = to_json_string(result); break;
    case ReportFormat::csv: payload = render_csv(result); break;
    case ReportFormat::svg_forest: payload = render_svg_forest({result}); break;
  }
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write report to " + path.string());
  out << payload;
}

std::string diagnose_json(const ComparisonResult& result) {
  ordered_json j;
  j["strategy"] = result.meta.strategy;
  if (result.meta.strategy == "maic") {
    if (!result.model.weights || !result.model.ess)
      throw validation_error("diagnose: maic result is missing weights/ESS");
    const Eigen::VectorXd& w = *result.model.weights;
    j["ESS"] = *result.model.ess;
    j["n_weights"] = static_cast<int>(w.size());
    const double lo = w.minCoeff();
    const double hi = w.maxCoeff();
    const int bins = 20;
    const double step = (hi > lo) ? (hi - lo) / bins : 1.0;
    std::vector<double> breaks(bins + 1);
    std::vector<int> counts(bins, 0);
    for (int b = 0; b <= bins; ++b) breaks[b] = lo + b * step;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      int b = static_cast<int>((w[i] - lo) / step);
      b = std::clamp(b, 0, bins - 1);
      ++counts[b];
    }
    j["weights_histogram"] = {{"breaks", breaks}, {"counts", counts}};
    return j.dump(2) + "\n";
  }
  if (result.meta.strategy == "gcomp_bayes") {
    if (!result.model.posterior)
      throw validation_error("diagnose: gcomp_bayes result is missing the posterior block");
    const auto& p = *result.model.posterior;
    j["acceptance_rate"] = p.acceptance_rate;
    j["rhat"] = vector_to_json(p.rhat);
    j["ess"] = vector_to_json(p.ess);
    ordered_json traces;
    for (std::size_t k = 0; k < p.parameters.size(); ++k)
      traces[p.parameters[k]] = vector_to_json(p.draws.col(static_cast<Eigen::Index>(k)));
    j["traces"] = std::move(traces);
    return j.dump(2) + "\n";
  }
  if (result.meta.strategy == "mim") {
    if (!result.model.rubin)
      throw validation_error("diagnose: mim result is missing the rubin block");
    const auto& r = *result.model.rubin;
    j["nu"] = r.pooled.nu;
    j["n_imp"] = r.pooled.m;
    j["b_over_u"] = (r.pooled.u_bar > 0.0) ? r.pooled.b / r.pooled.u_bar
                                           : std::numeric_limits<double>::infinity();
    j["q"] = vector_to_json(r.q);
    return j.dump(2) + "\n";
  }
  if (result.meta.strategy == "stc")
    throw validation_error(
        "diagnose: no weights for STC; diagnostics are available for maic, gcomp_bayes and mim");
  throw validation_error("diagnose: no diagnostics bundle for strategy '" +
                         result.meta.strategy + "'");
}

}  // namespace paic
