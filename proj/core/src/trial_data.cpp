#include "paic/trial_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "paic/errors.hpp"

namespace paic {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool is_absent_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "<NA>" ||
         s == "null" || s == "NULL";
}

double parse_number(const std::string& cell, const std::string& where) {
  const std::string t = trim(cell);
  if (is_absent_token(t)) throw validation_error("missing value at " + where);
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw validation_error("non-numeric cell '" + t + "' at " + where);
  return value;
}

std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open file: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw validation_error("empty file: " + path.string());
  return rows;
}

const std::set<std::string>& known_statistics() {
  static const std::set<std::string> s{"mean", "sd", "prop", "sum", "N"};
  return s;
}

void check_outcome_domain(double y, Family family, const std::string& where) {
  if (!std::isfinite(y)) throw validation_error("non-finite outcome at " + where);
  switch (family) {
    case Family::binomial:
      if (y != 0.0 && y != 1.0)
        throw validation_error("outcome out of domain for binomial family at " + where +
                               " (expected 0/1, got " + format_number(y) + ")");
      break;
    case Family::poisson:
      if (y < 0.0 || std::abs(y - std::round(y)) > 1e-9)
        throw validation_error("outcome out of domain for poisson family at " + where +
                               " (expected non-negative integer, got " + format_number(y) + ")");
      break;
    case Family::gaussian:
      break;
  }
}

}  // namespace

Family parse_family(const std::string& token) {
  if (token == "gaussian") return Family::gaussian;
  if (token == "binomial") return Family::binomial;
  if (token == "poisson") return Family::poisson;
  throw validation_error("unknown family '" + token + "'");
}

Link parse_link(const std::string& token) {
  if (token == "identity") return Link::identity;
  if (token == "logit") return Link::logit;
  if (token == "log") return Link::log;
  if (token == "probit") return Link::probit;
  if (token == "cloglog") return Link::cloglog;
  throw validation_error("unknown link '" + token + "'");
}

std::string to_string(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::binomial: return "binomial";
    case Family::poisson: return "poisson";
  }
  return "?";
}

std::string to_string(Link l) {
  switch (l) {
    case Link::identity: return "identity";
    case Link::logit: return "logit";
    case Link::log: return "log";
    case Link::probit: return "probit";
    case Link::cloglog: return "cloglog";
  }
  return "?";
}

Link default_link(Family f) {
  switch (f) {
    case Family::gaussian: return Link::identity;
    case Family::binomial: return Link::logit;
    case Family::poisson: return Link::log;
  }
  return Link::identity;
}

bool family_link_supported(Family f, Link l) {
  switch (f) {
    case Family::gaussian:
      return l == Link::identity;
    case Family::binomial:
      return l == Link::logit || l == Link::probit || l == Link::cloglog || l == Link::log;
    case Family::poisson:
      return l == Link::log;
  }
  return false;
}

std::vector<std::string> ModelSpec::covariates() const {
  std::vector<std::string> out = prognostic_factors;
  for (const auto& em : effect_modifiers)
    if (std::find(out.begin(), out.end(), em) == out.end()) out.push_back(em);
  return out;
}

void ModelSpec::validate() const {
  if (outcome.empty()) throw validation_error("model spec: outcome name is empty");
  if (treatment.empty()) throw validation_error("model spec: treatment name is empty");
  if (!family_link_supported(family, link))
    throw validation_error("unsupported family/link combination: " + to_string(family) + "/" +
                           to_string(link));
  for (const auto& name : covariates()) {
    if (name == outcome || name == treatment)
      throw validation_error("covariate '" + name + "' clashes with outcome/treatment name");
  }
}

IpdTable::IpdTable(std::vector<std::string> covariate_names, Eigen::MatrixXd covariates,
                   std::vector<std::string> treatments, Eigen::VectorXd outcomes, Family family)
    : covariate_names_(std::move(covariate_names)),
      covariates_(std::move(covariates)),
      treatments_(std::move(treatments)),
      outcomes_(std::move(outcomes)),
      family_(family) {
  const auto n = outcomes_.size();
  if (covariates_.rows() != n || static_cast<Eigen::Index>(treatments_.size()) != n)
    throw validation_error("ipd: column lengths differ");
  if (covariates_.cols() != static_cast<Eigen::Index>(covariate_names_.size()))
    throw validation_error("ipd: covariate name/column count mismatch");
  if (n == 0) throw validation_error("ipd: no rows");
  if (!covariates_.allFinite()) throw validation_error("ipd: missing value in covariates");

  for (Eigen::Index i = 0; i < n; ++i)
    check_outcome_domain(outcomes_[i], family_, "row " + std::to_string(i + 1));

  for (const auto& t : treatments_)
    if (std::find(labels_.begin(), labels_.end(), t) == labels_.end()) labels_.push_back(t);
  if (labels_.size() != 2)
    throw validation_error("ipd: expected exactly two treatment labels, found " +
                           std::to_string(labels_.size()));
}

int IpdTable::covariate_index(const std::string& name) const {
  const auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
  if (it == covariate_names_.end())
    throw validation_error("unknown covariate '" + name + "'");
  return static_cast<int>(it - covariate_names_.begin());
}

Eigen::VectorXd IpdTable::covariate(const std::string& name) const {
  return covariates_.col(covariate_index(name));
}

int IpdTable::arm_count(const std::string& label) const {
  return static_cast<int>(std::count(treatments_.begin(), treatments_.end(), label));
}

Eigen::VectorXd IpdTable::treatment_indicator(const std::string& comparator) const {
  Eigen::VectorXd ind(n_rows());
  for (int i = 0; i < n_rows(); ++i) ind[i] = (treatments_[i] == comparator) ? 1.0 : 0.0;
  return ind;
}

IpdTable IpdTable::subset(const std::vector<int>& rows) const {
  const int m = static_cast<int>(rows.size());
  Eigen::MatrixXd x(m, covariates_.cols());
  Eigen::VectorXd y(m);
  std::vector<std::string> t(m);
  for (int i = 0; i < m; ++i) {
    const int r = rows[i];
    if (r < 0 || r >= n_rows()) throw validation_error("subset: row index out of range");
    x.row(i) = covariates_.row(r);
    y[i] = outcomes_[r];
    t[i] = treatments_[r];
  }
  return IpdTable(covariate_names_, std::move(x), std::move(t), std::move(y), family_);
}

namespace {

std::string key_of(const std::optional<std::string>& variable, const std::string& statistic,
                   const std::optional<std::string>& trt) {
  return (variable ? *variable : "\x01") + "\x02" + statistic + "\x02" + (trt ? *trt : "\x01");
}

std::string describe_triple(const std::optional<std::string>& variable,
                            const std::string& statistic,
                            const std::optional<std::string>& trt) {
  return "(" + (variable ? *variable : "<none>") + ", " + statistic + ", " +
         (trt ? *trt : "<shared>") + ")";
}

}  // namespace

AldTable AldTable::from_records(std::vector<AldRecord> records) {
  AldTable t;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!known_statistics().count(r.statistic))
      throw validation_error("unknown statistic '" + r.statistic + "'");
    if (!std::isfinite(r.value))
      throw validation_error("non-finite value for " +
                             describe_triple(r.variable, r.statistic, r.trt));
    const std::string k = key_of(r.variable, r.statistic, r.trt);
    if (!seen.insert(k).second)
      throw validation_error("duplicate ALD record " +
                             describe_triple(r.variable, r.statistic, r.trt));
  }
  t.records_ = std::move(records);
  return t;
}

std::optional<double> AldTable::try_lookup(const std::optional<std::string>& variable,
                                           const std::string& statistic,
                                           const std::optional<std::string>& trt) const {
  auto exact = [&](const std::optional<std::string>& v, const std::string& s,
                   const std::optional<std::string>& a) -> std::optional<double> {
    for (const auto& r : records_)
      if (r.variable == v && r.statistic == s && r.trt == a) return r.value;
    return std::nullopt;
  };
  auto with_synonym = [&](const std::optional<std::string>& a) -> std::optional<double> {
    if (auto v = exact(variable, statistic, a)) return v;
    // mean and prop are interchangeable summaries of 0/1 covariates
    if (statistic == "mean") return exact(variable, "prop", a);
    if (statistic == "prop") return exact(variable, "mean", a);
    return std::nullopt;
  };
  if (auto v = with_synonym(trt)) return v;
  if (trt) return with_synonym(std::nullopt);
  return std::nullopt;
}

double AldTable::lookup(const std::optional<std::string>& variable, const std::string& statistic,
                        const std::optional<std::string>& trt) const {
  if (auto v = try_lookup(variable, statistic, trt)) return *v;
  throw validation_error("ALD record not found: " + describe_triple(variable, statistic, trt));
}

std::vector<std::string> AldTable::arm_labels() const {
  std::vector<std::string> labels;
  for (const auto& r : records_)
    if (r.trt && std::find(labels.begin(), labels.end(), *r.trt) == labels.end())
      labels.push_back(*r.trt);
  return labels;
}

double AldTable::arm_size(const std::string& trt) const {
  if (auto v = try_lookup(std::nullopt, "N", trt)) return *v;
  for (const auto& r : records_)  // some tables attach N to a variable name
    if (r.statistic == "N" && r.trt == std::optional<std::string>(trt)) return r.value;
  throw validation_error("ALD arm size N not found for arm '" + trt + "'");
}

double population_statistic(const AldTable& ald, const std::string& variable,
                            const std::string& statistic) {
  if (auto v = ald.try_lookup(variable, statistic, std::nullopt)) return *v;
  double weighted = 0.0, total = 0.0;
  for (const auto& arm : ald.arm_labels()) {
    if (auto v = ald.try_lookup(variable, statistic, arm)) {
      const double n = ald.arm_size(arm);
      weighted += n * (*v);
      total += n;
    }
  }
  if (total <= 0.0)
    throw validation_error("ALD has no '" + statistic + "' record for covariate '" + variable +
                           "'");
  return weighted / total;
}

namespace {

AldTable ald_from_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw validation_error("invalid JSON in " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw validation_error("ALD JSON must be an array of records");
  std::vector<AldRecord> records;
  for (const auto& item : doc) {
    AldRecord r;
    if (item.contains("variable") && !item["variable"].is_null())
      r.variable = item["variable"].get<std::string>();
    r.statistic = item.at("statistic").get<std::string>();
    r.value = item.at("value").get<double>();
    if (item.contains("trt") && !item["trt"].is_null()) r.trt = item["trt"].get<std::string>();
    records.push_back(std::move(r));
  }
  return AldTable::from_records(std::move(records));
}

IpdTable ipd_from_json(const std::filesystem::path& path, const ModelSpec& spec) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw validation_error("invalid JSON in " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw validation_error("IPD JSON must be an array of rows");
  const auto names = spec.covariates();
  const int n = static_cast<int>(doc.size());
  Eigen::MatrixXd x(n, static_cast<int>(names.size()));
  Eigen::VectorXd y(n);
  std::vector<std::string> trt(n);
  for (int i = 0; i < n; ++i) {
    const auto& row = doc[i];
    const std::string where = "row " + std::to_string(i + 1);
    for (const auto& field : {spec.outcome, spec.treatment}) {
      if (!row.contains(field)) throw validation_error("missing column '" + field + "' in " + where);
    }
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (!row.contains(names[k]) || row[names[k]].is_null())
        throw validation_error("missing value for '" + names[k] + "' in " + where);
      if (!row[names[k]].is_number())
        throw validation_error("non-numeric cell for '" + names[k] + "' in " + where);
      x(i, static_cast<int>(k)) = row[names[k]].get<double>();
    }
    if (row[spec.outcome].is_null())
      throw validation_error("missing value for '" + spec.outcome + "' in " + where);
    y[i] = row[spec.outcome].get<double>();
    trt[i] = row[spec.treatment].is_string() ? row[spec.treatment].get<std::string>()
                                             : row[spec.treatment].dump();
  }
  return IpdTable(names, std::move(x), std::move(trt), std::move(y), spec.family);
}

}  // namespace

IpdTable parse_ipd(const std::filesystem::path& path, const ModelSpec& spec) {
  spec.validate();
  if (path.extension() == ".json") return ipd_from_json(path, spec);

  const auto rows = read_csv(path);
  const auto& header = rows.front();
  std::map<std::string, int> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = static_cast<int>(i);

  const auto names = spec.covariates();
  std::vector<std::string> required = {spec.outcome, spec.treatment};
  required.insert(required.end(), names.begin(), names.end());
  for (const auto& c : required)
    if (!col.count(c))
      throw validation_error("missing column '" + c + "' in " + path.string());

  const int n = static_cast<int>(rows.size()) - 1;
  if (n <= 0) throw validation_error("no data rows in " + path.string());
  Eigen::MatrixXd x(n, static_cast<int>(names.size()));
  Eigen::VectorXd y(n);
  std::vector<std::string> trt(n);
  for (int i = 0; i < n; ++i) {
    const auto& cells = rows[i + 1];
    if (cells.size() != header.size())
      throw validation_error("row " + std::to_string(i + 1) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(header.size()));
    const std::string where_row = "row " + std::to_string(i + 1);
    for (std::size_t k = 0; k < names.size(); ++k)
      x(i, static_cast<int>(k)) = parse_number(cells[col[names[k]]], where_row + ", column '" + names[k] + "'");
    y[i] = parse_number(cells[col[spec.outcome]], where_row + ", column '" + spec.outcome + "'");
    trt[i] = cells[col[spec.treatment]];
    if (is_absent_token(trt[i]))
      throw validation_error("missing value at " + where_row + ", column '" + spec.treatment + "'");
  }
  return IpdTable(names, std::move(x), std::move(trt), std::move(y), spec.family);
}

AldTable parse_ald(const std::filesystem::path& path) {
  if (path.extension() == ".json") return ald_from_json(path);

  const auto rows = read_csv(path);
  const auto& header = rows.front();
  std::map<std::string, int> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = static_cast<int>(i);
  for (const auto& c : {"variable", "statistic", "value", "trt"})
    if (!col.count(c)) throw validation_error("ALD file missing column '" + std::string(c) + "'");

  std::vector<AldRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& cells = rows[i];
    if (cells.size() != header.size())
      throw validation_error("ALD row " + std::to_string(i) + " is ragged");
    AldRecord r;
    const std::string var = cells[col["variable"]];
    if (!is_absent_token(var)) r.variable = var;
    r.statistic = cells[col["statistic"]];
    r.value = parse_number(cells[col["value"]], "ALD row " + std::to_string(i));
    const std::string trt = cells[col["trt"]];
    if (!is_absent_token(trt)) r.trt = trt;
    records.push_back(std::move(r));
  }
  return AldTable::from_records(std::move(records));
}

std::string serialize_ald(const AldTable& ald) {
  std::ostringstream out;
  out << "variable,statistic,value,trt\n";
  for (const auto& r : ald.records()) {
    out << (r.variable ? *r.variable : "NA") << ',' << r.statistic << ','
        << format_number(r.value) << ',' << (r.trt ? *r.trt : "NA") << '\n';
  }
  return out.str();
}

void serialize_ald(const AldTable& ald, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write file: " + path.string());
  out << serialize_ald(ald);
}

std::string serialize_ipd(const IpdTable& ipd, const std::string& outcome_name,
                          const std::string& treatment_name) {
  std::ostringstream out;
  for (const auto& name : ipd.covariate_names()) out << name << ',';
  out << treatment_name << ',' << outcome_name << '\n';
  for (int i = 0; i < ipd.n_rows(); ++i) {
    for (Eigen::Index k = 0; k < ipd.covariates().cols(); ++k)
      out << format_number(ipd.covariates()(i, k)) << ',';
    out << ipd.treatments()[i] << ',' << format_number(ipd.outcomes()[i]) << '\n';
  }
  return out.str();
}

void serialize_ipd(const IpdTable& ipd, const std::string& outcome_name,
                   const std::string& treatment_name, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write file: " + path.string());
  out << serialize_ipd(ipd, outcome_name, treatment_name);
}

}  // namespace paic
