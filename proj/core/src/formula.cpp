#include "paic/formula.hpp"

#include <algorithm>
#include <vector>

#include "paic/errors.hpp"

namespace paic {

namespace {

std::string strip(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

// Split on '+' outside parentheses.
std::vector<std::string> split_terms(const std::string& s) {
  std::vector<std::string> terms;
  std::string cur;
  int depth = 0;
  for (char ch : s) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == '+' && depth == 0) {
      terms.push_back(strip(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  terms.push_back(strip(cur));
  for (const auto& t : terms)
    if (t.empty()) throw validation_error("formula: empty term");
  return terms;
}

std::vector<std::string> expand_group(const std::string& s) {
  std::string body = strip(s);
  if (!body.empty() && body.front() == '(' && body.back() == ')')
    body = body.substr(1, body.size() - 2);
  return split_terms(body);
}

}  // namespace

ModelSpec spec_from_formula(const std::string& formula, Family family, Link link,
                            const std::string& trt_hint) {
  const auto tilde = formula.find('~');
  if (tilde == std::string::npos) throw validation_error("formula must contain '~'");
  const std::string lhs = strip(formula.substr(0, tilde));
  const std::string rhs = strip(formula.substr(tilde + 1));
  if (lhs.empty()) throw validation_error("formula: missing outcome on left of '~'");

  std::vector<std::string> mains;
  std::vector<std::pair<std::string, std::string>> interactions;  // (left, right)
  for (const auto& term : split_terms(rhs)) {
    const auto colon = term.find(':');
    if (colon == std::string::npos) {
      mains.push_back(term);
      continue;
    }
    const std::string left = strip(term.substr(0, colon));
    const std::string right = strip(term.substr(colon + 1));
    for (const auto& l : expand_group(left))
      for (const auto& r : expand_group(right)) interactions.emplace_back(l, r);
  }

  std::string trt = trt_hint;
  if (trt.empty()) {
    // candidates: main effects present in every interaction term
    std::vector<std::string> candidates;
    if (!interactions.empty()) {
      for (const auto& cand : mains) {
        const bool in_all = std::all_of(interactions.begin(), interactions.end(),
                                        [&](const auto& p) { return p.first == cand || p.second == cand; });
        if (in_all) candidates.push_back(cand);
      }
    }
    static const std::vector<std::string> conventional = {"trt", "treatment", "treat",
                                                          "arm", "group", "tx"};
    for (const auto& name : conventional) {
      if (std::find(candidates.begin(), candidates.end(), name) != candidates.end()) {
        trt = name;
        break;
      }
    }
    if (trt.empty() && candidates.size() == 1) trt = candidates.front();
    if (trt.empty()) {
      for (const auto& name : conventional)
        if (std::find(mains.begin(), mains.end(), name) != mains.end() &&
            interactions.empty()) {
          trt = name;
          break;
        }
    }
    if (trt.empty())
      throw validation_error(
          "formula: cannot determine the treatment variable; pass it explicitly");
  }
  if (std::find(mains.begin(), mains.end(), trt) == mains.end())
    throw validation_error("formula: treatment '" + trt + "' must appear as a main effect");

  ModelSpec spec;
  spec.outcome = lhs;
  spec.treatment = trt;
  spec.family = family;
  spec.link = link;
  for (const auto& m : mains)
    if (m != trt) spec.prognostic_factors.push_back(m);
  for (const auto& [l, r] : interactions) {
    std::string other;
    if (l == trt) other = r;
    else if (r == trt) other = l;
    else throw validation_error("formula: interaction '" + l + ":" + r +
                                "' does not involve the treatment '" + trt + "'");
    if (std::find(spec.effect_modifiers.begin(), spec.effect_modifiers.end(), other) ==
        spec.effect_modifiers.end())
      spec.effect_modifiers.push_back(other);
  }
  spec.validate();
  return spec;
}

std::string formula_string(const ModelSpec& spec) {
  std::string out = spec.outcome + " ~ ";
  bool first = true;
  for (const auto& pf : spec.prognostic_factors) {
    if (!first) out += " + ";
    out += pf;
    first = false;
  }
  if (!first) out += " + ";
  out += spec.treatment;
  for (const auto& em : spec.effect_modifiers) out += " + " + spec.treatment + ":" + em;
  return out;
}

}  // namespace paic
