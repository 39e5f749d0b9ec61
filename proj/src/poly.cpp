#include "polyode/poly.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace polyode {

unsigned total_degree(const Exponents& e) { return std::accumulate(e.begin(), e.end(), 0u); }

bool GradedLexLess::operator()(const Exponents& a, const Exponents& b) const {
  const unsigned da = total_degree(a);
  const unsigned db = total_degree(b);
  if (da != db) return da < db;
  // Same degree: the larger leading exponent comes first (x^2 before x*y before y^2).
  return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

MultiPoly MultiPoly::constant(std::size_t num_vars, double c) {
  MultiPoly p(num_vars);
  p.add_term(Exponents(num_vars, 0), c);
  return p;
}

MultiPoly MultiPoly::variable(std::size_t num_vars, std::size_t i) {
  if (i >= num_vars) throw std::out_of_range("MultiPoly::variable: index out of range");
  MultiPoly p(num_vars);
  Exponents e(num_vars, 0);
  e[i] = 1;
  p.add_term(e, 1.0);
  return p;
}

MultiPoly MultiPoly::affine(std::span<const double> coeffs, double offset) {
  const std::size_t d = coeffs.size();
  MultiPoly p(d);
  p.add_term(Exponents(d, 0), offset);
  for (std::size_t i = 0; i < d; ++i) {
    Exponents e(d, 0);
    e[i] = 1;
    p.add_term(e, coeffs[i]);
  }
  return p;
}

unsigned MultiPoly::degree() const {
  // Graded order: the last term has the largest total degree.
  return terms_.empty() ? 0 : total_degree(terms_.rbegin()->first);
}

double MultiPoly::coeff(const Exponents& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

double MultiPoly::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

void MultiPoly::add_term(const Exponents& e, double c) {
  if (e.size() != num_vars_) {
    throw std::invalid_argument("MultiPoly: exponent vector of length " + std::to_string(e.size()) + " for " +
                                std::to_string(num_vars_) + " variables");
  }
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

namespace {

void require_same_vars(const char* op, const MultiPoly& a, const MultiPoly& b) {
  if (a.num_vars() != b.num_vars()) {
    throw std::invalid_argument(std::string(op) + ": variable count mismatch (" + std::to_string(a.num_vars()) +
                                " vs " + std::to_string(b.num_vars()) + ")");
  }
}

}  // namespace

MultiPoly poly_add(const MultiPoly& a, const MultiPoly& b) {
  require_same_vars("poly_add", a, b);
  MultiPoly out = a;
  for (const auto& [e, c] : b.terms()) out.add_term(e, c);
  return out;
}

MultiPoly poly_mul(const MultiPoly& a, const MultiPoly& b) {
  require_same_vars("poly_mul", a, b);
  MultiPoly out(a.num_vars());
  Exponents e(a.num_vars());
  for (const auto& [ea, ca] : a.terms()) {
    for (const auto& [eb, cb] : b.terms()) {
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      out.add_term(e, ca * cb);
    }
  }
  return out;
}

MultiPoly poly_scale(const MultiPoly& a, double s) {
  MultiPoly out(a.num_vars());
  for (const auto& [e, c] : a.terms()) out.add_term(e, s * c);
  return out;
}

double poly_eval(const MultiPoly& p, std::span<const double> x) {
  if (x.size() != p.num_vars()) {
    throw std::invalid_argument("poly_eval: point has " + std::to_string(x.size()) + " coordinates, polynomial has " +
                                std::to_string(p.num_vars()) + " variables");
  }
  double total = 0.0;
  for (const auto& [e, c] : p.terms()) {
    double m = 1.0;
    for (std::size_t i = 0; i < e.size(); ++i)
      for (unsigned k = 0; k < e[i]; ++k) m *= x[i];
    total += c * m;
  }
  return total;
}

MultiPoly prune(const MultiPoly& p, double abs_threshold) {
  if (abs_threshold < 0.0) throw std::invalid_argument("prune: threshold must be non-negative");
  MultiPoly out(p.num_vars());
  for (const auto& [e, c] : p.terms())
    if (std::abs(c) >= abs_threshold) out.add_term(e, c);
  return out;
}

std::vector<double> PolyVector::eval(std::span<const double> x) const {
  std::vector<double> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(poly_eval(c, x));
  return out;
}

void PolyVector::validate() const {
  for (const auto& c : components) {
    if (c.num_vars() != var_names.size()) throw std::invalid_argument("PolyVector: component variable count mismatch");
  }
}

std::vector<std::string> default_var_names(std::size_t d) {
  if (d <= 3) {
    static const char* names[] = {"x", "y", "z"};
    return {names, names + d};
  }
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= d; ++i) out.push_back("x" + std::to_string(i));
  return out;
}

PolyVector expand_pinet(const PiNetV1& net, std::vector<std::string> var_names) {
  net.validate();
  const std::size_t d = net.input_dim;
  const std::size_t k = net.hidden_width;
  if (var_names.empty()) var_names = default_var_names(d);
  if (var_names.size() != d) throw std::invalid_argument("expand_pinet: need one name per input variable");

  auto stage = [&](std::size_t n, std::size_t row) {
    const auto& w = net.params.get(PiNetV1::stage_weight(n)).data;
    const auto& b = net.params.get(PiNetV1::stage_bias(n)).data;
    return MultiPoly::affine(std::span<const double>(w).subspan(row * d, d), b[row]);
  };

  std::vector<MultiPoly> hidden;
  hidden.reserve(k);
  for (std::size_t i = 0; i < k; ++i) hidden.push_back(stage(1, i));
  for (std::size_t n = 2; n <= net.degree; ++n) {
    for (std::size_t i = 0; i < k; ++i) hidden[i] = poly_add(poly_mul(stage(n, i), hidden[i]), hidden[i]);
  }

  const auto& out_w = net.params.get(PiNetV1::kOutWeight).data;
  const auto& out_b = net.params.get(PiNetV1::kOutBias).data;
  PolyVector pv;
  pv.var_names = std::move(var_names);
  for (std::size_t j = 0; j < net.output_dim; ++j) {
    MultiPoly y = MultiPoly::constant(d, out_b[j]);
    for (std::size_t i = 0; i < k; ++i) y = poly_add(y, poly_scale(hidden[i], out_w[j * k + i]));
    pv.components.push_back(std::move(y));
  }
  return pv;
}

PolyVector prune_relative(const PolyVector& pv, double rel_threshold) {
  PolyVector out;
  out.var_names = pv.var_names;
  for (const auto& c : pv.components) out.components.push_back(prune(c, rel_threshold * c.max_abs_coeff()));
  return out;
}

std::string monomial_string(const Exponents& e, const std::vector<std::string>& names, const char* times) {
  std::string s;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i] == 0) continue;
    if (!s.empty()) s += times;
    s += names[i];
    if (e[i] > 1) s += "^" + std::to_string(e[i]);
  }
  return s.empty() ? "1" : s;
}

namespace {

int significant_digits(const std::string& shortest) {
  // Digits of the mantissa, ignoring sign, leading zeros and the exponent.
  const auto mantissa = shortest.substr(0, shortest.find_first_of("eE"));
  std::string digits;
  for (char ch : mantissa)
    if (ch >= '0' && ch <= '9') digits += ch;
  const auto first = digits.find_first_not_of('0');
  if (first == std::string::npos) return 1;
  const auto last = digits.find_last_not_of('0');
  // Trailing zeros before the decimal point still count (e.g. "1500").
  const bool has_point = mantissa.find('.') != std::string::npos;
  return static_cast<int>((has_point ? last : digits.size() - 1) - first + 1);
}

}  // namespace

std::string format_coeff(double c, int sig_figs) {
  if (sig_figs < 1 || sig_figs > 17) throw std::invalid_argument("format_coeff: sig_figs must be in [1, 17]");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, c);
  std::string shortest(buf, res.ptr);
  if (significant_digits(shortest) <= sig_figs) return shortest;
  std::snprintf(buf, sizeof buf, "%#.*g", sig_figs, c);
  std::string s(buf);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

namespace {

const char* kMinus = "−";

std::string render_terms(const std::vector<std::pair<Exponents, double>>& terms,
                         const std::vector<std::string>& names, int sig_figs) {
  if (terms.empty()) return "0";
  std::string s;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& [e, c] = terms[i];
    const bool negative = std::signbit(c);
    if (i == 0) {
      if (negative) s += kMinus;
    } else {
      s += negative ? std::string(" ") + kMinus + " " : std::string(" + ");
    }
    s += format_coeff(std::abs(c), sig_figs);
    if (total_degree(e) > 0) s += "·" + monomial_string(e, names);
  }
  return s;
}

}  // namespace

std::string format_poly(const PolyVector& pv, int sig_figs, double rel_threshold, const std::vector<std::string>& lhs) {
  if (sig_figs < 1 || sig_figs > 17) throw std::invalid_argument("format_poly: sig_figs must be in [1, 17]");
  pv.validate();
  std::string out;
  for (std::size_t j = 0; j < pv.components.size(); ++j) {
    const auto& p = pv.components[j];
    const double cutoff = rel_threshold * p.max_abs_coeff();
    std::vector<std::pair<Exponents, double>> kept;
    std::vector<std::pair<Exponents, double>> dropped;
    for (const auto& [e, c] : p.terms()) (std::abs(c) < cutoff ? dropped : kept).emplace_back(e, c);
    std::string label;
    if (j < lhs.size()) {
      label = lhs[j];
    } else {
      label = "d" + (j < pv.var_names.size() ? pv.var_names[j] : "y" + std::to_string(j + 1)) + "/dt";
    }
    out += label + " = " + render_terms(kept, pv.var_names, sig_figs);
    if (!dropped.empty()) out += "   [dropped: " + render_terms(dropped, pv.var_names, sig_figs) + "]";
    out += "\n";
  }
  return out;
}

std::string poly_to_json(const PolyVector& pv) {
  using nlohmann::json;
  json j;
  j["vars"] = pv.var_names;
  j["components"] = json::array();
  for (const auto& p : pv.components) {
    json monomials = json::array();
    for (const auto& [e, c] : p.terms()) monomials.push_back({{"exponents", e}, {"coefficient", c}});
    j["components"].push_back({{"monomials", monomials}});
  }
  return j.dump(1) + "\n";
}

PolyVector poly_from_json(const std::string& text) {
  using nlohmann::json;
  const json j = json::parse(text);
  PolyVector pv;
  pv.var_names = j.at("vars").get<std::vector<std::string>>();
  for (const auto& comp : j.at("components")) {
    MultiPoly p(pv.var_names.size());
    for (const auto& m : comp.at("monomials")) p.add_term(m.at("exponents").get<Exponents>(), m.at("coefficient"));
    pv.components.push_back(std::move(p));
  }
  return pv;
}

}  // namespace polyode
