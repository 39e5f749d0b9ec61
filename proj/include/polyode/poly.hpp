#pragma once

// Sparse multivariate polynomials with real coefficients.
//
// Terms are kept in graded lexicographic order (total degree first, then
// exponents compared left to right with the first variable most significant),
// and no stored coefficient is ever exactly zero.

#include "polyode/models.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace polyode {

using Exponents = std::vector<unsigned>;

unsigned total_degree(const Exponents& e);

struct GradedLexLess {
  bool operator()(const Exponents& a, const Exponents& b) const;
};

class MultiPoly {
 public:
  using Terms = std::map<Exponents, double, GradedLexLess>;

  MultiPoly() = default;
  explicit MultiPoly(std::size_t num_vars) : num_vars_(num_vars) {}

  static MultiPoly constant(std::size_t num_vars, double c);
  /// The polynomial x_i.
  static MultiPoly variable(std::size_t num_vars, std::size_t i);
  /// sum_j coeffs[j] x_j + offset.
  static MultiPoly affine(std::span<const double> coeffs, double offset);

  std::size_t num_vars() const { return num_vars_; }
  const Terms& terms() const { return terms_; }
  std::size_t term_count() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  unsigned degree() const;
  /// Coefficient of a monomial; 0 when absent.
  double coeff(const Exponents& e) const;
  double max_abs_coeff() const;

  /// Adds c to the coefficient of e, dropping the term if it becomes zero.
  void add_term(const Exponents& e, double c);

  bool operator==(const MultiPoly&) const = default;

 private:
  std::size_t num_vars_ = 0;
  Terms terms_;
};

MultiPoly poly_add(const MultiPoly& a, const MultiPoly& b);
MultiPoly poly_mul(const MultiPoly& a, const MultiPoly& b);
MultiPoly poly_scale(const MultiPoly& a, double s);
/// Sum of coeff * prod x_i^e_i over terms in graded lexicographic order.
double poly_eval(const MultiPoly& p, std::span<const double> x);
/// Drops terms with |coeff| < abs_threshold.
MultiPoly prune(const MultiPoly& p, double abs_threshold);

struct PolyVector {
  std::vector<MultiPoly> components;
  std::vector<std::string> var_names;

  std::size_t num_vars() const { return var_names.size(); }
  std::vector<double> eval(std::span<const double> x) const;
  void validate() const;
};

/// x, y, z for up to three variables, otherwise x1..xd.
std::vector<std::string> default_var_names(std::size_t d);

/// Replays the pi-net recurrence on polynomials.
PolyVector expand_pinet(const PiNetV1& net, std::vector<std::string> var_names);

/// Prunes each component at rel_threshold times its largest |coefficient|.
PolyVector prune_relative(const PolyVector& pv, double rel_threshold);

/// "x^2*y" style monomial with the given variable names; "1" for the constant.
std::string monomial_string(const Exponents& e, const std::vector<std::string>& names, const char* times = "·");

/// Coefficient text with `sig_figs` significant digits.  Values that are
/// exactly representable in fewer digits print in their shortest form.
std::string format_coeff(double c, int sig_figs);

/// One line per component, "d<var>/dt = <terms>".  Terms smaller than
/// rel_threshold times the component's largest |coefficient| are moved to a
/// trailing "[dropped: ...]" list; rel_threshold = 0 keeps everything.
/// `lhs` overrides the left-hand labels (e.g. {"f"} for a static fit).
std::string format_poly(const PolyVector& pv, int sig_figs, double rel_threshold,
                        const std::vector<std::string>& lhs = {});

/// {"vars": [...], "components": [{"monomials": [{"exponents": [...], "coefficient": c}]}]}
std::string poly_to_json(const PolyVector& pv);
PolyVector poly_from_json(const std::string& text);

}  // namespace polyode
