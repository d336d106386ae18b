#include "cnf/operators.hpp"

#include "cnf/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace cnf {

void CoefficientRegistry::set(const std::string& name, double value) {
  fields_[name] = [value](const Point&) { return value; };
}

void CoefficientRegistry::set(const std::string& name, CoefficientField field) { fields_[name] = std::move(field); }

double CoefficientRegistry::eval(const std::string& name, const Point& at) const {
  const auto it = fields_.find(name);
  if (it == fields_.end()) throw UnknownCoefficient("unknown coefficient '" + name + "'");
  const double v = it->second(at);
  if (!std::isfinite(v)) throw NonFiniteValue("coefficient '" + name + "' is not finite");
  return v;
}

int DerivativeTerm::order() const {
  int s = 0;
  for (int v : multi_index) s += v;
  return s;
}

namespace {

class Parser {
 public:
  Parser(const std::string& text, const std::vector<std::string>& dims) : s_(text), dims_(dims) {}

  LinearOperator run() {
    LinearOperator op;
    op.dim_names = dims_;
    skip();
    if (pos_ == s_.size()) fail({"term"}, "empty operator");
    double sign = 1.0;
    if (peek('+') || peek('-')) {
      sign = s_[pos_] == '-' ? -1.0 : 1.0;
      ++pos_;
    }
    op.terms.push_back(term(sign));
    while (true) {
      skip();
      if (pos_ == s_.size()) break;
      if (peek('+') || peek('-')) {
        sign = s_[pos_] == '-' ? -1.0 : 1.0;
        ++pos_;
        op.terms.push_back(term(sign));
      } else {
        fail({"+", "-", "end of input"}, "unexpected character");
      }
    }
    return op;
  }

 private:
  [[noreturn]] void fail(std::vector<std::string> expected, const std::string& what) const {
    std::string msg = "operator parse error at offset " + std::to_string(pos_) + ": " + what + " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) msg += (i ? ", " : "") + expected[i];
    throw ParseError(pos_, std::move(expected), msg + ")");
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) const { return pos_ < s_.size() && s_[pos_] == c; }

  static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  std::string identifier() {
    const std::size_t b = pos_;
    while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
    return s_.substr(b, pos_ - b);
  }

  // True when the identifier starting at pos_ is followed by '*'.
  bool ident_is_coefficient() const {
    std::size_t p = pos_;
    while (p < s_.size() && ident_char(s_[p])) ++p;
    while (p < s_.size() && std::isspace(static_cast<unsigned char>(s_[p]))) ++p;
    return p < s_.size() && s_[p] == '*';
  }

  double number() {
    const char* b = s_.data() + pos_;
    const char* e = s_.data() + s_.size();
    double v = 0.0;
    const auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || !std::isfinite(v)) fail({"real"}, "malformed number");
    pos_ += static_cast<std::size_t>(r.ptr - b);
    return v;
  }

  int dim_index(const std::string& name, std::size_t at) const {
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (dims_[i] == name) return static_cast<int>(i);
    }
    std::vector<std::string> expected;
    for (const auto& d : dims_) expected.push_back("d" + d);
    throw ParseError(at, expected, "operator parse error at offset " + std::to_string(at) + ": unknown dimension '" +
                                       name + "'");
  }

  DerivativeTerm term(double sign) {
    DerivativeTerm t;
    t.scale = sign;
    t.multi_index.assign(dims_.size(), 0);
    while (true) {
      skip();
      if (pos_ == s_.size()) fail({"real", "coefficient", "id", "d<dim>"}, "unexpected end of input");
      const char c = s_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        t.scale *= number();
        skip();
        if (!peek('*')) fail({"*"}, "a number must be followed by '*'");
        ++pos_;
        continue;
      }
      if (!ident_start(c)) fail({"real", "coefficient", "id", "d<dim>"}, "unexpected character");
      if (ident_is_coefficient()) {
        const std::string name = identifier();
        if (!t.name.empty()) fail({"id", "d<dim>"}, "at most one named coefficient per term");
        t.name = name;
        skip();
        ++pos_;  // '*'
        continue;
      }
      atom(t);
      return t;
    }
  }

  void atom(DerivativeTerm& t) {
    const std::size_t at = pos_;
    const std::string word = identifier();
    if (word == "id") return;
    if (word.size() < 2 || word[0] != 'd') fail_at(at, {"id", "d<dim>"}, "expected an operator atom");
    const int k = dim_index(word.substr(1), at + 1);
    t.multi_index[static_cast<std::size_t>(k)] += 1;
    skip();
    if (peek('^')) {
      ++pos_;
      skip();
      if (!peek('2')) fail({"2"}, "only squared partials are supported");
      ++pos_;
      t.multi_index[static_cast<std::size_t>(k)] += 1;
      return;
    }
    // Mixed partial: a second "d<dim>" juxtaposed.
    if (pos_ < s_.size() && s_[pos_] == 'd' && !ident_is_coefficient()) {
      const std::size_t at2 = pos_;
      const std::string w2 = identifier();
      if (w2.size() < 2) fail_at(at2, {"d<dim>"}, "expected a partial derivative");
      const int l = dim_index(w2.substr(1), at2 + 1);
      t.multi_index[static_cast<std::size_t>(l)] += 1;
    }
  }

  [[noreturn]] void fail_at(std::size_t at, std::vector<std::string> expected, const std::string& what) {
    pos_ = at;
    fail(std::move(expected), what);
  }

  const std::string& s_;
  const std::vector<std::string>& dims_;
  std::size_t pos_ = 0;
};

void canonicalize(LinearOperator& op) {
  std::vector<DerivativeTerm> merged;
  for (const auto& t : op.terms) {
    auto it = std::find_if(merged.begin(), merged.end(), [&](const DerivativeTerm& m) {
      return m.multi_index == t.multi_index && m.name == t.name;
    });
    if (it == merged.end()) {
      merged.push_back(t);
    } else {
      it->scale += t.scale;
    }
  }
  std::sort(merged.begin(), merged.end(), [](const DerivativeTerm& a, const DerivativeTerm& b) {
    if (a.order() != b.order()) return a.order() < b.order();
    if (a.multi_index != b.multi_index) return a.multi_index > b.multi_index;
    return a.name < b.name;
  });
  op.terms = std::move(merged);
}

std::string format_real(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

LinearOperator parse_operator(const std::string& text, const std::vector<std::string>& dim_names) {
  for (const auto& d : dim_names) {
    if (d.empty() || !std::all_of(d.begin(), d.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; })) {
      throw BadConfig("operator: invalid dimension name '" + d + "'");
    }
  }
  LinearOperator op = Parser(text, dim_names).run();
  canonicalize(op);
  return op;
}

std::string to_string(const LinearOperator& op) {
  std::string out;
  for (std::size_t i = 0; i < op.terms.size(); ++i) {
    const auto& t = op.terms[i];
    double scale = t.scale;
    if (i == 0) {
      if (scale < 0) out += "-";
    } else {
      out += scale < 0 ? " - " : " + ";
    }
    scale = std::abs(scale);
    if (scale != 1.0) out += format_real(scale) + "*";
    if (!t.name.empty()) out += t.name + "*";
    std::vector<std::string> parts;
    for (std::size_t k = 0; k < t.multi_index.size(); ++k) {
      if (t.multi_index[k] == 2) parts.push_back("d" + op.dim_names[k] + "^2");
      if (t.multi_index[k] == 1) parts.push_back("d" + op.dim_names[k]);
    }
    if (parts.empty()) {
      out += "id";
    } else {
      out += parts[0];
      for (std::size_t p = 1; p < parts.size(); ++p) out += " " + parts[p];
    }
  }
  return out;
}

int operator_order(const LinearOperator& op) {
  int o = 0;
  for (const auto& t : op.terms) o = std::max(o, t.order());
  return o;
}

LinearOperator identity_operator(const std::vector<std::string>& dim_names) {
  LinearOperator op;
  op.dim_names = dim_names;
  op.terms.push_back(DerivativeTerm{std::vector<int>(dim_names.size(), 0), 1.0, ""});
  return op;
}

SlotWeights operator_slots(const LinearOperator& op, const Point& at, const CoefficientRegistry& coeffs) {
  const Eigen::Index m = op.dims();
  if (at.size() != m) throw DimensionMismatch("operator: point dimension does not match operator");
  SlotWeights s = SlotWeights::Zero(slot_count(m, operator_order(op)));
  for (const auto& t : op.terms) {
    const double c = t.name.empty() ? t.scale : t.scale * coeffs.eval(t.name, at);
    std::vector<Eigen::Index> axes;
    for (Eigen::Index k = 0; k < m; ++k) {
      for (int r = 0; r < t.multi_index[static_cast<std::size_t>(k)]; ++r) axes.push_back(k);
    }
    if (axes.empty()) s[0] += c;
    if (axes.size() == 1) s[1 + axes[0]] += c;
    if (axes.size() == 2) s[1 + m + axes[0] * m + axes[1]] += c;
  }
  return s;
}

Eigen::VectorXd apply_slots(const SlotWeights& slots, const DerivativeBundle& b) {
  const Eigen::Index m = b.dims();
  const Eigen::Index n = slots.size();
  if (n > slot_count(m, b.order)) {
    throw OrderTooLow("operator needs derivatives of higher order than the bundle carries");
  }
  Eigen::VectorXd out = slots[0] * b.value;
  if (n > 1) out.noalias() += b.jac * slots.segment(1, m);
  if (n > 1 + m) out.noalias() += b.hess * slots.segment(1 + m, m * m);
  return out;
}

Eigen::VectorXd apply_operator(const LinearOperator& op, const DerivativeBundle& bundle, const Point& at,
                               const CoefficientRegistry& coeffs) {
  if (bundle.dims() != op.dims()) throw DimensionMismatch("operator: bundle dimension does not match operator");
  if (bundle.order < operator_order(op)) {
    throw OrderTooLow("operator of order " + std::to_string(operator_order(op)) + " applied to a bundle of order " +
                      std::to_string(bundle.order));
  }
  return apply_slots(operator_slots(op, at, coeffs), bundle);
}

}  // namespace cnf
