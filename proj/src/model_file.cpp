#include "skewinfo/model_file.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "skewinfo/errors.hpp"

namespace skewinfo {

namespace {

// A TOML subset: tables, key = value, strings, numbers, booleans and
// (nested, possibly multi-line) arrays.
struct Value {
  enum class Type { boolean, integer, real, string, array };
  Type type = Type::integer;
  bool b = false;
  long long i = 0;
  double x = 0.0;
  std::string s;
  std::vector<Value> items;
  int line = 0;
};

struct Table {
  int line = 0;
  std::map<std::string, Value> entries;
};

struct Document {
  std::string file;
  std::map<std::string, Table> tables;
};

class ValueParser {
 public:
  ValueParser(std::string_view text, const std::string& file, int line)
      : text_(text), file_(file), line_(line) {}

  Value parse() {
    Value v = value();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing characters");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw SpecError(file_, line_, msg); }

  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                   text_[pos_] == '\n' || text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  Value value() {
    skip_space();
    if (pos_ >= text_.size()) fail("missing value");
    Value v;
    v.line = line_;
    const char c = text_[pos_];
    if (c == '"') {
      v.type = Value::Type::string;
      v.s = string();
    } else if (c == '[') {
      v.type = Value::Type::array;
      ++pos_;
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == ']') {
        ++pos_;
        return v;
      }
      while (true) {
        v.items.push_back(value());
        skip_space();
        if (pos_ >= text_.size()) fail("unterminated array");
        if (text_[pos_] == ',') {
          ++pos_;
          skip_space();
          if (pos_ < text_.size() && text_[pos_] == ']') {
            ++pos_;
            break;
          }
          continue;
        }
        if (text_[pos_] == ']') {
          ++pos_;
          break;
        }
        fail("expected ',' or ']' in array");
      }
    } else if (text_.substr(pos_, 4) == "true") {
      v.type = Value::Type::boolean;
      v.b = true;
      pos_ += 4;
    } else if (text_.substr(pos_, 5) == "false") {
      v.type = Value::Type::boolean;
      pos_ += 5;
    } else {
      number(v);
    }
    return v;
  }

  std::string string() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\') {
        if (pos_ >= text_.size()) break;
        const char e = text_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape '\\") + e + "'");
        }
      }
      out += c;
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  void number(Value& v) {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::string_view("+-.0123456789eE_infa").find(text_[pos_]) !=
                                      std::string_view::npos) {
      ++pos_;
    }
    std::string tok(text_.substr(start, pos_ - start));
    std::erase(tok, '_');
    if (tok.empty()) fail("invalid value");
    std::string_view body = tok;
    if (body.front() == '+') body.remove_prefix(1);
    const bool is_real = body.find_first_of(".eEin") != std::string_view::npos;
    const char* end = body.data() + body.size();
    if (is_real) {
      v.type = Value::Type::real;
      auto [p, ec] = std::from_chars(body.data(), end, v.x);
      if (ec != std::errc() || p != end) fail("invalid number '" + tok + "'");
    } else {
      v.type = Value::Type::integer;
      auto [p, ec] = std::from_chars(body.data(), end, v.i);
      if (ec != std::errc() || p != end) fail("invalid integer '" + tok + "'");
    }
  }

  std::string_view text_;
  const std::string& file_;
  int line_;
  std::size_t pos_ = 0;
};

std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool bare_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

int bracket_depth(std::string_view s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (in_string) continue;
    if (s[i] == '[') ++depth;
    if (s[i] == ']') --depth;
  }
  return depth;
}

Document parse_document(std::string_view text, const std::string& file) {
  Document doc;
  doc.file = file;
  doc.tables[""].line = 1;
  std::string current;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.size() < 3 || line.back() != ']' || line[1] == '[') {
        throw SpecError(file, lineno, "malformed table header");
      }
      const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
      std::size_t p = 0;
      while (p <= name.size()) {
        const auto q = std::min(name.find('.', p), name.size());
        if (!bare_key(std::string_view(name).substr(p, q - p))) {
          throw SpecError(file, lineno, "malformed table name '" + name + "'");
        }
        p = q + 1;
      }
      if (doc.tables.count(name)) throw SpecError(file, lineno, "duplicate table [" + name + "]");
      doc.tables[name].line = lineno;
      current = name;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SpecError(file, lineno, "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!bare_key(key)) throw SpecError(file, lineno, "malformed key '" + key + "'");
    std::string rhs = trim(std::string_view(line).substr(eq + 1));
    const int start = lineno;
    while (bracket_depth(rhs) > 0 && std::getline(in, raw)) {
      ++lineno;
      rhs += "\n" + trim(strip_comment(raw));
    }
    auto& table = doc.tables[current];
    if (table.entries.count(key)) throw SpecError(file, start, "duplicate key '" + key + "'");
    table.entries[key] = ValueParser(rhs, file, start).parse();
  }
  return doc;
}

// Typed, key-tracking access to one table.
class Reader {
 public:
  Reader(const Document& doc, const std::string& name, std::set<std::string> allowed)
      : doc_(doc), name_(name), allowed_(std::move(allowed)) {
    const auto it = doc.tables.find(name);
    table_ = it == doc.tables.end() ? nullptr : &it->second;
    if (!table_) return;
    for (const auto& [key, value] : table_->entries) {
      if (!allowed_.count(key)) {
        throw SpecError(doc.file, value.line, "unknown key '" + key + "' in " + where());
      }
    }
  }

  bool present() const { return table_ != nullptr; }
  int line() const { return table_ ? table_->line : 1; }
  const Value* find(const std::string& key) const {
    if (!table_) return nullptr;
    const auto it = table_->entries.find(key);
    return it == table_->entries.end() ? nullptr : &it->second;
  }
  int line_of(const std::string& key) const {
    const Value* v = find(key);
    return v ? v->line : line();
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw SpecError(doc_.file, line_of(key), msg);
  }

  const Value& require(const std::string& key) const {
    const Value* v = find(key);
    if (!v) throw SpecError(doc_.file, line(), "missing key '" + key + "' in " + where());
    return *v;
  }

  std::string string(const std::string& key, std::optional<std::string> fallback = {}) const {
    const Value* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      require(key);
    }
    if (v->type != Value::Type::string) fail(key, "'" + key + "' must be a string");
    return v->s;
  }

  double real(const std::string& key, std::optional<double> fallback = {}) const {
    const Value* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      require(key);
    }
    return as_real(*v, key);
  }

  long long integer(const std::string& key, std::optional<long long> fallback = {}) const {
    const Value* v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      require(key);
    }
    if (v->type != Value::Type::integer) fail(key, "'" + key + "' must be an integer");
    return v->i;
  }

  double as_real(const Value& v, const std::string& key) const {
    double x;
    if (v.type == Value::Type::integer) {
      x = static_cast<double>(v.i);
    } else if (v.type == Value::Type::real) {
      x = v.x;
    } else {
      throw SpecError(doc_.file, v.line, "'" + key + "' must be a number");
    }
    if (!std::isfinite(x)) throw SpecError(doc_.file, v.line, "'" + key + "' must be finite");
    return x;
  }

  std::vector<double> reals(const std::string& key) const {
    const Value& v = require(key);
    if (v.type != Value::Type::array) fail(key, "'" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& item : v.items) out.push_back(as_real(item, key));
    return out;
  }

  std::string where() const { return name_.empty() ? "the top level" : "[" + name_ + "]"; }
  const std::string& file() const { return doc_.file; }

 private:
  const Document& doc_;
  std::string name_;
  std::set<std::string> allowed_;
  const Table* table_ = nullptr;
};

// Runs a factory, re-anchoring its errors at the given key.
template <class F>
auto anchored(const Reader& r, const std::string& key, F&& make) {
  try {
    return make();
  } catch (const SpecError&) {
    throw;
  } catch (const StandardizationInfeasible& e) {
    r.fail(key, e.what());
  } catch (const InputError& e) {
    r.fail(key, e.what());
  } catch (const CapabilityError& e) {
    r.fail(key, e.what());
  }
}

OuterCdf read_outer(const Reader& r) {
  const std::string name = r.string("outer", std::string("normal"));
  if (name == "normal") return OuterCdf::normal();
  if (name == "logistic") return OuterCdf::logistic();
  if (name == "student") {
    return anchored(r, "outer_nu", [&] { return OuterCdf::student(r.real("outer_nu")); });
  }
  r.fail("outer", "unknown outer cdf '" + name + "' (normal, logistic, student)");
}

const std::set<std::string> kSkewerKeys{"family", "outer", "outer_nu", "alpha", "nu"};

SkewingFunction read_skewer(const Reader& r, int dim, const SymmetricKernel* kernel) {
  const std::string family = r.string("family");
  const OuterCdf outer = read_outer(r);
  const auto forbid = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (r.find(k)) r.fail(k, std::string("'") + k + "' does not apply to skewer family '" + family + "'");
    }
  };
  if (outer.kind() != OuterCdf::Kind::student) forbid({"outer_nu"});
  if (family == "linear") {
    forbid({"alpha", "nu"});
    return anchored(r, "family", [&] { return SkewingFunction::linear(dim, outer); });
  }
  if (family == "power") {
    forbid({"nu"});
    if (dim != 1) r.fail("family", "power skewer is one-dimensional");
    return anchored(r, "alpha", [&] { return SkewingFunction::power(r.real("alpha"), outer); });
  }
  if (family == "t_type") {
    forbid({"alpha"});
    return anchored(r, "nu", [&] { return SkewingFunction::t_type(dim, r.real("nu"), outer); });
  }
  if (family == "sine") {
    forbid({"alpha", "nu"});
    return anchored(r, "family", [&] { return SkewingFunction::sine(dim, outer); });
  }
  if (family == "score_composed") {
    forbid({"alpha", "nu"});
    if (!kernel) r.fail("family", "score_composed is not available here");
    return anchored(r, "family", [&] { return SkewingFunction::score_composed(*kernel, outer); });
  }
  r.fail("family", "unknown skewer family '" + family +
                       "' (linear, power, t_type, sine, score_composed)");
}

UnivariateShape parse_component(const Reader& r, const std::string& text) {
  std::string name = text;
  std::optional<double> param;
  const auto open = text.find('(');
  if (open != std::string::npos) {
    if (text.back() != ')') r.fail("components", "malformed component '" + text + "'");
    name = text.substr(0, open);
    const std::string arg = text.substr(open + 1, text.size() - open - 2);
    double x = 0.0;
    auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), x);
    if (ec != std::errc() || p != arg.data() + arg.size()) {
      r.fail("components", "malformed component parameter in '" + text + "'");
    }
    param = x;
  }
  auto need = [&](bool wants) {
    if (wants != param.has_value()) {
      r.fail("components", "component '" + text + (wants ? "' needs a parameter" : "' takes no parameter"));
    }
  };
  return anchored(r, "components", [&] {
    if (name == "gaussian") return need(false), UnivariateShape::gaussian();
    if (name == "laplace") return need(false), UnivariateShape::laplace();
    if (name == "logistic") return need(false), UnivariateShape::logistic();
    if (name == "student") return need(true), UnivariateShape::student(*param);
    if (name == "exponential_power") return need(true), UnivariateShape::exponential_power(*param);
    if (name == "bumped_cauchy") return need(true), UnivariateShape::bumped_cauchy(*param);
    r.fail("components", "unknown component family '" + name + "'");
  });
}

SymmetricKernel read_kernel(const Document& doc, int dim) {
  const Reader r(doc, "kernel",
                 {"family", "standardization", "nu", "alpha", "epsilon", "components", "a", "scale"});
  if (!r.present()) throw SpecError(doc.file, 1, "missing table [kernel]");
  const std::string family = r.string("family");
  const std::set<std::string> params{"nu", "alpha", "epsilon", "components", "a"};
  const auto only = [&](std::set<std::string> keys) {
    for (const auto& k : params) {
      if (!keys.count(k) && r.find(k)) r.fail(k, "'" + k + "' does not apply to kernel family '" + family + "'");
    }
  };
  const auto univariate = [&] {
    if (dim != 1) r.fail("family", "kernel family '" + family + "' is one-dimensional; use product for dim > 1");
  };
  const std::string default_rule = family == "bumped_cauchy" ? "median_of_squares" : "unit_variance";
  const StandardizationRule rule = anchored(r, "standardization", [&] {
    return parse_rule(r.string("standardization", default_rule));
  });

  KernelShape shape;
  if (family == "gaussian") {
    only({});
    shape = anchored(r, "family", [&] { return KernelShape::spherical_gaussian(dim); });
  } else if (family == "student") {
    only({"nu"});
    shape = anchored(r, "nu", [&] { return KernelShape::spherical_student(r.real("nu"), dim); });
  } else if (family == "laplace" || family == "logistic") {
    only({});
    univariate();
    shape = KernelShape::univariate(family == "laplace" ? UnivariateShape::laplace()
                                                        : UnivariateShape::logistic());
  } else if (family == "exponential_power") {
    only({"alpha"});
    univariate();
    shape = anchored(r, "alpha", [&] {
      return KernelShape::univariate(UnivariateShape::exponential_power(r.real("alpha")));
    });
  } else if (family == "bumped_cauchy") {
    only({"epsilon"});
    univariate();
    shape = anchored(r, "epsilon", [&] {
      return KernelShape::univariate(UnivariateShape::bumped_cauchy(r.real("epsilon")));
    });
  } else if (family == "product") {
    only({"components"});
    const Value& v = r.require("components");
    if (v.type != Value::Type::array) r.fail("components", "'components' must be an array of strings");
    std::vector<UnivariateShape> shapes;
    for (const auto& item : v.items) {
      if (item.type != Value::Type::string) r.fail("components", "'components' must be an array of strings");
      shapes.push_back(parse_component(r, item.s));
    }
    if (static_cast<int>(shapes.size()) != dim) {
      r.fail("components", fmt::format("product kernel has {} components but dim = {}", shapes.size(), dim));
    }
    shape = KernelShape::product(std::move(shapes));
  } else if (family == "exp_of_neg_psi") {
    only({"a"});
    univariate();
    const Reader psi(doc, "kernel.psi", kSkewerKeys);
    if (!psi.present()) r.fail("family", "exp_of_neg_psi needs a [kernel.psi] table");
    const SkewingFunction source = read_skewer(psi, 1, nullptr);
    shape = anchored(r, "a", [&] {
      return KernelShape::univariate(UnivariateShape::exp_of_neg_psi(r.real("a"), source));
    });
  } else {
    r.fail("family", "unknown kernel family '" + family +
                         "' (gaussian, student, laplace, logistic, exponential_power, "
                         "bumped_cauchy, product, exp_of_neg_psi)");
  }
  if (family != "exp_of_neg_psi" && doc.tables.count("kernel.psi")) {
    throw SpecError(doc.file, doc.tables.at("kernel.psi").line,
                    "[kernel.psi] only applies to kernel family 'exp_of_neg_psi'");
  }

  if (r.find("scale")) {
    std::vector<double> scale = r.reals("scale");
    if (scale.size() != shape.base_scale.size()) {
      r.fail("scale", fmt::format("'scale' needs {} entries", shape.base_scale.size()));
    }
    for (double s : scale) {
      if (!(s > 0.0)) r.fail("scale", "'scale' entries must be positive");
    }
    return anchored(r, "scale", [&] { return with_scales(shape, rule, scale); });
  }
  return anchored(r, "family", [&] { return standardize(shape, rule); });
}

ThetaPoint read_theta(const Document& doc, int dim) {
  const Reader r(doc, "theta", {"mu", "sigma_half", "delta"});
  ThetaPoint t = ThetaPoint::standard(dim);
  auto vector = [&](const std::string& key, Eigen::VectorXd& out) {
    if (!r.find(key)) return;
    const auto v = r.reals(key);
    if (static_cast<int>(v.size()) != dim) r.fail(key, fmt::format("'{}' needs {} entries", key, dim));
    out = Eigen::Map<const Eigen::VectorXd>(v.data(), dim);
  };
  vector("mu", t.mu);
  vector("delta", t.delta);
  if (const Value* v = r.find("sigma_half")) {
    if (v->type == Value::Type::integer || v->type == Value::Type::real) {
      if (dim != 1) r.fail("sigma_half", "'sigma_half' must be a matrix (array of rows)");
      t.sigma_half(0, 0) = r.as_real(*v, "sigma_half");
    } else if (v->type == Value::Type::array && static_cast<int>(v->items.size()) == dim) {
      for (int i = 0; i < dim; ++i) {
        const Value& row = v->items[static_cast<std::size_t>(i)];
        if (row.type != Value::Type::array || static_cast<int>(row.items.size()) != dim) {
          r.fail("sigma_half", fmt::format("'sigma_half' must be {0} rows of {0} numbers", dim));
        }
        for (int j = 0; j < dim; ++j) {
          t.sigma_half(i, j) = r.as_real(row.items[static_cast<std::size_t>(j)], "sigma_half");
        }
      }
    } else {
      r.fail("sigma_half", fmt::format("'sigma_half' must be {0} rows of {0} numbers", dim));
    }
  }
  anchored(r, r.find("sigma_half") ? "sigma_half" : "mu", [&] {
    t.validate();
    return 0;
  });
  return t;
}

QuadratureSettings read_quadrature(const Document& doc, int dim) {
  const Reader r(doc, "quadrature", {"level", "abs_tol", "max_intervals", "mc_samples", "seed"});
  QuadratureSettings q;
  if (r.find("level")) {
    const auto v = r.integer("level");
    if (v < 1 || v > 12) r.fail("level", "'level' must be in 1..12");
    q.level = static_cast<int>(v);
  }
  if (r.find("abs_tol")) {
    const double v = r.real("abs_tol");
    if (!(v > 0.0)) r.fail("abs_tol", "'abs_tol' must be positive");
    q.abs_tol = v;
  }
  if (r.find("max_intervals")) {
    const auto v = r.integer("max_intervals");
    if (v < 1) r.fail("max_intervals", "'max_intervals' must be positive");
    q.max_intervals = static_cast<int>(v);
  }
  if (r.find("mc_samples")) {
    const auto v = r.integer("mc_samples");
    if (v < 100) r.fail("mc_samples", "'mc_samples' must be at least 100");
    q.mc_samples = static_cast<std::size_t>(v);
  }
  if (r.find("seed")) {
    const auto v = r.integer("seed");
    if (v < 0) r.fail("seed", "'seed' must be nonnegative");
    q.seed = static_cast<std::uint64_t>(v);
  }
  const int chosen = (q.level ? 1 : 0) + (q.mc_samples ? 1 : 0) + (q.abs_tol || q.max_intervals ? 1 : 0);
  if (chosen > 1) {
    r.fail(q.level ? "level" : "mc_samples",
           "choose one of level (tensor product), mc_samples (Monte Carlo) or abs_tol/max_intervals (adaptive)");
  }
  if ((q.abs_tol || q.max_intervals) && dim != 1) {
    r.fail(q.abs_tol ? "abs_tol" : "max_intervals", "adaptive quadrature is one-dimensional");
  }
  return q;
}

std::string num(double x) {
  std::string s = fmt::format("{:.17g}", x);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string num_array(std::span<const double> xs) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + num(xs[i]);
  return s + "]";
}

std::string shape_param_key(KernelFamily f) {
  switch (f) {
    case KernelFamily::student: return "nu";
    case KernelFamily::exponential_power: return "alpha";
    case KernelFamily::bumped_cauchy: return "epsilon";
    default: return "";
  }
}

void write_skewer_keys(std::string& out, const SkewingFunction& s) {
  out += fmt::format("family = \"{}\"\n", skewer_family_name(s.family()));
  out += fmt::format("outer = \"{}\"\n", s.outer().kind() == OuterCdf::Kind::normal     ? "normal"
                                         : s.outer().kind() == OuterCdf::Kind::logistic ? "logistic"
                                                                                         : "student");
  if (s.outer().kind() == OuterCdf::Kind::student) out += "outer_nu = " + num(s.outer().nu()) + "\n";
  if (s.family() == SkewerFamily::power) out += "alpha = " + num(s.parameter()) + "\n";
  if (s.family() == SkewerFamily::t_type) out += "nu = " + num(s.parameter()) + "\n";
}

}  // namespace

std::optional<quad::Scheme> QuadratureSettings::scheme() const {
  if (level) return quad::TensorProduct{*level};
  if (mc_samples) return quad::MonteCarlo{*mc_samples, seed};
  if (abs_tol || max_intervals) {
    quad::Adaptive1D a;
    if (abs_tol) a.abs_tol = *abs_tol;
    if (max_intervals) a.max_intervals = *max_intervals;
    return a;
  }
  return std::nullopt;
}

std::string QuadratureSettings::describe() const {
  const auto s = scheme();
  return s ? quad::scheme_name(*s) : std::string("default");
}

ModelSpec parse_model_spec(std::string_view text, const std::string& filename) {
  const Document doc = parse_document(text, filename);
  for (const auto& [name, table] : doc.tables) {
    static const std::set<std::string> known{"", "kernel", "kernel.psi", "skewer", "theta", "quadrature"};
    if (!known.count(name)) throw SpecError(filename, table.line, "unknown table [" + name + "]");
  }
  const Reader top(doc, "", {"dim"});
  const long long dim = top.integer("dim");
  if (dim < 1 || dim > 8) top.fail("dim", "'dim' must be in 1..8");
  const int k = static_cast<int>(dim);

  SymmetricKernel kernel = read_kernel(doc, k);
  const Reader sr(doc, "skewer", kSkewerKeys);
  if (!sr.present()) throw SpecError(filename, 1, "missing table [skewer]");
  SkewingFunction skewer = read_skewer(sr, k, &kernel);
  ThetaPoint theta = read_theta(doc, k);
  QuadratureSettings quadrature = read_quadrature(doc, k);
  return ModelSpec{std::move(kernel), std::move(skewer), std::move(theta), quadrature};
}

ModelSpec load_model_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError(path.string(), 0, "cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model_spec(buf.str(), path.string());
}

std::string write_model_spec(const ModelSpec& spec) {
  const SymmetricKernel& kernel = spec.kernel;
  const KernelShape& shape = kernel.shape();
  std::string out = fmt::format("dim = {}\n\n[kernel]\n", kernel.dim());
  const KernelFamily family = kernel.family();
  out += fmt::format("family = \"{}\"\n", family_name(family));
  out += fmt::format("standardization = \"{}\"\n", rule_name(kernel.rule()));
  if (shape.layout == KernelShape::Layout::product) {
    out += "components = [";
    for (std::size_t i = 0; i < shape.components.size(); ++i) {
      const auto& c = shape.components[i];
      if (c.family() == KernelFamily::exp_of_neg_psi) {
        throw CapabilityError("write_model_spec: exp_of_neg_psi product components are not serializable");
      }
      std::string item(family_name(c.family()));
      if (!shape_param_key(c.family()).empty()) item += "(" + num(c.parameter()) + ")";
      out += (i ? ", " : "") + fmt::format("\"{}\"", item);
    }
    out += "]\n";
  } else {
    const UnivariateShape& c = shape.components.at(0);
    const std::string key = shape_param_key(family);
    if (!key.empty()) out += key + " = " + num(c.parameter()) + "\n";
    if (family == KernelFamily::exp_of_neg_psi) out += "a = " + num(c.parameter()) + "\n";
  }
  std::vector<double> scale;
  for (std::size_t i = 0; i < shape.base_scale.size(); ++i) {
    scale.push_back(shape.base_scale[i] * kernel.calibration()[i]);
  }
  out += "scale = " + num_array(scale) + "\n";
  if (family == KernelFamily::exp_of_neg_psi) {
    out += "\n[kernel.psi]\n";
    write_skewer_keys(out, *shape.components.at(0).psi_source());
  }

  out += "\n[skewer]\n";
  if (spec.skewer.family() == SkewerFamily::score_composed) {
    const SymmetricKernel* base = spec.skewer.composed_kernel();
    if (!base || base->description() != kernel.description()) {
      throw CapabilityError("write_model_spec: score_composed skewer must be built from the spec's kernel");
    }
  }
  write_skewer_keys(out, spec.skewer);

  const ThetaPoint& t = spec.theta;
  const int k = t.dim();
  out += "\n[theta]\n";
  out += "mu = " + num_array(std::span<const double>(t.mu.data(), static_cast<std::size_t>(k))) + "\n";
  out += "sigma_half = [";
  for (int i = 0; i < k; ++i) {
    const Eigen::VectorXd row = t.sigma_half.row(i).transpose();
    out += (i ? ", " : "") + num_array(std::span<const double>(row.data(), static_cast<std::size_t>(k)));
  }
  out += "]\n";
  out += "delta = " + num_array(std::span<const double>(t.delta.data(), static_cast<std::size_t>(k))) + "\n";

  const QuadratureSettings& q = spec.quadrature;
  out += "\n[quadrature]\n";
  if (q.level) out += fmt::format("level = {}\n", *q.level);
  if (q.abs_tol) out += "abs_tol = " + num(*q.abs_tol) + "\n";
  if (q.max_intervals) out += fmt::format("max_intervals = {}\n", *q.max_intervals);
  if (q.mc_samples) out += fmt::format("mc_samples = {}\n", *q.mc_samples);
  out += fmt::format("seed = {}\n", q.seed);
  return out;
}

}  // namespace skewinfo
