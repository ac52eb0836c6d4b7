#include "skewinfo/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "skewinfo/errors.hpp"
#include "skewinfo/expmatch.hpp"
#include "skewinfo/fisher.hpp"
#include "skewinfo/mle.hpp"
#include "skewinfo/model_file.hpp"
#include "skewinfo/parallel.hpp"

namespace skewinfo::cli {

namespace {

std::string g17(double x) { return fmt::format("{:.17g}", x); }

std::string row_text(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt::format("{:.8g}", v[i] + 0.0);
  return "[" + s + "]";
}

std::string csv_header(std::uint64_t seed, const ModelSpec& spec) {
  return fmt::format("# skewinfo {} seed={} quadrature={} kernel={} skewer={}\n", SKEWINFO_VERSION,
                     seed, spec.quadrature.describe(), spec.kernel.description(),
                     spec.skewer.description());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write '" + path + "'");
  f.precision(17);
  return f;
}

ThetaPoint at_symmetry(ThetaPoint t) {
  t.delta.setZero();
  return t;
}

void print_theta(std::ostream& out, const ThetaPoint& t) {
  out << "  mu: " << row_text(t.mu) << "\n";
  out << "  sigma_half: [";
  for (int i = 0; i < t.dim(); ++i) out << (i ? ", " : "") << row_text(t.sigma_half.row(i).transpose());
  out << "]\n";
  out << "  delta: " << row_text(t.delta) << "\n";
}

void print_matrix(std::ostream& out, const Eigen::MatrixXd& m, const std::vector<std::string>& labels) {
  out << fmt::format("  {:<11}", "");
  for (const auto& l : labels) out << fmt::format("{:>16}", l);
  out << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << fmt::format("  {:<11}", labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << fmt::format("{:>16.9g}", m(i, j));
    out << "\n";
  }
}

void print_rank(std::ostream& out, const RankReport& r) {
  out << "rank: " << r.rank << "\n";
  out << "nullity: " << r.nullity << "\n";
  out << "dimension: " << r.dim << "\n";
  out << "singular values:";
  for (double s : r.singular_values) out << " " << fmt::format("{:.6g}", s);
  out << "\n";
  out << "tolerance: " << fmt::format("{:.6g}", r.tolerance) << "\n";
  out << "indeterminate: " << (r.indeterminate ? "yes" : "no") << "\n";
  for (Eigen::Index j = 0; j < r.null_basis.cols(); ++j) {
    out << "null vector " << j + 1 << ": " << row_text(r.null_basis.col(j)) << "\n";
  }
}

int cmd_info(const ModelSpec& spec, bool full, const std::string& csv, std::ostream& out) {
  const SkewModel model(spec.kernel, spec.skewer, at_symmetry(spec.theta));
  const InfoKind kind = full ? InfoKind::full : InfoKind::reduced;
  const InfoMatrix info = information(model, kind, spec.quadrature.scheme());
  out << "kernel: " << spec.kernel.description() << "\n";
  out << "skewer: " << spec.skewer.description() << "\n";
  out << "information: " << (full ? "full" : "reduced") << " " << info.size() << "x" << info.size()
      << " at delta = 0\n";
  print_theta(out, info.theta0);
  out << "scheme: " << info.scheme << "\n";
  out << "assumptions:\n";
  for (const auto& a : info.assumptions) {
    out << fmt::format("  {} {}: {} (value {:.6g}, last relative increment {:.3g})\n", a.name,
                       a.quantity, a.finite ? "finite" : "divergent", a.value,
                       a.last_relative_increment);
  }
  const auto labels = info.labels();
  out << "gamma:\n";
  print_matrix(out, info.gamma, labels);
  out << "error:\n";
  print_matrix(out, info.err, labels);
  const RankReport rank = rank_diagnosis(info);
  print_rank(out, rank);
  if (!full && rank.nullity > 0) {
    const NullRelation rel = null_relation(rank, info.theta0.sigma_half);
    for (Eigen::Index j = 0; j < rel.V.cols(); ++j) {
      out << "relation " << j + 1 << ": V' phi_f = W' psi with V = " << row_text(rel.V.col(j))
          << ", W = " << row_text(rel.W.col(j)) << "\n";
    }
  }
  if (!csv.empty()) {
    auto f = open_out(csv);
    f << csv_header(spec.quadrature.seed, spec);
    f << "row,col,gamma,error\n";
    for (int i = 0; i < info.size(); ++i) {
      for (int j = 0; j < info.size(); ++j) {
        f << labels[static_cast<std::size_t>(i)] << "," << labels[static_cast<std::size_t>(j)] << ","
          << g17(info.gamma(i, j)) << "," << g17(info.err(i, j)) << "\n";
      }
    }
  }
  return kExitOk;
}

int cmd_predict(const ModelSpec& spec, std::ostream& out) {
  const SingularityPrediction p = predict_singularity(spec.kernel, spec.skewer);
  out << "kernel: " << spec.kernel.description() << "\n";
  out << "skewer: " << spec.skewer.description() << "\n";
  out << "prediction: " << p.verdict() << "\n";
  out << "m: " << p.m << "\n";
  if (p.singular()) {
    out << "gram residual: " << fmt::format("{:.3g}", p.residual) << "\n";
    for (Eigen::Index j = 0; j < p.V.cols(); ++j) {
      out << "relation " << j + 1 << ": V = " << row_text(p.V.col(j)) << ", W = " << row_text(p.W.col(j))
          << "\n";
    }
  }
  if (p.a) out << "a: " << g17(*p.a) << "\n";
  if (p.log_match_sup) {
    out << "log match sup: " << fmt::format("{:.3g}", *p.log_match_sup) << (p.matched ? " (matched)" : "")
        << "\n";
  }
  const ThetaPoint theta0 = at_symmetry(spec.theta);
  const InfoMatrix info = information(SkewModel(spec.kernel, spec.skewer, theta0), InfoKind::reduced,
                                      spec.quadrature.scheme());
  const RankReport rank = rank_diagnosis(info);
  const VerificationRecord v = verify_proposition(spec.kernel, spec.skewer, rank, theta0.sigma_half);
  out << "numeric nullity: " << v.m_numeric << "\n";
  out << "rank: " << rank.rank << "\n";
  for (const auto& c : v.fits) {
    std::string ctx;
    for (double y : c.context) ctx += (ctx.empty() ? "" : ",") + fmt::format("{:g}", y);
    out << fmt::format("context ({}): a = {:.10g}, residual = {:.3g}\n", ctx, c.a, c.residual);
  }
  if (!v.fits.empty()) {
    out << fmt::format("max fit residual: {:.3g}\na spread: {:.3g}\n", v.max_fit_residual, v.a_spread);
  }
  out << "verification: " << (v.passed ? "passed" : "FAILED") << "\n";
  if (!v.message.empty()) out << "note: " << v.message << "\n";
  return v.passed ? kExitOk : kExitVerification;
}

int cmd_match(const ModelSpec& spec, const std::string& path, std::ostream& out) {
  const StandardizationRule rule = spec.kernel.rule();
  out << "skewer: " << spec.skewer.description() << "\n";
  if (spec.dim() == 1) {
    const NaturalSpace ns = natural_space(spec.skewer);
    out << "natural space: " << ns.pattern() << " (" << ns.divergent_count() << " of " << ns.points.size()
        << " probed a divergent)\n";
    for (double b : ns.boundaries) out << "boundary: " << g17(b) << "\n";
    const std::optional<double> a = solve_a(spec.skewer, rule);
    out << "a_pi (" << rule_name(rule) << "): " << (a ? g17(*a) : std::string("none")) << "\n";
  }
  std::optional<SymmetricKernel> found;
  try {
    found = construct_degenerate(spec.skewer, rule);
  } catch (const CapabilityError& e) {
    out << "degenerate kernel: none\n";
    out << "note: " << e.what() << "\n";
    return kExitOk;
  }
  const SymmetricKernel& kernel = *found;
  out << "degenerate kernel: " << kernel.description() << "\n";
  ModelSpec matched{kernel, spec.skewer, spec.theta, spec.quadrature};
  if (spec.skewer.family() == SkewerFamily::score_composed) {
    matched.skewer = SkewingFunction::score_composed(kernel, spec.skewer.outer());
  }
  const std::string text = write_model_spec(matched);
  if (path.empty()) {
    out << text;
  } else {
    auto f = open_out(path);
    f << "# matched kernel for " << spec.skewer.description() << "\n" << text;
    out << "wrote " << path << "\n";
  }
  return kExitOk;
}

void write_svg(const std::string& path, const std::vector<double>& x,
               const std::vector<std::vector<double>>& cols, const std::vector<double>& deltas) {
  double ymax = 0.0;
  for (const auto& c : cols) ymax = std::max(ymax, *std::max_element(c.begin(), c.end()));
  if (!(ymax > 0.0)) ymax = 1.0;
  ymax *= 1.05;
  const double left = 60, right = 770, top = 30, bottom = 560;
  const double x0 = x.front(), x1 = x.back();
  auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * (right - left); };
  auto py = [&](double v) { return bottom - v / ymax * (bottom - top); };
  auto f = open_out(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n";
  f << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
  f << fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                   left, top, right - left, bottom - top);
  for (int t = -4; t <= 4; ++t) {
    if (t < x0 || t > x1) continue;
    f << fmt::format("<text x=\"{:.1f}\" y=\"580\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                     px(t), t);
  }
  const std::size_t n = cols.size();
  for (std::size_t c = 0; c < n; ++c) {
    const int shade = n > 1 ? static_cast<int>(20 + 180.0 * static_cast<double>(c) / static_cast<double>(n - 1)) : 20;
    const std::string colour = fmt::format("#{0:02x}{0:02x}{0:02x}", shade);
    f << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << colour << "\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
      f << (i ? " " : "") << fmt::format("{:.2f},{:.2f}", px(x[i]), py(cols[c][i]));
    }
    f << "\"/>\n";
    f << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{}\">delta = {:g}</text>\n", right - 100,
                     top + 18 * (c + 1), colour, deltas[c]);
  }
  f << "</svg>\n";
}

int cmd_plot(const ModelSpec& spec, const std::vector<double>& deltas, const std::string& path,
             const std::string& svg, int axis, std::ostream& out) {
  if (deltas.empty()) throw InputError("plot: --deltas is empty");
  if (axis < 1 || axis > spec.dim()) throw InputError("plot: --axis out of range");
  constexpr int kPoints = 401;
  std::vector<double> x;
  std::vector<std::vector<double>> cols;
  for (double d : deltas) {
    if (!std::isfinite(d)) throw InputError("plot: non-finite delta");
    ThetaPoint t = spec.theta;
    t.delta.setConstant(d);
    const CurveTable c = curve(SkewModel(spec.kernel, spec.skewer, t), axis - 1, -4.0, 4.0, kPoints);
    x = c.x;
    cols.push_back(c.pdf);
  }
  auto f = open_out(path);
  f << csv_header(spec.quadrature.seed, spec);
  f << "x";
  for (double d : deltas) f << ",pdf_delta=" << fmt::format("{:g}", d);
  f << "\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    f << g17(x[i]);
    for (const auto& c : cols) f << "," << g17(c[i]);
    f << "\n";
  }
  out << "wrote " << path << " (" << deltas.size() << " curves, " << kPoints << " points)\n";
  if (!svg.empty()) {
    write_svg(svg, x, cols, deltas);
    out << "wrote " << svg << "\n";
  }
  return kExitOk;
}

int cmd_sample(const ModelSpec& spec, std::size_t n, std::uint64_t seed, const std::string& path,
               std::ostream& out) {
  const std::vector<double> xs = spec.model().sample(n, seed);
  const auto k = static_cast<std::size_t>(spec.dim());
  auto f = open_out(path);
  f << csv_header(seed, spec);
  for (std::size_t j = 0; j < k; ++j) f << (j ? "," : "") << "x" << j + 1;
  f << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) f << (j ? "," : "") << g17(xs[i * k + j]);
    f << "\n";
  }
  out << "wrote " << n << " draws to " << path << "\n";
  return kExitOk;
}

std::vector<double> read_data(const std::string& path, int k) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::vector<double> data;
  std::string line;
  int lineno = 0;
  bool seen_row = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    std::vector<double> row;
    bool numeric = true;
    for (const auto& s : fields) {
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (s.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
        row.push_back(v);
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (!seen_row) {
        seen_row = true;  // header line
        continue;
      }
      throw InputError(fmt::format("{}:{}: non-numeric field", path, lineno));
    }
    seen_row = true;
    if (static_cast<int>(row.size()) != k) {
      throw InputError(fmt::format("{}:{}: expected {} columns, got {}", path, lineno, k, row.size()));
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return data;
}

int cmd_fit(const ModelSpec& spec, const std::string& path, std::ostream& out) {
  const std::vector<double> data = read_data(path, spec.dim());
  const FitResult r = fit(spec.kernel, spec.skewer, data);
  out << "kernel: " << spec.kernel.description() << "\n";
  out << "skewer: " << spec.skewer.description() << "\n";
  out << "n: " << data.size() / static_cast<std::size_t>(spec.dim()) << "\n";
  out << "theta_hat:\n";
  print_theta(out, r.theta_hat);
  out << "loglik: " << g17(r.loglik) << "\n";
  out << "iterations: " << r.iterations << "\n";
  out << "converged: " << (r.converged ? "yes" : "no") << "\n";
  if (r.curvature_singular) {
    out << "stderr proxy: unavailable (singular curvature at the fit)\n";
  } else {
    out << "stderr proxy:";
    for (double s : r.stderr_proxy) out << " " << fmt::format("{:.6g}", s);
    out << "\n";
  }
  return kExitOk;
}

int cmd_experiment(const ModelSpec& spec, std::size_t n, std::size_t reps, std::uint64_t seed,
                   const std::string& path, std::ostream& out) {
  const ExperimentSummary s =
      symmetry_experiment(spec.kernel, spec.skewer, at_symmetry(spec.theta), n, reps, seed);
  if (!path.empty()) {
    auto f = open_out(path);
    f << csv_header(seed, spec);
    f << "replicate,delta_hat,failed\n";
    for (std::size_t r = 0; r < s.replicates; ++r) {
      f << r << "," << g17(s.delta_hats[r]) << "," << (s.failed[r] ? 1 : 0) << "\n";
    }
  }
  const auto failures = std::count(s.failed.begin(), s.failed.end(), true);
  out << "kernel: " << spec.kernel.description() << "\n";
  out << "skewer: " << spec.skewer.description() << "\n";
  out << "replicates: " << s.replicates << "\n";
  out << "n per replicate: " << s.n_per_replicate << "\n";
  out << "seed: " << s.seed << "\n";
  out << "failed fits: " << failures << "\n";
  out << "bimodality coefficient: " << fmt::format("{:.6f}", s.bimodality_coefficient) << " (uniform reference 5/9 = 0.555556)\n";
  out << "sign split: " << fmt::format("{:.4f}", s.sign_split) << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  apply_thread_env();
  CLI::App app{"Fisher information and singularity diagnostics for skew-symmetric models", "skewinfo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SKEWINFO_VERSION);

  std::string spec_path;
  bool full = false;
  std::string csv, out_path, svg, data_path;
  std::vector<double> deltas{0.0, 0.5, 2.0, 6.0};
  int axis = 1;
  std::size_t n = 1000, reps = 500;
  std::optional<std::uint64_t> seed;

  auto* info = app.add_subcommand("info", "Fisher information at delta = 0 with its rank report");
  info->add_option("spec", spec_path, "model spec file")->required();
  info->add_flag("--full", full, "full (location, scatter, skewness) matrix");
  info->add_option("--csv", csv, "also write the matrix as CSV");

  auto* predict = app.add_subcommand("predict", "analytic singularity prediction and its verification");
  predict->add_option("spec", spec_path, "model spec file")->required();

  auto* match = app.add_subcommand("match", "natural space, a_pi and the degenerate kernel");
  match->add_option("spec", spec_path, "model spec file")->required();
  match->add_option("--out", out_path, "write the matched spec here instead of stdout");

  auto* plot = app.add_subcommand("plot", "density curves for several delta values");
  plot->add_option("spec", spec_path, "model spec file")->required();
  plot->add_option("--deltas", deltas, "comma-separated delta values")->delimiter(',');
  plot->add_option("--out", out_path, "CSV output")->required();
  plot->add_option("--svg", svg, "SVG output");
  plot->add_option("--axis", axis, "coordinate to vary (1-based)");

  auto* sample = app.add_subcommand("sample", "draw from the model at theta");
  sample->add_option("spec", spec_path, "model spec file")->required();
  sample->add_option("-n", n, "number of draws");
  sample->add_option("--seed", seed, "seed (default: quadrature.seed)");
  sample->add_option("--out", out_path, "CSV output")->required();

  auto* fitc = app.add_subcommand("fit", "maximum likelihood fit");
  fitc->add_option("spec", spec_path, "model spec file")->required();
  fitc->add_option("--data", data_path, "CSV data, one point per row")->required();

  auto* exper = app.add_subcommand("experiment", "repeated fits at delta = 0");
  exper->add_option("spec", spec_path, "model spec file")->required();
  exper->add_option("-n", n, "observations per replicate");
  exper->add_option("-R", reps, "replicates");
  exper->add_option("--seed", seed, "seed (default: quadrature.seed)");
  exper->add_option("--out", out_path, "CSV of delta_hat per replicate");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitSpec;
  }

  try {
    const ModelSpec spec = load_model_spec(spec_path);
    const std::uint64_t s = seed.value_or(spec.quadrature.seed);
    if (*info) return cmd_info(spec, full, csv, out);
    if (*predict) return cmd_predict(spec, out);
    if (*match) return cmd_match(spec, out_path, out);
    if (*plot) return cmd_plot(spec, deltas, out_path, svg, axis, out);
    if (*sample) return cmd_sample(spec, n, s, out_path, out);
    if (*fitc) return cmd_fit(spec, data_path, out);
    if (*exper) return cmd_experiment(spec, n, reps, s, out_path, out);
  } catch (const AssumptionViolation& e) {
    err << "assumption violation: " << e.what() << "\n";
    return kExitAssumption;
  } catch (const SpecError& e) {
    err << e.what() << "\n";
    return kExitSpec;
  } catch (const CapabilityError& e) {
    err << e.what() << "\n";
    return kExitSpec;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitSpec;
  }
  return kExitSpec;
}

}  // namespace skewinfo::cli
