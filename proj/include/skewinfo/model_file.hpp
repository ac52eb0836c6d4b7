#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "skewinfo/density.hpp"
#include "skewinfo/errors.hpp"
#include "skewinfo/quad.hpp"

namespace skewinfo {

/// Parse or validation failure in a model spec; the message reads
/// "file:line: detail".
class SpecError : public InputError {
 public:
  SpecError(const std::string& file, int line, const std::string& detail)
      : InputError(file + ":" + std::to_string(line) + ": " + detail), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct QuadratureSettings {
  std::optional<int> level;
  std::optional<double> abs_tol;
  std::optional<int> max_intervals;
  std::optional<std::size_t> mc_samples;
  std::uint64_t seed = 1;

  /// The scheme implied by the overrides, or none for the defaults.
  std::optional<quad::Scheme> scheme() const;
  /// Short human-readable form for report and CSV headers.
  std::string describe() const;
};

struct ModelSpec {
  SymmetricKernel kernel;
  SkewingFunction skewer;
  ThetaPoint theta;
  QuadratureSettings quadrature;

  int dim() const { return kernel.dim(); }
  SkewModel model() const { return SkewModel(kernel, skewer, theta); }
};

ModelSpec parse_model_spec(std::string_view text, const std::string& filename = "<spec>");
ModelSpec load_model_spec(const std::filesystem::path& path);

/// Serializes a spec that parse_model_spec reads back to the same model.
std::string write_model_spec(const ModelSpec& spec);

}  // namespace skewinfo
