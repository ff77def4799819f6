#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace energetext {

struct TsneConfig {
  double perplexity = 5.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;  // iteration at which final_momentum takes over
  double exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  std::uint64_t seed = 42;

  /// Also checks perplexity < (n - 1) / 3.
  void validate(std::size_t n) const;
};

struct Projection {
  std::vector<std::string> ids;
  std::vector<double> coords;  // N x 2 row-major
  double initial_kl = 0.0;
  double final_kl = 0.0;

  double x(std::size_t i) const { return coords[2 * i]; }
  double y(std::size_t i) const { return coords[2 * i + 1]; }
};

/// Row-stochastic P_{j|i} (N x N, zero diagonal) from squared Euclidean
/// distances, each row's Gaussian bandwidth bisected until its Shannon entropy
/// is within 1e-5 nats of log(perplexity).
std::vector<double> conditional_probabilities(const std::vector<double>& vectors, std::size_t n, std::size_t d,
                                              double perplexity);

/// (P_{j|i} + P_{i|j}) / 2N.
std::vector<double> symmetrize(const std::vector<double>& conditional, std::size_t n);

/// KL(P || Q) for 2-D coordinates under the Student-t kernel.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& coords, std::size_t n);

/// dKL/dy (N x 2).
std::vector<double> tsne_gradient(const std::vector<double>& p, const std::vector<double>& coords, std::size_t n);

/// Exact t-SNE. `vectors` is N x d row-major.
Projection tsne_project(const std::vector<double>& vectors, std::size_t d, const std::vector<std::string>& labels,
                        const TsneConfig& config);

/// CSV (label,x,y).
std::string projection_csv(const Projection& p);
/// 1000 x 1000 viewBox, 10-unit margins, one <text> per label.
std::string projection_svg(const Projection& p, const std::set<std::string>& highlight);

/// Writes stem.csv and stem.svg.
void export_scatter(const Projection& p, const std::filesystem::path& stem, const std::set<std::string>& highlight = {});

}  // namespace energetext
