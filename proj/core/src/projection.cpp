#include "energetext/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "energetext/common.hpp"
#include "energetext/io.hpp"
#include "energetext/rng.hpp"

namespace energetext {

void TsneConfig::validate(std::size_t n) const {
  require(n >= 4, "t-SNE needs at least 4 points");
  require(perplexity > 0.0, "perplexity must be positive");
  if (perplexity >= static_cast<double>(n - 1) / 3.0)
    fail(ErrorKind::InvalidArgument, "perplexity " + io::format_double(perplexity) + " is too large for " +
                                         std::to_string(n) + " points (must be below (n-1)/3)");
  require(iterations >= 1, "t-SNE needs at least one iteration");
  require(learning_rate > 0.0, "learning rate must be positive");
  require(exaggeration >= 1.0, "early exaggeration must be at least 1");
}

namespace {

std::vector<double> squared_distances(const std::vector<double>& x, std::size_t n, std::size_t d) {
  std::vector<double> out(n * n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[i * d + k] - x[j * d + k];
        s += diff * diff;
      }
      out[i * n + j] = s;
    }
  });
  return out;
}

// Unnormalized Student-t kernel (1 + |yi - yj|^2)^-1, zero diagonal.
std::vector<double> student_kernel(const std::vector<double>& y, std::size_t n, double& total) {
  std::vector<double> num(n * n, 0.0);
  total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
      num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
      total += num[i * n + j];
    }
  return num;
}

}  // namespace

std::vector<double> conditional_probabilities(const std::vector<double>& vectors, std::size_t n, std::size_t d,
                                              double perplexity) {
  require(vectors.size() == n * d, "vector matrix has the wrong size");
  require(n >= 2 && perplexity > 0.0, "conditional probabilities need two points and a positive perplexity");
  for (double v : vectors)
    if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "t-SNE input contains non-finite values");
  const auto dist = squared_distances(vectors, n, d);
  const double target = std::log(perplexity);
  constexpr double kEntropyTol = 1e-5;
  constexpr int kMaxSteps = 200;

  std::vector<double> p(n * n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, dist[i * n + j]);
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double* row = &p[i * n];
    for (int step = 0; step < kMaxSteps; ++step) {
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double shifted = dist[i * n + j] - dmin;
        row[j] = std::exp(-beta * shifted);
        sum += row[j];
        weighted += shifted * row[j];
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < kEntropyTol) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
  });
  return p;
}

std::vector<double> symmetrize(const std::vector<double>& conditional, std::size_t n) {
  require(conditional.size() == n * n, "probability matrix has the wrong size");
  std::vector<double> p(n * n, 0.0);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) p[i * n + j] = (conditional[i * n + j] + conditional[j * n + i]) * scale;
  return p;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& coords, std::size_t n) {
  double total = 0.0;
  const auto num = student_kernel(coords, n, total);
  double kl = 0.0;
  for (std::size_t k = 0; k < n * n; ++k)
    if (p[k] > 0.0) kl += p[k] * std::log(p[k] / (num[k] / total));
  return kl;
}

std::vector<double> tsne_gradient(const std::vector<double>& p, const std::vector<double>& coords, std::size_t n) {
  double total = 0.0;
  const auto num = student_kernel(coords, n, total);
  std::vector<double> g(2 * n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    double gx = 0.0, gy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = (p[i * n + j] - num[i * n + j] / total) * num[i * n + j];
      gx += w * (coords[2 * i] - coords[2 * j]);
      gy += w * (coords[2 * i + 1] - coords[2 * j + 1]);
    }
    g[2 * i] = 4.0 * gx;
    g[2 * i + 1] = 4.0 * gy;
  });
  return g;
}

Projection tsne_project(const std::vector<double>& vectors, std::size_t d, const std::vector<std::string>& labels,
                        const TsneConfig& config) {
  const std::size_t n = labels.size();
  config.validate(n);
  require(d >= 1 && vectors.size() == n * d, "vector matrix does not match the label count");
  const auto p = symmetrize(conditional_probabilities(vectors, n, d, config.perplexity), n);

  Rng rng(derive_seed(config.seed, "tsne:init"));
  std::vector<double> y(2 * n);
  for (auto& v : y) v = rng.normal() * 1e-4;

  Projection out;
  out.ids = labels;
  out.initial_kl = kl_divergence(p, y, n);

  std::vector<double> update(2 * n, 0.0), gains(2 * n, 1.0), pe(p.size());
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const bool exaggerate = it < config.exaggeration_iterations;
    for (std::size_t k = 0; k < p.size(); ++k) pe[k] = exaggerate ? p[k] * config.exaggeration : p[k];
    const auto g = tsne_gradient(pe, y, n);
    const double momentum = it < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    for (std::size_t k = 0; k < y.size(); ++k) {
      gains[k] = (g[k] > 0.0) != (update[k] > 0.0) ? gains[k] + 0.2 : gains[k] * 0.8;
      gains[k] = std::max(gains[k], 0.01);
      update[k] = momentum * update[k] - config.learning_rate * gains[k] * g[k];
      y[k] += update[k];
    }
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cx += y[2 * i];
      cy += y[2 * i + 1];
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= cx;
      y[2 * i + 1] -= cy;
    }
  }
  for (double v : y)
    if (!std::isfinite(v)) fail(ErrorKind::Numeric, "t-SNE diverged to non-finite coordinates");
  out.coords = std::move(y);
  out.final_kl = kl_divergence(p, out.coords, n);
  return out;
}

std::string projection_csv(const Projection& p) {
  std::ostringstream out;
  out << "label,x,y\n";
  for (std::size_t i = 0; i < p.ids.size(); ++i)
    out << io::csv_escape(p.ids[i]) << ',' << io::format_double(p.x(i)) << ',' << io::format_double(p.y(i)) << '\n';
  return out.str();
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string projection_svg(const Projection& p, const std::set<std::string>& highlight) {
  constexpr double kSize = 1000.0, kMargin = 10.0;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    x0 = std::min(x0, p.x(i));
    x1 = std::max(x1, p.x(i));
    y0 = std::min(y0, p.y(i));
    y1 = std::max(y1, p.y(i));
  }
  const double span = std::max({x1 - x0, y1 - y0, 1e-12});
  const double scale = (kSize - 2.0 * kMargin) / span;
  auto sx = [&](double v) { return kMargin + (v - x0) * scale; };
  auto sy = [&](double v) { return kSize - kMargin - (v - y0) * scale; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"1000\" viewBox=\"0 0 1000 1000\">\n";
  out << "<rect width=\"1000\" height=\"1000\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    const bool hl = highlight.count(p.ids[i]) > 0;
    const auto cx = io::format_double(sx(p.x(i))), cy = io::format_double(sy(p.y(i)));
    out << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << (hl ? 4 : 2) << "\" fill=\""
        << (hl ? "#c0392b" : "#34495e") << "\"/>\n";
    out << "<text x=\"" << cx << "\" y=\"" << cy << "\" font-size=\"" << (hl ? 14 : 10) << "\" fill=\""
        << (hl ? "#c0392b" : "#34495e") << '"' << (hl ? " font-weight=\"bold\"" : "") << '>' << xml_escape(p.ids[i])
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void export_scatter(const Projection& p, const std::filesystem::path& stem, const std::set<std::string>& highlight) {
  require(!p.ids.empty() && p.coords.size() == 2 * p.ids.size(), "projection is empty or malformed");
  auto csv = stem, svg = stem;
  csv += ".csv";
  svg += ".svg";
  io::write_file(csv, projection_csv(p));
  io::write_file(svg, projection_svg(p, highlight));
}

}  // namespace energetext
