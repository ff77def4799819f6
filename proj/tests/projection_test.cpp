#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "energetext/common.hpp"
#include "energetext/io.hpp"
#include "energetext/projection.hpp"
#include "energetext/rng.hpp"
#include "oracles.hpp"

using namespace energetext;

namespace {

// Three Gaussian blobs in 10-D.
std::vector<double> blobs(std::size_t per, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < per; ++i)
      for (std::size_t k = 0; k < d; ++k) x.push_back(rng.normal(k == c ? 8.0 : 0.0, 1.0));
  return x;
}

std::vector<std::string> labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("p" + std::to_string(i));
  return out;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_SUITE("projection") {
  TEST_CASE("conditional rows hit the target perplexity") {
    const std::size_t n = 45, d = 10;
    const auto x = blobs(15, d, 1);
    const auto p = conditional_probabilities(x, n, d, 5.0);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0, h = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double v = p[i * n + j];
        if (i == j) CHECK(v == 0.0);
        row += v;
        if (v > 0.0) h -= v * std::log2(v);
      }
      CHECK(std::abs(row - 1.0) < 1e-9);
      CHECK(std::abs(std::pow(2.0, h) - 5.0) < 1e-3);
    }
    const auto sym = symmetrize(p, n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += sym[i * n + j];
        CHECK(sym[i * n + j] == sym[j * n + i]);
      }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }

  TEST_CASE("two-point gradient vanishes") {
    const std::vector<double> p{0.0, 0.5, 0.5, 0.0};
    for (double gap : {0.1, 1.0, 7.5}) {
      const auto g = tsne_gradient(p, {-gap / 2, 0.0, gap / 2, 0.0}, 2);
      for (double v : g) CHECK(std::abs(v) < 1e-12);
    }
  }

  TEST_CASE("gradient matches central differences of the divergence") {
    const std::size_t n = 12, d = 4;
    Rng rng(3);
    std::vector<double> x(n * d), y(2 * n);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    const auto p = symmetrize(conditional_probabilities(x, n, d, 3.0), n);
    const auto g = tsne_gradient(p, y, n);
    for (std::size_t k = 0; k < y.size(); ++k) {
      auto up = y, down = y;
      up[k] += 1e-6;
      down[k] -= 1e-6;
      const double numeric = (kl_divergence(p, up, n) - kl_divergence(p, down, n)) / 2e-6;
      CHECK(std::abs(numeric - g[k]) < 1e-6 * std::max(1.0, std::abs(g[k])));
    }
  }

  TEST_CASE("full run descends and keeps duplicates together") {
    const std::size_t d = 10;
    auto x = blobs(15, d, 2);
    x.insert(x.end(), x.begin() + 3 * static_cast<std::ptrdiff_t>(d), x.begin() + 4 * static_cast<std::ptrdiff_t>(d));
    const std::size_t n = 46;
    TsneConfig c;
    c.iterations = 500;
    const auto proj = tsne_project(x, d, labels(n), c);
    REQUIRE(proj.coords.size() == 2 * n);
    for (double v : proj.coords) CHECK(std::isfinite(v));
    CHECK(proj.final_kl < proj.initial_kl);
    std::vector<double> dists;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) dists.push_back(std::hypot(proj.x(i) - proj.x(j), proj.y(i) - proj.y(j)));
    std::sort(dists.begin(), dists.end());
    const double p10 = dists[dists.size() / 10];
    CHECK(std::hypot(proj.x(3) - proj.x(45), proj.y(3) - proj.y(45)) < p10);

    const auto again = tsne_project(x, d, labels(n), c);
    CHECK(again.coords == proj.coords);
  }

  TEST_CASE("config guards") {
    TsneConfig c;
    CHECK_THROWS_AS(c.validate(3), Error);
    CHECK_THROWS_AS(c.validate(16), Error);
    CHECK_NOTHROW(c.validate(17));
    CHECK_THROWS_AS(tsne_project(std::vector<double>(10 * 2, 0.0), 2, labels(10), c), Error);
  }

  TEST_CASE("scatter export") {
    Projection p{{"rdx", "hmx", "a<b"}, {0.0, 0.0, 1.0, 2.0, -1.0, 0.5}, 1.0, 0.5};
    const auto csv = projection_csv(p);
    CHECK(csv.rfind("label,x,y\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    const auto svg = projection_svg(p, {"hmx"});
    CHECK(svg.find("viewBox=\"0 0 1000 1000\"") != std::string::npos);
    CHECK(count(svg, "<text") == 3);
    CHECK(count(svg, "font-weight=\"bold\"") == 1);
    CHECK(svg.find("a&lt;b") != std::string::npos);

    oracle::TempDir dir("scatter");
    export_scatter(p, dir / "plot", {"hmx"});
    const auto first = io::read_file(dir / "plot.csv");
    export_scatter(p, dir / "plot", {"hmx"});
    CHECK(io::read_file(dir / "plot.csv") == first);
    CHECK(first == csv);
    io::write_file(dir / "blocker", "");
    CHECK_THROWS_AS(export_scatter(p, dir / "blocker" / "plot"), Error);
  }
}
