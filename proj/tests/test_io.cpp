#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "mixreg/io.hpp"
#include "test_util.hpp"

using namespace mixreg;
using testutil::bitwise_equal;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

int count_occurrences(const std::string& text, const std::string& needle) {
  int n = 0;
  for (size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

MetricCurve demo_curve(const std::string& metric, const std::string& setting, int k0) {
  MetricCurve c;
  c.metric = metric;
  c.setting = setting;
  for (int k = k0; k < k0 + 3; ++k) {
    c.k_values.push_back(k);
    c.means.push_back(0.1 / k + 1.0 / 3.0);
    c.stderrs.push_back(0.001 * k);
    c.counts.push_back(100 + k);
  }
  return c;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("seventeen significant digits round-trip any double") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -1.5, 0.0, 123456.789012345678,
                   0.05000000000000001}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("curve CSV round-trips to full precision") {
  TempFile f("test_curves.csv");
  std::vector<MetricCurve> curves{demo_curve("normalized_mse", "posterior_mean", 1),
                                  demo_curve("sq_distance", "circuit vs argmin", 4)};
  write_curves_csv(f.path, curves);

  std::string text = slurp(f.path);
  CHECK(text.rfind("metric,setting,k,mean,stderr,n\n", 0) == 0);

  std::vector<MetricCurve> back = read_curves_csv(f.path);
  REQUIRE(back.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(back[i].metric == curves[i].metric);
    CHECK(back[i].setting == curves[i].setting);
    CHECK(back[i].k_values == curves[i].k_values);
    CHECK(back[i].counts == curves[i].counts);
    for (size_t j = 0; j < back[i].means.size(); ++j) {
      CHECK(back[i].means[j] == curves[i].means[j]);
      CHECK(back[i].stderrs[j] == curves[i].stderrs[j]);
    }
  }

  CHECK_THROWS(write_curves_csv(f.path, {}));
  MetricCurve empty;
  empty.metric = "normalized_mse";
  empty.setting = "x";
  CHECK_THROWS(write_curves_csv(f.path, {empty}));
}

TEST_CASE("curve JSONL carries one record per point") {
  TempFile f("test_curves.jsonl");
  std::vector<MetricCurve> curves{demo_curve("normalized_mse", "ols", 1)};
  write_curves_jsonl(f.path, curves);

  std::ifstream in(f.path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    auto parsed = nlohmann::json::parse(line);
    CHECK(parsed["metric"] == "normalized_mse");
    CHECK(parsed["setting"] == "ols");
    CHECK(parsed["k"] == curves[0].k_values[rows]);
    CHECK(double(parsed["mean"]) == curves[0].means[rows]);
    CHECK(double(parsed["stderr"]) == curves[0].stderrs[rows]);
    CHECK(long(parsed["n"]) == curves[0].counts[rows]);
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("SVG has one polyline per curve and one band each") {
  TempFile f("test_curves.svg");
  std::vector<MetricCurve> curves{demo_curve("normalized_mse", "posterior_mean", 1),
                                  demo_curve("normalized_mse", "argmin", 1)};
  write_curves_svg(f.path, curves);
  std::string svg = slurp(f.path);
  CHECK(count_occurrences(svg, "<polyline") == 2);
  CHECK(count_occurrences(svg, "class=\"band\"") == 2);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("posterior_mean") != std::string::npos);
  CHECK(svg.find("argmin") != std::string::npos);
}

TEST_CASE("prompt JSONL round-trips") {
  Rng rng(1);
  MixtureSpec spec = sample_spec(2, 3, 0.7, rng);
  std::vector<Prompt> prompts;
  Rng draws(2);
  for (int k : {0, 2, 5}) prompts.push_back(sample_prompt(spec, k, draws));

  TempFile f("test_prompts.jsonl");
  write_prompts_jsonl(f.path, prompts);
  std::vector<Prompt> back = read_prompts_jsonl(f.path);
  REQUIRE(back.size() == prompts.size());
  for (size_t i = 0; i < prompts.size(); ++i) {
    CHECK(back[i].latent_index == prompts[i].latent_index);
    CHECK(back[i].query_y == prompts[i].query_y);
    REQUIRE(back[i].xs.size() == prompts[i].xs.size());
    for (size_t j = 0; j < prompts[i].xs.size(); ++j) {
      CHECK(bitwise_equal(back[i].xs[j], prompts[i].xs[j]));
    }
    CHECK(back[i].ys == prompts[i].ys);
  }
}

TEST_CASE("weights JSONL round-trips and orders by index") {
  Rng rng(3);
  MixtureSpec spec = sample_spec(4, 5, 0.3, rng);
  TempFile f("test_weights.jsonl");
  write_weights_jsonl(f.path, spec);
  MixtureSpec back = read_weights_jsonl(f.path);
  CHECK(back.sigma == spec.sigma);
  CHECK(bitwise_equal(back.components, spec.components));

  // A file with shuffled indices still loads in index order.
  std::ofstream out(f.path);
  out << "{\"index\": 2, \"sigma\": 1.0, \"w\": [5.0]}\n";
  out << "{\"index\": 1, \"sigma\": 1.0, \"w\": [7.0]}\n";
  out.close();
  MixtureSpec shuffled = read_weights_jsonl(f.path);
  CHECK(shuffled.components(0, 0) == 7.0);
  CHECK(shuffled.components(1, 0) == 5.0);
}

TEST_CASE("manifests render deterministically in entry order") {
  TempFile f("test_manifest.json");
  ManifestEntries entries{{"verb", json_quote("eval")},
                          {"seed", "7"},
                          {"sigma", format_double(1.0)},
                          {"predictor", json_quote("posterior_mean")}};
  write_manifest(f.path, entries);
  std::string first = slurp(f.path);
  write_manifest(f.path, entries);
  CHECK(slurp(f.path) == first);

  auto parsed = nlohmann::json::parse(first);
  CHECK(parsed["verb"] == "eval");
  CHECK(parsed["seed"] == 7);
  CHECK(parsed["predictor"] == "posterior_mean");
  CHECK(first.find("\"verb\"") < first.find("\"seed\""));
  CHECK(first.find("\"seed\"") < first.find("\"sigma\""));
}

TEST_CASE("json_quote escapes control and quote characters") {
  CHECK(json_quote("plain") == "\"plain\"");
  CHECK(json_quote("a\"b") == "\"a\\\"b\"");
  CHECK(json_quote("a\\b") == "\"a\\\\b\"");
  CHECK(json_quote("a\nb") == "\"a\\nb\"");
}
