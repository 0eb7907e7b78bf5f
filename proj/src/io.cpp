#include "mixreg/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mixreg {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return in;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s) {
  size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::runtime_error("bad float field: " + s);
  return v;
}

}  // namespace

void write_curves_csv(const std::string& path, const std::vector<MetricCurve>& curves) {
  if (curves.empty()) throw std::invalid_argument("write_curves_csv: no curves");
  for (const MetricCurve& curve : curves) validate(curve);
  std::ofstream out = open_out(path);
  out << "metric,setting,k,mean,stderr,n\n";
  for (const MetricCurve& curve : curves) {
    for (size_t i = 0; i < curve.k_values.size(); ++i) {
      out << curve.metric << ',' << curve.setting << ',' << curve.k_values[i] << ','
          << format_double(curve.means[i]) << ',' << format_double(curve.stderrs[i]) << ','
          << curve.counts[i] << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<MetricCurve> read_curves_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "metric,setting,k,mean,stderr,n") {
    throw std::runtime_error("read_curves_csv: missing header in " + path);
  }
  std::vector<MetricCurve> curves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 6) throw std::runtime_error("read_curves_csv: bad row: " + line);
    if (curves.empty() || curves.back().metric != f[0] || curves.back().setting != f[1]) {
      MetricCurve curve;
      curve.metric = f[0];
      curve.setting = f[1];
      curves.push_back(std::move(curve));
    }
    MetricCurve& curve = curves.back();
    curve.k_values.push_back(std::stoi(f[2]));
    curve.means.push_back(parse_double(f[3]));
    curve.stderrs.push_back(parse_double(f[4]));
    curve.counts.push_back(std::stol(f[5]));
  }
  for (const MetricCurve& curve : curves) validate(curve);
  return curves;
}

void write_curves_jsonl(const std::string& path, const std::vector<MetricCurve>& curves) {
  if (curves.empty()) throw std::invalid_argument("write_curves_jsonl: no curves");
  for (const MetricCurve& curve : curves) validate(curve);
  std::ofstream out = open_out(path);
  for (const MetricCurve& curve : curves) {
    for (size_t i = 0; i < curve.k_values.size(); ++i) {
      out << "{\"metric\":" << json_quote(curve.metric) << ",\"setting\":"
          << json_quote(curve.setting) << ",\"k\":" << curve.k_values[i]
          << ",\"mean\":" << format_double(curve.means[i])
          << ",\"stderr\":" << format_double(curve.stderrs[i]) << ",\"n\":" << curve.counts[i]
          << "}\n";
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

struct PlotScale {
  double x_min, x_max, y_min, y_max;
  double width = 640.0, height = 420.0;
  double margin = 56.0;

  double x(double v) const {
    const double span = x_max > x_min ? x_max - x_min : 1.0;
    return margin + (v - x_min) / span * (width - 2 * margin);
  }
  double y(double v) const {
    const double span = y_max > y_min ? y_max - y_min : 1.0;
    return height - margin - (v - y_min) / span * (height - 2 * margin);
  }
};

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

void write_curves_svg(const std::string& path, const std::vector<MetricCurve>& curves) {
  if (curves.empty()) throw std::invalid_argument("write_curves_svg: no curves");
  for (const MetricCurve& curve : curves) validate(curve);

  PlotScale s{1e300, -1e300, 0.0, -1e300};
  for (const MetricCurve& curve : curves) {
    for (size_t i = 0; i < curve.k_values.size(); ++i) {
      s.x_min = std::min(s.x_min, static_cast<double>(curve.k_values[i]));
      s.x_max = std::max(s.x_max, static_cast<double>(curve.k_values[i]));
      s.y_min = std::min(s.y_min, curve.means[i] - curve.stderrs[i]);
      s.y_max = std::max(s.y_max, curve.means[i] + curve.stderrs[i]);
    }
  }
  if (s.y_max <= s.y_min) s.y_max = s.y_min + 1.0;

  std::ofstream out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << s.width << "\" height=\""
      << s.height << "\" viewBox=\"0 0 " << s.width << " " << s.height << "\">\n";
  out << "<rect width=\"" << s.width << "\" height=\"" << s.height << "\" fill=\"white\"/>\n";
  // Axes.
  out << "<line x1=\"" << coord(s.margin) << "\" y1=\"" << coord(s.height - s.margin)
      << "\" x2=\"" << coord(s.width - s.margin) << "\" y2=\"" << coord(s.height - s.margin)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << coord(s.margin) << "\" y1=\"" << coord(s.margin) << "\" x2=\""
      << coord(s.margin) << "\" y2=\"" << coord(s.height - s.margin)
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << coord(s.width / 2) << "\" y=\"" << coord(s.height - s.margin / 3)
      << "\" text-anchor=\"middle\" font-size=\"12\">k</text>\n";

  for (size_t c = 0; c < curves.size(); ++c) {
    const MetricCurve& curve = curves[c];
    const char* color = kPalette[c % (sizeof(kPalette) / sizeof(kPalette[0]))];
    // stderr band: mean + se forward, mean - se backward, closed.
    std::string band = "M";
    for (size_t i = 0; i < curve.k_values.size(); ++i) {
      band += (i == 0 ? " " : " L ");
      band += coord(s.x(curve.k_values[i])) + " " + coord(s.y(curve.means[i] + curve.stderrs[i]));
    }
    for (size_t i = curve.k_values.size(); i-- > 0;) {
      band += " L " + coord(s.x(curve.k_values[i])) + " " +
              coord(s.y(curve.means[i] - curve.stderrs[i]));
    }
    band += " Z";
    out << "<path class=\"band\" d=\"" << band << "\" fill=\"" << color
        << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < curve.k_values.size(); ++i) {
      if (i > 0) out << ' ';
      out << coord(s.x(curve.k_values[i])) << ',' << coord(s.y(curve.means[i]));
    }
    out << "\"/>\n";
    // Legend entry.
    const double ly = s.margin / 2 + 14.0 * static_cast<double>(c);
    out << "<line x1=\"" << coord(s.width - s.margin - 150) << "\" y1=\"" << coord(ly)
        << "\" x2=\"" << coord(s.width - s.margin - 130) << "\" y2=\"" << coord(ly)
        << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    out << "<text x=\"" << coord(s.width - s.margin - 124) << "\" y=\"" << coord(ly + 4)
        << "\" font-size=\"11\">" << curve.metric << " " << curve.setting << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_prompts_jsonl(const std::string& path, const std::vector<Prompt>& prompts) {
  std::ofstream out = open_out(path);
  for (const Prompt& prompt : prompts) {
    validate(prompt);
    out << "{\"xs\":[";
    for (size_t i = 0; i < prompt.xs.size(); ++i) {
      if (i) out << ',';
      out << '[';
      for (int t = 0; t < prompt.xs[i].size(); ++t) {
        if (t) out << ',';
        out << format_double(prompt.xs[i](t));
      }
      out << ']';
    }
    out << "],\"ys\":[";
    for (size_t i = 0; i < prompt.ys.size(); ++i) {
      if (i) out << ',';
      out << format_double(prompt.ys[i]);
    }
    out << "],\"latent\":" << prompt.latent_index
        << ",\"query_y\":" << format_double(prompt.query_y) << "}\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<Prompt> read_prompts_jsonl(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<Prompt> prompts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    Prompt prompt;
    for (const auto& xj : j.at("xs")) {
      Eigen::VectorXd x(static_cast<int>(xj.size()));
      for (size_t t = 0; t < xj.size(); ++t) x(static_cast<int>(t)) = xj[t].get<double>();
      prompt.xs.push_back(std::move(x));
    }
    for (const auto& yj : j.at("ys")) prompt.ys.push_back(yj.get<double>());
    prompt.latent_index = j.at("latent").get<int>();
    prompt.query_y = j.at("query_y").get<double>();
    validate(prompt);
    prompts.push_back(std::move(prompt));
  }
  return prompts;
}

void write_weights_jsonl(const std::string& path, const MixtureSpec& spec) {
  validate(spec);
  std::ofstream out = open_out(path);
  for (int jdx = 0; jdx < spec.m(); ++jdx) {
    out << "{\"index\":" << (jdx + 1) << ",\"sigma\":" << format_double(spec.sigma)
        << ",\"w\":[";
    for (int t = 0; t < spec.d(); ++t) {
      if (t) out << ',';
      out << format_double(spec.components(jdx, t));
    }
    out << "]}\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

MixtureSpec read_weights_jsonl(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<std::pair<int, Eigen::VectorXd>> rows;
  double sigma = 0.0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    const auto& wj = j.at("w");
    Eigen::VectorXd w(static_cast<int>(wj.size()));
    for (size_t t = 0; t < wj.size(); ++t) w(static_cast<int>(t)) = wj[t].get<double>();
    rows.emplace_back(j.at("index").get<int>(), std::move(w));
    sigma = j.at("sigma").get<double>();
  }
  if (rows.empty()) throw std::runtime_error("read_weights_jsonl: no components in " + path);
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  MixtureSpec spec;
  spec.sigma = sigma;
  spec.components.resize(static_cast<int>(rows.size()), rows.front().second.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].second.size() != spec.components.cols()) {
      throw std::runtime_error("read_weights_jsonl: inconsistent dimensions in " + path);
    }
    spec.components.row(static_cast<int>(r)) = rows[r].second.transpose();
  }
  validate(spec);
  return spec;
}

std::string json_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        out += c;
    }
  }
  out += '"';
  return out;
}

void write_manifest(const std::string& path, const ManifestEntries& entries) {
  std::ofstream out = open_out(path);
  out << "{\n";
  for (size_t i = 0; i < entries.size(); ++i) {
    out << "  " << json_quote(entries[i].first) << ": " << entries[i].second;
    out << (i + 1 < entries.size() ? ",\n" : "\n");
  }
  out << "}\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace mixreg
