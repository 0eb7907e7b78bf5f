#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mixreg/harness.hpp"
#include "mixreg/mixtures.hpp"

namespace mixreg {

// Doubles rendered with 17 significant digits, enough to round-trip any
// IEEE-754 double exactly.
std::string format_double(double v);

// Curves as CSV with columns metric,setting,k,mean,stderr,n. read_curves_csv
// round-trips write_curves_csv to full precision.
void write_curves_csv(const std::string& path, const std::vector<MetricCurve>& curves);
std::vector<MetricCurve> read_curves_csv(const std::string& path);

// One JSON record per (curve, k) with the same six fields.
void write_curves_jsonl(const std::string& path, const std::vector<MetricCurve>& curves);

// Static plot: per curve one stderr band (a filled path) and exactly one
// polyline.
void write_curves_svg(const std::string& path, const std::vector<MetricCurve>& curves);

// One prompt per line: {"xs": [[...]], "ys": [...], "latent": int,
// "query_y": float}.
void write_prompts_jsonl(const std::string& path, const std::vector<Prompt>& prompts);
std::vector<Prompt> read_prompts_jsonl(const std::string& path);

// One component per line: {"index": 1-based int, "sigma": float,
// "w": [...]}. All lines carry the same sigma.
void write_weights_jsonl(const std::string& path, const MixtureSpec& spec);
MixtureSpec read_weights_jsonl(const std::string& path);

// Ordered key/value manifest rendered as a JSON object. Values are raw JSON
// fragments (already quoted if they are strings), so callers control the
// exact rendering; nothing time- or host-dependent is added.
using ManifestEntries = std::vector<std::pair<std::string, std::string>>;
void write_manifest(const std::string& path, const ManifestEntries& entries);
std::string json_quote(const std::string& s);

}  // namespace mixreg
