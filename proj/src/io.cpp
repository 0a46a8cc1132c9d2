#include "sfie/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace sfie {

namespace {

std::string trim(const std::string& text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return text.substr(begin, end - begin);
}

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
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

/// Two-decimal fixed formatting for SVG coordinates.
std::string coord(double value) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%.2f", value);
  return buffer;
}

/// Compact tick-label formatting.
std::string tick_label(double value) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%.4g", value);
  return buffer;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

}  // namespace

// ---------------------------------------------------------------------------
// CSV.
// ---------------------------------------------------------------------------

std::string format_double(double value) {
  char buffer[64];
  // Shortest "%.Ng" form that parses back to the same double.
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buffer, sizeof(buffer), "%.*g", precision, value);
    if (std::strtod(buffer, nullptr) == value) return buffer;
  }
  return buffer;
}

std::string csv_string(const DataTable& table) {
  if (table.headers.size() != static_cast<std::size_t>(table.columns.cols()))
    throw dimension_error("csv_string: header / column count mismatch");
  std::string out;
  for (std::size_t c = 0; c < table.headers.size(); ++c) {
    if (c > 0) out += ',';
    out += table.headers[c];
  }
  out += '\n';
  for (Eigen::Index r = 0; r < table.columns.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.columns.cols(); ++c) {
      if (c > 0) out += ',';
      out += format_double(table.columns(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const DataTable& table) {
  const std::string text = csv_string(table);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw config_error("write failed: " + path);
}

DataTable loss_table(const TrainState& state) {
  const Eigen::Index n = static_cast<Eigen::Index>(state.loss_history.size());
  DataTable table;
  table.headers = {"global_step", "outer_iteration", "loss", "moving_average"};
  table.columns.resize(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t at = static_cast<std::size_t>(i);
    table.columns(i, 0) = static_cast<double>(i + 1);
    table.columns(i, 1) = static_cast<double>(state.sweep_history[at]);
    table.columns(i, 2) = state.loss_history[at];
    table.columns(i, 3) = state.moving_average[at];
  }
  return table;
}

// ---------------------------------------------------------------------------
// SVG plots.
// ---------------------------------------------------------------------------

PlotResult render_plot(const DataTable& table, const PlotOptions& options) {
  if (table.headers.size() != static_cast<std::size_t>(table.columns.cols()))
    throw dimension_error("render_plot: header / column count mismatch");
  if (table.columns.cols() < 2)
    throw config_error("render_plot: need an x column and at least one series");

  const Eigen::Index n_series = table.columns.cols() - 1;
  const Eigen::Index n_rows = table.columns.rows();

  PlotResult result;

  // Collect plottable points per series; value space is log10(y) on a log axis.
  std::vector<std::vector<std::pair<double, double>>> points(
      static_cast<std::size_t>(n_series));
  double x_min = std::numeric_limits<double>::infinity();
  double x_max = -std::numeric_limits<double>::infinity();
  double v_min = std::numeric_limits<double>::infinity();
  double v_max = -std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < n_series; ++s) {
    for (Eigen::Index r = 0; r < n_rows; ++r) {
      const double x = table.columns(r, 0);
      const double y = table.columns(r, s + 1);
      if (!std::isfinite(x) || !std::isfinite(y) || (options.log_y && !(y > 0.0))) {
        ++result.dropped_points;
        continue;
      }
      const double v = options.log_y ? std::log10(y) : y;
      points[static_cast<std::size_t>(s)].emplace_back(x, v);
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      v_min = std::min(v_min, v);
      v_max = std::max(v_max, v);
    }
  }
  if (!(x_min <= x_max)) {
    x_min = 0.0;
    x_max = 1.0;
  }
  if (!(v_min <= v_max)) {
    v_min = 0.0;
    v_max = 1.0;
  }
  if (x_max == x_min) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  if (v_max == v_min) {
    v_min -= 0.5;
    v_max += 0.5;
  }
  const double x_pad = 0.04 * (x_max - x_min);
  const double v_pad = 0.06 * (v_max - v_min);
  x_min -= x_pad;
  x_max += x_pad;
  v_min -= v_pad;
  v_max += v_pad;

  const double width = options.width;
  const double height = options.height;
  const double ml = 72.0, mr = 24.0, mt = 44.0, mb = 56.0;
  const auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr); };
  const auto py = [&](double v) {
    return height - mb - (v - v_min) / (v_max - v_min) * (height - mt - mb);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\" viewBox=\"0 0 " << options.width << ' ' << options.height
      << "\">\n";
  svg << "<rect width=\"" << options.width << "\" height=\"" << options.height
      << "\" fill=\"#ffffff\"/>\n";
  if (!options.title.empty())
    svg << "<text x=\"" << coord(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\" fill=\"#111111\">"
        << xml_escape(options.title) << "</text>\n";

  // Axes.
  svg << "<line x1=\"" << coord(ml) << "\" y1=\"" << coord(height - mb) << "\" x2=\""
      << coord(width - mr) << "\" y2=\"" << coord(height - mb)
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << coord(ml) << "\" y1=\"" << coord(mt) << "\" x2=\"" << coord(ml)
      << "\" y2=\"" << coord(height - mb) << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

  // X ticks: five evenly spaced.
  for (int i = 0; i <= 4; ++i) {
    const double x = x_min + (x_max - x_min) * i / 4.0;
    const double gx = px(x);
    svg << "<line x1=\"" << coord(gx) << "\" y1=\"" << coord(height - mb) << "\" x2=\""
        << coord(gx) << "\" y2=\"" << coord(height - mb + 5)
        << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << coord(gx) << "\" y=\"" << coord(height - mb + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"#333333\">"
        << tick_label(x) << "</text>\n";
  }

  // Y ticks: decade ticks on a log axis when at least one decade is in range,
  // five evenly spaced ticks otherwise.
  std::vector<double> y_ticks;
  if (options.log_y) {
    const int lo = static_cast<int>(std::ceil(v_min));
    const int hi = static_cast<int>(std::floor(v_max));
    if (hi >= lo) {
      const int stride = std::max(1, (hi - lo) / 8 + ((hi - lo) % 8 ? 1 : 0));
      for (int d = lo; d <= hi; d += stride) y_ticks.push_back(static_cast<double>(d));
    }
  }
  if (y_ticks.empty())
    for (int i = 0; i <= 4; ++i) y_ticks.push_back(v_min + (v_max - v_min) * i / 4.0);
  for (double v : y_ticks) {
    const double gy = py(v);
    const double label = options.log_y ? std::pow(10.0, v) : v;
    svg << "<line x1=\"" << coord(ml - 5) << "\" y1=\"" << coord(gy) << "\" x2=\"" << coord(ml)
        << "\" y2=\"" << coord(gy) << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << coord(ml - 9) << "\" y=\"" << coord(gy + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"#333333\">"
        << tick_label(label) << "</text>\n";
  }

  // Axis labels.
  if (!options.x_label.empty())
    svg << "<text x=\"" << coord((ml + width - mr) / 2) << "\" y=\"" << coord(height - 14)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "fill=\"#333333\">"
        << xml_escape(options.x_label) << "</text>\n";
  if (!options.y_label.empty())
    svg << "<text x=\"18\" y=\"" << coord((mt + height - mb) / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "fill=\"#333333\" transform=\"rotate(-90 18 "
        << coord((mt + height - mb) / 2) << ")\">" << xml_escape(options.y_label) << "</text>\n";

  // Series.
  for (Eigen::Index s = 0; s < n_series; ++s) {
    const auto& pts = points[static_cast<std::size_t>(s)];
    if (pts.empty()) continue;
    const char* color = kPalette[s % kPaletteSize];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i > 0) svg << ' ';
      svg << coord(px(pts[i].first)) << ',' << coord(py(pts[i].second));
    }
    svg << "\"/>\n";
  }

  // Legend, top-right inside the plot area.
  const double legend_x = width - mr - 170.0;
  double legend_y = mt + 10.0;
  for (Eigen::Index s = 0; s < n_series; ++s) {
    const char* color = kPalette[s % kPaletteSize];
    svg << "<line x1=\"" << coord(legend_x) << "\" y1=\"" << coord(legend_y) << "\" x2=\""
        << coord(legend_x + 22) << "\" y2=\"" << coord(legend_y) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << coord(legend_x + 28) << "\" y=\"" << coord(legend_y + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#111111\">"
        << xml_escape(table.headers[static_cast<std::size_t>(s + 1)]) << "</text>\n";
    legend_y += 17.0;
  }

  svg << "</svg>\n";
  result.svg = svg.str();
  return result;
}

PlotResult write_plot(const std::string& path, const DataTable& table,
                      const PlotOptions& options) {
  PlotResult result = render_plot(table, options);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open for writing: " + path);
  out.write(result.svg.data(), static_cast<std::streamsize>(result.svg.size()));
  if (!out) throw config_error("write failed: " + path);
  return result;
}

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string text = trim(it->second);
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || text.empty())
    throw config_error("config key '" + key + "' is not a number: " + it->second);
  return value;
}

long long ConfigMap::get_int(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string text = trim(it->second);
  char* end = nullptr;
  const long long value = std::strtoll(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size() || text.empty())
    throw config_error("config key '" + key + "' is not an integer: " + it->second);
  return value;
}

std::vector<double> ConfigMap::get_list(const std::string& key,
                                        const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::string token;
  std::istringstream stream(it->second);
  // Accept comma- or whitespace-separated entries.
  while (std::getline(stream, token, ',')) {
    std::istringstream inner(token);
    std::string piece;
    while (inner >> piece) {
      char* end = nullptr;
      const double value = std::strtod(piece.c_str(), &end);
      if (end != piece.c_str() + piece.size())
        throw config_error("config key '" + key + "' has a bad list entry: " + piece);
      out.push_back(value);
    }
  }
  return out;
}

ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  ConfigMap config;
  std::string line;
  std::string section;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']')
        throw config_error("bad section header at " + path + ":" + std::to_string(line_number));
      section = trim(text.substr(1, text.size() - 2));
      continue;
    }
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw config_error("expected key=value at " + path + ":" + std::to_string(line_number));
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty())
      throw config_error("empty key at " + path + ":" + std::to_string(line_number));
    config.set(section.empty() ? key : section + "." + key, value);
  }
  return config;
}

std::string env_override_name(const std::string& key) {
  std::string name = "SFIE_";
  for (char c : key)
    name += (c == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

int apply_env_overrides(ConfigMap& config) {
  int replaced = 0;
  // Snapshot keys first; set() may not invalidate, but keep it simple.
  std::vector<std::string> keys;
  keys.reserve(config.entries().size());
  for (const auto& entry : config.entries()) keys.push_back(entry.first);
  for (const auto& key : keys) {
    const char* value = std::getenv(env_override_name(key).c_str());
    if (value != nullptr) {
      config.set(key, value);
      ++replaced;
    }
  }
  return replaced;
}

std::string canonical_config(const ConfigMap& config) {
  std::string out;
  for (const auto& entry : config.entries()) {
    out += entry.first;
    out += '=';
    out += entry.second;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= static_cast<std::uint64_t>(c);
    hash *= 1099511628211ull;
  }
  return hash;
}

// ---------------------------------------------------------------------------
// Manifests.
// ---------------------------------------------------------------------------

std::string manifest_json(const RunManifest& manifest) {
  nlohmann::json j;
  j["subcommand"] = manifest.subcommand;
  char digest[32];
  std::snprintf(digest, sizeof(digest), "%016llx",
                static_cast<unsigned long long>(manifest.config_digest));
  j["config_digest"] = digest;
  j["seed"] = manifest.seed;
  j["stream"] = manifest.stream;
  j["artifact_version"] = manifest.artifact_version;
  j["outputs"] = manifest.outputs;
  j["duration_seconds"] = manifest.duration_seconds;
  j["warnings"] = manifest.warnings;
  return j.dump(2) + "\n";
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  const std::string text = manifest_json(manifest);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw config_error("write failed: " + path);
}

}  // namespace sfie
