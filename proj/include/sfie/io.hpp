#ifndef SFIE_IO_HPP
#define SFIE_IO_HPP

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sfie/errors.hpp"
#include "sfie/neural_kernel.hpp"

namespace sfie {

// ---------------------------------------------------------------------------
// Tabular artifacts (CSV).
// ---------------------------------------------------------------------------

/// A named-column table. `columns` holds one column per header; every CSV and
/// plot artifact goes through this type so the bytes are produced in exactly
/// one place.
struct DataTable {
  std::vector<std::string> headers;
  Eigen::MatrixXd columns;
};

/// Shortest deterministic decimal form that round-trips a double ("%.17g").
std::string format_double(double value);

/// Render the table as CSV text: comma separator, header row, '.' decimal
/// point, LF line endings, no trailing spaces. Deterministic byte-for-byte.
std::string csv_string(const DataTable& table);

/// Write csv_string(table) to `path`. Throws config_error naming the path if
/// the file cannot be opened.
void write_csv(const std::string& path, const DataTable& table);

/// Training trace as a table: global_step, outer_iteration, loss,
/// moving_average — one row per recorded step.
DataTable loss_table(const TrainState& state);

// ---------------------------------------------------------------------------
// Plots (SVG).
// ---------------------------------------------------------------------------

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;   ///< semilog-y; non-positive y values are dropped
  int width = 720;
  int height = 480;
};

struct PlotResult {
  std::string svg;
  Eigen::Index dropped_points = 0;  ///< non-finite (or non-positive on log axes)
};

/// Render the table as a line chart: first column is x, every further column
/// is one series whose legend label is its header. Points that cannot be
/// placed (non-finite, or y <= 0 on a log axis) are dropped and counted.
PlotResult render_plot(const DataTable& table, const PlotOptions& options);

/// Render and write to `path`. Throws config_error naming the path on failure.
PlotResult write_plot(const std::string& path, const DataTable& table,
                      const PlotOptions& options);

// ---------------------------------------------------------------------------
// Configuration files.
// ---------------------------------------------------------------------------

/// Flat key-value configuration. Keys are "section.name" for entries under an
/// INI-style `[section]` header and bare "name" before any section. Values
/// stay strings until a typed getter parses them.
class ConfigMap {
 public:
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// Typed getters fall back to `fallback` when the key is absent and throw
  /// config_error (naming the key) when the stored text does not parse.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::vector<double> get_list(const std::string& key,
                               const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Parse an INI-style file: `[section]` headers, `key = value` lines, and
/// full-line comments starting with '#' or ';'. Throws config_error naming
/// the path if the file cannot be read, or the offending line if it cannot
/// be parsed.
ConfigMap load_config(const std::string& path);

/// Environment-variable name that overrides `key`: "SFIE_" + key uppercased
/// with '.' replaced by '_' (merton.sigma -> SFIE_MERTON_SIGMA).
std::string env_override_name(const std::string& key);

/// Replace the value of every key whose override variable is set in the
/// environment. Returns the number of keys replaced. Only keys already in the
/// map are considered, so callers should insert defaults first.
int apply_env_overrides(ConfigMap& config);

/// Canonical serialization used for digests: sorted "key=value" lines, LF.
std::string canonical_config(const ConfigMap& config);

/// 64-bit FNV-1a hash of a byte string.
std::uint64_t fnv1a64(const std::string& bytes);

// ---------------------------------------------------------------------------
// Run manifests.
// ---------------------------------------------------------------------------

/// Provenance record written next to every run's artifacts: which subcommand
/// ran, under which configuration digest and seed, what it wrote, how long it
/// took, and how many data points the renderer had to drop.
struct RunManifest {
  std::string subcommand;
  std::uint64_t config_digest = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string artifact_version = "sfie-artifacts-v1";
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;
  std::int64_t warnings = 0;
};

/// Serialize the manifest as pretty-printed JSON (sorted keys, LF, trailing
/// newline).
std::string manifest_json(const RunManifest& manifest);

/// Write manifest_json to `path`. Throws config_error naming the path on
/// failure.
void write_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace sfie

#endif  // SFIE_IO_HPP
