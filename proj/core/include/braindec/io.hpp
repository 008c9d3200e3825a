#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "braindec/signal_features.hpp"

namespace braindec {

// Shortest decimal string that parses back to exactly the same double.
// Every CSV writer goes through this so repeated runs are byte-identical.
std::string format_double(double v);

// ---- CSV ----
// Cells are comma-separated, rows newline-terminated, no quoting. Parse
// failures (non-numeric cell, row length drift) name the 1-based line.

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {});
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

// Feature files carry the fixed header fn_0,...,fn_{K-1}; it is validated.
void write_feature_csv(const std::filesystem::path& path, const FeatureSequence& f);
FeatureSequence read_feature_csv(const std::filesystem::path& path);

// One integer per line.
void write_labels_csv(const std::filesystem::path& path, const LabelTrack& labels);
LabelTrack read_labels_csv(const std::filesystem::path& path);

// ---- flat key=value files (configs, manifests) ----
// One `key=value` per line; blank lines and lines starting with '#' are
// skipped. Order is preserved.
using KvPairs = std::vector<std::pair<std::string, std::string>>;
void write_kv_file(const std::filesystem::path& path, const KvPairs& kv);
KvPairs read_kv_file(const std::filesystem::path& path);

// Strict whole-string scalar parsers; `what` names the value in errors.
double parse_double(const std::string& s, const std::string& what);
long parse_long(const std::string& s, const std::string& what);
std::uint64_t parse_u64(const std::string& s, const std::string& what);

// ---- little-endian binary primitives (checkpoint files) ----
namespace bin {
void write_u8(std::ostream& os, std::uint8_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_f64(std::ostream& os, double v);
std::uint8_t read_u8(std::istream& is);
std::uint32_t read_u32(std::istream& is);
double read_f64(std::istream& is);
}  // namespace bin

// Sorted list of immediate subdirectories; deterministic subject ordering.
std::vector<std::filesystem::path> list_subdirs_sorted(const std::filesystem::path& dir);

// Loads a dataset directory: one subdirectory per subject, each holding
// features.csv and labels.csv. Subject ids come from the sort order.
std::vector<SubjectData> load_subject_dir(const std::filesystem::path& dir);

}  // namespace braindec
