#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eventstruct/agreement.hpp"
#include "eventstruct/factorgraph.hpp"

namespace eventstruct::cli {

std::string sha256_file(const std::string& path);

std::vector<std::string> split(const std::string& line, char sep);

// Tab-separated posterior table:
// document, element, group, map_type, comma-joined probabilities.
void write_posteriors(const std::vector<PosteriorSet>& sets, const std::string& path);
std::vector<PosteriorSet> read_posteriors(const std::string& path);

// Long-format reliability table: item, annotator, value[, confidence].
ReliabilityMatrix read_reliability(const std::string& path, int categories);

void write_text(const std::string& path, const std::string& text);

// Inputs, outputs and the resolved configuration of one run.
class Manifest {
 public:
  Manifest(std::string subcommand, std::string out_dir);
  void input(const std::string& path) { inputs_.push_back(path); }
  // Output file name relative to the output directory.
  std::string output(const std::string& name);
  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  // Writes <out>/manifest.json.
  void write() const;

 private:
  std::string subcommand_;
  std::string out_dir_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  nlohmann::json config_ = nlohmann::json::object();
  std::optional<std::uint64_t> seed_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace eventstruct::cli
