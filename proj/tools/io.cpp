#include "io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>

#include "eventstruct/errors.hpp"

#ifndef EVENTSTRUCT_VERSION
#define EVENTSTRUCT_VERSION "unknown"
#endif

namespace eventstruct::cli {

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return out.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

void write_posteriors(const std::vector<PosteriorSet>& sets, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "document\telement\tgroup\tmap_type\tprobabilities\n";
  for (const auto& s : sets)
    for (const auto& m : s.marginals) {
      const auto map = std::max_element(m.probs.begin(), m.probs.end()) - m.probs.begin();
      out << s.document << '\t' << m.element << '\t' << to_string(m.kind) << '\t' << map << '\t';
      for (std::size_t i = 0; i < m.probs.size(); ++i) out << (i ? "," : "") << m.probs[i];
      out << '\n';
    }
}

std::vector<PosteriorSet> read_posteriors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open posterior table '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line.rfind("document\telement\tgroup", 0) != 0) throw ParseError("'" + path + "' is not a posterior table", 1);
  std::vector<PosteriorSet> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 5) throw ParseError("expected 5 columns", n);
    if (out.empty() || out.back().document != f[0]) out.push_back({f[0], {}, {}, 0.0, true, 0});
    VariableMarginal m;
    try {
      m.kind = parse_group(f[2]);
      for (const auto& p : split(f[4], ',')) m.probs.push_back(std::stod(p));
    } catch (const std::logic_error&) {
      throw ParseError("bad posterior row", n);
    }
    m.element = f[1];
    out.back().marginals.push_back(std::move(m));
  }
  return out;
}

ReliabilityMatrix read_reliability(const std::string& path, int categories) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open reliability table '" + path + "'");
  std::string line;
  std::getline(in, line);
  const auto header = split(line, '\t');
  if (header.size() < 3 || header[0] != "item" || header[1] != "annotator" || header[2] != "value")
    throw ParseError("reliability table header must be item, annotator, value[, confidence]", 1);
  const bool conf = header.size() > 3;
  ReliabilityMatrix m(categories);
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != header.size()) throw ParseError("expected " + std::to_string(header.size()) + " columns", n);
    try {
      m.add(f[0], f[1], std::stoi(f[2]), conf ? std::optional<double>(std::stod(f[3])) : std::nullopt);
    } catch (const std::logic_error&) {
      throw ParseError("bad value in reliability table", n);
    } catch (const ArgumentError& e) {
      throw ParseError(e.what(), n);
    }
  }
  return m;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  out << text;
}

Manifest::Manifest(std::string subcommand, std::string out_dir)
    : subcommand_(std::move(subcommand)), out_dir_(std::move(out_dir)) {
  std::filesystem::create_directories(out_dir_);
}

std::string Manifest::output(const std::string& name) {
  outputs_.push_back(name);
  return (std::filesystem::path(out_dir_) / name).string();
}

void Manifest::write() const {
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand_;
  j["version"] = EVENTSTRUCT_VERSION;
  j["seed"] = seed_ ? nlohmann::ordered_json(*seed_) : nlohmann::ordered_json(nullptr);
  j["config"] = config_;
  j["inputs"] = nlohmann::ordered_json::object();
  for (const auto& p : inputs_) j["inputs"][p] = sha256_file(p);
  j["outputs"] = nlohmann::ordered_json::object();
  for (const auto& name : outputs_) j["outputs"][name] = sha256_file((std::filesystem::path(out_dir_) / name).string());
  j["duration_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  write_text((std::filesystem::path(out_dir_) / "manifest.json").string(), j.dump(2) + "\n");
}

}  // namespace eventstruct::cli
