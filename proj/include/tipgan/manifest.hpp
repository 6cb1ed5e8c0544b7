#pragma once

// Run manifest: per-subcommand record of inputs and outputs with content
// hashes. Used to detect stale or edited upstream artifacts.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tipgan/errors.hpp"
#include "tipgan/hash.hpp"
#include "tipgan/io.hpp"

namespace tipgan {

inline constexpr int kManifestVersion = 1;

struct ArtifactRecord {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string subcommand;
  std::string config_file;
  std::vector<std::uint64_t> seeds;
  std::vector<ArtifactRecord> inputs;
  std::vector<ArtifactRecord> outputs;
  nlohmann::json versions = nlohmann::json::object();

  void add_input(const std::filesystem::path& p) { inputs.push_back({p.generic_string(), sha256_file(p)}); }
  void add_output(const std::filesystem::path& p) { outputs.push_back({p.generic_string(), sha256_file(p)}); }

  nlohmann::json to_json() const {
    auto list = [](const std::vector<ArtifactRecord>& v) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& r : v) a.push_back({{"path", r.path}, {"sha256", r.sha256}});
      return a;
    };
    return {{"subcommand", subcommand}, {"config_file", config_file}, {"seeds", seeds},
            {"inputs", list(inputs)},   {"outputs", list(outputs)},   {"versions", versions}};
  }
};

/// The manifest file of a run directory: one entry per subcommand, kept in
/// key order so identical runs give identical bytes.
class ManifestFile {
 public:
  explicit ManifestFile(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
      doc_ = nlohmann::json::parse(io::read_file(path_));
      if (doc_.value("format_version", 0) != kManifestVersion) fail(ErrorKind::Parse, "unsupported manifest version");
    } else {
      doc_ = {{"format_version", kManifestVersion}, {"runs", nlohmann::json::object()}};
    }
  }

  /// Recorded hash of the most recent output at `p`, if any.
  std::optional<std::string> recorded_hash(const std::filesystem::path& p) const {
    const std::string key = p.generic_string();
    for (const auto& [name, run] : doc_.at("runs").items())
      for (const auto& o : run.at("outputs"))
        if (o.at("path").get<std::string>() == key) return o.at("sha256").get<std::string>();
    return std::nullopt;
  }

  /// Fails with MissingArtifact if `p` does not exist and with HashMismatch
  /// if it no longer matches what an earlier step recorded.
  void verify_input(const std::filesystem::path& p) const {
    if (!std::filesystem::exists(p)) fail(ErrorKind::MissingArtifact, "missing input " + p.string());
    if (auto h = recorded_hash(p); h && *h != sha256_file(p))
      fail(ErrorKind::HashMismatch, p.string() + " changed since it was recorded");
  }

  void record(const RunManifest& m) { doc_["runs"][m.subcommand] = m.to_json(); }

  void save() const {
    auto out = io::open_out(path_);
    out << doc_.dump(2) << "\n";
  }

  const nlohmann::json& json() const { return doc_; }

 private:
  std::filesystem::path path_;
  nlohmann::json doc_;
};

}  // namespace tipgan
