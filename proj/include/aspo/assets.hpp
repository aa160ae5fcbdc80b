#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aspo/driver.hpp"

namespace aspo {

struct AssetEntry {
  std::string path;
  std::string sha256;
  std::string provenance;
};

struct ProcessorAssets {
  std::string space;
  std::string constraints;  // empty when the processor ships no constraint file
  std::string model;
};

struct AssetManifest {
  std::vector<AssetEntry> files;
  std::map<std::string, ProcessorAssets> processors;

  static AssetManifest fromFile(const std::filesystem::path& path);
};

struct Assets {
  std::filesystem::path root;
  AssetManifest manifest;
  std::map<std::string, Problem> processors;

  const Problem& processor(const std::string& name) const;
  std::filesystem::path pathOf(const std::string& relative) const { return root / relative; }
};

std::string sha256Hex(const std::string& bytes);
std::string sha256File(const std::filesystem::path& path);

/// Verifies every manifest hash, checks that every JSON file under `root` is
/// listed, and parses each processor's space, constraints and model. Throws
/// HashMismatch naming the offending file.
Assets loadAssets(const std::filesystem::path& root);

}  // namespace aspo
