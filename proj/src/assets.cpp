#include "aspo/assets.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <set>

#include "aspo/error.hpp"

namespace aspo {

using nlohmann::json;

std::string sha256Hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::Io, "SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256File(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256Hex(bytes);
}

AssetManifest AssetManifest::fromFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open asset manifest " + path.string());
  AssetManifest m;
  try {
    json j = json::parse(in);
    for (const auto& f : j.at("files")) m.files.push_back({f.at("path"), f.at("sha256"), f.at("provenance")});
    for (auto it = j.at("processors").begin(); it != j.at("processors").end(); ++it) {
      const auto& p = it.value();
      m.processors[it.key()] = {p.at("space"), p.value("constraints", std::string()), p.at("model")};
    }
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0, 0);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": malformed manifest: " + e.what());
  }
  return m;
}

const Problem& Assets::processor(const std::string& name) const {
  auto it = processors.find(name);
  if (it == processors.end()) throw Error(ErrorKind::InvalidArgument, "no bundled processor named '" + name + "'");
  return it->second;
}

Assets loadAssets(const std::filesystem::path& root) {
  Assets a;
  a.root = root;
  a.manifest = AssetManifest::fromFile(root / "manifest.json");

  std::set<std::string> listed;
  for (const auto& f : a.manifest.files) {
    auto actual = sha256File(root / f.path);
    if (actual != f.sha256)
      throw Error(ErrorKind::HashMismatch, "hash mismatch for " + f.path + ": expected " + f.sha256 + ", got " + actual);
    listed.insert(f.path);
  }
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    auto rel = std::filesystem::relative(entry.path(), root).generic_string();
    if (rel != "manifest.json" && !listed.count(rel))
      throw Error(ErrorKind::HashMismatch, "bundled file " + rel + " is missing from the manifest");
  }

  for (const auto& [name, pa] : a.manifest.processors) {
    for (const auto* file : {&pa.space, &pa.constraints, &pa.model})
      if (!file->empty() && !listed.count(*file))
        throw Error(ErrorKind::HashMismatch, "processor " + name + " uses unlisted file " + *file);
    auto space = ParameterSpace::fromFile(root / pa.space);
    auto tree = pa.constraints.empty() ? unconstrained(space) : parseConstraintsFile(root / pa.constraints, space);
    auto model = SyntheticModel::fromFile(root / pa.model, space);
    a.processors.emplace(name, Problem{std::move(space), std::move(tree), std::move(model)});
  }
  return a;
}

}  // namespace aspo
