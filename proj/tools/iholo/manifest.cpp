#include "manifest.hpp"

#include <iholo/digest.hpp>
#include <iholo/error.hpp>

namespace iholo::cli {
namespace {

std::string major_minor(const std::string &version) {
  auto first = version.find('.');
  if (first == std::string::npos) return version;
  auto second = version.find('.', first + 1);
  return version.substr(0, second);
}

} // namespace

Manifest::Manifest(fs::path path) : path_(std::move(path)) {
  doc_ = {{"tool_version", IHOLO_VERSION}, {"stages", json::array()}};
}

Manifest Manifest::open(const fs::path &path) {
  Manifest m(path);
  json doc = read_json(path);
  std::string version = doc.value("tool_version", "");
  if (major_minor(version) != major_minor(IHOLO_VERSION))
    throw config_error(path.string() + " was written by iholo " + version + ", this is " +
                       IHOLO_VERSION);
  if (!doc.contains("stages") || !doc["stages"].is_array())
    throw Error(ErrorKind::format, path.string() + ": manifest has no stages array");
  m.doc_ = std::move(doc);
  return m;
}

Manifest Manifest::open_or_create(const fs::path &path) {
  return fs::exists(path) ? open(path) : Manifest(path);
}

void Manifest::set_run(const ExperimentConfig &config, unsigned threads) {
  doc_["seed"] = config.rng_seed;
  doc_["config_digest"] = config.digest();
  doc_["config"] = config.to_json();
  doc_["threads"] = threads;
}

void Manifest::add_stage(const std::string &name, const json &args,
                         std::span<const fs::path> outputs, double wall_seconds) {
  json files = json::array();
  const fs::path base = path_.parent_path().empty() ? fs::path(".") : path_.parent_path();
  for (const auto &p : outputs) {
    std::error_code ec;
    fs::path rel = fs::relative(p, base, ec);
    files.push_back({{"path", (ec || rel.empty() ? p : rel).generic_string()},
                     {"sha256", sha256_file(p)},
                     {"bytes", fs::file_size(p)}});
  }
  doc_["stages"].push_back(
      {{"name", name}, {"args", args}, {"outputs", files}, {"wall_seconds", wall_seconds}});
}

void Manifest::save() const { write_json(path_, doc_); }

VerifyResult verify_manifest(const fs::path &path) {
  Manifest m = Manifest::open(path);
  const fs::path base = path.parent_path();
  VerifyResult r;
  for (const auto &stage : m.document()["stages"])
    for (const auto &out : stage.value("outputs", json::array())) {
      fs::path p = base / out.at("path").get<std::string>();
      ++r.checked;
      if (!fs::exists(p))
        r.missing.push_back(p.string());
      else if (sha256_file(p) != out.at("sha256").get<std::string>())
        r.mismatched.push_back(p.string());
    }
  return r;
}

} // namespace iholo::cli
