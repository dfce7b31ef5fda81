#include "tga/dataio.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "tga/binio.hpp"

namespace tga {

using nlohmann::json;
namespace fs = std::filesystem;

static constexpr char kFeatureMagic[4] = {'T', 'G', 'A', 'F'};
static constexpr uint32_t kFeatureVersion = 1;

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s, const std::string& context) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError(context + ": unknown split \"" + s + "\"");
}

const VideoFeatures& Dataset::video_of(const std::string& video_id) const {
  auto it = video_index.find(video_id);
  if (it == video_index.end())
    throw DataError("unknown video id \"" + video_id + "\"");
  return videos[it->second];
}

std::vector<size_t> Dataset::query_indices(Split s) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < queries.size(); ++i)
    if (queries[i].split == s) out.push_back(i);
  return out;
}

VideoFeatures read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open feature file");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw DataError(path + ": not a feature file (bad magic)");
  uint32_t version, num_units, feature_dim;
  if (!read_u32(is, version) || !read_u32(is, num_units) || !read_u32(is, feature_dim))
    throw DataError(path + ": truncated feature header");
  if (version != kFeatureVersion)
    throw DataError(path + ": unsupported feature version " + std::to_string(version));
  if (num_units == 0 || feature_dim == 0)
    throw DataError(path + ": degenerate feature shape");

  VideoFeatures v;
  v.num_units = num_units;
  v.feature_dim = feature_dim;
  v.data.resize(static_cast<size_t>(num_units) * feature_dim);
  for (size_t i = 0; i < v.data.size(); ++i) {
    if (!read_f32(is, v.data[i]))
      throw DataError(path + ": truncated feature payload");
    if (!std::isfinite(v.data[i]))
      throw DataError(path + ": non-finite feature value");
  }
  return v;
}

void write_features(const VideoFeatures& v, const std::string& path) {
  if (v.num_units == 0 || v.feature_dim == 0)
    throw DataError(path + ": refusing to write degenerate feature shape");
  if (v.data.size() != static_cast<size_t>(v.num_units) * v.feature_dim)
    throw DataError(path + ": feature payload does not match declared shape");
  for (float x : v.data)
    if (!std::isfinite(x))
      throw DataError(path + ": refusing to write non-finite feature value");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError(path + ": cannot open for writing");
  os.write(kFeatureMagic, 4);
  write_u32(os, kFeatureVersion);
  write_u32(os, v.num_units);
  write_u32(os, v.feature_dim);
  for (float x : v.data) write_f32(os, x);
  if (!os) throw DataError(path + ": write failed");
}

static json parse_json_file(const std::string& path, const char* what) {
  std::ifstream is(path);
  if (!is) throw DataError(path + ": cannot open " + what);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + what + " parse failure: " + e.what());
  }
  return j;
}

static std::vector<std::string> load_vocab(const std::string& path) {
  const json j = parse_json_file(path, "vocabulary");
  if (!j.is_object()) throw DataError(path + ": vocabulary must be a JSON object");
  std::vector<std::string> vocab(j.size());
  std::vector<bool> seen(j.size(), false);
  for (const auto& [tok, idv] : j.items()) {
    if (!idv.is_number_unsigned())
      throw DataError(path + ": vocabulary id for \"" + tok + "\" is not a nonnegative integer");
    const uint64_t id = idv.get<uint64_t>();
    if (id >= vocab.size())
      throw DataError(path + ": vocabulary ids must be dense from 0; \"" + tok +
                      "\" has id " + std::to_string(id) + " with only " +
                      std::to_string(vocab.size()) + " entries");
    if (seen[id])
      throw DataError(path + ": duplicate vocabulary id " + std::to_string(id));
    seen[id] = true;
    vocab[id] = tok;
  }
  return vocab;
}

static Dataset load_manifest_inner(const std::string& manifest_path, const json& j);

Dataset load_manifest(const std::string& manifest_path) {
  const json j = parse_json_file(manifest_path, "manifest");
  try {
    return load_manifest_inner(manifest_path, j);
  } catch (const json::exception& e) {
    throw DataError(manifest_path + ": malformed manifest: " + e.what());
  }
}

static Dataset load_manifest_inner(const std::string& manifest_path, const json& j) {
  const fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& p) {
    return fs::path(p).is_absolute() ? p : (base / p).string();
  };

  auto require = [&](const json& obj, const char* key, const std::string& where) -> const json& {
    auto it = obj.find(key);
    if (it == obj.end())
      throw DataError(manifest_path + ": " + where + " is missing \"" + key + "\"");
    return *it;
  };

  Dataset ds;
  const json& fd = require(j, "feature_dim", "manifest");
  if (!fd.is_number_unsigned() || fd.get<uint64_t>() == 0)
    throw DataError(manifest_path + ": feature_dim must be a positive integer");
  ds.feature_dim = fd.get<uint32_t>();

  ds.vocab = load_vocab(resolve(require(j, "vocabulary", "manifest").get<std::string>()));
  if (ds.vocab.empty())
    throw DataError(manifest_path + ": vocabulary is empty");

  for (const json& vj : require(j, "videos", "manifest")) {
    const std::string id = require(vj, "id", "video entry").get<std::string>();
    const std::string where = "video \"" + id + "\"";
    if (ds.video_index.count(id))
      throw DataError(manifest_path + ": duplicate video id \"" + id + "\"");
    const uint64_t num_units = require(vj, "num_units", where).get<uint64_t>();
    const uint64_t udf = require(vj, "unit_duration_frames", where).get<uint64_t>();
    if (num_units == 0)
      throw DataError(manifest_path + ": " + where + " declares zero units");
    if (udf == 0)
      throw DataError(manifest_path + ": " + where + " declares zero unit_duration_frames");
    const std::string fpath = resolve(require(vj, "features", where).get<std::string>());
    VideoFeatures v = read_features(fpath);
    if (v.num_units != num_units || v.feature_dim != ds.feature_dim)
      throw DataError(manifest_path + ": " + where + " declares " +
                      std::to_string(num_units) + "x" + std::to_string(ds.feature_dim) +
                      " but " + fpath + " holds " + std::to_string(v.num_units) + "x" +
                      std::to_string(v.feature_dim));
    v.video_id = id;
    v.unit_duration_frames = static_cast<uint32_t>(udf);
    ds.video_index.emplace(id, ds.videos.size());
    ds.videos.push_back(std::move(v));
  }

  std::unordered_set<std::string> query_ids;
  for (const json& qj : require(j, "queries", "manifest")) {
    SentenceQuery q;
    q.query_id = require(qj, "id", "query entry").get<std::string>();
    const std::string where = "query \"" + q.query_id + "\"";
    if (!query_ids.insert(q.query_id).second)
      throw DataError(manifest_path + ": duplicate query id \"" + q.query_id + "\"");
    q.video_id = require(qj, "video_id", where).get<std::string>();
    auto vit = ds.video_index.find(q.video_id);
    if (vit == ds.video_index.end())
      throw DataError(manifest_path + ": " + where + " references unknown video \"" +
                      q.video_id + "\"");
    for (const json& t : require(qj, "tokens", where)) {
      if (!t.is_number_unsigned())
        throw DataError(manifest_path + ": " + where + " has a non-integer token");
      const uint64_t id = t.get<uint64_t>();
      if (id >= ds.vocab.size())
        throw DataError(manifest_path + ": " + where + " token id " + std::to_string(id) +
                        " exceeds vocabulary size " + std::to_string(ds.vocab.size()));
      q.tokens.push_back(static_cast<uint32_t>(id));
    }
    if (q.tokens.empty())
      throw DataError(manifest_path + ": " + where + " has no tokens");
    const json& gm = require(qj, "gt_moment", where);
    if (!gm.is_null()) {
      if (!gm.is_array() || gm.size() != 2)
        throw DataError(manifest_path + ": " + where + " gt_moment must be [start, end]");
      const uint64_t s = gm[0].get<uint64_t>(), e = gm[1].get<uint64_t>();
      const uint32_t nu = ds.videos[vit->second].num_units;
      if (s >= e || e > nu)
        throw DataError(manifest_path + ": " + where + " gt_moment [" + std::to_string(s) +
                        "," + std::to_string(e) + ") out of range for " +
                        std::to_string(nu) + " units");
      q.gt_moment = Moment{static_cast<uint32_t>(s), static_cast<uint32_t>(e)};
    }
    q.split = parse_split(require(qj, "split", where).get<std::string>(),
                          manifest_path + ": " + where);
    ds.queries.push_back(std::move(q));
  }
  return ds;
}

}  // namespace tga
