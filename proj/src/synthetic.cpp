#include "tga/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "tga/rng.hpp"

namespace tga {

using nlohmann::json;
namespace fs = std::filesystem;

void SyntheticConfig::validate() const {
  auto positive = [](uint64_t v, const char* name) {
    if (v == 0) throw DataError(std::string("synthetic config: ") + name + " must be positive");
  };
  positive(units_per_video, "units_per_video");
  positive(feature_dim, "feature_dim");
  positive(vocab_size, "vocab_size");
  positive(sentence_length, "sentence_length");
  positive(moments_per_video, "moments_per_video");
  positive(moment_length_min, "moment_length_min");
  if (moment_length_min > moment_length_max)
    throw DataError("synthetic config: moment_length_min exceeds moment_length_max");
  if (moment_length_max > units_per_video)
    throw DataError("synthetic config: moment_length_max exceeds units_per_video");
  if (static_cast<uint64_t>(moments_per_video) * moment_length_max > units_per_video)
    throw DataError("synthetic config: cannot place " + std::to_string(moments_per_video) +
                    " disjoint moments of up to " + std::to_string(moment_length_max) +
                    " units in " + std::to_string(units_per_video) + " units");
  if (!(signal_to_noise > 0.0) || !std::isfinite(signal_to_noise))
    throw DataError("synthetic config: signal_to_noise must be positive and finite");
}

SyntheticConfig load_synth_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(path + ": cannot open synthetic config");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": config parse failure: " + e.what());
  }
  SyntheticConfig cfg;
  try {
    const json& nv = j.at("num_videos");
    cfg.num_train_videos = nv.at("train").get<uint32_t>();
    cfg.num_val_videos = nv.at("val").get<uint32_t>();
    cfg.num_test_videos = nv.at("test").get<uint32_t>();
    cfg.units_per_video = j.at("units_per_video").get<uint32_t>();
    cfg.feature_dim = j.at("feature_dim").get<uint32_t>();
    cfg.vocab_size = j.at("vocab_size").get<uint32_t>();
    cfg.sentence_length = j.at("sentence_length").get<uint32_t>();
    cfg.moments_per_video = j.at("moments_per_video").get<uint32_t>();
    cfg.moment_length_min = j.at("moment_length").at(0).get<uint32_t>();
    cfg.moment_length_max = j.at("moment_length").at(1).get<uint32_t>();
    cfg.signal_to_noise = j.at("signal_to_noise").get<double>();
    cfg.seed = j.at("seed").get<uint64_t>();
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed synthetic config: " + e.what());
  }
  cfg.validate();
  return cfg;
}

Dataset generate_synthetic(const SyntheticConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(fs::path(out_dir) / "features");

  Rng rng(cfg.seed);

  // Fixed concept machinery: one concept row per vocabulary token, and a
  // mixing matrix mapping a sentence's mean concept to its video signature.
  const uint32_t V = cfg.feature_dim;
  std::vector<double> token_concepts(static_cast<size_t>(cfg.vocab_size) * V);
  for (double& x : token_concepts) x = rng.normal();
  std::vector<double> mix(static_cast<size_t>(V) * V);
  for (double& x : mix) x = rng.normal();

  const double noise_sigma = std::sqrt(1.0 / cfg.signal_to_noise);

  Dataset ds;
  ds.feature_dim = V;
  ds.vocab.resize(cfg.vocab_size);
  for (uint32_t i = 0; i < cfg.vocab_size; ++i) ds.vocab[i] = "tok" + std::to_string(i);

  const std::pair<Split, uint32_t> splits[] = {
      {Split::train, cfg.num_train_videos},
      {Split::val, cfg.num_val_videos},
      {Split::test, cfg.num_test_videos},
  };

  for (const auto& [split, count] : splits) {
    for (uint32_t vi = 0; vi < count; ++vi) {
      char name_buf[32];
      std::snprintf(name_buf, sizeof(name_buf), "%s_%04u", split_name(split).c_str(), vi);
      const std::string video_id = name_buf;

      std::vector<uint32_t> lengths(cfg.moments_per_video);
      for (auto& len : lengths)
        len = cfg.moment_length_min +
              static_cast<uint32_t>(rng.index(cfg.moment_length_max - cfg.moment_length_min + 1));
      uint32_t used = 0;
      for (uint32_t len : lengths) used += len;
      uint32_t slack = cfg.units_per_video - used;

      std::vector<Moment> moments(cfg.moments_per_video);
      uint32_t cursor = 0;
      for (uint32_t mi = 0; mi < cfg.moments_per_video; ++mi) {
        const uint32_t gap = static_cast<uint32_t>(rng.index(slack + 1));
        slack -= gap;
        cursor += gap;
        moments[mi] = Moment{cursor, cursor + lengths[mi]};
        cursor += lengths[mi];
      }

      // One sentence per planted moment; its tokens fix the moment's signal.
      std::vector<std::vector<uint32_t>> sentences(cfg.moments_per_video);
      std::vector<std::vector<double>> signals(cfg.moments_per_video);
      for (uint32_t mi = 0; mi < cfg.moments_per_video; ++mi) {
        auto& tokens = sentences[mi];
        tokens.resize(cfg.sentence_length);
        for (auto& t : tokens) t = static_cast<uint32_t>(rng.index(cfg.vocab_size));

        std::vector<double> cvec(V, 0.0);
        for (uint32_t t : tokens)
          for (uint32_t d = 0; d < V; ++d)
            cvec[d] += token_concepts[static_cast<size_t>(t) * V + d];
        for (double& c : cvec) c /= cfg.sentence_length;

        std::vector<double>& sig = signals[mi];
        sig.assign(V, 0.0);
        for (uint32_t r = 0; r < V; ++r) {
          double acc = 0.0;
          for (uint32_t c = 0; c < V; ++c) acc += mix[static_cast<size_t>(r) * V + c] * cvec[c];
          sig[r] = acc;
        }
        // unit power per component, so signal_to_noise means what it says
        double norm2 = 0.0;
        for (double s : sig) norm2 += s * s;
        if (norm2 > 0.0) {
          const double scale = std::sqrt(static_cast<double>(V) / norm2);
          for (double& s : sig) s *= scale;
        }
      }

      VideoFeatures vf;
      vf.video_id = video_id;
      vf.num_units = cfg.units_per_video;
      vf.feature_dim = V;
      vf.unit_duration_frames = 16;
      vf.data.resize(static_cast<size_t>(cfg.units_per_video) * V);
      for (uint32_t u = 0; u < cfg.units_per_video; ++u) {
        const std::vector<double>* sig = nullptr;
        for (uint32_t mi = 0; mi < cfg.moments_per_video; ++mi)
          if (u >= moments[mi].start && u < moments[mi].end) sig = &signals[mi];
        float* row = vf.unit(u);
        for (uint32_t d = 0; d < V; ++d) {
          const double base = sig ? (*sig)[d] : 0.0;
          row[d] = static_cast<float>(base + rng.normal(0.0, noise_sigma));
        }
      }
      write_features(vf, (fs::path(out_dir) / "features" / (video_id + ".tgaf")).string());
      ds.video_index.emplace(video_id, ds.videos.size());
      ds.videos.push_back(std::move(vf));

      for (uint32_t mi = 0; mi < cfg.moments_per_video; ++mi) {
        SentenceQuery q;
        q.query_id = video_id + "_q" + std::to_string(mi);
        q.video_id = video_id;
        q.tokens = sentences[mi];
        q.gt_moment = moments[mi];
        q.split = split;
        ds.queries.push_back(std::move(q));
      }
    }
  }

  json vocab_json = json::object();
  for (uint32_t i = 0; i < cfg.vocab_size; ++i) vocab_json[ds.vocab[i]] = i;
  {
    std::ofstream os(fs::path(out_dir) / "vocab.json", std::ios::trunc);
    if (!os) throw DataError(out_dir + ": cannot write vocab.json");
    os << vocab_json.dump(2) << "\n";
  }

  json manifest;
  manifest["feature_dim"] = V;
  manifest["vocabulary"] = "vocab.json";
  manifest["videos"] = json::array();
  for (const VideoFeatures& v : ds.videos)
    manifest["videos"].push_back({{"id", v.video_id},
                                  {"features", "features/" + v.video_id + ".tgaf"},
                                  {"num_units", v.num_units},
                                  {"unit_duration_frames", v.unit_duration_frames}});
  manifest["queries"] = json::array();
  for (const SentenceQuery& q : ds.queries)
    manifest["queries"].push_back({{"id", q.query_id},
                                   {"video_id", q.video_id},
                                   {"tokens", q.tokens},
                                   {"gt_moment", json::array({q.gt_moment->start, q.gt_moment->end})},
                                   {"split", split_name(q.split)}});
  {
    std::ofstream os(fs::path(out_dir) / "manifest.json", std::ios::trunc);
    if (!os) throw DataError(out_dir + ": cannot write manifest.json");
    os << manifest.dump(2) << "\n";
  }
  return ds;
}

}  // namespace tga
