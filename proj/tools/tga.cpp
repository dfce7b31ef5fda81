#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tga/attention.hpp"
#include "tga/checkpoint.hpp"
#include "tga/dataio.hpp"
#include "tga/error.hpp"
#include "tga/evaluate.hpp"
#include "tga/format.hpp"
#include "tga/selfcheck.hpp"
#include "tga/synthetic.hpp"
#include "tga/trainer.hpp"

namespace fs = std::filesystem;
using tga::fmt_double;

namespace {

std::vector<uint32_t> parse_u32_list(const std::string& text, const std::string& flag) {
  std::vector<uint32_t> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    try {
      size_t used = 0;
      const unsigned long v = std::stoul(item, &used);
      if (used != item.size() || item.empty()) throw std::invalid_argument(item);
      out.push_back(static_cast<uint32_t>(v));
    } catch (const std::exception&) {
      throw tga::UsageError(flag + ": malformed list item \"" + item + "\"");
    }
    pos = comma + 1;
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    try {
      size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size() || item.empty()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw tga::UsageError(flag + ": malformed list item \"" + item + "\"");
    }
    pos = comma + 1;
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, double>)
      out += fmt_double(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

std::string manifest_path_of(const std::string& data) {
  if (fs::is_directory(data)) return (fs::path(data) / "manifest.json").string();
  return data;
}

struct SynthArgs {
  std::string config, out;
  uint64_t seed = 0;
  bool seed_set = false;
};

int run_synth(const SynthArgs& a) {
  tga::SyntheticConfig cfg = tga::load_synth_config(a.config);
  if (a.seed_set) cfg.seed = a.seed;
  std::cout << "config subcommand=synth config=" << a.config << " out=" << a.out
            << " seed=" << cfg.seed << " num_videos=train:" << cfg.num_train_videos
            << ",val:" << cfg.num_val_videos << ",test:" << cfg.num_test_videos
            << " units_per_video=" << cfg.units_per_video
            << " feature_dim=" << cfg.feature_dim << " vocab_size=" << cfg.vocab_size
            << " sentence_length=" << cfg.sentence_length
            << " moments_per_video=" << cfg.moments_per_video
            << " moment_length=" << cfg.moment_length_min << "-" << cfg.moment_length_max
            << " signal_to_noise=" << fmt_double(cfg.signal_to_noise) << "\n";
  const tga::Dataset ds = tga::generate_synthetic(cfg, a.out);
  std::cout << "synth videos=" << ds.videos.size() << " queries=" << ds.queries.size()
            << " planted_moments=" << ds.queries.size() << " vocab=" << ds.vocab.size()
            << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, out;
  tga::TrainConfig cfg;
};

int run_train(const TrainArgs& a) {
  const tga::TrainConfig& cfg = a.cfg;
  std::cout << "config subcommand=train data=" << a.data << " out=" << a.out
            << " lr=" << fmt_double(cfg.lr) << " lr_decay_every=" << cfg.lr_decay_every
            << " lr_decay_factor=" << fmt_double(cfg.lr_decay_factor)
            << " margin=" << fmt_double(cfg.margin) << " batch=" << cfg.batch_size
            << " epochs=" << cfg.max_epochs << " seed=" << cfg.seed
            << " word_dim=" << cfg.word_dim << " text_dim=" << cfg.text_dim
            << " joint_dim=" << cfg.joint_dim << " dropout=" << fmt_double(cfg.dropout)
            << " strict_batch_negatives=" << (cfg.strict_negatives ? 1 : 0)
            << " bidirectional_val=" << (cfg.bidirectional_val ? 1 : 0) << "\n";
  cfg.validate();
  const tga::Dataset ds = tga::load_manifest(manifest_path_of(a.data));
  const tga::TrainResult result = tga::train(ds, cfg, [](const tga::EpochRecord& r) {
    std::cout << "epoch=" << r.epoch << " lr=" << fmt_double(r.lr)
              << " mean_loss=" << fmt_double(r.mean_loss)
              << " val_recall_sum=" << fmt_double(r.val_recall_sum) << "\n";
  });
  fs::create_directories(a.out);
  tga::save_checkpoint(result.best, (fs::path(a.out) / "best.tgac").string());
  tga::save_checkpoint(result.last, (fs::path(a.out) / "last.tgac").string());
  tga::write_runlog(result.log, (fs::path(a.out) / "runlog.json").string());
  std::cout << "train best_epoch=" << result.log.best_epoch
            << " best_recall_sum=" << fmt_double(result.log.best_recall_sum)
            << " out=" << a.out << "\n";
  std::cerr << "wall_seconds=" << fmt_double(result.log.wall_seconds) << "\n";
  return 0;
}

struct EvalArgs {
  std::string data, ckpt, out = ".";
  std::string split = "test";
  std::string protocol = "sliding_window";
  std::string windows = "128,256";
  double stride = 0.5;
  std::string iou_list;
  bool iou_set = false;
  std::string k_list = "1,5,10";
  bool score_sum = false;
};

tga::Protocol parse_protocol(const std::string& p) {
  if (p == "sliding_window") return tga::Protocol::sliding_window;
  if (p == "didemo") return tga::Protocol::didemo;
  throw tga::UsageError("--protocol must be sliding_window or didemo, got \"" + p + "\"");
}

int run_eval(const EvalArgs& a) {
  tga::EvalConfig cfg;
  cfg.protocol = parse_protocol(a.protocol);
  cfg.window_frames = parse_u32_list(a.windows, "--windows");
  cfg.stride_fraction = a.stride;
  // exact-match column comes free with the all-spans protocol
  const std::string default_iou =
      cfg.protocol == tga::Protocol::didemo ? "0.3,0.5,0.7,1.0" : "0.3,0.5,0.7";
  cfg.iou_thresholds = parse_double_list(a.iou_set ? a.iou_list : default_iou, "--iou");
  cfg.ks = parse_u32_list(a.k_list, "--k");
  cfg.sum_score = a.score_sum;
  for (double t : cfg.iou_thresholds)
    if (t < 0.0 || t > 1.0) throw tga::UsageError("--iou: thresholds must lie in [0, 1]");
  for (uint32_t k : cfg.ks)
    if (k == 0) throw tga::UsageError("--k: values must be positive");
  if (!(a.stride > 0.0) || a.stride > 1.0)
    throw tga::UsageError("--stride must lie in (0, 1]");

  std::cout << "config subcommand=eval data=" << a.data << " ckpt=" << a.ckpt
            << " split=" << a.split << " protocol=" << a.protocol
            << " windows=" << join(cfg.window_frames)
            << " stride=" << fmt_double(cfg.stride_fraction)
            << " iou=" << join(cfg.iou_thresholds) << " k=" << join(cfg.ks)
            << " score=" << (cfg.sum_score ? "sum" : "mean") << " out=" << a.out << "\n";

  const tga::Dataset ds = tga::load_manifest(manifest_path_of(a.data));
  const tga::Model<float> m = tga::load_checkpoint(a.ckpt);
  const tga::Split split = tga::parse_split(a.split, "--split");
  const tga::EvalReport report = tga::evaluate(m, ds, split, cfg);

  for (size_t ti = 0; ti < report.iou_thresholds.size(); ++ti)
    for (size_t ki = 0; ki < report.ks.size(); ++ki)
      std::cout << "recall tau=" << fmt_double(report.iou_thresholds[ti])
                << " k=" << report.ks[ki]
                << " value=" << fmt_double(report.recall[ti][ki]) << "\n";
  std::cout << "miou value=" << fmt_double(report.miou) << "\n";

  fs::create_directories(a.out);
  tga::write_report_json(report, (fs::path(a.out) / "report.json").string());
  tga::write_report_csv(report, (fs::path(a.out) / "report.csv").string());
  return 0;
}

struct LocalizeArgs {
  std::string data, ckpt, query_id;
  uint32_t top = 5;
  std::string protocol = "sliding_window";
  std::string windows = "128,256";
  double stride = 0.5;
  bool score_sum = false;
  double fps = 25.0;
  std::string dump_trace, dump_trace_csv;
};

int run_localize(const LocalizeArgs& a) {
  std::cout << "config subcommand=localize data=" << a.data << " ckpt=" << a.ckpt
            << " query_id=" << a.query_id << " top=" << a.top
            << " protocol=" << a.protocol << " windows=" << a.windows
            << " stride=" << fmt_double(a.stride)
            << " score=" << (a.score_sum ? "sum" : "mean")
            << " fps=" << fmt_double(a.fps) << "\n";
  if (!(a.fps > 0.0)) throw tga::UsageError("--fps must be positive");
  if (!(a.stride > 0.0) || a.stride > 1.0)
    throw tga::UsageError("--stride must lie in (0, 1]");
  const tga::Protocol protocol = parse_protocol(a.protocol);
  const std::vector<uint32_t> windows = parse_u32_list(a.windows, "--windows");

  const tga::Dataset ds = tga::load_manifest(manifest_path_of(a.data));
  const tga::Model<float> m = tga::load_checkpoint(a.ckpt);

  const tga::SentenceQuery* query = nullptr;
  for (const tga::SentenceQuery& q : ds.queries)
    if (q.query_id == a.query_id) query = &q;
  if (!query) throw tga::DataError("unknown query id \"" + a.query_id + "\"");
  const tga::VideoFeatures& video = ds.video_of(query->video_id);

  const std::vector<float> w = tga::embed_sentence(m, query->tokens);
  tga::TgaCache<float> cache;
  tga::text_guided_feature(m, video, w, false, 0.0, nullptr, &cache);
  std::vector<double> weights(cache.attn.begin(), cache.attn.end());

  const std::vector<tga::Moment> candidates =
      protocol == tga::Protocol::didemo
          ? tga::didemo_candidates(video.num_units)
          : tga::sliding_window_candidates(video.num_units, video.unit_duration_frames,
                                           windows, a.stride);
  const std::vector<tga::ScoredCandidate> ranked =
      tga::score_candidates(weights, candidates, a.score_sum);

  const double unit_seconds = static_cast<double>(video.unit_duration_frames) / a.fps;
  const size_t shown = std::min<size_t>(a.top, ranked.size());
  for (size_t r = 0; r < shown; ++r) {
    const auto& c = ranked[r];
    std::cout << "moment rank=" << (r + 1) << " start=" << c.start << " end=" << c.end
              << " score=" << fmt_double(c.score)
              << " seconds=" << fmt_double(c.start * unit_seconds) << "-"
              << fmt_double(c.end * unit_seconds) << "\n";
  }

  if (!a.dump_trace.empty()) {
    nlohmann::json line;
    line["query_id"] = query->query_id;
    line["video_id"] = query->video_id;
    line["weights"] = weights;
    std::ofstream os(a.dump_trace, std::ios::trunc);
    if (!os) throw tga::DataError(a.dump_trace + ": cannot write trace");
    os << line.dump() << "\n";
  }
  if (!a.dump_trace_csv.empty()) {
    std::ofstream os(a.dump_trace_csv, std::ios::trunc);
    if (!os) throw tga::DataError(a.dump_trace_csv + ": cannot write trace");
    os << "unit_index,weight\n";
    for (size_t u = 0; u < weights.size(); ++u)
      os << u << "," << fmt_double(weights[u]) << "\n";
  }
  return 0;
}

struct GradcheckArgs {
  uint64_t seed = 7;
  double tolerance = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a) {
  std::cout << "config subcommand=gradcheck seed=" << a.seed
            << " tolerance=" << fmt_double(a.tolerance) << "\n";
  if (a.tolerance < 0.0) throw tga::UsageError("--tolerance must be nonnegative");
  const tga::GradCheckReport report = tga::run_pipeline_gradcheck(a.seed, a.tolerance);
  for (const tga::GradCheckEntry& e : report.tensors)
    std::cout << "tensor name=" << e.name << " coords=" << e.coords_checked
              << " max_rel_err=" << fmt_double(e.max_rel_err) << "\n";
  const tga::GradCheckEntry& worst = report.worst();
  std::cout << "gradcheck pass=" << (report.pass ? 1 : 0) << " worst=" << worst.name
            << " worst_rel_err=" << fmt_double(worst.max_rel_err) << "\n";
  return report.pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly supervised text-to-video moment retrieval"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--config", synth_args.config, "synthetic config JSON")->required();
  synth->add_option("--out", synth_args.out, "output directory")->required();
  CLI::Option* synth_seed = synth->add_option("--seed", synth_args.seed, "override config seed");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--data", train_args.data, "dataset directory or manifest path")->required();
  train->add_option("--out", train_args.out, "output directory")->required();
  train->add_option("--lr", train_args.cfg.lr, "learning rate");
  train->add_option("--lr-decay-every", train_args.cfg.lr_decay_every, "epochs per decay step");
  train->add_option("--lr-decay-factor", train_args.cfg.lr_decay_factor, "decay divisor");
  train->add_option("--margin", train_args.cfg.margin, "ranking margin");
  train->add_option("--batch", train_args.cfg.batch_size, "batch size");
  train->add_option("--epochs", train_args.cfg.max_epochs, "epochs to run")->required();
  train->add_option("--seed", train_args.cfg.seed, "random seed");
  train->add_option("--word-dim", train_args.cfg.word_dim, "word embedding size");
  train->add_option("--text-dim", train_args.cfg.text_dim, "sentence feature size");
  train->add_option("--joint-dim", train_args.cfg.joint_dim, "joint space size");
  train->add_option("--dropout", train_args.cfg.dropout, "dropout rate");
  train->add_flag("--strict-batch-negatives", train_args.cfg.strict_negatives,
                  "count same-video entries as negatives");
  train->add_flag("--bidirectional-val", train_args.cfg.bidirectional_val,
                  "add video-to-text recall to validation");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "evaluate moment localization");
  eval->add_option("--data", eval_args.data, "dataset directory or manifest path")->required();
  eval->add_option("--ckpt", eval_args.ckpt, "checkpoint file")->required();
  eval->add_option("--out", eval_args.out, "report output directory");
  eval->add_option("--split", eval_args.split, "split to evaluate");
  eval->add_option("--protocol", eval_args.protocol, "sliding_window or didemo");
  eval->add_option("--windows", eval_args.windows, "window lengths in frames");
  eval->add_option("--stride", eval_args.stride, "stride as a fraction of the window");
  CLI::Option* eval_iou = eval->add_option("--iou", eval_args.iou_list, "IoU thresholds");
  eval->add_option("--k", eval_args.k_list, "recall cutoffs");
  eval->add_flag("--score-sum", eval_args.score_sum, "sum attention instead of averaging");

  LocalizeArgs loc_args;
  CLI::App* localize = app.add_subcommand("localize", "localize one query");
  localize->add_option("--data", loc_args.data, "dataset directory or manifest path")->required();
  localize->add_option("--ckpt", loc_args.ckpt, "checkpoint file")->required();
  localize->add_option("--query-id", loc_args.query_id, "query to localize")->required();
  localize->add_option("--top", loc_args.top, "moments to print");
  localize->add_option("--protocol", loc_args.protocol, "sliding_window or didemo");
  localize->add_option("--windows", loc_args.windows, "window lengths in frames");
  localize->add_option("--stride", loc_args.stride, "stride as a fraction of the window");
  localize->add_flag("--score-sum", loc_args.score_sum, "sum attention instead of averaging");
  localize->add_option("--fps", loc_args.fps, "display frame rate for seconds");
  localize->add_option("--dump-trace", loc_args.dump_trace, "write attention trace JSONL");
  localize->add_option("--dump-trace-csv", loc_args.dump_trace_csv, "write attention trace CSV");

  GradcheckArgs gc_args;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the pipeline");
  gradcheck->add_option("--seed", gc_args.seed, "fixture seed");
  gradcheck->add_option("--tolerance", gc_args.tolerance, "max relative error");

  try {
    app.parse(argc, argv);
    if (*synth) {
      synth_args.seed_set = synth_seed->count() > 0;
      return run_synth(synth_args);
    }
    if (*train) return run_train(train_args);
    if (*eval) {
      eval_args.iou_set = eval_iou->count() > 0;
      return run_eval(eval_args);
    }
    if (*localize) return run_localize(loc_args);
    if (*gradcheck) return run_gradcheck(gc_args);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const tga::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const tga::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const tga::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  }
}
