// motenc command line: synthesis, training, evaluation, classification and
// feature analysis for skeletal motion temporal encoders.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <motenc/motenc.hpp>

namespace fs = std::filesystem;
using namespace motenc;

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct TeeBuf : std::streambuf {
  std::streambuf* a = nullptr;
  std::streambuf* b = nullptr;
  int overflow(int c) override {
    if (c == EOF) return c;
    if (a) a->sputc(char(c));
    if (b) b->sputc(char(c));
    return c;
  }
};

std::string hash_hex(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(detail::fnv1a(text)));
  return buf;
}

std::vector<std::string> motion_files_in(const std::string& dir) {
  if (!fs::exists(dir)) throw ConfigError("data path does not exist: " + dir);
  std::vector<std::string> files;
  if (fs::is_regular_file(dir)) {
    files.push_back(dir);
    return files;
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".motenc" || ext == ".mrec") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw ConfigError("no .motenc or .mrec files under " + dir);
  }
  return files;
}

std::vector<MotionRecording> load_recordings(const std::string& dir, int target_fps,
                                             bool normalize) {
  std::vector<MotionRecording> recs;
  for (const auto& file : motion_files_in(dir)) {
    MotionRecording rec = load_motion_file(file);
    if (target_fps > 0 && rec.fps != target_fps) rec = downsample(rec, target_fps);
    if (normalize) rec = normalize_recording(rec);
    recs.push_back(std::move(rec));
  }
  return recs;
}

void require_joint_match(const std::vector<MotionRecording>& recs,
                         const ArchitectureSpec& spec) {
  for (const auto& rec : recs) {
    if (rec.num_joints() != spec.num_joints) {
      throw ConfigError("recording " + rec.id() + " has " +
                        std::to_string(rec.num_joints()) + " joints, model expects " +
                        std::to_string(spec.num_joints));
    }
  }
}

std::vector<WindowPair> all_window_pairs(const std::vector<MotionRecording>& recs,
                                         std::size_t delta_t) {
  std::vector<WindowPair> pairs;
  std::size_t skipped = 0;
  for (const auto& rec : recs) {
    auto p = make_window_pairs(rec, delta_t);
    if (p.empty()) ++skipped;
    pairs.insert(pairs.end(), std::make_move_iterator(p.begin()),
                 std::make_move_iterator(p.end()));
  }
  if (skipped > 0) {
    std::cerr << "note: " << skipped << " recording(s) shorter than 2*delta_t frames"
              << " contributed no window pairs\n";
  }
  return pairs;
}

std::vector<double> parse_horizons(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    bool ok = false;
    const double v = detail::parse_double(tok, ok);
    if (!ok || v <= 0.0) throw ConfigError("bad horizon '" + tok + "' in " + csv);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty horizon list");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  detail::write_file_bytes(path, text);
}

SkeletonSchema load_schema_json(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("schema file " + path + ": " + e.what());
  }
  SkeletonSchema schema;
  try {
    schema.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    schema.hierarchy = hierarchy_from_json(j.at("hierarchy"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("schema file " + path + ": " + e.what());
  }
  schema.validate();
  return schema;
}

// ---------------------------------------------------------------------------
// Option bags
// ---------------------------------------------------------------------------

struct SynthOpts {
  std::vector<std::string> actions;
  double duration = 10.0;
  int fps = 60;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::string out;
  bool binary = false;
};

struct TrainOpts {
  std::string arch = "hte";
  std::string data;
  std::string out;
  std::string finetune_from;
  std::string schema_path;
  std::string log_path;
  std::string conv_branches = "30x5,30x15,30x30";
  std::size_t epochs = 0;
  std::size_t delta_t = 100;
  std::size_t outer_width = 300;
  std::size_t bottleneck = 100;
  std::size_t joint_width = 10, limb_width = 30, group_width = 60, body_width = 300;
  double lr = 0.01, momentum = 0.9, decay = 0.0005;
  std::size_t batch = 400;
  double dropout_start = 0.1, dropout_end = 0.3;
  bool no_input_dropout = false;
  bool pretrain = false;
  std::size_t pretrain_epochs = 10;
  double init_std = 1.0;
  std::size_t init_nonzeros = 15;
  std::uint64_t seed = 0;
  int target_fps = 0;
};

struct EvalOpts {
  std::string checkpoint;
  std::string data;
  std::string horizons = "80,160,320,560,1000,1600";
  std::string mask_limb;
  std::string out;
  std::string set_id;
  std::size_t threads = 1;
  int target_fps = 0;
};

struct ClassifyOpts {
  std::string te_checkpoint;
  std::string clf_checkpoint;
  std::string train_data;
  std::string data;
  std::string tap = "middle";
  std::string agg = "mean";
  std::string out;
  std::string save_clf;
  double window_seconds = 8.0;
  std::size_t feature_stride = 1;
  std::size_t epochs = 200;
  double lr = 0.01;
  std::size_t batch = 400;
  std::uint64_t seed = 0;
  int target_fps = 0;
};

struct StaOpts {
  std::string checkpoint;
  std::string data;
  std::string layer;
  std::string units;
  double threshold = 0.8;
  std::string out;
  int target_fps = 0;
};

struct PredictOpts {
  std::string checkpoint;
  std::string input;
  std::string out;
  long long at = -1;
  std::size_t rollout = 0;
};

struct TrajectoryOpts {
  std::string checkpoint;
  std::string input;
  std::string tap = "middle";
  std::size_t components = 3;
  std::string out;
};

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int run_synth(const SynthOpts& opt, const std::string& cfg_hash) {
  std::vector<std::string> actions = opt.actions;
  if (actions.empty()) actions = synth_actions();
  for (const auto& a : actions) {
    if (std::find(synth_actions().begin(), synth_actions().end(), a) ==
        synth_actions().end()) {
      std::string valid;
      for (const auto& v : synth_actions()) valid += (valid.empty() ? "" : ", ") + v;
      throw ConfigError("unknown action '" + a + "' (valid: " + valid + ")");
    }
  }
  fs::create_directories(opt.out);
  std::ostringstream manifest;
  manifest << "# motenc synth manifest\n";
  manifest << "# config=" << cfg_hash << " seed=" << opt.seed << "\n";
  SeededRng root(opt.seed);
  for (const auto& action : actions) {
    for (std::size_t i = 0; i < opt.count; ++i) {
      SeededRng rng = root.derive(detail::fnv1a(action) ^ (0x517cc1b7ull * (i + 1)));
      MotionRecording rec = synth_generate(action, opt.duration, opt.fps, rng);
      rec.subject = "synth";
      rec.trial = action + "-" + std::to_string(i) + "-s" + std::to_string(opt.seed);
      const std::string name =
          action + "_" + std::to_string(i) + (opt.binary ? ".mrec" : ".motenc");
      const std::string path = (fs::path(opt.out) / name).string();
      save_motion_file(rec, path);
      manifest << name << " action=" << action << " frames=" << rec.length()
               << " fps=" << rec.fps << "\n";
    }
  }
  write_text((fs::path(opt.out) / "manifest.txt").string(), manifest.str());
  std::cout << manifest.str();
  return 0;
}

ArchitectureSpec spec_from_train_opts(const TrainOpts& opt,
                                      const std::vector<MotionRecording>& recs) {
  ArchitectureSpec spec;
  spec.kind = arch_kind_from_string(opt.arch);
  if (spec.kind == ArchKind::classifier) {
    throw ConfigError("train builds temporal encoders; classifiers are trained by "
                      "the classify command");
  }
  spec.delta_t = opt.delta_t;
  spec.outer_width = opt.outer_width;
  spec.bottleneck_width = opt.bottleneck;
  spec.init_std = opt.init_std;
  spec.init_nonzeros = opt.init_nonzeros;
  if (!opt.schema_path.empty()) {
    const SkeletonSchema schema = load_schema_json(opt.schema_path);
    spec.num_joints = schema.num_joints();
    spec.hierarchy = schema.hierarchy;
  } else if (!recs.empty()) {
    spec.num_joints = recs[0].num_joints();
    spec.hierarchy = recs[0].schema.hierarchy;
  }
  spec.hierarchy.widths = {opt.joint_width, opt.limb_width, opt.group_width,
                           opt.body_width};
  if (spec.kind == ArchKind::cte) {
    spec.conv_branches.clear();
    std::istringstream in(opt.conv_branches);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      const auto x = tok.find('x');
      if (x == std::string::npos) {
        throw ConfigError("bad conv branch '" + tok + "', expected NxW");
      }
      try {
        spec.conv_branches.push_back(
            {std::stoul(tok.substr(0, x)), std::stoul(tok.substr(x + 1))});
      } catch (...) {
        throw ConfigError("bad conv branch '" + tok + "', expected NxW");
      }
    }
  }
  return spec;
}

int run_train(const TrainOpts& opt, const std::string& cfg_hash) {
  std::vector<std::string> problems;
  if (opt.epochs == 0) problems.push_back("--epochs must be at least 1");
  if (opt.delta_t == 0) problems.push_back("--delta-t must be at least 1");
  if (!fs::exists(opt.data)) {
    problems.push_back("data path does not exist: " + opt.data);
  }
  if (!opt.finetune_from.empty() && !fs::exists(opt.finetune_from)) {
    problems.push_back("checkpoint does not exist: " + opt.finetune_from);
  }
  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
    throw ConfigError(joined);
  }

  auto recs = load_recordings(opt.data, opt.target_fps, /*normalize=*/true);
  const int fps = recs[0].fps;
  for (const auto& rec : recs) {
    if (rec.fps != fps) {
      throw ConfigError("mixed frame rates in " + opt.data +
                        "; pass --target-fps to resample");
    }
  }

  TrainConfig config;
  config.learning_rate = opt.lr;
  config.momentum = opt.momentum;
  config.weight_decay = opt.decay;
  config.batch_size = opt.batch;
  config.epochs = opt.epochs;
  config.dropout_start = opt.dropout_start;
  config.dropout_end = opt.dropout_end;
  config.input_dropout = !opt.no_input_dropout;
  config.pretrain = opt.pretrain;
  config.pretrain_epochs = opt.pretrain_epochs;
  config.seed = opt.seed;
  for (const auto& warning : config.validate()) {
    std::cerr << "warning: " << warning << "\n";
  }

  std::ofstream log_file;
  TeeBuf tee;
  tee.a = std::cout.rdbuf();
  if (!opt.log_path.empty()) {
    log_file.open(opt.log_path, std::ios::trunc);
    if (!log_file) throw IoError("cannot open log file " + opt.log_path);
    tee.b = log_file.rdbuf();
  }
  std::ostream log(&tee);
  config.log = &log;

  Network net;
  if (!opt.finetune_from.empty()) {
    net = load_checkpoint(opt.finetune_from);
    require_joint_match(recs, net.spec);
    auto pairs = all_window_pairs(recs, net.spec.delta_t);
    if (pairs.empty()) throw ConfigError("no window pairs in " + opt.data);
    std::set<std::string> labels;
    for (const auto& rec : recs) labels.insert(rec.label.value_or("-"));
    const std::string note = labels.size() == 1 ? *labels.begin() : opt.data;
    finetune(net, pairs, config, note);
  } else {
    const ArchitectureSpec spec = spec_from_train_opts(opt, recs);
    require_joint_match(recs, spec);
    auto pairs = all_window_pairs(recs, spec.delta_t);
    if (pairs.empty()) throw ConfigError("no window pairs in " + opt.data);
    SeededRng init_rng = SeededRng(opt.seed).derive(detail::fnv1a("init"));
    net = build_network(spec, init_rng);
    if (config.pretrain) pretrain_layerwise(net, pairs, config);
    train_te(net, pairs, config);
  }
  net.meta.config_hash = cfg_hash;
  save_checkpoint(net, opt.out);
  std::cout << "checkpoint written to " << opt.out << " (" << parameter_count(net)
            << " parameters)\n";
  return 0;
}

int run_eval(const EvalOpts& opt, const std::string& cfg_hash) {
  const Network net = load_checkpoint(opt.checkpoint);
  if (!net.is_temporal_encoder()) {
    throw ConfigError("eval needs a temporal-encoder checkpoint");
  }
  auto recs = load_recordings(opt.data, opt.target_fps, /*normalize=*/true);
  require_joint_match(recs, net.spec);
  if (!opt.mask_limb.empty() && !net.spec.hierarchy.find_limb(opt.mask_limb)) {
    throw ConfigError("unknown limb '" + opt.mask_limb + "' in the model hierarchy");
  }
  // Masking uses the model's hierarchy, not whatever the files carried.
  if (!opt.mask_limb.empty()) {
    for (auto& rec : recs) rec.schema.hierarchy = net.spec.hierarchy;
  }
  const auto horizons = parse_horizons(opt.horizons);
  const std::string set_id =
      opt.set_id.empty() ? fs::path(opt.data).filename().string() : opt.set_id;

  const std::string model_id =
      std::string(to_string(net.spec.kind)) + (net.meta.finetuned ? "-f" : "");
  HorizonReport report;
  if (opt.mask_limb.empty()) {
    report = evaluate_horizons(net_predictor(net), recs, horizons, net.spec.delta_t,
                               model_id, set_id, "", opt.threads);
  } else {
    report = evaluate_missing_limb(net_predictor(net), recs, opt.mask_limb, horizons,
                                   net.spec.delta_t, model_id, set_id, opt.threads);
  }
  const std::vector<std::string> comments = {
      "config=" + cfg_hash + " seed=" + std::to_string(net.meta.seed),
      "checkpoint=" + fs::path(opt.checkpoint).filename().string()};
  const std::string table = horizon_table(report, comments);
  std::cout << table;
  write_text(opt.out + ".txt", table);
  write_text(opt.out + ".csv", horizon_csv(report, comments));
  std::cout << "report written to " << opt.out << ".txt and " << opt.out << ".csv\n";
  return 0;
}

int run_classify(const ClassifyOpts& opt, const std::string& cfg_hash) {
  if (opt.tap != "lower" && opt.tap != "middle" && opt.tap != "upper") {
    throw ConfigError("--tap must be lower, middle or upper");
  }
  if (opt.agg != "vote" && opt.agg != "mean") {
    throw ConfigError("--agg must be mean or vote");
  }
  const Network te = load_checkpoint(opt.te_checkpoint);
  if (!te.is_temporal_encoder()) {
    throw ConfigError("--te must point at a temporal-encoder checkpoint");
  }
  if (te.taps.find(opt.tap) == te.taps.end()) {
    throw ConfigError("tap '" + opt.tap + "' not present in the encoder");
  }
  if (opt.clf_checkpoint.empty() == opt.train_data.empty()) {
    throw ConfigError("pass exactly one of --clf or --train-data");
  }
  auto test_recs = load_recordings(opt.data, opt.target_fps, /*normalize=*/true);
  require_joint_match(test_recs, te.spec);
  for (const auto& rec : test_recs) {
    if (!rec.label) {
      throw ConfigError("test recording " + rec.id() + " has no label");
    }
  }
  const Aggregation agg =
      opt.agg == "vote" ? Aggregation::majority_vote : Aggregation::mean_softmax;

  Network clf;
  std::vector<std::string> class_names;
  if (!opt.clf_checkpoint.empty()) {
    clf = load_checkpoint(opt.clf_checkpoint);
    if (clf.spec.kind != ArchKind::classifier) {
      throw ConfigError("--clf must point at a classifier checkpoint");
    }
    // The class list rides in the checkpoint note as "classes:a,b,c".
    const std::string prefix = "classes:";
    const auto pos = clf.meta.note.find(prefix);
    if (pos != std::string::npos) {
      std::istringstream in(clf.meta.note.substr(pos + prefix.size()));
      std::string tok;
      while (std::getline(in, tok, ',')) {
        if (!tok.empty() && tok.find(';') == std::string::npos) {
          class_names.push_back(tok);
        }
      }
    }
    if (class_names.size() != clf.spec.classifier.classes) {
      throw ConfigError("classifier checkpoint does not carry a usable class list");
    }
  } else {
    auto train_recs = load_recordings(opt.train_data, opt.target_fps, true);
    require_joint_match(train_recs, te.spec);

    // Refuse train/test overlap by recording id.
    std::set<std::string> train_ids;
    for (const auto& rec : train_recs) train_ids.insert(rec.id());
    for (const auto& rec : test_recs) {
      if (train_ids.count(rec.id())) {
        throw ConfigError("recording " + rec.id() + " appears in both --train-data and "
                          "--data; refusing to evaluate on training sequences");
      }
    }

    std::set<std::string> label_set;
    for (const auto& rec : train_recs) {
      if (!rec.label) {
        throw ConfigError("training recording " + rec.id() + " has no label");
      }
      label_set.insert(*rec.label);
    }
    class_names.assign(label_set.begin(), label_set.end());
    if (class_names.size() < 2) {
      throw ConfigError("classification needs at least two labelled actions");
    }
    std::map<std::string, std::size_t> class_index;
    for (std::size_t i = 0; i < class_names.size(); ++i) class_index[class_names[i]] = i;

    // Tap features for every step of every training recording.
    const std::size_t delta_t = te.spec.delta_t;
    std::vector<double> feature_rows;
    std::vector<std::size_t> labels;
    std::size_t width = 0;
    for (const auto& rec : train_recs) {
      if (rec.length() < delta_t) continue;
      const std::size_t steps = rec.length() - delta_t + 1;
      for (std::size_t s = 0; s < steps; s += opt.feature_stride) {
        const Tensor window = detail::window_at(rec, s, delta_t);
        const Tensor feats = extract_features(te, window, opt.tap);
        width = feats.size();
        feature_rows.insert(feature_rows.end(), feats.data(), feats.data() + width);
        labels.push_back(class_index.at(*rec.label));
      }
    }
    if (labels.empty()) throw ConfigError("no training windows under --train-data");
    Tensor features({labels.size(), width}, std::move(feature_rows));

    ArchitectureSpec clf_spec;
    clf_spec.kind = ArchKind::classifier;
    clf_spec.classifier = {width, 50, 20, class_names.size()};
    clf_spec.init_std = te.spec.init_std;
    clf_spec.init_nonzeros = te.spec.init_nonzeros;
    SeededRng rng = SeededRng(opt.seed).derive(detail::fnv1a("classifier"));
    clf = build_classifier(clf_spec, rng);

    TrainConfig config;
    config.learning_rate = opt.lr;
    config.batch_size = opt.batch;
    config.epochs = opt.epochs;
    config.seed = opt.seed;
    for (const auto& warning : config.validate()) {
      std::cerr << "warning: " << warning << "\n";
    }
    train_classifier(clf, features, labels, config);
    std::string joined;
    for (const auto& name : class_names) joined += name + ",";
    clf.meta.note = "classes:" + joined;
    clf.meta.config_hash = cfg_hash;
    if (!opt.save_clf.empty()) save_checkpoint(clf, opt.save_clf);
  }

  std::map<std::string, std::size_t> class_index;
  for (std::size_t i = 0; i < class_names.size(); ++i) class_index[class_names[i]] = i;

  ConfusionMatrix matrix;
  matrix.class_names = class_names;
  matrix.counts = Tensor({class_names.size(), class_names.size()});
  for (const auto& rec : test_recs) {
    const auto it = class_index.find(*rec.label);
    if (it == class_index.end()) {
      throw ConfigError("test label '" + *rec.label + "' unknown to the classifier");
    }
    const auto result = classify_sequence(clf, te, rec, opt.tap, opt.window_seconds, agg);
    matrix.counts(it->second, result.class_index) += 1.0;
  }
  const std::vector<std::string> comments = {
      "config=" + cfg_hash + " seed=" + std::to_string(opt.seed), "tap=" + opt.tap,
      "window_seconds=" + detail::format_double(opt.window_seconds)};
  const std::string table = confusion_table(matrix, comments);
  std::cout << table;
  if (!opt.out.empty()) {
    write_text(opt.out + ".txt", table);
    std::cout << "confusion matrix written to " << opt.out << ".txt\n";
  }
  return 0;
}

int run_sta(const StaOpts& opt, const std::string& cfg_hash) {
  const Network net = load_checkpoint(opt.checkpoint);
  if (!net.is_temporal_encoder()) {
    throw ConfigError("sta needs a temporal-encoder checkpoint");
  }
  auto recs = load_recordings(opt.data, opt.target_fps, /*normalize=*/true);
  require_joint_match(recs, net.spec);

  std::vector<std::size_t> units;
  std::istringstream in(opt.units);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      units.push_back(std::stoul(tok));
    } catch (...) {
      throw ConfigError("bad unit '" + tok + "' in --units");
    }
  }
  if (units.empty()) throw ConfigError("--units needs at least one unit index");

  const std::size_t delta_t = net.spec.delta_t;
  std::vector<Tensor> windows;
  for (const auto& rec : recs) {
    if (rec.length() < delta_t) continue;
    for (std::size_t s = 0; s + delta_t <= rec.length(); ++s) {
      windows.push_back(detail::window_at(rec, s, delta_t));
    }
  }
  if (windows.empty()) throw EvalError("no full windows in " + opt.data);

  fs::create_directories(opt.out);
  for (std::size_t unit : units) {
    const StaResult sta =
        spike_triggered_average(net, windows, opt.layer, unit, opt.threshold);
    if (sta.is_empty()) {
      std::cout << "unit " << unit << ": no window above threshold "
                << detail::format_double(opt.threshold) << ", skipped\n";
      continue;
    }
    MotionRecording out;
    out.schema = recs[0].schema;
    out.fps = recs[0].fps;
    out.label = "sta";
    out.subject = "sta";
    out.trial = opt.layer + "-u" + std::to_string(unit) + "-c" + cfg_hash.substr(0, 8);
    out.frames = Tensor({delta_t, 3, net.spec.num_joints});
    for (std::size_t t = 0; t < delta_t; ++t) {
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t j = 0; j < net.spec.num_joints; ++j) {
          out.frames(t, c, j) = sta.average_window(c, j, t);
        }
      }
    }
    const std::string path =
        (fs::path(opt.out) /
         ("sta_" + opt.layer + "_u" + std::to_string(unit) + ".motenc"))
            .string();
    save_motion_file(out, path);
    std::cout << "unit " << unit << ": " << sta.contributing
              << " windows above threshold, written " << path << "\n";
  }
  return 0;
}

int run_predict(const PredictOpts& opt, const std::string& cfg_hash) {
  const Network net = load_checkpoint(opt.checkpoint);
  if (!net.is_temporal_encoder()) {
    throw ConfigError("predict needs a temporal-encoder checkpoint");
  }
  MotionRecording rec = normalize_recording(load_motion_file(opt.input));
  require_joint_match({rec}, net.spec);
  const std::size_t delta_t = net.spec.delta_t;
  if (rec.length() < delta_t) {
    throw ParamError("recording has " + std::to_string(rec.length()) +
                     " frames, a full window needs " + std::to_string(delta_t));
  }
  const std::size_t at = opt.at < 0 ? rec.length() - 1 : std::size_t(opt.at);
  if (at < delta_t - 1 || at >= rec.length()) {
    throw ParamError("--at " + std::to_string(at) + " has no full input window " +
                     "(first legal position is " + std::to_string(delta_t - 1) + ")");
  }

  const std::size_t rounds = std::max<std::size_t>(1, opt.rollout);
  Tensor window = detail::window_at(rec, at - delta_t + 1, delta_t);
  MotionRecording out;
  out.schema = rec.schema;
  out.fps = rec.fps;
  out.label = rec.label.value_or("-") + "-pred";
  out.subject = rec.subject;
  out.trial = rec.trial + "-pred-c" + cfg_hash.substr(0, 8);
  out.frames = Tensor({rounds * delta_t, 3, rec.num_joints()});
  for (std::size_t round = 0; round < rounds; ++round) {
    const Tensor prediction = predict_window(net, window);
    for (std::size_t t = 0; t < delta_t; ++t) {
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t j = 0; j < rec.num_joints(); ++j) {
          out.frames(round * delta_t + t, c, j) = prediction(c, j, t);
        }
      }
    }
    window = prediction;  // open-loop rollout
  }
  save_motion_file(out, opt.out);
  std::cout << "wrote " << out.length() << " predicted frames to " << opt.out << "\n";
  return 0;
}

int run_trajectory(const TrajectoryOpts& opt, const std::string& cfg_hash) {
  const Network net = load_checkpoint(opt.checkpoint);
  if (!net.is_temporal_encoder()) {
    throw ConfigError("trajectory needs a temporal-encoder checkpoint");
  }
  MotionRecording rec = normalize_recording(load_motion_file(opt.input));
  require_joint_match({rec}, net.spec);
  const TrajectoryResult result = latent_trajectory(net, rec, opt.tap, opt.components);
  if (result.reduced) {
    std::cerr << "warning: rank deficiency reduced the trajectory to "
              << result.components_used << " components\n";
  }
  const std::vector<std::string> comments = {
      "config=" + cfg_hash + " seed=" + std::to_string(net.meta.seed),
      "tap=" + opt.tap, "recording=" + rec.id()};
  write_text(opt.out, trajectory_csv(result, comments));
  std::cout << "trajectory (" << result.trajectory.dim(0) << " steps, "
            << result.components_used << " components) written to " << opt.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motenc: temporal encoders for skeletal motion prediction"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML config file");

  SynthOpts synth;
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate synthetic labelled motion recordings");
  synth_cmd->add_option("--action", synth.actions,
                        "Actions to generate (walk wave box squat turn); repeatable, "
                        "default all");
  synth_cmd->add_option("--duration", synth.duration, "Seconds per recording")
      ->capture_default_str();
  synth_cmd->add_option("--fps", synth.fps, "Frames per second")->capture_default_str();
  synth_cmd->add_option("--count", synth.count, "Recordings per action")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_flag("--binary", synth.binary, "Write .mrec containers instead of text");

  TrainOpts train;
  auto* train_cmd = app.add_subcommand("train", "Train a temporal encoder");
  train_cmd->add_option("--arch", train.arch, "Architecture: ste, cte or hte")
      ->capture_default_str();
  train_cmd->add_option("--data", train.data, "Directory of motion files")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--epochs", train.epochs, "Training epochs")->required();
  train_cmd->add_option("--lr", train.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", train.momentum, "Momentum")->capture_default_str();
  train_cmd->add_option("--decay", train.decay, "Weight decay")->capture_default_str();
  train_cmd->add_option("--batch", train.batch, "Mini-batch size")->capture_default_str();
  train_cmd
      ->add_option("--dropout-start", train.dropout_start,
                   "Input dropout at the first epoch")
      ->capture_default_str();
  train_cmd
      ->add_option("--dropout-end", train.dropout_end, "Input dropout at the last epoch")
      ->capture_default_str();
  train_cmd->add_flag("--no-input-dropout", train.no_input_dropout,
                      "Disable input dropout");
  train_cmd->add_option("--seed", train.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--delta-t", train.delta_t, "Window length in frames")
      ->capture_default_str();
  train_cmd->add_option("--outer-width", train.outer_width, "Lower/upper layer width")
      ->capture_default_str();
  train_cmd->add_option("--bottleneck", train.bottleneck, "Bottleneck width")
      ->capture_default_str();
  train_cmd
      ->add_option("--conv-branches", train.conv_branches,
                   "C-TE branches as NxW, comma separated")
      ->capture_default_str();
  train_cmd->add_option("--joint-width", train.joint_width, "H-TE per-joint node width")
      ->capture_default_str();
  train_cmd->add_option("--limb-width", train.limb_width, "H-TE per-limb node width")
      ->capture_default_str();
  train_cmd->add_option("--group-width", train.group_width, "H-TE group node width")
      ->capture_default_str();
  train_cmd->add_option("--body-width", train.body_width, "H-TE body layer width")
      ->capture_default_str();
  train_cmd->add_option("--init-std", train.init_std, "Weight init standard deviation")
      ->capture_default_str();
  train_cmd
      ->add_option("--init-nonzeros", train.init_nonzeros,
                   "Sparse init nonzeros per unit")
      ->capture_default_str();
  train_cmd->add_option("--schema", train.schema_path, "Skeleton schema JSON");
  train_cmd->add_flag("--pretrain", train.pretrain, "Greedy layerwise pretraining");
  train_cmd
      ->add_option("--pretrain-epochs", train.pretrain_epochs,
                   "Epochs per pretraining stage")
      ->capture_default_str();
  train_cmd->add_option("--finetune", train.finetune_from,
                        "Continue from this checkpoint at lr/10");
  train_cmd->add_option("--target-fps", train.target_fps,
                        "Downsample recordings to this rate first");
  train_cmd->add_option("--log", train.log_path, "Also write epoch lines to this file");

  EvalOpts eval;
  auto* eval_cmd = app.add_subcommand("eval", "Sliding-window horizon evaluation");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "Directory of motion files")->required();
  eval_cmd->add_option("--horizons", eval.horizons, "Horizons in ms, comma separated")
      ->capture_default_str();
  eval_cmd->add_option("--mask-limb", eval.mask_limb,
                       "Zero this limb across every input window");
  eval_cmd->add_option("--out", eval.out, "Report path prefix")->required();
  eval_cmd->add_option("--set-id", eval.set_id, "Report data-set label");
  eval_cmd->add_option("--threads", eval.threads, "Worker threads (results identical)")
      ->capture_default_str();
  eval_cmd->add_option("--target-fps", eval.target_fps,
                       "Downsample recordings to this rate first");

  ClassifyOpts classify;
  auto* classify_cmd =
      app.add_subcommand("classify", "Sequence classification from tap features");
  classify_cmd->add_option("--te", classify.te_checkpoint, "Temporal-encoder checkpoint")
      ->required();
  classify_cmd->add_option("--clf", classify.clf_checkpoint,
                           "Classifier checkpoint (alternative to --train-data)");
  classify_cmd->add_option("--train-data", classify.train_data,
                           "Labelled training recordings for a fresh classifier");
  classify_cmd->add_option("--data", classify.data, "Labelled test recordings")
      ->required();
  classify_cmd->add_option("--tap", classify.tap, "Feature tap: lower, middle or upper")
      ->capture_default_str();
  classify_cmd->add_option("--agg", classify.agg, "Aggregation: mean or vote")
      ->capture_default_str();
  classify_cmd
      ->add_option("--window-seconds", classify.window_seconds,
                   "Leading seconds of each test sequence")
      ->capture_default_str();
  classify_cmd
      ->add_option("--feature-stride", classify.feature_stride,
                   "Keep every Nth training step")
      ->capture_default_str();
  classify_cmd->add_option("--epochs", classify.epochs, "Classifier training epochs")
      ->capture_default_str();
  classify_cmd->add_option("--lr", classify.lr, "Classifier learning rate")
      ->capture_default_str();
  classify_cmd->add_option("--batch", classify.batch, "Classifier batch size")
      ->capture_default_str();
  classify_cmd->add_option("--seed", classify.seed, "Random seed")->capture_default_str();
  classify_cmd->add_option("--out", classify.out, "Confusion-matrix path prefix");
  classify_cmd->add_option("--save-clf", classify.save_clf,
                           "Write the trained classifier here");
  classify_cmd->add_option("--target-fps", classify.target_fps,
                           "Downsample recordings to this rate first");

  StaOpts sta;
  auto* sta_cmd = app.add_subcommand("sta", "Spike-triggered average windows");
  sta_cmd->add_option("--checkpoint", sta.checkpoint, "Model checkpoint")->required();
  sta_cmd->add_option("--data", sta.data, "Directory of motion files")->required();
  sta_cmd->add_option("--layer", sta.layer, "Sigmoid layer name (e.g. body, enc_lower)")
      ->required();
  sta_cmd->add_option("--units", sta.units, "Unit indices, comma separated")->required();
  sta_cmd->add_option("--threshold", sta.threshold, "Activity threshold")
      ->capture_default_str();
  sta_cmd->add_option("--out", sta.out, "Output directory")->required();
  sta_cmd->add_option("--target-fps", sta.target_fps,
                      "Downsample recordings to this rate first");

  PredictOpts predict;
  auto* predict_cmd = app.add_subcommand("predict", "Predict future frames");
  predict_cmd->add_option("--checkpoint", predict.checkpoint, "Model checkpoint")
      ->required();
  predict_cmd->add_option("--input", predict.input, "Input recording")->required();
  predict_cmd->add_option("--at", predict.at,
                          "Index of the last observed frame (default: last)");
  predict_cmd->add_option("--rollout", predict.rollout,
                          "Feed predictions back for K windows (open loop)");
  predict_cmd->add_option("--out", predict.out, "Output motion file")->required();

  TrajectoryOpts trajectory;
  auto* trajectory_cmd = app.add_subcommand(
      "trajectory", "Principal-component trajectory of tap features");
  trajectory_cmd->add_option("--checkpoint", trajectory.checkpoint, "Model checkpoint")
      ->required();
  trajectory_cmd->add_option("--input", trajectory.input, "Input recording")->required();
  trajectory_cmd->add_option("--tap", trajectory.tap, "Feature tap")
      ->capture_default_str();
  trajectory_cmd->add_option("--components", trajectory.components, "Component count")
      ->capture_default_str();
  trajectory_cmd->add_option("--out", trajectory.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
    const std::string cfg_hash = hash_hex(app.config_to_str(true, false));
    if (synth_cmd->parsed()) return run_synth(synth, cfg_hash);
    if (train_cmd->parsed()) return run_train(train, cfg_hash);
    if (eval_cmd->parsed()) return run_eval(eval, cfg_hash);
    if (classify_cmd->parsed()) return run_classify(classify, cfg_hash);
    if (sta_cmd->parsed()) return run_sta(sta, cfg_hash);
    if (predict_cmd->parsed()) return run_predict(predict, cfg_hash);
    if (trajectory_cmd->parsed()) return run_trajectory(trajectory, cfg_hash);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const EvalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
