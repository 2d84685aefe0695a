#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eyedas/data.hpp"
#include "eyedas/error.hpp"
#include "eyedas/evaluation.hpp"
#include "eyedas/explain.hpp"
#include "eyedas/gbm.hpp"
#include "eyedas/pipeline.hpp"
#include "eyedas/rng.hpp"
#include "json.hpp"

namespace eyedas::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Bad flag combinations or config files; reported with exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir = "eyedas-out";
  std::string config;
};

struct Settings {
  pipeline::PipelineConfig pipeline;
  gbm::TrainConfig train;
};

void reject_unknown(const nlohmann::json& object, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    if (known.count(key) == 0) throw UsageError("config: unknown key \"" + key + "\" in " + where);
  }
}

Settings load_settings(const Globals& g) {
  Settings s;
  s.train.rng_seed = g.seed;
  if (g.config.empty()) return s;
  std::ifstream in(g.config);
  if (!in) throw UsageError("cannot read config file " + g.config);
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw UsageError("config file is not a JSON object: " + g.config);
  reject_unknown(doc, {"pipeline", "train"}, "the top level");
  try {
    if (doc.contains("pipeline")) {
      const auto& p = doc.at("pipeline");
      reject_unknown(p, {"t_max", "interval_ms", "threshold_policy", "fixed_threshold", "resize_width",
                         "resize_height"},
                     "\"pipeline\"");
      s.pipeline.t_max = p.value("t_max", s.pipeline.t_max);
      s.pipeline.interval_ms = p.value("interval_ms", s.pipeline.interval_ms);
      s.pipeline.fixed_threshold = p.value("fixed_threshold", s.pipeline.fixed_threshold);
      s.pipeline.resize_width = p.value("resize_width", s.pipeline.resize_width);
      s.pipeline.resize_height = p.value("resize_height", s.pipeline.resize_height);
      const auto policy = p.value("threshold_policy", std::string("tpr1"));
      if (policy != "tpr1" && policy != "fixed") throw UsageError("config: threshold_policy must be tpr1 or fixed");
      s.pipeline.threshold_policy =
          policy == "fixed" ? pipeline::ThresholdPolicy::kFixed : pipeline::ThresholdPolicy::kTpr1;
    }
    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      reject_unknown(t, {"n_estimators_grid", "max_depth_grid", "cv_folds", "learning_rate"}, "\"train\"");
      s.train.n_estimators_grid = t.value("n_estimators_grid", s.train.n_estimators_grid);
      s.train.max_depth_grid = t.value("max_depth_grid", s.train.max_depth_grid);
      s.train.cv_folds = t.value("cv_folds", s.train.cv_folds);
      s.train.learning_rate = t.value("learning_rate", s.train.learning_rate);
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  try {
    s.pipeline.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return s;
}

fs::path out_path(const Globals& g, const std::string& name) { return fs::path(g.out_dir) / name; }

void write_json(const fs::path& path, const ordered_json& j) { evaluation::write_text(path, j.dump(2) + "\n"); }

ordered_json verdict_json(const std::string& id, const pipeline::Verdict& v, double threshold) {
  // Wall time is left out so repeated runs print identical verdicts.
  return {{"instance", id},
          {"label", to_string(v.label)},
          {"probability_3d", v.probability_3d},
          {"threshold", threshold},
          {"frames_used", v.frames_used}};
}

bool is_instance_dir(const fs::path& dir) {
  for (const char* ext : {".png", ".jpg", ".jpeg"}) {
    if (fs::exists(dir / (std::string("frame_000") + ext))) return true;
  }
  return fs::exists(dir / "manifest.json");
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string out_model;
  std::vector<int> grid_estimators;
  std::vector<int> grid_depths;
  int cv_folds = 0;
  std::string threshold_policy;
  double threshold = -1.0;
};

void apply_overrides(const TrainArgs& a, Settings& s) {
  if (!a.grid_estimators.empty()) s.train.n_estimators_grid = a.grid_estimators;
  if (!a.grid_depths.empty()) s.train.max_depth_grid = a.grid_depths;
  if (a.cv_folds > 0) s.train.cv_folds = a.cv_folds;
  if (a.threshold_policy == "fixed") s.pipeline.threshold_policy = pipeline::ThresholdPolicy::kFixed;
  if (a.threshold_policy == "tpr1") s.pipeline.threshold_policy = pipeline::ThresholdPolicy::kTpr1;
  if (a.threshold >= 0.0) s.pipeline.fixed_threshold = a.threshold;
}

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
  Settings s = load_settings(g);
  apply_overrides(a, s);
  const auto dataset = data::load_dataset(a.data);
  const auto p = pipeline::train(dataset, s.train, s.pipeline);
  if (const fs::path model_path(a.out_model); model_path.has_parent_path()) {
    fs::create_directories(model_path.parent_path());
  }
  gbm::save_file(p.model, a.out_model);

  ordered_json cells = ordered_json::array();
  for (const auto& c : p.grid.table) {
    cells.push_back({{"n_estimators", c.n_estimators}, {"max_depth", c.max_depth}, {"mean_accuracy", c.mean_accuracy}});
  }
  const ordered_json report{
      {"model", a.out_model},
      {"model_bytes", gbm::save(p.model).size()},
      {"seed", g.seed},
      {"n_estimators", p.grid.best_n_estimators},
      {"max_depth", p.grid.best_max_depth},
      {"cv_accuracy", p.grid.best_accuracy},
      {"cv_folds", s.train.cv_folds},
      {"threshold_policy", s.pipeline.threshold_policy == pipeline::ThresholdPolicy::kTpr1 ? "tpr1" : "fixed"},
      {"threshold", p.threshold()},
      {"training_tpr", p.training_tpr},
      {"training_fpr", p.training_fpr},
      {"instances_2d", dataset.count(Label::k2D)},
      {"instances_3d", dataset.count(Label::k3D)},
      {"augmented_2d", p.augmented},
      {"grid", cells}};
  write_json(out_path(g, "train_report.json"), report);
  out << "trained " << p.grid.best_n_estimators << " trees of depth " << p.grid.best_max_depth
      << " (cv accuracy " << p.grid.best_accuracy << "), threshold " << p.threshold() << ", model "
      << a.out_model << "\n";
  return 0;
}

// ---------------------------------------------------------------- classify

struct ClassifyArgs {
  std::string model;
  std::string instance_dir;
  std::string stream;
};

int cmd_classify(const Globals& g, const ClassifyArgs& a, std::ostream& out) {
  if (a.instance_dir.empty() == a.stream.empty()) {
    throw UsageError("classify needs exactly one of --instance-dir or --stream");
  }
  const Settings s = load_settings(g);
  const auto p = pipeline::from_model(gbm::load_file(a.model), s.pipeline);
  const auto t_max = static_cast<std::size_t>(p.config.t_max);

  if (!a.stream.empty()) {
    const fs::path dir(a.stream);
    const auto seq = data::load_sequence(dir, s.pipeline.interval_ms);
    pipeline::IncrementalSession session(p);
    for (std::size_t i = 0; i < std::min(seq.size(), t_max); ++i) {
      if (const auto v = session.push(seq.frames()[i], static_cast<double>(i) * seq.interval_ms())) {
        auto j = verdict_json(dir.filename().string(), *v, p.threshold());
        j["timestamp_ms"] = static_cast<double>(i) * seq.interval_ms();
        out << j.dump() << "\n";
      }
    }
    return 0;
  }

  const fs::path root(a.instance_dir);
  if (!fs::is_directory(root)) throw DataError("not a directory: " + root.string());
  std::vector<fs::path> dirs;
  if (is_instance_dir(root)) {
    dirs.push_back(root);
  } else {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw DataError("no instances under " + root.string());
  }
  for (const auto& dir : dirs) {
    const auto seq = data::load_sequence(dir, s.pipeline.interval_ms);
    const auto v = pipeline::classify(p, seq.size() > t_max ? seq.prefix(t_max) : seq);
    out << verdict_json(dir.filename().string(), v, p.threshold()).dump() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string data;
  std::string test;
  std::string model;
  std::string experiment = "roc";
  double holdout = 1.0 / 3.0;
  std::vector<std::size_t> sizes;
  std::vector<std::string> detectors;
  std::string axis = "city";
  std::size_t floor_2d = data::SplitFloor{}.min_2d;
  std::size_t floor_3d = data::SplitFloor{}.min_3d;
};

const std::vector<std::string> kExperiments{"roc",  "thresholds", "baseline",       "time",
                                            "size", "gating",     "generalization", "ablation"};

// Stratified holdout: per class, a seeded shuffle puts round(fraction * n) instances in the test part.
std::pair<data::LabeledDataset, data::LabeledDataset> holdout_split(const data::LabeledDataset& ds, double fraction,
                                                                    std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("--holdout must lie in (0,1)");
  std::vector<bool> to_test(ds.size(), false);
  Rng rng(seed);
  for (const Label label : {Label::k3D, Label::k2D}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.instances[i].label == label) idx.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(idx));
    const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < n_test; ++i) to_test[idx[i]] = true;
  }
  data::LabeledDataset train;
  data::LabeledDataset test;
  train.provenance = ds.provenance + " [holdout train]";
  test.provenance = ds.provenance + " [holdout test]";
  for (std::size_t i = 0; i < ds.size(); ++i) (to_test[i] ? test : train).instances.push_back(ds.instances[i]);
  return {std::move(train), std::move(test)};
}

std::vector<evaluation::DetectorRate> parse_detectors(const std::vector<std::string>& specs) {
  std::vector<evaluation::DetectorRate> out;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--od expects NAME=RATE, got '" + spec + "'");
    double rate = 0.0;
    try {
      std::size_t used = 0;
      rate = std::stod(spec.substr(eq + 1), &used);
      if (used != spec.size() - eq - 1) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw UsageError("--od rate is not a number in '" + spec + "'");
    }
    out.push_back({spec.substr(0, eq), rate});
  }
  if (out.empty()) out.push_back({"upstream", 1.0});
  return out;
}

class EvalSession {
 public:
  EvalSession(const Globals& g, const EvalArgs& a, Settings s) : g_(g), a_(a), s_(std::move(s)) {
    auto loaded = data::load_dataset(a.data);
    if (a.test.empty()) {
      std::tie(train_, test_) = holdout_split(loaded, a.holdout, g.seed);
    } else {
      train_ = std::move(loaded);
      test_ = data::load_dataset(a.test);
    }
    train_scored_ = pipeline::score_dataset(train_, s_.pipeline);
    test_rows_ = pipeline::score_dataset(test_, s_.pipeline);
    const auto indices = all_indices(train_.size());
    train_rows_ = evaluation::balanced_rows(train_, train_scored_, indices, s_.train, s_.pipeline);
    pipeline_ = a.model.empty()
                    ? evaluation::train_on_subset(train_, train_scored_, indices, s_.train, s_.pipeline)
                    : pipeline::from_model(gbm::load_file(a.model), s_.pipeline);
  }

  ordered_json run(const std::string& experiment) {
    if (experiment == "roc") return roc();
    if (experiment == "thresholds") return thresholds();
    if (experiment == "baseline") return baseline();
    if (experiment == "time") return time();
    if (experiment == "size") return size();
    if (experiment == "gating") return gating();
    if (experiment == "generalization") return generalization();
    return ablation();
  }

 private:
  fs::path path(const std::string& name) const { return out_path(g_, name); }

  ordered_json roc() {
    const auto report = evaluation::evaluate(pipeline_, test_rows_);
    evaluation::write_text(path("eval_report.json"), evaluation::to_json(report) + "\n");
    evaluation::write_text(path("roc.csv"), evaluation::roc_csv(report.roc));
    const std::vector<evaluation::NamedCurve> curves{{pipeline_.committee.name(), &report.roc}};
    evaluation::write_text(path("roc.svg"), evaluation::roc_svg(curves, "ROC, held-out set"));
    return {{"auc", report.roc.auc},
            {"fpr_at_tpr1", report.fpr_at_tpr1},
            {"calibrated_threshold", report.calibrated_threshold},
            {"tpr_calibrated", report.at_calibrated.tpr()},
            {"fpr_calibrated", report.at_calibrated.fpr()},
            {"files", {"eval_report.json", "roc.csv", "roc.svg"}}};
  }

  const std::vector<evaluation::ThresholdRow>& threshold_rows() {
    if (threshold_rows_.empty()) {
      threshold_rows_ = evaluation::threshold_table(train_rows_, test_rows_, s_.train, s_.pipeline);
    }
    return threshold_rows_;
  }

  ordered_json thresholds() {
    evaluation::write_text(path("thresholds.csv"), evaluation::to_csv(threshold_rows()));
    return {{"committees", threshold_rows().size()}, {"files", {"thresholds.csv"}}};
  }

  ordered_json baseline() {
    const auto report = evaluation::baseline_comparison(pipeline_, train_rows_, test_rows_, s_.train);
    evaluation::write_text(path("baseline.json"), evaluation::to_json(report) + "\n");
    const auto labels = pipeline::label_vector(test_rows_);
    const auto committee = evaluation::roc_auc(evaluation::probabilities(pipeline_, test_rows_, s_.pipeline.t_max), labels);
    std::vector<double> raw;
    for (const auto& r : test_rows_) raw.push_back(r.raw_at_frames(s_.pipeline.t_max));
    const auto raw_roc = evaluation::roc_auc(raw, labels);
    const std::vector<evaluation::NamedCurve> curves{{"committee", &committee}, {"raw images", &raw_roc}};
    evaluation::write_text(path("roc_baseline.svg"), evaluation::roc_svg(curves, "Committee vs raw-image expert"));
    return {{"committee_auc", report.committee_auc},
            {"raw_score_auc", report.raw_score_auc},
            {"raw_model_auc", report.raw_model_auc},
            {"files", {"baseline.json", "roc_baseline.svg"}}};
  }

  ordered_json time() {
    const auto points = evaluation::time_sweep(pipeline_, test_rows_);
    evaluation::write_text(path("time_sweep.csv"), evaluation::to_csv(points));
    ordered_json fpr = ordered_json::array();
    for (const auto& pt : points) fpr.push_back({{"elapsed_ms", pt.elapsed_ms}, {"fpr_at_tpr1", pt.fpr_at_tpr1}});
    return {{"points", fpr}, {"files", {"time_sweep.csv"}}};
  }

  // The sweeps sample from training and test instances together.
  void build_pool() {
    if (pool_.size() != 0) return;
    pool_.provenance = train_.provenance + " + " + test_.provenance;
    pool_.instances = train_.instances;
    pool_.instances.insert(pool_.instances.end(), test_.instances.begin(), test_.instances.end());
    pool_scored_ = train_scored_;
    pool_scored_.insert(pool_scored_.end(), test_rows_.begin(), test_rows_.end());
  }

  ordered_json size() {
    build_pool();
    std::vector<std::size_t> sizes = a_.sizes;
    if (sizes.empty()) sizes.assign(evaluation::kDefaultTrainingSizes.begin(), evaluation::kDefaultTrainingSizes.end());
    const auto points = evaluation::training_size_sweep(pool_, pool_scored_, sizes, g_.seed, s_.train, s_.pipeline);
    evaluation::write_text(path("size_sweep.csv"), evaluation::to_csv(points));
    ordered_json fpr = ordered_json::array();
    for (const auto& pt : points) fpr.push_back({{"size", pt.size}, {"fpr_at_tpr1", pt.fpr_at_tpr1}});
    return {{"points", fpr}, {"files", {"size_sweep.csv"}}};
  }

  ordered_json gating() {
    std::vector<pipeline::InstanceScores> spoofs;
    for (const auto& r : test_rows_) {
      if (r.label == Label::k2D) spoofs.push_back(r);
    }
    const auto rows = evaluation::od_gating_table(pipeline_, spoofs, parse_detectors(a_.detectors));
    evaluation::write_text(path("gating.csv"), evaluation::to_csv(rows));
    return {{"spoofs", spoofs.size()}, {"files", {"gating.csv"}}};
  }

  ordered_json generalization() {
    build_pool();
    if (a_.axis != "city" && a_.axis != "object_class") throw UsageError("--axis must be city or object_class");
    const auto axis = a_.axis == "city" ? data::TagAxis::kCity : data::TagAxis::kObjectClass;
    const auto report = evaluation::generalization_matrix(pool_, pool_scored_, axis, s_.train, s_.pipeline,
                                                          data::SplitFloor{a_.floor_2d, a_.floor_3d});
    evaluation::write_text(path("generalization.csv"), evaluation::to_csv(report));
    evaluation::write_text(path("generalization.json"), evaluation::to_json(report) + "\n");
    return {{"splits", report.rows.size()},
            {"warning", report.warning},
            {"files", {"generalization.csv", "generalization.json"}}};
  }

  ordered_json ablation() {
    if (!(pipeline_.committee == experts::Committee::full())) throw InvalidArgument("ablation needs the full committee");
    const auto rows = evaluation::ablation_report(pipeline_, train_rows_, test_rows_, threshold_rows());
    evaluation::write_text(path("ablation.csv"), evaluation::to_csv(rows));
    ordered_json rates = ordered_json::object();
    for (const auto& r : rows) rates[r.committee.name()] = r.disagreement_rate;
    return {{"disagreement_rate", rates}, {"files", {"ablation.csv"}}};
  }

  const Globals& g_;
  const EvalArgs& a_;
  Settings s_;
  data::LabeledDataset train_;
  data::LabeledDataset test_;
  std::vector<pipeline::InstanceScores> train_scored_;
  std::vector<pipeline::InstanceScores> train_rows_;
  std::vector<pipeline::InstanceScores> test_rows_;
  pipeline::TrainedPipeline pipeline_;
  std::vector<evaluation::ThresholdRow> threshold_rows_;
  data::LabeledDataset pool_;
  std::vector<pipeline::InstanceScores> pool_scored_;
};

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const bool all = a.experiment == "all";
  if (!all && std::find(kExperiments.begin(), kExperiments.end(), a.experiment) == kExperiments.end()) {
    throw UsageError("unknown experiment '" + a.experiment + "'");
  }
  EvalSession session(g, a, load_settings(g));
  ordered_json summary = ordered_json::object();
  for (const auto& name : kExperiments) {
    if (!all && name != a.experiment) continue;
    try {
      summary[name] = session.run(name);
      out << "experiment " << name << ": done\n";
    } catch (const Error& e) {
      // "all" keeps going past experiments the data cannot support.
      if (!all) throw;
      summary[name] = {{"skipped", e.what()}};
      err << "experiment " << name << " skipped: " << e.what() << "\n";
    }
  }
  write_json(out_path(g, "summary.json"), summary);
  return 0;
}

// ---------------------------------------------------------------- explain

struct ExplainArgs {
  std::string model;
  std::string data;
  std::string background;
  double tolerance = 1e-9;
};

int cmd_explain(const Globals& g, const ExplainArgs& a, std::ostream& out, std::ostream& err) {
  const Settings s = load_settings(g);
  const auto p = pipeline::from_model(gbm::load_file(a.model), s.pipeline);
  const auto dataset = data::load_dataset(a.data);
  const auto rows = pipeline::score_dataset(dataset, s.pipeline);
  const auto full = experts::Committee::full();
  const auto x = pipeline::feature_matrix(rows, full, s.pipeline.t_max);
  gbm::FeatureMatrix background_rows = x;
  if (!a.background.empty()) {
    background_rows = pipeline::feature_matrix(
        pipeline::score_dataset(data::load_dataset(a.background), s.pipeline), full, s.pipeline.t_max);
  }
  const auto background = evaluation::strided_background(background_rows, evaluation::kMaxShapleyBackground);
  const auto attributions = explain::shapley_all(p.model, x, background);

  std::string csv = "instance,label,phi_B,phi_S,phi_C,phi_E,base_value,margin,residual\n";
  std::size_t violations = 0;
  char buffer[64];
  const auto num = [&](double v) {
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return std::string(buffer);
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& at = attributions[i];
    // Efficiency recheck against an independent evaluation of the model margin.
    const double margin = gbm::predict_margin(p.model, x.row(i));
    double total = at.base_value;
    for (const double phi : at.phi) total += phi;
    const double residual = margin - total;
    if (!(std::abs(residual) <= a.tolerance * std::max(1.0, std::abs(margin)))) {
      ++violations;
      err << "efficiency violated for " << rows[i].id << ": residual " << residual << "\n";
    }
    csv += rows[i].id + "," + std::string(to_string(rows[i].label));
    for (const double phi : at.phi) csv += "," + num(phi);
    csv += "," + num(at.base_value) + "," + num(margin) + "," + num(residual) + "\n";
  }
  evaluation::write_text(out_path(g, "shapley.csv"), csv);

  const auto committees = experts::Committee::all_nonempty();
  std::string table = "committee,disagreeing,total,rate\n";
  for (const auto& row : explain::disagreement_table(attributions, committees)) {
    table += row.committee.name() + "," + std::to_string(row.disagreeing) + "," + std::to_string(row.total) + "," +
             num(row.rate) + "\n";
  }
  evaluation::write_text(out_path(g, "disagreement.csv"), table);
  out << "explained " << rows.size() << " instances, " << violations << " efficiency violations\n";
  return violations == 0 ? 0 : 1;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::size_t n3d = 0;
  std::size_t n2d = 0;
  int size = data::SyntheticOptions{}.size;
  int frames = data::SyntheticOptions{}.frames;
};

int cmd_generate(const Globals& g, const GenerateArgs& a, std::ostream& out) {
  data::SyntheticOptions options;
  options.size = a.size;
  options.frames = a.frames;
  const auto dataset = data::generate_synthetic(a.n3d, a.n2d, g.seed, options);
  data::save_dataset(dataset, g.out_dir);
  out << "wrote " << dataset.size() << " instances to " << g.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string model;
  std::string data;
  std::size_t repetitions = 5;
  std::size_t sequences = 10;
};

int cmd_bench(const Globals& g, const BenchArgs& a, std::ostream& out, std::ostream& err) {
  const Settings s = load_settings(g);
  if (a.sequences == 0) throw UsageError("--sequences must be at least 1");
  std::vector<experts::ObjectSequence> seqs;
  if (!a.data.empty()) {
    const auto ds = data::load_dataset(a.data);
    for (std::size_t i = 0; i < std::min(a.sequences, ds.size()); ++i) seqs.push_back(ds.instances[i].sequence);
  } else {
    const std::size_t n_2d = std::max<std::size_t>(1, a.sequences / 2);
    const std::size_t n_3d = std::max<std::size_t>(1, a.sequences - n_2d);
    for (auto& inst : data::generate_synthetic(n_3d, n_2d, g.seed).instances) seqs.push_back(inst.sequence);
  }
  pipeline::TrainedPipeline p;
  if (!a.model.empty()) {
    p = pipeline::from_model(gbm::load_file(a.model), s.pipeline);
  } else {
    // No model given: a small synthetic training run stands in.
    p = pipeline::train(data::generate_synthetic(20, 10, g.seed + 1), s.train, s.pipeline);
  }
  const auto report = evaluation::bench(p, seqs, a.repetitions);
  evaluation::write_text(out_path(g, "bench.json"), evaluation::to_json(report) + "\n");
  out << "per-frame latency " << report.mean_ms << " ms (sd " << report.stddev_ms << ") over "
      << report.frame_ms.size() << " frames; model " << report.model_bytes << " bytes\n";
  if (!report.meets_latency_target()) {
    err << "warning: mean per-frame latency " << report.mean_ms << " ms exceeds the "
        << evaluation::kLatencyTargetMs << " ms target on this machine\n";
  }
  if (!report.within_model_budget()) {
    err << "model exceeds the " << report.model_budget_bytes << " byte budget\n";
    return 1;
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decides whether tracked objects are flat 2D depictions or real 3D objects.", "eyedas"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for reports and generated data")->capture_default_str();
  app.add_option("--config", g.config, "JSON file overriding pipeline and training defaults")
      ->check(CLI::ExistingFile);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the meta-classifier on a dataset directory");
  train_cmd->add_option("--data", train.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out-model", train.out_model, "Model file to write")->required();
  train_cmd->add_option("--grid-estimators", train.grid_estimators, "Candidate tree counts")->delimiter(',');
  train_cmd->add_option("--grid-depths", train.grid_depths, "Candidate tree depths")->delimiter(',');
  train_cmd->add_option("--cv-folds", train.cv_folds, "Cross-validation folds")->check(CLI::Range(2, 100));
  train_cmd->add_option("--threshold-policy", train.threshold_policy, "tpr1 or fixed")
      ->check(CLI::IsMember({"tpr1", "fixed"}));
  train_cmd->add_option("--threshold", train.threshold, "Threshold for the fixed policy")->check(CLI::Range(0.0, 1.0));

  ClassifyArgs classify;
  auto* classify_cmd = app.add_subcommand("classify", "Classify instances with a trained model");
  classify_cmd->add_option("--model", classify.model, "Model file")->required()->check(CLI::ExistingFile);
  auto* instance_opt = classify_cmd->add_option("--instance-dir", classify.instance_dir,
                                                "An instance directory or a dataset root");
  auto* stream_opt =
      classify_cmd->add_option("--stream", classify.stream, "Feed one instance frame by frame");
  instance_opt->excludes(stream_opt);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Run evaluation experiments");
  eval_cmd->add_option("--data", eval.data, "Training dataset root")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--test", eval.test, "Test dataset root (default: a stratified holdout of --data)")
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--model", eval.model, "Use this model instead of training one")->check(CLI::ExistingFile);
  std::vector<std::string> experiment_names = kExperiments;
  experiment_names.push_back("all");
  eval_cmd->add_option("--experiment", eval.experiment, "Experiment to run")
      ->check(CLI::IsMember(experiment_names))
      ->capture_default_str();
  eval_cmd->add_option("--holdout", eval.holdout, "Test share when --test is absent")->check(CLI::Range(0.01, 0.99));
  eval_cmd->add_option("--sizes", eval.sizes, "Training sizes for the size sweep")->delimiter(',');
  eval_cmd->add_option("--od", eval.detectors, "Detector and its 2D misclassification rate, NAME=RATE");
  eval_cmd->add_option("--axis", eval.axis, "Tag axis for generalization")
      ->check(CLI::IsMember({"city", "object_class"}));
  eval_cmd->add_option("--floor-2d", eval.floor_2d, "Minimum 2D training instances per split")->capture_default_str();
  eval_cmd->add_option("--floor-3d", eval.floor_3d, "Minimum 3D training instances per split")->capture_default_str();

  ExplainArgs explain_args;
  auto* explain_cmd = app.add_subcommand("explain", "Shapley attributions of the expert scores");
  explain_cmd->add_option("--model", explain_args.model, "Model file")->required()->check(CLI::ExistingFile);
  explain_cmd->add_option("--data", explain_args.data, "Instances to explain")->required()->check(CLI::ExistingDirectory);
  explain_cmd->add_option("--background", explain_args.background, "Background dataset (default: --data)")
      ->check(CLI::ExistingDirectory);
  explain_cmd->add_option("--tolerance", explain_args.tolerance, "Allowed efficiency residual")->capture_default_str();

  GenerateArgs generate;
  auto* generate_cmd = app.add_subcommand("generate", "Write a synthetic dataset to --out-dir");
  generate_cmd->add_option("--n3d", generate.n3d, "3D instances")->required()->check(CLI::PositiveNumber);
  generate_cmd->add_option("--n2d", generate.n2d, "2D instances")->required()->check(CLI::PositiveNumber);
  generate_cmd->add_option("--size", generate.size, "Frame width and height")->check(CLI::Range(16, 1024));
  generate_cmd->add_option("--frames", generate.frames, "Frames per instance")->check(CLI::Range(2, 5));

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Measure per-frame latency and model size");
  bench_cmd->add_option("--model", bench_args.model, "Model file (default: train on synthetic data)")
      ->check(CLI::ExistingFile);
  bench_cmd->add_option("--data", bench_args.data, "Dataset supplying the sequences")->check(CLI::ExistingDirectory);
  bench_cmd->add_option("--repetitions", bench_args.repetitions, "Passes over the sequences")->capture_default_str();
  bench_cmd->add_option("--sequences", bench_args.sequences, "Sequences per pass")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) return cmd_train(g, train, out);
    if (*classify_cmd) return cmd_classify(g, classify, out);
    if (*eval_cmd) return cmd_eval(g, eval, out, err);
    if (*explain_cmd) return cmd_explain(g, explain_args, out, err);
    if (*generate_cmd) return cmd_generate(g, generate, out);
    if (*bench_cmd) return cmd_bench(g, bench_args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace eyedas::cli
