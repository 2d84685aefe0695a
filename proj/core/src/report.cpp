#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "eyedas/error.hpp"
#include "eyedas/evaluation.hpp"
#include "json.hpp"

namespace eyedas::evaluation {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// NaN and infinities become null so the output stays valid JSON.
ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (const auto& item : items) out += (out.empty() ? "" : std::string(1, sep)) + item;
  return out;
}

ordered_json confusion_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}, {"tpr", c.tpr()}, {"fpr", c.fpr()}};
}

}  // namespace

std::string to_json(const EvalReport& report) {
  ordered_json roc = ordered_json::array();
  for (const auto& p : report.roc.points) roc.push_back({{"threshold", number(p.threshold)}, {"tpr", p.tpr}, {"fpr", p.fpr}});
  ordered_json j{{"auc", report.roc.auc},
                 {"frames", report.frames},
                 {"calibrated_threshold", report.calibrated_threshold},
                 {"fpr_at_tpr1", report.fpr_at_tpr1},
                 {"confusion_at_0_5", confusion_json(report.at_half)},
                 {"confusion_at_calibrated", confusion_json(report.at_calibrated)},
                 {"roc", roc}};
  return j.dump(2);
}

std::string to_json(const gbm::GridSearchResult& grid) {
  ordered_json cells = ordered_json::array();
  for (const auto& c : grid.table) {
    cells.push_back({{"n_estimators", c.n_estimators},
                     {"max_depth", c.max_depth},
                     {"mean_accuracy", c.mean_accuracy},
                     {"fold_accuracy", c.fold_accuracy}});
  }
  ordered_json j{{"best_n_estimators", grid.best_n_estimators},
                 {"best_max_depth", grid.best_max_depth},
                 {"best_accuracy", grid.best_accuracy},
                 {"cells", cells}};
  return j.dump(2);
}

std::string to_json(const BaselineReport& r) {
  ordered_json j{{"committee", {{"auc", r.committee_auc}, {"fpr_at_tpr1", r.committee_fpr_at_tpr1}}},
                 {"raw_score", {{"auc", r.raw_score_auc}, {"fpr_at_tpr1", r.raw_score_fpr_at_tpr1}}},
                 {"raw_model", {{"auc", r.raw_model_auc}, {"fpr_at_tpr1", r.raw_model_fpr_at_tpr1}}}};
  return j.dump(2);
}

std::string to_json(const BenchReport& r) {
  ordered_json j{{"frames_timed", r.frame_ms.size()},
                 {"width", r.width},
                 {"height", r.height},
                 {"mean_ms", r.mean_ms},
                 {"stddev_ms", r.stddev_ms},
                 {"latency_target_ms", kLatencyTargetMs},
                 {"meets_latency_target", r.meets_latency_target()},
                 {"model_bytes", r.model_bytes},
                 {"model_budget_bytes", r.model_budget_bytes},
                 {"within_model_budget", r.within_model_budget()},
                 {"working_set_bytes_estimate", r.working_set_bytes}};
  return j.dump(2);
}

std::string to_json(const GeneralizationReport& report) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"train_tags", r.train_tags},
                    {"test_tags", r.test_tags},
                    {"train_2d", r.train_2d},
                    {"train_3d", r.train_3d},
                    {"test_size", r.test_size},
                    {"tpr", r.tpr},
                    {"fpr", r.fpr},
                    {"auc", r.auc},
                    {"fpr_at_tpr1", r.fpr_at_tpr1}});
  }
  ordered_json j{{"axis", report.axis == data::TagAxis::kCity ? "city" : "object_class"},
                 {"rows", rows},
                 {"warning", report.warning}};
  return j.dump(2);
}

std::string roc_csv(const RocCurve& roc) {
  std::string out = "threshold,tpr,fpr\n";
  for (const auto& p : roc.points) out += fmt(p.threshold) + "," + fmt(p.tpr) + "," + fmt(p.fpr) + "\n";
  return out;
}

std::string to_csv(std::span<const ThresholdRow> rows) {
  std::string out =
      "committee,auc,tpr_at_0_5,fpr_at_0_5,calibrated_threshold,tpr_calibrated,fpr_calibrated,fpr_at_tpr1,"
      "n_estimators,max_depth\n";
  for (const auto& r : rows) {
    out += r.committee.name() + "," + fmt(r.auc) + "," + fmt(r.tpr_half) + "," + fmt(r.fpr_half) + "," +
           fmt(r.calibrated_threshold) + "," + fmt(r.tpr_calibrated) + "," + fmt(r.fpr_calibrated) + "," +
           fmt(r.fpr_at_tpr1) + "," + std::to_string(r.n_estimators) + "," + std::to_string(r.max_depth) + "\n";
  }
  return out;
}

std::string to_csv(std::span<const TimePoint> rows) {
  std::string out = "frames,elapsed_ms,fpr_at_tpr1,tpr_calibrated,fpr_calibrated,auc\n";
  for (const auto& r : rows) {
    out += std::to_string(r.frames) + "," + fmt(r.elapsed_ms) + "," + fmt(r.fpr_at_tpr1) + "," +
           fmt(r.tpr_calibrated) + "," + fmt(r.fpr_calibrated) + "," + fmt(r.auc) + "\n";
  }
  return out;
}

std::string to_csv(std::span<const SizePoint> rows) {
  std::string out = "size,n_3d,n_2d,test_size,fpr_at_tpr1,tpr_calibrated,fpr_calibrated,auc\n";
  for (const auto& r : rows) {
    out += std::to_string(r.size) + "," + std::to_string(r.n_3d) + "," + std::to_string(r.n_2d) + "," +
           std::to_string(r.test_size) + "," + fmt(r.fpr_at_tpr1) + "," + fmt(r.tpr_calibrated) + "," +
           fmt(r.fpr_calibrated) + "," + fmt(r.auc) + "\n";
  }
  return out;
}

std::string to_csv(std::span<const GatingRow> rows) {
  std::string out = "detector,before,pass_calibrated,after_calibrated,pass_0_5,after_0_5\n";
  for (const auto& r : rows) {
    out += r.detector + "," + fmt(r.before) + "," + fmt(r.pass_calibrated) + "," + fmt(r.after_calibrated) + "," +
           fmt(r.pass_half) + "," + fmt(r.after_half) + "\n";
  }
  return out;
}

std::string to_csv(const GeneralizationReport& report) {
  std::string out = "train_tags,test_tags,train_2d,train_3d,test_size,tpr,fpr,auc,fpr_at_tpr1\n";
  for (const auto& r : report.rows) {
    out += join(r.train_tags, '+') + "," + join(r.test_tags, '+') + "," + std::to_string(r.train_2d) + "," +
           std::to_string(r.train_3d) + "," + std::to_string(r.test_size) + "," + fmt(r.tpr) + "," + fmt(r.fpr) +
           "," + fmt(r.auc) + "," + fmt(r.fpr_at_tpr1) + "\n";
  }
  return out;
}

std::string to_csv(std::span<const AblationRow> rows) {
  std::string out = "committee,size,disagreeing,total,disagreement_rate,fpr_at_tpr1,auc\n";
  for (const auto& r : rows) {
    out += r.committee.name() + "," + std::to_string(r.committee.size()) + "," + std::to_string(r.disagreeing) +
           "," + std::to_string(r.total) + "," + fmt(r.disagreement_rate) + "," + fmt(r.fpr_at_tpr1) + "," +
           fmt(r.auc) + "\n";
  }
  return out;
}

std::string roc_svg(std::span<const NamedCurve> curves, const std::string& title) {
  constexpr double kSize = 360.0;
  constexpr double kLeft = 50.0;
  constexpr double kTop = 30.0;
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  const auto px = [&](double fpr) { return kLeft + fpr * kSize; };
  const auto py = [&](double tpr) { return kTop + (1.0 - tpr) * kSize; };

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLeft + kSize + 180 << "\" height=\""
      << kTop + kSize + 50 << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<text x=\"" << kLeft << "\" y=\"18\" font-size=\"14\">" << title << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
      << "\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    svg << "<text x=\"" << px(v) - 8 << "\" y=\"" << kTop + kSize + 16 << "\">" << v << "</text>\n";
    svg << "<text x=\"" << kLeft - 34 << "\" y=\"" << py(v) + 4 << "\">" << v << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + kSize / 2 - 50 << "\" y=\"" << kTop + kSize + 36
      << "\">false positive rate</text>\n";
  svg << "<text transform=\"translate(14," << kTop + kSize / 2 + 50 << ") rotate(-90)\">true positive rate</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : curves[i].curve->points) svg << px(p.fpr) << "," << py(p.tpr) << " ";
    svg << "\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(i);
    svg << "<line x1=\"" << kLeft + kSize + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kLeft + kSize + 30
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kLeft + kSize + 34 << "\" y=\"" << ly << "\">" << curves[i].name << " ("
        << std::setprecision(3) << curves[i].curve->auc << std::setprecision(2) << ")</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace eyedas::evaluation
