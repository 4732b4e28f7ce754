#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cyto/label.hpp"
#include "cyto/raster.hpp"

// Classifier evaluation: confusion matrices, ACC/PREC/REC/F1/MCC, ROC/AUC,
// Q-point, a shallow logistic baseline trained with SGD + momentum, and
// ingestion of external model scores.

namespace cyto {

struct ScoreRecord {
  std::string id;
  ClassLabel truth = ClassLabel::Normal;
  double score = 0.0;  // probability of Abnormal, in [0,1]
};

struct ConfusionMatrix {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::int64_t total() const { return tp + tn + fp + fn; }
};

// Predicted Abnormal iff score >= threshold.
ConfusionMatrix confusion(const std::vector<ScoreRecord>& records, double threshold = 0.5);

struct MetricsReport {
  double acc = 0, prec = 0, rec = 0, f1 = 0, mcc = 0;
};

// Standard binary metrics; a zero denominator defines that metric as 0.
MetricsReport metrics(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0, tpr = 0;
  double threshold = 0;  // +inf for the (0,0) sentinel
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), non-decreasing
  double auc = 0;                // trapezoidal
};

// Threshold sweep over the distinct scores (ties grouped into one step).
// Requires at least one record of each class.
RocCurve roc(const std::vector<ScoreRecord>& records);

// Youden's J maximizer (tpr + 1 - fpr); ties resolve toward lower fpr.
RocPoint q_point(const RocCurve& curve);

// Summary statistics a cellgraph run provides about one patch.
struct PatchGraphStats {
  double nuclei_fraction = 0;   // nuclei mask pixels / patch pixels
  int superpixel_count = 0;
  int nucleus_components = 0;
};

// Fixed-order features: [nuclei area fraction, mean color norm, color-norm
// std, dark fraction (norm < 100), superpixel density, nucleus component
// count]. Without cellgraph stats the nuclei-derived entries fall back to an
// Otsu threshold over the per-pixel color norm.
Eigen::VectorXd extract_features(const RasterImage& patch, const PatchGraphStats* cg = nullptr);

struct FeatureDataset {
  Eigen::MatrixXd features;        // n x d
  std::vector<ClassLabel> labels;  // size n
};

struct TrainConfig {
  double learning_rate = 0.005;
  double momentum = 0.9;
  int batch_size = 32;
  int max_epochs = 500;
  std::uint64_t seed = 0;
};

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0;
  Eigen::VectorXd feat_mean, feat_std;  // train-set standardization
};

// Mini-batch SGD with classical momentum (v <- mu v - lr g; w <- w + v) on
// binary cross-entropy; returns the weights with the best validation
// accuracy (final weights when the validation set is empty).
LogisticModel train_logistic(const FeatureDataset& train, const FeatureDataset& val,
                             const TrainConfig& cfg);

double predict(const LogisticModel& model, const Eigen::VectorXd& features);

// Loss/gradient over already-standardized features; exposed for the
// finite-difference checks and the epoch-loss property.
struct LossGrad {
  double loss = 0;
  Eigen::VectorXd grad_w;
  double grad_b = 0;
};
LossGrad logistic_loss_grad(const Eigen::MatrixXd& x, const std::vector<ClassLabel>& y,
                            const Eigen::VectorXd& w, double b);

// Scores file rows: id,true_label,score. Malformed rows and out-of-range
// scores raise with the offending line number; an empty file is allowed.
std::vector<ScoreRecord> ingest_scores(std::istream& in, const std::string& name);
std::vector<ScoreRecord> ingest_scores_file(const std::string& path);
void write_scores_file(const std::string& path, const std::vector<ScoreRecord>& records);

// Report: confusion counts, the five metrics to 4 decimals, AUC, Q-point and
// the ROC point list. The separate ROC table is a two-column fpr,tpr file.
std::string format_metrics_report(const ConfusionMatrix& cm, const MetricsReport& m,
                                  const RocCurve& curve, const RocPoint& q);
std::string format_roc_table(const RocCurve& curve);

// Model file round-trip (plain text).
void save_model(const std::string& path, const LogisticModel& model);
LogisticModel load_model(const std::string& path);

}  // namespace cyto
