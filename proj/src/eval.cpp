#include "cyto/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cyto {

ConfusionMatrix confusion(const std::vector<ScoreRecord>& records, double threshold) {
  if (records.empty()) throw std::invalid_argument("confusion: no records");
  ConfusionMatrix cm;
  for (const ScoreRecord& r : records) {
    bool pred_abn = r.score >= threshold;
    bool is_abn = r.truth == ClassLabel::Abnormal;
    if (pred_abn && is_abn)
      ++cm.tp;
    else if (pred_abn && !is_abn)
      ++cm.fp;
    else if (!pred_abn && is_abn)
      ++cm.fn;
    else
      ++cm.tn;
  }
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw std::invalid_argument("metrics: empty confusion matrix");
  auto safe_div = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
  MetricsReport m;
  double tp = double(cm.tp), tn = double(cm.tn), fp = double(cm.fp), fn = double(cm.fn);
  m.acc = safe_div(tp + tn, tp + tn + fp + fn);
  m.prec = safe_div(tp, tp + fp);
  m.rec = safe_div(tp, tp + fn);
  m.f1 = safe_div(2.0 * m.prec * m.rec, m.prec + m.rec);
  double denom = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  m.mcc = safe_div(tp * tn - fp * fn, denom);
  return m;
}

RocCurve roc(const std::vector<ScoreRecord>& records) {
  std::int64_t pos = 0, neg = 0;
  for (const ScoreRecord& r : records) (r.truth == ClassLabel::Abnormal ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("roc: need at least one record of each class");

  std::vector<std::pair<double, bool>> sorted;  // (score, is_abnormal)
  sorted.reserve(records.size());
  for (const ScoreRecord& r : records)
    sorted.emplace_back(r.score, r.truth == ClassLabel::Abnormal);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::int64_t ctp = 0, cfp = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    double s = sorted[i].first;
    while (i < sorted.size() && sorted[i].first == s) {  // group ties into one step
      (sorted[i].second ? ctp : cfp)++;
      ++i;
    }
    curve.points.push_back({double(cfp) / double(neg), double(ctp) / double(pos), s});
  }

  double auc = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const RocPoint& a = curve.points[k - 1];
    const RocPoint& b = curve.points[k];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  curve.auc = auc;
  return curve;
}

RocPoint q_point(const RocCurve& curve) {
  if (curve.points.empty()) throw std::invalid_argument("q_point: empty curve");
  RocPoint best = curve.points.front();
  double best_j = best.tpr + (1.0 - best.fpr);
  for (const RocPoint& p : curve.points) {  // in-order scan keeps the lowest-fpr maximizer
    double j = p.tpr + (1.0 - p.fpr);
    if (j > best_j) {
      best_j = j;
      best = p;
    }
  }
  return best;
}

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

// per-pixel color norm; grayscale treated as (v,v,v)
std::vector<double> color_norms(const RasterImage& img) {
  const std::size_t n = img.pixel_count();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (img.channels == 3) {
      double r = img.pixels[i * 3], g = img.pixels[i * 3 + 1], b = img.pixels[i * 3 + 2];
      norms[i] = std::sqrt(r * r + g * g + b * b);
    } else {
      norms[i] = img.pixels[i] * kSqrt3;
    }
  }
  return norms;
}

}  // namespace

Eigen::VectorXd extract_features(const RasterImage& patch, const PatchGraphStats* cg) {
  require_valid(patch, "extract_features");
  const std::size_t n = patch.pixel_count();
  std::vector<double> norms = color_norms(patch);

  double mean = std::accumulate(norms.begin(), norms.end(), 0.0) / double(n);
  double var = 0.0;
  std::size_t dark = 0;
  for (double v : norms) {
    var += (v - mean) * (v - mean);
    if (v < 100.0) ++dark;
  }
  var /= double(n);

  double nuclei_fraction = 0.0;
  double nucleus_components = 0.0;
  double superpixel_density = 0.0;
  if (cg) {
    nuclei_fraction = cg->nuclei_fraction;
    nucleus_components = double(cg->nucleus_components);
    superpixel_density = double(cg->superpixel_count) / double(n);
  } else {
    // threshold fallback: Otsu over the quantized norm, dark side = nuclei
    std::array<std::uint64_t, 256> hist{};
    std::vector<std::uint8_t> q(n);
    for (std::size_t i = 0; i < n; ++i) {
      int b = static_cast<int>(std::lround(norms[i] / kSqrt3));
      q[i] = static_cast<std::uint8_t>(std::clamp(b, 0, 255));
      ++hist[q[i]];
    }
    int t = otsu_threshold_histogram(hist);
    if (t >= 0) {
      // the dark class is [0..t]; a constant patch never reaches here
      BinaryMask m = BinaryMask::make(patch.width, patch.height, false);
      std::size_t cnt = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (q[i] <= t) {
          m.bits[i] = 1;
          ++cnt;
        }
      }
      nuclei_fraction = double(cnt) / double(n);
      nucleus_components = double(connected_components(m).size());
    }
  }

  Eigen::VectorXd f(6);
  f << nuclei_fraction, mean, std::sqrt(var), double(dark) / double(n), superpixel_density,
      nucleus_components;
  return f;
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  std::uint64_t bounded(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }
};

}  // namespace

LossGrad logistic_loss_grad(const Eigen::MatrixXd& x, const std::vector<ClassLabel>& y,
                            const Eigen::VectorXd& w, double b) {
  const auto n = x.rows();
  if (n == 0 || static_cast<std::size_t>(n) != y.size())
    throw std::invalid_argument("logistic_loss_grad: empty or mismatched batch");
  LossGrad out;
  out.grad_w = Eigen::VectorXd::Zero(w.size());
  Eigen::VectorXd z = x * w + Eigen::VectorXd::Constant(n, b);
  Eigen::VectorXd resid(n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double yi = y[i] == ClassLabel::Abnormal ? 1.0 : 0.0;
    double zi = z(i);
    // numerically stable binary cross-entropy
    loss += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
    resid(i) = sigmoid(zi) - yi;
  }
  out.loss = loss / double(n);
  out.grad_w = (x.transpose() * resid) / double(n);
  out.grad_b = resid.sum() / double(n);
  return out;
}

LogisticModel train_logistic(const FeatureDataset& train, const FeatureDataset& val,
                             const TrainConfig& cfg) {
  const Eigen::Index n = train.features.rows();
  const Eigen::Index d = train.features.cols();
  if (n == 0 || static_cast<std::size_t>(n) != train.labels.size())
    throw std::invalid_argument("train_logistic: empty or mismatched training set");
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("train_logistic: learning_rate <= 0");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw std::invalid_argument("train_logistic: momentum must be in [0, 1)");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_logistic: batch_size must be >= 1");

  std::int64_t pos = 0;
  for (ClassLabel l : train.labels) pos += l == ClassLabel::Abnormal;
  if (pos == 0 || pos == n)
    throw std::invalid_argument("train_logistic: degenerate single-class training set");

  LogisticModel model;
  model.feat_mean = train.features.colwise().mean();
  Eigen::MatrixXd centered = train.features.rowwise() - model.feat_mean.transpose();
  model.feat_std = (centered.array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < d; ++j)
    if (model.feat_std(j) < 1e-12) model.feat_std(j) = 1.0;
  Eigen::MatrixXd xs = centered.array().rowwise() / model.feat_std.transpose().array();

  Eigen::MatrixXd val_xs;
  if (val.features.rows() > 0) {
    val_xs = (val.features.rowwise() - model.feat_mean.transpose()).array().rowwise() /
             model.feat_std.transpose().array();
  }

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd vw = Eigen::VectorXd::Zero(d);
  double b = 0.0, vb = 0.0;

  Eigen::VectorXd best_w = w;
  double best_b = b;
  double best_acc = -1.0;

  SplitMix64 rng(cfg.seed ^ 0x7141BADF00D5ull);
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[rng.bounded(i)]);

    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Eigen::MatrixXd xb(bs, d);
      std::vector<ClassLabel> yb(bs);
      for (Eigen::Index i = 0; i < bs; ++i) {
        xb.row(i) = xs.row(perm[start + i]);
        yb[i] = train.labels[perm[start + i]];
      }
      LossGrad lg = logistic_loss_grad(xb, yb, w, b);
      vw = cfg.momentum * vw - cfg.learning_rate * lg.grad_w;
      vb = cfg.momentum * vb - cfg.learning_rate * lg.grad_b;
      w += vw;
      b += vb;
    }

    if (val_xs.rows() > 0) {
      Eigen::Index correct = 0;
      Eigen::VectorXd z = val_xs * w + Eigen::VectorXd::Constant(val_xs.rows(), b);
      for (Eigen::Index i = 0; i < val_xs.rows(); ++i) {
        bool pred = sigmoid(z(i)) >= 0.5;
        bool truth = val.labels[i] == ClassLabel::Abnormal;
        correct += pred == truth;
      }
      double acc = double(correct) / double(val_xs.rows());
      if (acc > best_acc) {  // "best weights are saved"
        best_acc = acc;
        best_w = w;
        best_b = b;
      }
    }
  }

  if (val_xs.rows() > 0) {
    model.weights = best_w;
    model.bias = best_b;
  } else {
    model.weights = w;
    model.bias = b;
  }
  return model;
}

double predict(const LogisticModel& model, const Eigen::VectorXd& features) {
  if (features.size() != model.weights.size())
    throw std::invalid_argument("predict: feature dimension " + std::to_string(features.size()) +
                                " does not match model dimension " +
                                std::to_string(model.weights.size()));
  double z = model.bias;
  for (Eigen::Index j = 0; j < features.size(); ++j) {
    double s = model.feat_std.size() > j ? model.feat_std(j) : 1.0;
    double mu = model.feat_mean.size() > j ? model.feat_mean(j) : 0.0;
    z += model.weights(j) * ((features(j) - mu) / s);
  }
  return sigmoid(z);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<ScoreRecord> ingest_scores(std::istream& in, const std::string& name) {
  std::vector<ScoreRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("id,", 0) == 0) continue;
    auto cols = split_csv(line);
    if (cols.size() != 3)
      throw std::runtime_error(name + ": line " + std::to_string(lineno) +
                               ": expected id,true_label,score");
    ScoreRecord r;
    r.id = cols[0];
    try {
      r.truth = parse_label(cols[1]);
      std::size_t used = 0;
      r.score = std::stod(cols[2], &used);
      if (used != cols[2].size()) throw std::runtime_error("trailing characters after score");
    } catch (const std::exception& e) {
      throw std::runtime_error(name + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!(r.score >= 0.0 && r.score <= 1.0))
      throw std::runtime_error(name + ": line " + std::to_string(lineno) + ": score " + cols[2] +
                               " outside [0,1]");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ScoreRecord> ingest_scores_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("ingest_scores: cannot open " + path);
  return ingest_scores(f, path);
}

void write_scores_file(const std::string& path, const std::vector<ScoreRecord>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_scores: cannot open " + path);
  f << "id,true_label,score\n";
  char buf[64];
  for (const ScoreRecord& r : records) {
    std::snprintf(buf, sizeof(buf), ",%s,%.6f\n", to_string(r.truth), r.score);
    f << r.id << buf;
  }
}

std::string format_metrics_report(const ConfusionMatrix& cm, const MetricsReport& m,
                                  const RocCurve& curve, const RocPoint& q) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "confusion tn=%lld fp=%lld fn=%lld tp=%lld\n",
                static_cast<long long>(cm.tn), static_cast<long long>(cm.fp),
                static_cast<long long>(cm.fn), static_cast<long long>(cm.tp));
  out += buf;
  std::snprintf(buf, sizeof(buf), "acc %.4f\nprec %.4f\nrec %.4f\nf1 %.4f\nmcc %.4f\n", m.acc,
                m.prec, m.rec, m.f1, m.mcc);
  out += buf;
  std::snprintf(buf, sizeof(buf), "auc %.6f\n", curve.auc);
  out += buf;
  std::snprintf(buf, sizeof(buf), "q_point fpr=%.6f tpr=%.6f threshold=%.6f\n", q.fpr, q.tpr,
                q.threshold);
  out += buf;
  std::snprintf(buf, sizeof(buf), "roc_points %zu\n", curve.points.size());
  out += buf;
  for (const RocPoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", p.fpr, p.tpr, p.threshold);
    out += buf;
  }
  return out;
}

std::string format_roc_table(const RocCurve& curve) {
  std::string out = "fpr,tpr\n";
  char buf[64];
  for (const RocPoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", p.fpr, p.tpr);
    out += buf;
  }
  return out;
}

void save_model(const std::string& path, const LogisticModel& model) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_model: cannot open " + path);
  f << "logistic 1\n" << model.weights.size() << "\n";
  char buf[64];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    f << buf;
  };
  for (Eigen::Index i = 0; i < model.weights.size(); ++i) emit(model.weights(i));
  emit(model.bias);
  for (Eigen::Index i = 0; i < model.weights.size(); ++i) emit(model.feat_mean(i));
  for (Eigen::Index i = 0; i < model.weights.size(); ++i) emit(model.feat_std(i));
}

LogisticModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_model: cannot open " + path);
  std::string tag;
  int version = 0;
  Eigen::Index d = 0;
  if (!(f >> tag >> version >> d) || tag != "logistic" || version != 1 || d < 1)
    throw std::runtime_error("load_model: " + path + " is not a logistic model file");
  LogisticModel m;
  m.weights.resize(d);
  m.feat_mean.resize(d);
  m.feat_std.resize(d);
  auto read = [&](double& v) {
    if (!(f >> v)) throw std::runtime_error("load_model: " + path + " truncated");
  };
  for (Eigen::Index i = 0; i < d; ++i) read(m.weights(i));
  read(m.bias);
  for (Eigen::Index i = 0; i < d; ++i) read(m.feat_mean(i));
  for (Eigen::Index i = 0; i < d; ++i) read(m.feat_std(i));
  return m;
}

}  // namespace cyto
