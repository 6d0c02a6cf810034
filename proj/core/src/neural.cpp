#include "seqlink/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seqlink::neural {

namespace {

constexpr double kMaskLogit = -1e30;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

bool all_finite(const Mat& m) { return m.allFinite(); }
bool all_finite(const Vec& v) { return v.allFinite(); }

void check_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw ValidationError(std::string("non-finite values in ") + what);
}

void check_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw ValidationError(std::string("non-finite values in ") + what);
}

Vec softmax(const Vec& logits) {
  if (logits.size() == 0) throw DimensionError("softmax: empty logits");
  double mx = logits.maxCoeff();
  Vec out(logits.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    double e = logits[i] <= kMaskLogit ? 0.0 : std::exp(logits[i] - mx);
    out[i] = e;
    sum += e;
  }
  if (sum <= 0.0) throw ValidationError("softmax: all logits masked");
  out /= sum;
  return out;
}

double hinge_rank_loss(double score_pos, double score_neg, double margin) {
  if (margin <= 0.0) throw ConfigError("hinge_rank_loss: margin must be positive");
  return std::max(0.0, margin - score_pos + score_neg);
}

namespace {
double clamp_pred(double y_pred) { return std::clamp(y_pred, 1e-7, 1.0 - 1e-7); }
}  // namespace

double bce_loss(double y_true, double y_pred) {
  double p = clamp_pred(y_pred);
  return -(y_true * std::log(p) + (1.0 - y_true) * std::log(1.0 - p));
}

double bce_loss_grad(double y_true, double y_pred) {
  double p = clamp_pred(y_pred);
  return (p - y_true) / (p * (1.0 - p));
}

ParamStore::Slot& ParamStore::slot(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw DimensionError("unknown parameter: " + name);
  return it->second;
}

const ParamStore::Slot& ParamStore::slot(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw DimensionError("unknown parameter: " + name);
  return it->second;
}

Mat& ParamStore::create(const std::string& name, int rows, int cols) {
  if (slots_.count(name)) throw ValidationError("parameter already exists: " + name);
  Slot s;
  s.value = Mat::Zero(rows, cols);
  s.grad = Mat::Zero(rows, cols);
  s.m = Mat::Zero(rows, cols);
  s.v = Mat::Zero(rows, cols);
  return slots_.emplace(name, std::move(s)).first->second.value;
}

bool ParamStore::has(const std::string& name) const { return slots_.count(name) > 0; }

Mat& ParamStore::param(const std::string& name) { return slot(name).value; }
const Mat& ParamStore::param(const std::string& name) const { return slot(name).value; }
Mat& ParamStore::grad(const std::string& name) { return slot(name).grad; }
const Mat& ParamStore::grad(const std::string& name) const { return slot(name).grad; }

void ParamStore::zero_grads() {
  for (auto& [name, s] : slots_) s.grad.setZero();
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& [name, s] : slots_) sq += s.grad.squaredNorm();
  return std::sqrt(sq);
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  double scale = 1.0;
  if (cfg.clip_norm > 0.0) {
    double norm = grad_norm();
    if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
  }
  ++step_;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
  for (auto& [name, s] : slots_) {
    if (s.grad.rows() != s.value.rows() || s.grad.cols() != s.value.cols())
      throw DimensionError("gradient shape mismatch for parameter: " + name);
    if (!s.grad.allFinite())
      throw ValidationError("non-finite gradient for parameter: " + name);
    Mat g = s.grad * scale;
    s.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * g;
    s.v = cfg.beta2 * s.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    Mat m_hat = s.m / bc1;
    Mat v_hat = s.v / bc2;
    s.value.array() -= cfg.lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
    s.grad.setZero();
  }
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [name, s] : slots_) out.push_back(name);
  return out;
}

void init_uniform(Mat& m, Rng& rng, double lo, double hi) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = uniform_range(rng, lo, hi);
}

void init_he(Mat& m, Rng& rng) {
  double stddev = std::sqrt(2.0 / static_cast<double>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = gaussian(rng, 0.0, stddev);
}

Dense::Dense(ParamStore& store, std::string prefix, int in, int out, bool relu, Rng& rng)
    : w_(prefix + "/W"), b_(prefix + "/b"), relu_(relu), in_(in), out_(out) {
  Mat& w = store.create(w_, out, in);
  store.create(b_, out, 1);
  if (relu_) {
    init_he(w, rng);
  } else {
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    init_uniform(w, rng, -bound, bound);
  }
}

Dense Dense::attach(const ParamStore& store, std::string prefix, int in, int out, bool relu) {
  Dense d;
  d.w_ = prefix + "/W";
  d.b_ = prefix + "/b";
  d.relu_ = relu;
  d.in_ = in;
  d.out_ = out;
  const Mat& w = store.param(d.w_);
  if (w.rows() != out || w.cols() != in)
    throw DimensionError("dense layer " + prefix + ": stored shape mismatch");
  return d;
}

Mat Dense::forward(const ParamStore& store, const Mat& x) const {
  DenseCache scratch;
  return forward(store, x, scratch);
}

Mat Dense::forward(const ParamStore& store, const Mat& x, DenseCache& cache) const {
  if (x.cols() != in_)
    throw DimensionError("dense layer " + w_ + ": input has " + std::to_string(x.cols()) +
                         " columns, expected " + std::to_string(in_));
  const Mat& w = store.param(w_);
  const Mat& b = store.param(b_);
  cache.x = x;
  cache.pre = x * w.transpose();
  cache.pre.rowwise() += b.col(0).transpose();
  if (!relu_) return cache.pre;
  return cache.pre.cwiseMax(0.0);
}

Mat Dense::backward(ParamStore& store, const DenseCache& cache, const Mat& dout) const {
  Mat dpre = dout;
  if (relu_) {
    dpre = dpre.cwiseProduct((cache.pre.array() > 0.0).cast<double>().matrix());
  }
  store.grad(w_) += dpre.transpose() * cache.x;
  store.grad(b_).col(0) += dpre.colwise().sum().transpose();
  return dpre * store.param(w_);
}

LstmCell::LstmCell(ParamStore& store, std::string prefix, int input_dim, int hidden_dim,
                   Rng& rng)
    : w_(prefix + "/W"), b_(prefix + "/b"), in_(input_dim), hidden_(hidden_dim) {
  Mat& w = store.create(w_, 4 * hidden_dim, input_dim + hidden_dim);
  store.create(b_, 4 * hidden_dim, 1);
  init_uniform(w, rng, -0.08, 0.08);
}

LstmCell LstmCell::attach(const ParamStore& store, std::string prefix, int input_dim,
                          int hidden_dim) {
  LstmCell cell;
  cell.w_ = prefix + "/W";
  cell.b_ = prefix + "/b";
  cell.in_ = input_dim;
  cell.hidden_ = hidden_dim;
  const Mat& w = store.param(cell.w_);
  if (w.rows() != 4 * hidden_dim || w.cols() != input_dim + hidden_dim)
    throw DimensionError("lstm cell " + prefix + ": stored shape mismatch");
  return cell;
}

void LstmCell::step(const ParamStore& store, const Vec& x, const Vec& h_prev,
                    const Vec& c_prev, Vec& h, Vec& c) const {
  LstmStepCache scratch;
  step(store, x, h_prev, c_prev, h, c, scratch);
}

void LstmCell::step(const ParamStore& store, const Vec& x, const Vec& h_prev,
                    const Vec& c_prev, Vec& h, Vec& c, LstmStepCache& cache) const {
  if (x.size() != in_ || h_prev.size() != hidden_ || c_prev.size() != hidden_)
    throw DimensionError("lstm step " + w_ + ": input dims disagree with cell dims");
  const Mat& w = store.param(w_);
  const Mat& b = store.param(b_);

  Vec xz(in_ + hidden_);
  xz << x, h_prev;
  Vec z = w * xz + b.col(0);

  const int H = hidden_;
  cache.x = x;
  cache.h_prev = h_prev;
  cache.c_prev = c_prev;
  cache.i = z.segment(0, H).unaryExpr([](double v) { return sigmoid(v); });
  cache.f = z.segment(H, H).unaryExpr([](double v) { return sigmoid(v); });
  cache.o = z.segment(2 * H, H).unaryExpr([](double v) { return sigmoid(v); });
  cache.g = z.segment(3 * H, H).array().tanh();
  cache.c = cache.f.cwiseProduct(c_prev) + cache.i.cwiseProduct(cache.g);
  cache.tanh_c = cache.c.array().tanh();
  c = cache.c;
  h = cache.o.cwiseProduct(cache.tanh_c);
}

void LstmCell::backward(ParamStore& store, const LstmStepCache& cache, const Vec& dh,
                        const Vec& dc_in, Vec& dx, Vec& dh_prev, Vec& dc_prev) const {
  const int H = hidden_;
  Vec do_ = dh.cwiseProduct(cache.tanh_c);
  Vec dc = dc_in + dh.cwiseProduct(cache.o).cwiseProduct(
                       (1.0 - cache.tanh_c.array().square()).matrix());
  Vec di = dc.cwiseProduct(cache.g);
  Vec dg = dc.cwiseProduct(cache.i);
  Vec df = dc.cwiseProduct(cache.c_prev);
  dc_prev = dc.cwiseProduct(cache.f);

  Vec dz(4 * H);
  dz.segment(0, H) = di.cwiseProduct(cache.i).cwiseProduct((1.0 - cache.i.array()).matrix());
  dz.segment(H, H) = df.cwiseProduct(cache.f).cwiseProduct((1.0 - cache.f.array()).matrix());
  dz.segment(2 * H, H) =
      do_.cwiseProduct(cache.o).cwiseProduct((1.0 - cache.o.array()).matrix());
  dz.segment(3 * H, H) = dg.cwiseProduct((1.0 - cache.g.array().square()).matrix());

  Vec xz(in_ + H);
  xz << cache.x, cache.h_prev;
  store.grad(w_) += dz * xz.transpose();
  store.grad(b_).col(0) += dz;

  Vec dxz = store.param(w_).transpose() * dz;
  dx = dxz.segment(0, in_);
  dh_prev = dxz.segment(in_, H);
}

Vec LstmCell::encode(const ParamStore& store, const std::vector<Vec>& xs) const {
  std::vector<LstmStepCache> scratch;
  return encode(store, xs, scratch);
}

Vec LstmCell::encode(const ParamStore& store, const std::vector<Vec>& xs,
                     std::vector<LstmStepCache>& caches) const {
  Vec h = Vec::Zero(hidden_);
  Vec c = Vec::Zero(hidden_);
  caches.clear();
  caches.resize(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    Vec h_next, c_next;
    step(store, xs[t], h, c, h_next, c_next, caches[t]);
    h = std::move(h_next);
    c = std::move(c_next);
  }
  return h;
}

void LstmCell::backward_sequence(ParamStore& store, const std::vector<LstmStepCache>& caches,
                                 const Vec& dh_final) const {
  Vec dh = dh_final;
  Vec dc = Vec::Zero(hidden_);
  for (auto it = caches.rbegin(); it != caches.rend(); ++it) {
    Vec dx, dh_prev, dc_prev;
    backward(store, *it, dh, dc, dx, dh_prev, dc_prev);
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }
}

Vec dropout_forward(const Vec& x, double keep_prob, bool training, Rng& rng,
                    DropoutMask& out_mask) {
  if (keep_prob <= 0.0 || keep_prob > 1.0)
    throw ConfigError("dropout: keep probability must be in (0, 1]");
  out_mask.mask.resize(0);
  if (!training || keep_prob == 1.0) return x;
  out_mask.mask = Vec(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out_mask.mask[i] = uniform_double(rng) < keep_prob ? 1.0 / keep_prob : 0.0;
  return x.cwiseProduct(out_mask.mask);
}

Vec dropout_backward(const Vec& dy, const DropoutMask& mask) {
  if (mask.mask.size() == 0) return dy;
  return dy.cwiseProduct(mask.mask);
}

GradCheckReport grad_check(ParamStore& store, const std::function<double()>& loss_fn,
                           double eps, int max_coords_per_param, Rng& rng) {
  store.zero_grads();
  double base = loss_fn();
  if (!std::isfinite(base)) throw ValidationError("grad_check: non-finite loss");

  std::map<std::string, Mat> analytic;
  for (const auto& name : store.names()) analytic.emplace(name, store.grad(name));

  GradCheckReport report;
  for (const auto& name : store.names()) {
    Mat& value = store.param(name);
    const Mat& bp = analytic.at(name);
    const auto total = static_cast<int>(value.size());
    int samples = std::min(max_coords_per_param, total);
    for (int s = 0; s < samples; ++s) {
      int idx = samples == total ? s : uniform_int(rng, 0, total - 1);
      double saved = value.data()[idx];
      value.data()[idx] = saved + eps;
      store.zero_grads();
      double lp = loss_fn();
      value.data()[idx] = saved - eps;
      store.zero_grads();
      double lm = loss_fn();
      value.data()[idx] = saved;
      double diff = lp - lm;
      // A difference below double-precision resolution of the loss is
      // indistinguishable from zero (dead units read pure round-off).
      double noise_floor = 8.0 * std::numeric_limits<double>::epsilon() *
                           std::max({std::abs(lp), std::abs(lm), 1.0});
      if (std::abs(diff) < noise_floor) diff = 0.0;
      double fd = diff / (2.0 * eps);
      double an = bp.data()[idx];
      double rel = std::abs(fd - an) / std::max(1e-8, std::abs(fd) + std::abs(an));
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
      }
    }
  }
  // Restore the analytic gradients so callers see a consistent store.
  store.zero_grads();
  for (const auto& name : store.names()) store.grad(name) = analytic.at(name);
  return report;
}

}  // namespace seqlink::neural
