#pragma once

#include <Eigen/Core>

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "seqlink/errors.hpp"
#include "seqlink/rng.hpp"

namespace seqlink::neural {

// All tensors are dense, 64-bit, row-major. Vectors are column vectors.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

bool all_finite(const Mat& m);
bool all_finite(const Vec& v);
void check_finite(const Mat& m, const char* what);
void check_finite(const Vec& v, const char* what);

// Max-subtracted softmax. Output is non-negative, sums to 1 within 1e-9 and
// preserves the argmax. Logits of -1e30 or below act as a mask (zero mass).
Vec softmax(const Vec& logits);

double hinge_rank_loss(double score_pos, double score_neg, double margin);

// Predictions are clamped to [1e-7, 1 - 1e-7] before the log.
double bce_loss(double y_true, double y_pred);
// d(bce)/d(y_pred) at the clamped prediction.
double bce_loss_grad(double y_true, double y_pred);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
};

// Named parameters with per-parameter gradient and Adam moment buffers.
// Iteration order is the lexicographic name order, so every consumer
// (updates, checkpoints, gradient checks) is deterministic.
class ParamStore {
 public:
  Mat& create(const std::string& name, int rows, int cols);
  bool has(const std::string& name) const;
  Mat& param(const std::string& name);
  const Mat& param(const std::string& name) const;
  Mat& grad(const std::string& name);
  const Mat& grad(const std::string& name) const;

  void zero_grads();
  double grad_norm() const;
  // One Adam update over every parameter; gradients are zeroed afterwards.
  void adam_step(const AdamConfig& cfg);

  long step_count() const { return step_; }
  std::vector<std::string> names() const;
  std::size_t size() const { return slots_.size(); }

 private:
  struct Slot {
    Mat value, grad, m, v;
  };
  Slot& slot(const std::string& name);
  const Slot& slot(const std::string& name) const;

  std::map<std::string, Slot> slots_;
  long step_ = 0;

  friend void save_checkpoint_impl(std::ostream&, const ParamStore&, std::uint64_t);
};

void init_uniform(Mat& m, Rng& rng, double lo, double hi);
void init_he(Mat& m, Rng& rng);  // gaussian scaled by sqrt(2 / fan_in)

// Fully connected layer y = act(W x + b), applied row-wise to a batch
// (inputs are n x in, outputs n x out). W is out x in, b is out x 1.
struct DenseCache {
  Mat x;    // n x in
  Mat pre;  // n x out, pre-activation
};

class Dense {
 public:
  Dense() = default;  // unbound until attach()
  // Creates parameters in `store` under `prefix`/W and `prefix`/b.
  Dense(ParamStore& store, std::string prefix, int in, int out, bool relu, Rng& rng);
  // Binds to parameters that already exist (e.g. loaded from a checkpoint).
  static Dense attach(const ParamStore& store, std::string prefix, int in, int out, bool relu);

  Mat forward(const ParamStore& store, const Mat& x) const;
  Mat forward(const ParamStore& store, const Mat& x, DenseCache& cache) const;
  // Accumulates parameter gradients and returns d(loss)/d(x).
  Mat backward(ParamStore& store, const DenseCache& cache, const Mat& dout) const;

  int in_dim() const { return in_; }
  int out_dim() const { return out_; }
  const std::string& weight_name() const { return w_; }
  const std::string& bias_name() const { return b_; }

 private:
  std::string w_, b_;
  bool relu_ = false;
  int in_ = 0, out_ = 0;
};

// Standard LSTM cell with sigmoid gates and tanh candidate. Gate weights are
// packed as a single (4H x (in + H)) matrix in [input, forget, output,
// candidate] order, biases as 4H x 1.
struct LstmStepCache {
  Vec x, h_prev, c_prev;
  Vec i, f, o, g, c, tanh_c;
};

class LstmCell {
 public:
  LstmCell() = default;  // unbound until attach()
  LstmCell(ParamStore& store, std::string prefix, int input_dim, int hidden_dim, Rng& rng);
  static LstmCell attach(const ParamStore& store, std::string prefix, int input_dim,
                         int hidden_dim);

  void step(const ParamStore& store, const Vec& x, const Vec& h_prev, const Vec& c_prev,
            Vec& h, Vec& c) const;
  void step(const ParamStore& store, const Vec& x, const Vec& h_prev, const Vec& c_prev,
            Vec& h, Vec& c, LstmStepCache& cache) const;
  // One-step backward. dh/dc are gradients flowing into this step's outputs;
  // outputs are gradients for the step inputs. Parameter gradients accumulate.
  void backward(ParamStore& store, const LstmStepCache& cache, const Vec& dh, const Vec& dc,
                Vec& dx, Vec& dh_prev, Vec& dc_prev) const;

  // Runs the cell over a sequence from the zero state and returns the final
  // hidden state. An empty sequence encodes to the zero vector.
  Vec encode(const ParamStore& store, const std::vector<Vec>& xs) const;
  Vec encode(const ParamStore& store, const std::vector<Vec>& xs,
             std::vector<LstmStepCache>& caches) const;
  // Backpropagates d(loss)/d(final h) through a cached sequence. Inputs are
  // treated as constants (they are embeddings or frozen encodings here).
  void backward_sequence(ParamStore& store, const std::vector<LstmStepCache>& caches,
                         const Vec& dh_final) const;

  int input_dim() const { return in_; }
  int hidden_dim() const { return hidden_; }
  const std::string& weight_name() const { return w_; }
  const std::string& bias_name() const { return b_; }

 private:
  std::string w_, b_;
  int in_ = 0, hidden_ = 0;
};

// Inverted dropout. At keep_prob 1.0 (or outside training) this is the
// identity; otherwise kept units are scaled by 1/keep_prob.
struct DropoutMask {
  Vec mask;  // empty when the op was the identity
};

Vec dropout_forward(const Vec& x, double keep_prob, bool training, Rng& rng,
                    DropoutMask& out_mask);
Vec dropout_backward(const Vec& dy, const DropoutMask& mask);

// Central finite differences against backprop. `loss_fn` must compute the
// scalar loss and accumulate gradients into `store` (grads are zeroed before
// each invocation). Up to `max_coords_per_param` coordinates are sampled per
// parameter. Relative error is |fd - bp| / max(1e-8, |fd| + |bp|).
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int coords_checked = 0;
};

GradCheckReport grad_check(ParamStore& store, const std::function<double()>& loss_fn,
                           double eps, int max_coords_per_param, Rng& rng);

}  // namespace seqlink::neural
