#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "edgnn/rng.hpp"

namespace edgnn {

/// Dense row-major 2-D tensor of 64-bit floats. Copies share storage
/// (shallow); use clone() for an independent buffer. A tensor becomes
/// gradient-tracked when a Tape registers it, which fills in `node`.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols, double fill = 0.0);
    static Tensor from(int rows, int cols, std::initializer_list<double> values);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::int64_t size() const { return static_cast<std::int64_t>(rows_) * cols_; }
    bool empty() const { return !data_; }

    double operator()(int r, int c) const { return (*data_)[static_cast<std::size_t>(r) * cols_ + c]; }
    double& operator()(int r, int c) { return (*data_)[static_cast<std::size_t>(r) * cols_ + c]; }
    const double* raw() const { return data_->data(); }
    double* raw() { return data_->data(); }
    const std::vector<double>& vec() const { return *data_; }
    std::vector<double>& vec() { return *data_; }

    Tensor clone() const;
    bool same_storage(const Tensor& other) const { return data_ == other.data_; }

    /// Tape linkage: id of the recording node, -1 when untracked.
    int node = -1;
    std::uint64_t tape_id = 0;

private:
    int rows_ = 0, cols_ = 0;
    std::shared_ptr<std::vector<double>> data_;
};

/// CSR gather plan: output row i is the sum of input rows
/// index[offsets[i] .. offsets[i+1]).
struct GatherPlan {
    std::vector<int> offsets{0};
    std::vector<int> index;
    int num_rows() const { return static_cast<int>(offsets.size()) - 1; }
};

/// Records forward operations and runs reverse-mode differentiation.
/// Node creation order is a topological order by construction; backward
/// visits nodes exactly once in reverse. All reductions accumulate in
/// ascending index order so results are reproducible bit-for-bit.
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Registers a trainable leaf; grad() is defined for the returned handle.
    Tensor watch(const Tensor& t);
    /// Registers a non-trainable input (no gradient is ever produced for it).
    Tensor constant(const Tensor& t);

    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor add(const Tensor& a, const Tensor& b);
    /// Adds a 1 x cols row vector to every row of a.
    Tensor add_rowvec(const Tensor& a, const Tensor& b);
    Tensor relu(const Tensor& a);  // derivative at exactly 0 is 0
    Tensor concat_cols(const std::vector<Tensor>& parts);
    Tensor concat_rows(const std::vector<Tensor>& parts);
    /// out[s] = sum of rows v with segments[v] == s; empty segments give
    /// zero rows.
    Tensor segment_sum(const Tensor& x, const std::vector<int>& segments, int num_segments);
    Tensor gather_sum(const Tensor& x, const GatherPlan& plan);
    Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);
    /// Train mode zeroes entries with probability p and scales survivors by
    /// 1/(1-p); eval mode returns the input unchanged.
    Tensor dropout(const Tensor& x, double p, bool train_mode, Rng& rng);
    /// Mean negative log-likelihood over rows; returns a 1x1 scalar.
    Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets);
    Tensor sum_all(const Tensor& x);  // 1x1

    void backward(const Tensor& loss);
    /// Gradient of the last backward() w.r.t. a watched handle; zeros if the
    /// parameter did not influence the loss.
    Tensor grad(const Tensor& t) const;

    int num_recorded() const { return static_cast<int>(nodes_.size()); }

private:
    struct NodeRec {
        Tensor value;
        bool needs_grad = false;
        std::function<void(int)> back;  // receives own node id; empty for leaves/constants
        Tensor grad;                 // lazily allocated
    };

    Tensor record(Tensor value, bool needs_grad, std::function<void(int)> back);
    // Validates tape membership; auto-registers untracked tensors as constants.
    Tensor use(const Tensor& t);
    bool needs(const Tensor& t) const { return nodes_[static_cast<std::size_t>(t.node)].needs_grad; }
    Tensor& grad_buf(int node);
    const Tensor* grad_of(int node) const;

    std::uint64_t id_;
    std::vector<NodeRec> nodes_;
    bool ran_backward_ = false;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// First/second moment accumulators, one pair per parameter in list order.
struct AdamState {
    AdamConfig cfg;
    std::int64_t step = 0;
    std::vector<Tensor> m, v;
    static AdamState init(const std::vector<Tensor*>& params, AdamConfig cfg);
};

/// Adam with decoupled weight decay: params are first scaled by
/// (1 - lr * weight_decay), then the bias-corrected Adam delta is applied.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state);

/// Plain (untracked) matrix product for precomputations and tests.
Tensor matmul_plain(const Tensor& a, const Tensor& b);

/// Max |a - b| over all entries; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

bool all_finite(const Tensor& t);

}  // namespace edgnn
