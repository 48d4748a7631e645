#include "edgnn/tensor.hpp"

#include <Eigen/Core>

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace edgnn {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

ECMap view(const Tensor& t) { return ECMap(t.raw(), t.rows(), t.cols()); }
EMap view(Tensor& t) { return EMap(t.raw(), t.rows(), t.cols()); }

std::string shape_str(const Tensor& t) {
    return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(op + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

std::atomic<std::uint64_t> next_tape_id{1};

}  // namespace

Tensor::Tensor(int rows, int cols, double fill)
    : rows_(rows), cols_(cols),
      data_(std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill)) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative shape");
}

Tensor Tensor::from(int rows, int cols, std::initializer_list<double> values) {
    Tensor t(rows, cols);
    if (static_cast<std::int64_t>(values.size()) != t.size())
        throw std::invalid_argument("Tensor::from: value count does not match shape");
    std::copy(values.begin(), values.end(), t.raw());
    return t;
}

Tensor Tensor::clone() const {
    Tensor t(rows_, cols_);
    if (data_) t.vec() = *data_;
    return t;
}

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

Tensor Tape::record(Tensor value, bool needs_grad, std::function<void(int)> back) {
    value.node = static_cast<int>(nodes_.size());
    value.tape_id = id_;
    nodes_.push_back(NodeRec{value, needs_grad, std::move(back), Tensor{}});
    return value;
}

Tensor Tape::use(const Tensor& t) {
    if (t.node < 0) return record(t, false, nullptr);
    if (t.tape_id != id_)
        throw std::logic_error("Tape: tensor belongs to a different tape; re-watch it or pass a detached copy");
    return t;
}

Tensor Tape::watch(const Tensor& t) {
    if (t.empty()) throw std::invalid_argument("Tape::watch: empty tensor");
    return record(t, true, nullptr);
}

Tensor Tape::constant(const Tensor& t) {
    if (t.empty()) throw std::invalid_argument("Tape::constant: empty tensor");
    return record(t, false, nullptr);
}

Tensor& Tape::grad_buf(int node) {
    NodeRec& rec = nodes_[static_cast<std::size_t>(node)];
    if (rec.grad.empty()) rec.grad = Tensor(rec.value.rows(), rec.value.cols());
    return rec.grad;
}

const Tensor* Tape::grad_of(int node) const {
    const NodeRec& rec = nodes_[static_cast<std::size_t>(node)];
    return rec.grad.empty() ? nullptr : &rec.grad;
}

Tensor Tape::matmul(const Tensor& a_in, const Tensor& b_in) {
    Tensor a = use(a_in), b = use(b_in);
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    Tensor out(a.rows(), b.cols());
    view(out).noalias() = view(a) * view(b);
    bool ng = needs(a) || needs(b);
    return record(out, ng, [this, an = a.node, bn = b.node](int on) {
        const Tensor* g = grad_of(on);
        if (!g) return;
        const Tensor& a = nodes_[static_cast<std::size_t>(an)].value;
        const Tensor& b = nodes_[static_cast<std::size_t>(bn)].value;
        if (nodes_[static_cast<std::size_t>(an)].needs_grad)
            view(grad_buf(an)).noalias() += view(*g) * view(b).transpose();
        if (nodes_[static_cast<std::size_t>(bn)].needs_grad)
            view(grad_buf(bn)).noalias() += view(a).transpose() * view(*g);
    });
}

Tensor Tape::add(const Tensor& a_in, const Tensor& b_in) {
    Tensor a = use(a_in), b = use(b_in);
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a, b);
    Tensor out(a.rows(), a.cols());
    view(out) = view(a) + view(b);
    return record(out, needs(a) || needs(b), [this, an = a.node, bn = b.node](int on) {
        const Tensor* g = grad_of(on);
        if (!g) return;
        if (nodes_[static_cast<std::size_t>(an)].needs_grad) view(grad_buf(an)) += view(*g);
        if (nodes_[static_cast<std::size_t>(bn)].needs_grad) view(grad_buf(bn)) += view(*g);
    });
}

Tensor Tape::add_rowvec(const Tensor& a_in, const Tensor& b_in) {
    Tensor a = use(a_in), b = use(b_in);
    if (b.rows() != 1 || a.cols() != b.cols()) shape_error("add_rowvec", a, b);
    Tensor out(a.rows(), a.cols());
    view(out) = view(a).rowwise() + view(b).row(0);
    return record(out, needs(a) || needs(b), [this, an = a.node, bn = b.node](int on) {
        const Tensor* g = grad_of(on);
        if (!g) return;
        if (nodes_[static_cast<std::size_t>(an)].needs_grad) view(grad_buf(an)) += view(*g);
        if (nodes_[static_cast<std::size_t>(bn)].needs_grad)
            view(grad_buf(bn)).row(0) += view(*g).colwise().sum();
    });
}

Tensor Tape::relu(const Tensor& a_in) {
    Tensor a = use(a_in);
    Tensor out(a.rows(), a.cols());
    const double* x = a.raw();
    double* y = out.raw();
    for (std::int64_t i = 0; i < a.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return record(out, needs(a), [this, an = a.node](int on) {
        const Tensor* g = grad_of(on);
        if (!g || !nodes_[static_cast<std::size_t>(an)].needs_grad) return;
        const Tensor& x = nodes_[static_cast<std::size_t>(an)].value;
        Tensor& gx = grad_buf(an);
        for (std::int64_t i = 0; i < x.size(); ++i)
            if (x.raw()[i] > 0.0) gx.raw()[i] += g->raw()[i];
    });
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts_in) {
    if (parts_in.empty()) throw std::invalid_argument("concat_cols: empty part list");
    std::vector<Tensor> parts;
    parts.reserve(parts_in.size());
    int cols = 0;
    bool ng = false;
    for (const Tensor& p : parts_in) {
        parts.push_back(use(p));
        if (parts.back().rows() != parts.front().rows())
            shape_error("concat_cols", parts.front(), parts.back());
        cols += parts.back().cols();
        ng = ng || needs(parts.back());
    }
    Tensor out(parts.front().rows(), cols);
    std::vector<int> starts;
    int at = 0;
    for (const Tensor& p : parts) {
        starts.push_back(at);
        view(out).middleCols(at, p.cols()) = view(p);
        at += p.cols();
    }
    std::vector<int> ids;
    for (const Tensor& p : parts) ids.push_back(p.node);
    return record(out, ng, [this, ids, starts](int on) {
        const Tensor* g = grad_of(on);
        if (!g) return;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!nodes_[static_cast<std::size_t>(ids[i])].needs_grad) continue;
            Tensor& gx = grad_buf(ids[i]);
            view(gx) += view(*g).middleCols(starts[i], gx.cols());
        }
    });
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts_in) {
    if (parts_in.empty()) throw std::invalid_argument("concat_rows: empty part list");
    std::vector<Tensor> parts;
    parts.reserve(parts_in.size());
    int rows = 0;
    bool ng = false;
    for (const Tensor& p : parts_in) {
        parts.push_back(use(p));
        if (parts.back().cols() != parts.front().cols())
            shape_error("concat_rows", parts.front(), parts.back());
        rows += parts.back().rows();
        ng = ng || needs(parts.back());
    }
    Tensor out(rows, parts.front().cols());
    std::vector<int> starts;
    int at = 0;
    for (const Tensor& p : parts) {
        starts.push_back(at);
        view(out).middleRows(at, p.rows()) = view(p);
        at += p.rows();
    }
    std::vector<int> ids;
    for (const Tensor& p : parts) ids.push_back(p.node);
    return record(out, ng, [this, ids, starts](int on) {
        const Tensor* g = grad_of(on);
        if (!g) return;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!nodes_[static_cast<std::size_t>(ids[i])].needs_grad) continue;
            Tensor& gx = grad_buf(ids[i]);
            view(gx) += view(*g).middleRows(starts[i], gx.rows());
        }
    });
}

Tensor Tape::segment_sum(const Tensor& x_in, const std::vector<int>& segments, int num_segments) {
    Tensor x = use(x_in);
    if (static_cast<int>(segments.size()) != x.rows())
        throw std::invalid_argument("segment_sum: segment map covers " + std::to_string(segments.size()) +
                                    " rows, tensor has " + std::to_string(x.rows()));
    for (int s : segments)
        if (s < 0 || s >= num_segments)
            throw std::invalid_argument("segment_sum: segment id " + std::to_string(s) +
                                        " outside [0, " + std::to_string(num_segments) + ")");
    Tensor out(num_segments, x.cols());
    for (int r = 0; r < x.rows(); ++r)
        view(out).row(segments[static_cast<std::size_t>(r)]) += view(x).row(r);
    return record(out, needs(x), [this, xn = x.node, segments](int on) {
        const Tensor* g = grad_of(on);
        if (!g || !nodes_[static_cast<std::size_t>(xn)].needs_grad) return;
        Tensor& gx = grad_buf(xn);
        for (int r = 0; r < gx.rows(); ++r)
            view(gx).row(r) += view(*g).row(segments[static_cast<std::size_t>(r)]);
    });
}

Tensor Tape::gather_sum(const Tensor& x_in, const GatherPlan& plan) {
    Tensor x = use(x_in);
    for (int i : plan.index)
        if (i < 0 || i >= x.rows())
            throw std::invalid_argument("gather_sum: row index " + std::to_string(i) + " outside input");
    Tensor out(plan.num_rows(), x.cols());
    for (int r = 0; r < plan.num_rows(); ++r)
        for (int k = plan.offsets[static_cast<std::size_t>(r)]; k < plan.offsets[static_cast<std::size_t>(r) + 1]; ++k)
            view(out).row(r) += view(x).row(plan.index[static_cast<std::size_t>(k)]);
    return record(out, needs(x), [this, xn = x.node, plan](int on) {
        const Tensor* g = grad_of(on);
        if (!g || !nodes_[static_cast<std::size_t>(xn)].needs_grad) return;
        Tensor& gx = grad_buf(xn);
        for (int r = 0; r < plan.num_rows(); ++r)
            for (int k = plan.offsets[static_cast<std::size_t>(r)]; k < plan.offsets[static_cast<std::size_t>(r) + 1]; ++k)
                view(gx).row(plan.index[static_cast<std::size_t>(k)]) += view(*g).row(r);
    });
}

Tensor Tape::gather_rows(const Tensor& x_in, const std::vector<int>& rows) {
    Tensor x = use(x_in);
    for (int i : rows)
        if (i < 0 || i >= x.rows())
            throw std::invalid_argument("gather_rows: row index " + std::to_string(i) + " outside input");
    Tensor out(static_cast<int>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k)
        view(out).row(static_cast<int>(k)) = view(x).row(rows[k]);
    return record(out, needs(x), [this, xn = x.node, rows](int on) {
        const Tensor* g = grad_of(on);
        if (!g || !nodes_[static_cast<std::size_t>(xn)].needs_grad) return;
        Tensor& gx = grad_buf(xn);
        for (std::size_t k = 0; k < rows.size(); ++k)
            view(gx).row(rows[k]) += view(*g).row(static_cast<int>(k));
    });
}

Tensor Tape::dropout(const Tensor& x_in, double p, bool train_mode, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must lie in [0, 1)");
    Tensor x = use(x_in);
    if (!train_mode || p == 0.0) return x;
    Tensor mask(x.rows(), x.cols());
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::int64_t i = 0; i < mask.size(); ++i)
        mask.raw()[i] = rng.bernoulli(p) ? 0.0 : keep_scale;
    Tensor out(x.rows(), x.cols());
    for (std::int64_t i = 0; i < x.size(); ++i) out.raw()[i] = x.raw()[i] * mask.raw()[i];
    return record(out, needs(x), [this, xn = x.node, mask](int on) {
        const Tensor* g = grad_of(on);
        if (!g || !nodes_[static_cast<std::size_t>(xn)].needs_grad) return;
        Tensor& gx = grad_buf(xn);
        for (std::int64_t i = 0; i < gx.size(); ++i) gx.raw()[i] += g->raw()[i] * mask.raw()[i];
    });
}

Tensor Tape::softmax_cross_entropy(const Tensor& logits_in, const std::vector<int>& targets) {
    Tensor logits = use(logits_in);
    if (static_cast<int>(targets.size()) != logits.rows())
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(targets.size()) +
                                    " targets for " + std::to_string(logits.rows()) + " rows");
    for (int t : targets)
        if (t < 0 || t >= logits.cols())
            throw std::invalid_argument("softmax_cross_entropy: target " + std::to_string(t) +
                                        " outside [0, " + std::to_string(logits.cols()) + ")");
    if (logits.rows() == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");

    Tensor probs(logits.rows(), logits.cols());
    double total = 0.0;
    for (int r = 0; r < logits.rows(); ++r) {
        double mx = logits(r, 0);
        for (int c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits(r, c));
        double z = 0.0;
        for (int c = 0; c < logits.cols(); ++c) z += std::exp(logits(r, c) - mx);
        double logz = std::log(z) + mx;
        for (int c = 0; c < logits.cols(); ++c) probs(r, c) = std::exp(logits(r, c) - logz);
        total += logz - logits(r, targets[static_cast<std::size_t>(r)]);
    }
    Tensor out(1, 1);
    out(0, 0) = total / logits.rows();
    return record(out, needs(logits), [this, ln = logits.node, probs, targets](int on) {
        const Tensor* g = grad_of(on);
        if (!g || !nodes_[static_cast<std::size_t>(ln)].needs_grad) return;
        Tensor& gx = grad_buf(ln);
        const double scale = g->raw()[0] / probs.rows();
        for (int r = 0; r < probs.rows(); ++r)
            for (int c = 0; c < probs.cols(); ++c)
                gx(r, c) += scale * (probs(r, c) - (targets[static_cast<std::size_t>(r)] == c ? 1.0 : 0.0));
    });
}

Tensor Tape::sum_all(const Tensor& x_in) {
    Tensor x = use(x_in);
    Tensor out(1, 1);
    double acc = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) acc += x.raw()[i];
    out(0, 0) = acc;
    return record(out, needs(x), [this, xn = x.node](int on) {
        const Tensor* g = grad_of(on);
        if (!g || !nodes_[static_cast<std::size_t>(xn)].needs_grad) return;
        Tensor& gx = grad_buf(xn);
        const double gv = g->raw()[0];
        for (std::int64_t i = 0; i < gx.size(); ++i) gx.raw()[i] += gv;
    });
}

void Tape::backward(const Tensor& loss) {
    if (loss.node < 0 || loss.tape_id != id_)
        throw std::invalid_argument("backward: loss is not recorded on this tape");
    if (loss.rows() != 1 || loss.cols() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss));
    if (ran_backward_) throw std::logic_error("backward: tape already differentiated");
    ran_backward_ = true;
    grad_buf(loss.node)(0, 0) = 1.0;
    for (int i = loss.node; i >= 0; --i) {
        NodeRec& rec = nodes_[static_cast<std::size_t>(i)];
        if (rec.back && !rec.grad.empty()) rec.back(i);
    }
}

Tensor Tape::grad(const Tensor& t) const {
    if (t.node < 0 || t.tape_id != id_)
        throw std::invalid_argument("grad: tensor is not recorded on this tape");
    const Tensor* g = grad_of(t.node);
    if (g) return *g;
    return Tensor(t.rows(), t.cols());
}

AdamState AdamState::init(const std::vector<Tensor*>& params, AdamConfig cfg) {
    AdamState s;
    s.cfg = cfg;
    for (const Tensor* p : params) {
        s.m.emplace_back(p->rows(), p->cols());
        s.v.emplace_back(p->rows(), p->cols());
    }
    return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
    ++state.step;
    const AdamConfig& c = state.cfg;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        if (p.rows() != g.rows() || p.cols() != g.cols()) shape_error("adam_step", p, g);
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::int64_t k = 0; k < p.size(); ++k) {
            if (c.weight_decay != 0.0) p.raw()[k] -= c.lr * c.weight_decay * p.raw()[k];
            m.raw()[k] = c.beta1 * m.raw()[k] + (1.0 - c.beta1) * g.raw()[k];
            v.raw()[k] = c.beta2 * v.raw()[k] + (1.0 - c.beta2) * g.raw()[k] * g.raw()[k];
            const double mhat = m.raw()[k] / bc1;
            const double vhat = v.raw()[k] / bc2;
            p.raw()[k] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) shape_error("matmul_plain", a, b);
    Tensor out(a.rows(), b.cols());
    view(out).noalias() = view(a) * view(b);
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("max_abs_diff", a, b);
    double mx = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a.raw()[i] - b.raw()[i]));
    return mx;
}

bool all_finite(const Tensor& t) {
    for (std::int64_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(t.raw()[i])) return false;
    return true;
}

}  // namespace edgnn
