#pragma once

// Fully connected Q-value approximator with optional dueling head,
// TD-error computation (plain and double targets), and gradient descent on
// the importance-weighted squared TD-error.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qer/binary_io.hpp"
#include "qer/random.hpp"
#include "qer/transition.hpp"

namespace qer {

enum class HeadKind : std::uint32_t { plain = 0, dueling = 1 };

struct NetworkShape {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden{64, 64};
    std::size_t actions = 2;
    HeadKind head = HeadKind::plain;

    bool operator==(const NetworkShape&) const = default;
};

struct DenseLayer {
    Eigen::MatrixXd w;  // out x in
    Eigen::VectorXd b;  // out
};

/// Gradients (or any other quantity) laid out exactly like the parameters.
struct ParameterSet {
    std::vector<DenseLayer> layers;

    std::size_t size() const noexcept {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.w.size() + l.b.size());
        return n;
    }

    /// Row-major weights then bias, layer by layer.
    Eigen::VectorXd flatten() const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
        Eigen::Index k = 0;
        for (const auto& l : layers) {
            for (Eigen::Index r = 0; r < l.w.rows(); ++r)
                for (Eigen::Index c = 0; c < l.w.cols(); ++c) out[k++] = l.w(r, c);
            for (Eigen::Index r = 0; r < l.b.size(); ++r) out[k++] = l.b[r];
        }
        return out;
    }

    void assign(const Eigen::VectorXd& flat) {
        if (static_cast<std::size_t>(flat.size()) != size()) throw std::invalid_argument("ParameterSet::assign: size mismatch");
        Eigen::Index k = 0;
        for (auto& l : layers) {
            for (Eigen::Index r = 0; r < l.w.rows(); ++r)
                for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = flat[k++];
            for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b[r] = flat[k++];
        }
    }

    bool all_finite() const {
        return std::all_of(layers.begin(), layers.end(),
                           [](const DenseLayer& l) { return l.w.allFinite() && l.b.allFinite(); });
    }
};

class QNetwork {
public:
    static constexpr char kCheckpointMagic[] = "QNET";
    static constexpr std::uint32_t kCheckpointVersion = 1;

    /// Activations kept from a batched forward pass for backpropagation.
    struct Cache {
        std::vector<Eigen::MatrixXd> inputs;  // input to each hidden layer, then to the heads
        std::vector<Eigen::MatrixXd> pre;     // hidden pre-activations
        Eigen::MatrixXd q;
    };

    /// Fan-in scaled uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)],
    /// zero biases. `zero_head` zeroes the output layer(s) as well.
    QNetwork(const NetworkShape& shape, Rng& rng, bool zero_head = false) : shape_(shape) {
        if (shape.input_dim == 0) throw std::invalid_argument("QNetwork: input_dim must be positive");
        if (shape.actions < 2) throw std::invalid_argument("QNetwork: at least two actions required");
        std::size_t fan_in = shape.input_dim;
        for (std::size_t h : shape.hidden) {
            if (h == 0) throw std::invalid_argument("QNetwork: hidden layer of width 0");
            params_.layers.push_back(init_layer(h, fan_in, rng, false));
            fan_in = h;
        }
        params_.layers.push_back(init_layer(shape.actions, fan_in, rng, zero_head));
        if (shape.head == HeadKind::dueling) params_.layers.push_back(init_layer(1, fan_in, rng, zero_head));
    }

    const NetworkShape& shape() const noexcept { return shape_; }
    const ParameterSet& parameters() const noexcept { return params_; }
    ParameterSet& parameters() noexcept { return params_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    /// states: input_dim x B, one column per sample. Returns actions x B.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& states, Cache* cache = nullptr) const {
        if (static_cast<std::size_t>(states.rows()) != shape_.input_dim)
            throw std::invalid_argument("QNetwork::forward: observation has " + std::to_string(states.rows()) +
                                        " components, expected " + std::to_string(shape_.input_dim));
        Eigen::MatrixXd h = states;
        if (cache) {
            cache->inputs.clear();
            cache->pre.clear();
        }
        const std::size_t n_hidden = shape_.hidden.size();
        for (std::size_t l = 0; l < n_hidden; ++l) {
            const auto& layer = params_.layers[l];
            Eigen::MatrixXd z = (layer.w * h).colwise() + layer.b;
            if (cache) {
                cache->inputs.push_back(std::move(h));
                cache->pre.push_back(z);
            }
            h = z.cwiseMax(0.0);
        }
        const auto& out = params_.layers[n_hidden];
        Eigen::MatrixXd q = (out.w * h).colwise() + out.b;
        if (shape_.head == HeadKind::dueling) {
            const auto& value = params_.layers[n_hidden + 1];
            const Eigen::RowVectorXd v = (value.w * h).colwise() + value.b;
            const Eigen::RowVectorXd mean_adv = q.colwise().mean();
            q.rowwise() += v - mean_adv;
        }
        if (cache) {
            cache->inputs.push_back(std::move(h));
            cache->q = q;
        }
        return q;
    }

    Eigen::VectorXd forward(std::span<const double> state) const {
        Eigen::Map<const Eigen::VectorXd> x(state.data(), static_cast<Eigen::Index>(state.size()));
        return forward_batch(Eigen::MatrixXd(x)).col(0);
    }

    /// Backpropagates dL/dQ (actions x B) through a cached forward pass.
    ParameterSet backward(const Cache& cache, const Eigen::MatrixXd& dq) const {
        ParameterSet grad;
        grad.layers.resize(params_.layers.size());
        const std::size_t n_hidden = shape_.hidden.size();
        const Eigen::MatrixXd& h = cache.inputs.back();
        const auto& out = params_.layers[n_hidden];

        Eigen::MatrixXd dh;
        if (shape_.head == HeadKind::dueling) {
            // Q_a = V + A_a - mean(A): dV = sum_a dQ_a, dA_b = dQ_b - mean_a dQ_a.
            const Eigen::RowVectorXd dv = dq.colwise().sum();
            const Eigen::MatrixXd da = dq.rowwise() - dv / static_cast<double>(shape_.actions);
            const auto& value = params_.layers[n_hidden + 1];
            grad.layers[n_hidden] = {da * h.transpose(), da.rowwise().sum()};
            grad.layers[n_hidden + 1] = {dv * h.transpose(), Eigen::VectorXd::Constant(1, dv.sum())};
            dh = out.w.transpose() * da + value.w.transpose() * dv;
        } else {
            grad.layers[n_hidden] = {dq * h.transpose(), dq.rowwise().sum()};
            dh = out.w.transpose() * dq;
        }
        for (std::size_t l = n_hidden; l-- > 0;) {
            const Eigen::MatrixXd dz = dh.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
            grad.layers[l] = {dz * cache.inputs[l].transpose(), dz.rowwise().sum()};
            if (l > 0) dh = params_.layers[l].w.transpose() * dz;
        }
        return grad;
    }

    void save(const std::filesystem::path& path) const {
        io::LeWriter w(path);
        w.magic({kCheckpointMagic, 4});
        w.u32(kCheckpointVersion);
        w.u32(static_cast<std::uint32_t>(shape_.head));
        w.u64(shape_.input_dim);
        w.u64(shape_.actions);
        w.u32(static_cast<std::uint32_t>(shape_.hidden.size()));
        for (auto h : shape_.hidden) w.u64(h);
        w.u32(static_cast<std::uint32_t>(params_.layers.size()));
        for (const auto& l : params_.layers) {
            w.u64(static_cast<std::uint64_t>(l.w.rows()));
            w.u64(static_cast<std::uint64_t>(l.w.cols()));
        }
        const Eigen::VectorXd flat = params_.flatten();
        for (Eigen::Index i = 0; i < flat.size(); ++i) w.f64(flat[i]);
        w.finish();
    }

    static QNetwork load(const std::filesystem::path& path) {
        io::LeReader r(path);
        r.expect_magic({kCheckpointMagic, 4});
        if (const auto v = r.u32(); v != kCheckpointVersion)
            throw std::runtime_error("QNetwork::load: unsupported checkpoint version " + std::to_string(v));
        NetworkShape shape;
        const auto head = r.u32();
        if (head > 1) throw std::runtime_error("QNetwork::load: unknown head kind");
        shape.head = static_cast<HeadKind>(head);
        shape.input_dim = r.u64();
        shape.actions = r.u64();
        shape.hidden.resize(r.u32());
        for (auto& h : shape.hidden) h = r.u64();
        Rng unused(0);
        QNetwork net(shape, unused);
        const std::uint32_t n_layers = r.u32();
        if (n_layers != net.params_.layers.size()) throw std::runtime_error("QNetwork::load: layer count mismatch");
        for (const auto& l : net.params_.layers) {
            const auto rows = r.u64();
            const auto cols = r.u64();
            if (rows != static_cast<std::uint64_t>(l.w.rows()) || cols != static_cast<std::uint64_t>(l.w.cols()))
                throw std::runtime_error("QNetwork::load: layer shape mismatch");
        }
        Eigen::VectorXd flat(static_cast<Eigen::Index>(net.parameter_count()));
        for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = r.f64();
        r.expect_end();
        net.params_.assign(flat);
        return net;
    }

private:
    static DenseLayer init_layer(std::size_t out, std::size_t in, Rng& rng, bool zero) {
        DenseLayer l{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
                     Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
        if (zero) return l;
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = rng.uniform(-bound, bound);
        return l;
    }

    NetworkShape shape_;
    ParameterSet params_;
};

/// Lowest index among the maxima.
inline std::size_t greedy_action(const Eigen::VectorXd& q) {
    std::size_t best = 0;
    for (Eigen::Index a = 1; a < q.size(); ++a)
        if (q[a] > q[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(a);
    return best;
}

template <UniformSource G>
std::size_t act_epsilon_greedy(const QNetwork& net, std::span<const double> state, double eps, G& rng) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("act_epsilon_greedy: eps must be in [0, 1]");
    if (rng.uniform() < eps) {
        const auto n = static_cast<double>(net.shape().actions);
        return std::min(net.shape().actions - 1, static_cast<std::size_t>(rng.uniform() * n));
    }
    return greedy_action(net.forward(state));
}

/// theta_target <- theta, exactly.
inline void sync_target(const QNetwork& online, QNetwork& target) {
    if (!(online.shape() == target.shape())) throw std::invalid_argument("sync_target: network shapes differ");
    target = online;
}

struct TdOptions {
    double gamma = 0.99;
    bool double_q = false;
    bool clip_reward = false;
};

/// A minibatch gathered into column matrices.
struct TdBatch {
    Eigen::MatrixXd states;
    Eigen::MatrixXd next_states;
    std::vector<std::size_t> actions;
    Eigen::VectorXd rewards;
    std::vector<bool> done;

    static TdBatch gather(std::span<const Transition* const> items) {
        if (items.empty()) throw std::invalid_argument("TdBatch: empty batch");
        const auto dim = static_cast<Eigen::Index>(items.front()->state.size());
        const auto n = static_cast<Eigen::Index>(items.size());
        TdBatch b{Eigen::MatrixXd(dim, n), Eigen::MatrixXd(dim, n), {}, Eigen::VectorXd(n), {}};
        b.actions.reserve(items.size());
        b.done.reserve(items.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            const Transition& t = *items[static_cast<std::size_t>(i)];
            if (static_cast<Eigen::Index>(t.state.size()) != dim || static_cast<Eigen::Index>(t.next_state.size()) != dim)
                throw std::invalid_argument("TdBatch: inconsistent observation dimensions");
            b.states.col(i) = Eigen::Map<const Eigen::VectorXd>(t.state.data(), dim);
            b.next_states.col(i) = Eigen::Map<const Eigen::VectorXd>(t.next_state.data(), dim);
            b.actions.push_back(t.action);
            b.rewards[i] = t.reward;
            b.done.push_back(t.done);
        }
        return b;
    }
};

/// Bootstrapped targets y = r + gamma * Q_target(s', a*), where a* is the
/// target net's argmax (plain) or the online net's argmax (double).
inline Eigen::VectorXd td_targets(const TdBatch& b, const QNetwork& online, const QNetwork& target, const TdOptions& opt) {
    const Eigen::MatrixXd q_next = target.forward_batch(b.next_states);
    Eigen::MatrixXd q_next_online;
    if (opt.double_q) q_next_online = online.forward_batch(b.next_states);
    Eigen::VectorXd y(b.rewards.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double r = b.rewards[i];
        if (opt.clip_reward) r = std::clamp(r, -1.0, 1.0);
        const auto ui = static_cast<std::size_t>(i);
        if (b.done[ui]) {
            y[i] = r;
            continue;
        }
        const std::size_t a_star = opt.double_q ? greedy_action(q_next_online.col(i)) : greedy_action(q_next.col(i));
        y[i] = r + opt.gamma * q_next(static_cast<Eigen::Index>(a_star), i);
    }
    return y;
}

inline double td_error(const Transition& t, const QNetwork& online, const QNetwork& target, const TdOptions& opt) {
    if (!(opt.gamma >= 0.0 && opt.gamma <= 1.0)) throw std::invalid_argument("td_error: gamma must be in [0, 1]");
    const Transition* one = &t;
    const TdBatch b = TdBatch::gather(std::span<const Transition* const>(&one, 1));
    const double y = td_targets(b, online, target, opt)[0];
    return y - online.forward(t.state)[static_cast<Eigen::Index>(t.action)];
}

struct LossAndGradient {
    double mean_loss = 0.0;
    std::vector<double> td_errors;
    ParameterSet gradient;
};

/// L = (1/B) sum_i 0.5 * w_i * delta_i^2 with the targets held fixed.
inline LossAndGradient loss_and_gradient(const QNetwork& online, const QNetwork& target, const TdBatch& b,
                                         std::span<const double> weights, const TdOptions& opt) {
    const auto n = b.rewards.size();
    if (static_cast<std::size_t>(n) != weights.size()) throw std::invalid_argument("train_step: weight count mismatch");
    const Eigen::VectorXd y = td_targets(b, online, target, opt);
    QNetwork::Cache cache;
    const Eigen::MatrixXd q = online.forward_batch(b.states, &cache);
    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(q.rows(), q.cols());
    LossAndGradient out;
    out.td_errors.resize(static_cast<std::size_t>(n));
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (b.actions[ui] >= online.shape().actions) throw std::invalid_argument("train_step: action out of range");
        const auto a = static_cast<Eigen::Index>(b.actions[ui]);
        const double delta = y[i] - q(a, i);
        out.td_errors[ui] = delta;
        loss += 0.5 * weights[ui] * delta * delta;
        dq(a, i) = -weights[ui] * delta / static_cast<double>(n);
    }
    out.mean_loss = loss / static_cast<double>(n);
    if (!std::isfinite(out.mean_loss)) {
        std::ostringstream msg;
        msg << "train_step: non-finite loss " << out.mean_loss << " (batch " << n << ", max |target| "
            << y.cwiseAbs().maxCoeff() << ", max |q| " << q.cwiseAbs().maxCoeff() << ")";
        throw std::runtime_error(msg.str());
    }
    out.gradient = online.backward(cache, dq);
    return out;
}

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Optimizer {
public:
    explicit Optimizer(const OptimizerConfig& cfg = {}) : cfg_(cfg) {
        if (!(cfg.lr > 0.0)) throw std::invalid_argument("Optimizer: learning rate must be positive");
    }

    const OptimizerConfig& config() const noexcept { return cfg_; }

    void step(QNetwork& net, const ParameterSet& grad) {
        auto& layers = net.parameters().layers;
        if (cfg_.kind == OptimizerKind::sgd) {
            for (std::size_t l = 0; l < layers.size(); ++l) {
                layers[l].w -= cfg_.lr * grad.layers[l].w;
                layers[l].b -= cfg_.lr * grad.layers[l].b;
            }
            return;
        }
        if (m_.layers.empty()) {
            for (const auto& g : grad.layers) {
                DenseLayer z{Eigen::MatrixXd::Zero(g.w.rows(), g.w.cols()), Eigen::VectorXd::Zero(g.b.size())};
                m_.layers.push_back(z);
                v_.layers.push_back(z);
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
            m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
            v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
            p.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
        };
        for (std::size_t l = 0; l < layers.size(); ++l) {
            update(layers[l].w, grad.layers[l].w, m_.layers[l].w, v_.layers[l].w);
            update(layers[l].b, grad.layers[l].b, m_.layers[l].b, v_.layers[l].b);
        }
    }

private:
    OptimizerConfig cfg_;
    ParameterSet m_, v_;
    std::uint64_t t_ = 0;
};

struct TrainResult {
    double mean_loss = 0.0;
    std::vector<double> td_errors;
};

/// One gradient step; returns the loss before the update and the TD-errors
/// the replay memory needs for its priorities.
inline TrainResult train_step(QNetwork& online, const QNetwork& target, std::span<const Transition* const> batch,
                              std::span<const double> weights, const TdOptions& opt, Optimizer& optimizer) {
    const TdBatch b = TdBatch::gather(batch);
    auto lg = loss_and_gradient(online, target, b, weights, opt);
    optimizer.step(online, lg.gradient);
    if (!online.parameters().all_finite()) throw std::runtime_error("train_step: parameters became non-finite");
    return {lg.mean_loss, std::move(lg.td_errors)};
}

/// Plain SGD convenience overload.
inline TrainResult train_step(QNetwork& online, const QNetwork& target, std::span<const Transition* const> batch,
                              std::span<const double> weights, double gamma, double lr, bool double_q = false) {
    Optimizer sgd({OptimizerKind::sgd, lr});
    return train_step(online, target, batch, weights, TdOptions{gamma, double_q, false}, sgd);
}

}  // namespace qer
