#include "trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "ops.hpp"
#include "rng.hpp"

namespace stdrive::train {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Adam with bias correction; moments kept in double so update order is the
// only thing float precision depends on. Sgd is the plain rule.
class Stepper {
public:
    Stepper(net::Parameters<run_scalar>& params, const TrainConfig& tc)
        : params_(params), lr_(tc.lr), kind_(tc.optimizer) {
        if (kind_ == Optimizer::Adam) {
            m_.resize(params.tensor_count());
            v_.resize(params.tensor_count());
            for (std::size_t i = 0; i < params.items().size(); ++i) {
                m_[i].assign(params.items()[i].second.size(), 0.0);
                v_[i].assign(params.items()[i].second.size(), 0.0);
            }
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(0.9, t_);
        const double bc2 = 1.0 - std::pow(0.999, t_);
        for (std::size_t i = 0; i < params_.items().size(); ++i) {
            auto& tensor = params_.items()[i].second;
            auto g = tensor.grad();
            auto w = tensor.raw_data();
            if (kind_ == Optimizer::Sgd) {
                for (std::size_t j = 0; j < w.size(); ++j)
                    w[j] = static_cast<run_scalar>(w[j] - lr_ * static_cast<double>(g[j]));
                continue;
            }
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t j = 0; j < w.size(); ++j) {
                const double gd = static_cast<double>(g[j]);
                m[j] = 0.9 * m[j] + 0.1 * gd;
                v[j] = 0.999 * v[j] + 0.001 * gd * gd;
                const double update = lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + 1e-8);
                w[j] = static_cast<run_scalar>(w[j] - update);
            }
        }
    }

private:
    net::Parameters<run_scalar>& params_;
    double lr_;
    Optimizer kind_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

ag::Tensor<run_scalar> sequence_loss(const net::NetworkConfig& cfg, const ag::Tensor<run_scalar>& logits,
                                     const data::SequenceRecord& rec, LossKind loss) {
    if (loss == LossKind::CrossEntropy) return ag::ops::cross_entropy(logits, {rec.label});
    auto target = ag::Tensor<run_scalar>::leaf({1, cfg.head_outputs()}, {rec.steering_deg});
    return ag::ops::mse(logits, target);
}

void check_compatible(const net::NetworkConfig& cfg, const data::Dataset& ds, const TrainConfig& tc) {
    net::validate_config(cfg);
    ds.validate();
    if (ds.seqs.empty()) throw std::invalid_argument("train: dataset is empty");
    if (ds.T != cfg.sequence_length || ds.H != cfg.frame_height || ds.W != cfg.frame_width)
        throw std::invalid_argument("train: dataset geometry " + std::to_string(ds.T) + "x" + std::to_string(ds.H) +
                                    "x" + std::to_string(ds.W) + " does not match the network config");
    const bool class_head = cfg.head == net::Head::Classification;
    if (class_head != (ds.kind == data::DatasetKind::Classification))
        throw std::invalid_argument("train: dataset label kind does not match the network head");
    if (class_head != (tc.loss == LossKind::CrossEntropy))
        throw std::invalid_argument("train: loss kind does not match the network head");
    if (tc.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
    if (tc.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(tc.lr > 0.0) || !std::isfinite(tc.lr)) throw std::invalid_argument("train: lr must be positive");
    if (tc.salient_ratio < 0.0 || tc.salient_ratio > 1.0)
        throw std::invalid_argument("train: salient_ratio must be in [0,1]");
    if (tc.stop_at_train_accuracy > 0.0 && !tc.track_train_metric)
        throw std::invalid_argument("train: early stop requires track_train_metric");
}

}  // namespace

Optimizer optimizer_from(const std::string& s) {
    if (s == "adam") return Optimizer::Adam;
    if (s == "sgd") return Optimizer::Sgd;
    throw std::invalid_argument("unknown optimizer '" + s + "'");
}

const char* optimizer_name(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

LossKind loss_for_head(net::Head h) {
    return h == net::Head::Classification ? LossKind::CrossEntropy : LossKind::SquaredError;
}

EvalResult evaluate(const net::NetworkConfig& cfg, net::Parameters<run_scalar>& params,
                    const net::HiddenState<run_scalar>& h0, const data::Dataset& ds) {
    ds.validate();
    if (ds.seqs.empty()) throw std::invalid_argument("evaluate: dataset is empty");
    if (ds.T != cfg.sequence_length || ds.H != cfg.frame_height || ds.W != cfg.frame_width)
        throw std::invalid_argument("evaluate: dataset geometry does not match the model");
    if ((ds.kind == data::DatasetKind::Steering) != (cfg.head == net::Head::Regression))
        throw std::invalid_argument("evaluate: dataset labels do not match the model head");
    ag::NoGradGuard ng;
    const bool with_maps = cfg.input_channels == 6;
    EvalResult r;
    double mae = 0.0;
    for (std::size_t i = 0; i < ds.seqs.size(); ++i) {
        auto seq = data::sequence_tensor<run_scalar>(ds, i, with_maps);
        auto out = net::forward(cfg, params, seq, h0);
        auto logits = out.logits.data();
        if (cfg.head == net::Head::Classification) {
            const int pred = logits[1] > logits[0] ? 1 : 0;
            const int truth = ds.seqs[i].label;
            r.confusion[truth][pred] += 1;
            if (pred == truth) ++r.correct;
        } else {
            mae += std::abs(static_cast<double>(logits[0]) - ds.seqs[i].steering_deg);
        }
        ++r.total;
    }
    r.metric = cfg.head == net::Head::Classification ? static_cast<double>(r.correct) / r.total
                                                     : mae / r.total;
    return r;
}

TrainingHistory train(const net::NetworkConfig& cfg, net::Parameters<run_scalar>& params,
                      const net::HiddenState<run_scalar>& h0, const data::Dataset& ds,
                      const data::Dataset* val, const TrainConfig& tc) {
    check_compatible(cfg, ds, tc);
    const std::size_t n = ds.seqs.size();
    const bool with_maps = cfg.input_channels == 6;
    Stepper stepper(params, tc);
    TrainingHistory hist;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const auto t0 = Clock::now();
        rng::Engine shuffle_eng(rng::mix_seed(tc.seed, "order", static_cast<std::uint64_t>(epoch)));
        shuffle_eng.shuffle(order);

        double loss_sum = 0.0;
        int step_idx = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(tc.batch_size), ++step_idx) {
            const std::size_t count = std::min(static_cast<std::size_t>(tc.batch_size), n - start);
            const std::string where = "epoch " + std::to_string(epoch + 1) + " step " + std::to_string(step_idx + 1);
            ag::Tensor<run_scalar> loss;
            try {
                ag::Tensor<run_scalar> acc;
                for (std::size_t k = 0; k < count; ++k) {
                    const std::size_t idx = order[start + k];
                    auto seq = data::sequence_tensor<run_scalar>(ds, idx, with_maps);
                    auto out = net::forward(cfg, params, seq, h0);
                    auto li = sequence_loss(cfg, out.logits, ds.seqs[idx], tc.loss);
                    acc = acc.valid() ? ag::ops::add(acc, li) : li;
                }
                loss = ag::ops::scale(acc, static_cast<run_scalar>(1.0 / count));
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("train: " + where + ": " + e.what());
            }
            const double lv = loss.item();
            if (!std::isfinite(lv))
                throw std::runtime_error("train: non-finite loss at " + where);
            ag::backward(loss);
            stepper.step();
            params.zero_grad_all();
            loss_sum += lv * count;
        }

        EpochStats es;
        es.epoch = epoch + 1;
        es.loss = loss_sum / n;
        if (tc.track_train_metric) {
            es.train_metric = evaluate(cfg, params, h0, ds).metric;
            if (cfg.head == net::Head::Classification && hist.epochs_to_95 < 0 && es.train_metric >= 0.95)
                hist.epochs_to_95 = es.epoch;
        }
        if (val) es.val_metric = evaluate(cfg, params, h0, *val).metric;
        es.seconds = elapsed(t0);
        hist.epochs.push_back(es);

        if (tc.log_every > 0 && (epoch + 1) % tc.log_every == 0) {
            std::printf("epoch %d/%d loss %.6f", es.epoch, tc.epochs, es.loss);
            if (es.train_metric >= 0) std::printf(" train %.4f", es.train_metric);
            if (val) std::printf(" val %.4f", es.val_metric);
            std::printf(" (%.1fs)\n", es.seconds);
            std::fflush(stdout);
        }
        if (tc.stop_at_train_accuracy > 0.0 && es.train_metric >= tc.stop_at_train_accuracy) break;
    }
    return hist;
}

}  // namespace stdrive::train
