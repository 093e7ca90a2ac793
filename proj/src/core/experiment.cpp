#include "experiment.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "rng.hpp"
#include "salient.hpp"
#include "synthdata.hpp"

namespace stdrive::expt {

namespace {

std::string f17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string f4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string pad(std::string s, std::size_t w) {
    while (s.size() < w) s += ' ';
    return s;
}

net::NetworkConfig make_cfg(int channels, int h, int w, int t,
                            net::Head head = net::Head::Classification) {
    net::NetworkConfig cfg;
    cfg.input_channels = channels;
    cfg.frame_height = h;
    cfg.frame_width = w;
    cfg.sequence_length = t;
    cfg.head = head;
    net::validate_config(cfg);
    return cfg;
}

void require_positive(int v, const char* what) {
    if (v < 1) throw std::invalid_argument(std::string("experiment: ") + what + " must be >= 1");
}

std::string per_seed_header(int seeds) {
    std::string out;
    for (int s = 0; s < seeds; ++s) out += "\tseed" + std::to_string(s);
    return out;
}

std::string per_seed_cells(const std::vector<double>& xs) {
    std::string out;
    for (double v : xs) out += "\t" + f17(v);
    return out;
}

}  // namespace

namespace {

// failures must name the seed so a multi-seed run aborts with a useful message
void run_slot(const std::function<void(int)>& fn, int s) {
    try {
        fn(s);
    } catch (const std::exception& e) {
        throw std::runtime_error("seed " + std::to_string(s) + ": " + e.what());
    } catch (...) {
        throw std::runtime_error("seed " + std::to_string(s) + ": unknown error");
    }
}

}  // namespace

void parallel_seeds(int count, int threads, const std::function<void(int)>& fn) {
    if (count <= 0) return;
    int n = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (n > count) n = count;
    if (n == 1) {
        for (int s = 0; s < count; ++s) run_slot(fn, s);
        return;
    }
    std::mutex mu;
    std::exception_ptr first;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w)
        pool.emplace_back([&, w] {
            for (int s = w; s < count; s += n) {
                {
                    std::lock_guard<std::mutex> lk(mu);
                    if (first) return;
                }
                try {
                    run_slot(fn, s);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(mu);
                    if (!first) first = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

SeedStats summarize(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("summarize: no samples");
    SeedStats st;
    st.per_seed = std::move(xs);
    double sum = 0.0;
    for (double v : st.per_seed) sum += v;
    st.mean = sum / static_cast<double>(st.per_seed.size());
    if (st.per_seed.size() > 1) {
        double ss = 0.0;
        for (double v : st.per_seed) ss += (v - st.mean) * (v - st.mean);
        st.stddev = std::sqrt(ss / static_cast<double>(st.per_seed.size() - 1));
    }
    return st;
}

TransferOrderingResult run_transfer_ordering(const TransferOrderingOptions& opt) {
    require_positive(opt.train_n, "train_n");
    require_positive(opt.test_n, "test_n");
    require_positive(opt.seeds, "seeds");
    require_positive(opt.phase1_epochs, "phase1_epochs");
    require_positive(opt.phase2_epochs, "phase2_epochs");
    require_positive(opt.phase2_batch, "phase2_batch");

    const auto cfg3 = make_cfg(3, opt.frame_h, opt.frame_w, opt.seq_len);
    const auto cfg6 = make_cfg(6, opt.frame_h, opt.frame_w, opt.seq_len);
    const auto src_spec = synth::domain_by_name(opt.source_domain, opt.frame_h, opt.frame_w);
    auto dst_spec = synth::domain_by_name(opt.target_domain, opt.frame_h, opt.frame_w);
    dst_spec.noise = opt.target_noise;
    dst_spec.camera_jitter = opt.target_jitter;
    const std::uint64_t root = opt.root_seed;

    const auto source_train = synth::generate_dataset(src_spec, opt.train_n, opt.collision_ratio,
                                                      opt.seq_len, rng::mix_seed(root, "source-train"));
    const auto source_test = synth::generate_dataset(src_spec, opt.test_n, opt.collision_ratio,
                                                     opt.seq_len, rng::mix_seed(root, "source-test"));
    const auto target_train = synth::generate_dataset(dst_spec, opt.train_n, opt.collision_ratio,
                                                      opt.seq_len, rng::mix_seed(root, "target-train"));
    const auto target_test = synth::generate_dataset(dst_spec, opt.test_n, opt.collision_ratio,
                                                     opt.seq_len, rng::mix_seed(root, "target-test"));

    constexpr int kVariants = 3;
    std::vector<std::vector<double>> shifted(kVariants, std::vector<double>(opt.seeds, 0.0));
    std::vector<std::vector<double>> in_domain(kVariants, std::vector<double>(opt.seeds, 0.0));

    parallel_seeds(opt.seeds, opt.threads, [&](int s) {
        const std::uint64_t trial = rng::mix_seed(root, "trial", static_cast<std::uint64_t>(s));
        train::TrainConfig tc1;
        tc1.epochs = opt.phase1_epochs;
        tc1.batch_size = opt.batch;
        tc1.lr = opt.lr;
        tc1.seed = trial;
        tc1.track_train_metric = false;
        auto phase1 = xfer::train_phase1(cfg3, source_train, nullptr, tc1);
        auto bundle = xfer::harvest_bundle(cfg3, phase1.params, source_train, {true, true, true});

        train::TrainConfig tc2 = tc1;
        tc2.epochs = opt.phase2_epochs;
        tc2.batch_size = opt.phase2_batch;
        tc2.salient_ratio = 0.0;

        auto baseline = xfer::train_phase1(cfg3, target_train, nullptr, tc2);
        auto weights_only = xfer::train_phase2(bundle, cfg3, target_train, nullptr, tc2);

        data::Dataset augmented = target_train;
        sal::attach_salient_maps(cfg3, phase1.params, augmented, opt.salient_ratio,
                                 rng::mix_seed(trial, "maps"), {});
        train::TrainConfig tc3 = tc2;
        tc3.salient_ratio = opt.salient_ratio;
        auto full = xfer::train_phase2(bundle, cfg6, augmented, nullptr, tc3);

        shifted[0][s] = train::evaluate(cfg3, baseline.params, baseline.h0, target_test).metric;
        shifted[1][s] = train::evaluate(cfg3, weights_only.params, weights_only.h0, target_test).metric;
        shifted[2][s] = train::evaluate(cfg6, full.params, full.h0, target_test).metric;
        in_domain[0][s] = train::evaluate(cfg3, baseline.params, baseline.h0, source_test).metric;
        in_domain[1][s] = train::evaluate(cfg3, weights_only.params, weights_only.h0, source_test).metric;
        in_domain[2][s] = train::evaluate(cfg6, full.params, full.h0, source_test).metric;
    });

    TransferOrderingResult res;
    const char* names[kVariants] = {"baseline", "weights-only", "full"};
    for (int v = 0; v < kVariants; ++v)
        res.variants.push_back({names[v], summarize(shifted[v]), summarize(in_domain[v])});
    return res;
}

std::string TransferOrderingResult::tsv() const {
    const int seeds = static_cast<int>(variants.at(0).shifted.per_seed.size());
    std::string out = "variant\tshifted_mean\tshifted_std\tin_domain_mean\tin_domain_std" +
                      per_seed_header(seeds) + "\n";
    for (const auto& v : variants)
        out += v.name + "\t" + f17(v.shifted.mean) + "\t" + f17(v.shifted.stddev) + "\t" +
               f17(v.in_domain.mean) + "\t" + f17(v.in_domain.stddev) +
               per_seed_cells(v.shifted.per_seed) + "\n";
    return out;
}

std::string TransferOrderingResult::table() const {
    std::string out = pad("variant", 14) + pad("shifted acc", 20) + "in-domain acc\n";
    for (const auto& v : variants)
        out += pad(v.name, 14) + pad(f4(v.shifted.mean) + " +/- " + f4(v.shifted.stddev), 20) +
               f4(v.in_domain.mean) + " +/- " + f4(v.in_domain.stddev) + "\n";
    return out;
}

ConvergenceResult run_convergence(const ConvergenceOptions& opt) {
    require_positive(opt.train_n, "train_n");
    require_positive(opt.seeds, "seeds");
    require_positive(opt.phase1_epochs, "phase1_epochs");
    require_positive(opt.max_epochs, "max_epochs");

    const auto cfg3 = make_cfg(3, opt.frame_h, opt.frame_w, opt.seq_len);
    const auto cfg6 = make_cfg(6, opt.frame_h, opt.frame_w, opt.seq_len);
    const auto src_spec = synth::domain_by_name(opt.source_domain, opt.frame_h, opt.frame_w);
    const auto dst_spec = synth::domain_by_name(opt.target_domain, opt.frame_h, opt.frame_w);
    const std::uint64_t root = opt.root_seed;

    const auto source_train = synth::generate_dataset(src_spec, opt.train_n, opt.collision_ratio,
                                                      opt.seq_len, rng::mix_seed(root, "source-train"));
    const auto target_train = synth::generate_dataset(dst_spec, opt.train_n, opt.collision_ratio,
                                                      opt.seq_len, rng::mix_seed(root, "target-train"));

    // ablation flags per variant; every variant trains the same 6-channel net
    struct Variant {
        const char* name;
        xfer::AblationFlags flags;
        bool augmented;
    };
    const Variant variants[] = {
        {"full", {true, true, true}, true},
        {"no-lstm", {true, false, false}, true},
        {"no-cnn", {false, true, true}, true},
        {"no-aug", {true, true, true}, false},
    };
    constexpr int kVariants = 4;

    std::vector<std::vector<double>> epochs(kVariants, std::vector<double>(opt.seeds, 0.0));
    std::vector<std::vector<int>> unreached(kVariants, std::vector<int>(opt.seeds, 0));

    parallel_seeds(opt.seeds, opt.threads, [&](int s) {
        const std::uint64_t trial = rng::mix_seed(root, "trial", static_cast<std::uint64_t>(s));
        train::TrainConfig tc1;
        tc1.epochs = opt.phase1_epochs;
        tc1.batch_size = opt.batch;
        tc1.lr = opt.lr;
        tc1.seed = trial;
        tc1.track_train_metric = false;
        auto phase1 = xfer::train_phase1(cfg3, source_train, nullptr, tc1);
        auto bundle = xfer::harvest_bundle(cfg3, phase1.params, source_train, {true, true, true});

        data::Dataset augmented = target_train;
        sal::attach_salient_maps(cfg3, phase1.params, augmented, opt.salient_ratio,
                                 rng::mix_seed(trial, "maps"), {});

        for (int v = 0; v < kVariants; ++v) {
            auto b = bundle;
            b.flags = variants[v].flags;
            train::TrainConfig tc2 = tc1;
            tc2.epochs = opt.max_epochs;
            tc2.salient_ratio = variants[v].augmented ? opt.salient_ratio : 0.0;
            tc2.track_train_metric = true;
            tc2.stop_at_train_accuracy = 0.95;
            auto out = xfer::train_phase2(b, cfg6, variants[v].augmented ? augmented : target_train,
                                          nullptr, tc2);
            if (out.history.epochs_to_95 > 0) {
                epochs[v][s] = out.history.epochs_to_95;
            } else {
                epochs[v][s] = opt.max_epochs + 1;
                unreached[v][s] = 1;
            }
        }
    });

    ConvergenceResult res;
    res.max_epochs = opt.max_epochs;
    for (int v = 0; v < kVariants; ++v) {
        ConvergenceVariant cv;
        cv.name = variants[v].name;
        cv.epochs_to_95 = summarize(epochs[v]);
        for (int u : unreached[v]) cv.unreached += u;
        res.variants.push_back(std::move(cv));
    }
    return res;
}

std::string ConvergenceResult::tsv() const {
    const int seeds = static_cast<int>(variants.at(0).epochs_to_95.per_seed.size());
    std::string out = "variant\tepochs_to_95_mean\tepochs_to_95_std\tunreached" + per_seed_header(seeds) + "\n";
    for (const auto& v : variants)
        out += v.name + "\t" + f17(v.epochs_to_95.mean) + "\t" + f17(v.epochs_to_95.stddev) + "\t" +
               std::to_string(v.unreached) + per_seed_cells(v.epochs_to_95.per_seed) + "\n";
    return out;
}

std::string ConvergenceResult::table() const {
    std::string out = pad("variant", 10) + pad("epochs to 95% train acc", 26) + "unreached\n";
    for (const auto& v : variants)
        out += pad(v.name, 10) + pad(f4(v.epochs_to_95.mean) + " +/- " + f4(v.epochs_to_95.stddev), 26) +
               std::to_string(v.unreached) + "\n";
    return out;
}

SimilarityTableResult run_similarity_table(const SimilarityTableOptions& opt) {
    require_positive(opt.ref_n, "ref_n");
    require_positive(opt.cand_n, "cand_n");
    require_positive(opt.encoder_train_n, "encoder_train_n");
    require_positive(opt.encoder_epochs, "encoder_epochs");
    if (opt.n_pairs < 2) throw std::invalid_argument("experiment: n_pairs must be >= 2");

    const auto cfg3 = make_cfg(3, opt.frame_h, opt.frame_w, opt.seq_len);
    const auto ref_spec = synth::domain_by_name(opt.reference_domain, opt.frame_h, opt.frame_w);
    const std::uint64_t root = opt.root_seed;

    const auto encoder_train = synth::generate_dataset(ref_spec, opt.encoder_train_n, opt.collision_ratio,
                                                       opt.seq_len, rng::mix_seed(root, "encoder-train"));
    train::TrainConfig tc;
    tc.epochs = opt.encoder_epochs;
    tc.batch_size = opt.batch;
    tc.lr = opt.lr;
    tc.seed = rng::mix_seed(root, "encoder");
    tc.track_train_metric = false;
    auto encoder = xfer::train_phase1(cfg3, encoder_train, nullptr, tc);

    const auto reference = synth::generate_dataset(ref_spec, opt.ref_n, opt.collision_ratio,
                                                   opt.seq_len, rng::mix_seed(root, "reference"));

    struct Cand {
        std::string name;
        synth::DomainSpec spec;
    };
    const std::vector<Cand> cands = {
        {opt.reference_domain + "-resampled", ref_spec},
        {"townB", synth::domain_by_name("townB", opt.frame_h, opt.frame_w)},
        {"townC", synth::domain_by_name("townC", opt.frame_h, opt.frame_w)},
        {"noise", synth::domain_by_name("noise", opt.frame_h, opt.frame_w)},
    };

    SimilarityTableResult res;
    res.reference = opt.reference_domain;
    res.rows.resize(cands.size());
    std::vector<data::Dataset> cand_sets(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i)
        cand_sets[i] = synth::generate_dataset(cands[i].spec, opt.cand_n, opt.collision_ratio,
                                               opt.seq_len, rng::mix_seed(root, "candidate", i));
    parallel_seeds(static_cast<int>(cands.size()), opt.threads, [&](int i) {
        res.rows[i].name = cands[i].name;
        res.rows[i].sim = sim::dataset_similarity(cfg3, encoder.params, reference, cand_sets[i],
                                                  opt.n_pairs, rng::mix_seed(root, "row", i));
    });
    return res;
}

std::string SimilarityTableResult::tsv() const {
    std::string out = "candidate\tmean_cosine\tfid\tmean_ssim\tpairs\tused\tskipped\n";
    for (const auto& r : rows)
        out += r.name + "\t" + f17(r.sim.mean_cosine) + "\t" + f17(r.sim.fid) + "\t" +
               f17(r.sim.mean_ssim) + "\t" + std::to_string(r.sim.pairs) + "\t" +
               std::to_string(r.sim.used) + "\t" + std::to_string(r.sim.skipped) + "\n";
    return out;
}

std::string SimilarityTableResult::table() const {
    std::string out = "reference: " + reference + "\n" + pad("candidate", 20) + pad("cosine", 10) +
                      pad("fid", 12) + "ssim\n";
    for (const auto& r : rows) {
        char fidbuf[32];
        std::snprintf(fidbuf, sizeof fidbuf, "%.3f", r.sim.fid);
        out += pad(r.name, 20) + pad(f4(r.sim.mean_cosine), 10) + pad(fidbuf, 12) +
               f4(r.sim.mean_ssim) + "\n";
    }
    return out;
}

SteeringResult run_steering(const SteeringOptions& opt) {
    require_positive(opt.source_n, "source_n");
    require_positive(opt.target_n, "target_n");
    require_positive(opt.test_n, "test_n");
    require_positive(opt.seeds, "seeds");

    const auto cfg = make_cfg(3, opt.frame_h, opt.frame_w, opt.seq_len, net::Head::Regression);
    const auto src_spec = synth::domain_by_name(opt.source_domain, opt.frame_h, opt.frame_w);
    const auto dst_spec = synth::domain_by_name(opt.target_domain, opt.frame_h, opt.frame_w);
    const std::uint64_t root = opt.root_seed;

    const auto source_train = synth::generate_steering_dataset(src_spec, opt.source_n, opt.seq_len,
                                                               rng::mix_seed(root, "source-train"));
    const auto source_test = synth::generate_steering_dataset(src_spec, opt.test_n, opt.seq_len,
                                                              rng::mix_seed(root, "source-test"));
    const auto target_train = synth::generate_steering_dataset(dst_spec, opt.target_n, opt.seq_len,
                                                               rng::mix_seed(root, "target-train"));
    const auto target_test = synth::generate_steering_dataset(dst_spec, opt.test_n, opt.seq_len,
                                                              rng::mix_seed(root, "target-test"));

    std::vector<double> src_mae(opt.seeds, 0.0), scratch_mae(opt.seeds, 0.0), xfer_mae(opt.seeds, 0.0);

    parallel_seeds(opt.seeds, opt.threads, [&](int s) {
        const std::uint64_t trial = rng::mix_seed(root, "trial", static_cast<std::uint64_t>(s));
        train::TrainConfig tc1;
        tc1.epochs = opt.phase1_epochs;
        tc1.batch_size = opt.batch;
        tc1.lr = opt.lr;
        tc1.seed = trial;
        tc1.loss = train::LossKind::SquaredError;
        tc1.track_train_metric = false;
        auto phase1 = xfer::train_phase1(cfg, source_train, nullptr, tc1);
        src_mae[s] = train::evaluate(cfg, phase1.params, phase1.h0, source_test).metric;

        auto bundle = xfer::harvest_bundle(cfg, phase1.params, source_train, {true, true, true});
        train::TrainConfig tc2 = tc1;
        tc2.epochs = opt.phase2_epochs;
        tc2.salient_ratio = 0.0;
        auto scratch = xfer::train_phase1(cfg, target_train, nullptr, tc2);
        auto transferred = xfer::train_phase2(bundle, cfg, target_train, nullptr, tc2);
        scratch_mae[s] = train::evaluate(cfg, scratch.params, scratch.h0, target_test).metric;
        xfer_mae[s] = train::evaluate(cfg, transferred.params, transferred.h0, target_test).metric;
    });

    SteeringResult res;
    res.source_in_domain = summarize(src_mae);
    res.scratch_shifted = summarize(scratch_mae);
    res.transfer_shifted = summarize(xfer_mae);
    return res;
}

std::string SteeringResult::tsv() const {
    const int seeds = static_cast<int>(source_in_domain.per_seed.size());
    std::string out = "model\tmae_mean\tmae_std" + per_seed_header(seeds) + "\n";
    auto row = [&](const char* name, const SeedStats& st) {
        out += std::string(name) + "\t" + f17(st.mean) + "\t" + f17(st.stddev) +
               per_seed_cells(st.per_seed) + "\n";
    };
    row("source-in-domain", source_in_domain);
    row("scratch-shifted", scratch_shifted);
    row("transfer-shifted", transfer_shifted);
    return out;
}

std::string SteeringResult::table() const {
    std::string out = pad("model", 18) + "mae (degrees)\n";
    auto row = [&](const char* name, const SeedStats& st) {
        out += pad(name, 18) + f4(st.mean) + " +/- " + f4(st.stddev) + "\n";
    };
    row("source-in-domain", source_in_domain);
    row("scratch-shifted", scratch_shifted);
    row("transfer-shifted", transfer_shifted);
    return out;
}

ScenarioResult run_scenario(const ScenarioOptions& opt) {
    require_positive(opt.ref_n, "ref_n");
    require_positive(opt.probe_n, "probe_n");
    require_positive(opt.train_n, "train_n");
    require_positive(opt.epochs, "epochs");

    const auto cfg = make_cfg(3, opt.frame_h, opt.frame_w, opt.seq_len);
    const auto spec = synth::domain_by_name(opt.domain, opt.frame_h, opt.frame_w);
    const std::uint64_t root = opt.root_seed;

    const auto train_set = synth::generate_dataset(spec, opt.train_n, opt.collision_ratio,
                                                   opt.seq_len, rng::mix_seed(root, "train"));
    train::TrainConfig tc;
    tc.epochs = opt.epochs;
    tc.batch_size = opt.batch;
    tc.lr = opt.lr;
    tc.seed = rng::mix_seed(root, "model");
    tc.track_train_metric = false;
    auto model = xfer::train_phase1(cfg, train_set, nullptr, tc);

    // severity = final proximity band; the reference set is a mild approach
    const auto reference = synth::generate_approach_set(spec, opt.ref_n, opt.seq_len, 0.25, 0.35,
                                                        rng::mix_seed(root, "reference"));
    struct Level {
        const char* name;
        double lo, hi;
    };
    const Level levels[] = {
        {"uf 0.25-0.35", 0.25, 0.35},
        {"uf 0.40-0.55", 0.40, 0.55},
        {"uf 0.60-0.75", 0.60, 0.75},
        {"uf 0.80-0.95", 0.80, 0.95},
    };

    ScenarioResult res;
    for (std::size_t i = 0; i < std::size(levels); ++i) {
        auto probes = synth::generate_approach_set(spec, opt.probe_n, opt.seq_len, levels[i].lo,
                                                   levels[i].hi, rng::mix_seed(root, "probe", i));
        res.rows.push_back(sim::scenario_row(cfg, model.params, model.h0, levels[i].name, reference, probes));
    }
    return res;
}

std::string ScenarioResult::tsv() const {
    std::string out = "level\tmean_cosine\tsigma\tnorm_sigma\tmean_collision\tprobes\n";
    for (const auto& r : rows)
        out += r.name + "\t" + f17(r.mean_cosine) + "\t" + f17(r.sigma) + "\t" + f17(r.norm_sigma) +
               "\t" + f17(r.mean_collision) + "\t" + std::to_string(r.probes) + "\n";
    return out;
}

std::string ScenarioResult::table() const {
    std::string out = pad("level", 16) + pad("cosine", 10) + pad("sigma", 10) + pad("sigma/mean", 12) +
                      "collision conf\n";
    for (const auto& r : rows)
        out += pad(r.name, 16) + pad(f4(r.mean_cosine), 10) + pad(f4(r.sigma), 10) +
               pad(f4(r.norm_sigma), 12) + f4(r.mean_collision) + "\n";
    return out;
}

}  // namespace stdrive::expt
