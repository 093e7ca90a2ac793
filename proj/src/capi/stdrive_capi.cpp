#include "stdrive.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/dataset.hpp"
#include "core/experiment.hpp"
#include "core/salient.hpp"
#include "core/similarity.hpp"
#include "core/synthdata.hpp"
#include "core/trainer.hpp"
#include "core/transfer.hpp"
#include "core/version.hpp"

using namespace stdrive;

struct sd_dataset {
    data::Dataset ds;
};

struct sd_model {
    ckpt::Checkpoint c;
};

struct sd_bundle {
    ckpt::TransferBundle b;
};

namespace {

thread_local std::string g_error;

template <class F>
sd_status guarded(F&& f) {
    try {
        f();
        g_error.clear();
        return SD_OK;
    } catch (const std::invalid_argument& e) {
        g_error = e.what();
        return SD_ERR_USAGE;
    } catch (const std::exception& e) {
        g_error = e.what();
        return SD_ERR_RUNTIME;
    } catch (...) {
        g_error = "unknown error";
        return SD_ERR_RUNTIME;
    }
}

void require(const void* p, const char* what) {
    if (!p) throw std::invalid_argument(std::string(what) + " is null");
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

net::Head head_from(const char* s) {
    std::string h = s ? s : "";
    if (h == "classification") return net::Head::Classification;
    if (h == "regression") return net::Head::Regression;
    throw std::invalid_argument("head must be classification or regression, got '" + h + "'");
}

net::NetworkConfig config_for(const data::Dataset& ds, net::Head head) {
    net::NetworkConfig cfg;
    cfg.input_channels = 3;
    cfg.frame_height = ds.H;
    cfg.frame_width = ds.W;
    cfg.sequence_length = ds.T;
    cfg.head = head;
    net::validate_config(cfg);
    return cfg;
}

train::TrainConfig train_config(const sd_train_options* opt, net::Head head) {
    require(opt, "options");
    train::TrainConfig tc;
    tc.epochs = opt->epochs;
    tc.batch_size = opt->batch_size;
    tc.lr = opt->lr;
    tc.optimizer = opt->use_sgd ? train::Optimizer::Sgd : train::Optimizer::Adam;
    tc.seed = opt->seed;
    tc.salient_ratio = opt->salient_ratio;
    tc.loss = train::loss_for_head(head);
    tc.stop_at_train_accuracy = opt->stop_at_train_accuracy;
    tc.track_train_metric = true;
    tc.log_every = opt->log_every;
    return tc;
}

std::string history_tsv(const train::TrainingHistory& h) {
    std::string out = "epoch\tloss\ttrain_metric\tval_metric\n";
    char buf[128];
    for (const auto& e : h.epochs) {
        std::snprintf(buf, sizeof buf, "%d\t%.17g\t%.17g\t%.17g\n", e.epoch, e.loss,
                      e.train_metric, e.val_metric);
        out += buf;
    }
    return out;
}

void fill_warning(char* warning, size_t cap, const std::string& msg) {
    if (!warning || cap == 0) return;
    std::snprintf(warning, cap, "%s", msg.c_str());
}

// experiment options arrive as strings; each experiment declares its knobs
// as setters keyed by the snake_case field name
using Setter = std::function<void(const std::string&)>;
using OptionTable = std::map<std::string, Setter>;

int parse_int(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        int out = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw std::invalid_argument("option " + key + ": '" + v + "' is not an integer");
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        auto out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw std::invalid_argument("option " + key + ": '" + v + "' is not an unsigned integer");
    }
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw std::invalid_argument("option " + key + ": '" + v + "' is not a number");
    }
}

Setter set_int(int& field, const char* key) {
    return [&field, key](const std::string& v) { field = parse_int(v, key); };
}
Setter set_u64(std::uint64_t& field, const char* key) {
    return [&field, key](const std::string& v) { field = parse_u64(v, key); };
}
Setter set_double(double& field, const char* key) {
    return [&field, key](const std::string& v) { field = parse_double(v, key); };
}
Setter set_string(std::string& field) {
    return [&field](const std::string& v) { field = v; };
}

void apply_options(const std::string& name, OptionTable& table, const char* const* keys,
                   const char* const* values, size_t n) {
    if (n > 0 && (!keys || !values)) throw std::invalid_argument("option arrays are null");
    for (size_t i = 0; i < n; ++i) {
        if (!keys[i] || !values[i]) throw std::invalid_argument("option key or value is null");
        auto it = table.find(keys[i]);
        if (it == table.end()) {
            std::string known;
            for (const auto& [k, _] : table) known += (known.empty() ? "" : ", ") + k;
            throw std::invalid_argument("experiment " + name + ": unknown option '" + keys[i] +
                                        "' (known: " + known + ")");
        }
        it->second(values[i]);
    }
}

OptionTable ordering_table(expt::TransferOrderingOptions& o) {
    return {
        {"train_n", set_int(o.train_n, "train_n")},
        {"test_n", set_int(o.test_n, "test_n")},
        {"frame_h", set_int(o.frame_h, "frame_h")},
        {"frame_w", set_int(o.frame_w, "frame_w")},
        {"seq_len", set_int(o.seq_len, "seq_len")},
        {"phase1_epochs", set_int(o.phase1_epochs, "phase1_epochs")},
        {"phase2_epochs", set_int(o.phase2_epochs, "phase2_epochs")},
        {"phase2_batch", set_int(o.phase2_batch, "phase2_batch")},
        {"target_noise", set_double(o.target_noise, "target_noise")},
        {"target_jitter", set_double(o.target_jitter, "target_jitter")},
        {"batch", set_int(o.batch, "batch")},
        {"lr", set_double(o.lr, "lr")},
        {"salient_ratio", set_double(o.salient_ratio, "salient_ratio")},
        {"collision_ratio", set_double(o.collision_ratio, "collision_ratio")},
        {"seeds", set_int(o.seeds, "seeds")},
        {"root_seed", set_u64(o.root_seed, "root_seed")},
        {"source_domain", set_string(o.source_domain)},
        {"target_domain", set_string(o.target_domain)},
        {"threads", set_int(o.threads, "threads")},
    };
}

OptionTable convergence_table(expt::ConvergenceOptions& o) {
    return {
        {"train_n", set_int(o.train_n, "train_n")},
        {"frame_h", set_int(o.frame_h, "frame_h")},
        {"frame_w", set_int(o.frame_w, "frame_w")},
        {"seq_len", set_int(o.seq_len, "seq_len")},
        {"phase1_epochs", set_int(o.phase1_epochs, "phase1_epochs")},
        {"max_epochs", set_int(o.max_epochs, "max_epochs")},
        {"batch", set_int(o.batch, "batch")},
        {"lr", set_double(o.lr, "lr")},
        {"salient_ratio", set_double(o.salient_ratio, "salient_ratio")},
        {"collision_ratio", set_double(o.collision_ratio, "collision_ratio")},
        {"seeds", set_int(o.seeds, "seeds")},
        {"root_seed", set_u64(o.root_seed, "root_seed")},
        {"source_domain", set_string(o.source_domain)},
        {"target_domain", set_string(o.target_domain)},
        {"threads", set_int(o.threads, "threads")},
    };
}

OptionTable similarity_table_table(expt::SimilarityTableOptions& o) {
    return {
        {"ref_n", set_int(o.ref_n, "ref_n")},
        {"cand_n", set_int(o.cand_n, "cand_n")},
        {"n_pairs", set_int(o.n_pairs, "n_pairs")},
        {"frame_h", set_int(o.frame_h, "frame_h")},
        {"frame_w", set_int(o.frame_w, "frame_w")},
        {"seq_len", set_int(o.seq_len, "seq_len")},
        {"encoder_train_n", set_int(o.encoder_train_n, "encoder_train_n")},
        {"encoder_epochs", set_int(o.encoder_epochs, "encoder_epochs")},
        {"batch", set_int(o.batch, "batch")},
        {"lr", set_double(o.lr, "lr")},
        {"collision_ratio", set_double(o.collision_ratio, "collision_ratio")},
        {"root_seed", set_u64(o.root_seed, "root_seed")},
        {"reference_domain", set_string(o.reference_domain)},
        {"threads", set_int(o.threads, "threads")},
    };
}

OptionTable steering_table(expt::SteeringOptions& o) {
    return {
        {"source_n", set_int(o.source_n, "source_n")},
        {"target_n", set_int(o.target_n, "target_n")},
        {"test_n", set_int(o.test_n, "test_n")},
        {"frame_h", set_int(o.frame_h, "frame_h")},
        {"frame_w", set_int(o.frame_w, "frame_w")},
        {"seq_len", set_int(o.seq_len, "seq_len")},
        {"phase1_epochs", set_int(o.phase1_epochs, "phase1_epochs")},
        {"phase2_epochs", set_int(o.phase2_epochs, "phase2_epochs")},
        {"batch", set_int(o.batch, "batch")},
        {"lr", set_double(o.lr, "lr")},
        {"seeds", set_int(o.seeds, "seeds")},
        {"root_seed", set_u64(o.root_seed, "root_seed")},
        {"source_domain", set_string(o.source_domain)},
        {"target_domain", set_string(o.target_domain)},
        {"threads", set_int(o.threads, "threads")},
    };
}

OptionTable scenario_table(expt::ScenarioOptions& o) {
    return {
        {"ref_n", set_int(o.ref_n, "ref_n")},
        {"probe_n", set_int(o.probe_n, "probe_n")},
        {"train_n", set_int(o.train_n, "train_n")},
        {"epochs", set_int(o.epochs, "epochs")},
        {"batch", set_int(o.batch, "batch")},
        {"frame_h", set_int(o.frame_h, "frame_h")},
        {"frame_w", set_int(o.frame_w, "frame_w")},
        {"seq_len", set_int(o.seq_len, "seq_len")},
        {"lr", set_double(o.lr, "lr")},
        {"collision_ratio", set_double(o.collision_ratio, "collision_ratio")},
        {"root_seed", set_u64(o.root_seed, "root_seed")},
        {"domain", set_string(o.domain)},
    };
}

}  // namespace

extern "C" {

const char* sd_version(void) { return stdrive::version(); }

const char* sd_last_error(void) { return g_error.c_str(); }

sd_status sd_dataset_generate(const char* domain, const char* kind, int n,
                              double collision_ratio, double approach_lo, double approach_hi,
                              int height, int width, int seq_len, uint64_t seed,
                              sd_dataset** out) {
    return guarded([&] {
        require(out, "out");
        require(domain, "domain");
        std::string k = kind ? kind : "";
        auto spec = synth::domain_by_name(domain, height, width);
        data::Dataset ds;
        if (k == "classification")
            ds = synth::generate_dataset(spec, n, collision_ratio, seq_len, seed);
        else if (k == "steering")
            ds = synth::generate_steering_dataset(spec, n, seq_len, seed);
        else if (k == "approach")
            ds = synth::generate_approach_set(spec, n, seq_len, approach_lo, approach_hi, seed);
        else
            throw std::invalid_argument("kind must be classification, steering, or approach, got '" +
                                        k + "'");
        *out = new sd_dataset{std::move(ds)};
    });
}

sd_status sd_dataset_load(const char* path, sd_dataset** out) {
    return guarded([&] {
        require(out, "out");
        require(path, "path");
        *out = new sd_dataset{data::load_dataset(path)};
    });
}

sd_status sd_dataset_save(const sd_dataset* ds, const char* path) {
    return guarded([&] {
        require(ds, "dataset");
        require(path, "path");
        data::save_dataset(path, ds->ds);
    });
}

sd_status sd_dataset_info(const sd_dataset* ds, sd_dataset_stats* out) {
    return guarded([&] {
        require(ds, "dataset");
        require(out, "out");
        out->n = static_cast<int>(ds->ds.seqs.size());
        out->height = ds->ds.H;
        out->width = ds->ds.W;
        out->seq_len = ds->ds.T;
        out->steering = ds->ds.kind == data::DatasetKind::Steering ? 1 : 0;
        int maps = 0;
        for (const auto& s : ds->ds.seqs)
            if (!s.maps.empty()) ++maps;
        out->with_maps = maps;
    });
}

void sd_dataset_free(sd_dataset* ds) { delete ds; }

void sd_train_options_init(sd_train_options* opt) {
    if (!opt) return;
    opt->epochs = 10;
    opt->batch_size = 16;
    opt->lr = 1e-3;
    opt->seed = 1;
    opt->salient_ratio = 0.0;
    opt->use_sgd = 0;
    opt->stop_at_train_accuracy = 0.0;
    opt->log_every = 0;
}

sd_status sd_train_phase1(const sd_dataset* train_set, const sd_dataset* val_set,
                          const char* head, const sd_train_options* opt, sd_model** out,
                          char** history_tsv_out) {
    return guarded([&] {
        require(train_set, "training set");
        require(out, "out");
        auto h = head_from(head);
        auto cfg = config_for(train_set->ds, h);
        auto tc = train_config(opt, h);
        tc.salient_ratio = 0.0;
        auto r = xfer::train_phase1(cfg, train_set->ds, val_set ? &val_set->ds : nullptr, tc);
        *out = new sd_model{{cfg, std::move(r.params), std::move(r.h0)}};
        if (history_tsv_out) *history_tsv_out = copy_string(history_tsv(r.history));
    });
}

sd_status sd_model_load(const char* path, sd_model** out) {
    return guarded([&] {
        require(out, "out");
        require(path, "path");
        *out = new sd_model{ckpt::load_checkpoint(path)};
    });
}

sd_status sd_model_save(const sd_model* m, const char* path) {
    return guarded([&] {
        require(m, "model");
        require(path, "path");
        ckpt::save_checkpoint(path, m->c);
    });
}

sd_status sd_model_info(const sd_model* m, sd_model_stats* out) {
    return guarded([&] {
        require(m, "model");
        require(out, "out");
        out->input_channels = m->c.cfg.input_channels;
        out->height = m->c.cfg.frame_height;
        out->width = m->c.cfg.frame_width;
        out->seq_len = m->c.cfg.sequence_length;
        out->regression = m->c.cfg.head == net::Head::Regression ? 1 : 0;
        out->config_digest = ckpt::config_digest(m->c.cfg);
    });
}

void sd_model_free(sd_model* m) { delete m; }

sd_status sd_attach_salient_maps(const sd_model* m, sd_dataset* ds, double ratio,
                                 uint64_t seed, int* attached) {
    return guarded([&] {
        require(m, "model");
        require(ds, "dataset");
        if (m->c.cfg.input_channels != 3)
            throw std::invalid_argument("salient maps are generated by a 3-channel model");
        auto params = m->c.params;
        auto idx = sal::attach_salient_maps(m->c.cfg, params, ds->ds, ratio, seed, {});
        if (attached) *attached = static_cast<int>(idx.size());
    });
}

sd_status sd_harvest_bundle(const sd_model* m, const sd_dataset* source_set, sd_bundle** out) {
    return guarded([&] {
        require(m, "model");
        require(source_set, "source set");
        require(out, "out");
        auto params = m->c.params;
        *out = new sd_bundle{xfer::harvest_bundle(m->c.cfg, params, source_set->ds, {})};
    });
}

sd_status sd_bundle_load(const char* path, sd_bundle** out) {
    return guarded([&] {
        require(out, "out");
        require(path, "path");
        *out = new sd_bundle{ckpt::load_bundle(path)};
    });
}

sd_status sd_bundle_save(const sd_bundle* b, const char* path) {
    return guarded([&] {
        require(b, "bundle");
        require(path, "path");
        ckpt::save_bundle(path, b->b);
    });
}

sd_status sd_bundle_set_flags(sd_bundle* b, int transfer_cnn, int transfer_lstm,
                              int transfer_hidden) {
    return guarded([&] {
        require(b, "bundle");
        b->b.flags = {transfer_cnn != 0, transfer_lstm != 0, transfer_hidden != 0};
    });
}

void sd_bundle_free(sd_bundle* b) { delete b; }

sd_status sd_train_phase2(const sd_bundle* b, const sd_dataset* train_set,
                          const sd_dataset* val_set, int input_channels,
                          const sd_train_options* opt, sd_model** out, char** history_tsv_out,
                          char* warning, size_t warning_cap) {
    return guarded([&] {
        require(b, "bundle");
        require(train_set, "training set");
        require(out, "out");
        if (input_channels != 3 && input_channels != 6)
            throw std::invalid_argument("input_channels must be 3 or 6");
        auto cfg = b->b.source_cfg;
        cfg.input_channels = input_channels;
        auto tc = train_config(opt, cfg.head);
        std::string warn;
        auto r = xfer::train_phase2(b->b, cfg, train_set->ds, val_set ? &val_set->ds : nullptr,
                                    tc, &warn);
        fill_warning(warning, warning_cap, warn);
        *out = new sd_model{{cfg, std::move(r.params), std::move(r.h0)}};
        if (history_tsv_out) *history_tsv_out = copy_string(history_tsv(r.history));
    });
}

sd_status sd_evaluate(const sd_model* m, const sd_dataset* ds, sd_eval_result* out) {
    return guarded([&] {
        require(m, "model");
        require(ds, "dataset");
        require(out, "out");
        auto params = m->c.params;
        auto r = train::evaluate(m->c.cfg, params, m->c.h0, ds->ds);
        out->metric = r.metric;
        out->total = r.total;
        out->correct = r.correct;
        for (int t = 0; t < 2; ++t)
            for (int p = 0; p < 2; ++p) out->confusion[t][p] = r.confusion[t][p];
    });
}

sd_status sd_dataset_similarity(const sd_model* encoder, const sd_dataset* a,
                                const sd_dataset* b, int n_pairs, uint64_t seed,
                                sd_similarity* out) {
    return guarded([&] {
        require(encoder, "encoder");
        require(a, "dataset a");
        require(b, "dataset b");
        require(out, "out");
        auto params = encoder->c.params;
        auto r = sim::dataset_similarity(encoder->c.cfg, params, a->ds, b->ds, n_pairs, seed);
        out->mean_cosine = r.mean_cosine;
        out->mean_ssim = r.mean_ssim;
        out->fid = r.fid;
        out->pairs = r.pairs;
        out->used = r.used;
        out->skipped = r.skipped;
    });
}

sd_status sd_experiment_run(const char* name, const char* const* keys,
                            const char* const* values, size_t n_options, char** tsv_out,
                            char** table_out) {
    return guarded([&] {
        require(name, "name");
        std::string which = name;
        std::string tsv, table;
        if (which == "transfer-ordering") {
            expt::TransferOrderingOptions o;
            auto t = ordering_table(o);
            apply_options(which, t, keys, values, n_options);
            auto r = expt::run_transfer_ordering(o);
            tsv = r.tsv();
            table = r.table();
        } else if (which == "convergence") {
            expt::ConvergenceOptions o;
            auto t = convergence_table(o);
            apply_options(which, t, keys, values, n_options);
            auto r = expt::run_convergence(o);
            tsv = r.tsv();
            table = r.table();
        } else if (which == "similarity-table") {
            expt::SimilarityTableOptions o;
            auto t = similarity_table_table(o);
            apply_options(which, t, keys, values, n_options);
            auto r = expt::run_similarity_table(o);
            tsv = r.tsv();
            table = r.table();
        } else if (which == "steering") {
            expt::SteeringOptions o;
            auto t = steering_table(o);
            apply_options(which, t, keys, values, n_options);
            auto r = expt::run_steering(o);
            tsv = r.tsv();
            table = r.table();
        } else if (which == "scenario") {
            expt::ScenarioOptions o;
            auto t = scenario_table(o);
            apply_options(which, t, keys, values, n_options);
            auto r = expt::run_scenario(o);
            tsv = r.tsv();
            table = r.table();
        } else {
            throw std::invalid_argument(
                "unknown experiment '" + which +
                "' (known: transfer-ordering, convergence, similarity-table, steering, scenario)");
        }
        if (tsv_out) *tsv_out = copy_string(tsv);
        if (table_out) *table_out = copy_string(table);
    });
}

void sd_string_free(char* s) { std::free(s); }

}  // extern "C"
