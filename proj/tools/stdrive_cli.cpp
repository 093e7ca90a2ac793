// Command-line front end. Links only the C API so the shared library stays
// the single supported integration surface.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stdrive.h"

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(sd_status st) {
    if (st == SD_OK) return;
    std::string msg = sd_last_error();
    if (st == SD_ERR_USAGE) throw UsageError(msg);
    throw std::runtime_error(msg);
}

using DatasetPtr = std::unique_ptr<sd_dataset, decltype(&sd_dataset_free)>;
using ModelPtr = std::unique_ptr<sd_model, decltype(&sd_model_free)>;
using BundlePtr = std::unique_ptr<sd_bundle, decltype(&sd_bundle_free)>;

DatasetPtr load_dataset(const std::string& path) {
    sd_dataset* p = nullptr;
    check(sd_dataset_load(path.c_str(), &p));
    return {p, &sd_dataset_free};
}

ModelPtr load_model(const std::string& path) {
    sd_model* p = nullptr;
    check(sd_model_load(path.c_str(), &p));
    return {p, &sd_model_free};
}

BundlePtr load_bundle(const std::string& path) {
    sd_bundle* p = nullptr;
    check(sd_bundle_load(path.c_str(), &p));
    return {p, &sd_bundle_free};
}

int to_int(const std::string& v, const std::string& name) {
    try {
        size_t pos = 0;
        int out = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw UsageError("--" + name + ": '" + v + "' is not an integer");
    }
}

uint64_t to_u64(const std::string& v, const std::string& name) {
    try {
        size_t pos = 0;
        auto out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw UsageError("--" + name + ": '" + v + "' is not an unsigned integer");
    }
}

double to_double(const std::string& v, const std::string& name) {
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw UsageError("--" + name + ": '" + v + "' is not a number");
    }
}

// Every option resolves as: command line, else STDRIVE_<NAME> environment
// variable, else the --config key=value file, else the built-in default.
struct Layered {
    CLI::App* cmd;
    std::string config_path;
    std::vector<std::pair<std::string, std::string*>> values;  // snake_case name -> storage
    std::vector<std::pair<std::string, bool*>> flags;
    std::vector<std::string> required;

    explicit Layered(CLI::App* c) : cmd(c) {
        cmd->add_option("--config", config_path,
                        "key=value file supplying defaults for any option of this command");
    }

    static std::string dashed(const std::string& snake) {
        std::string d = snake;
        for (auto& ch : d)
            if (ch == '_') ch = '-';
        return d;
    }

    static std::string env_name(const std::string& snake) {
        std::string e = "STDRIVE_";
        for (char ch : snake) e += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        return e;
    }

    void value(const std::string& snake, std::string& var, const std::string& desc,
               bool must_have = false) {
        cmd->add_option("--" + dashed(snake), var, desc);
        values.emplace_back(snake, &var);
        if (must_have) required.push_back(snake);
    }

    void flag(const std::string& snake, bool& var, const std::string& desc) {
        cmd->add_flag("--" + dashed(snake), var, desc);
        flags.emplace_back(snake, &var);
    }

    static bool flag_value(const std::string& v, const std::string& key) {
        if (v == "1" || v == "true") return true;
        if (v == "0" || v == "false") return false;
        throw UsageError("option " + key + ": '" + v + "' is not a boolean (use 1/0/true/false)");
    }

    void resolve() {
        std::map<std::string, std::string> file;
        if (!config_path.empty()) {
            std::set<std::string> known;
            for (const auto& [k, _] : values) known.insert(k);
            for (const auto& [k, _] : flags) known.insert(k);
            std::ifstream in(config_path);
            if (!in) throw std::runtime_error("cannot open config file " + config_path);
            std::string line;
            int lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                const auto first = line.find_first_not_of(" \t\r");
                if (first == std::string::npos || line[first] == '#') continue;
                const auto eq = line.find('=');
                if (eq == std::string::npos)
                    throw UsageError(config_path + ":" + std::to_string(lineno) +
                                     ": expected key=value");
                std::string key = line.substr(first, eq - first);
                while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
                std::string val = line.substr(eq + 1);
                while (!val.empty() && (val.back() == '\r' || val.back() == ' ')) val.pop_back();
                const auto vstart = val.find_first_not_of(" \t");
                val = vstart == std::string::npos ? "" : val.substr(vstart);
                if (!known.count(key))
                    throw UsageError(config_path + ":" + std::to_string(lineno) +
                                     ": unknown option '" + key + "'");
                if (file.count(key))
                    throw UsageError(config_path + ":" + std::to_string(lineno) +
                                     ": duplicate option '" + key + "'");
                file[key] = val;
            }
        }
        for (const auto& [name, var] : values) {
            if (cmd->count("--" + dashed(name)) > 0) continue;
            if (const char* env = std::getenv(env_name(name).c_str()))
                *var = env;
            else if (auto it = file.find(name); it != file.end())
                *var = it->second;
        }
        for (const auto& [name, var] : flags) {
            if (cmd->count("--" + dashed(name)) > 0) continue;
            if (const char* env = std::getenv(env_name(name).c_str()))
                *var = flag_value(env, name);
            else if (auto it = file.find(name); it != file.end())
                *var = flag_value(it->second, name);
        }
        for (const auto& name : required) {
            for (const auto& [k, var] : values)
                if (k == name && var->empty())
                    throw UsageError("missing required option --" + dashed(name));
        }
    }

    std::vector<std::pair<std::string, std::string>> snapshot() const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [name, var] : values) out.emplace_back(name, *var);
        for (const auto& [name, var] : flags) out.emplace_back(name, *var ? "1" : "0");
        return out;
    }
};

std::string timestamp() {
    char buf[32];
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// the manifest is the one artifact allowed to carry a timestamp
void write_manifest(const std::string& path, const std::string& command, const Layered& opts,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest " + path);
    out << "tool_version=" << sd_version() << "\n";
    out << "command=" << command << "\n";
    out << "created=" << timestamp() << "\n";
    for (const auto& [k, v] : extra) out << k << "=" << v << "\n";
    for (const auto& [k, v] : opts.snapshot()) out << "option." << k << "=" << v << "\n";
}

std::string digest_hex(uint64_t d) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
    return buf;
}

sd_train_options train_options(const std::string& epochs, const std::string& batch,
                               const std::string& lr, const std::string& seed, bool sgd,
                               const std::string& log_every) {
    sd_train_options o;
    sd_train_options_init(&o);
    o.epochs = to_int(epochs, "epochs");
    o.batch_size = to_int(batch, "batch");
    o.lr = to_double(lr, "lr");
    o.seed = to_u64(seed, "seed");
    o.use_sgd = sgd ? 1 : 0;
    o.log_every = to_int(log_every, "log-every");
    return o;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void print_history(const char* tsv) {
    if (!tsv) return;
    std::fputs(tsv, stdout);
}

std::string final_metric_line(const char* history_tsv) {
    std::string all = history_tsv ? history_tsv : "";
    while (!all.empty() && all.back() == '\n') all.pop_back();
    const auto last = all.find_last_of('\n');
    std::string row = last == std::string::npos ? all : all.substr(last + 1);
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
        const auto tab = row.find('\t', start);
        cols.push_back(row.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    if (cols.size() < 4) return row;
    std::string out = "epoch " + cols[0] + "  loss " + cols[1] + "  train_metric " + cols[2];
    if (cols[3] != "-1") out += "  val_metric " + cols[3];
    return out;
}

// ---- subcommands -------------------------------------------------------

struct GenDataCmd {
    CLI::App* cmd;
    Layered opts;
    std::string out, domain = "townA", kind = "classification", n = "200";
    std::string collision_ratio = "0.5", approach_lo = "0.3", approach_hi = "0.5";
    std::string height = "48", width = "64", seq_len = "15", seed = "1", manifest;

    explicit GenDataCmd(CLI::App& app)
        : cmd(app.add_subcommand("gen-data", "generate a synthetic driving dataset")),
          opts(cmd) {
        opts.value("out", out, "output dataset file", true);
        opts.value("domain", domain, "townA | townB | townC | noise");
        opts.value("kind", kind, "classification | steering | approach");
        opts.value("n", n, "number of sequences");
        opts.value("collision_ratio", collision_ratio, "collision fraction (classification)");
        opts.value("approach_lo", approach_lo, "final proximity band low end (approach)");
        opts.value("approach_hi", approach_hi, "final proximity band high end (approach)");
        opts.value("height", height, "frame height");
        opts.value("width", width, "frame width");
        opts.value("seq_len", seq_len, "frames per sequence");
        opts.value("seed", seed, "generation seed");
        opts.value("manifest", manifest, "manifest path (default <out>.manifest)");
    }

    int run() {
        opts.resolve();
        sd_dataset* ds = nullptr;
        check(sd_dataset_generate(domain.c_str(), kind.c_str(), to_int(n, "n"),
                                  to_double(collision_ratio, "collision-ratio"),
                                  to_double(approach_lo, "approach-lo"),
                                  to_double(approach_hi, "approach-hi"), to_int(height, "height"),
                                  to_int(width, "width"), to_int(seq_len, "seq-len"),
                                  to_u64(seed, "seed"), &ds));
        DatasetPtr guard(ds, &sd_dataset_free);
        check(sd_dataset_save(ds, out.c_str()));
        write_manifest(manifest.empty() ? out + ".manifest" : manifest, "gen-data", opts, {});
        std::printf("wrote %s (%s sequences)\n", out.c_str(), n.c_str());
        return 0;
    }
};

struct TrainPhase1Cmd {
    CLI::App* cmd;
    Layered opts;
    std::string data, val, out, bundle_out, head = "classification";
    std::string epochs = "10", batch = "16", lr = "1e-3", seed = "1", log_every = "1";
    std::string history, manifest;
    bool sgd = false;

    explicit TrainPhase1Cmd(CLI::App& app)
        : cmd(app.add_subcommand("train-phase1", "train a model from scratch on a source dataset")),
          opts(cmd) {
        opts.value("data", data, "training dataset file", true);
        opts.value("out", out, "output checkpoint file", true);
        opts.value("val", val, "validation dataset file");
        opts.value("bundle_out", bundle_out, "also harvest a transfer bundle to this path");
        opts.value("head", head, "classification | regression");
        opts.value("epochs", epochs, "training epochs");
        opts.value("batch", batch, "minibatch size");
        opts.value("lr", lr, "learning rate");
        opts.value("seed", seed, "training seed");
        opts.value("log_every", log_every, "progress line every k epochs (0 = quiet)");
        opts.value("history", history, "write the per-epoch history TSV here");
        opts.value("manifest", manifest, "manifest path (default <out>.manifest)");
        opts.flag("sgd", sgd, "plain SGD instead of adam");
    }

    int run() {
        opts.resolve();
        auto train_set = load_dataset(data);
        DatasetPtr val_set(nullptr, &sd_dataset_free);
        if (!val.empty()) val_set = load_dataset(val);
        auto o = train_options(epochs, batch, lr, seed, sgd, log_every);
        sd_model* m = nullptr;
        char* hist = nullptr;
        check(sd_train_phase1(train_set.get(), val_set.get(), head.c_str(), &o, &m, &hist));
        ModelPtr model(m, &sd_model_free);
        std::unique_ptr<char, decltype(&sd_string_free)> hist_guard(hist, &sd_string_free);
        check(sd_model_save(m, out.c_str()));
        if (!history.empty()) write_text(history, hist);
        if (!bundle_out.empty()) {
            sd_bundle* b = nullptr;
            check(sd_harvest_bundle(m, train_set.get(), &b));
            BundlePtr bundle(b, &sd_bundle_free);
            check(sd_bundle_save(b, bundle_out.c_str()));
        }
        sd_model_stats info{};
        check(sd_model_info(m, &info));
        write_manifest(manifest.empty() ? out + ".manifest" : manifest, "train-phase1", opts,
                       {{"config_digest", digest_hex(info.config_digest)}});
        std::printf("final: %s\n", final_metric_line(hist).c_str());
        std::printf("wrote %s\n", out.c_str());
        if (!bundle_out.empty()) std::printf("wrote %s\n", bundle_out.c_str());
        return 0;
    }
};

struct GenSalientCmd {
    CLI::App* cmd;
    Layered opts;
    std::string model, data, out, ratio = "0.1", seed = "1", manifest;

    explicit GenSalientCmd(CLI::App& app)
        : cmd(app.add_subcommand("gen-salient",
                                 "attach saliency/gradcam/edge maps to part of a dataset")),
          opts(cmd) {
        opts.value("model", model, "phase-1 checkpoint that scores the frames", true);
        opts.value("data", data, "input dataset file", true);
        opts.value("out", out, "output dataset file", true);
        opts.value("ratio", ratio, "fraction of sequences to cover");
        opts.value("seed", seed, "selection seed");
        opts.value("manifest", manifest, "manifest path (default <out>.manifest)");
    }

    int run() {
        opts.resolve();
        auto m = load_model(model);
        auto ds = load_dataset(data);
        int attached = 0;
        check(sd_attach_salient_maps(m.get(), ds.get(), to_double(ratio, "ratio"),
                                     to_u64(seed, "seed"), &attached));
        check(sd_dataset_save(ds.get(), out.c_str()));
        sd_dataset_stats info{};
        check(sd_dataset_info(ds.get(), &info));
        sd_model_stats minfo{};
        check(sd_model_info(m.get(), &minfo));
        write_manifest(manifest.empty() ? out + ".manifest" : manifest, "gen-salient", opts,
                       {{"config_digest", digest_hex(minfo.config_digest)}});
        std::printf("attached maps to %d of %d sequences\n", attached, info.n);
        std::printf("wrote %s\n", out.c_str());
        return 0;
    }
};

struct TrainPhase2Cmd {
    CLI::App* cmd;
    Layered opts;
    std::string bundle, data, val, out, channels = "6";
    std::string epochs = "10", batch = "16", lr = "1e-3", seed = "1", log_every = "1";
    std::string salient_ratio = "0.1", history, manifest;
    bool sgd = false, no_cnn = false, no_lstm = false, no_hidden = false;

    explicit TrainPhase2Cmd(CLI::App& app)
        : cmd(app.add_subcommand("train-phase2",
                                 "train on a target dataset starting from a transfer bundle")),
          opts(cmd) {
        opts.value("bundle", bundle, "transfer bundle from train-phase1", true);
        opts.value("data", data, "target training dataset file", true);
        opts.value("out", out, "output checkpoint file", true);
        opts.value("val", val, "validation dataset file");
        opts.value("channels", channels, "3, or 6 to consume salient map planes");
        opts.value("epochs", epochs, "training epochs");
        opts.value("batch", batch, "minibatch size");
        opts.value("lr", lr, "learning rate");
        opts.value("seed", seed, "training seed");
        opts.value("salient_ratio", salient_ratio, "expected salient map coverage of the data");
        opts.value("log_every", log_every, "progress line every k epochs (0 = quiet)");
        opts.value("history", history, "write the per-epoch history TSV here");
        opts.value("manifest", manifest, "manifest path (default <out>.manifest)");
        opts.flag("sgd", sgd, "plain SGD instead of adam");
        opts.flag("no_cnn_transfer", no_cnn, "retrain conv/inception/bridge weights from scratch");
        opts.flag("no_lstm_transfer", no_lstm,
                  "retrain the lstm stack from scratch (drops hidden-state transfer too)");
        opts.flag("no_hidden_transfer", no_hidden, "skip the harvested hidden-state initialization");
    }

    int run() {
        opts.resolve();
        auto b = load_bundle(bundle);
        check(sd_bundle_set_flags(b.get(), no_cnn ? 0 : 1, no_lstm ? 0 : 1,
                                  (no_lstm || no_hidden) ? 0 : 1));
        auto train_set = load_dataset(data);
        DatasetPtr val_set(nullptr, &sd_dataset_free);
        if (!val.empty()) val_set = load_dataset(val);
        auto o = train_options(epochs, batch, lr, seed, sgd, log_every);
        o.salient_ratio = to_double(salient_ratio, "salient-ratio");
        sd_model* m = nullptr;
        char* hist = nullptr;
        char warning[256] = {0};
        check(sd_train_phase2(b.get(), train_set.get(), val_set.get(), to_int(channels, "channels"),
                              &o, &m, &hist, warning, sizeof warning));
        ModelPtr model(m, &sd_model_free);
        std::unique_ptr<char, decltype(&sd_string_free)> hist_guard(hist, &sd_string_free);
        if (warning[0]) std::fprintf(stderr, "warning: %s\n", warning);
        check(sd_model_save(m, out.c_str()));
        if (!history.empty()) write_text(history, hist);
        sd_model_stats info{};
        check(sd_model_info(m, &info));
        write_manifest(manifest.empty() ? out + ".manifest" : manifest, "train-phase2", opts,
                       {{"config_digest", digest_hex(info.config_digest)}});
        std::printf("final: %s\n", final_metric_line(hist).c_str());
        std::printf("wrote %s\n", out.c_str());
        return 0;
    }
};

struct EvalCmd {
    CLI::App* cmd;
    Layered opts;
    std::string model, data, manifest;

    explicit EvalCmd(CLI::App& app)
        : cmd(app.add_subcommand("eval", "evaluate a checkpoint on a dataset")), opts(cmd) {
        opts.value("model", model, "checkpoint file", true);
        opts.value("data", data, "dataset file", true);
        opts.value("manifest", manifest, "manifest path (none by default)");
    }

    int run() {
        opts.resolve();
        auto m = load_model(model);
        auto ds = load_dataset(data);
        sd_eval_result r{};
        check(sd_evaluate(m.get(), ds.get(), &r));
        sd_model_stats info{};
        check(sd_model_info(m.get(), &info));
        if (info.regression) {
            std::printf("mae_degrees %.6f over %d sequences\n", r.metric, r.total);
        } else {
            std::printf("accuracy %.6f (%d/%d)\n", r.metric, r.correct, r.total);
            const char* names[2] = {"safe", "collision"};
            for (int t = 0; t < 2; ++t)
                for (int p = 0; p < 2; ++p)
                    std::printf("confusion truth=%s pred=%s %d\n", names[t], names[p],
                                r.confusion[t][p]);
        }
        write_manifest(manifest, "eval", opts,
                       {{"config_digest", digest_hex(info.config_digest)}});
        return 0;
    }
};

struct SimilarityCmd {
    CLI::App* cmd;
    Layered opts;
    std::string model, ref, cand, pairs = "500", seed = "1", manifest;

    explicit SimilarityCmd(CLI::App& app)
        : cmd(app.add_subcommand("similarity", "compare two datasets through a model's features")),
          opts(cmd) {
        opts.value("model", model, "encoder checkpoint file", true);
        opts.value("ref", ref, "reference dataset file", true);
        opts.value("cand", cand, "candidate dataset file", true);
        opts.value("pairs", pairs, "number of sampled frame pairs");
        opts.value("seed", seed, "pair-sampling seed");
        opts.value("manifest", manifest, "manifest path (none by default)");
    }

    int run() {
        opts.resolve();
        auto m = load_model(model);
        auto a = load_dataset(ref);
        auto b = load_dataset(cand);
        sd_similarity r{};
        check(sd_dataset_similarity(m.get(), a.get(), b.get(), to_int(pairs, "pairs"),
                                    to_u64(seed, "seed"), &r));
        std::printf("pairs %d used %d skipped %d\n", r.pairs, r.used, r.skipped);
        std::printf("mean_cosine %.6f\n", r.mean_cosine);
        std::printf("mean_ssim %.6f\n", r.mean_ssim);
        std::printf("fid %.6f\n", r.fid);
        sd_model_stats info{};
        check(sd_model_info(m.get(), &info));
        write_manifest(manifest, "similarity", opts,
                       {{"config_digest", digest_hex(info.config_digest)}});
        return 0;
    }
};

struct ExperimentCmd {
    CLI::App* cmd;
    Layered opts;
    std::string name, out_dir = "reports", root_seed = "1", threads = "0";
    std::vector<std::string> sets;

    explicit ExperimentCmd(CLI::App& app)
        : cmd(app.add_subcommand(
              "experiment", "run a named multi-seed study and write tsv + table reports")),
          opts(cmd) {
        cmd->add_option("name", name,
                        "transfer-ordering | convergence | similarity-table | steering | scenario")
            ->required();
        opts.value("out_dir", out_dir, "report directory");
        opts.value("root_seed", root_seed, "root seed for every dataset and trial");
        opts.value("threads", threads, "worker threads (0 = all cores)");
        cmd->add_option("--set", sets, "experiment knob as key=value (repeatable)");
    }

    int run() {
        opts.resolve();
        std::vector<std::string> keys{"root_seed"};
        std::vector<std::string> vals{root_seed};
        if (name != "scenario") {
            keys.push_back("threads");
            vals.push_back(threads);
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0)
                throw UsageError("--set expects key=value, got '" + s + "'");
            keys.push_back(s.substr(0, eq));
            vals.push_back(s.substr(eq + 1));
        }
        std::vector<const char*> kp, vp;
        for (const auto& k : keys) kp.push_back(k.c_str());
        for (const auto& v : vals) vp.push_back(v.c_str());

        char* tsv = nullptr;
        char* table = nullptr;
        check(sd_experiment_run(name.c_str(), kp.data(), vp.data(), kp.size(), &tsv, &table));
        std::unique_ptr<char, decltype(&sd_string_free)> tg(tsv, &sd_string_free);
        std::unique_ptr<char, decltype(&sd_string_free)> bg(table, &sd_string_free);

        std::filesystem::create_directories(out_dir);
        const std::string base = out_dir + "/" + name;
        write_text(base + ".tsv", tsv);
        write_text(base + ".txt", table);
        std::vector<std::pair<std::string, std::string>> extra{{"experiment", name}};
        for (size_t i = 0; i < keys.size(); ++i) extra.emplace_back("knob." + keys[i], vals[i]);
        write_manifest(base + ".manifest", "experiment", opts, extra);
        std::fputs(table, stdout);
        std::printf("wrote %s.tsv and %s.txt\n", base.c_str(), base.c_str());
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-phase transfer learning toolkit for synthetic driving sequences"};
    app.set_version_flag("--version", std::string(sd_version()));
    app.require_subcommand(1);

    GenDataCmd gen_data(app);
    TrainPhase1Cmd train_phase1(app);
    GenSalientCmd gen_salient(app);
    TrainPhase2Cmd train_phase2(app);
    EvalCmd eval_cmd(app);
    SimilarityCmd similarity(app);
    ExperimentCmd experiment(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen_data.cmd->parsed()) return gen_data.run();
        if (train_phase1.cmd->parsed()) return train_phase1.run();
        if (gen_salient.cmd->parsed()) return gen_salient.run();
        if (train_phase2.cmd->parsed()) return train_phase2.run();
        if (eval_cmd.cmd->parsed()) return eval_cmd.run();
        if (similarity.cmd->parsed()) return similarity.run();
        if (experiment.cmd->parsed()) return experiment.run();
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
