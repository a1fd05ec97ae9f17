#include "bat/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "bat/adam.hpp"
#include "bat/checkpoint.hpp"

namespace bat {

void ExperimentConfig::validate() const {
    model.validate();
    data.validate(model.max_seq_len);
    if (batch_size < 1) throw config_error("ExperimentConfig: batch size must be >= 1");
    if (epochs < 1) throw config_error("ExperimentConfig: epochs must be >= 1");
    if (eval_split < 0.0 || eval_split >= 1.0)
        throw config_error("ExperimentConfig: eval split must lie in [0,1)");
    if (static_cast<int>(data.ratio.size()) != model.n_classes)
        throw config_error("ExperimentConfig: data ratio classes != model n_classes");
}

namespace {

using nlohmann::json;

template <typename T>
T field(const json& j, const char* name, T fallback) {
    if (!j.contains(name)) return fallback;
    return j.at(name).get<T>();
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config: invalid JSON: ") + e.what());
    }
    ExperimentConfig c;
    if (j.contains("model")) {
        const auto& m = j.at("model");
        const std::string arch = field<std::string>(m, "arch", "bat");
        if (arch == "bat")
            c.model.arch = Arch::bat;
        else if (arch == "transformer")
            c.model.arch = Arch::transformer;
        else
            throw config_error("config: unknown arch \"" + arch + "\"");
        c.model.n_layers = field(m, "n_layers", c.model.n_layers);
        c.model.d_model = field(m, "d_model", c.model.d_model);
        c.model.d_ff = field(m, "d_ff", c.model.d_ff);
        c.model.heads = field(m, "heads", c.model.heads);
        c.model.d_k = field(m, "d_k", c.model.d_model / c.model.heads);
        c.model.d_v = field(m, "d_v", c.model.d_k);
        c.model.pre_ln = field(m, "pre_ln", c.model.pre_ln);
        c.model.vocab_size = field(m, "vocab_size", c.model.vocab_size);
        c.model.n_classes = field(m, "n_classes", c.model.n_classes);
        c.model.max_seq_len = field(m, "max_seq_len", c.model.max_seq_len);
    }
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        c.loss_family = family_from_name(field<std::string>(l, "family", "CE"));
        c.loss_gamma = field(l, "gamma", 0.0);
        c.loss_lambda = field(l, "lambda", 1.0);
        c.weight_scheme = weight_kind_from_name(field<std::string>(l, "weight_scheme", "none"));
        const std::string base = field<std::string>(l, "log_base", "natural");
        if (base == "natural")
            c.log_base = LogBase::natural;
        else if (base == "base10")
            c.log_base = LogBase::base10;
        else
            throw config_error("config: unknown log_base \"" + base + "\"");
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        if (s.contains("name")) {
            c.schedule = named_variant(s.at("name").get<std::string>());
        } else {
            c.schedule.alpha = field(s, "alpha", 0.5);
            c.schedule.beta = s.contains("beta") ? s.at("beta").get<double>()
                                                 : solve_beta(c.schedule.alpha);
            c.schedule.lambda = field(s, "lambda", 1.0);
            c.schedule.warmup = field<long>(s, "warmup", 4000);
        }
    }
    c.schedule.d_model = c.model.d_model;
    if (j.contains("data")) {
        const auto& d = j.at("data");
        c.data.ratio = field(d, "ratio", c.data.ratio);
        c.data.vocab_size = field(d, "vocab_size", c.model.vocab_size);
        c.data.overlap = field(d, "overlap", c.data.overlap);
        c.data.mean_len = field(d, "mean_len", c.data.mean_len);
        c.data.max_len = field(d, "max_len", c.data.max_len);
        c.data.n_sequences = field(d, "n_sequences", c.data.n_sequences);
        c.data.noise = field(d, "noise", c.data.noise);
        c.data.seed = field(d, "seed", c.data.seed);
    }
    c.batch_size = field(j, "batch", c.batch_size);
    c.epochs = field(j, "epochs", c.epochs);
    c.eval_split = field(j, "eval_split", c.eval_split);
    c.seed = field(j, "seed", c.seed);
    c.outdir = field<std::string>(j, "outdir", c.outdir);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_json(ss.str());
}

LossSpec build_loss_spec(const ExperimentConfig& config, const DatasetStats& stats) {
    LossSpec spec;
    spec.family = config.loss_family;
    spec.gamma = config.loss_gamma;
    spec.lambda = config.loss_lambda;
    spec.log_base = config.log_base;
    spec.weights = make_weights(config.weight_scheme, stats);
    spec.validate();
    return spec;
}

std::string metrics_csv_header(int n_classes) {
    std::ostringstream os;
    os << "epoch,split,loss,micro_f1,macro_f1,macro_f2";
    for (int c = 0; c < n_classes; ++c) os << ",pred_count_" << c;
    os << ",lrate";
    return os.str();
}

std::string metrics_csv_row(int epoch, const std::string& split, double loss,
                            const MetricsReport& rep, double lrate) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << epoch << ',' << split << ',' << loss << ',' << rep.micro_f1 << ',' << rep.macro_f1 << ','
       << rep.macro_f2;
    for (long c : rep.predicted_counts) os << ',' << c;
    os << ',' << lrate;
    return os.str();
}

namespace {

struct PaddedBatch {
    std::vector<std::vector<int>> tokens;
    std::vector<std::vector<int>> labels;
    std::vector<std::vector<bool>> mask;
    long n_real_tokens = 0;
};

PaddedBatch pad_batch(const Dataset& ds, const std::vector<std::size_t>& idx, std::size_t begin,
                      std::size_t end) {
    std::size_t max_len = 0;
    for (std::size_t k = begin; k < end; ++k)
        max_len = std::max(max_len, ds.sequences[idx[k]].tokens.size());
    PaddedBatch b;
    for (std::size_t k = begin; k < end; ++k) {
        const Sequence& s = ds.sequences[idx[k]];
        std::vector<int> toks = s.tokens, labs = s.labels;
        std::vector<bool> m(s.tokens.size(), true);
        toks.resize(max_len, 0);  // id 0 reserved as padding
        labs.resize(max_len, 0);
        m.resize(max_len, false);
        b.n_real_tokens += static_cast<long>(s.tokens.size());
        b.tokens.push_back(std::move(toks));
        b.labels.push_back(std::move(labs));
        b.mask.push_back(std::move(m));
    }
    return b;
}

}  // namespace

EvalResult evaluate(const Model& model, const LossSpec& spec, const Dataset& split,
                    int /*batch_size*/) {
    std::vector<int> all_labels, all_preds;
    std::vector<bool> all_mask;
    double loss_sum = 0.0;
    long tokens = 0;
    for (const Sequence& s : split.sequences) {
        Tape tape;
        auto probs = model.forward(tape, s.tokens);
        tape.clear();
        LossBatch batch;
        batch.n_tokens = static_cast<int>(s.tokens.size());
        batch.n_classes = split.n_classes;
        batch.labels.assign(static_cast<std::size_t>(batch.n_tokens) * batch.n_classes, 0.0);
        for (int i = 0; i < batch.n_tokens; ++i)
            batch.labels[static_cast<std::size_t>(i) * batch.n_classes +
                         s.labels[static_cast<std::size_t>(i)]] = 1.0;
        batch.probs = probs->data;
        batch.mask.assign(static_cast<std::size_t>(batch.n_tokens), true);
        loss_sum += loss_value(spec, batch) * static_cast<double>(batch.n_tokens);
        tokens += batch.n_tokens;
        for (int i = 0; i < batch.n_tokens; ++i) {
            all_labels.push_back(s.labels[static_cast<std::size_t>(i)]);
            all_preds.push_back(batch.argmax_class(i));
            all_mask.push_back(true);
        }
    }
    EvalResult r;
    r.loss = tokens > 0 ? loss_sum / static_cast<double>(tokens) : 0.0;
    r.metrics = report(confusion(all_labels, all_preds, all_mask, split.n_classes));
    return r;
}

RunRecord train(const ExperimentConfig& config) {
    config.validate();
    return train(config, generate_dataset(config.data));
}

RunRecord train(const ExperimentConfig& config, const Dataset& dataset) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    namespace fs = std::filesystem;
    fs::create_directories(config.outdir);

    Dataset train_split, eval_split;
    split_dataset(dataset, config.eval_split, config.seed, train_split, eval_split);
    if (train_split.sequences.empty()) throw config_error("train: empty training split");
    const DatasetStats stats = train_split.stats();
    const LossSpec spec = build_loss_spec(config, stats);

    Model model(config.model, config.seed);
    Adam adam(model.parameters());

    const std::string csv_path = config.outdir + "/metrics.csv";
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("train: cannot open " + csv_path);
    csv << metrics_csv_header(config.model.n_classes) << '\n';

    RunRecord record;
    record.metrics_csv_path = csv_path;
    std::vector<std::size_t> order(train_split.sequences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::mt19937_64 epoch_rng(config.seed * 1000003ULL + static_cast<unsigned long long>(epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(epoch_rng() % i)]);

        double epoch_loss = 0.0;
        long epoch_tokens = 0;
        double lrate = 0.0;
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(begin + static_cast<std::size_t>(config.batch_size), order.size());
            const PaddedBatch batch = pad_batch(train_split, order, begin, end);

            Tape tape;
            TensorPtr total;
            for (std::size_t s = 0; s < batch.tokens.size(); ++s) {
                auto probs = model.forward(tape, batch.tokens[s], batch.mask[s]);
                auto part = classification_loss(tape, spec, probs, batch.labels[s], batch.mask[s]);
                const long m = static_cast<long>(
                    std::count(batch.mask[s].begin(), batch.mask[s].end(), true));
                // per-sequence means reweighted into one batch-level token mean
                auto weighted = tape.scale(
                    part, static_cast<double>(m) / static_cast<double>(batch.n_real_tokens));
                total = total ? tape.add(total, weighted) : weighted;
            }
            const double batch_loss = total->data[0];
            lrate = adjusted_lrate(config.schedule, adam.step_count() + 1);
            if (!std::isfinite(batch_loss)) {
                std::ostringstream os;
                os << "train: non-finite loss at epoch " << epoch << ", batch "
                   << begin / static_cast<std::size_t>(config.batch_size) << ", lrate " << lrate
                   << ", loss family " << family_name(spec.family);
                std::cerr << os.str() << '\n';
                throw training_aborted(os.str());
            }
            tape.backward(total);
            adam.step(lrate);
            epoch_loss += batch_loss * static_cast<double>(batch.n_real_tokens);
            epoch_tokens += batch.n_real_tokens;
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = epoch_tokens > 0 ? epoch_loss / static_cast<double>(epoch_tokens) : 0.0;
        em.lrate = lrate;
        const EvalResult tr = evaluate(model, spec, train_split, config.batch_size);
        em.train = tr.metrics;
        if (!eval_split.sequences.empty()) {
            const EvalResult ev = evaluate(model, spec, eval_split, config.batch_size);
            em.eval = ev.metrics;
            em.eval_loss = ev.loss;
        }
        csv << metrics_csv_row(epoch, "train", em.train_loss, em.train, em.lrate) << '\n';
        if (!eval_split.sequences.empty())
            csv << metrics_csv_row(epoch, "eval", em.eval_loss, em.eval, em.lrate) << '\n';
        csv.flush();
        record.epochs.push_back(std::move(em));
    }

    record.checkpoint_path = config.outdir + "/model.ckpt";
    save_checkpoint(record.checkpoint_path, model.named_parameters());

    const auto t1 = std::chrono::steady_clock::now();
    record.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

    nlohmann::json run;
    run["epochs"] = config.epochs;
    run["seed"] = config.seed;
    run["loss_family"] = family_name(config.loss_family);
    run["wall_seconds"] = record.wall_seconds;
    run["checkpoint"] = record.checkpoint_path;
    if (!record.epochs.empty()) {
        const auto& last = record.epochs.back();
        run["final"] = {{"train_loss", last.train_loss},
                        {"eval_micro_f1", last.eval.micro_f1},
                        {"eval_macro_f1", last.eval.macro_f1},
                        {"eval_macro_f2", last.eval.macro_f2}};
    }
    std::ofstream rj(config.outdir + "/run.json", std::ios::trunc);
    rj << run.dump(2) << '\n';
    return record;
}

}  // namespace bat
