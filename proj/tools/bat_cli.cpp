#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "bat/checkpoint.hpp"
#include "bat/gradcheck.hpp"
#include "bat/trainer.hpp"

namespace {

int cmd_train(const std::string& config_path) {
    const auto config = bat::load_config(config_path);
    const auto record = bat::train(config);
    std::cout << "wrote " << record.metrics_csv_path << " and " << record.checkpoint_path << " ("
              << std::fixed << std::setprecision(1) << record.wall_seconds << "s)\n";
    if (!record.epochs.empty()) {
        const auto& last = record.epochs.back();
        std::cout << std::setprecision(4) << "final eval micro_f1=" << last.eval.micro_f1
                  << " macro_f1=" << last.eval.macro_f1 << " macro_f2=" << last.eval.macro_f2
                  << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path) {
    const auto config = bat::load_config(config_path);
    const auto dataset = bat::generate_dataset(config.data);
    bat::Dataset train_split, eval_split;
    bat::split_dataset(dataset, config.eval_split, config.seed, train_split, eval_split);
    const auto stats = train_split.stats();
    const auto spec = bat::build_loss_spec(config, stats);
    bat::Model model(config.model, config.seed);
    bat::restore_checkpoint(ckpt_path, model.named_parameters());
    const auto r = bat::evaluate(model, spec, eval_split, config.batch_size);
    std::cout << std::setprecision(6) << "loss=" << r.loss << " micro_f1=" << r.metrics.micro_f1
              << " macro_f1=" << r.metrics.macro_f1 << " macro_f2=" << r.metrics.macro_f2 << "\n";
    for (std::size_t c = 0; c < r.metrics.f1.size(); ++c)
        std::cout << "class " << c << ": p=" << r.metrics.precision[c]
                  << " r=" << r.metrics.recall[c] << " f1=" << r.metrics.f1[c]
                  << " f2=" << r.metrics.f2[c] << " pred=" << r.metrics.predicted_counts[c]
                  << "\n";
    return 0;
}

int cmd_grad_check() {
    const auto rows = bat::grad_check();
    int failures = 0;
    for (const auto& row : rows) {
        std::cout << (row.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(32) << row.name
                  << " max_rel_err=" << std::scientific << std::setprecision(3) << row.max_rel_err
                  << " tol=" << row.tolerance << std::defaultfloat << "\n";
        if (!row.pass) ++failures;
    }
    std::cout << rows.size() - static_cast<std::size_t>(failures) << "/" << rows.size()
              << " checks passed\n";
    return failures == 0 ? 0 : 1;
}

int cmd_sweep_lambda(const std::string& config_path, const std::vector<double>& lambdas) {
    auto config = bat::load_config(config_path);
    const auto dataset = bat::generate_dataset(config.data);
    std::ostringstream csv;
    csv << "lambda,micro_f1,macro_f1,macro_f2,sign_boundary\n";
    for (double lam : lambdas) {
        auto c = config;
        c.loss_lambda = lam;
        c.outdir = config.outdir + "/lambda_" + std::to_string(lam);
        const auto record = bat::train(c, dataset);
        const auto& last = record.epochs.back();
        csv << std::setprecision(10) << lam << ',' << last.eval.micro_f1 << ','
            << last.eval.macro_f1 << ',' << last.eval.macro_f2 << ',' << lam / (1.0 + lam) << "\n";
    }
    std::ofstream os(config.outdir + "/sweep_lambda.csv", std::ios::trunc);
    os << csv.str();
    std::cout << csv.str();
    return 0;
}

int cmd_emit_schedule(const std::string& variant, double mult, long steps, const std::string& out) {
    auto spec = bat::named_variant(variant);
    spec.lambda *= mult;
    std::ostringstream csv;
    csv << "step,lrate\n" << std::setprecision(10);
    for (long x = 1; x <= steps; ++x) csv << x << ',' << bat::adjusted_lrate(spec, x) << "\n";
    if (out.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream os(out, std::ios::trunc);
        os << csv.str();
    }
    return 0;
}

int cmd_gen_data(const std::string& config_path) {
    const auto config = bat::load_config(config_path);
    const auto dataset = bat::generate_dataset(config.data);
    std::filesystem::create_directories(config.outdir);
    const std::string path = config.outdir + "/dataset.json";
    bat::save_dataset_json(dataset, path);
    std::cout << "wrote " << path << " (" << dataset.sequences.size() << " sequences, "
              << dataset.n_tokens() << " tokens)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BAT encoder, imbalance-aware objectives, and training harness"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, variant = "v1", out;
    std::vector<double> lambdas = {1, 8, 12, 20, 24, 30};
    double mult = 1.0;
    long steps = 20000;

    auto* train = app.add_subcommand("train", "run a training experiment");
    train->add_option("config", config_path, "experiment config file")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the eval split");
    eval->add_option("config", config_path, "experiment config file")->required();
    eval->add_option("checkpoint", ckpt_path, "checkpoint file")->required();

    auto* gc = app.add_subcommand("grad-check", "finite-difference gradient suite");
    gc->add_option("config", config_path, "unused; accepted for interface compatibility");

    auto* sweep = app.add_subcommand("sweep-lambda", "train once per lambda, emit F-score table");
    sweep->add_option("config", config_path, "experiment config file")->required();
    sweep->add_option("--lambdas", lambdas, "lambda grid")->delimiter(',');

    auto* sched = app.add_subcommand("emit-schedule", "emit (step, lrate) rows");
    sched->add_option("--variant", variant, "schedule variant name (v1..v5)");
    sched->add_option("--mult", mult, "extra multiplier on lambda");
    sched->add_option("--steps", steps, "number of steps");
    sched->add_option("--out", out, "output file (default stdout)");

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
    gen->add_option("config", config_path, "experiment config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(train)) return cmd_train(config_path);
        if (app.got_subcommand(eval)) return cmd_eval(config_path, ckpt_path);
        if (app.got_subcommand(gc)) return cmd_grad_check();
        if (app.got_subcommand(sweep)) return cmd_sweep_lambda(config_path, lambdas);
        if (app.got_subcommand(sched)) return cmd_emit_schedule(variant, mult, steps, out);
        if (app.got_subcommand(gen)) return cmd_gen_data(config_path);
    } catch (const bat::config_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
