// scdiff: train and evaluate small diffusion models for expression matrices.
//
// Subcommands: gen-data, train, sample, eval, bench. Every run resolves a
// flat key=value config (defaults < --config file < --set/flag overrides),
// echoes it to <out>/config.resolved, and writes fixed-name outputs there.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "scdiff/bench.hpp"
#include "scdiff/checkpoint.hpp"
#include "scdiff/data.hpp"
#include "scdiff/diffusion.hpp"
#include "scdiff/error.hpp"
#include "scdiff/kvconfig.hpp"
#include "scdiff/metrics.hpp"
#include "scdiff/model.hpp"
#include "scdiff/train.hpp"

namespace fs = std::filesystem;
using namespace scdiff;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out;
    std::string seed;
    std::vector<std::string> sets;
    // direct per-command overrides collected as (key, value)
    std::vector<std::pair<std::string, std::string>> direct;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value config file");
    cmd->add_option("--out", opts.out, "output directory");
    cmd->add_option("--seed", opts.seed, "global seed override");
    cmd->add_option("--set", opts.sets, "override any config key (key=value, repeatable)");
}

/// Bind a direct flag that mirrors one config key.
void mirror(CLI::App* cmd, CommonOpts& opts, const std::string& flag, const std::string& key,
            const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&opts, key](const std::string& v) { opts.direct.emplace_back(key, v); }, help);
}

KvConfig resolve_config(const CommonOpts& opts) {
    KvConfig cfg = KvConfig::defaults();
    if (!opts.config_path.empty()) cfg.load_file(opts.config_path);
    for (const auto& kv : opts.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : opts.direct) cfg.set(key, value);
    if (!opts.seed.empty()) cfg.set("seed", opts.seed);
    if (!opts.out.empty()) cfg.set("out", opts.out);
    if (const char* env = std::getenv("SCDIFF_THREADS")) cfg.set("threads", env);
    return cfg;
}

std::string prepare_out(const KvConfig& cfg) {
    const std::string out = cfg.get_string("out");
    fs::create_directories(out);
    cfg.save(out + "/config.resolved");
    return out;
}

SyntheticSpec synthetic_spec_from(const KvConfig& cfg) {
    SyntheticSpec spec;
    spec.kind = mixture_kind_from_name(cfg.get_string("gen.kind"));
    spec.components = cfg.get_int("gen.components");
    spec.cells = cfg.get_int("gen.cells");
    spec.genes = cfg.get_int("gen.genes");
    spec.seed = cfg.get_u64("seed");
    spec.mean_scale = cfg.get_double("gen.mean_scale");
    spec.sigma = cfg.get_double("gen.sigma");
    spec.nb_dispersion = cfg.get_double("gen.nb_dispersion");
    spec.nb_mean_scale = cfg.get_double("gen.nb_mean_scale");
    const std::string weights = cfg.get_string("gen.weights");
    if (!weights.empty()) {
        std::stringstream ss(weights);
        std::string item;
        while (std::getline(ss, item, ',')) spec.weights.push_back(std::stod(item));
    }
    return spec;
}

ModelConfig model_config_from(const KvConfig& cfg, int n_genes) {
    ModelConfig mc;
    mc.n_genes = n_genes;
    mc.patch = cfg.get_int("model.patch");
    mc.dim = cfg.get_int("model.dim");
    mc.depth = cfg.get_int("model.depth");
    mc.heads = cfg.get_int("model.heads");
    mc.subspace = cfg.get_int("model.subspace");
    mc.block = block_kind_from_name(cfg.get_string("model.block"));
    mc.eta = cfg.get_double("model.eta");
    mc.lambda = cfg.get_double("model.lambda");
    mc.eps_distortion = cfg.get_double("model.distortion");
    mc.schedule_steps = cfg.get_int("schedule.steps");
    mc.beta_start = cfg.get_double("schedule.beta_start");
    mc.beta_end = cfg.get_double("schedule.beta_end");
    return mc;
}

TrainConfig train_config_from(const KvConfig& cfg, int cells) {
    TrainConfig tc;
    tc.epochs = cfg.get_int("train.epochs");
    if (tc.epochs < 0) {
        // Dataset-size tiers mirroring the epoch budgets the CLI defaults to.
        tc.epochs = cells <= 600 ? 2400 : cells <= 2000 ? 1200 : 800;
    }
    tc.batch_size = cfg.get_int("train.batch");
    tc.learning_rate = cfg.get_double("train.lr");
    tc.adam_beta1 = cfg.get_double("train.adam_beta1");
    tc.adam_beta2 = cfg.get_double("train.adam_beta2");
    tc.adam_eps = cfg.get_double("train.adam_eps");
    tc.grad_clip = cfg.get_double("train.grad_clip");
    tc.checkpoint_every = cfg.get_int("train.checkpoint_every");
    tc.seed = cfg.get_u64("seed");
    return tc;
}

int cmd_gen_data(const KvConfig& cfg) {
    const std::string out = prepare_out(cfg);
    const SyntheticSpec spec = synthetic_spec_from(cfg);
    const ExpressionMatrix data = generate_synthetic(spec);

    std::vector<std::string> comments = {
        std::string("synthetic ") + mixture_kind_name(spec.kind),
        "components=" + std::to_string(spec.components),
        "cells=" + std::to_string(spec.cells),
        "genes=" + std::to_string(spec.genes),
        "seed=" + std::to_string(spec.seed),
    };
    save_csv(out + "/data.csv", data, comments);

    std::ofstream labels(out + "/labels.csv");
    labels << "label\n";
    for (const int l : data.labels) labels << l << "\n";

    std::printf("wrote %s/data.csv (%d cells x %d genes)\n", out.c_str(), data.cells(),
                data.genes());
    return 0;
}

int cmd_train(const KvConfig& cfg) {
    const std::string out = prepare_out(cfg);
    const std::string data_path = cfg.get_string("train.data");
    if (data_path.empty()) throw ConfigError("train.data is required");

    ExpressionMatrix data = load_csv(data_path);
    preprocess(data, parse_transform_list(cfg.get_string("train.preprocess")));

    Model model;
    OptimizerState opt;
    ModelConfig mc;
    const std::string resume = cfg.get_string("train.resume");
    if (!resume.empty()) {
        Checkpoint prev = load_checkpoint(resume);
        if (prev.config.n_genes != data.genes())
            throw ConfigError("resume: checkpoint gene count differs from dataset");
        mc = prev.config;
        model = std::move(prev.model);
        opt = std::move(prev.opt);
    } else {
        mc = model_config_from(cfg, data.genes());
        mc.validate();
        Rng init_rng(cfg.get_u64("seed"));
        model = Model(mc, init_rng);
    }

    const NoiseSchedule schedule = make_linear_schedule(mc.schedule_steps, mc.beta_start, mc.beta_end);
    const TrainConfig tc = train_config_from(cfg, data.cells());

    auto write_ckpt = [&](const std::string& path, const Model& m, const OptimizerState& o) {
        Checkpoint ckpt;
        ckpt.config = m.config();
        ckpt.model = m;
        ckpt.opt = o;
        ckpt.transforms = data.transform_record;
        ckpt.gene_names = data.gene_names;
        save_checkpoint(path, ckpt);
    };

    const CheckpointSink sink = [&](int epoch, const Model& m, const OptimizerState& o) {
        write_ckpt(out + "/checkpoint_epoch" + std::to_string(epoch) + ".ckpt", m, o);
    };

    const TrainResult result = train(model, data.values, tc, schedule, std::move(opt), sink);
    write_ckpt(out + "/checkpoint_final.ckpt", model, result.opt);
    save_train_log(out + "/train_log.csv", result.log);

    const double last_loss = result.log.empty() ? 0.0 : result.log.back().loss;
    std::printf("trained %d epochs (%d cells), final loss %.6g, step %ld\n", tc.epochs,
                data.cells(), last_loss, result.opt.step);
    std::printf("wrote %s/checkpoint_final.ckpt and %s/train_log.csv\n", out.c_str(), out.c_str());
    return 0;
}

int cmd_sample(const KvConfig& cfg) {
    const std::string out = prepare_out(cfg);
    const std::string ckpt_path = cfg.get_string("sample.checkpoint");
    if (ckpt_path.empty()) throw ConfigError("sample.checkpoint is required");
    const Checkpoint ckpt = load_checkpoint(ckpt_path);

    const int count = cfg.get_int("sample.count");
    if (count < 1) throw ConfigError("sample.count must be >= 1");
    const SamplerKind sampler = sampler_kind_from_name(cfg.get_string("sample.sampler"));
    const int steps = cfg.get_int("sample.steps");
    const double eta = cfg.get_double("sample.eta");
    const uint64_t seed = cfg.get_u64("seed");
    const int threads = cfg.get_int("threads");

    const NoiseSchedule schedule = make_linear_schedule(
        ckpt.config.schedule_steps, ckpt.config.beta_start, ckpt.config.beta_end);
    const Matrix raw = sample_rows(schedule, ckpt.model.predictor(), ckpt.config.n_genes, count,
                                   sampler, steps, eta, seed, threads);

    ExpressionMatrix gen;
    gen.values = inverse_transform(raw, ckpt.transforms);
    gen.gene_names = ckpt.gene_names;

    std::vector<std::string> comments = {
        "generated from " + ckpt_path,
        std::string("sampler=") + (sampler == SamplerKind::ddpm ? "ddpm" : "ddim"),
        "steps=" + std::to_string(sampler == SamplerKind::ddpm ? ckpt.config.schedule_steps : steps),
        "eta=" + std::to_string(eta),
        "seed=" + std::to_string(seed),
        "count=" + std::to_string(count),
    };
    save_csv(out + "/generated.csv", gen, comments);
    std::printf("wrote %s/generated.csv (%d cells x %d genes)\n", out.c_str(), count,
                ckpt.config.n_genes);
    return 0;
}

int cmd_eval(const KvConfig& cfg) {
    const std::string out = prepare_out(cfg);
    const std::string real_path = cfg.get_string("eval.real");
    const std::string gen_path = cfg.get_string("eval.gen");
    if (real_path.empty() || gen_path.empty())
        throw ConfigError("eval.real and eval.gen are required");

    const ExpressionMatrix real = load_csv(real_path);
    const ExpressionMatrix gen = load_csv(gen_path);

    const MetricReport report = evaluate(real, gen, cfg.get_int("eval.bins"),
                                         cfg.get_double("eval.bandwidth"), cfg.get_u64("seed"));
    std::ofstream rep(out + "/report.txt");
    if (!rep) throw IoError("cannot write " + out + "/report.txt");
    rep << report.to_text();
    std::fputs(report.to_text().c_str(), stdout);

    save_scatter_csv(out + "/scatter.csv", project_2d(real.values, gen.values));
    std::printf("wrote %s/report.txt and %s/scatter.csv\n", out.c_str(), out.c_str());
    return 0;
}

int cmd_bench(const KvConfig& cfg) {
    const std::string out = prepare_out(cfg);
    BenchSettings settings;
    settings.arch = model_config_from(cfg, cfg.get_int("bench.genes"));
    settings.epochs = cfg.get_int("bench.epochs");
    settings.cells = cfg.get_int("bench.cells");
    settings.genes = cfg.get_int("bench.genes");
    settings.batch = cfg.get_int("bench.batch");
    settings.sample_count = cfg.get_int("bench.sample_count");
    settings.ddim_steps = cfg.get_int("bench.ddim_steps");
    settings.threads = cfg.get_int("threads");
    settings.seed = cfg.get_u64("seed");

    const BenchReport report = run_bench(settings, out);
    std::ofstream rep(out + "/bench_report.txt");
    if (!rep) throw IoError("cannot write " + out + "/bench_report.txt");
    rep << report.to_text();
    std::fputs(report.to_text().c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion-based expression-matrix generator"};
    app.require_subcommand(1);

    CommonOpts gen_opts, train_opts, sample_opts, eval_opts, bench_opts;

    CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic expression-matrix CSV");
    add_common(gen, gen_opts);
    mirror(gen, gen_opts, "--kind", "gen.kind", "gaussian_mixture | negbinomial_mixture");
    mirror(gen, gen_opts, "--components", "gen.components", "mixture components");
    mirror(gen, gen_opts, "--cells", "gen.cells", "cell count");
    mirror(gen, gen_opts, "--genes", "gen.genes", "gene count");

    CLI::App* tr = app.add_subcommand("train", "train a noise predictor on a CSV dataset");
    add_common(tr, train_opts);
    mirror(tr, train_opts, "--data", "train.data", "training CSV");
    mirror(tr, train_opts, "--epochs", "train.epochs", "epoch count (-1 = size tier)");
    mirror(tr, train_opts, "--batch", "train.batch", "batch size");
    mirror(tr, train_opts, "--lr", "train.lr", "learning rate");
    mirror(tr, train_opts, "--block", "model.block", "whitebox | baseline");
    mirror(tr, train_opts, "--resume", "train.resume", "checkpoint to resume from");

    CLI::App* sa = app.add_subcommand("sample", "generate cells from a checkpoint");
    add_common(sa, sample_opts);
    mirror(sa, sample_opts, "--checkpoint", "sample.checkpoint", "checkpoint file");
    mirror(sa, sample_opts, "--count", "sample.count", "cells to generate");
    mirror(sa, sample_opts, "--sampler", "sample.sampler", "ddpm | ddim");
    mirror(sa, sample_opts, "--steps", "sample.steps", "ddim step count");
    mirror(sa, sample_opts, "--eta", "sample.eta", "ddim eta in [0, 1]");

    CLI::App* ev = app.add_subcommand("eval", "compare generated vs real CSVs");
    add_common(ev, eval_opts);
    mirror(ev, eval_opts, "--real", "eval.real", "real CSV");
    mirror(ev, eval_opts, "--gen", "eval.gen", "generated CSV");
    mirror(ev, eval_opts, "--bins", "eval.bins", "histogram bins for KL");

    CLI::App* be = app.add_subcommand("bench", "matched white-box vs baseline comparison");
    add_common(be, bench_opts);
    mirror(be, bench_opts, "--epochs", "bench.epochs", "epoch budget per side");
    mirror(be, bench_opts, "--cells", "bench.cells", "synthetic cell count");
    mirror(be, bench_opts, "--genes", "bench.genes", "synthetic gene count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(resolve_config(gen_opts));
        if (tr->parsed()) return cmd_train(resolve_config(train_opts));
        if (sa->parsed()) return cmd_sample(resolve_config(sample_opts));
        if (ev->parsed()) return cmd_eval(resolve_config(eval_opts));
        if (be->parsed()) return cmd_bench(resolve_config(bench_opts));
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: config: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: io: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: data: %s\n", e.what());
        return 4;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "error: shape: %s\n", e.what());
        return 5;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: numeric: %s\n", e.what());
        return 6;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 10;
    }
    return 0;
}
