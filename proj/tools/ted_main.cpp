// ted: corpus generation, policy training, evaluation, learning-curve
// sweeps, attention export and an interactive REPL in one binary.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numeric
// failure.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ted/checkpoint.hpp"
#include "ted/config_file.hpp"
#include "ted/corpus.hpp"
#include "ted/curve.hpp"
#include "ted/heatmap.hpp"
#include "ted/metrics.hpp"
#include "ted/repl.hpp"
#include "ted/train.hpp"

namespace {

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ted::DataError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw ted::DataError("failed writing '" + path + "'");
}

struct GenerateArgs {
    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int run_generate(const GenerateArgs& args) {
    ted::GenerationConfig cfg;
    if (!args.config_path.empty())
        cfg = ted::generation_config_from_kv(ted::parse_kv_file(args.config_path));
    if (args.seed_set) cfg.seed = args.seed;
    ted::Corpus corpus = ted::generate_corpus(cfg);
    ted::save_corpus(corpus, args.out_path);
    const auto report = ted::validate_corpus(corpus);
    std::cout << "wrote " << corpus.dialogues.size() << " dialogues to " << args.out_path << " ("
              << report.n_dialogues_with_digressions << " contain digressions)\n";
    return 0;
}

struct TrainArgs {
    std::string corpus_path;
    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string encoder;
    std::string mode;
    std::size_t max_history = 0;
};

ted::TedConfig resolve_model_config(const std::string& config_path, bool seed_set,
                                    std::uint64_t seed, const std::string& encoder,
                                    const std::string& mode, std::size_t max_history) {
    ted::TedConfig cfg;
    if (!config_path.empty()) cfg = ted::ted_config_from_kv(ted::parse_kv_file(config_path));
    if (seed_set) cfg.seed = seed;
    if (!encoder.empty()) cfg.encoder = ted::encoder_kind_from_string(encoder);
    if (!mode.empty()) cfg.mode = ted::feature_mode_from_string(mode);
    if (max_history > 0) cfg.max_history = max_history;
    cfg.validate();
    return cfg;
}

int run_train(const TrainArgs& args) {
    const ted::TedConfig cfg = resolve_model_config(args.config_path, args.seed_set, args.seed,
                                                    args.encoder, args.mode, args.max_history);
    const ted::Corpus corpus = ted::load_corpus(args.corpus_path);
    ted::TrainResult result = ted::train(corpus, cfg);
    ted::save_checkpoint(result.model, args.out_path);
    std::string losses = "epoch\tmean_loss\n";
    for (std::size_t e = 0; e < result.epoch_mean_loss.size(); ++e)
        losses += ted::strf("%zu\t%.12g\n", e, result.epoch_mean_loss[e]);
    write_text_file(args.out_path + ".losses.tsv", losses);
    std::cout << "trained " << to_string(cfg.encoder) << " on " << corpus.dialogues.size()
              << " dialogues for " << cfg.epochs << " epochs; final mean loss "
              << ted::strf("%.6f", result.epoch_mean_loss.back()) << "\n"
              << "checkpoint: " << args.out_path << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint_path;
    std::string corpus_path;
    std::string out_path;
};

int run_eval(const EvalArgs& args) {
    const ted::TedModel model = ted::load_checkpoint(args.checkpoint_path);
    const ted::Corpus corpus = ted::load_corpus(args.corpus_path);
    const ted::EvalResult result = ted::evaluate(model, corpus);
    std::cout << ted::eval_report_to_text(result.report);
    if (!args.out_path.empty()) {
        write_text_file(args.out_path, ted::eval_report_to_json(result.report).dump(2) + "\n");
        write_text_file(args.out_path + ".predictions.tsv",
                        ted::prediction_log_to_tsv(result.log));
        std::cout << "report: " << args.out_path << "\npredictions: " << args.out_path
                  << ".predictions.tsv\n";
    }
    return 0;
}

struct CurveArgs {
    std::string corpus_path;
    std::string config_path;
    std::string out_path;
    std::vector<std::size_t> sizes{25, 50, 100, 200, 400, 600};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    double train_fraction = 0.75;
    std::uint64_t split_seed = 7;
    std::size_t threads = 0;
    std::string encoder;  // default: both
    std::string mode;
    std::size_t max_history = 0;
};

int run_curve(const CurveArgs& args) {
    ted::TedConfig cfg = resolve_model_config(args.config_path, false, 0, "", args.mode,
                                              args.max_history);
    const ted::Corpus corpus = ted::load_corpus(args.corpus_path);
    auto [train_part, test_part] = ted::split(corpus, args.train_fraction, args.split_seed);
    std::vector<ted::EncoderKind> encoders;
    if (args.encoder.empty()) {
        encoders = {ted::EncoderKind::transformer, ted::EncoderKind::lstm};
    } else {
        encoders = {ted::encoder_kind_from_string(args.encoder)};
    }
    const ted::CurveResult result = ted::run_learning_curve(
        train_part, test_part, cfg, args.sizes, args.seeds, encoders, args.threads);
    const std::string table = ted::curve_to_tsv(result, args.seeds);
    std::cout << table;
    if (!args.out_path.empty()) {
        write_text_file(args.out_path, table);
        std::cout << "table: " << args.out_path << "\n";
    }
    return 0;
}

struct AttentionArgs {
    std::string checkpoint_path;
    std::string corpus_path;
    std::string dialogue_id;
    std::string out_prefix;
};

int run_attention(const AttentionArgs& args) {
    const ted::TedModel model = ted::load_checkpoint(args.checkpoint_path);
    const ted::Corpus corpus = ted::load_corpus(args.corpus_path);
    const ted::Dialogue* dialogue = nullptr;
    for (const auto& d : corpus.dialogues)
        if (d.id == args.dialogue_id) dialogue = &d;
    if (!dialogue)
        throw ted::DataError("dialogue '" + args.dialogue_id + "' not found in corpus");

    auto feats = ted::featurize_dialogue(*dialogue, model.vocab, ted::SymbolPolicy::lenient);
    const auto maps = ted::attention_maps(model, feats);

    std::vector<std::string> row_labels, col_labels;
    for (const auto& turn : dialogue->turns) {
        row_labels.push_back(turn.system_action);
        col_labels.push_back(turn.user_intent);
    }
    for (std::size_t l = 0; l < maps.size(); ++l) {
        for (std::size_t h = 0; h < maps[l].size(); ++h) {
            const std::string base = args.out_prefix + ted::strf("_l%zuh%zu", l, h);
            write_text_file(base + ".tsv",
                            ted::attention_matrix_to_tsv(maps[l][h], row_labels, col_labels));
            ted::write_attention_heatmap_pgm(maps[l][h], model.config.max_history, base + ".pgm");
        }
    }
    std::cout << "wrote " << maps.size() * maps[0].size() << " attention matrices to "
              << args.out_prefix << "_l*h*.{tsv,pgm}\n";
    return 0;
}

int run_repl_cmd(const std::string& checkpoint_path) {
    ted::TedModel model = ted::load_checkpoint(checkpoint_path);
    ted::run_repl(std::move(model), std::cin, std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ted: transformer embedding dialogue policy"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* cmd_gen = app.add_subcommand("generate", "generate a synthetic dialogue corpus");
    cmd_gen->add_option("--config", gen.config_path, "generation config (key=value file)");
    cmd_gen->add_option("--out", gen.out_path, "output corpus path")->required();
    auto* gen_seed = cmd_gen->add_option("--seed", gen.seed, "generation seed override");

    TrainArgs tr;
    auto* cmd_train = app.add_subcommand("train", "train a policy on a corpus");
    cmd_train->add_option("--corpus", tr.corpus_path, "training corpus")->required();
    cmd_train->add_option("--config", tr.config_path, "model config (key=value file)");
    cmd_train->add_option("--out", tr.out_path, "checkpoint output path")->required();
    auto* tr_seed = cmd_train->add_option("--seed", tr.seed, "training seed override");
    cmd_train->add_option("--encoder", tr.encoder, "encoder kind: transformer|lstm");
    cmd_train->add_option("--mode", tr.mode, "featurization mode: modular|e2e");
    cmd_train->add_option("--max-history", tr.max_history, "history window override");

    EvalArgs ev;
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    cmd_eval->add_option("--checkpoint", ev.checkpoint_path, "model checkpoint")->required();
    cmd_eval->add_option("--corpus", ev.corpus_path, "test corpus")->required();
    cmd_eval->add_option("--out", ev.out_path, "JSON report path (also writes .predictions.tsv)");

    CurveArgs cu;
    auto* cmd_curve = app.add_subcommand("curve", "learning-curve sweep over training sizes");
    cmd_curve->add_option("--corpus", cu.corpus_path, "corpus (split internally)")->required();
    cmd_curve->add_option("--config", cu.config_path, "model config (key=value file)");
    cmd_curve->add_option("--sizes", cu.sizes, "training sizes")->delimiter(',');
    cmd_curve->add_option("--seeds", cu.seeds, "training seeds")->delimiter(',');
    cmd_curve->add_option("--train-fraction", cu.train_fraction, "train split fraction");
    cmd_curve->add_option("--split-seed", cu.split_seed, "train/test split seed");
    cmd_curve->add_option("--threads", cu.threads, "worker threads (0 = hardware)");
    cmd_curve->add_option("--encoder", cu.encoder, "restrict to one encoder kind");
    cmd_curve->add_option("--mode", cu.mode, "featurization mode: modular|e2e");
    cmd_curve->add_option("--max-history", cu.max_history, "history window override");
    cmd_curve->add_option("--out", cu.out_path, "output table path");

    AttentionArgs at;
    auto* cmd_attn = app.add_subcommand("attention", "export attention matrices and heatmaps");
    cmd_attn->add_option("--checkpoint", at.checkpoint_path, "transformer checkpoint")
        ->required();
    cmd_attn->add_option("--corpus", at.corpus_path, "corpus containing the dialogue")
        ->required();
    cmd_attn->add_option("--dialogue", at.dialogue_id, "dialogue id to visualize")->required();
    cmd_attn->add_option("--out", at.out_prefix, "output file prefix")->required();

    std::string repl_checkpoint;
    auto* cmd_repl = app.add_subcommand("repl", "interactive session with a trained policy");
    cmd_repl->add_option("--checkpoint", repl_checkpoint, "model checkpoint")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        gen.seed_set = gen_seed->count() > 0;
        tr.seed_set = tr_seed->count() > 0;
        if (cmd_gen->parsed()) return run_generate(gen);
        if (cmd_train->parsed()) return run_train(tr);
        if (cmd_eval->parsed()) return run_eval(ev);
        if (cmd_curve->parsed()) return run_curve(cu);
        if (cmd_attn->parsed()) return run_attention(at);
        if (cmd_repl->parsed()) return run_repl_cmd(repl_checkpoint);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const ted::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ted::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const ted::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
