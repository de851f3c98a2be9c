// syswatch: syscall-trace malware classification pipeline.
// Subcommands: gen (synthetic dataset), train, eval, infer/aggregate.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "syswatch/checkpoint.hpp"
#include "syswatch/decision.hpp"
#include "syswatch/errors.hpp"
#include "syswatch/metrics.hpp"
#include "syswatch/pipeline.hpp"
#include "syswatch/synthgen.hpp"
#include "syswatch/trainer.hpp"
#include "syswatch/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace syswatch;

namespace {

// Removes everything this run created if it fails partway.
class OutputGuard {
public:
    void track(const fs::path& p) { created_.push_back(p); }
    void release() { created_.clear(); }
    ~OutputGuard() {
        for (const auto& p : created_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

private:
    std::vector<fs::path> created_;
};

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write error on " + path.string());
}

void write_run_manifest(const fs::path& path, const std::string& subcommand,
                        const json& config, const json& seeds, const json& inputs,
                        const json& outputs) {
    const json manifest = {{"tool", "syswatch"},       {"version", std::string(kVersion)},
                           {"subcommand", subcommand}, {"config", config},
                           {"seeds", seeds},           {"inputs", inputs},
                           {"outputs", outputs}};
    write_text_file(path, manifest.dump(2) + "\n");
}

std::set<std::string> parse_filter(const std::string& spec) {
    std::set<std::string> filter;
    if (spec == "none") return filter;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) filter.insert(item);
    return filter;
}

std::vector<double> parse_weights(const std::string& csv) {
    std::vector<double> weights;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) weights.push_back(std::stod(item));
    return weights;
}

struct GenArgs {
    std::string config_path;
    std::string out_dir;
    std::string write_default;
    int files_per_class = 20;
    double duration = 10.0;
    uint64_t seed = 0;
    bool seed_given = false;
    double gap = 600.0;
    double local_signal = 1.0;
    double rate = 2000.0;
    double nanosleep_rate = 0.1;
};

int run_gen(const GenArgs& args) {
    if (!args.write_default.empty()) {
        const auto spec = default_generator_spec(args.local_signal, args.gap,
                                                 args.nanosleep_rate, args.rate,
                                                 args.seed_given ? args.seed : 1);
        write_text_file(args.write_default, to_json(spec).dump(2) + "\n");
        std::cerr << "wrote default generator config to " << args.write_default << "\n";
        if (args.config_path.empty() || args.out_dir.empty()) return 0;
    }
    if (args.config_path.empty() || args.out_dir.empty())
        throw InvalidConfig("gen requires --config and --out");

    std::ifstream in(args.config_path);
    if (!in) throw IoError("cannot read config: " + args.config_path);
    json j;
    in >> j;
    auto spec = generator_spec_from_json(j);
    if (args.seed_given) spec.seed = args.seed;

    const fs::path out_root(args.out_dir);
    const auto manifest = generate_dataset(spec, out_root, args.files_per_class,
                                           args.duration);

    std::ostringstream manifest_text;
    write_manifest(manifest, manifest_text);
    write_text_file(out_root / "manifest.tsv", manifest_text.str());
    write_run_manifest(out_root / "run_manifest.json", "gen",
                       {{"config", args.config_path},
                        {"files_per_class", args.files_per_class},
                        {"duration", args.duration}},
                       {{"seed", spec.seed}}, json::array({args.config_path}),
                       json::array({args.out_dir}));
    std::cerr << "generated " << manifest.size() << " trace files under " << args.out_dir
              << "\n";
    return 0;
}

struct TrainArgs {
    std::string data_dir;
    std::string out_dir;
    int context = 512;
    std::string pattern = "dense";
    int epochs = 5;
    double lr = 1e-3;
    int batch = 16;
    int embed_dim = 64;
    int layers = 2;
    int heads = 4;
    double dropout = 0.1;
    uint64_t seed = 1;
    uint64_t shuffle_seed = 1;
    double split = 0.2;
    int stride = 0;
    std::string filter = "nanosleep";
};

int run_train(const TrainArgs& args) {
    WindowingConfig wcfg;
    wcfg.context = args.context;
    wcfg.stride = args.stride;
    wcfg.filter = parse_filter(args.filter);

    std::cerr << "loading dataset from " << args.data_dir << "\n";
    auto data = load_dataset_windows(args.data_dir, wcfg);
    std::cerr << "  " << data.file_count << " files, " << data.windows.size()
              << " windows, vocabulary " << data.vocab.size() << " tokens";
    if (data.stats.malformed > 0)
        std::cerr << " (" << data.stats.malformed << " malformed lines skipped)";
    std::cerr << "\n";

    ModelConfig mcfg;
    mcfg.context = args.context;
    mcfg.vocab_size = data.vocab.size();
    mcfg.embed_dim = args.embed_dim;
    mcfg.num_layers = args.layers;
    mcfg.num_heads = args.heads;
    mcfg.pattern = parse_pattern(args.pattern);
    mcfg.dropout = static_cast<float>(args.dropout);
    mcfg.init_seed = args.seed;

    TrainConfig tcfg;
    tcfg.epochs = args.epochs;
    tcfg.lr = args.lr;
    tcfg.batch_size = args.batch;
    tcfg.shuffle_seed = args.shuffle_seed;
    tcfg.val_fraction = args.split;

    ClassifierModel model(mcfg);
    const auto report = train(model, data.windows, tcfg);
    for (size_t e = 0; e < report.epochs.size(); ++e)
        std::cerr << "epoch " << (e + 1) << ": loss " << report.epochs[e].train_loss
                  << ", val acc " << report.epochs[e].val_metrics.accuracy << " ("
                  << report.epochs[e].seconds << " s)\n";

    const fs::path out_root(args.out_dir);
    std::error_code ec;
    fs::create_directories(out_root, ec);
    if (ec) throw IoError("cannot create " + out_root.string() + ": " + ec.message());

    OutputGuard guard;
    const auto vocab_path = out_root / "vocab.tsv";
    const auto model_path = out_root / "model.swcp";
    const auto report_path = out_root / "train_report.json";
    const auto manifest_path = out_root / "run_manifest.json";
    guard.track(vocab_path);
    guard.track(model_path);
    guard.track(report_path);
    guard.track(manifest_path);

    data.vocab.save_file(vocab_path);
    save_checkpoint(model_path, model, data.vocab.hash());
    write_text_file(report_path, to_json(report).dump(2) + "\n");
    write_run_manifest(manifest_path, "train",
                       {{"context", args.context},
                        {"pattern", args.pattern},
                        {"epochs", args.epochs},
                        {"lr", args.lr},
                        {"batch", args.batch},
                        {"embed_dim", args.embed_dim},
                        {"layers", args.layers},
                        {"heads", args.heads},
                        {"dropout", args.dropout},
                        {"split", args.split},
                        {"stride", args.stride},
                        {"filter", args.filter}},
                       {{"init_seed", args.seed}, {"shuffle_seed", args.shuffle_seed}},
                       json::array({args.data_dir}),
                       json::array({vocab_path.string(), model_path.string(),
                                    report_path.string()}));
    guard.release();
    std::cerr << "wrote " << model_path.string() << "\n";
    return 0;
}

struct EvalArgs {
    std::string model_path;
    std::string vocab_path;
    std::string data_dir;
    std::string out_path;
    int stride = 0;
};

int run_eval(const EvalArgs& args) {
    const auto vocab = Vocabulary::load_file(args.vocab_path);
    auto loaded = load_checkpoint(args.model_path, vocab.hash());
    const auto model = std::move(loaded).make_model();

    WindowingConfig wcfg;
    wcfg.context = model.config().context;
    wcfg.stride = args.stride;

    const auto windows = load_dataset_windows_with_vocab(args.data_dir, vocab, wcfg);
    const auto predictions = predict(model, windows);
    const auto report = evaluate(predictions);
    const auto report_json = to_json(report).dump(2) + "\n";

    ConfusionMatrix cm(kNumClasses);
    for (const auto& p : predictions)
        if (p.truth) ++cm.at(static_cast<int>(*p.truth), p.predicted);

    if (args.out_path.empty()) {
        std::cout << report_json;
        std::cerr << render_confusion(cm, behavior_class_names());
    } else {
        write_text_file(args.out_path, report_json);
        const fs::path out(args.out_path);
        write_run_manifest(out.parent_path() / (out.stem().string() + ".manifest.json"),
                           "eval",
                           {{"model", args.model_path},
                            {"vocab", args.vocab_path},
                            {"stride", args.stride}},
                           json::object(), json::array({args.data_dir}),
                           json::array({args.out_path}));
        std::cout << render_confusion(cm, behavior_class_names());
        std::cerr << "wrote " << args.out_path << "\n";
    }
    return 0;
}

struct InferArgs {
    std::string model_path;
    std::string vocab_path;
    std::string trace_path;
    std::string out_path;
    double threshold = 0.5;
    std::string agg = "mean";
    std::string weights_csv;
    int span = 10;
    int stride = 0;
};

int run_infer(const InferArgs& args) {
    const auto vocab = Vocabulary::load_file(args.vocab_path);
    auto loaded = load_checkpoint(args.model_path, vocab.hash());
    const auto model = std::move(loaded).make_model();

    WindowingConfig wcfg;
    wcfg.context = model.config().context;
    wcfg.stride = args.stride;
    const auto windows = windows_from_file(args.trace_path, std::nullopt, vocab, wcfg);
    const auto probs = model.forward_batch(windows);

    DecisionPolicy policy;
    policy.threshold = args.threshold;
    policy.window_span = args.span;
    if (args.agg == "mean") {
        policy.aggregation = Aggregation::Mean;
    } else if (args.agg == "vote") {
        policy.aggregation = Aggregation::MajorityVote;
    } else if (args.agg == "weighted") {
        policy.aggregation = Aggregation::WeightedMean;
        policy.weights = parse_weights(args.weights_csv);
    } else {
        throw InvalidConfig("unknown aggregation: " + args.agg);
    }

    std::ofstream file_out;
    if (!args.out_path.empty()) {
        file_out.open(args.out_path, std::ios::binary);
        if (!file_out) throw IoError("cannot write " + args.out_path);
    }
    std::ostream& out = args.out_path.empty() ? std::cout : file_out;
    for (const auto& verdict : run_policy(probs, policy))
        out << to_json(verdict).dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM-style syscall-trace malware classification pipeline"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "generate a synthetic syscall dataset");
    gen->add_option("--config", gen_args.config_path, "generator spec (JSON)");
    gen->add_option("--out", gen_args.out_dir, "output dataset directory");
    gen->add_option("--files-per-class", gen_args.files_per_class, "files per behavior class")
        ->check(CLI::PositiveNumber);
    gen->add_option("--duration", gen_args.duration, "seconds of trace per file")
        ->check(CLI::PositiveNumber);
    auto* gen_seed = gen->add_option("--seed", gen_args.seed, "master seed override");
    gen->add_option("--write-default-config", gen_args.write_default,
                    "write the builtin generator template to this path");
    gen->add_option("--gap", gen_args.gap, "template marker mean gap (tokens)");
    gen->add_option("--local-signal", gen_args.local_signal,
                    "template local-statistics strength in [0,1]");
    gen->add_option("--rate", gen_args.rate, "template syscalls per second");
    gen->add_option("--nanosleep-rate", gen_args.nanosleep_rate,
                    "template nanosleep insertion rate");

    TrainArgs train_args;
    auto* tr = app.add_subcommand("train", "train a window classifier on a dataset");
    tr->add_option("--data", train_args.data_dir, "dataset directory")->required();
    tr->add_option("--out", train_args.out_dir, "output directory")->required();
    tr->add_option("--context", train_args.context, "window length C")->check(CLI::Range(2, 1 << 20));
    tr->add_option("--pattern", train_args.pattern, "dense | sliding:w=..,g=.. | blocksparse:b=..,wb=..,r=..,gb=..");
    tr->add_option("--epochs", train_args.epochs, "training epochs")->check(CLI::PositiveNumber);
    tr->add_option("--lr", train_args.lr, "AdamW learning rate");
    tr->add_option("--batch", train_args.batch, "batch size")->check(CLI::PositiveNumber);
    tr->add_option("--embed-dim", train_args.embed_dim, "embedding width");
    tr->add_option("--layers", train_args.layers, "encoder layers");
    tr->add_option("--heads", train_args.heads, "attention heads");
    tr->add_option("--dropout", train_args.dropout, "dropout rate");
    tr->add_option("--seed", train_args.seed, "parameter init seed");
    tr->add_option("--shuffle-seed", train_args.shuffle_seed, "shuffle/split seed");
    tr->add_option("--split", train_args.split, "validation fraction");
    tr->add_option("--stride", train_args.stride, "window stride (0 = context-1)");
    tr->add_option("--filter", train_args.filter,
                   "comma-separated syscalls to drop ('none' disables)");

    EvalArgs eval_args;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a labeled dataset");
    ev->add_option("--model", eval_args.model_path, "checkpoint file")->required();
    ev->add_option("--vocab", eval_args.vocab_path, "vocabulary file")->required();
    ev->add_option("--data", eval_args.data_dir, "dataset directory")->required();
    ev->add_option("--out", eval_args.out_path, "metrics JSON output path");
    ev->add_option("--stride", eval_args.stride, "window stride (0 = context-1)");

    InferArgs infer_args;
    auto* inf = app.add_subcommand("infer", "classify a trace and stream verdicts");
    inf->alias("aggregate");
    inf->add_option("--model", infer_args.model_path, "checkpoint file")->required();
    inf->add_option("--vocab", infer_args.vocab_path, "vocabulary file")->required();
    inf->add_option("--trace", infer_args.trace_path, "trace file")->required();
    inf->add_option("--out", infer_args.out_path, "verdict JSON-lines output path");
    inf->add_option("--threshold", infer_args.threshold, "malicious threshold in [0,1]")
        ->check(CLI::Range(0.0, 1.0));
    inf->add_option("--agg", infer_args.agg, "mean | vote | weighted");
    inf->add_option("--weights", infer_args.weights_csv, "weights for --agg weighted");
    inf->add_option("--span", infer_args.span, "windows pooled per verdict")
        ->check(CLI::PositiveNumber);
    inf->add_option("--stride", infer_args.stride, "window stride (0 = context-1)");

    try {
        app.parse(argc, argv);
        gen_args.seed_given = gen_seed->count() > 0;
        if (gen->parsed()) return run_gen(gen_args);
        if (tr->parsed()) return run_train(train_args);
        if (ev->parsed()) return run_eval(eval_args);
        if (inf->parsed()) return run_infer(infer_args);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.category());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: bad JSON input: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
