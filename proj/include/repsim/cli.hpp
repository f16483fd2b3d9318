#ifndef REPSIM_CLI_HPP
#define REPSIM_CLI_HPP

// Command-line front end. `run` takes the arguments after the program name
// and returns the process exit status: 0 success, 1 data or validation
// error, 2 usage error. Failures print one line to `err`:
//
//   repsim: error: <category>: <message>
//
// All randomness flows from --seed; without it REPSIM_SEED is consulted,
// then the fixed default 0.

#include "repsim/activation_store.hpp"
#include "repsim/error.hpp"
#include "repsim/prediction.hpp"
#include "repsim/report.hpp"
#include "repsim/sampling.hpp"
#include "repsim/similarity.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace repsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

struct UsageError : Error {
    explicit UsageError(const std::string& message) : Error("usage", message) {}
};

struct RunConfig {
    std::string command;
    std::string input_a;
    std::string input_b;
    std::vector<std::string> inputs;      // aggregate
    std::vector<std::string> manifests;   // validate
    std::vector<std::string> predictions; // validate
    std::string out;
    std::string format;
    std::string label;
    std::size_t target_rows = 20000;
    std::size_t channels = 64;
    std::size_t repeats = 5;
    std::optional<std::uint64_t> seed;
    double trunc = kDefaultTruncation;
    unsigned jobs = default_jobs();
};

inline std::uint64_t resolve_seed(const RunConfig& cfg, const char* env_seed) {
    if (cfg.seed) return *cfg.seed;
    if (env_seed == nullptr || *env_seed == '\0') return 0;
    const std::string text(env_seed);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || text.front() == '-') {
        throw UsageError("REPSIM_SEED must be a non-negative integer, got '" + text + "'");
    }
    return v;
}

inline SamplePlan plan_from(const RunConfig& cfg, const char* env_seed) {
    SamplePlan plan{cfg.target_rows, cfg.channels, cfg.repeats, resolve_seed(cfg, env_seed)};
    try {
        plan.validate();
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
    if (!(cfg.trunc >= 0.0 && cfg.trunc < 1.0)) throw UsageError("--trunc must lie in [0, 1)");
    return plan;
}

inline Format output_format(const RunConfig& cfg) {
    try {
        return format_for(cfg.format, cfg.out);
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
}

inline int cmd_cca(const RunConfig& cfg, std::ostream& out, const char* env_seed) {
    const SamplePlan plan = plan_from(cfg, env_seed);
    const Format format = output_format(cfg);

    ComparisonSpec spec{read_manifest(cfg.input_a), read_manifest(cfg.input_b), plan, cfg.trunc};
    const auto layers = compare_models(spec, cfg.jobs);

    ReportMetadata meta;
    meta.model_a = spec.manifest_a.model_id + ":" + spec.manifest_a.checkpoint_tag;
    meta.model_b = spec.manifest_b.model_id + ":" + spec.manifest_b.checkpoint_tag;
    meta.fold_seeds = {plan.seed};
    meta.set_plan(plan, cfg.trunc);
    const std::string label = cfg.label.empty() ? meta.model_a + "-vs-" + meta.model_b : cfg.label;

    emit(aggregate_folds({layers}, label, meta), format, cfg.out);
    out << "cca: " << layers.size() << " layers -> " << cfg.out << '\n';
    return kExitOk;
}

inline int cmd_predsim(const RunConfig& cfg, std::ostream& out) {
    const Format format = output_format(cfg);
    const PredictionSet a = read_predictions(cfg.input_a);
    const PredictionSet b = read_predictions(cfg.input_b);
    const AgreementReport report = prediction_similarity(a, b);
    emit(report, format, cfg.out);
    out << "predsim: similarity " << format_real(report.similarity) << " baseline "
        << format_real(report.independence_baseline) << " -> " << cfg.out << '\n';
    return kExitOk;
}

inline int cmd_auc(const RunConfig& cfg, std::ostream& out) {
    std::optional<Format> format;
    if (!cfg.out.empty()) format = output_format(cfg);
    const PredictionSet p = read_predictions(cfg.input_a);
    const double auc = auc_macro_ovr(p);
    const char* averaging = p.num_classes() == 2 ? "binary" : "macro_ovr";
    out << p.model_id() << " auc " << format_real(auc) << " (" << averaging << ")\n";
    if (format) {
        std::string text;
        if (*format == Format::json) {
            nlohmann::ordered_json j;
            j["model_id"] = p.model_id();
            j["num_classes"] = p.num_classes();
            j["n_examples"] = p.size();
            j["auc"] = round_sig9(auc);
            j["averaging"] = averaging;
            text = j.dump(2) + "\n";
        } else {
            text = "model_id,num_classes,n,auc,averaging\n" + detail::csv_field(p.model_id()) +
                   "," + std::to_string(p.num_classes()) + "," + std::to_string(p.size()) + "," +
                   format_real(auc) + "," + averaging + "\n";
        }
        write_text(text, cfg.out);
    }
    return kExitOk;
}

inline int cmd_aggregate(const RunConfig& cfg, std::ostream& out) {
    const Format format = output_format(cfg);
    std::vector<SimilarityReport> parts;
    for (const auto& path : cfg.inputs) parts.push_back(read_similarity_report(path));
    const std::string label = cfg.label.empty() ? parts.front().comparison_label : cfg.label;
    const SimilarityReport merged = merge_reports(parts, label);
    emit(merged, format, cfg.out);
    out << "aggregate: " << merged.fold_count() << " folds, " << merged.layers.size()
        << " layers -> " << cfg.out << '\n';
    return kExitOk;
}

inline int cmd_validate(const RunConfig& cfg, std::ostream& out) {
    if (cfg.manifests.empty() && cfg.predictions.empty()) {
        throw UsageError("validate needs --manifest or --predictions");
    }
    for (const auto& path : cfg.manifests) {
        const Manifest m = read_manifest(path);
        for (const auto& e : m.layers) {
            const NpyHeader h = check_layer(e);
            load_layer(e); // payload length and finiteness
            out << "layer " << e.name << " shape " << h.shape.str() << " dtype "
                << dtype_descr(h.dtype) << " ok\n";
        }
        out << "manifest " << path << ": " << m.layers.size() << " layers ok\n";
    }
    for (const auto& path : cfg.predictions) {
        const PredictionSet p = read_predictions(path);
        out << "predictions " << path << ": model " << p.model_id() << ", " << p.size()
            << " examples, " << p.num_classes() << " classes ok\n";
    }
    return kExitOk;
}

inline std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               const char* env_seed = std::getenv("REPSIM_SEED")) {
    CLI::App app{"Representation and prediction similarity between neural networks", "repsim"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_plan = [&cfg](CLI::App* sub) {
        sub->add_option("--target-rows", cfg.target_rows, "Row budget n*h*w per sample")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        sub->add_option("--channels", cfg.channels, "Channel cap per layer")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        sub->add_option("--repeats", cfg.repeats, "Sampling repeats per layer")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", cfg.seed, "Sampling seed (default: $REPSIM_SEED, else 0)");
        sub->add_option("--trunc", cfg.trunc, "Relative eigenvalue truncation")
            ->capture_default_str();
        sub->add_option("--jobs", cfg.jobs, "Worker threads")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
    };
    auto add_output = [&cfg](CLI::App* sub, bool required) {
        auto* o = sub->add_option("--out", cfg.out, "Output path");
        if (required) o->required();
        sub->add_option("--format", cfg.format, "csv or json (default: from --out extension)")
            ->check(CLI::IsMember({"csv", "json"}));
    };

    auto* cca_cmd = app.add_subcommand("cca", "Layer-wise CCA similarity of two manifests");
    cca_cmd->add_option("--a", cfg.input_a, "Manifest of the first checkpoint")->required();
    cca_cmd->add_option("--b", cfg.input_b, "Manifest of the second checkpoint")->required();
    cca_cmd->add_option("--label", cfg.label, "Comparison label");
    add_plan(cca_cmd);
    add_output(cca_cmd, true);

    auto* pred_cmd = app.add_subcommand("predsim", "Prediction similarity of two dumps");
    pred_cmd->add_option("--a", cfg.input_a, "First prediction dump")->required();
    pred_cmd->add_option("--b", cfg.input_b, "Second prediction dump")->required();
    add_output(pred_cmd, true);

    auto* auc_cmd = app.add_subcommand("auc", "AUC of one prediction dump");
    auc_cmd->add_option("--pred", cfg.input_a, "Prediction dump")->required();
    add_output(auc_cmd, false);

    auto* agg_cmd = app.add_subcommand("aggregate", "Stack per-fold JSON similarity reports");
    agg_cmd->add_option("--in", cfg.inputs, "Per-fold JSON reports")->required()->expected(1, -1);
    agg_cmd->add_option("--label", cfg.label, "Comparison label");
    add_output(agg_cmd, true);

    auto* val_cmd = app.add_subcommand("validate", "Structural checks of manifests and dumps");
    val_cmd->add_option("--manifest", cfg.manifests, "Manifest(s) to check");
    val_cmd->add_option("--predictions", cfg.predictions, "Prediction dump(s) to check");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "repsim: error: usage: " << one_line(e.what()) << '\n';
        return kExitUsage;
    }

    try {
        if (cca_cmd->parsed()) return cmd_cca(cfg, out, env_seed);
        if (pred_cmd->parsed()) return cmd_predsim(cfg, out);
        if (auc_cmd->parsed()) return cmd_auc(cfg, out);
        if (agg_cmd->parsed()) return cmd_aggregate(cfg, out);
        if (val_cmd->parsed()) return cmd_validate(cfg, out);
    } catch (const UsageError& e) {
        err << "repsim: error: usage: " << one_line(e.what()) << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "repsim: error: " << e.category() << ": " << one_line(e.what()) << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "repsim: error: internal: " << one_line(e.what()) << '\n';
        return kExitData;
    }
    return kExitUsage;
}

} // namespace repsim::cli

#endif // REPSIM_CLI_HPP
