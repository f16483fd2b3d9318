#ifndef REPSIM_REPORT_HPP
#define REPSIM_REPORT_HPP

// Fold aggregation and CSV/JSON emission.
//
// Similarity CSV:  layer_name,mean,std,fold_0,...,fold_{F-1}
// Agreement CSV:   model_a,model_b,n,similarity,baseline,acc_a,acc_b,
//                  both_correct,a_only,b_only,both_wrong
// JSON mirrors the same structures with snake_case keys. Reals are written
// with 9 significant digits and keys in a fixed order, so equal reports
// serialize to equal bytes.

#include "repsim/error.hpp"
#include "repsim/prediction.hpp"
#include "repsim/sampling.hpp"
#include "repsim/similarity.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace repsim {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Format { csv, json };

struct ReportMetadata {
    std::string tool_version = kToolVersion;
    std::string model_a;
    std::string model_b;
    std::vector<std::uint64_t> fold_seeds; // plan seed of each fold, in input order
    std::size_t target_rows = 0;
    std::size_t channel_cap = 0;
    std::size_t repeats = 0;
    double trunc = 0.0;

    void set_plan(const SamplePlan& plan, double truncation) {
        target_rows = plan.target_rows;
        channel_cap = plan.channel_cap;
        repeats = plan.repeats;
        trunc = truncation;
    }
};

struct LayerSeries {
    std::string layer_name;
    std::vector<double> fold_values;     // per-fold rho_mean
    std::vector<double> fold_repeat_std; // per-fold dispersion over sampling repeats
    double mean = 0.0;
    double std = 0.0; // population std over folds
};

struct SimilarityReport {
    std::string comparison_label;
    std::vector<LayerSeries> layers; // manifest order
    ReportMetadata metadata;

    std::size_t fold_count() const { return layers.empty() ? 0 : layers.front().fold_values.size(); }
};

/// Mean and population std computed over sorted values, so the result does
/// not depend on fold order.
inline std::pair<double, double> fold_statistics(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return mean_and_std(values);
}

inline SimilarityReport aggregate_folds(const std::vector<std::vector<LayerSimilarity>>& runs,
                                        std::string label = {}, ReportMetadata metadata = {}) {
    if (runs.empty()) throw DataError("grid", "no folds to aggregate");
    const auto& grid = runs.front();
    if (grid.empty()) throw DataError("grid", "fold 0 has no layers");
    for (std::size_t f = 1; f < runs.size(); ++f) {
        bool same = runs[f].size() == grid.size();
        for (std::size_t i = 0; same && i < grid.size(); ++i)
            same = runs[f][i].layer_name == grid[i].layer_name;
        if (!same) {
            throw DataError("grid", "fold " + std::to_string(f) +
                                        " has a different layer grid than fold 0");
        }
    }

    SimilarityReport out{std::move(label), {}, std::move(metadata)};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        LayerSeries s;
        s.layer_name = grid[i].layer_name;
        for (const auto& run : runs) {
            s.fold_values.push_back(run[i].rho_mean);
            s.fold_repeat_std.push_back(run[i].rho_std);
        }
        std::tie(s.mean, s.std) = fold_statistics(s.fold_values);
        out.layers.push_back(std::move(s));
    }
    return out;
}

/// Stack several reports (each one or more folds) into one, checking grids.
inline SimilarityReport merge_reports(const std::vector<SimilarityReport>& parts, std::string label) {
    if (parts.empty()) throw DataError("grid", "no reports to merge");
    std::vector<std::vector<LayerSimilarity>> runs;
    ReportMetadata meta = parts.front().metadata;
    meta.fold_seeds.clear();
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto& r = parts[p];
        if (r.metadata.target_rows != meta.target_rows ||
            r.metadata.channel_cap != meta.channel_cap || r.metadata.repeats != meta.repeats ||
            r.metadata.trunc != meta.trunc) {
            throw DataError("grid", "report " + std::to_string(p) +
                                        " was produced with a different sampling plan");
        }
        for (std::size_t f = 0; f < r.fold_count(); ++f) {
            std::vector<LayerSimilarity> run;
            for (const auto& s : r.layers) {
                LayerSimilarity l;
                l.layer_name = s.layer_name;
                l.rho_mean = s.fold_values[f];
                l.rho_std = s.fold_repeat_std[f];
                run.push_back(std::move(l));
            }
            runs.push_back(std::move(run));
            meta.fold_seeds.push_back(f < r.metadata.fold_seeds.size() ? r.metadata.fold_seeds[f]
                                                                       : 0);
        }
    }
    return aggregate_folds(runs, std::move(label), std::move(meta));
}

/// 9 significant digits, shortest round-trip text of the rounded value.
inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline double round_sig9(double v) { return std::strtod(format_real(v).c_str(), nullptr); }

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline nlohmann::ordered_json reals(const std::vector<double>& v) {
    auto out = nlohmann::ordered_json::array();
    for (double x : v) out.push_back(round_sig9(x));
    return out;
}

inline std::vector<double> read_reals(const nlohmann::json& j) {
    return j.get<std::vector<double>>();
}

} // namespace detail

inline nlohmann::ordered_json to_json(const SimilarityReport& r) {
    nlohmann::ordered_json j;
    j["comparison_label"] = r.comparison_label;
    j["fold_count"] = r.fold_count();
    auto layers = nlohmann::ordered_json::array();
    for (const auto& s : r.layers) {
        nlohmann::ordered_json l;
        l["layer_name"] = s.layer_name;
        l["mean"] = round_sig9(s.mean);
        l["std"] = round_sig9(s.std);
        l["fold_values"] = detail::reals(s.fold_values);
        l["fold_repeat_std"] = detail::reals(s.fold_repeat_std);
        layers.push_back(std::move(l));
    }
    j["layers"] = std::move(layers);
    const auto& m = r.metadata;
    nlohmann::ordered_json meta;
    meta["tool_version"] = m.tool_version;
    meta["model_a"] = m.model_a;
    meta["model_b"] = m.model_b;
    meta["fold_seeds"] = m.fold_seeds;
    meta["target_rows"] = m.target_rows;
    meta["channel_cap"] = m.channel_cap;
    meta["repeats"] = m.repeats;
    meta["trunc"] = round_sig9(m.trunc);
    auto grid = nlohmann::ordered_json::array();
    for (const auto& s : r.layers) grid.push_back(s.layer_name);
    meta["layer_grid"] = std::move(grid);
    j["metadata"] = std::move(meta);
    return j;
}

inline nlohmann::ordered_json to_json(const AgreementReport& r) {
    nlohmann::ordered_json j;
    j["model_a"] = r.model_a;
    j["model_b"] = r.model_b;
    j["n_examples"] = r.n_examples;
    j["similarity"] = round_sig9(r.similarity);
    j["independence_baseline"] = round_sig9(r.independence_baseline);
    j["accuracy_a"] = round_sig9(r.accuracy_a);
    j["accuracy_b"] = round_sig9(r.accuracy_b);
    j["joint_counts"] = {{"both_correct", r.both_correct},
                         {"a_only", r.a_only},
                         {"b_only", r.b_only},
                         {"both_wrong", r.both_wrong}};
    return j;
}

inline SimilarityReport similarity_report_from_json(const nlohmann::json& j) {
    SimilarityReport r;
    try {
        r.comparison_label = j.at("comparison_label").get<std::string>();
        for (const auto& l : j.at("layers")) {
            LayerSeries s;
            s.layer_name = l.at("layer_name").get<std::string>();
            s.mean = l.at("mean").get<double>();
            s.std = l.at("std").get<double>();
            s.fold_values = detail::read_reals(l.at("fold_values"));
            s.fold_repeat_std = detail::read_reals(l.at("fold_repeat_std"));
            if (s.fold_values.empty() || s.fold_values.size() != s.fold_repeat_std.size()) {
                throw DataError("report", "layer '" + s.layer_name + "' has inconsistent folds");
            }
            r.layers.push_back(std::move(s));
        }
        const auto& m = j.at("metadata");
        r.metadata.tool_version = m.at("tool_version").get<std::string>();
        r.metadata.model_a = m.at("model_a").get<std::string>();
        r.metadata.model_b = m.at("model_b").get<std::string>();
        r.metadata.fold_seeds = m.at("fold_seeds").get<std::vector<std::uint64_t>>();
        r.metadata.target_rows = m.at("target_rows").get<std::size_t>();
        r.metadata.channel_cap = m.at("channel_cap").get<std::size_t>();
        r.metadata.repeats = m.at("repeats").get<std::size_t>();
        r.metadata.trunc = m.at("trunc").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("report", e.what());
    }
    if (r.layers.empty()) throw DataError("report", "report has no layers");
    for (const auto& s : r.layers) {
        if (s.fold_values.size() != r.layers.front().fold_values.size()) {
            throw DataError("report", "layers disagree on fold count");
        }
    }
    return r;
}

inline AgreementReport agreement_report_from_json(const nlohmann::json& j) {
    AgreementReport r;
    try {
        r.model_a = j.at("model_a").get<std::string>();
        r.model_b = j.at("model_b").get<std::string>();
        r.n_examples = j.at("n_examples").get<std::size_t>();
        r.similarity = j.at("similarity").get<double>();
        r.independence_baseline = j.at("independence_baseline").get<double>();
        r.accuracy_a = j.at("accuracy_a").get<double>();
        r.accuracy_b = j.at("accuracy_b").get<double>();
        const auto& c = j.at("joint_counts");
        r.both_correct = c.at("both_correct").get<std::size_t>();
        r.a_only = c.at("a_only").get<std::size_t>();
        r.b_only = c.at("b_only").get<std::size_t>();
        r.both_wrong = c.at("both_wrong").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("report", e.what());
    }
    return r;
}

inline std::string to_csv(const SimilarityReport& r) {
    std::ostringstream out;
    out << "layer_name,mean,std";
    for (std::size_t f = 0; f < r.fold_count(); ++f) out << ",fold_" << f;
    out << '\n';
    for (const auto& s : r.layers) {
        out << detail::csv_field(s.layer_name) << ',' << format_real(s.mean) << ','
            << format_real(s.std);
        for (double v : s.fold_values) out << ',' << format_real(v);
        out << '\n';
    }
    return out.str();
}

inline std::string to_csv(const AgreementReport& r) {
    std::ostringstream out;
    out << "model_a,model_b,n,similarity,baseline,acc_a,acc_b,both_correct,a_only,b_only,"
           "both_wrong\n";
    out << detail::csv_field(r.model_a) << ',' << detail::csv_field(r.model_b) << ','
        << r.n_examples << ',' << format_real(r.similarity) << ','
        << format_real(r.independence_baseline) << ',' << format_real(r.accuracy_a) << ','
        << format_real(r.accuracy_b) << ',' << r.both_correct << ',' << r.a_only << ','
        << r.b_only << ',' << r.both_wrong << '\n';
    return out.str();
}

template <typename Report>
std::string render(const Report& r, Format format) {
    return format == Format::csv ? to_csv(r) : to_json(r).dump(2) + "\n";
}

inline void write_text(const std::string& text, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

template <typename Report>
void emit(const Report& r, Format format, const std::filesystem::path& path) {
    write_text(render(r, format), path);
}

/// csv or json from an explicit name, else from the path extension.
inline Format format_for(const std::string& name, const std::filesystem::path& path) {
    std::string f = name;
    if (f.empty()) f = path.extension() == ".json" ? "json" : "csv";
    if (f == "csv") return Format::csv;
    if (f == "json") return Format::json;
    throw DataError("argument", "unknown format '" + f + "' (csv or json)");
}

inline SimilarityReport read_similarity_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report " + path.string());
    try {
        return similarity_report_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("report", path.string() + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(e.category(), path.string() + ": " + e.what());
    }
}

} // namespace repsim

#endif // REPSIM_REPORT_HPP
