#ifndef REPSIM_PREDICTION_HPP
#define REPSIM_PREDICTION_HPP

// Prediction agreement between two classifiers and ranking-based AUC.
//
// A mistake indicator is 1 where the predicted label differs from the true
// label. Two models' prediction similarity is the fraction of examples on
// which their mistake indicators agree; if the models erred independently
// with accuracies a1 and a2 it would be a1·a2 + (1 − a1)(1 − a2).
//
// Dump format (JSON Lines): a header {"model_id": str, "num_classes": int}
// followed by one {"example_id": str, "true": int, "pred": int,
// "scores": [float, ...]} per example.

#include "repsim/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

namespace repsim {

struct PredictionRecord {
    std::string example_id;
    int true_label = 0;
    int predicted_label = 0;
    std::vector<double> scores;
};

/// Index of the largest score; ties go to the lowest index.
inline int argmax(const std::vector<double>& scores) {
    return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

/// One model's predictions on one test set, kept sorted by example_id.
class PredictionSet {
public:
    PredictionSet(std::string model_id, int num_classes, std::vector<PredictionRecord> records)
        : model_id_(std::move(model_id)), num_classes_(num_classes), records_(std::move(records)) {
        std::sort(records_.begin(), records_.end(),
                  [](const auto& x, const auto& y) { return x.example_id < y.example_id; });
        validate();
    }

    const std::string& model_id() const noexcept { return model_id_; }
    int num_classes() const noexcept { return num_classes_; }
    const std::vector<PredictionRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }

private:
    void validate() const {
        const std::string where = "predictions '" + model_id_ + "'";
        if (num_classes_ < 2) throw DataError("predictions", where + ": num_classes must be >= 2");
        if (records_.empty()) throw DataError("predictions", where + ": no records");
        for (std::size_t i = 0; i < records_.size(); ++i) {
            const auto& r = records_[i];
            const std::string at = where + ", example '" + r.example_id + "'";
            if (i > 0 && records_[i - 1].example_id == r.example_id) {
                throw DataError("predictions", at + ": duplicate example_id");
            }
            if (r.true_label < 0 || r.true_label >= num_classes_ || r.predicted_label < 0 ||
                r.predicted_label >= num_classes_) {
                throw DataError("predictions", at + ": label out of range [0, " +
                                                   std::to_string(num_classes_) + ")");
            }
            if (r.scores.size() != static_cast<std::size_t>(num_classes_)) {
                throw DataError("predictions", at + ": expected " + std::to_string(num_classes_) +
                                                   " scores, got " + std::to_string(r.scores.size()));
            }
            for (double s : r.scores) {
                if (!std::isfinite(s)) throw DataError("nonfinite", at + ": non-finite score");
            }
            if (argmax(r.scores) != r.predicted_label) {
                throw DataError("predictions", at + ": pred " + std::to_string(r.predicted_label) +
                                                   " is not the argmax of scores (" +
                                                   std::to_string(argmax(r.scores)) + ")");
            }
        }
    }

    std::string model_id_;
    int num_classes_ = 0;
    std::vector<PredictionRecord> records_;
};

inline PredictionSet read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open prediction dump " + path.string());

    std::string line;
    std::size_t line_no = 0;
    std::string model_id;
    int num_classes = 0;
    bool have_header = false;
    std::vector<PredictionRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        try {
            const auto j = nlohmann::json::parse(line);
            if (!have_header) {
                model_id = j.at("model_id").get<std::string>();
                num_classes = j.at("num_classes").get<int>();
                have_header = true;
                continue;
            }
            PredictionRecord r;
            r.example_id = j.at("example_id").get<std::string>();
            r.true_label = j.at("true").get<int>();
            r.predicted_label = j.at("pred").get<int>();
            r.scores = j.at("scores").get<std::vector<double>>();
            records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("predictions", where + ": " + e.what());
        }
    }
    if (!have_header) throw DataError("predictions", path.string() + ": missing header line");
    try {
        return PredictionSet(model_id, num_classes, std::move(records));
    } catch (const DataError& e) {
        throw DataError(e.category(), path.string() + ": " + e.what());
    }
}

inline void write_predictions(const PredictionSet& p, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    nlohmann::ordered_json header;
    header["model_id"] = p.model_id();
    header["num_classes"] = p.num_classes();
    out << header.dump() << '\n';
    for (const auto& r : p.records()) {
        nlohmann::ordered_json j;
        j["example_id"] = r.example_id;
        j["true"] = r.true_label;
        j["pred"] = r.predicted_label;
        j["scores"] = r.scores;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

/// 1 where the prediction is wrong, ordered by sorted example_id.
inline std::vector<std::uint8_t> mistake_vector(const PredictionSet& p) {
    std::vector<std::uint8_t> out;
    out.reserve(p.size());
    for (const auto& r : p.records()) out.push_back(r.predicted_label != r.true_label ? 1 : 0);
    return out;
}

struct AgreementReport {
    std::string model_a;
    std::string model_b;
    double similarity = 0.0;
    double accuracy_a = 0.0;
    double accuracy_b = 0.0;
    double independence_baseline = 0.0;
    std::size_t n_examples = 0;
    // a_only: a correct and b wrong; b_only: the reverse.
    std::size_t both_correct = 0;
    std::size_t a_only = 0;
    std::size_t b_only = 0;
    std::size_t both_wrong = 0;
};

inline double independence_baseline(double acc_a, double acc_b) {
    return acc_a * acc_b + (1.0 - acc_a) * (1.0 - acc_b);
}

inline AgreementReport prediction_similarity(const PredictionSet& a, const PredictionSet& b) {
    const auto& ra = a.records();
    const auto& rb = b.records();
    const std::size_t common = std::min(ra.size(), rb.size());
    for (std::size_t i = 0; i <= common; ++i) {
        if (i == common) {
            if (ra.size() == rb.size()) break;
            const auto& extra = ra.size() > rb.size() ? ra[i] : rb[i];
            throw DataError("mismatch", "example '" + extra.example_id + "' is missing from '" +
                                            (ra.size() > rb.size() ? b.model_id() : a.model_id()) +
                                            "'");
        }
        if (ra[i].example_id != rb[i].example_id) {
            const bool a_first = ra[i].example_id < rb[i].example_id;
            const auto& id = a_first ? ra[i].example_id : rb[i].example_id;
            throw DataError("mismatch", "example '" + id + "' is missing from '" +
                                            (a_first ? b.model_id() : a.model_id()) + "'");
        }
        if (ra[i].true_label != rb[i].true_label) {
            throw DataError("mismatch", "example '" + ra[i].example_id +
                                            "' has different true labels in the two dumps");
        }
    }

    AgreementReport out;
    out.model_a = a.model_id();
    out.model_b = b.model_id();
    out.n_examples = ra.size();
    for (std::size_t i = 0; i < ra.size(); ++i) {
        const bool ok_a = ra[i].predicted_label == ra[i].true_label;
        const bool ok_b = rb[i].predicted_label == rb[i].true_label;
        if (ok_a && ok_b) ++out.both_correct;
        else if (ok_a) ++out.a_only;
        else if (ok_b) ++out.b_only;
        else ++out.both_wrong;
    }
    const auto n = static_cast<double>(out.n_examples);
    out.similarity = static_cast<double>(out.both_correct + out.both_wrong) / n;
    out.accuracy_a = static_cast<double>(out.both_correct + out.a_only) / n;
    out.accuracy_b = static_cast<double>(out.both_correct + out.b_only) / n;
    out.independence_baseline = independence_baseline(out.accuracy_a, out.accuracy_b);
    return out;
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half (the Mann–Whitney statistic). The pair count is kept
/// in integers, so the result is the exact ratio rounded once.
inline double auc_binary(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw DataError("argument", "auc: scores and labels differ in length");
    }
    std::size_t pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw DataError("nonfinite", "auc: non-finite score");
        if (labels[i] != 0 && labels[i] != 1) throw DataError("argument", "auc: labels must be 0/1");
        pos += labels[i] == 1;
    }
    const std::size_t neg = scores.size() - pos;
    if (pos == 0 || neg == 0) throw DataError("argument", "auc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

    // twice the number of (positive, negative) wins plus ties
    std::uint64_t doubled = 0;
    std::uint64_t neg_below = 0;
    for (std::size_t g = 0; g < order.size();) {
        std::size_t end = g;
        std::uint64_t p = 0, q = 0;
        while (end < order.size() && scores[order[end]] == scores[order[g]]) {
            (labels[order[end]] == 1 ? p : q) += 1;
            ++end;
        }
        doubled += 2 * p * neg_below + p * q;
        neg_below += q;
        g = end;
    }
    return static_cast<double>(doubled) /
           (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

/// Binary AUC on the positive-class score for two classes; otherwise the
/// unweighted mean of one-vs-rest AUCs over classes present as both positive
/// and negative.
inline double auc_macro_ovr(const PredictionSet& p) {
    const int k = p.num_classes();
    std::vector<double> scores(p.size());
    std::vector<int> labels(p.size());
    auto one_vs_rest = [&](int cls) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            scores[i] = p.records()[i].scores[static_cast<std::size_t>(cls)];
            labels[i] = p.records()[i].true_label == cls ? 1 : 0;
        }
        return auc_binary(scores, labels);
    };
    if (k == 2) return one_vs_rest(1);

    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (const auto& r : p.records()) ++counts[static_cast<std::size_t>(r.true_label)];
    double sum = 0.0;
    int used = 0;
    for (int cls = 0; cls < k; ++cls) {
        const auto c = counts[static_cast<std::size_t>(cls)];
        if (c == 0 || c == p.size()) continue;
        sum += one_vs_rest(cls);
        ++used;
    }
    if (used == 0) throw DataError("argument", "auc: only one class present in true labels");
    return sum / used;
}

} // namespace repsim

#endif // REPSIM_PREDICTION_HPP
