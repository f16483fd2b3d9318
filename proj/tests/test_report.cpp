#include "oracles.hpp"
#include "repsim/report.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

using namespace repsim;
using repsim::testing::TempDir;

namespace {

std::vector<LayerSimilarity> fold(std::initializer_list<double> values) {
    std::vector<LayerSimilarity> out;
    int i = 0;
    for (double v : values) {
        LayerSimilarity l;
        l.layer_name = "layer" + std::to_string(i++);
        l.rho_mean = v;
        l.rho_std = v / 10.0;
        l.per_repeat = {v};
        out.push_back(l);
    }
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SimilarityReport sample_report() {
    ReportMetadata meta;
    meta.model_a = "imagenet:ft";
    meta.model_b = "radimagenet:ft";
    meta.fold_seeds = {0, 1, 2};
    meta.set_plan(SamplePlan{}, 1e-6);
    return aggregate_folds({fold({0.91, 0.5, 1.0 / 3.0}), fold({0.93, 0.52, 0.3}),
                            fold({0.95, 0.47, 0.31})},
                           "ImageNet-vs-RadImageNet", meta);
}

} // namespace

TEST(AggregateFolds, SingleFoldHasZeroStd) {
    const auto r = aggregate_folds({fold({0.3, 0.8})});
    ASSERT_EQ(r.layers.size(), 2u);
    EXPECT_EQ(r.fold_count(), 1u);
    for (const auto& l : r.layers) EXPECT_EQ(l.std, 0.0);
    EXPECT_EQ(r.layers[1].mean, 0.8);
}

TEST(AggregateFolds, TwoPointStatistics) {
    const auto r = aggregate_folds({fold({0.4}), fold({0.6})});
    EXPECT_NEAR(r.layers[0].mean, 0.5, 1e-15);
    EXPECT_NEAR(r.layers[0].std, 0.1, 1e-15);
    EXPECT_EQ(r.layers[0].fold_repeat_std, (std::vector<double>{0.04, 0.06}));
}

TEST(AggregateFolds, FiveFoldsMatchDirectRecomputation) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<LayerSimilarity>> runs;
    for (int f = 0; f < 5; ++f) runs.push_back(fold({u(gen), u(gen), u(gen), u(gen)}));
    const auto r = aggregate_folds(runs);
    for (std::size_t l = 0; l < 4; ++l) {
        long double sum = 0.0L;
        for (const auto& run : runs) sum += run[l].rho_mean;
        const long double mean = sum / 5.0L;
        long double ss = 0.0L;
        for (const auto& run : runs) ss += (run[l].rho_mean - mean) * (run[l].rho_mean - mean);
        EXPECT_NEAR(r.layers[l].mean, static_cast<double>(mean), 1e-12);
        EXPECT_NEAR(r.layers[l].std, static_cast<double>(std::sqrt(ss / 5.0L)), 1e-12);
    }
}

TEST(AggregateFolds, PermutationInvariant) {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<LayerSimilarity>> runs;
    for (int f = 0; f < 6; ++f) runs.push_back(fold({u(gen), u(gen)}));
    const auto base = aggregate_folds(runs);
    for (int shuffle = 0; shuffle < 10; ++shuffle) {
        std::shuffle(runs.begin(), runs.end(), gen);
        const auto r = aggregate_folds(runs);
        for (std::size_t l = 0; l < 2; ++l) {
            EXPECT_EQ(r.layers[l].mean, base.layers[l].mean);
            EXPECT_EQ(r.layers[l].std, base.layers[l].std);
        }
    }
}

TEST(AggregateFolds, GridMismatchThrows) {
    EXPECT_THROW(aggregate_folds({fold({0.1, 0.2}), fold({0.1})}), DataError);
    auto renamed = fold({0.1, 0.2});
    renamed[1].layer_name = "other";
    EXPECT_THROW(aggregate_folds({fold({0.1, 0.2}), renamed}), DataError);
    EXPECT_THROW(aggregate_folds({}), DataError);
}

TEST(Emit, CsvLayout) {
    const auto r = sample_report();
    const std::string csv = to_csv(r);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "layer_name,mean,std,fold_0,fold_1,fold_2");
    EXPECT_NE(csv.find("layer2,0.314444444,"), std::string::npos);
    EXPECT_NE(csv.find(",0.333333333,"), std::string::npos);
}

TEST(Emit, AgreementCsvLayout) {
    AgreementReport a{"a", "b", 0.5, 0.5, 0.5, 0.5, 4, 1, 1, 1, 1};
    EXPECT_EQ(to_csv(a),
              "model_a,model_b,n,similarity,baseline,acc_a,acc_b,both_correct,a_only,b_only,"
              "both_wrong\na,b,4,0.5,0.5,0.5,0.5,1,1,1,1\n");
}

TEST(Emit, DeterministicBytes) {
    TempDir dir;
    const auto r = sample_report();
    for (Format f : {Format::csv, Format::json}) {
        emit(r, f, dir / "one");
        emit(sample_report(), f, dir / "two");
        EXPECT_EQ(slurp(dir / "one"), slurp(dir / "two"));
    }
}

TEST(Emit, JsonRoundTrip) {
    TempDir dir;
    const auto r = sample_report();
    emit(r, Format::json, dir / "r.json");
    const auto back = read_similarity_report(dir / "r.json");
    EXPECT_EQ(back.comparison_label, r.comparison_label);
    EXPECT_EQ(back.metadata.model_b, r.metadata.model_b);
    EXPECT_EQ(back.metadata.fold_seeds, r.metadata.fold_seeds);
    EXPECT_EQ(back.metadata.target_rows, 20000u);
    EXPECT_EQ(back.metadata.trunc, 1e-6);
    ASSERT_EQ(back.layers.size(), r.layers.size());
    for (std::size_t i = 0; i < r.layers.size(); ++i) {
        EXPECT_EQ(back.layers[i].layer_name, r.layers[i].layer_name);
        EXPECT_NEAR(back.layers[i].mean, r.layers[i].mean, 1e-9);
        EXPECT_NEAR(back.layers[i].std, r.layers[i].std, 1e-9);
        for (std::size_t f = 0; f < 3; ++f)
            EXPECT_NEAR(back.layers[i].fold_values[f], r.layers[i].fold_values[f], 1e-9);
    }
    // re-emitting the parsed report reproduces the file
    emit(back, Format::json, dir / "again.json");
    EXPECT_EQ(slurp(dir / "r.json"), slurp(dir / "again.json"));
}

TEST(Emit, AgreementJsonRoundTrip) {
    const AgreementReport a{"m1", "m2", 0.7, 0.8, 0.75, 0.65, 20, 12, 4, 3, 1};
    const auto back = agreement_report_from_json(nlohmann::json::parse(to_json(a).dump()));
    EXPECT_EQ(back.model_a, "m1");
    EXPECT_EQ(back.similarity, 0.7);
    EXPECT_EQ(back.independence_baseline, 0.65);
    EXPECT_EQ(back.b_only, 3u);
}

TEST(Emit, IoFailure) {
    EXPECT_THROW(emit(sample_report(), Format::csv, "/nonexistent-repsim-dir/r.csv"), IoError);
}

TEST(MergeReports, StacksFoldsAndChecksPlan) {
    const auto one = aggregate_folds({fold({0.4, 0.9})}, "x");
    const auto two = aggregate_folds({fold({0.6, 0.7})}, "x");
    const auto merged = merge_reports({one, two}, "x");
    EXPECT_EQ(merged.fold_count(), 2u);
    EXPECT_NEAR(merged.layers[0].mean, 0.5, 1e-15);
    EXPECT_NEAR(merged.layers[0].std, 0.1, 1e-15);

    auto other_plan = two;
    other_plan.metadata.repeats = 3;
    EXPECT_THROW(merge_reports({one, other_plan}, "x"), DataError);
}

TEST(FormatReal, NineSignificantDigits) {
    EXPECT_EQ(format_real(1.0 / 3.0), "0.333333333");
    EXPECT_EQ(format_real(1.0), "1");
    EXPECT_EQ(format_real(123456789.123), "123456789");
    EXPECT_EQ(format_for("", "out.json"), Format::json);
    EXPECT_EQ(format_for("", "out.txt"), Format::csv);
    EXPECT_THROW(format_for("xml", "out"), DataError);
}
