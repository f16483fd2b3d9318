#include "oracles.hpp"
#include "repsim/prediction.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>

using namespace repsim;
using repsim::testing::TempDir;
using repsim::testing::auc_pairs_oracle;

namespace {

// Record whose scores put all mass on `pred`.
PredictionRecord rec(std::string id, int truth, int pred, int classes = 2) {
    std::vector<double> scores(classes, 0.0);
    scores[pred] = 1.0;
    return {std::move(id), truth, pred, std::move(scores)};
}

} // namespace

TEST(PredictionSet, ValidatesRecords) {
    EXPECT_NO_THROW(PredictionSet("m", 3, {rec("a", 0, 2, 3)}));
    EXPECT_THROW(PredictionSet("m", 2, {rec("a", 0, 1), rec("a", 1, 1)}), DataError);
    EXPECT_THROW(PredictionSet("m", 2, {rec("a", 2, 1)}), DataError);
    EXPECT_THROW(PredictionSet("m", 2, {{"a", 0, 1, {0.9, 0.1}}}), DataError); // pred != argmax
    EXPECT_THROW(PredictionSet("m", 2, {{"a", 0, 0, {0.9}}}), DataError);
    EXPECT_THROW(PredictionSet("m", 2, {{"a", 0, 0, {NAN, 0.1}}}), DataError);
    // ties break toward the lowest class
    EXPECT_NO_THROW(PredictionSet("m", 3, {{"a", 0, 1, {0.2, 0.4, 0.4}}}));
    EXPECT_THROW(PredictionSet("m", 3, {{"a", 0, 2, {0.2, 0.4, 0.4}}}), DataError);
}

TEST(MistakeVector, Definitions) {
    EXPECT_EQ(mistake_vector(PredictionSet("m", 2, {rec("a", 0, 0), rec("b", 1, 1)})),
              (std::vector<std::uint8_t>{0, 0}));
    EXPECT_EQ(mistake_vector(PredictionSet("m", 2, {rec("a", 0, 1), rec("b", 1, 0)})),
              (std::vector<std::uint8_t>{1, 1}));
    EXPECT_EQ(mistake_vector(PredictionSet(
                  "m", 3, {rec("x1", 0, 0, 3), rec("x2", 1, 2, 3), rec("x3", 1, 1, 3)})),
              (std::vector<std::uint8_t>{0, 1, 0}));
}

TEST(MistakeVector, OrderedBySortedExampleId) {
    const PredictionSet p("m", 2, {rec("c", 0, 1), rec("a", 0, 0), rec("b", 1, 0)});
    EXPECT_EQ(mistake_vector(p), (std::vector<std::uint8_t>{0, 1, 1}));
}

TEST(PredictionSimilarity, IdenticalIsOne) {
    const PredictionSet a("a", 2, {rec("1", 0, 1), rec("2", 1, 1), rec("3", 0, 0)});
    const auto r = prediction_similarity(a, a);
    EXPECT_EQ(r.similarity, 1.0);
    EXPECT_EQ(r.a_only + r.b_only, 0u);
}

TEST(PredictionSimilarity, BaselineArithmetic) {
    EXPECT_DOUBLE_EQ(independence_baseline(0.9, 0.8), 0.74);
    EXPECT_EQ(independence_baseline(1.0, 1.0), 1.0);
    EXPECT_EQ(independence_baseline(0.5, 0.3), 0.5);
}

TEST(PredictionSimilarity, FourExampleHandCount) {
    // a wrong on {1,2}, b wrong on {2,3}: agree on 2 (both wrong) and 4 (both right).
    const PredictionSet a("a", 2, {rec("1", 0, 1), rec("2", 0, 1), rec("3", 0, 0), rec("4", 0, 0)});
    const PredictionSet b("b", 2, {rec("1", 0, 0), rec("2", 0, 1), rec("3", 0, 1), rec("4", 0, 0)});
    const auto r = prediction_similarity(a, b);
    EXPECT_EQ(r.similarity, 0.5);
    EXPECT_EQ(r.both_correct, 1u);
    EXPECT_EQ(r.both_wrong, 1u);
    EXPECT_EQ(r.a_only, 1u); // example 3
    EXPECT_EQ(r.b_only, 1u); // example 1
    EXPECT_EQ(r.accuracy_a, 0.5);
    EXPECT_EQ(r.accuracy_b, 0.5);
    EXPECT_EQ(r.independence_baseline, 0.5);
}

TEST(PredictionSimilarity, SymmetricAndConsistent) {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<PredictionRecord> ra, rb;
        const int n = 1 + static_cast<int>(gen() % 60);
        for (int i = 0; i < n; ++i) {
            const int truth = static_cast<int>(gen() % 3);
            ra.push_back(rec(std::to_string(i), truth, static_cast<int>(gen() % 3), 3));
            rb.push_back(rec(std::to_string(i), truth, static_cast<int>(gen() % 3), 3));
        }
        const PredictionSet a("a", 3, ra), b("b", 3, rb);
        const auto ab = prediction_similarity(a, b);
        const auto ba = prediction_similarity(b, a);
        EXPECT_EQ(ab.similarity, ba.similarity);
        EXPECT_EQ(ab.independence_baseline, ba.independence_baseline);
        EXPECT_EQ(ab.a_only, ba.b_only);
        EXPECT_EQ(ab.both_correct + ab.a_only + ab.b_only + ab.both_wrong, std::size_t(n));
        EXPECT_DOUBLE_EQ(ab.similarity, 1.0 - double(ab.a_only + ab.b_only) / n);
    }
}

TEST(PredictionSimilarity, MismatchNamesExample) {
    const PredictionSet a("a", 2, {rec("1", 0, 0), rec("2", 0, 0)});
    const PredictionSet b("b", 2, {rec("1", 0, 0), rec("3", 0, 0)});
    try {
        prediction_similarity(a, b);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("'2'"), std::string::npos);
    }
    const PredictionSet shorter("c", 2, {rec("1", 0, 0)});
    EXPECT_THROW(prediction_similarity(a, shorter), DataError);
    const PredictionSet relabeled("d", 2, {rec("1", 1, 0), rec("2", 0, 0)});
    EXPECT_THROW(prediction_similarity(a, relabeled), DataError);
}

TEST(AucBinary, Examples) {
    EXPECT_EQ(auc_binary({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}), 1.0);
    EXPECT_EQ(auc_binary({0.5, 0.5, 0.5}, {0, 1, 1}), 0.5);
    EXPECT_EQ(auc_binary({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}), 0.75);
    EXPECT_THROW(auc_binary({0.1, 0.2}, {1, 1}), DataError);
    EXPECT_THROW(auc_binary({0.1, NAN}, {0, 1}), DataError);
}

TEST(AucBinary, ExactAgainstPairEnumerationWithTies) {
    std::mt19937_64 gen(2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + gen() % 199;
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(gen() % 15) / 7.0; // plenty of ties
            labels[i] = static_cast<int>(gen() % 2);
        }
        labels[0] = 0;
        labels[1] = 1;
        EXPECT_EQ(auc_binary(scores, labels), auc_pairs_oracle(scores, labels));
    }
}

TEST(AucBinary, MonotoneAndNegationProperties) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 10 + gen() % 90;
        std::vector<double> s(n), t(n), neg(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(gen() % 2);
            s[i] = normal(gen) + labels[i];
            t[i] = std::exp(3.0 * s[i]) + 7.0;
            neg[i] = -s[i];
        }
        labels[0] = 0;
        labels[1] = 1;
        const double auc = auc_binary(s, labels);
        EXPECT_EQ(auc, auc_binary(t, labels));
        EXPECT_NEAR(auc_binary(neg, labels), 1.0 - auc, 1e-15);
    }
}

TEST(AucMacroOvr, BinaryAndMultiClass) {
    const PredictionSet bin("m", 2,
                            {{"1", 0, 0, {0.9, 0.1}}, {"2", 0, 0, {0.6, 0.4}}, {"3", 1, 0, {0.65, 0.35}},
                             {"4", 1, 1, {0.2, 0.8}}});
    EXPECT_EQ(auc_macro_ovr(bin), 0.75);

    // perfectly separated three-class scores
    const PredictionSet three("m", 3,
                              {{"1", 0, 0, {0.8, 0.1, 0.1}}, {"2", 1, 1, {0.1, 0.8, 0.1}},
                               {"3", 2, 2, {0.1, 0.1, 0.8}}, {"4", 2, 2, {0.2, 0.1, 0.7}}});
    EXPECT_EQ(auc_macro_ovr(three), 1.0);
}

TEST(ReadPredictions, JsonLinesRoundTripAndErrors) {
    TempDir dir;
    const PredictionSet p("resnet-ft", 3,
                          {{"img_2", 1, 1, {0.1, 0.7, 0.2}}, {"img_1", 2, 0, {0.5, 0.2, 0.3}}});
    write_predictions(p, dir / "p.jsonl");
    const PredictionSet back = read_predictions(dir / "p.jsonl");
    EXPECT_EQ(back.model_id(), "resnet-ft");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back.records()[0].example_id, "img_1");
    EXPECT_EQ(back.records()[1].scores, (std::vector<double>{0.1, 0.7, 0.2}));

    {
        std::ofstream out(dir / "bad.jsonl");
        out << R"({"model_id": "m", "num_classes": 2})" << "\n"
            << R"({"example_id": "a", "true": 0, "pred": 0, "scores": [0.9, 0.1]})" << "\n"
            << R"({"example_id": "b", "true": 0, "pred": 0})" << "\n";
    }
    try {
        read_predictions(dir / "bad.jsonl");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.jsonl:3"), std::string::npos);
    }
    EXPECT_THROW(read_predictions(dir / "absent.jsonl"), IoError);
}

TEST(PredictionSimilarity, IndependentPredictorsNearBaseline) {
    std::mt19937_64 gen(4);
    std::bernoulli_distribution ok_a(0.85), ok_b(0.7);
    const int n = 10000;
    std::vector<PredictionRecord> ra, rb;
    for (int i = 0; i < n; ++i) {
        ra.push_back(rec(std::to_string(i), 0, ok_a(gen) ? 0 : 1));
        rb.push_back(rec(std::to_string(i), 0, ok_b(gen) ? 0 : 1));
    }
    const auto r = prediction_similarity(PredictionSet("a", 2, ra), PredictionSet("b", 2, rb));
    const double se = std::sqrt(r.independence_baseline * (1 - r.independence_baseline) / n);
    EXPECT_LE(std::abs(r.similarity - r.independence_baseline), 3 * se);
}
