#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "texim/error.hpp"
#include "texim/gradcheck.hpp"
#include "texim/sts.hpp"

namespace texim::sts {
namespace {

StsConfig small_config(InputMode mode, std::size_t len = 6) {
    StsConfig c;
    c.model_width = 8;
    c.heads = 2;
    c.hidden_width = 8;
    c.seq_len = len;
    c.input_mode = mode;
    c.vocab_size = 10;
    c.seed = 4;
    return c;
}

Channel random_values(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return from_vector(std::move(v));
}

Channel random_image(Rng& rng, std::size_t rows, std::size_t cols) {
    std::vector<std::uint8_t> px(rows * cols);
    for (auto& p : px) p = static_cast<std::uint8_t>(rng.index(256));
    return from_image(imager::reshape(px, {rows, cols, 1}));
}

TEST(StsModel, TiedIdenticalInputsGiveEqualHiddenVectors) {
    Rng rng(1);
    const auto model = StsModel::create(small_config(InputMode::kFloatVector));
    const auto ch = random_values(rng, 6);
    nn::Graph g;
    const nn::Tensor h0 = g.value(model.channel_hidden(g, ch, 0));
    const nn::Tensor h1 = g.value(model.channel_hidden(g, ch, 1));
    EXPECT_EQ(h0, h1);
}

TEST(StsModel, SwappingInputsSwapsFeatureHalves) {
    Rng rng(2);
    const auto model = StsModel::create(small_config(InputMode::kFloatVector));
    const auto a = random_values(rng, 6), b = random_values(rng, 6);
    nn::Graph g;
    const auto ab = g.value(model.features(g, a, b));
    const auto ba = g.value(model.features(g, b, a));
    ASSERT_EQ(ab.size(), 16u);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_EQ(ab[i], ba[i + 8]);
        EXPECT_EQ(ab[i + 8], ba[i]);
    }
}

TEST(StsModel, UntiedChannelsDiffer) {
    Rng rng(3);
    auto c = small_config(InputMode::kFloatVector);
    c.tie_channels = false;
    const auto model = StsModel::create(c);
    const auto ch = random_values(rng, 6);
    nn::Graph g;
    const nn::Tensor h0 = g.value(model.channel_hidden(g, ch, 0));
    const nn::Tensor h1 = g.value(model.channel_hidden(g, ch, 1));
    EXPECT_NE(h0, h1);
}

TEST(StsModel, ProbabilityRangeAndDeterminism) {
    Rng rng(4);
    const auto model = StsModel::create(small_config(InputMode::kImage));
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_image(rng, 2, 3), b = random_image(rng, 2, 3);
        const double p = model.probability(a, b);
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
        EXPECT_EQ(model.probability(a, b), p);
    }
}

TEST(StsModel, ModeMismatchIsError) {
    Rng rng(5);
    const auto image_model = StsModel::create(small_config(InputMode::kImage));
    const auto tokens = from_tokens(tokenizer::pad_ids({1, 2}, 6));
    EXPECT_THROW(image_model.probability(tokens, tokens), Error);
    const auto wrong_len = random_values(rng, 5);
    EXPECT_THROW(image_model.probability(wrong_len, wrong_len), Error);
    const auto out_of_range = from_vector({0, 1, 2, 3, 300, 5});
    EXPECT_THROW(image_model.probability(out_of_range, out_of_range), Error);
    const auto token_model = StsModel::create(small_config(InputMode::kTokens));
    const auto values = random_values(rng, 6);
    EXPECT_THROW(token_model.probability(values, values), Error);
    const auto too_big = from_tokens(tokenizer::pad_ids({1, 11}, 6));
    EXPECT_THROW(token_model.probability(too_big, too_big), Error);
}

TEST(StsModel, GradientCheckAllModes) {
    Rng rng(6);
    for (auto mode : {InputMode::kImage, InputMode::kFloatVector, InputMode::kTokens}) {
        for (bool tied : {true, false}) {
            auto c = small_config(mode);
            c.tie_channels = tied;
            auto model = StsModel::create(c);
            StsExample ex;
            if (mode == InputMode::kImage) {
                ex.a = random_image(rng, 2, 3);
                ex.b = random_image(rng, 2, 3);
            } else if (mode == InputMode::kFloatVector) {
                ex.a = random_values(rng, 6);
                ex.b = random_values(rng, 6);
            } else {
                ex.a = from_tokens(tokenizer::pad_ids({3, 1, 9}, 6));
                ex.b = from_tokens(tokenizer::pad_ids({2, 10, 4, 4, 7}, 6));
            }
            ex.label = 1;
            auto params = model.parameters();
            nn::GradCheckOptions options;
            options.training = true;
            options.seed = 21;
            const auto report =
                nn::gradient_check([&](nn::Graph& g) { return model.loss(g, ex); }, params, options);
            EXPECT_LT(report.max_relative_error, 1e-4) << to_string(mode) << " " << report.worst_parameter;
        }
    }
}

std::vector<StsExample> separable_examples(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<StsExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        std::vector<double> a(6), b(6);
        for (std::size_t k = 0; k < 6; ++k) {
            a[k] = (label ? 1.0 : -1.0) + 0.1 * rng.normal();
            b[k] = 0.1 * rng.normal();
        }
        out.push_back({"p" + std::to_string(i), from_vector(a), from_vector(b), label});
    }
    return out;
}

TEST(TrainSts, LinearlySeparableLossFalls) {
    auto c = small_config(InputMode::kFloatVector);
    c.epochs = 30;
    const auto r = train_sts(separable_examples(80, 7), c);
    EXPECT_LT(r.log.back().train_loss, 0.1);
    EXPECT_EQ(evaluate(r.model, r.test).accuracy, 1.0);
}

TEST(TrainSts, SplitSizes) {
    auto c = small_config(InputMode::kFloatVector);
    c.epochs = 1;
    const auto r = train_sts(separable_examples(100, 8), c);
    EXPECT_EQ(r.train.size(), 70u);
    EXPECT_EQ(r.validation.size(), 15u);
    EXPECT_EQ(r.test.size(), 15u);
}

TEST(TrainSts, PatienceHonored) {
    auto c = small_config(InputMode::kFloatVector);
    c.epochs = 200;
    c.learning_rate = 0.05;
    // Labels carry no signal, so validation loss stops improving quickly.
    auto examples = separable_examples(60, 9);
    Rng rng(10);
    for (auto& e : examples) e.label = static_cast<int>(rng.index(2));
    const auto r = train_sts(examples, c);
    ASSERT_TRUE(r.early_stopped);
    EXPECT_EQ(r.log.size(), r.best_epoch + 1 + c.patience);
}

TEST(TrainSts, DeterministicUnderSeed) {
    auto c = small_config(InputMode::kFloatVector);
    c.epochs = 3;
    const auto examples = separable_examples(40, 11);
    const auto a = train_sts(examples, c);
    const auto b = train_sts(examples, c);
    auto pa = const_cast<StsModel&>(a.model).parameters();
    auto pb = const_cast<StsModel&>(b.model).parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
}

TEST(TrainSts, SingleClassIsError) {
    auto examples = separable_examples(30, 12);
    for (auto& e : examples) e.label = 1;
    EXPECT_THROW(train_sts(examples, small_config(InputMode::kFloatVector)), Error);
}

TEST(Metrics, FromCounts) {
    const auto perfect = metrics_from_counts(3, 0, 4, 0);
    EXPECT_EQ(perfect.accuracy, 1.0);
    EXPECT_EQ(perfect.f1, 1.0);
    const auto m = metrics_from_counts(2, 1, 0, 1);
    EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.f1, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
    const auto none = metrics_from_counts(0, 0, 5, 0);
    EXPECT_EQ(none.precision, 0.0);
    EXPECT_EQ(none.f1, 0.0);
    EXPECT_EQ(none.accuracy, 1.0);
}

TEST(Metrics, FromPredictions) {
    const std::vector<Prediction> preds{{"a", 0.9, 1, 1}, {"b", 0.8, 0, 1}, {"c", 0.2, 1, 0}, {"d", 0.6, 1, 1}};
    const auto m = evaluate(preds);
    EXPECT_EQ(m.tp, 2u);
    EXPECT_EQ(m.fp, 1u);
    EXPECT_EQ(m.fn, 1u);
    EXPECT_EQ(m.tn, 0u);
    std::ostringstream csv;
    write_predictions_csv(csv, preds);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "pair_id,probability,label,prediction");
    const nlohmann::json j = m;
    EXPECT_TRUE(j.contains("accuracy"));
    EXPECT_TRUE(j.contains("f1"));
}

TEST(StsConfig, JsonRoundTripAndValidation) {
    auto c = small_config(InputMode::kTokens);
    c.tie_channels = false;
    nlohmann::json j = c;
    EXPECT_EQ(nlohmann::json(j.get<StsConfig>()), j);
    auto bad = c;
    bad.split = {0.7, 0.2, 0.2};
    EXPECT_THROW(bad.validate(), Error);
    EXPECT_THROW(parse_input_mode("pixels"), Error);
}

TEST(StsModel, SaveLoadRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "texim_sts_save";
    std::filesystem::create_directories(dir);
    Rng rng(13);
    auto c = small_config(InputMode::kImage);
    c.tie_channels = false;
    const auto model = StsModel::create(c);
    model.save(dir / "s.ckpt");
    const auto back = StsModel::load(dir / "s.ckpt");
    const auto a = random_image(rng, 2, 3), b = random_image(rng, 2, 3);
    EXPECT_EQ(back.probability(a, b), model.probability(a, b));
    EXPECT_FALSE(back.config().tie_channels);
    std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace texim::sts
