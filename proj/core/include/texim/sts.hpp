#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "texim/imager.hpp"
#include "texim/layers.hpp"
#include "texim/tokenizer.hpp"

namespace texim::sts {

enum class InputMode {
    kImage,        // quantized pixels, rescaled to [0, 1]
    kFloatVector,  // the un-quantized latent vector
    kTokens,       // the padded token ids of the text
};

std::string to_string(InputMode mode);
InputMode parse_input_mode(const std::string& name);

struct StsConfig {
    std::size_t transformer_blocks = 1;
    std::size_t heads = 4;
    std::size_t model_width = 16;
    std::size_t hidden_width = 32;  // dense layer after concatenation
    double dropout = 0.3;
    double learning_rate = 0.01;
    double grad_clip = 0.0;  // global gradient-norm bound, 0 disables
    std::vector<double> split{0.7, 0.15, 0.15};
    std::size_t patience = 5;
    std::size_t batch_size = 16;
    std::size_t epochs = 50;
    InputMode input_mode = InputMode::kImage;
    bool tie_channels = true;
    bool shared_tanh_weights = false;
    std::size_t seq_len = 512;   // input positions per channel
    std::size_t vocab_size = 0;  // tokens mode only
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const StsConfig& c);
void from_json(const nlohmann::json& j, StsConfig& c);

// One side of a pair. Value modes use `values`; tokens mode uses `tokens`.
struct Channel {
    std::vector<double> values;
    tokenizer::TokenSequence tokens;
};

Channel from_image(const imager::PixelImage& image);
Channel from_vector(std::vector<double> values);
Channel from_tokens(tokenizer::TokenSequence tokens);

struct StsExample {
    std::string id;
    Channel a;
    Channel b;
    int label = 0;  // 1 similar, 0 dissimilar
};

// Input projection, learned positions and TSLFN blocks, mean-pooled.
// Value modes map the scalar at position i to x_i * W[i] + P[i], an affine
// projection with its own weights per position; tokens mode adds P[i] to
// the token embedding.
struct ChannelEncoder {
    nn::Parameter scales;     // L x D, value modes
    nn::Parameter tokens;     // (|V|+1) x D, tokens mode
    nn::Parameter positions;  // L x D
    std::vector<nn::TslfnBlock> blocks;

    static ChannelEncoder create(const std::string& name, const StsConfig& config, Rng& rng);
    void collect(nn::ParameterRefs& out, InputMode mode);
    nn::Var forward(nn::Graph& g, const Channel& channel, const StsConfig& config) const;
};

class StsModel {
public:
    static StsModel create(const StsConfig& config);
    static StsModel load(const std::filesystem::path& checkpoint);
    void save(const std::filesystem::path& checkpoint) const;

    const StsConfig& config() const noexcept { return config_; }
    nn::ParameterRefs parameters();

    // Pooled hidden vector of one channel (0 or 1), 1 x D.
    nn::Var channel_hidden(nn::Graph& g, const Channel& c, int which) const;
    // [h_a, h_b], 1 x 2D.
    nn::Var features(nn::Graph& g, const Channel& a, const Channel& b) const;
    nn::Var logit(nn::Graph& g, const Channel& a, const Channel& b) const;
    nn::Var loss(nn::Graph& g, const StsExample& example) const;
    // Inference: dropout off, deterministic.
    double probability(const Channel& a, const Channel& b) const;

private:
    StsConfig config_;
    std::vector<ChannelEncoder> channels_;  // one when tied
    nn::Dense hidden_;
    nn::Dense output_;
};

struct StsEpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct StsTrainResult {
    StsModel model;
    std::vector<StsEpochLog> log;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
    std::vector<StsExample> train;
    std::vector<StsExample> validation;
    std::vector<StsExample> test;
};

// Adam on binary cross-entropy over the train part of a seeded
// train:validation:test split, patience-based early stopping on validation
// loss with the best parameters restored.
StsTrainResult train_sts(const std::vector<StsExample>& examples, const StsConfig& config);

struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Zero denominators yield 0.
Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

struct Prediction {
    std::string pair_id;
    double probability = 0.0;
    int label = 0;
    int prediction = 0;
};

std::vector<Prediction> predict(const StsModel& model, const std::vector<StsExample>& examples,
                                double threshold = 0.5);
Metrics evaluate(const std::vector<Prediction>& predictions);
Metrics evaluate(const StsModel& model, const std::vector<StsExample>& examples, double threshold = 0.5);

void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& predictions);
void write_log_csv(std::ostream& out, const std::vector<StsEpochLog>& log);
void to_json(nlohmann::json& j, const Metrics& m);

}  // namespace texim::sts
