#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "texim/corpus.hpp"
#include "texim/layers.hpp"
#include "texim/tokenizer.hpp"

namespace texim::vae {

enum class Reconstruction {
    kTokens,      // cross-entropy against the input token ids
    kEmbeddings,  // mean squared error against the embedded input
};

struct VaeConfig {
    std::size_t seq_len = 64;      // L
    std::size_t model_width = 32;  // D, also the embedding width
    std::size_t latent_dim = 512;  // dim_e
    std::size_t vocab_size = 0;    // |V|, taken from the vocabulary
    std::size_t transformer_blocks = 2;
    std::size_t heads = 4;
    std::size_t conv_blocks = 2;
    std::size_t conv_width = 3;
    double dropout = 0.3;
    double learning_rate = 0.01;
    std::size_t batch_size = 16;
    std::size_t epochs = 15;
    std::size_t patience = 2;
    std::vector<double> split{0.8, 0.2};
    double anneal_b = 0.0;
    double grad_clip = 1.0;    // global gradient-norm bound, 0 disables
    long position_offset = 1;  // theta
    long position_step = 1;    // delta
    std::uint64_t seed = 0;
    bool conv_only = false;
    bool shared_tanh_weights = false;
    Reconstruction reconstruction = Reconstruction::kTokens;

    void validate() const;
};

void to_json(nlohmann::json& j, const VaeConfig& c);
void from_json(const nlohmann::json& j, VaeConfig& c);

struct AnnealSchedule {
    std::size_t total_epochs = 15;  // N
    double b = 0.0;
};

// W_a = 1 / (1 + exp(-(n / N + b))).
double anneal_weight(double epoch, const AnnealSchedule& schedule);

// 0.5 * sum_j (mu_j^2 + sigma_j^2 - 1 - log sigma_j^2) against N(0, I).
double kl_gaussian(std::span<const double> mu, std::span<const double> logvar);

// z = exp(logvar / 2) * eps + mu.
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar,
                                   std::span<const double> eps);
nn::Var reparameterize(nn::Graph& g, nn::Var mu, nn::Var logvar, const nn::Tensor& eps);

// Token table has |V|+1 rows with row 0 (padding) held at zero; position
// table covers indices theta .. theta + (L-1) delta. Padding positions map
// to index -1, which contributes nothing.
struct EmbeddingTable {
    nn::Parameter tokens;
    nn::Parameter positions;
    long offset = 1;
    long step = 1;

    static EmbeddingTable create(const std::string& name, std::size_t vocab_size, std::size_t seq_len,
                                 std::size_t width, long offset, long step, Rng& rng);
    void collect(nn::ParameterRefs& out);
    std::vector<long> position_indices(const tokenizer::TokenSequence& tokens) const;
    // Token embedding plus position embedding, L x D; padding rows are zero.
    nn::Var embed(nn::Graph& g, const tokenizer::TokenSequence& tokens) const;
};

struct LatentCode {
    std::vector<double> mu;
    std::vector<double> logvar;
    std::vector<double> z;
};

struct LossParts {
    double kl = 0.0;
    double reconstruction = 0.0;
    double anneal_weight = 0.0;
    double total = 0.0;
};

class VaeModel {
public:
    static VaeModel create(const VaeConfig& config);
    static VaeModel load(const std::filesystem::path& checkpoint);

    // Writes the parameter file and a JSON sidecar (<checkpoint>.json).
    void save(const std::filesystem::path& checkpoint) const;

    const VaeConfig& config() const noexcept { return config_; }
    nn::ParameterRefs parameters();

    struct Encoded {
        nn::Var mu;
        nn::Var logvar;
    };
    nn::Var embed(nn::Graph& g, const tokenizer::TokenSequence& tokens) const;
    // conv blocks -> TSLFN blocks -> masked mean -> (mu, logvar) heads.
    Encoded encode(nn::Graph& g, nn::Var embedded, MaskView valid) const;
    // Logits over |V|+1 classes per position (L x (|V|+1)), or an L x D
    // sequence in embedding-reconstruction mode.
    nn::Var decode(nn::Graph& g, nn::Var z) const;
    // W_a * KL + reconstruction for one sequence; noise comes from the graph.
    nn::Var loss(nn::Graph& g, const tokenizer::TokenSequence& tokens, double anneal_weight,
                 LossParts* parts = nullptr) const;

    // Inference-mode mean and log-variance (no dropout, no sampling).
    LatentCode encode_sequence(const tokenizer::TokenSequence& tokens) const;

private:
    VaeConfig config_;
    EmbeddingTable embeddings_;
    std::vector<nn::ConvBlock> enc_conv_;
    std::vector<nn::TslfnBlock> enc_tslfn_;
    nn::Dense mu_head_;
    nn::Dense logvar_head_;
    nn::Dense dec_in_;
    std::vector<nn::TslfnBlock> dec_tslfn_;
    std::vector<nn::ConvBlock> dec_conv_;
    nn::Dense dec_out_;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double anneal_weight = 0.0;
};

struct TrainResult {
    VaeModel model;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
};

// Mini-batch Adam over the 80:20 train/validation split with annealed KL
// weight, early stopping on validation loss and restoration of the best
// parameters.
TrainResult train_vae(const std::vector<tokenizer::TokenSequence>& corpus, const VaeConfig& config);

void write_log_csv(std::ostream& out, const std::vector<EpochLog>& log);

// clean -> tokenize -> embed -> encode; returns the posterior mean.
std::vector<double> project(std::string_view text, const tokenizer::Vocabulary& vocab, const VaeModel& model,
                            const corpus::CleanOptions& clean = {});

}  // namespace texim::vae
