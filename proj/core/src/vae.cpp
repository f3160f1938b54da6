#include "texim/vae.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "texim/checkpoint.hpp"
#include "texim/error.hpp"
#include "texim/optim.hpp"

namespace texim::vae {

using nn::Graph;
using nn::Parameter;
using nn::Tensor;
using nn::Var;

void VaeConfig::validate() const {
    require(seq_len >= 1, ErrorCode::kConfig, "vae: sequence length must be >= 1");
    require(model_width >= 1 && latent_dim >= 1, ErrorCode::kConfig, "vae: widths must be positive");
    require(vocab_size >= 1, ErrorCode::kConfig, "vae: vocabulary size must be set");
    if (!conv_only && transformer_blocks > 0) {
        nn::AttentionConfig{model_width, heads, seq_len}.validate();
    }
    require(conv_width >= 1, ErrorCode::kConfig, "vae: convolution filter width must be >= 1");
    require(dropout >= 0.0 && dropout < 1.0, ErrorCode::kConfig, "vae: dropout must be in [0, 1)");
    require(learning_rate > 0.0, ErrorCode::kConfig, "vae: learning rate must be positive");
    require(grad_clip >= 0.0, ErrorCode::kConfig, "vae: gradient clip norm must be >= 0");
    require(batch_size >= 1 && epochs >= 1, ErrorCode::kConfig, "vae: batch size and epochs must be >= 1");
    require(split.size() == 2, ErrorCode::kConfig, "vae: split must have two ratios (train, validation)");
    require(std::abs(split[0] + split[1] - 1.0) < 1e-6 && split[0] > 0.0 && split[1] > 0.0,
            ErrorCode::kConfig, "vae: split ratios must be positive and sum to 1");
    require(position_offset >= 0 && position_step >= 0, ErrorCode::kConfig,
            "vae: position offset and step must be non-negative");
}

void to_json(nlohmann::json& j, const VaeConfig& c) {
    j = nlohmann::json{{"seq_len", c.seq_len},
                       {"model_width", c.model_width},
                       {"latent_dim", c.latent_dim},
                       {"vocab_size", c.vocab_size},
                       {"transformer_blocks", c.transformer_blocks},
                       {"attention_heads", c.heads},
                       {"conv_blocks", c.conv_blocks},
                       {"conv_filter_width", c.conv_width},
                       {"dropout_ratio", c.dropout},
                       {"learning_rate", c.learning_rate},
                       {"batch_size", c.batch_size},
                       {"training_epochs", c.epochs},
                       {"early_stopping_patience", c.patience},
                       {"train_validation_split", c.split},
                       {"anneal_b", c.anneal_b},
                       {"gradient_clip_norm", c.grad_clip},
                       {"position_offset", c.position_offset},
                       {"position_step", c.position_step},
                       {"seed", c.seed},
                       {"conv_only", c.conv_only},
                       {"shared_tanh_weights", c.shared_tanh_weights},
                       {"reconstruction", c.reconstruction == Reconstruction::kTokens ? "tokens" : "embeddings"}};
}

void from_json(const nlohmann::json& j, VaeConfig& c) {
    auto opt = [&j](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    opt("seq_len", c.seq_len);
    opt("model_width", c.model_width);
    opt("latent_dim", c.latent_dim);
    opt("vocab_size", c.vocab_size);
    opt("transformer_blocks", c.transformer_blocks);
    opt("attention_heads", c.heads);
    opt("conv_blocks", c.conv_blocks);
    opt("conv_filter_width", c.conv_width);
    opt("dropout_ratio", c.dropout);
    opt("learning_rate", c.learning_rate);
    opt("batch_size", c.batch_size);
    opt("training_epochs", c.epochs);
    opt("early_stopping_patience", c.patience);
    opt("train_validation_split", c.split);
    opt("anneal_b", c.anneal_b);
    opt("gradient_clip_norm", c.grad_clip);
    opt("position_offset", c.position_offset);
    opt("position_step", c.position_step);
    opt("seed", c.seed);
    opt("conv_only", c.conv_only);
    opt("shared_tanh_weights", c.shared_tanh_weights);
    if (j.contains("reconstruction")) {
        const auto r = j.at("reconstruction").get<std::string>();
        require(r == "tokens" || r == "embeddings", ErrorCode::kConfig,
                "vae: reconstruction must be 'tokens' or 'embeddings'");
        c.reconstruction = r == "tokens" ? Reconstruction::kTokens : Reconstruction::kEmbeddings;
    }
}

double anneal_weight(double epoch, const AnnealSchedule& schedule) {
    require(schedule.total_epochs >= 1, ErrorCode::kInvalidArgument, "anneal_weight: N must be >= 1");
    const double x = epoch / static_cast<double>(schedule.total_epochs) + schedule.b;
    return 1.0 / (1.0 + std::exp(-x));
}

double kl_gaussian(std::span<const double> mu, std::span<const double> logvar) {
    require(mu.size() == logvar.size(), ErrorCode::kShapeMismatch, "kl_gaussian: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) kl += mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i];
    return 0.5 * kl;
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar,
                                   std::span<const double> eps) {
    require(mu.size() == logvar.size() && mu.size() == eps.size(), ErrorCode::kShapeMismatch,
            "reparameterize: size mismatch");
    std::vector<double> z(mu.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::exp(0.5 * logvar[i]) * eps[i] + mu[i];
    return z;
}

Var reparameterize(Graph& g, Var mu, Var logvar, const Tensor& eps) {
    Var sigma = nn::exp(g, nn::scale(g, logvar, 0.5));
    return nn::add(g, mu, nn::mul(g, sigma, g.constant(eps)));
}

// ---- embeddings ------------------------------------------------------------

EmbeddingTable EmbeddingTable::create(const std::string& name, std::size_t vocab_size, std::size_t seq_len,
                                      std::size_t width, long offset, long step, Rng& rng) {
    EmbeddingTable t;
    t.offset = offset;
    t.step = step;
    Tensor tok = nn::normal_init(vocab_size + 1, width, 0.1, rng);
    std::fill(tok.row_span(0).begin(), tok.row_span(0).end(), 0.0);
    t.tokens = Parameter(name + ".tokens", std::move(tok));
    const auto rows = static_cast<std::size_t>(offset + static_cast<long>(seq_len - 1) * step + 1);
    t.positions = Parameter(name + ".positions", nn::normal_init(rows, width, 0.1, rng));
    return t;
}

void EmbeddingTable::collect(nn::ParameterRefs& out) {
    out.push_back(&tokens);
    out.push_back(&positions);
}

std::vector<long> EmbeddingTable::position_indices(const tokenizer::TokenSequence& seq) const {
    std::vector<long> idx(seq.ids.size(), -1);
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
        if (seq.ids[i] != tokenizer::kPadId) idx[i] = offset + static_cast<long>(i) * step;
    }
    return idx;
}

Var EmbeddingTable::embed(Graph& g, const tokenizer::TokenSequence& seq) const {
    const auto vocab_rows = static_cast<long>(tokens.value.rows());
    for (long id : seq.ids) {
        require(id >= 0 && id < vocab_rows, ErrorCode::kInvalidArgument,
                "embed: token id " + std::to_string(id) + " outside vocabulary of " +
                    std::to_string(vocab_rows - 1));
    }
    const auto pos = position_indices(seq);
    for (long p : pos) {
        require(p < static_cast<long>(positions.value.rows()), ErrorCode::kInvalidArgument,
                "embed: sequence longer than the configured length");
    }
    Var tok = nn::gather_rows(g, g.param(tokens), seq.ids, tokenizer::kPadId);
    Var posv = nn::gather_rows(g, g.param(positions), pos);
    return nn::add(g, tok, posv);
}

// ---- model -----------------------------------------------------------------

VaeModel VaeModel::create(const VaeConfig& config) {
    config.validate();
    VaeModel m;
    m.config_ = config;
    Rng rng = Rng::derive(config.seed, 0x7ae);
    const std::size_t d = config.model_width, L = config.seq_len;
    const nn::AttentionConfig att{d, config.heads, L};
    m.embeddings_ = EmbeddingTable::create("embed", config.vocab_size, L, d, config.position_offset,
                                           config.position_step, rng);
    for (std::size_t i = 0; i < config.conv_blocks; ++i)
        m.enc_conv_.push_back(nn::ConvBlock::create("enc.conv" + std::to_string(i), d, config.conv_width, rng));
    if (!config.conv_only) {
        for (std::size_t i = 0; i < config.transformer_blocks; ++i)
            m.enc_tslfn_.push_back(
                nn::TslfnBlock::create("enc.tslfn" + std::to_string(i), att, rng, config.shared_tanh_weights));
    }
    m.mu_head_ = nn::Dense::create("enc.mu", d, config.latent_dim, rng);
    m.logvar_head_ = nn::Dense::create("enc.logvar", d, config.latent_dim, rng);
    m.dec_in_ = nn::Dense::create("dec.in", config.latent_dim, L * d, rng);
    if (!config.conv_only) {
        for (std::size_t i = 0; i < config.transformer_blocks; ++i)
            m.dec_tslfn_.push_back(
                nn::TslfnBlock::create("dec.tslfn" + std::to_string(i), att, rng, config.shared_tanh_weights));
    }
    for (std::size_t i = 0; i < config.conv_blocks; ++i)
        m.dec_conv_.push_back(nn::ConvBlock::create("dec.conv" + std::to_string(i), d, config.conv_width, rng));
    const std::size_t out = config.reconstruction == Reconstruction::kTokens ? config.vocab_size + 1 : d;
    m.dec_out_ = nn::Dense::create("dec.out", d, out, rng);
    // Small output weights keep the initial token distribution near uniform.
    for (double& w : m.dec_out_.weight.value.values()) w *= 0.1;
    return m;
}

nn::ParameterRefs VaeModel::parameters() {
    nn::ParameterRefs out;
    embeddings_.collect(out);
    for (auto& c : enc_conv_) c.collect(out);
    for (auto& b : enc_tslfn_) b.collect(out);
    mu_head_.collect(out);
    logvar_head_.collect(out);
    dec_in_.collect(out);
    for (auto& b : dec_tslfn_) b.collect(out);
    for (auto& c : dec_conv_) c.collect(out);
    dec_out_.collect(out);
    return out;
}

Var VaeModel::embed(Graph& g, const tokenizer::TokenSequence& tokens) const {
    return embeddings_.embed(g, tokens);
}

VaeModel::Encoded VaeModel::encode(Graph& g, Var embedded, MaskView valid) const {
    require(std::find(valid.begin(), valid.end(), 1) != valid.end(), ErrorCode::kInvalidArgument,
            "encode: every position is padding");
    Var h = embedded;
    for (const auto& c : enc_conv_) h = c.forward(g, h, valid, nn::Activation::kGelu, config_.dropout);
    for (const auto& b : enc_tslfn_) h = b.forward(g, h, valid);
    Var pooled = nn::masked_mean_rows(g, h, valid);
    return {mu_head_.forward(g, pooled), logvar_head_.forward(g, pooled)};
}

Var VaeModel::decode(Graph& g, Var z) const {
    const std::size_t L = config_.seq_len, d = config_.model_width;
    require(g.value(z).size() == config_.latent_dim, ErrorCode::kShapeMismatch, "decode: latent size");
    Var h = nn::reshape(g, dec_in_.forward(g, z), L, d);
    const Mask all(L, 1);
    for (const auto& b : dec_tslfn_) h = b.forward(g, h, all);
    for (const auto& c : dec_conv_) h = c.forward(g, h, all, nn::Activation::kGelu, config_.dropout);
    return dec_out_.forward(g, h);
}

Var VaeModel::loss(Graph& g, const tokenizer::TokenSequence& tokens, double anneal_weight,
                   LossParts* parts) const {
    require(tokens.ids.size() == config_.seq_len, ErrorCode::kShapeMismatch,
            "vae loss: sequence must be padded to the configured length");
    const Mask valid = tokens.mask();
    Var embedded = embed(g, tokens);
    const Encoded enc = encode(g, embedded, valid);
    Tensor eps = Tensor::matrix(1, config_.latent_dim);
    for (double& e : eps.values()) e = g.rng().normal();
    Var z = reparameterize(g, enc.mu, enc.logvar, eps);
    Var out = decode(g, z);
    Var recon = config_.reconstruction == Reconstruction::kTokens
                    ? nn::softmax_cross_entropy(g, out, tokens.ids, valid)
                    : nn::masked_mse(g, out, g.value(embedded), valid);
    Var kl = nn::kl_divergence(g, enc.mu, enc.logvar);
    Var total = nn::add(g, nn::scale(g, kl, anneal_weight), recon);
    if (parts) {
        parts->kl = g.value(kl)[0];
        parts->reconstruction = g.value(recon)[0];
        parts->anneal_weight = anneal_weight;
        parts->total = g.value(total)[0];
    }
    return total;
}

LatentCode VaeModel::encode_sequence(const tokenizer::TokenSequence& tokens) const {
    Graph g(false);
    const Mask valid = tokens.mask();
    const Encoded enc = encode(g, embed(g, tokens), valid);
    LatentCode code;
    const auto mu = g.value(enc.mu).values();
    const auto lv = g.value(enc.logvar).values();
    code.mu.assign(mu.begin(), mu.end());
    code.logvar.assign(lv.begin(), lv.end());
    code.z = code.mu;
    return code;
}

void VaeModel::save(const std::filesystem::path& checkpoint) const {
    auto params = const_cast<VaeModel*>(this)->parameters();
    nn::save_checkpoint(checkpoint, params);
    nlohmann::json side{{"format", "texim-vae"}, {"version", 1}, {"config", config_}};
    std::ofstream out(checkpoint.string() + ".json", std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + checkpoint.string() + ".json");
    out << side.dump(2) << '\n';
}

VaeModel VaeModel::load(const std::filesystem::path& checkpoint) {
    std::ifstream in(checkpoint.string() + ".json");
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + checkpoint.string() + ".json");
    nlohmann::json side;
    try {
        in >> side;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kFormat, checkpoint.string() + ".json: " + e.what());
    }
    require(side.value("format", "") == "texim-vae", ErrorCode::kFormat,
            checkpoint.string() + ".json: not a VAE checkpoint sidecar");
    VaeModel m = create(side.at("config").get<VaeConfig>());
    auto params = m.parameters();
    nn::load_checkpoint(checkpoint, params);
    return m;
}

// ---- training --------------------------------------------------------------

namespace {

std::vector<Tensor> snapshot(const nn::ParameterRefs& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto* p : params) out.push_back(p->value);
    return out;
}

void restore(const nn::ParameterRefs& params, const std::vector<Tensor>& values) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

TrainResult train_vae(const std::vector<tokenizer::TokenSequence>& corpus, const VaeConfig& config) {
    config.validate();
    require(corpus.size() >= config.batch_size, ErrorCode::kInvalidArgument,
            "train_vae: corpus of " + std::to_string(corpus.size()) + " sequences is smaller than one batch of " +
                std::to_string(config.batch_size));
    std::vector<std::size_t> all(corpus.size());
    std::iota(all.begin(), all.end(), 0);
    auto parts = corpus::split_items(all, config.split, config.seed);
    const std::vector<std::size_t>& train = parts[0];
    const std::vector<std::size_t>& val = parts[1];
    require(!train.empty() && !val.empty(), ErrorCode::kInvalidArgument,
            "train_vae: split leaves an empty train or validation set");

    TrainResult result{VaeModel::create(config), {}, 0, false};
    VaeModel& model = result.model;
    const nn::ParameterRefs params = model.parameters();
    nn::AdamState state;
    const nn::AdamOptions adam{config.learning_rate};
    const AnnealSchedule schedule{config.epochs, config.anneal_b};

    double best = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_values = snapshot(params);
    std::size_t stale = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double wa = anneal_weight(static_cast<double>(epoch), schedule);
        std::vector<std::size_t> order = train;
        Rng::derive(config.seed, 0xe90c, epoch).shuffle(order);

        double train_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            nn::zero_grad(params);
            const double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t k = start; k < end; ++k) {
                Graph g(true, Rng::mix(Rng::mix(config.seed, epoch), order[k]));
                Var l = model.loss(g, corpus[order[k]], wa);
                const double v = g.value(l)[0];
                require(std::isfinite(v), ErrorCode::kNonFinite,
                        "train_vae: non-finite loss at epoch " + std::to_string(epoch) + ", sequence " +
                            std::to_string(order[k]));
                train_sum += v;
                g.backward(l, inv);
            }
            nn::clip_grad_norm(params, config.grad_clip);
            nn::adam_step(params, state, adam);
        }

        double val_sum = 0.0;
        for (std::size_t idx : val) {
            Graph g(false, Rng::mix(config.seed ^ 0x7a1u, idx));
            val_sum += g.value(model.loss(g, corpus[idx], wa))[0];
        }
        const double val_loss = val_sum / static_cast<double>(val.size());
        require(std::isfinite(val_loss), ErrorCode::kNonFinite,
                "train_vae: non-finite validation loss at epoch " + std::to_string(epoch));
        result.log.push_back({epoch, train_sum / static_cast<double>(order.size()), val_loss, wa});

        if (val_loss < best) {
            best = val_loss;
            best_values = snapshot(params);
            result.best_epoch = epoch;
            stale = 0;
        } else if (++stale >= config.patience) {
            result.early_stopped = true;
            break;
        }
    }
    restore(params, best_values);
    return result;
}

void write_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
    out << "epoch,train_loss,val_loss,W_a\n";
    out << std::setprecision(17);
    for (const auto& e : log)
        out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.anneal_weight << '\n';
    out << std::setprecision(6);
}

std::vector<double> project(std::string_view text, const tokenizer::Vocabulary& vocab, const VaeModel& model,
                            const corpus::CleanOptions& clean) {
    const std::string cleaned = corpus::clean_text(text, clean);
    const auto tokens = tokenizer::tokenize(cleaned, vocab, model.config().seq_len);
    return model.encode_sequence(tokens).mu;
}

}  // namespace texim::vae
