#include "texim/sts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "texim/checkpoint.hpp"
#include "texim/corpus.hpp"
#include "texim/error.hpp"
#include "texim/optim.hpp"

namespace texim::sts {

using nn::Graph;
using nn::Parameter;
using nn::Tensor;
using nn::Var;

std::string to_string(InputMode mode) {
    switch (mode) {
        case InputMode::kImage: return "image";
        case InputMode::kFloatVector: return "float_vector";
        case InputMode::kTokens: return "tokens";
    }
    return "image";
}

InputMode parse_input_mode(const std::string& name) {
    if (name == "image") return InputMode::kImage;
    if (name == "float_vector") return InputMode::kFloatVector;
    if (name == "tokens") return InputMode::kTokens;
    fail(ErrorCode::kConfig, "sts: unknown input_mode '" + name + "' (expected image, float_vector or tokens)");
}

void StsConfig::validate() const {
    require(model_width >= 1 && hidden_width >= 1 && seq_len >= 1, ErrorCode::kConfig,
            "sts: widths and sequence length must be positive");
    if (transformer_blocks > 0) nn::AttentionConfig{model_width, heads, seq_len}.validate();
    require(dropout >= 0.0 && dropout < 1.0, ErrorCode::kConfig, "sts: dropout must be in [0, 1)");
    require(learning_rate > 0.0, ErrorCode::kConfig, "sts: learning rate must be positive");
    require(grad_clip >= 0.0, ErrorCode::kConfig, "sts: gradient clip norm must be >= 0");
    require(batch_size >= 1 && epochs >= 1, ErrorCode::kConfig, "sts: batch size and epochs must be >= 1");
    require(split.size() == 3, ErrorCode::kConfig, "sts: split must have three ratios (train, validation, test)");
    double total = 0.0;
    for (double r : split) {
        require(r > 0.0, ErrorCode::kConfig, "sts: split ratios must be positive");
        total += r;
    }
    require(std::abs(total - 1.0) < 1e-6, ErrorCode::kConfig, "sts: split ratios must sum to 1");
    require(input_mode != InputMode::kTokens || vocab_size >= 1, ErrorCode::kConfig,
            "sts: tokens mode needs the vocabulary size");
}

void to_json(nlohmann::json& j, const StsConfig& c) {
    j = nlohmann::json{{"transformer_blocks", c.transformer_blocks},
                       {"attention_heads", c.heads},
                       {"model_width", c.model_width},
                       {"hidden_width", c.hidden_width},
                       {"dropout_ratio", c.dropout},
                       {"learning_rate", c.learning_rate},
                       {"gradient_clip_norm", c.grad_clip},
                       {"train_validation_test_split", c.split},
                       {"early_stopping_patience", c.patience},
                       {"batch_size", c.batch_size},
                       {"training_epochs", c.epochs},
                       {"input_mode", to_string(c.input_mode)},
                       {"tie_channels", c.tie_channels},
                       {"shared_tanh_weights", c.shared_tanh_weights},
                       {"seq_len", c.seq_len},
                       {"vocab_size", c.vocab_size},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, StsConfig& c) {
    auto opt = [&j](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    opt("transformer_blocks", c.transformer_blocks);
    opt("attention_heads", c.heads);
    opt("model_width", c.model_width);
    opt("hidden_width", c.hidden_width);
    opt("dropout_ratio", c.dropout);
    opt("learning_rate", c.learning_rate);
    opt("gradient_clip_norm", c.grad_clip);
    opt("train_validation_test_split", c.split);
    opt("early_stopping_patience", c.patience);
    opt("batch_size", c.batch_size);
    opt("training_epochs", c.epochs);
    if (j.contains("input_mode")) c.input_mode = parse_input_mode(j.at("input_mode").get<std::string>());
    opt("tie_channels", c.tie_channels);
    opt("shared_tanh_weights", c.shared_tanh_weights);
    opt("seq_len", c.seq_len);
    opt("vocab_size", c.vocab_size);
    opt("seed", c.seed);
}

Channel from_image(const imager::PixelImage& image) {
    Channel c;
    c.values.assign(image.pixels.begin(), image.pixels.end());
    return c;
}

Channel from_vector(std::vector<double> values) {
    Channel c;
    c.values = std::move(values);
    return c;
}

Channel from_tokens(tokenizer::TokenSequence tokens) {
    Channel c;
    c.tokens = std::move(tokens);
    return c;
}

// ---- model -----------------------------------------------------------------

ChannelEncoder ChannelEncoder::create(const std::string& name, const StsConfig& config, Rng& rng) {
    ChannelEncoder e;
    const std::size_t d = config.model_width;
    if (config.input_mode == InputMode::kTokens) {
        Tensor table = nn::normal_init(config.vocab_size + 1, d, 0.1, rng);
        std::fill(table.row_span(0).begin(), table.row_span(0).end(), 0.0);
        e.tokens = Parameter(name + ".tokens", std::move(table));
    } else {
        e.scales = Parameter(name + ".scales", nn::normal_init(config.seq_len, d, 4.0, rng));
    }
    e.positions = Parameter(name + ".positions", nn::normal_init(config.seq_len, d, 0.1, rng));
    const nn::AttentionConfig att{d, config.heads, config.seq_len};
    for (std::size_t i = 0; i < config.transformer_blocks; ++i)
        e.blocks.push_back(
            nn::TslfnBlock::create(name + ".tslfn" + std::to_string(i), att, rng, config.shared_tanh_weights));
    return e;
}

void ChannelEncoder::collect(nn::ParameterRefs& out, InputMode mode) {
    if (mode == InputMode::kTokens) {
        out.push_back(&tokens);
    } else {
        out.push_back(&scales);
    }
    out.push_back(&positions);
    for (auto& b : blocks) b.collect(out);
}

Var ChannelEncoder::forward(Graph& g, const Channel& channel, const StsConfig& config) const {
    const std::size_t L = config.seq_len;
    Var h;
    Mask valid(L, 1);
    if (config.input_mode == InputMode::kTokens) {
        require(channel.values.empty() && channel.tokens.ids.size() == L, ErrorCode::kInvalidArgument,
                "sts: tokens mode expects a token sequence of length " + std::to_string(L));
        const auto rows = static_cast<long>(tokens.value.rows());
        std::vector<long> pos(L, -1);
        for (std::size_t i = 0; i < L; ++i) {
            const long id = channel.tokens.ids[i];
            require(id >= 0 && id < rows, ErrorCode::kInvalidArgument, "sts: token id outside vocabulary");
            if (id != tokenizer::kPadId) pos[i] = static_cast<long>(i);
        }
        valid = channel.tokens.mask();
        require(std::find(valid.begin(), valid.end(), 1) != valid.end(), ErrorCode::kInvalidArgument,
                "sts: empty token sequence");
        h = nn::add(g, nn::gather_rows(g, g.param(tokens), channel.tokens.ids, tokenizer::kPadId),
                    nn::gather_rows(g, g.param(positions), pos));
    } else {
        require(channel.tokens.ids.empty() && channel.values.size() == L, ErrorCode::kInvalidArgument,
                "sts: " + to_string(config.input_mode) + " mode expects " + std::to_string(L) +
                    " values per channel, got " + std::to_string(channel.values.size()));
        Tensor x = Tensor::matrix(L, config.model_width);
        const double s = config.input_mode == InputMode::kImage ? 1.0 / 255.0 : 1.0;
        for (std::size_t i = 0; i < L; ++i) {
            const double v = channel.values[i];
            require(std::isfinite(v), ErrorCode::kNonFinite, "sts: non-finite input value");
            require(config.input_mode != InputMode::kImage || (v >= 0.0 && v <= 255.0),
                    ErrorCode::kInvalidArgument, "sts: pixel value outside [0, 255]");
            std::fill(x.row_span(i).begin(), x.row_span(i).end(), v * s);
        }
        h = nn::add(g, nn::mul(g, g.constant(std::move(x)), g.param(scales)), g.param(positions));
    }
    for (const auto& b : blocks) h = b.forward(g, h, valid);
    return nn::masked_mean_rows(g, h, valid);
}

StsModel StsModel::create(const StsConfig& config) {
    config.validate();
    StsModel m;
    m.config_ = config;
    Rng rng = Rng::derive(config.seed, 0x575);
    m.channels_.push_back(ChannelEncoder::create("channel0", config, rng));
    if (!config.tie_channels) m.channels_.push_back(ChannelEncoder::create("channel1", config, rng));
    m.hidden_ = nn::Dense::create("head.hidden", 2 * config.model_width, config.hidden_width, rng);
    m.output_ = nn::Dense::create("head.output", config.hidden_width, 1, rng);
    return m;
}

nn::ParameterRefs StsModel::parameters() {
    nn::ParameterRefs out;
    for (auto& c : channels_) c.collect(out, config_.input_mode);
    hidden_.collect(out);
    output_.collect(out);
    return out;
}

Var StsModel::channel_hidden(Graph& g, const Channel& c, int which) const {
    require(which == 0 || which == 1, ErrorCode::kInvalidArgument, "sts: channel index must be 0 or 1");
    const auto& enc = channels_.size() == 1 ? channels_[0] : channels_[static_cast<std::size_t>(which)];
    return enc.forward(g, c, config_);
}

Var StsModel::features(Graph& g, const Channel& a, const Channel& b) const {
    const Var parts[] = {channel_hidden(g, a, 0), channel_hidden(g, b, 1)};
    return nn::concat_cols(g, parts);
}

Var StsModel::logit(Graph& g, const Channel& a, const Channel& b) const {
    Var h = nn::leaky_relu(g, hidden_.forward(g, features(g, a, b)));
    h = nn::dropout(g, h, config_.dropout);
    return output_.forward(g, h);
}

Var StsModel::loss(Graph& g, const StsExample& example) const {
    require(example.label == 0 || example.label == 1, ErrorCode::kInvalidArgument, "sts: label must be 0 or 1");
    return nn::bce_with_logits(g, logit(g, example.a, example.b), static_cast<double>(example.label));
}

double StsModel::probability(const Channel& a, const Channel& b) const {
    Graph g(false);
    return nn::activate(g.value(logit(g, a, b))[0], nn::Activation::kSigmoid);
}

void StsModel::save(const std::filesystem::path& checkpoint) const {
    auto params = const_cast<StsModel*>(this)->parameters();
    nn::save_checkpoint(checkpoint, params);
    nlohmann::json side{{"format", "texim-sts"}, {"version", 1}, {"config", config_}};
    std::ofstream out(checkpoint.string() + ".json", std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + checkpoint.string() + ".json");
    out << side.dump(2) << '\n';
}

StsModel StsModel::load(const std::filesystem::path& checkpoint) {
    std::ifstream in(checkpoint.string() + ".json");
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + checkpoint.string() + ".json");
    nlohmann::json side;
    try {
        in >> side;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kFormat, checkpoint.string() + ".json: " + e.what());
    }
    require(side.value("format", "") == "texim-sts", ErrorCode::kFormat,
            checkpoint.string() + ".json: not an STS checkpoint sidecar");
    StsModel m = create(side.at("config").get<StsConfig>());
    auto params = m.parameters();
    nn::load_checkpoint(checkpoint, params);
    return m;
}

// ---- training --------------------------------------------------------------

namespace {

double mean_loss(const StsModel& model, const std::vector<StsExample>& set, std::uint64_t seed) {
    double total = 0.0;
    for (const auto& ex : set) {
        Graph g(false, seed);
        total += g.value(model.loss(g, ex))[0];
    }
    return total / static_cast<double>(set.size());
}

}  // namespace

StsTrainResult train_sts(const std::vector<StsExample>& examples, const StsConfig& config) {
    config.validate();
    auto parts = corpus::split_items(examples, config.split, config.seed);
    StsTrainResult result{StsModel::create(config), {}, 0, false, std::move(parts[0]), std::move(parts[1]),
                          std::move(parts[2])};
    const auto& train = result.train;
    require(!train.empty() && !result.validation.empty(), ErrorCode::kInvalidArgument,
            "train_sts: split leaves an empty train or validation set");
    const auto positives = std::count_if(train.begin(), train.end(), [](const auto& e) { return e.label == 1; });
    require(positives > 0 && positives < static_cast<long>(train.size()), ErrorCode::kInvalidArgument,
            "train_sts: training set contains a single class");

    StsModel& model = result.model;
    const nn::ParameterRefs params = model.parameters();
    nn::AdamState state;
    const nn::AdamOptions adam{config.learning_rate};

    double best = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_values;
    for (const auto* p : params) best_values.push_back(p->value);
    std::size_t stale = 0;

    std::vector<std::size_t> order(train.size());
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng::derive(config.seed, 0x575e, epoch).shuffle(order);
        double train_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            nn::zero_grad(params);
            const double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t k = start; k < end; ++k) {
                Graph g(true, Rng::mix(Rng::mix(config.seed ^ 0x575u, epoch), order[k]));
                Var l = model.loss(g, train[order[k]]);
                const double v = g.value(l)[0];
                require(std::isfinite(v), ErrorCode::kNonFinite,
                        "train_sts: non-finite loss at epoch " + std::to_string(epoch));
                train_sum += v;
                g.backward(l, inv);
            }
            nn::clip_grad_norm(params, config.grad_clip);
            nn::adam_step(params, state, adam);
        }
        const double val_loss = mean_loss(model, result.validation, config.seed);
        result.log.push_back({epoch, train_sum / static_cast<double>(train.size()), val_loss});
        if (val_loss < best) {
            best = val_loss;
            for (std::size_t i = 0; i < params.size(); ++i) best_values[i] = params[i]->value;
            result.best_epoch = epoch;
            stale = 0;
        } else if (++stale >= config.patience) {
            result.early_stopped = true;
            break;
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
    return result;
}

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    Metrics m{tp, fp, tn, fn};
    const auto n = static_cast<double>(tp + fp + tn + fn);
    m.accuracy = ratio(static_cast<double>(tp + tn), n);
    m.precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
    m.recall = ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    return m;
}

std::vector<Prediction> predict(const StsModel& model, const std::vector<StsExample>& examples, double threshold) {
    std::vector<Prediction> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        const double p = model.probability(ex.a, ex.b);
        out.push_back({ex.id, p, ex.label, p >= threshold ? 1 : 0});
    }
    return out;
}

Metrics evaluate(const std::vector<Prediction>& predictions) {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (const auto& p : predictions) {
        if (p.prediction == 1) {
            (p.label == 1 ? tp : fp)++;
        } else {
            (p.label == 1 ? fn : tn)++;
        }
    }
    return metrics_from_counts(tp, fp, tn, fn);
}

Metrics evaluate(const StsModel& model, const std::vector<StsExample>& examples, double threshold) {
    return evaluate(predict(model, examples, threshold));
}

void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& predictions) {
    out << "pair_id,probability,label,prediction\n" << std::setprecision(17);
    for (const auto& p : predictions)
        out << p.pair_id << ',' << p.probability << ',' << p.label << ',' << p.prediction << '\n';
    out << std::setprecision(6);
}

void write_log_csv(std::ostream& out, const std::vector<StsEpochLog>& log) {
    out << "epoch,train_loss,val_loss\n" << std::setprecision(17);
    for (const auto& e : log) out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
    out << std::setprecision(6);
}

void to_json(nlohmann::json& j, const Metrics& m) {
    j = nlohmann::json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
                       {"f1", m.f1},             {"tp", m.tp},               {"fp", m.fp},
                       {"tn", m.tn},             {"fn", m.fn}};
}

}  // namespace texim::sts
