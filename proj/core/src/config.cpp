#include "texim/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>

#include <nlohmann/json.hpp>

#include "texim/error.hpp"

namespace texim::config {

using nlohmann::json;

std::string to_string(Variant v) {
    switch (v) {
        case Variant::kFull: return "texim-fast";
        case Variant::kFastC: return "fast-c";
        case Variant::kTexFast: return "tex-fast";
        case Variant::kDiscrete: return "discrete";
    }
    return "texim-fast";
}

Variant parse_variant(const std::string& name) {
    if (name == "full" || name == "texim-fast") return Variant::kFull;
    if (name == "fast-c") return Variant::kFastC;
    if (name == "tex-fast") return Variant::kTexFast;
    if (name == "discrete") return Variant::kDiscrete;
    fail(ErrorCode::kConfig, "unknown ablation '" + name + "' (expected fast-c, tex-fast or discrete)");
}

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
    if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

std::filesystem::path RunConfig::variant_dir(Variant v) const { return output_dir() / to_string(v); }

void RunConfig::validate() const {
    require(vocab_size >= 2, ErrorCode::kConfig, "tokenizer.vocab_size must be at least 2");
    vae::VaeConfig v = vae;
    v.vocab_size = vocab_size;
    v.validate();
    image.validate();
    require(image.pixel_count() == vae.latent_dim, ErrorCode::kConfig,
            "image rows*cols*channels = " + std::to_string(image.pixel_count()) +
                " must equal texim_fast.latent_dim = " + std::to_string(vae.latent_dim));
    sts::StsConfig s = sts;
    s.seq_len = vae.latent_dim;
    s.vocab_size = vocab_size;
    s.input_mode = sts::InputMode::kImage;
    s.validate();
    if (sts.transformer_blocks > 0) nn::AttentionConfig{sts.model_width, sts.heads, vae.seq_len}.validate();
    require(sts_threshold > 0.0 && sts_threshold < 1.0, ErrorCode::kConfig, "sts.threshold must be in (0, 1)");
    require(shuffle_ratio >= 0.0 && shuffle_ratio <= 1.0, ErrorCode::kConfig,
            "sts_pairs.shuffle_ratio must be in [0, 1]");
    require(report.max_pairs >= 1, ErrorCode::kConfig, "report.max_pairs must be >= 1");
    require(memory.plain_text_bytes > 0.0 && memory.sequence_tokens > 0 && memory.word2vec_dims > 0 &&
                memory.bert_dims > 0 && memory.sequence_embedding_dims > 0 && memory.float_bytes > 0 &&
                memory.rgb_channels > 0,
            ErrorCode::kConfig, "memory_report values must be positive");
    require(!paths.output_dir.empty(), ErrorCode::kConfig, "paths.output_dir must be set");
}

namespace {

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
    require(j.is_object(), ErrorCode::kConfig, "config section '" + section + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
        require(ok, ErrorCode::kConfig, "unknown key '" + key + "' in config section '" + section + "'");
    }
}

template <typename T>
void opt(const json& j, const char* key, T& field) {
    if (j.contains(key)) j.at(key).get_to(field);
}

std::filesystem::path opt_path(const json& j, const char* key, const std::filesystem::path& fallback) {
    return j.contains(key) ? std::filesystem::path(j.at(key).get<std::string>()) : fallback;
}

}  // namespace

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    RunConfig c;
    c.base_dir = base_dir;
    try {
        check_keys(j, "<root>",
                   {"seed", "paths", "preprocessing", "tokenizer", "texim_fast", "sts", "image", "sts_pairs",
                    "report", "memory_report"});
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            check_keys(p, "paths", {"corpus", "input", "pairs", "image_pairs", "output_dir"});
            c.paths.corpus = opt_path(p, "corpus", c.paths.corpus);
            c.paths.input = opt_path(p, "input", c.paths.input);
            c.paths.pairs = opt_path(p, "pairs", c.paths.pairs);
            c.paths.image_pairs = opt_path(p, "image_pairs", c.paths.image_pairs);
            c.paths.output_dir = opt_path(p, "output_dir", c.paths.output_dir);
        }
        if (j.contains("preprocessing")) {
            check_keys(j.at("preprocessing"), "preprocessing", {"lowercase"});
            opt(j.at("preprocessing"), "lowercase", c.preprocessing.lowercase);
        }
        if (j.contains("tokenizer")) {
            check_keys(j.at("tokenizer"), "tokenizer", {"vocab_size"});
            opt(j.at("tokenizer"), "vocab_size", c.vocab_size);
        }
        if (j.contains("texim_fast")) {
            const auto& t = j.at("texim_fast");
            check_keys(t, "texim_fast",
                       {"seq_len", "model_width", "latent_dim", "transformer_blocks", "attention_heads",
                        "conv_blocks", "conv_filter_width", "dropout_ratio", "learning_rate", "batch_size",
                        "training_epochs", "early_stopping_patience", "train_validation_split", "anneal_b",
                        "gradient_clip_norm", "position_offset", "position_step", "conv_only",
                        "shared_tanh_weights", "reconstruction"});
            t.get_to(c.vae);
        }
        if (j.contains("sts")) {
            json s = j.at("sts");
            check_keys(s, "sts",
                       {"transformer_blocks", "attention_heads", "model_width", "hidden_width", "dropout_ratio",
                        "learning_rate", "gradient_clip_norm", "train_validation_test_split",
                        "early_stopping_patience", "batch_size", "training_epochs", "tie_channels",
                        "shared_tanh_weights", "threshold"});
            opt(s, "threshold", c.sts_threshold);
            s.erase("threshold");
            s.get_to(c.sts);
        }
        if (j.contains("image")) {
            const auto& im = j.at("image");
            check_keys(im, "image", {"rows", "cols", "channels", "rounding"});
            opt(im, "rows", c.image.rows);
            opt(im, "cols", c.image.cols);
            opt(im, "channels", c.image.channels);
            if (im.contains("rounding")) {
                const auto r = im.at("rounding").get<std::string>();
                require(r == "truncate" || r == "nearest", ErrorCode::kConfig,
                        "image.rounding must be 'truncate' or 'nearest'");
                c.rounding = r == "truncate" ? imager::Rounding::kTruncate : imager::Rounding::kNearest;
            }
        }
        if (j.contains("sts_pairs")) {
            check_keys(j.at("sts_pairs"), "sts_pairs", {"shuffle_ratio"});
            opt(j.at("sts_pairs"), "shuffle_ratio", c.shuffle_ratio);
        }
        if (j.contains("report")) {
            check_keys(j.at("report"), "report", {"max_pairs"});
            opt(j.at("report"), "max_pairs", c.report.max_pairs);
        }
        if (j.contains("memory_report")) {
            const auto& m = j.at("memory_report");
            check_keys(m, "memory_report",
                       {"plain_text_bytes", "sequence_tokens", "word2vec_dims", "bert_dims",
                        "sequence_embedding_dims", "float_bytes", "rgb_channels"});
            opt(m, "plain_text_bytes", c.memory.plain_text_bytes);
            opt(m, "sequence_tokens", c.memory.sequence_tokens);
            opt(m, "word2vec_dims", c.memory.word2vec_dims);
            opt(m, "bert_dims", c.memory.bert_dims);
            opt(m, "sequence_embedding_dims", c.memory.sequence_embedding_dims);
            opt(m, "float_bytes", c.memory.float_bytes);
            opt(m, "rgb_channels", c.memory.rgb_channels);
        }
        std::uint64_t seed = 0;
        opt(j, "seed", seed);
        apply_seed(c, seed);
    } catch (const json::exception& e) {
        fail(ErrorCode::kConfig, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCode::kConfig, path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

json to_json(const RunConfig& c) {
    json vae = c.vae;
    vae.erase("vocab_size");
    vae.erase("seed");
    json sts = c.sts;
    for (const char* k : {"input_mode", "seq_len", "vocab_size", "seed"}) sts.erase(k);
    sts["threshold"] = c.sts_threshold;
    return json{
        {"seed", c.seed},
        {"paths",
         {{"corpus", c.paths.corpus.string()},
          {"input", c.paths.input.string()},
          {"pairs", c.paths.pairs.string()},
          {"image_pairs", c.paths.image_pairs.string()},
          {"output_dir", c.paths.output_dir.string()}}},
        {"preprocessing", {{"lowercase", c.preprocessing.lowercase}}},
        {"tokenizer", {{"vocab_size", c.vocab_size}}},
        {"texim_fast", vae},
        {"sts", sts},
        {"image",
         {{"rows", c.image.rows},
          {"cols", c.image.cols},
          {"channels", c.image.channels},
          {"rounding", c.rounding == imager::Rounding::kTruncate ? "truncate" : "nearest"}}},
        {"sts_pairs", {{"shuffle_ratio", c.shuffle_ratio}}},
        {"report", {{"max_pairs", c.report.max_pairs}}},
        {"memory_report",
         {{"plain_text_bytes", c.memory.plain_text_bytes},
          {"sequence_tokens", c.memory.sequence_tokens},
          {"word2vec_dims", c.memory.word2vec_dims},
          {"bert_dims", c.memory.bert_dims},
          {"sequence_embedding_dims", c.memory.sequence_embedding_dims},
          {"float_bytes", c.memory.float_bytes},
          {"rgb_channels", c.memory.rgb_channels}}}};
}

void apply_seed(RunConfig& c, std::uint64_t seed) {
    c.seed = seed;
    c.vae.seed = seed;
    c.sts.seed = seed;
}

}  // namespace texim::config
