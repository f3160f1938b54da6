#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "texim/corpus.hpp"
#include "texim/imager.hpp"
#include "texim/sts.hpp"
#include "texim/vae.hpp"

namespace texim::config {

// Pipeline variants. The default runs the full model; the others are the
// ablations selectable with --ablation.
enum class Variant {
    kFull,      // image-mode STS over the full VAE
    kFastC,     // VAE without TSLFN blocks
    kTexFast,   // STS over un-quantized latent vectors
    kDiscrete,  // STS over token ids
};

std::string to_string(Variant v);
// Accepts "fast-c", "tex-fast", "discrete" (and "full").
Variant parse_variant(const std::string& name);

struct Paths {
    std::filesystem::path corpus;       // JSON lines documents or plain text lines
    std::filesystem::path input;        // texts to encode, one per line
    std::filesystem::path pairs;        // text_a<TAB>text_b<TAB>label; built from the corpus if empty
    std::filesystem::path image_pairs;  // image_a<TAB>image_b[<TAB>label] for reports
    std::filesystem::path output_dir = "output";
};

struct ReportOptions {
    std::size_t max_pairs = 20;
};

struct RunConfig {
    std::uint64_t seed = 0;
    Paths paths;
    corpus::CleanOptions preprocessing{true};
    std::size_t vocab_size = 256;  // tokenizer target, including the unknown token
    vae::VaeConfig vae;
    sts::StsConfig sts;
    double sts_threshold = 0.5;
    imager::ImageSpec image;
    imager::Rounding rounding = imager::Rounding::kTruncate;
    double shuffle_ratio = 0.5;
    ReportOptions report;
    imager::MemoryComparisonInputs memory;
    std::filesystem::path base_dir;  // relative paths resolve against this

    // Resolves a configured path against base_dir.
    std::filesystem::path resolve(const std::filesystem::path& p) const;
    std::filesystem::path output_dir() const { return resolve(paths.output_dir); }
    // Artifacts of one variant live in <output_dir>/<variant>.
    std::filesystem::path variant_dir(Variant v) const;

    // Checks internal consistency (not file existence).
    void validate() const;
};

// Every section is optional; absent keys keep their defaults. Unknown
// sections or keys are rejected so typos surface as errors.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

// Applies the seed to every stage.
void apply_seed(RunConfig& c, std::uint64_t seed);

}  // namespace texim::config
