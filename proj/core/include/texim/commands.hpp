#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "texim/config.hpp"
#include "texim/imager.hpp"
#include "texim/sts.hpp"

namespace texim::commands {

struct CommandOptions {
    config::Variant variant = config::Variant::kFull;
    bool force = false;          // overwrite existing outputs
    std::ostream* log = nullptr;  // progress and warnings
};

// Fixed artifact names inside a variant directory.
struct Artifacts {
    std::filesystem::path dir;
    std::filesystem::path vocab() const { return dir / "vocab.tsv"; }
    std::filesystem::path vae_checkpoint() const { return dir / "vae.ckpt"; }
    std::filesystem::path vae_log() const { return dir / "vae_log.csv"; }
    std::filesystem::path images() const { return dir / "images"; }
    std::filesystem::path manifest() const { return dir / "manifest.csv"; }
    std::filesystem::path sts_checkpoint() const { return dir / "sts.ckpt"; }
    std::filesystem::path sts_log() const { return dir / "sts_log.csv"; }
    std::filesystem::path metrics() const { return dir / "metrics.json"; }
    std::filesystem::path predictions() const { return dir / "predictions.csv"; }
    std::filesystem::path report() const { return dir / "report"; }
};

Artifacts artifacts(const config::RunConfig& c, config::Variant v);
// Where a variant reads its VAE and vocabulary from: its own directory for
// the full model and FAST-C, the full model's for the STS-only ablations.
Artifacts vae_source(const config::RunConfig& c, config::Variant v);

struct TrainVaeResult {
    std::size_t sequences = 0;
    std::size_t vocab_size = 0;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
};
TrainVaeResult train_vae(const config::RunConfig& c, const CommandOptions& o);

struct EncodeResult {
    std::size_t written = 0;
    std::size_t skipped = 0;
};
EncodeResult encode(const config::RunConfig& c, const CommandOptions& o);

struct TrainStsResult {
    std::size_t pairs = 0;
    std::size_t epochs_run = 0;
    bool early_stopped = false;
    sts::InputMode mode = sts::InputMode::kImage;
};
TrainStsResult train_sts(const config::RunConfig& c, const CommandOptions& o);

struct EvalStsResult {
    sts::Metrics metrics;
    std::size_t test_pairs = 0;
};
EvalStsResult eval_sts(const config::RunConfig& c, const CommandOptions& o);

struct ReportResult {
    std::size_t pairs = 0;
};
ReportResult report(const config::RunConfig& c, const CommandOptions& o);

std::vector<imager::MemoryRow> memory_report(const config::RunConfig& c, const CommandOptions& o);

// ---- report helpers ----------------------------------------------------------

using Histogram = std::array<std::size_t, 256>;
Histogram histogram(const imager::PixelImage& image);
// Mean |a_i - b_i| over aligned pixels; images must share a spec.
double mean_abs_difference(const imager::PixelImage& a, const imager::PixelImage& b);

struct Series {
    std::string label;
    std::vector<double> values;
};
// Minimal line chart, x = index.
std::string svg_line_chart(const std::string& title, const std::vector<Series>& series);
// Minimal bar chart over histogram bins.
std::string svg_histogram(const std::string& title, const Histogram& a, const Histogram& b);

}  // namespace texim::commands
