#include "texim/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "texim/corpus.hpp"
#include "texim/error.hpp"
#include "texim/tokenizer.hpp"
#include "texim/vae.hpp"

namespace texim::commands {

namespace fs = std::filesystem;
using config::RunConfig;
using config::Variant;

Artifacts artifacts(const RunConfig& c, Variant v) { return Artifacts{c.variant_dir(v)}; }

Artifacts vae_source(const RunConfig& c, Variant v) {
    return artifacts(c, v == Variant::kFastC ? Variant::kFastC : Variant::kFull);
}

namespace {

void note(const CommandOptions& o, const std::string& line) {
    if (o.log) *o.log << line << '\n';
}

void require_file(const fs::path& p, const std::string& what) {
    require(!p.empty(), ErrorCode::kConfig, what + " path is not configured");
    require(fs::is_regular_file(p), ErrorCode::kIo, what + " not found: " + p.string());
}

void ensure_writable(const std::vector<fs::path>& outputs, bool force) {
    if (force) return;
    for (const auto& p : outputs) {
        require(!fs::exists(p), ErrorCode::kIo, "refusing to overwrite " + p.string() + " (pass --force)");
    }
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + p.string());
    return out;
}

std::vector<std::string> corpus_texts(const RunConfig& c) {
    const fs::path path = c.resolve(c.paths.corpus);
    require_file(path, "corpus");
    std::vector<std::string> raw;
    if (path.extension() == ".jsonl") {
        for (auto& d : corpus::read_documents_jsonl(path)) {
            raw.push_back(std::move(d.body));
            if (d.summary) raw.push_back(std::move(*d.summary));
        }
    } else {
        raw = corpus::read_lines(path);
    }
    std::vector<std::string> texts;
    for (const auto& r : raw) {
        std::string t = corpus::clean_text(r, c.preprocessing);
        if (!t.empty()) texts.push_back(std::move(t));
    }
    require(!texts.empty(), ErrorCode::kEmptyInput, "corpus " + path.string() + " has no text after cleaning");
    return texts;
}

std::vector<corpus::StsPair> load_pairs(const RunConfig& c) {
    if (!c.paths.pairs.empty()) {
        const fs::path p = c.resolve(c.paths.pairs);
        require_file(p, "pairs file");
        return corpus::read_pairs_tsv(p);
    }
    const fs::path path = c.resolve(c.paths.corpus);
    require_file(path, "corpus");
    require(path.extension() == ".jsonl", ErrorCode::kConfig,
            "building pairs needs a .jsonl corpus with summaries, or set paths.pairs");
    return corpus::build_sts_pairs(corpus::read_documents_jsonl(path), c.shuffle_ratio, c.seed, c.preprocessing);
}

sts::InputMode mode_of(Variant v) {
    switch (v) {
        case Variant::kTexFast: return sts::InputMode::kFloatVector;
        case Variant::kDiscrete: return sts::InputMode::kTokens;
        default: return sts::InputMode::kImage;
    }
}

fs::path sidecar(const fs::path& checkpoint) { return checkpoint.string() + ".json"; }

// Text -> model input for one variant, memoized per cleaned text.
class Encoder {
public:
    Encoder(const RunConfig& c, Variant v, bool need_vae) : config_(c), mode_(mode_of(v)) {
        const Artifacts src = vae_source(c, v);
        require_file(src.vocab(), "vocabulary");
        vocab_ = tokenizer::Vocabulary::load(src.vocab());
        if (need_vae) {
            require_file(src.vae_checkpoint(), "VAE checkpoint");
            require_file(sidecar(src.vae_checkpoint()), "VAE checkpoint sidecar");
            model_.emplace(vae::VaeModel::load(src.vae_checkpoint()));
            require(c.image.pixel_count() == model_->config().latent_dim, ErrorCode::kConfig,
                    "image spec holds " + std::to_string(c.image.pixel_count()) +
                        " pixels but the VAE latent has " + std::to_string(model_->config().latent_dim) +
                        " dimensions");
        }
    }

    std::size_t seq_len() const { return model_ ? model_->config().seq_len : config_.vae.seq_len; }
    const tokenizer::Vocabulary& vocab() const { return vocab_; }

    tokenizer::TokenSequence tokens(const std::string& clean) const {
        return tokenizer::tokenize(clean, vocab_, seq_len());
    }

    const std::vector<double>& latent(const std::string& clean) {
        auto it = cache_.find(clean);
        if (it == cache_.end()) it = cache_.emplace(clean, model_->encode_sequence(tokens(clean)).mu).first;
        return it->second;
    }

    imager::PixelImage image(const std::string& clean) {
        return imager::to_image(latent(clean), config_.image, config_.rounding);
    }

    sts::Channel channel(const std::string& clean) {
        switch (mode_) {
            case sts::InputMode::kImage: return sts::from_image(image(clean));
            case sts::InputMode::kFloatVector: return sts::from_vector(latent(clean));
            case sts::InputMode::kTokens: return sts::from_tokens(tokens(clean));
        }
        return {};
    }

    std::size_t channel_length() const {
        if (mode_ == sts::InputMode::kTokens) return seq_len();
        return model_->config().latent_dim;
    }

private:
    const RunConfig& config_;
    sts::InputMode mode_;
    tokenizer::Vocabulary vocab_;
    std::optional<vae::VaeModel> model_;
    std::map<std::string, std::vector<double>> cache_;
};

std::vector<sts::StsExample> build_examples(const std::vector<corpus::StsPair>& pairs, Encoder& enc,
                                            const RunConfig& c, const CommandOptions& o) {
    std::vector<sts::StsExample> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::string a = corpus::clean_text(pairs[i].text_a, c.preprocessing);
        const std::string b = corpus::clean_text(pairs[i].text_b, c.preprocessing);
        if (a.empty() || b.empty()) {
            note(o, "warning: pair " + std::to_string(i) + " has an empty text after cleaning; skipped");
            continue;
        }
        out.push_back({"pair" + std::to_string(i), enc.channel(a), enc.channel(b), pairs[i].label});
    }
    require(!out.empty(), ErrorCode::kEmptyInput, "no usable pairs");
    return out;
}

sts::StsConfig sts_config_for(const RunConfig& c, Variant v, const Encoder& enc) {
    sts::StsConfig s = c.sts;
    s.input_mode = mode_of(v);
    s.seq_len = enc.channel_length();
    s.vocab_size = enc.vocab().size();
    s.seed = c.seed;
    return s;
}

std::string pad_index(std::size_t i, std::size_t width) {
    std::string s = std::to_string(i);
    if (s.size() < width) s.insert(0, width - s.size(), '0');
    return s;
}

}  // namespace

// ---- train-vae -----------------------------------------------------------------

TrainVaeResult train_vae(const RunConfig& c, const CommandOptions& o) {
    require(o.variant == Variant::kFull || o.variant == Variant::kFastC, ErrorCode::kConfig,
            "train-vae: ablation " + config::to_string(o.variant) +
                " reuses the full model's VAE; run train-vae without --ablation");
    const Artifacts a = artifacts(c, o.variant);
    ensure_writable({a.vocab(), a.vae_checkpoint(), sidecar(a.vae_checkpoint()), a.vae_log()}, o.force);
    const auto texts = corpus_texts(c);

    note(o, "training vocabulary on " + std::to_string(texts.size()) + " texts");
    const auto vocab = tokenizer::train_vocab(texts, c.vocab_size);
    std::vector<tokenizer::TokenSequence> seqs;
    seqs.reserve(texts.size());
    for (const auto& t : texts) seqs.push_back(tokenizer::tokenize(t, vocab, c.vae.seq_len));

    vae::VaeConfig vc = c.vae;
    vc.vocab_size = vocab.size();
    vc.seed = c.seed;
    if (o.variant == Variant::kFastC) vc.conv_only = true;
    note(o, "training VAE (" + config::to_string(o.variant) + ") on " + std::to_string(seqs.size()) + " sequences");
    const auto result = vae::train_vae(seqs, vc);

    fs::create_directories(a.dir);
    vocab.save(a.vocab());
    result.model.save(a.vae_checkpoint());
    auto log = open_out(a.vae_log());
    vae::write_log_csv(log, result.log);
    for (const auto& e : result.log) {
        std::ostringstream line;
        line << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss << " W_a " << e.anneal_weight;
        note(o, line.str());
    }
    return {seqs.size(), vocab.size(), result.log.size(), result.best_epoch, result.early_stopped};
}

// ---- encode ----------------------------------------------------------------------

EncodeResult encode(const RunConfig& c, const CommandOptions& o) {
    require(o.variant == Variant::kFull || o.variant == Variant::kFastC, ErrorCode::kConfig,
            "encode: images come from the full model or fast-c; ablation " + config::to_string(o.variant) +
                " has no image output");
    const fs::path input = c.resolve(c.paths.input);
    require_file(input, "input file");
    Encoder enc(c, o.variant, true);
    const Artifacts a = artifacts(c, o.variant);
    ensure_writable({a.manifest(), a.images()}, o.force);
    const auto lines = corpus::read_lines(input);

    if (fs::exists(a.images())) fs::remove_all(a.images());
    fs::create_directories(a.images());
    const std::string ext = c.image.channels == 1 ? ".pgm" : ".ppm";
    const std::size_t width = std::max<std::size_t>(4, std::to_string(lines.size()).size());
    EncodeResult r;
    std::ostringstream manifest;
    manifest << "line,file,status\n";
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string clean = corpus::clean_text(lines[i], c.preprocessing);
        if (clean.empty()) {
            manifest << i + 1 << ",,skipped_empty\n";
            note(o, "warning: line " + std::to_string(i + 1) + " is empty after cleaning; skipped");
            ++r.skipped;
            continue;
        }
        const std::string name = pad_index(i + 1, width) + ext;
        imager::write_image(a.images() / name, enc.image(clean));
        manifest << i + 1 << ",images/" << name << ",ok\n";
        ++r.written;
    }
    auto out = open_out(a.manifest());
    out << manifest.str();
    return r;
}

// ---- train-sts / eval-sts ------------------------------------------------------------

TrainStsResult train_sts(const RunConfig& c, const CommandOptions& o) {
    const Artifacts a = artifacts(c, o.variant);
    const sts::InputMode mode = mode_of(o.variant);
    Encoder enc(c, o.variant, mode != sts::InputMode::kTokens);
    const auto sc = sts_config_for(c, o.variant, enc);
    sc.validate();
    ensure_writable({a.sts_checkpoint(), sidecar(a.sts_checkpoint()), a.sts_log()}, o.force);
    const auto pairs = load_pairs(c);
    const auto examples = build_examples(pairs, enc, c, o);

    note(o, "training STS (" + sts::to_string(mode) + ") on " + std::to_string(examples.size()) + " pairs");
    const auto result = sts::train_sts(examples, sc);
    fs::create_directories(a.dir);
    result.model.save(a.sts_checkpoint());
    auto log = open_out(a.sts_log());
    sts::write_log_csv(log, result.log);
    return {examples.size(), result.log.size(), result.early_stopped, mode};
}

EvalStsResult eval_sts(const RunConfig& c, const CommandOptions& o) {
    const Artifacts a = artifacts(c, o.variant);
    const sts::InputMode mode = mode_of(o.variant);
    require_file(a.sts_checkpoint(), "STS checkpoint");
    const auto model = sts::StsModel::load(a.sts_checkpoint());
    require(model.config().input_mode == mode, ErrorCode::kConfig,
            "STS checkpoint was trained in " + sts::to_string(model.config().input_mode) + " mode, variant " +
                config::to_string(o.variant) + " needs " + sts::to_string(mode));
    Encoder enc(c, o.variant, mode != sts::InputMode::kTokens);
    ensure_writable({a.metrics(), a.predictions()}, o.force);
    const auto examples = build_examples(load_pairs(c), enc, c, o);
    const auto parts = corpus::split_items(examples, model.config().split, model.config().seed);
    const auto& test = parts.back();
    require(!test.empty(), ErrorCode::kEmptyInput, "eval-sts: empty test split");

    const auto predictions = sts::predict(model, test, c.sts_threshold);
    const auto metrics = sts::evaluate(predictions);
    nlohmann::json j = metrics;
    j["variant"] = config::to_string(o.variant);
    j["input_mode"] = sts::to_string(mode);
    j["threshold"] = c.sts_threshold;
    j["test_pairs"] = test.size();
    {
        auto out = open_out(a.metrics());
        out << j.dump(2) << '\n';
    }
    auto out = open_out(a.predictions());
    sts::write_predictions_csv(out, predictions);
    return {metrics, test.size()};
}

// ---- report ------------------------------------------------------------------------

Histogram histogram(const imager::PixelImage& image) {
    Histogram h{};
    for (std::uint8_t p : image.pixels) ++h[p];
    return h;
}

double mean_abs_difference(const imager::PixelImage& a, const imager::PixelImage& b) {
    require(a.spec == b.spec, ErrorCode::kShapeMismatch, "mean_abs_difference: image specs differ");
    require(!a.pixels.empty(), ErrorCode::kEmptyInput, "mean_abs_difference: empty images");
    double total = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i)
        total += std::abs(static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]));
    return total / static_cast<double>(a.pixels.size());
}

namespace {

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string svg_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

struct Frame {
    double width = 720, height = 320, left = 50, right = 20, top = 30, bottom = 30;
    double x(double i, double n) const { return left + (n > 1 ? i / (n - 1) : 0.0) * (width - left - right); }
    double y(double v, double lo, double hi) const {
        const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
        return height - bottom - t * (height - top - bottom);
    }
};

std::string svg_chart(const std::string& title, const std::vector<Series>& series, double lo, double hi) {
    const Frame f;
    std::size_t n = 0;
    for (const auto& s : series) n = std::max(n, s.values.size());
    std::ostringstream svg;
    svg << std::fixed << std::setprecision(2);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << f.left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" << svg_escape(title)
        << "</text>\n";
    svg << "<line x1=\"" << f.left << "\" y1=\"" << f.height - f.bottom << "\" x2=\"" << f.width - f.right
        << "\" y2=\"" << f.height - f.bottom << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left << "\" y2=\""
        << f.height - f.bottom << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"4\" y=\"" << f.top + 4 << "\" font-family=\"sans-serif\" font-size=\"10\">" << hi << "</text>\n";
    svg << "<text x=\"4\" y=\"" << f.height - f.bottom << "\" font-family=\"sans-serif\" font-size=\"10\">" << lo
        << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = kColors[k % 4];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
        for (std::size_t i = 0; i < series[k].values.size(); ++i) {
            svg << f.x(static_cast<double>(i), static_cast<double>(n)) << ','
                << f.y(series[k].values[i], lo, hi) << ' ';
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << f.width - f.right - 150 << "\" y=\"" << 18 + 14 * static_cast<double>(k)
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << color << "\">"
            << svg_escape(series[k].label) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::vector<Series>& series) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& s : series) {
        for (double v : s.values) {
            lo = first ? v : std::min(lo, v);
            hi = first ? v : std::max(hi, v);
            first = false;
        }
    }
    return svg_chart(title, series, lo, hi);
}

std::string svg_histogram(const std::string& title, const Histogram& a, const Histogram& b) {
    std::vector<Series> s{{"image a", {}}, {"image b", {}}};
    double hi = 0.0;
    for (std::size_t i = 0; i < 256; ++i) {
        s[0].values.push_back(static_cast<double>(a[i]));
        s[1].values.push_back(static_cast<double>(b[i]));
        hi = std::max({hi, s[0].values.back(), s[1].values.back()});
    }
    return svg_chart(title, s, 0.0, hi);
}

ReportResult report(const RunConfig& c, const CommandOptions& o) {
    struct ImagePair {
        imager::PixelImage a, b;
        std::optional<int> label;
    };
    std::vector<ImagePair> pairs;
    const Artifacts out = artifacts(c, o.variant == Variant::kFastC ? Variant::kFastC : Variant::kFull);

    if (!c.paths.image_pairs.empty()) {
        const fs::path list = c.resolve(c.paths.image_pairs);
        require_file(list, "image pairs file");
        ensure_writable({out.report()}, o.force);
        std::size_t line_no = 0;
        for (const auto& line : corpus::read_lines(list)) {
            ++line_no;
            if (line.empty()) continue;
            std::vector<std::string> fields;
            std::stringstream ss(line);
            for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
            require(fields.size() == 2 || fields.size() == 3, ErrorCode::kFormat,
                    list.string() + ":" + std::to_string(line_no) + ": expected image_a<TAB>image_b[<TAB>label]");
            ImagePair p{imager::read_image(c.resolve(fields[0])), imager::read_image(c.resolve(fields[1])), {}};
            if (fields.size() == 3) p.label = std::stoi(fields[2]);
            require(p.a.spec == p.b.spec, ErrorCode::kFormat,
                    list.string() + ":" + std::to_string(line_no) + ": images differ in size");
            pairs.push_back(std::move(p));
        }
    } else {
        Encoder enc(c, o.variant == Variant::kFastC ? Variant::kFastC : Variant::kFull, true);
        ensure_writable({out.report()}, o.force);
        for (const auto& p : load_pairs(c)) {
            if (pairs.size() >= c.report.max_pairs) break;
            const std::string a = corpus::clean_text(p.text_a, c.preprocessing);
            const std::string b = corpus::clean_text(p.text_b, c.preprocessing);
            if (a.empty() || b.empty()) continue;
            pairs.push_back({enc.image(a), enc.image(b), p.label});
        }
    }
    require(!pairs.empty(), ErrorCode::kEmptyInput, "report: no image pairs");

    if (fs::exists(out.report())) fs::remove_all(out.report());
    fs::create_directories(out.report());
    std::ostringstream hist_csv, summary;
    hist_csv << "pair,side,bin,count\n";
    summary << "pair,label,mean_abs_difference,histogram_l1\n" << std::setprecision(10);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& p = pairs[k];
        const std::string id = pad_index(k, 4);
        const Histogram ha = histogram(p.a), hb = histogram(p.b);
        std::size_t l1 = 0;
        for (std::size_t bin = 0; bin < 256; ++bin) {
            hist_csv << k << ",a," << bin << ',' << ha[bin] << '\n';
            l1 += ha[bin] > hb[bin] ? ha[bin] - hb[bin] : hb[bin] - ha[bin];
        }
        for (std::size_t bin = 0; bin < 256; ++bin) hist_csv << k << ",b," << bin << ',' << hb[bin] << '\n';
        summary << k << ',' << (p.label ? std::to_string(*p.label) : std::string()) << ','
                << mean_abs_difference(p.a, p.b) << ',' << l1 << '\n';

        std::ostringstream series;
        series << "index,pixel_a,pixel_b\n";
        Series sa{"image a", {}}, sb{"image b", {}};
        for (std::size_t i = 0; i < p.a.pixels.size(); ++i) {
            series << i << ',' << int{p.a.pixels[i]} << ',' << int{p.b.pixels[i]} << '\n';
            sa.values.push_back(p.a.pixels[i]);
            sb.values.push_back(p.b.pixels[i]);
        }
        open_out(out.report() / ("pair_" + id + "_pixels.csv")) << series.str();
        const std::string tag = p.label ? " (label " + std::to_string(*p.label) + ")" : "";
        open_out(out.report() / ("pair_" + id + "_pixels.svg"))
            << svg_line_chart("pair " + std::to_string(k) + " pixel values" + tag, {sa, sb});
        open_out(out.report() / ("pair_" + id + "_histogram.svg"))
            << svg_histogram("pair " + std::to_string(k) + " intensity histogram" + tag, ha, hb);
    }
    open_out(out.report() / "histograms.csv") << hist_csv.str();
    open_out(out.report() / "summary.csv") << summary.str();
    return {pairs.size()};
}

// ---- memory-report -------------------------------------------------------------------

std::vector<imager::MemoryRow> memory_report(const RunConfig& c, const CommandOptions& o) {
    const fs::path path = c.output_dir() / "memory_report.csv";
    ensure_writable({path}, o.force);
    const auto rows = imager::memory_report(c.image, c.memory);
    fs::create_directories(c.output_dir());
    auto out = open_out(path);
    imager::write_memory_report_csv(out, rows);
    return rows;
}

}  // namespace texim::commands
