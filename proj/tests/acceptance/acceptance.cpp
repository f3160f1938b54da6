#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "synthetic.hpp"
#include "texim/checkpoint.hpp"
#include "texim/commands.hpp"
#include "texim/config.hpp"
#include "texim/gradcheck.hpp"
#include "texim/imager.hpp"
#include "texim/sts.hpp"
#include "texim/tokenizer.hpp"
#include "texim/vae.hpp"

namespace fs = std::filesystem;
using namespace texim;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("texim_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---- 1 ------------------------------------------------------------------------

Outcome anneal_conformance() {
    const std::size_t n_total = 15;
    const vae::AnnealSchedule s{n_total, 0.0};
    const double w0 = vae::anneal_weight(0, s);
    const double wn = vae::anneal_weight(static_cast<double>(n_total), s);
    const double expected = 1.0 / (1.0 + std::exp(-1.0));
    bool monotone = true;
    for (std::size_t n = 1; n <= n_total; ++n)
        monotone &= vae::anneal_weight(static_cast<double>(n), s) > vae::anneal_weight(static_cast<double>(n - 1), s);
    const bool pass = w0 == 0.5 && std::abs(wn - expected) <= 1e-12 && monotone;
    return {pass, "W_a(0)=" + fmt("%.17g", w0) + " |W_a(N)-1/(1+e^-1)|=" + fmt("%.2e", std::abs(wn - expected)) +
                      (monotone ? " strictly increasing" : " NOT strictly increasing")};
}

// ---- 2 ------------------------------------------------------------------------

Outcome kl_correctness() {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t dims = 1 + rng.index(8);
        std::vector<double> mu(dims), lv(dims);
        for (auto& m : mu) m = rng.uniform(-3.0, 3.0);
        for (auto& l : lv) l = rng.uniform(-3.0, 2.0);
        worst = std::max(worst, std::abs(vae::kl_gaussian(mu, lv) - testing::kl_by_quadrature(mu, lv)));
    }
    const std::vector<double> zero(16, 0.0);
    const double at_prior = vae::kl_gaussian(zero, zero);
    return {worst <= 1e-6 && at_prior == 0.0,
            "max |closed form - quadrature|=" + fmt("%.2e", worst) + " KL(0,1)=" + fmt("%g", at_prior)};
}

// ---- 3 ------------------------------------------------------------------------

Outcome gradient_fidelity() {
    const auto t0 = Clock::now();
    vae::VaeConfig vc;
    vc.seq_len = 8;
    vc.model_width = 16;
    vc.heads = 4;
    vc.latent_dim = 8;
    vc.vocab_size = 20;
    vc.seed = 3;
    auto vae_model = vae::VaeModel::create(vc);
    auto vae_params = vae_model.parameters();
    const auto seq = tokenizer::pad_ids({3, 17, 1, 20, 8, 8}, 8);
    nn::GradCheckOptions options;
    options.training = true;
    options.seed = 99;
    const auto vae_report =
        nn::gradient_check([&](nn::Graph& g) { return vae_model.loss(g, seq, 0.6); }, vae_params, options);
    double worst = vae_report.max_relative_error;
    std::string worst_name = "vae:" + vae_report.worst_parameter;
    std::size_t checked = vae_report.checked_values;

    Rng rng(5);
    for (auto mode : {sts::InputMode::kImage, sts::InputMode::kFloatVector, sts::InputMode::kTokens}) {
        sts::StsConfig sc;
        sc.model_width = 16;
        sc.heads = 4;
        sc.seq_len = 8;
        sc.vocab_size = 20;
        sc.input_mode = mode;
        sc.seed = 4;
        auto model = sts::StsModel::create(sc);
        sts::StsExample ex;
        ex.label = 1;
        if (mode == sts::InputMode::kTokens) {
            ex.a = sts::from_tokens(tokenizer::pad_ids({4, 9, 20}, 8));
            ex.b = sts::from_tokens(tokenizer::pad_ids({1, 2, 3, 4, 5, 6, 7, 8}, 8));
        } else {
            std::vector<double> a(8), b(8);
            for (auto& v : a) v = mode == sts::InputMode::kImage ? static_cast<double>(rng.index(256)) : rng.normal();
            for (auto& v : b) v = mode == sts::InputMode::kImage ? static_cast<double>(rng.index(256)) : rng.normal();
            ex.a = sts::from_vector(a);
            ex.b = sts::from_vector(b);
        }
        auto params = model.parameters();
        const auto report = nn::gradient_check([&](nn::Graph& g) { return model.loss(g, ex); }, params, options);
        checked += report.checked_values;
        if (report.max_relative_error > worst) {
            worst = report.max_relative_error;
            worst_name = "sts-" + sts::to_string(mode) + ":" + report.worst_parameter;
        }
    }
    const double elapsed = seconds_since(t0);
    return {worst < 1e-4 && elapsed < 120.0,
            "max relative error " + fmt("%.2e", worst) + " (" + worst_name + ") over " + std::to_string(checked) +
                " values in " + fmt("%.1f", elapsed) + "s"};
}

// ---- 4 ------------------------------------------------------------------------

Outcome fixed_length() {
    const auto texts = testing::random_sentences(60, 40, 3, 30, 4);
    const auto vocab = tokenizer::train_vocab(texts, 120);
    vae::VaeConfig vc;
    vc.seq_len = 64;
    vc.model_width = 16;
    vc.heads = 4;
    vc.latent_dim = 512;
    vc.vocab_size = vocab.size();
    const auto model = vae::VaeModel::create(vc);
    const auto short_text = testing::random_sentences(1, 40, 5, 5, 8).front();
    const auto long_text = testing::random_sentences(1, 40, 400, 400, 9).front();
    const auto e_short = vae::project(short_text, vocab, model);
    const auto e_long = vae::project(long_text, vocab, model);
    const imager::ImageSpec spec{32, 16, 1};
    const auto i_short = imager::to_image(e_short, spec), i_long = imager::to_image(e_long, spec);
    const bool pass = e_short.size() == 512 && e_long.size() == 512 && i_short.spec == i_long.spec &&
                      i_short.pixels.size() == i_long.pixels.size();
    return {pass, "5 words -> " + std::to_string(i_short.spec.rows) + "x" + std::to_string(i_short.spec.cols) +
                      ", 400 words -> " + std::to_string(i_long.spec.rows) + "x" + std::to_string(i_long.spec.cols) +
                      ", |E|=" + std::to_string(e_short.size()) + "/" + std::to_string(e_long.size())};
}

// ---- 5 ------------------------------------------------------------------------

Outcome compression() {
    std::vector<double> e(512);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::cos(0.37 * static_cast<double>(i));
    std::ostringstream out;
    imager::write_image(out, imager::to_image(e, {32, 16, 1}));
    const std::string header = "P5\n16 32\n255\n";
    const std::size_t payload = out.str().size() - header.size();
    const bool header_ok = out.str().compare(0, header.size(), header) == 0;
    double seq_pct = -1.0, text_pct = -1.0;
    for (const auto& row : imager::memory_report({32, 16, 1})) {
        if (row.representation == "sequence_embedding") seq_pct = row.compression_percent;
        if (row.representation == "plain_text") text_pct = row.compression_percent;
    }
    const bool pass = header_ok && payload == 512 && seq_pct == 75.0 && std::abs(text_pct - 75.89) <= 0.01;
    return {pass, "payload " + std::to_string(payload) + "B, vs 2048B " + fmt("%.4f%%", seq_pct) + ", vs 2123.57B " +
                      fmt("%.4f%%", text_pct)};
}

// ---- 6 ------------------------------------------------------------------------

Outcome quantization() {
    Rng rng(6);
    double worst = 0.0;
    std::size_t order_violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> e(64);
        for (auto& v : e) v = rng.normal() * rng.uniform(0.01, 100.0);
        const auto n = imager::normalize(e).values;
        const auto q = imager::scale_quantize(n);
        for (std::size_t i = 0; i < e.size(); ++i) {
            worst = std::max(worst, std::abs(static_cast<double>(q[i]) / 255.0 - n[i]));
            for (std::size_t j = 0; j < e.size(); ++j)
                if (e[i] <= e[j] && q[i] > q[j]) ++order_violations;
        }
    }
    return {worst <= 1.0 / 255.0 && order_violations == 0,
            "max |pixel/255 - normalized|=" + fmt("%.6f", worst) + " (bound " + fmt("%.6f", 1.0 / 255.0) +
                "), order violations " + std::to_string(order_violations)};
}

// ---- 7 ------------------------------------------------------------------------

Outcome training_sanity() {
    const auto t0 = Clock::now();
    const auto texts = testing::random_sentences(200, 24, 4, 20, 7);
    const auto vocab = tokenizer::train_vocab(texts, 64);
    std::vector<tokenizer::TokenSequence> seqs;
    for (const auto& t : texts) seqs.push_back(tokenizer::tokenize(t, vocab, 16));
    vae::VaeConfig vc;
    vc.seq_len = 16;
    vc.model_width = 16;
    vc.heads = 4;
    vc.latent_dim = 32;
    vc.vocab_size = vocab.size();
    vc.seed = 7;
    const auto r = vae::train_vae(seqs, vc);
    const double elapsed = seconds_since(t0);
    const bool decreased = r.log.back().train_loss < r.log.front().train_loss;
    const bool stopped = r.early_stopped && r.log.size() == r.best_epoch + 1 + vc.patience;
    std::string detail = "|V|=" + std::to_string(vocab.size()) + " J' " + fmt("%.4f", r.log.front().train_loss) +
                         " -> " + fmt("%.4f", r.log.back().train_loss) + ", " + std::to_string(r.log.size()) +
                         " epochs, best " + std::to_string(r.best_epoch) +
                         (r.early_stopped ? ", early stop" : ", no early stop") + ", " + fmt("%.1f", elapsed) + "s";
    return {vocab.size() <= 64 && decreased && stopped && elapsed < 600.0, detail};
}

// ---- 8, 9 -----------------------------------------------------------------------

struct BenchmarkRun {
    double full_image = 0.0;
    double conv_image = 0.0;
    double full_float = 0.0;
};

nlohmann::json benchmark_config(std::uint64_t seed) {
    return {{"seed", seed},
            {"paths", {{"corpus", "corpus.jsonl"}, {"output_dir", "out"}}},
            {"tokenizer", {{"vocab_size", 1024}}},
            {"texim_fast",
             {{"seq_len", 32},
              {"model_width", 16},
              {"latent_dim", 32},
              {"attention_heads", 2},
              {"anneal_b", -2.0}}},
            {"sts", {{"model_width", 16}, {"hidden_width", 64}, {"gradient_clip_norm", 1.0}}},
            {"image", {{"rows", 8}, {"cols", 4}, {"channels", 1}}},
            {"sts_pairs", {{"shuffle_ratio", 0.5}}}};
}

BenchmarkRun run_benchmark(std::uint64_t seed) {
    const fs::path dir = scratch_dir("benchmark_" + std::to_string(seed));
    testing::TopicCorpusOptions o;
    o.documents = 500;
    o.topics = 64;
    o.keywords_per_topic = 1;
    o.fillers = 20;
    o.body_keyword_rate = 0.7;
    o.seed = seed;
    corpus::write_documents_jsonl(dir / "corpus.jsonl", testing::topic_documents(o));
    std::ofstream(dir / "config.json") << benchmark_config(seed).dump(2);
    const auto c = config::load_config(dir / "config.json");

    auto options = [](config::Variant v) {
        commands::CommandOptions opt;
        opt.variant = v;
        return opt;
    };
    BenchmarkRun run;
    commands::train_vae(c, options(config::Variant::kFull));
    commands::train_sts(c, options(config::Variant::kFull));
    run.full_image = commands::eval_sts(c, options(config::Variant::kFull)).metrics.accuracy;
    commands::train_sts(c, options(config::Variant::kTexFast));
    run.full_float = commands::eval_sts(c, options(config::Variant::kTexFast)).metrics.accuracy;
    commands::train_vae(c, options(config::Variant::kFastC));
    commands::train_sts(c, options(config::Variant::kFastC));
    run.conv_image = commands::eval_sts(c, options(config::Variant::kFastC)).metrics.accuracy;
    fs::remove_all(dir);
    return run;
}

// ---- 10 -----------------------------------------------------------------------

Outcome determinism() {
    const fs::path dir = scratch_dir("determinism");
    testing::TopicCorpusOptions o;
    o.documents = 120;
    o.topics = 6;
    corpus::write_documents_jsonl(dir / "corpus.jsonl", testing::topic_documents(o));
    std::ofstream(dir / "input.txt") << "first line to encode\n\nsecond line\n"
                                     << testing::random_sentences(1, 30, 120, 120, 3).front() << "\n";
    std::vector<fs::path> outs{"run_a", "run_b"};
    for (const auto& out : outs) {
        nlohmann::json j = {{"seed", 11},
                            {"paths", {{"corpus", "corpus.jsonl"}, {"input", "input.txt"}, {"output_dir", out}}},
                            {"tokenizer", {{"vocab_size", 96}}},
                            {"texim_fast", {{"seq_len", 16}, {"model_width", 16}, {"latent_dim", 32}, {"training_epochs", 4}}},
                            {"image", {{"rows", 8}, {"cols", 4}, {"channels", 1}}}};
        std::ofstream(dir / "config.json") << j.dump(2);
        const auto c = config::load_config(dir / "config.json");
        commands::train_vae(c, {});
        commands::encode(c, {});
    }
    std::size_t compared = 0, differing = 0;
    const fs::path a = dir / outs[0] / "texim-fast", b = dir / outs[1] / "texim-fast";
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        ++compared;
        if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) ++differing;
    }
    fs::remove_all(dir);
    return {compared >= 8 && differing == 0,
            std::to_string(compared) + " artifacts compared (checkpoints, vocabulary, log, images, manifest), " +
                std::to_string(differing) + " differ"};
}

// ---- 11 -----------------------------------------------------------------------

Outcome round_trips() {
    Rng rng(11);
    std::size_t failures = 0, cases = 0;
    for (int trial = 0; trial < 50; ++trial) {
        // vocabulary
        std::vector<std::string> corpus;
        for (int d = 0; d < 4; ++d) {
            std::string text;
            for (int w = 0; w < 5; ++w) {
                std::string word;
                for (std::size_t k = 0; k < 1 + rng.index(6); ++k) word += static_cast<char>('a' + rng.index(10));
                text += (w ? " " : "") + word;
            }
            corpus.push_back(text);
        }
        const auto vocab = tokenizer::train_vocab(corpus, 20 + rng.index(50));
        std::stringstream vs;
        vocab.write(vs);
        const std::string vbytes = vs.str();
        const auto vback = tokenizer::Vocabulary::read(vs);
        std::stringstream vs2;
        vback.write(vs2);
        failures += !(vback == vocab && vs2.str() == vbytes);

        // checkpoint
        std::vector<nn::NamedTensor> tensors;
        for (std::size_t i = 0; i < 1 + rng.index(4); ++i) {
            std::vector<std::size_t> shape;
            for (std::size_t r = 0; r < 1 + rng.index(4); ++r) shape.push_back(1 + rng.index(5));
            nn::Tensor t(shape);
            for (double& v : t.values()) v = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
            tensors.push_back({"p" + std::to_string(i), t});
        }
        std::stringstream cs;
        nn::write_checkpoint(cs, tensors);
        const auto back = nn::read_checkpoint(cs);
        bool same = back.size() == tensors.size();
        for (std::size_t i = 0; same && i < back.size(); ++i)
            same = back[i].name == tensors[i].name && back[i].tensor == tensors[i].tensor;
        failures += !same;

        // PGM / PPM
        const imager::ImageSpec spec{1 + rng.index(48), 1 + rng.index(48), rng.index(2) ? 3u : 1u};
        std::vector<std::uint8_t> px(spec.pixel_count());
        for (auto& p : px) p = static_cast<std::uint8_t>(rng.index(256));
        const auto img = imager::reshape(px, spec);
        std::stringstream is;
        imager::write_image(is, img);
        const std::string ibytes = is.str();
        const auto iback = imager::read_image(is);
        std::stringstream is2;
        imager::write_image(is2, iback);
        failures += !(iback == img && is2.str() == ibytes);
        cases += 3;
    }
    return {failures == 0, std::to_string(cases) + " generated instances, " + std::to_string(failures) + " mismatches"};
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    std::vector<BenchmarkRun> bench;
    auto ensure_benchmark = [&] {
        if (!bench.empty()) return;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto t0 = Clock::now();
            bench.push_back(run_benchmark(seed));
            std::fprintf(stderr, "benchmark seed %llu: image %.3f conv-only %.3f float %.3f (%.0fs)\n",
                         static_cast<unsigned long long>(seed), bench.back().full_image, bench.back().conv_image,
                         bench.back().full_float, seconds_since(t0));
        }
    };
    auto mean_of = [&](double BenchmarkRun::*field) {
        double total = 0.0;
        for (const auto& r : bench) total += r.*field;
        return total / static_cast<double>(bench.size());
    };

    const std::vector<Criterion> criteria{
        {1, "anneal schedule", anneal_conformance},
        {2, "KL correctness", kl_correctness},
        {3, "gradient fidelity", gradient_fidelity},
        {4, "fixed-length guarantee", fixed_length},
        {5, "compression arithmetic", compression},
        {6, "quantization bound", quantization},
        {7, "training sanity", training_sanity},
        {8, "STS capability",
         [&] {
             ensure_benchmark();
             const double image = mean_of(&BenchmarkRun::full_image);
             int wins = 0;
             std::string per_seed;
             for (const auto& r : bench) {
                 wins += r.full_image >= r.conv_image;
                 per_seed += " " + fmt("%.3f", r.full_image) + "/" + fmt("%.3f", r.conv_image);
             }
             return Outcome{image >= 0.95 && wins >= 3,
                            "mean image accuracy " + fmt("%.3f", image) + ", image >= conv-only in " +
                                std::to_string(wins) + "/5 seeds (image/conv-only:" + per_seed + ")"};
         }},
        {9, "ablation ordering",
         [&] {
             ensure_benchmark();
             const double image = mean_of(&BenchmarkRun::full_image), flt = mean_of(&BenchmarkRun::full_float);
             return Outcome{flt >= image - 0.05, "mean float_vector accuracy " + fmt("%.3f", flt) +
                                                     " vs image " + fmt("%.3f", image) + " - 0.05"};
         }},
        {10, "determinism", determinism},
        {11, "round trips", round_trips},
    };

    int failed = 0;
    std::size_t ran = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        ++ran;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(ran) - failed, ran);
    return failed == 0 ? 0 : 1;
}
