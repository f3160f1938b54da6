#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "texim/graph.hpp"
#include "texim/imager.hpp"
#include "texim/layers.hpp"
#include "texim/tokenizer.hpp"

using namespace texim;

namespace {

nn::Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    return nn::normal_init(rows, cols, 0.5, rng);
}

std::vector<std::string> sample_corpus(std::size_t docs) {
    Rng rng(3);
    std::vector<std::string> out;
    for (std::size_t d = 0; d < docs; ++d) {
        std::string text;
        for (int w = 0; w < 40; ++w) {
            std::string word;
            for (std::size_t k = 0; k < 3 + rng.index(6); ++k) word += static_cast<char>('a' + rng.index(12));
            text += (w ? " " : "") + word;
        }
        out.push_back(text);
    }
    return out;
}

void BM_SelfAttention(benchmark::State& state) {
    const auto L = static_cast<std::size_t>(state.range(0));
    const std::size_t D = 32;
    const nn::Parameter z("z", random_tensor(L, D, 1)), wq("wq", random_tensor(D, D, 2)),
        wk("wk", random_tensor(D, D, 3)), wv("wv", random_tensor(D, D, 4));
    const Mask valid(L, 1);
    for (auto _ : state) {
        nn::Graph g(true);
        auto out = nn::self_attention(g, g.param(z), g.param(wq), g.param(wk), g.param(wv), valid);
        g.backward(nn::sum(g, out));
        benchmark::DoNotOptimize(g.value(out).values().data());
    }
}
BENCHMARK(BM_SelfAttention)->Arg(16)->Arg(64)->Arg(256);

void BM_SlfnScan(benchmark::State& state) {
    const auto L = static_cast<std::size_t>(state.range(0));
    const std::size_t D = 32;
    const nn::Parameter xs("xs", random_tensor(L, D, 1)), xt("xt", random_tensor(L, D, 2)),
        us("us", random_tensor(D, D, 3)), ut("ut", random_tensor(D, D, 4));
    for (auto _ : state) {
        nn::Graph g(true);
        auto out = nn::slfn_scan(g, g.param(xs), g.param(xt), g.param(us), g.param(ut));
        g.backward(nn::sum(g, out));
        benchmark::DoNotOptimize(g.value(out).values().data());
    }
}
BENCHMARK(BM_SlfnScan)->Arg(16)->Arg(64)->Arg(256);

void BM_Conv1d(benchmark::State& state) {
    const auto L = static_cast<std::size_t>(state.range(0));
    const std::size_t D = 32, F = 3;
    const nn::Parameter x("x", random_tensor(L, D, 1)), filters("f", random_tensor(D, F * D, 2));
    for (auto _ : state) {
        nn::Graph g(true);
        auto out = nn::conv1d(g, g.param(x), g.param(filters), F);
        g.backward(nn::sum(g, out));
        benchmark::DoNotOptimize(g.value(out).values().data());
    }
}
BENCHMARK(BM_Conv1d)->Arg(16)->Arg(64)->Arg(256);

void BM_Tokenize(benchmark::State& state) {
    const auto corpus = sample_corpus(200);
    const auto vocab = tokenizer::train_vocab(corpus, 400);
    std::size_t i = 0;
    for (auto _ : state) {
        auto seq = tokenizer::tokenize(corpus[i++ % corpus.size()], vocab, 64);
        benchmark::DoNotOptimize(seq.ids.data());
    }
}
BENCHMARK(BM_Tokenize);

void BM_TrainVocab(benchmark::State& state) {
    const auto corpus = sample_corpus(200);
    for (auto _ : state) {
        auto vocab = tokenizer::train_vocab(corpus, static_cast<std::size_t>(state.range(0)));
        benchmark::DoNotOptimize(vocab.size());
    }
}
BENCHMARK(BM_TrainVocab)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

void BM_ToImage(benchmark::State& state) {
    const auto e = random_tensor(1, 512, 9);
    const imager::ImageSpec spec{32, 16, 1};
    for (auto _ : state) {
        auto img = imager::to_image(e.values(), spec);
        benchmark::DoNotOptimize(img.pixels.data());
    }
}
BENCHMARK(BM_ToImage);

}  // namespace
BENCHMARK_MAIN();
