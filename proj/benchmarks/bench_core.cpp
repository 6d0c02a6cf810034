#include <benchmark/benchmark.h>

#include "seqlink/candgen.hpp"
#include "seqlink/corpus.hpp"
#include "seqlink/neural.hpp"
#include "seqlink/selector.hpp"

namespace {

using namespace seqlink;

void BM_LstmStep(benchmark::State& state) {
  const int in = static_cast<int>(state.range(0));
  const int hidden = static_cast<int>(state.range(1));
  neural::ParamStore store;
  Rng rng = make_rng(1, "bench/lstm");
  neural::LstmCell cell(store, "lstm", in, hidden, rng);
  neural::Vec x(in), h = neural::Vec::Zero(hidden), c = neural::Vec::Zero(hidden);
  for (int i = 0; i < in; ++i) x[i] = uniform_range(rng, -1, 1);
  for (auto _ : state) {
    neural::Vec h2, c2;
    cell.step(store, x, h, c, h2, c2);
    benchmark::DoNotOptimize(h2);
  }
}
BENCHMARK(BM_LstmStep)->Args({300, 512})->Args({32, 48});

void BM_TextRank(benchmark::State& state) {
  Rng rng = make_rng(2, "bench/textrank");
  std::vector<std::string> tokens;
  for (int i = 0; i < state.range(0); ++i)
    tokens.push_back("w" + std::to_string(uniform_int(rng, 0, 60)));
  for (auto _ : state) {
    auto out = corpus::compress_description(tokens, 15);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_TextRank)->Arg(200);

void BM_JaroWinkler(benchmark::State& state) {
  for (auto _ : state) {
    double v = candgen::jaro_winkler("international airport terminal", "international airprot");
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_JaroWinkler);

void BM_DelayedRewards(benchmark::State& state) {
  std::vector<int> flags = {1, 0, 1, 1, 0, 1};
  for (auto _ : state) {
    auto r = selector::delayed_rewards(flags);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_DelayedRewards);

}  // namespace

BENCHMARK_MAIN();
