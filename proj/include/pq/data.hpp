#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pq/rng.hpp"

namespace pq {

using TokenSeq = std::vector<int32_t>;

// Byte-level vocabulary: ids 0..255 are literal bytes, 256 is <bos>.
inline constexpr int32_t kBosToken = 256;
inline constexpr int32_t kNewlineToken = 10;
inline constexpr int32_t kVocabSize = 257;

TokenSeq tokenize(std::string_view text);
std::string detokenize(const TokenSeq& ids);  // ids must be literal bytes

// Escaped, human-readable rendering (specials and non-printables spelled out).
std::string render_tokens(const TokenSeq& ids);

// Train/held-out token streams cut from one text file. Splits are disjoint
// contiguous ranges and both must be nonempty.
struct Corpus {
    TokenSeq train;
    TokenSeq heldout;
    std::string source_path;
    double split_fraction = 0.9;

    static Corpus load(const std::string& path, double split_fraction = 0.9);
    static Corpus from_text(std::string_view text, double split_fraction = 0.9,
                            std::string source_path = "<memory>");
};

// Draws length-n windows at uniform start offsets; deterministic given the
// seed and the draw index.
class SequenceSampler {
public:
    SequenceSampler(const TokenSeq& split, Rng rng) : split_(&split), rng_(rng) {}
    TokenSeq draw(int64_t n);

private:
    const TokenSeq* split_;
    Rng rng_;
};

// One-shot draw: the first sample of a fresh sampler.
TokenSeq sample_sequence(const TokenSeq& split, int64_t n, uint64_t seed);

// Mean negative log-probability of the split's unigram distribution (nats).
double unigram_entropy(const TokenSeq& split);

}  // namespace pq
