#include "pq/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pq/errors.hpp"

namespace pq {

TokenSeq tokenize(std::string_view text) {
    TokenSeq ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<int32_t>(c));
    return ids;
}

std::string detokenize(const TokenSeq& ids) {
    std::string out;
    out.reserve(ids.size());
    for (int32_t id : ids) {
        if (id < 0 || id > 255) {
            throw contract_error("detokenize: id " + std::to_string(id) +
                                 " has no byte representation");
        }
        out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
    }
    return out;
}

std::string render_tokens(const TokenSeq& ids) {
    std::string out;
    for (int32_t id : ids) {
        if (id == kBosToken) {
            out += "<bos>";
        } else if (id == kNewlineToken) {
            out += "\\n";
        } else if (id >= 32 && id < 127) {
            out.push_back(static_cast<char>(id));
        } else {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\x%02x", static_cast<unsigned>(id) & 0xff);
            out += buf;
        }
    }
    return out;
}

Corpus Corpus::from_text(std::string_view text, double split_fraction, std::string source_path) {
    if (split_fraction <= 0.0 || split_fraction >= 1.0) {
        throw config_error("split_fraction must lie strictly between 0 and 1");
    }
    TokenSeq all = tokenize(text);
    auto cut = static_cast<size_t>(static_cast<double>(all.size()) * split_fraction);
    if (cut == 0 || cut >= all.size()) {
        throw config_error("corpus too small to split: " + std::to_string(all.size()) + " tokens");
    }
    Corpus c;
    c.train.assign(all.begin(), all.begin() + static_cast<ptrdiff_t>(cut));
    c.heldout.assign(all.begin() + static_cast<ptrdiff_t>(cut), all.end());
    c.split_fraction = split_fraction;
    c.source_path = std::move(source_path);
    return c;
}

Corpus Corpus::load(const std::string& path, double split_fraction) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open corpus file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), split_fraction, path);
}

TokenSeq SequenceSampler::draw(int64_t n) {
    int64_t len = static_cast<int64_t>(split_->size());
    if (n <= 0) throw contract_error("sample length must be positive");
    if (n > len) {
        throw contract_error("corpus split of " + std::to_string(len) +
                             " tokens is shorter than requested length " + std::to_string(n));
    }
    int64_t offset = static_cast<int64_t>(rng_.index(static_cast<uint64_t>(len - n + 1)));
    return TokenSeq(split_->begin() + offset, split_->begin() + offset + n);
}

TokenSeq sample_sequence(const TokenSeq& split, int64_t n, uint64_t seed) {
    SequenceSampler sampler(split, make_rng(seed, "sample_sequence"));
    return sampler.draw(n);
}

double unigram_entropy(const TokenSeq& split) {
    if (split.empty()) throw contract_error("unigram entropy of an empty split");
    std::vector<int64_t> counts(static_cast<size_t>(kVocabSize), 0);
    for (int32_t id : split) counts[static_cast<size_t>(id)]++;
    double h = 0.0;
    const double n = static_cast<double>(split.size());
    for (int64_t c : counts) {
        if (c == 0) continue;
        double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace pq
