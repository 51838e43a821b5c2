// Generates the bundled training corpus: deterministic pseudo-English prose
// built from embedded word lists, so out-of-the-box runs need no downloads.
// Regenerate with: make_corpus <bytes> <seed> > data/corpus.txt

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cctype>
#include <string>
#include <vector>

#include "pq/rng.hpp"

namespace {

const std::vector<std::string> kDeterminers = {"the", "a", "this", "that", "each", "every",
                                               "another", "the", "the", "a"};

const std::vector<std::string> kNouns = {
    "machine", "signal",  "river",   "engine",  "garden",   "window",  "teacher", "library",
    "mountain", "harbor", "letter",  "market",  "evening",  "morning", "journey", "village",
    "stone",    "bridge", "forest",  "shadow",  "circuit",  "needle",  "lantern", "meadow",
    "station",  "mirror", "pattern", "whisper", "question", "answer",  "student", "builder",
    "valley",   "thread", "vessel",  "record",  "number",   "winter",  "summer",  "harvest"};

const std::vector<std::string> kVerbs = {
    "carries", "follows", "builds",  "watches", "crosses", "repairs", "gathers", "measures",
    "teaches", "returns", "obscures", "reveals", "answers", "signals", "remembers", "forgets",
    "sharpens", "softens", "collects", "divides", "connects", "balances", "observes", "records"};

const std::vector<std::string> kAdjectives = {
    "quiet",  "bright", "narrow", "steady",  "curious", "distant", "gentle",  "rapid",
    "silent", "heavy",  "subtle", "careful", "ancient", "modern",  "patient", "simple",
    "broad",  "sparse", "dense",  "uneven"};

const std::vector<std::string> kAdverbs = {"slowly",   "quickly", "quietly", "carefully",
                                           "rarely",   "often",   "almost",  "nearly",
                                           "entirely", "barely"};

const std::vector<std::string> kConnectives = {"and", "but", "while", "because", "until",
                                               "although", "so", "before", "after", "when"};

const std::vector<std::string> kPreps = {"over", "under", "beside", "through", "across",
                                         "against", "beyond", "near", "within", "without"};

std::string pick(pq::Rng& rng, const std::vector<std::string>& list) {
    return list[rng.index(list.size())];
}

std::string noun_phrase(pq::Rng& rng) {
    std::string s = pick(rng, kDeterminers);
    if (rng.uniform() < 0.45) s += " " + pick(rng, kAdjectives);
    s += " " + pick(rng, kNouns);
    return s;
}

std::string clause(pq::Rng& rng) {
    std::string s = noun_phrase(rng);
    if (rng.uniform() < 0.25) s += " " + pick(rng, kAdverbs);
    s += " " + pick(rng, kVerbs);
    s += " " + noun_phrase(rng);
    if (rng.uniform() < 0.35) s += " " + pick(rng, kPreps) + " " + noun_phrase(rng);
    return s;
}

std::string sentence(pq::Rng& rng) {
    std::string s = clause(rng);
    while (rng.uniform() < 0.3) {
        s += rng.uniform() < 0.5 ? ", " : " ";
        s += pick(rng, kConnectives) + " " + clause(rng);
    }
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    s += rng.uniform() < 0.08 ? "?" : ".";
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    const long target_bytes = argc > 1 ? std::atol(argv[1]) : 220000;
    const uint64_t seed = argc > 2 ? static_cast<uint64_t>(std::atoll(argv[2])) : 7;
    pq::Rng rng = pq::make_rng(seed, "corpus");

    std::string out;
    out.reserve(static_cast<size_t>(target_bytes) + 256);
    while (static_cast<long>(out.size()) < target_bytes) {
        int sentences = 2 + static_cast<int>(rng.index(5));
        std::string para;
        for (int i = 0; i < sentences; ++i) {
            para += sentence(rng);
            para += (i + 1 < sentences) ? " " : "";
        }
        out += para;
        out += "\n";
        if (rng.uniform() < 0.25) out += "\n";
    }
    std::fwrite(out.data(), 1, out.size(), stdout);
    return 0;
}
