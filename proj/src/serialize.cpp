#include "pq/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "pq/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "artifact serialization assumes a little-endian host");

namespace pq {

namespace {

constexpr char kMagic[4] = {'C', 'C', 'L', 'B'};

struct Writer {
    std::ofstream out;

    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw artifact_error("cannot open for writing: " + path);
    }
    void bytes(const void* p, size_t n) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    template <typename T>
    void pod(T v) {
        bytes(&v, sizeof(T));
    }
    void str(const std::string& s) {
        pod<uint32_t>(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void tensor(const std::string& name, const Tensor& t) {
        str(name);
        pod<uint8_t>(static_cast<uint8_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) pod<int64_t>(t.dim(i));
        bytes(t.data(), sizeof(float) * static_cast<size_t>(t.numel()));
    }
    void floats(const std::vector<float>& v) {
        pod<uint32_t>(static_cast<uint32_t>(v.size()));
        bytes(v.data(), sizeof(float) * v.size());
    }
};

struct Reader {
    std::ifstream in;
    std::string path;

    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw artifact_error("cannot open artifact: " + p);
    }
    void bytes(void* p, size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in.gcount()) != n) {
            throw artifact_error("truncated artifact: " + path);
        }
    }
    template <typename T>
    T pod() {
        T v;
        bytes(&v, sizeof(T));
        return v;
    }
    std::string str() {
        uint32_t n = pod<uint32_t>();
        if (n > (1u << 20)) throw artifact_error("implausible string length in " + path);
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    Tensor tensor(std::string* name_out = nullptr) {
        std::string name = str();
        if (name_out) *name_out = name;
        uint8_t rank = pod<uint8_t>();
        if (rank > 8) throw artifact_error("implausible tensor rank in " + path);
        std::vector<int64_t> shape(rank);
        int64_t n = 1;
        for (auto& d : shape) {
            d = pod<int64_t>();
            if (d <= 0 || d > (1ll << 32)) throw artifact_error("implausible tensor dim in " + path);
            n *= d;
        }
        std::vector<float> data(static_cast<size_t>(n));
        bytes(data.data(), sizeof(float) * data.size());
        return Tensor(std::move(shape), std::move(data));
    }
    std::vector<float> floats() {
        uint32_t n = pod<uint32_t>();
        if (n > (1u << 28)) throw artifact_error("implausible array length in " + path);
        std::vector<float> v(n);
        bytes(v.data(), sizeof(float) * v.size());
        return v;
    }
};

void write_header(Writer& w, ArtifactKind kind) {
    w.bytes(kMagic, 4);
    w.pod<uint16_t>(kArtifactVersion);
    w.pod<uint8_t>(static_cast<uint8_t>(kind));
}

ArtifactKind read_header(Reader& r) {
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw artifact_error("bad magic bytes in " + r.path + " (not a CCLB artifact)");
    }
    uint16_t version = r.pod<uint16_t>();
    if (version != kArtifactVersion) {
        throw artifact_error("unsupported artifact version " + std::to_string(version) + " in " +
                             r.path);
    }
    uint8_t kind = r.pod<uint8_t>();
    if (kind < 1 || kind > 3) throw artifact_error("unknown artifact kind in " + r.path);
    return static_cast<ArtifactKind>(kind);
}

void expect_kind(Reader& r, ArtifactKind want, const char* what) {
    ArtifactKind got = read_header(r);
    if (got != want) {
        throw artifact_error(r.path + " is not a " + what + " artifact");
    }
}

}  // namespace

ArtifactKind peek_artifact_kind(const std::string& path) {
    Reader r(path);
    return read_header(r);
}

void save_model(const std::string& path, const TransformerModel& model) {
    Writer w(path);
    write_header(w, ArtifactKind::model);
    const auto& c = model.config;
    w.pod<int64_t>(c.vocab_size);
    w.pod<int64_t>(c.d_model);
    w.pod<int64_t>(c.n_layers);
    w.pod<int64_t>(c.n_heads);
    w.pod<int64_t>(c.d_ff);
    w.pod<int64_t>(c.max_seq_len);
    w.pod<uint8_t>(c.norm_style == NormStyle::pre_rms ? 0 : 1);
    w.pod<uint8_t>(c.activation == Activation::swiglu ? 0 : 1);
    w.pod<float>(c.norm_eps);
    w.pod<uint32_t>(static_cast<uint32_t>(model.weights.size()));
    for (const auto& [name, t] : model.weights) w.tensor(name, t);
}

TransformerModel load_model(const std::string& path) {
    Reader r(path);
    expect_kind(r, ArtifactKind::model, "model");
    TransformerModel m;
    m.config.vocab_size = r.pod<int64_t>();
    m.config.d_model = r.pod<int64_t>();
    m.config.n_layers = r.pod<int64_t>();
    m.config.n_heads = r.pod<int64_t>();
    m.config.d_ff = r.pod<int64_t>();
    m.config.max_seq_len = r.pod<int64_t>();
    m.config.norm_style = r.pod<uint8_t>() == 0 ? NormStyle::pre_rms : NormStyle::post_ln;
    m.config.activation = r.pod<uint8_t>() == 0 ? Activation::swiglu : Activation::gelu;
    m.config.norm_eps = r.pod<float>();
    m.config.validate();
    uint32_t n = r.pod<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) {
        std::string name;
        Tensor t = r.tensor(&name);
        m.weights.emplace(std::move(name), std::move(t));
    }
    for (const auto& name : model_weight_names(m.config)) {
        if (!m.weights.count(name)) {
            throw artifact_error("model artifact missing weight '" + name + "'");
        }
    }
    return m;
}

void save_prefix(const std::string& path, const PrefixCache& prefix) {
    if (prefix.layers() == 0) throw contract_error("refusing to save an empty prefix cache");
    Writer w(path);
    write_header(w, ArtifactKind::prefix);
    w.pod<uint8_t>(static_cast<uint8_t>(prefix.provenance));
    w.pod<int64_t>(prefix.layers());
    w.pod<int64_t>(prefix.len());
    w.pod<int64_t>(prefix.k[0].cols());
    for (int64_t l = 0; l < prefix.layers(); ++l) {
        w.tensor("blk" + std::to_string(l) + ".k", prefix.k[static_cast<size_t>(l)]);
        w.tensor("blk" + std::to_string(l) + ".v", prefix.v[static_cast<size_t>(l)]);
    }
}

PrefixCache load_prefix(const std::string& path) {
    Reader r(path);
    expect_kind(r, ArtifactKind::prefix, "prefix");
    PrefixCache p;
    uint8_t prov = r.pod<uint8_t>();
    if (prov < 1 || prov > 3) throw artifact_error("unknown prefix provenance in " + path);
    p.provenance = static_cast<PrefixProvenance>(prov);
    int64_t layers = r.pod<int64_t>();
    int64_t m = r.pod<int64_t>();
    int64_t d = r.pod<int64_t>();
    if (layers < 1 || layers > 4096 || m < 1 || d < 1) {
        throw artifact_error("implausible prefix dims in " + path);
    }
    for (int64_t l = 0; l < layers; ++l) {
        std::string name;
        Tensor k = r.tensor(&name);
        Tensor v = r.tensor(&name);
        if (k.rank() != 2 || k.dim(0) != m || k.dim(1) != d || !v.same_shape(k)) {
            throw artifact_error("prefix tensor shape mismatch in " + path);
        }
        p.k.push_back(std::move(k));
        p.v.push_back(std::move(v));
    }
    return p;
}

namespace {

void write_tap_section(Writer& w, const std::map<std::string, TapStats>& taps) {
    w.pod<uint32_t>(static_cast<uint32_t>(taps.size()));
    for (const auto& [name, ts] : taps) {
        w.str(name);
        w.pod<int64_t>(ts.observations);
        w.floats(ts.ch_min);
        w.floats(ts.ch_max);
    }
}

std::map<std::string, TapStats> read_tap_section(Reader& r) {
    std::map<std::string, TapStats> taps;
    uint32_t n = r.pod<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = r.str();
        TapStats ts;
        ts.observations = r.pod<int64_t>();
        ts.ch_min = r.floats();
        ts.ch_max = r.floats();
        if (ts.ch_min.size() != ts.ch_max.size()) {
            throw artifact_error("stats min/max width mismatch in " + r.path);
        }
        taps.emplace(std::move(name), std::move(ts));
    }
    return taps;
}

}  // namespace

void save_stats(const std::string& path, const CalibrationStats& stats) {
    Writer w(path);
    write_header(w, ArtifactKind::stats);
    w.pod<float>(stats.smooth_alpha);
    write_tap_section(w, stats.base);
    write_tap_section(w, stats.final);
}

CalibrationStats load_stats(const std::string& path) {
    Reader r(path);
    expect_kind(r, ArtifactKind::stats, "calibration stats");
    CalibrationStats s;
    s.smooth_alpha = r.pod<float>();
    s.base = read_tap_section(r);
    s.final = read_tap_section(r);
    return s;
}

}  // namespace pq
