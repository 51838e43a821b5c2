#include "pq/runconfig.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "pq/errors.hpp"

namespace pq {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string num(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string num(int64_t v) { return std::to_string(v); }

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw config_error("bad numeric value for " + key + ": '" + v + "'");
    }
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw config_error("bad integer value for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("bad boolean value for " + key + ": '" + v + "'");
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    return out;
}

}  // namespace

RunConfig RunConfig::parse_string(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw config_error("malformed section at line " + std::to_string(lineno));
            section = t.substr(1, t.size() - 2);
            if (section != "run" && section != "data" && section != "model" &&
                section != "train" && section != "quant" && section != "search" &&
                section != "tune") {
                throw config_error("unknown config section [" + section + "]");
            }
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw config_error("expected key = value at line " + std::to_string(lineno));
        }
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        std::string full = section + "." + key;

        if (full == "run.seed") cfg.seed = static_cast<uint64_t>(parse_int(full, val));
        else if (full == "run.out_dir") cfg.out_dir = val;
        else if (full == "run.threads") cfg.threads = static_cast<int>(parse_int(full, val));
        else if (full == "data.corpus") cfg.corpus = val;
        else if (full == "data.split_fraction") cfg.split_fraction = parse_double(full, val);
        else if (full == "data.calib_sequences") cfg.calib_sequences = parse_int(full, val);
        else if (full == "data.eval_sequences") cfg.eval_sequences = parse_int(full, val);
        else if (full == "data.eval_len") cfg.eval_len = parse_int(full, val);
        else if (full == "model.arch") cfg.arch = val;
        else if (full == "model.vocab_size") cfg.vocab_size = parse_int(full, val);
        else if (full == "model.d_model") cfg.d_model = parse_int(full, val);
        else if (full == "model.n_layers") cfg.n_layers = parse_int(full, val);
        else if (full == "model.n_heads") cfg.n_heads = parse_int(full, val);
        else if (full == "model.d_ff") cfg.d_ff = parse_int(full, val);
        else if (full == "model.max_seq_len") cfg.max_seq_len = parse_int(full, val);
        else if (full == "model.norm_eps") cfg.norm_eps = parse_double(full, val);
        else if (full == "train.steps") cfg.train_steps = parse_int(full, val);
        else if (full == "train.batch_size") cfg.train_batch = parse_int(full, val);
        else if (full == "train.seq_len") cfg.train_seq_len = parse_int(full, val);
        else if (full == "train.lr") cfg.train_lr = parse_double(full, val);
        else if (full == "train.grad_clip") cfg.grad_clip = parse_double(full, val);
        else if (full == "quant.act_bits") cfg.act_bits = static_cast<int>(parse_int(full, val));
        else if (full == "quant.act_symmetry") cfg.act_symmetry = val;
        else if (full == "quant.act_granularity") cfg.act_granularity = val;
        else if (full == "quant.act_range") cfg.act_range = val;
        else if (full == "quant.weight_bits") cfg.weight_bits = static_cast<int>(parse_int(full, val));
        else if (full == "quant.weight_group_size") cfg.weight_group_size = parse_int(full, val);
        else if (full == "quant.smoothquant") cfg.smoothquant = parse_bool(full, val);
        else if (full == "quant.smooth_alpha") cfg.smooth_alpha = parse_double(full, val);
        else if (full == "search.max_len") cfg.search_max_len = parse_int(full, val);
        else if (full == "search.tau") cfg.tau = parse_double(full, val);
        else if (full == "search.seeds") cfg.seeds = val;
        else if (full == "search.candidate_batch") cfg.candidate_batch = parse_int(full, val);
        else if (full == "search.text_len") cfg.search_text_len = parse_int(full, val);
        else if (full == "search.range") cfg.search_range = val;
        else if (full == "tune.lambda") cfg.lambda = parse_double(full, val);
        else if (full == "tune.epochs") cfg.epochs = parse_int(full, val);
        else if (full == "tune.lr") cfg.tune_lr = parse_double(full, val);
        else if (full == "tune.batch_size") cfg.tune_batch = parse_int(full, val);
        else if (full == "tune.seq_len") cfg.tune_seq_len = parse_int(full, val);
        else if (full == "tune.sequences_per_epoch") cfg.sequences_per_epoch = parse_int(full, val);
        else throw config_error("unknown config key '" + full + "'");
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    os << "[run]\n";
    os << "seed = " << seed << "\n";
    os << "out_dir = " << out_dir << "\n";
    os << "threads = " << threads << "\n";
    os << "\n[data]\n";
    os << "corpus = " << corpus << "\n";
    os << "split_fraction = " << num(split_fraction) << "\n";
    os << "calib_sequences = " << num(calib_sequences) << "\n";
    os << "eval_sequences = " << num(eval_sequences) << "\n";
    os << "eval_len = " << num(eval_len) << "\n";
    os << "\n[model]\n";
    os << "arch = " << arch << "\n";
    os << "vocab_size = " << num(vocab_size) << "\n";
    os << "d_model = " << num(d_model) << "\n";
    os << "n_layers = " << num(n_layers) << "\n";
    os << "n_heads = " << num(n_heads) << "\n";
    os << "d_ff = " << num(d_ff) << "\n";
    os << "max_seq_len = " << num(max_seq_len) << "\n";
    os << "norm_eps = " << num(norm_eps) << "\n";
    os << "\n[train]\n";
    os << "steps = " << num(train_steps) << "\n";
    os << "batch_size = " << num(train_batch) << "\n";
    os << "seq_len = " << num(train_seq_len) << "\n";
    os << "lr = " << num(train_lr) << "\n";
    os << "grad_clip = " << num(grad_clip) << "\n";
    os << "\n[quant]\n";
    os << "act_bits = " << act_bits << "\n";
    os << "act_symmetry = " << act_symmetry << "\n";
    os << "act_granularity = " << act_granularity << "\n";
    os << "act_range = " << act_range << "\n";
    os << "weight_bits = " << weight_bits << "\n";
    os << "weight_group_size = " << num(weight_group_size) << "\n";
    os << "smoothquant = " << (smoothquant ? "true" : "false") << "\n";
    os << "smooth_alpha = " << num(smooth_alpha) << "\n";
    os << "\n[search]\n";
    os << "max_len = " << num(search_max_len) << "\n";
    os << "tau = " << num(tau) << "\n";
    os << "seeds = " << seeds << "\n";
    os << "candidate_batch = " << num(candidate_batch) << "\n";
    os << "text_len = " << num(search_text_len) << "\n";
    os << "range = " << search_range << "\n";
    os << "\n[tune]\n";
    os << "lambda = " << num(lambda) << "\n";
    os << "epochs = " << num(epochs) << "\n";
    os << "lr = " << num(tune_lr) << "\n";
    os << "batch_size = " << num(tune_batch) << "\n";
    os << "seq_len = " << num(tune_seq_len) << "\n";
    os << "sequences_per_epoch = " << num(sequences_per_epoch) << "\n";
    return os.str();
}

void RunConfig::validate() const {
    if (arch != "llama-ish" && arch != "gpt-ish") {
        throw config_error("model.arch must be llama-ish or gpt-ish, got '" + arch + "'");
    }
    if (act_symmetry != "symmetric" && act_symmetry != "asymmetric") {
        throw config_error("quant.act_symmetry must be symmetric or asymmetric");
    }
    if (act_granularity != "per-tensor" && act_granularity != "per-token") {
        throw config_error("quant.act_granularity must be per-tensor or per-token");
    }
    if (act_range != "static" && act_range != "dynamic") {
        throw config_error("quant.act_range must be static or dynamic");
    }
    if (act_range == "static" && act_granularity == "per-token") {
        throw config_error("per-token quantization cannot use a static range");
    }
    if (search_range != "static" && search_range != "dynamic") {
        throw config_error("search.range must be static or dynamic");
    }
    if (tau <= 0.0) throw config_error("search.tau must be positive");
    if (lambda < 0.0) throw config_error("tune.lambda must be nonnegative");
    if (epochs < 1) throw config_error("tune.epochs must be >= 1");
    if (threads < 1) throw config_error("run.threads must be >= 1");
    if (smooth_alpha < 0.0 || smooth_alpha > 1.0) {
        throw config_error("quant.smooth_alpha must lie in [0, 1]");
    }
    model_config().validate();
    seed_tokens();
}

TransformerConfig RunConfig::model_config() const {
    TransformerConfig c = arch == "gpt-ish" ? TransformerConfig::gpt_ish()
                                            : TransformerConfig::llama_ish();
    c.vocab_size = vocab_size;
    c.d_model = d_model;
    c.n_layers = n_layers;
    c.n_heads = n_heads;
    c.d_ff = d_ff;
    c.max_seq_len = max_seq_len;
    c.norm_eps = static_cast<float>(norm_eps);
    return c;
}

QuantProfile RunConfig::quant_profile() const {
    QuantProfile p;
    p.weights.bits = weight_bits;
    p.weights.symmetry = Symmetry::symmetric;
    p.weights.granularity = Granularity::per_channel_group;
    p.weights.group_size = weight_group_size;
    p.weights.range_mode = RangeMode::dynamic;
    p.acts.bits = act_bits;
    p.acts.symmetry = act_symmetry == "symmetric" ? Symmetry::symmetric : Symmetry::asymmetric;
    p.acts.granularity =
        act_granularity == "per-token" ? Granularity::per_token : Granularity::per_tensor;
    p.acts.range_mode = act_range == "static" ? RangeMode::static_range : RangeMode::dynamic;
    p.smooth_alpha = smoothquant ? static_cast<float>(smooth_alpha) : 0.f;
    return p;
}

TrainOptions RunConfig::train_options() const {
    TrainOptions o;
    o.steps = train_steps;
    o.batch_size = train_batch;
    o.seq_len = train_seq_len;
    o.lr = static_cast<float>(train_lr);
    o.grad_clip = static_cast<float>(grad_clip);
    o.seed = seed;
    return o;
}

SearchConfig RunConfig::search_config() const {
    SearchConfig c;
    c.max_len = search_max_len;
    c.tau = tau;
    c.seed_tokens = seed_tokens();
    c.candidate_batch = candidate_batch;
    c.text_len = search_text_len;
    c.seed = seed;
    c.threads = threads;
    QuantProfile p = quant_profile();
    c.quant = p.acts;
    c.quant.range_mode = search_range == "static" ? RangeMode::static_range : RangeMode::dynamic;
    return c;
}

TuneConfig RunConfig::tune_config() const {
    TuneConfig c;
    c.lambda = lambda;
    c.epochs = epochs;
    c.lr = static_cast<float>(tune_lr);
    c.batch_size = tune_batch;
    c.seq_len = tune_seq_len;
    c.sequences_per_epoch = sequences_per_epoch;
    c.seed = seed;
    c.quant = quant_profile();
    c.quant_enabled = true;
    return c;
}

TokenSeq RunConfig::seed_tokens() const { return parse_seed_tokens(split_csv(seeds)); }

bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.serialize() == b.serialize();
}

}  // namespace pq
