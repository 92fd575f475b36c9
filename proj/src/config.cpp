#include "ren/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "ren/error.hpp"

namespace ren {
namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::string join_errors(const std::string& head, const std::vector<std::string>& errors) {
    std::string msg = head;
    for (const auto& e : errors) msg += "\n  - " + e;
    return msg;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto pos = s.find(',', start);
        const auto tok = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (!tok.empty()) out.push_back(tok);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string hex(const unsigned char* data, unsigned len) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += digits[data[i] >> 4];
        out += digits[data[i] & 0xf];
    }
    return out;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
    KeyValues kv;
    std::vector<std::string> errors;
    std::size_t first_bad = 0;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto pos = text.find('\n', start);
        std::string_view line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        ++lineno;
        start = pos == std::string_view::npos ? text.size() + 1 : pos + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        std::string problem;
        if (eq == std::string_view::npos) {
            problem = "expected key = value";
        } else {
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (key.empty()) problem = "empty key";
            else if (!kv.emplace(key, value).second) problem = "duplicate key '" + key + "'";
        }
        if (!problem.empty()) {
            if (first_bad == 0) first_bad = lineno;
            errors.push_back("line " + std::to_string(lineno) + ": " + problem);
        }
    }
    if (!errors.empty()) throw ParseError(join_errors("config parse errors:", errors), first_bad);
    return kv;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

KeyValues load_key_values(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw InvalidArgument("config file not found: " + path.string());
    return parse_key_values(read_file(path));
}

const std::vector<std::string>& experiment_keys() {
    static const std::vector<std::string> keys = {
        "env",           "replay_path",    "intervals",     "policy",         "lambda_d",
        "lambda_u",      "delta",          "slate_size",    "rounds",         "finetune_every",
        "train_window",  "rolling_window", "n_seeds",       "seed",           "threads",
        "dim",           "learning_rate",  "grad_clip",     "history_length", "pretrain_epochs",
        "replay_epochs", "out_dir",        "train_sampling", "train_steps",  "max_norm",
        "cell"};
    return keys;
}

const std::vector<std::string>& keys_for(std::string_view subcommand) {
    static const std::vector<std::string> gen_env = {"env", "seed", "slate_size", "history_length", "out_dir"};
    static const std::vector<std::string> sweep = [] {
        auto k = experiment_keys();
        k.push_back("lambda_grid");
        return k;
    }();
    static const std::vector<std::string> regret = {"dim",         "n_arms",      "t_grid", "delta",
                                                    "noise_sigma", "n_instances", "seed",   "bandit_policy",
                                                    "deceptive",   "out_dir"};
    static const std::vector<std::string> bound = {"dim", "n_arms", "horizon", "delta", "trials", "seed", "out_dir"};
    if (subcommand == "gen-env") return gen_env;
    if (subcommand == "run" || subcommand == "ablate") return experiment_keys();
    if (subcommand == "sweep") return sweep;
    if (subcommand == "regret-bench") return regret;
    if (subcommand == "bound-check") return bound;
    throw InvalidArgument("unknown subcommand '" + std::string(subcommand) + "'");
}

void check_known_keys(const KeyValues& kv, const std::vector<std::string>& allowed) {
    std::vector<std::string> errors;
    for (const auto& [key, value] : kv)
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) errors.push_back("unknown key '" + key + "'");
    if (!errors.empty()) throw InvalidArgument(join_errors("config errors:", errors));
}

std::size_t get_size(const KeyValues& kv, const std::string& key, std::size_t fallback,
                     std::vector<std::string>& errors) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::size_t v = 0;
    if (!parse_number(it->second, v)) {
        errors.push_back(key + ": expected a non-negative integer, got '" + it->second + "'");
        return fallback;
    }
    return v;
}

double get_double(const KeyValues& kv, const std::string& key, double fallback, std::vector<std::string>& errors) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    double v = 0.0;
    if (!parse_number(it->second, v) || !std::isfinite(v)) {
        errors.push_back(key + ": expected a finite number, got '" + it->second + "'");
        return fallback;
    }
    return v;
}

std::vector<double> get_double_list(const KeyValues& kv, const std::string& key, std::vector<double> fallback,
                                    std::vector<std::string>& errors) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::vector<double> out;
    for (const auto tok : split_list(it->second)) {
        double v = 0.0;
        if (!parse_number(tok, v) || !std::isfinite(v)) {
            errors.push_back(key + ": bad list element '" + std::string(tok) + "'");
            return fallback;
        }
        out.push_back(v);
    }
    return out;
}

std::vector<std::size_t> get_size_list(const KeyValues& kv, const std::string& key, std::vector<std::size_t> fallback,
                                       std::vector<std::string>& errors) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::vector<std::size_t> out;
    for (const auto tok : split_list(it->second)) {
        std::size_t v = 0;
        if (!parse_number(tok, v)) {
            errors.push_back(key + ": bad list element '" + std::string(tok) + "'");
            return fallback;
        }
        out.push_back(v);
    }
    return out;
}

bool get_bool(const KeyValues& kv, const std::string& key, bool fallback, std::vector<std::string>& errors) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    errors.push_back(key + ": expected true/false, got '" + it->second + "'");
    return fallback;
}

ExperimentConfig experiment_config_from(const KeyValues& kv) {
    ExperimentConfig c;
    std::vector<std::string> errors;
    if (const auto it = kv.find("env"); it != kv.end()) c.env = it->second;
    if (const auto it = kv.find("replay_path"); it != kv.end()) c.replay_path = it->second;
    if (const auto it = kv.find("policy"); it != kv.end()) {
        try {
            c.policy = parse_policy(it->second);
        } catch (const Error& e) {
            errors.push_back(std::string("policy: ") + e.what());
        }
    }
    c.intervals = get_size(kv, "intervals", c.intervals, errors);
    c.lambda_d = get_double(kv, "lambda_d", c.lambda_d, errors);
    if (kv.count("lambda_u")) c.lambda_u = get_double(kv, "lambda_u", 0.0, errors);
    c.delta = get_double(kv, "delta", c.delta, errors);
    c.slate_size = get_size(kv, "slate_size", c.slate_size, errors);
    c.rounds = get_size(kv, "rounds", c.rounds, errors);
    c.finetune_every = get_size(kv, "finetune_every", c.finetune_every, errors);
    c.train_window = get_size(kv, "train_window", c.train_window, errors);
    c.rolling_window = get_size(kv, "rolling_window", c.rolling_window, errors);
    c.n_seeds = get_size(kv, "n_seeds", c.n_seeds, errors);
    c.seed = get_size(kv, "seed", c.seed, errors);
    c.threads = get_size(kv, "threads", c.threads, errors);
    c.dim = get_size(kv, "dim", c.dim, errors);
    c.learning_rate = get_double(kv, "learning_rate", c.learning_rate, errors);
    c.grad_clip = get_double(kv, "grad_clip", c.grad_clip, errors);
    c.history_length = get_size(kv, "history_length", c.history_length, errors);
    c.pretrain_epochs = get_size(kv, "pretrain_epochs", c.pretrain_epochs, errors);
    c.replay_epochs = get_size(kv, "replay_epochs", c.replay_epochs, errors);
    c.train_steps = get_size(kv, "train_steps", c.train_steps, errors);
    c.max_norm = get_double(kv, "max_norm", c.max_norm, errors);
    if (const auto it = kv.find("train_sampling"); it != kv.end()) {
        if (it->second == "recent") c.train_sampling = TrainSampling::recent;
        else if (it->second == "uniform") c.train_sampling = TrainSampling::uniform;
        else errors.push_back("train_sampling: expected recent or uniform, got '" + it->second + "'");
    }
    if (const auto it = kv.find("cell"); it != kv.end()) {
        if (it->second == "gated") c.cell = CellMode::gated;
        else if (it->second == "linear") c.cell = CellMode::linear;
        else errors.push_back("cell: expected gated or linear, got '" + it->second + "'");
    }
    if (errors.empty()) {
        try {
            c.validate();
        } catch (const InvalidArgument& e) {
            errors.push_back(e.what());
        }
    }
    if (!errors.empty()) throw InvalidArgument(join_errors("config errors:", errors));
    return c;
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

KeyValues to_key_values(const ExperimentConfig& c) {
    KeyValues kv;
    kv["env"] = c.env;
    if (!c.replay_path.empty()) kv["replay_path"] = c.replay_path;
    kv["intervals"] = std::to_string(c.intervals);
    kv["policy"] = std::string(policy_name(c.policy));
    kv["lambda_d"] = format_double(c.lambda_d);
    if (c.lambda_u) kv["lambda_u"] = format_double(*c.lambda_u);
    kv["delta"] = format_double(c.delta);
    kv["slate_size"] = std::to_string(c.slate_size);
    kv["rounds"] = std::to_string(c.rounds);
    kv["finetune_every"] = std::to_string(c.finetune_every);
    kv["train_window"] = std::to_string(c.train_window);
    kv["rolling_window"] = std::to_string(c.rolling_window);
    kv["n_seeds"] = std::to_string(c.n_seeds);
    kv["seed"] = std::to_string(c.seed);
    kv["threads"] = std::to_string(c.threads);
    kv["dim"] = std::to_string(c.dim);
    kv["learning_rate"] = format_double(c.learning_rate);
    kv["grad_clip"] = format_double(c.grad_clip);
    kv["history_length"] = std::to_string(c.history_length);
    kv["pretrain_epochs"] = std::to_string(c.pretrain_epochs);
    kv["replay_epochs"] = std::to_string(c.replay_epochs);
    kv["train_steps"] = std::to_string(c.train_steps);
    kv["max_norm"] = format_double(c.max_norm);
    kv["train_sampling"] = c.train_sampling == TrainSampling::recent ? "recent" : "uniform";
    kv["cell"] = c.cell == CellMode::gated ? "gated" : "linear";
    return kv;
}

std::string format_key_values(const KeyValues& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

std::string git_blob_sha1(std::string_view bytes) {
    const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw InvalidState("sha1: cannot allocate digest context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 && EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw InvalidState("sha1: digest failed");
    return hex(digest, len);
}

std::string manifest_json(const Manifest& m) {
    nlohmann::ordered_json j;
    j["subcommand"] = m.subcommand;
    j["config"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.config) j["config"][k] = v;
    j["seeds"] = m.seeds;
    j["inputs"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.input_hashes) j["inputs"][k] = v;
    j["outputs"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.output_hashes) j["outputs"][k] = v;
    return j.dump(2) + "\n";
}

Manifest parse_manifest(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("manifest: ") + e.what(), 0);
    }
    Manifest m;
    try {
        m.subcommand = j.at("subcommand").get<std::string>();
        for (const auto& [k, v] : j.at("config").items()) m.config[k] = v.get<std::string>();
        if (j.contains("seeds")) m.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("inputs"))
            for (const auto& [k, v] : j["inputs"].items()) m.input_hashes[k] = v.get<std::string>();
        if (j.contains("outputs"))
            for (const auto& [k, v] : j["outputs"].items()) m.output_hashes[k] = v.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what(), 0);
    }
    return m;
}

}  // namespace ren
